from __future__ import annotations

from dataclasses import dataclass, replace
import logging
import math
from typing import Optional, Sequence, Tuple
import warnings

import numpy as np

from ..helpers.distributions import draw_bnb, draw_nb
from ..helpers.errors import ClampWarning, NonStationaryError
from .dynamics import (
    DistFamily,
    DynFamily,
    GasParams,
    ModelSpec,
    check_strict_stationarity,
    make_updater,
)

logger = logging.getLogger(__name__)

DEFAULT_BURN_IN = 500

# synthetic stand-in for a 264-month crime-count series: BNB-GAS at the fitted
# values reported for that data, with three isolated spikes
FIXTURE_T = 264
FIXTURE_OUTLIERS = (67, 158, 244)
FIXTURE_OUTLIER_SCALE = 15.0
FIXTURE_NOTE = "SYNTHETIC look-alike series; NOT the original empirical data"


@dataclass(frozen=True, eq=False)
class SimulatedPath:
    """
    One simulated path (y_t, lambda_t), t = 0..T-1, after burn-in.

    After inject_outliers, `y` no longer follows the model at the recorded
    positions while `lam` still holds the uncontaminated means.
    """
    y: np.ndarray
    lam: np.ndarray
    seed: int
    burn_in: int
    spec: ModelSpec
    clamp_hits: int = 0
    outlier_positions: Tuple[int, ...] = ()
    outlier_magnitudes: Tuple[int, ...] = ()
    diagnostics: Tuple[str, ...] = ()
    note: Optional[str] = None

    def __len__(self) -> int:
        return int(self.y.shape[0])

    @property
    def T(self) -> int:
        return len(self)

    def metadata(self) -> dict:
        return {
            "model": self.spec.name,
            "params": self.spec.as_dict(),
            "delta": self.spec.delta,
            "T": self.T,
            "burn_in": self.burn_in,
            "seed": self.seed,
            "clamp_hits": self.clamp_hits,
            "outlier_positions": list(self.outlier_positions),
            "outlier_magnitudes": list(self.outlier_magnitudes),
            "diagnostics": list(self.diagnostics),
            "note": self.note,
        }


def simulate(
    spec: ModelSpec,
    T: int,
    burn_in: int = DEFAULT_BURN_IN,
    seed: int = 0,
    allow_nonstationary: bool = False,
) -> SimulatedPath:
    """
    Draw y_t | lambda_t from the conditional law, then lambda_{t+1} = g(y_t, lambda_t).

    lambda starts at the unconditional mean; the first burn_in steps are dropped.
    Same (spec, T, burn_in, seed) -> bitwise identical path.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    if burn_in < 0:
        raise ValueError("burn_in must be >= 0")

    report = check_strict_stationarity(spec)
    if not report.holds:
        if not allow_nonstationary:
            raise NonStationaryError(
                f"{spec.name}: stationarity condition {report.condition} fails "
                f"(margin {report.margin:.6g} >= 1)"
            )
        logger.info("simulating %s outside the checked region (margin %.6g)", spec.name, report.margin)

    rng = np.random.default_rng(seed)
    step = make_updater(spec)
    r, alpha = spec.r, spec.alpha
    bnb = spec.dist == DistFamily.BNB

    lam = spec.unconditional_lambda()
    if not (math.isfinite(lam) and lam > 0.0):
        # no unconditional mean outside the stationary region; start from omega
        lam = spec.theta.omega if spec.dyn == DynFamily.INGARCH else 1.0

    n = burn_in + T
    ys = np.empty(T, dtype=np.int64)
    lams = np.empty(T, dtype=float)
    hits = 0

    for t in range(n):
        y = draw_bnb(rng, lam, r, alpha) if bnb else draw_nb(rng, lam, r)
        if t >= burn_in:
            ys[t - burn_in] = y
            lams[t - burn_in] = lam
        lam, hit = step(float(y), lam)
        if hit:
            hits += 1
        if not (math.isfinite(lam) and lam > 0.0):
            raise NonStationaryError(f"{spec.name}: lambda left (0, inf) at step {t}")

    notes: Tuple[str, ...] = ()
    if hits:
        msg = f"log-lambda clamp hit {hits} time(s) during simulation"
        notes = (msg,)
        warnings.warn(msg, ClampWarning, stacklevel=2)
    logger.debug("simulated %s T=%d burn_in=%d seed=%d", spec.name, T, burn_in, seed)

    return SimulatedPath(
        y=ys,
        lam=lams,
        seed=int(seed),
        burn_in=int(burn_in),
        spec=spec,
        clamp_hits=hits,
        diagnostics=notes,
    )


def inject_outliers(
    path: SimulatedPath,
    positions: Sequence[int],
    magnitudes: Sequence[int],
) -> SimulatedPath:
    """Copy of `path` with y[positions] replaced by the given counts."""
    if len(positions) != len(magnitudes):
        raise ValueError("positions and magnitudes must have equal length")
    T = len(path)
    for pos in positions:
        if not 0 <= int(pos) < T:
            raise ValueError(f"outlier position {pos} outside [0, {T})")
    for m in magnitudes:
        if int(m) < 0:
            raise ValueError(f"outlier magnitude must be a nonnegative count, got {m}")

    y = path.y.copy()
    for pos, m in zip(positions, magnitudes):
        y[int(pos)] = int(m)

    return replace(
        path,
        y=y,
        outlier_positions=path.outlier_positions + tuple(int(p) for p in positions),
        outlier_magnitudes=path.outlier_magnitudes + tuple(int(m) for m in magnitudes),
    )


def lookalike_spec() -> ModelSpec:
    phi = 0.714
    theta = GasParams(omega=2.087 * (1.0 - phi), phi=phi, tau=0.197)
    return ModelSpec(dist=DistFamily.BNB, dyn=DynFamily.GAS, r=4.408, alpha=5.029, theta=theta)


def lookalike_fixture(seed: int = 0, scale: float = FIXTURE_OUTLIER_SCALE) -> SimulatedPath:
    """264-point BNB-GAS series with spikes of `scale` x the series mean at 67, 158, 244."""
    spec = lookalike_spec()
    # the contraction bound is only sufficient and fails at these values
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ClampWarning)
        path = simulate(spec, FIXTURE_T, DEFAULT_BURN_IN, seed, allow_nonstationary=True)
    spike = int(round(scale * float(np.mean(path.y))))
    path = inject_outliers(path, FIXTURE_OUTLIERS, [spike] * len(FIXTURE_OUTLIERS))
    return replace(path, note=FIXTURE_NOTE)
