from __future__ import annotations

from dataclasses import dataclass, field, replace
import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple
import warnings

from joblib import Parallel, delayed
import numpy as np

from ..engine.dynamics import DistFamily, DynFamily, IngarchParams, ModelSpec, check_strict_stationarity
from ..engine.simulation import DEFAULT_BURN_IN, inject_outliers, lookalike_fixture, simulate
from ..helpers.distributions import BnbParams, bnb_score_loglambda
from ..helpers.errors import ClampWarning, EstimationWarning, NonStationaryError, ParameterDomainError
from ..helpers.running import StatsTable
from ..helpers.series_io import PathLike, write_json, write_table_csv
from .likelihood import filter_series
from .mle import FitOptions, FitResult, compare, fit, fit_all

logger = logging.getLogger(__name__)

MIN_MC_T = 50
REPORT_PARAMS = ("delta", "phi", "tau", "inv_r", "inv_alpha")
DEFAULT_T_GRID = (250, 500, 1000, 2000)
DEFAULT_REPS = 200

# a report with more failed replications than this share is flagged
FAILURE_FLAG_SHARE = 0.10

MC_FIT_OPTIONS = FitOptions(n_restarts=1)


def replication_seed(base_seed: int, T: int, k: int) -> int:
    """Seed of replication k at sample size T; adding T values leaves other cells alone."""
    return int(np.random.SeedSequence([int(base_seed), int(T), int(k)]).generate_state(1)[0])


# ------------------------------------------------------------
# Design / report
# ------------------------------------------------------------

@dataclass(frozen=True)
class McDesign:
    spec: ModelSpec
    T_grid: Tuple[int, ...] = DEFAULT_T_GRID
    n_reps: int = DEFAULT_REPS
    base_seed: int = 0
    report_params: Tuple[str, ...] = REPORT_PARAMS
    burn_in: int = DEFAULT_BURN_IN
    fit_options: FitOptions = MC_FIT_OPTIONS

    def __post_init__(self) -> None:
        if self.n_reps < 1:
            raise ValueError("n_reps must be >= 1")
        if not self.T_grid or any(int(T) < MIN_MC_T for T in self.T_grid):
            raise ValueError(f"every T in T_grid must be >= {MIN_MC_T}")
        for p in self.report_params:
            if self.spec.quantity(p) is None:
                raise ParameterDomainError(f"{p} is not defined for {self.spec.name}")
        report = check_strict_stationarity(self.spec)
        if not report.holds:
            raise NonStationaryError(f"truth fails {report.condition} (margin {report.margin:.6g})")

    def truths(self) -> Dict[str, float]:
        return {p: float(self.spec.quantity(p)) for p in self.report_params}

    def to_dict(self) -> Dict[str, object]:
        return {
            "model": self.spec.name,
            "truth": self.spec.as_dict(),
            "T_grid": [int(T) for T in self.T_grid],
            "n_reps": self.n_reps,
            "base_seed": self.base_seed,
            "report_params": list(self.report_params),
            "burn_in": self.burn_in,
            "fit_options": self.fit_options.to_dict(),
        }


@dataclass(frozen=True, slots=True)
class McCell:
    T: int
    parameter: str
    truth: float
    mean: float
    sd: float
    rmse: float
    n: int
    mean_se: float = float("nan")
    n_se: int = 0

    @property
    def bias(self) -> float:
        return self.mean - self.truth

    @property
    def se_ratio(self) -> float:
        """Mean reported SE over the Monte Carlo SD of the estimates."""
        return self.mean_se / self.sd if self.n_se and self.sd > 0.0 else float("nan")


@dataclass(frozen=True)
class McReport:
    design: McDesign
    cells: Tuple[McCell, ...]
    failures: Dict[int, int]
    non_converged: Dict[int, int]
    errors: Tuple[str, ...] = ()

    @property
    def failure_count(self) -> int:
        return sum(self.failures.values())

    @property
    def flagged(self) -> bool:
        return any(f > FAILURE_FLAG_SHARE * self.design.n_reps for f in self.failures.values())

    def cell(self, T: int, parameter: str) -> McCell:
        for c in self.cells:
            if c.T == T and c.parameter == parameter:
                return c
        raise KeyError((T, parameter))

    def rows(self) -> List[Tuple[int, str, float, float, float, float]]:
        return [(c.T, c.parameter, c.truth, c.mean, c.sd, c.rmse) for c in self.cells]

    def to_dict(self) -> Dict[str, object]:
        return {
            "design": self.design.to_dict(),
            "cells": [
                {"T": c.T, "parameter": c.parameter, "truth": c.truth, "mean": c.mean,
                 "sd": c.sd, "rmse": c.rmse, "n": c.n,
                 "mean_se": c.mean_se, "se_ratio": c.se_ratio, "n_se": c.n_se}
                for c in self.cells
            ],
            "failures": {str(T): n for T, n in self.failures.items()},
            "failure_count": self.failure_count,
            "non_converged": {str(T): n for T, n in self.non_converged.items()},
            "flagged": self.flagged,
            "errors": list(self.errors),
        }

    def to_csv(self, path: PathLike, config: Optional[Dict[str, object]] = None) -> None:
        write_table_csv(path, ["T", "parameter", "truth", "mean", "sd", "rmse"], self.rows(), config)

    def to_json(self, path: PathLike, config: Optional[Dict[str, object]] = None) -> None:
        doc = self.to_dict()
        if config is not None:
            doc["config"] = config
        write_json(path, doc)


# ------------------------------------------------------------
# Simulate -> fit loop
# ------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class _Outcome:
    T: int
    k: int
    values: Optional[Dict[str, float]]
    converged: bool
    error: Optional[str] = None
    ses: Optional[Dict[str, Optional[float]]] = None


def reported_se(res: FitResult, name: str) -> Optional[float]:
    """Standard error the fit reports for a natural- or derived-scale quantity."""
    if name in res.se_derived:
        return res.se_derived[name]
    names = res.spec.param_names
    if res.se is None or name not in names:
        return None
    return float(res.se[names.index(name)])


def _replicate(design: McDesign, T: int, k: int) -> _Outcome:
    seed = replication_seed(design.base_seed, T, k)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", EstimationWarning)
            warnings.simplefilter("ignore", ClampWarning)
            path = simulate(design.spec, T, design.burn_in, seed)
            res = fit(design.spec.name, path.y, replace(design.fit_options, seed=seed, n_jobs=1))
    except (ValueError, ArithmeticError, RuntimeError) as e:
        return _Outcome(T, k, None, False, f"T={T} k={k}: {e!r}")

    values = {p: res.estimate(p) for p in design.report_params}
    if not all(v is not None and math.isfinite(v) for v in values.values()):
        return _Outcome(T, k, None, res.converged, f"T={T} k={k}: non-finite estimate")
    ses = {p: reported_se(res, p) for p in design.report_params}
    return _Outcome(T, k, values, res.converged, ses=ses)


def run_mc(design: McDesign, n_jobs: int = 1) -> McReport:
    """
    Simulate-and-fit every (T, k) cell, then reduce in (T, k) order.

    Output does not depend on n_jobs.
    """
    tasks = [(int(T), k) for T in design.T_grid for k in range(design.n_reps)]
    if n_jobs == 1:
        outcomes = [_replicate(design, T, k) for T, k in tasks]
    else:
        outcomes = Parallel(n_jobs=n_jobs)(delayed(_replicate)(design, T, k) for T, k in tasks)

    truths = design.truths()
    by_T: Dict[int, StatsTable] = {int(T): StatsTable(truths) for T in design.T_grid}
    se_by_T: Dict[int, StatsTable] = {int(T): StatsTable() for T in design.T_grid}
    failures = {int(T): 0 for T in design.T_grid}
    non_converged = {int(T): 0 for T in design.T_grid}
    errors: List[str] = []

    for out in outcomes:
        if out.values is None:
            failures[out.T] += 1
            errors.append(out.error or "unknown failure")
            continue
        if not out.converged:
            non_converged[out.T] += 1
        table = by_T[out.T]
        for p in design.report_params:
            table.update(p, out.values[p])
            se = (out.ses or {}).get(p)
            if se is not None and math.isfinite(se):
                se_by_T[out.T].update(p, se)

    cells: List[McCell] = []
    nan = float("nan")
    for T in design.T_grid:
        table = by_T[int(T)]
        for p in design.report_params:
            st = table.get_or_create(p)
            se_st = se_by_T[int(T)].get_or_create(p)
            cells.append(McCell(
                T=int(T),
                parameter=p,
                truth=truths[p],
                mean=st.mean if st.n else nan,
                sd=st.sd,
                rmse=st.rmse,
                n=st.n,
                mean_se=se_st.mean if se_st.n else nan,
                n_se=se_st.n,
            ))
        logger.info("T=%d: %d ok, %d failed, %d not converged",
                    T, table.get_or_create(design.report_params[0]).n, failures[int(T)], non_converged[int(T)])

    report = McReport(
        design=design,
        cells=tuple(cells),
        failures=failures,
        non_converged=non_converged,
        errors=tuple(errors),
    )
    if report.flagged:
        logger.warning("more than %.0f%% of replications failed in some cell", 100 * FAILURE_FLAG_SHARE)
    return report


# ------------------------------------------------------------
# Presets: delta=10, tau=0.2, 1/r=0.1, phi in {0.5, 0.68}, 1/alpha in {0.2, 0.1}
# ------------------------------------------------------------

PRESETS: Dict[str, Tuple[float, float]] = {
    "phi50-alpha5": (0.50, 0.20),
    "phi50-alpha10": (0.50, 0.10),
    "phi68-alpha5": (0.68, 0.20),
    "phi68-alpha10": (0.68, 0.10),
}


def preset_spec(name: str) -> ModelSpec:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; expected one of {', '.join(PRESETS)}")
    phi, inv_alpha = PRESETS[name]
    return ModelSpec(
        dist=DistFamily.BNB,
        dyn=DynFamily.INGARCH,
        r=10.0,
        alpha=1.0 / inv_alpha,
        theta=IngarchParams.from_delta(10.0, phi, 0.2),
    )


def preset_design(
    name: str,
    T_grid: Sequence[int] = DEFAULT_T_GRID,
    n_reps: int = DEFAULT_REPS,
    base_seed: int = 0,
) -> McDesign:
    return McDesign(spec=preset_spec(name), T_grid=tuple(int(T) for T in T_grid), n_reps=n_reps, base_seed=base_seed)


# ------------------------------------------------------------
# Score impact curves
# ------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class ScorePoint:
    alpha: float
    y: int
    score: float


def score_curve(alpha_list: Sequence[float], r: float, lam: float, y_max: int) -> List[ScorePoint]:
    """s(y) = d log p(y | lam) / d log lam for y = 0..y_max, one curve per alpha."""
    if y_max < 0:
        raise ValueError("y_max must be >= 0")
    ys = np.arange(int(y_max) + 1)
    out: List[ScorePoint] = []
    for a in alpha_list:
        s = np.atleast_1d(bnb_score_loglambda(ys, BnbParams(lam=lam, r=r, alpha=float(a))))
        out.extend(ScorePoint(float(a), int(y), float(v)) for y, v in zip(ys, s))
    return out


# ------------------------------------------------------------
# Model selection and outlier robustness
# ------------------------------------------------------------

def outlier_excursion(lam_hat: Sequence[float], positions: Sequence[int], window: int = 10) -> float:
    """
    Largest relative rise of the filtered mean in the `window` steps after an
    outlier, measured against its average over the `window` steps before it.
    """
    lam = np.asarray(lam_hat, dtype=float)
    worst = 0.0
    for p in positions:
        pre = lam[max(0, p - window + 1):p + 1]
        post = lam[p + 1:p + 1 + window]
        if pre.size == 0 or post.size == 0:
            continue
        base = float(np.mean(pre))
        worst = max(worst, (float(np.max(post)) - base) / base)
    return worst


@dataclass(frozen=True)
class SelectionReport:
    n_reps: int
    bnb_wins: int
    failures: int
    winners: Tuple[Optional[str], ...] = field(default=())

    @property
    def bnb_win_rate(self) -> float:
        done = self.n_reps - self.failures
        return self.bnb_wins / done if done else float("nan")

    def to_dict(self) -> Dict[str, object]:
        return {
            "n_reps": self.n_reps,
            "bnb_wins": self.bnb_wins,
            "failures": self.failures,
            "bnb_win_rate": self.bnb_win_rate,
            "winners": list(self.winners),
        }


def _select_once(
    spec: ModelSpec,
    T: int,
    seed: int,
    outlier_positions: Sequence[int],
    outlier_scale: float,
    options: FitOptions,
) -> Optional[str]:
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", EstimationWarning)
            warnings.simplefilter("ignore", ClampWarning)
            path = simulate(spec, T, DEFAULT_BURN_IN, seed, allow_nonstationary=True)
            if outlier_positions:
                spike = int(round(outlier_scale * float(np.mean(path.y))))
                path = inject_outliers(path, outlier_positions, [spike] * len(outlier_positions))
            ranking = compare(fit_all(path.y, replace(options, seed=seed, n_jobs=1)))
    except (ValueError, ArithmeticError, RuntimeError) as e:
        logger.debug("selection replication seed=%d failed: %r", seed, e)
        return None
    return ranking[0].model


def run_model_selection(
    spec: ModelSpec,
    T: int,
    n_reps: int,
    base_seed: int = 0,
    outlier_positions: Sequence[int] = (),
    outlier_scale: float = 15.0,
    options: FitOptions = MC_FIT_OPTIONS,
    n_jobs: int = 1,
) -> SelectionReport:
    """Share of replications where a BNB family has the lowest AIC of the four."""
    seeds = [replication_seed(base_seed, T, k) for k in range(n_reps)]
    args = (spec, T)
    if n_jobs == 1:
        winners = [_select_once(*args, s, outlier_positions, outlier_scale, options) for s in seeds]
    else:
        winners = Parallel(n_jobs=n_jobs)(
            delayed(_select_once)(*args, s, outlier_positions, outlier_scale, options) for s in seeds
        )
    wins = sum(1 for w in winners if w is not None and w.startswith("bnb"))
    fails = sum(1 for w in winners if w is None)
    return SelectionReport(n_reps=n_reps, bnb_wins=wins, failures=fails, winners=tuple(winners))


def robustness_contrast(seed: int = 0, options: FitOptions = MC_FIT_OPTIONS) -> Dict[str, float]:
    """Fit BNB-GAS and NB-GAS to the look-alike fixture and compare post-outlier excursions."""
    path = lookalike_fixture(seed)
    out: Dict[str, float] = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EstimationWarning)
        for fam in ("bnb-gas", "nb-gas"):
            res = fit(fam, path.y, replace(options, seed=seed))
            flt = filter_series(res.spec, path.y, res.lambda_init)
            out[fam] = outlier_excursion(flt.lambda_hat, path.outlier_positions)
    return out
