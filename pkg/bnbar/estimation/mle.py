from __future__ import annotations

from dataclasses import dataclass, replace
import hashlib
import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple
import warnings

from joblib import Parallel, delayed
import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, logit

from ..engine.dynamics import (
    ALL_FAMILIES,
    DistFamily,
    DynFamily,
    ModelSpec,
    parse_family,
)
from ..helpers.distributions import as_counts
from ..helpers.errors import EstimationWarning, SeriesMismatchError
from .likelihood import average_loglik, default_lambda_init, filter_path

logger = logging.getLogger(__name__)

MIN_SERIES_LENGTH = 20

# objective value for kappa where the filter produced a non-finite likelihood
FAIL_SENTINEL = 1e12

# log-scale coordinates are kept in [-_U_BOUND, _U_BOUND]; probabilities in [_EPS, 1 - _EPS]
_U_BOUND = 30.0
_EPS = 1e-12

# jittered restarts draw from this sub-stream of the fit seed
_JITTER_STREAM = 1
_JITTER_SD = 0.5

# start heuristic
PHI_START = 0.5
TAU_START = 0.2
ALPHA_START = 5.0
R_START_MAX = 1e3


@dataclass(frozen=True)
class FitOptions:
    n_restarts: int = 3
    seed: int = 0
    maxiter: int = 4000
    xatol: float = 1e-8
    fatol: float = 1e-10
    cycle_tol: float = 1e-9
    max_cycles: int = 6
    lambda_init: Optional[float] = None
    start: Optional[Tuple[float, ...]] = None   # natural-scale kappa
    n_jobs: int = 1

    def to_dict(self) -> Dict[str, object]:
        return {
            "n_restarts": self.n_restarts,
            "seed": self.seed,
            "maxiter": self.maxiter,
            "xatol": self.xatol,
            "fatol": self.fatol,
            "cycle_tol": self.cycle_tol,
            "max_cycles": self.max_cycles,
            "lambda_init": self.lambda_init,
            "start": list(self.start) if self.start is not None else None,
        }


# ------------------------------------------------------------
# Reparameterization: natural kappa <-> unconstrained u
# ------------------------------------------------------------

def _clip_prob(x: np.ndarray) -> np.ndarray:
    return np.clip(x, _EPS, 1.0 - _EPS)


def to_unconstrained(dist: int, dyn: int, kappa: Sequence[float]) -> np.ndarray:
    k = np.asarray(kappa, dtype=float)
    if dist == DistFamily.BNB:
        head = [math.log(k[0]), math.log(k[1] - 1.0)]
        omega, phi, tau = k[2:]
    else:
        head = [math.log(k[0])]
        omega, phi, tau = k[1:]

    if dyn == DynFamily.INGARCH:
        s = phi + tau
        v = phi / s
        tail = [math.log(omega), float(logit(_clip_prob(s))), float(logit(_clip_prob(v)))]
    else:
        tail = [omega, float(logit(_clip_prob(phi))), math.log(tau)]
    return np.clip(np.array(head + tail, dtype=float), -_U_BOUND, _U_BOUND)


def from_unconstrained(dist: int, dyn: int, u: Sequence[float]) -> np.ndarray:
    """
    r = exp(a), alpha = 1 + exp(b);
    INGARCH: omega = exp(c), phi = s v, tau = s (1 - v), s = sigmoid(d), v = sigmoid(e);
    GAS: omega = c, phi = sigmoid(d), tau = exp(e).
    """
    u = np.clip(np.asarray(u, dtype=float), -_U_BOUND, _U_BOUND)
    if dist == DistFamily.BNB:
        head = [math.exp(u[0]), 1.0 + math.exp(u[1])]
        c, d, e = u[2:]
    else:
        head = [math.exp(u[0])]
        c, d, e = u[1:]

    if dyn == DynFamily.INGARCH:
        s, v = _clip_prob(expit(np.array([d, e])))
        tail = [math.exp(c), s * v, s * (1.0 - v)]
    else:
        tail = [c, float(_clip_prob(expit(d))), math.exp(e)]
    return np.array(head + tail, dtype=float)


def start_kappa(dist: int, dyn: int, y: np.ndarray) -> np.ndarray:
    """delta from the sample mean, phi=0.5, tau=0.2, r by NB moments, alpha=5."""
    m = default_lambda_init(y)
    var = float(np.var(y))
    r0 = m * m / (var - m) if var > m else R_START_MAX
    r0 = float(np.clip(r0, 0.1, R_START_MAX))

    if dyn == DynFamily.INGARCH:
        omega0 = m * (1.0 - PHI_START - TAU_START)
    else:
        omega0 = (1.0 - PHI_START) * math.log(m)
    head = [r0, ALPHA_START] if dist == DistFamily.BNB else [r0]
    return np.array(head + [omega0, PHI_START, TAU_START], dtype=float)


# ------------------------------------------------------------
# Fit result
# ------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FitResult:
    spec: ModelSpec
    kappa_hat: np.ndarray
    se: Optional[np.ndarray]
    se_derived: Dict[str, Optional[float]]
    loglik: float
    aic: float
    converged: bool
    n_restarts: int
    fisher: Optional[np.ndarray]
    n_obs: int
    series_sha256: str
    lambda_init: float
    diagnostics: Tuple[str, ...] = ()
    clamp_hits: int = 0

    @property
    def family(self) -> str:
        return self.spec.name

    @property
    def k(self) -> int:
        return self.spec.n_params

    @property
    def delta(self) -> float:
        return self.spec.delta

    @property
    def log_delta(self) -> Optional[float]:
        return self.spec.theta.log_delta if self.spec.dyn == DynFamily.GAS else None

    @property
    def inv_r(self) -> float:
        return 1.0 / self.spec.r

    @property
    def inv_alpha(self) -> Optional[float]:
        return None if self.spec.alpha is None else 1.0 / self.spec.alpha

    def estimate(self, name: str) -> Optional[float]:
        return self.spec.quantity(name)

    def to_dict(self) -> Dict[str, object]:
        names = self.spec.param_names
        return {
            "model": self.family,
            "n_obs": self.n_obs,
            "series_sha256": self.series_sha256,
            "kappa_hat": {n: float(v) for n, v in zip(names, self.kappa_hat)},
            "se": None if self.se is None else {n: float(v) for n, v in zip(names, self.se)},
            "se_derived": dict(self.se_derived),
            "loglik": self.loglik,
            "aic": self.aic,
            "k": self.k,
            "delta": self.delta,
            "log_delta": self.log_delta,
            "inv_r": self.inv_r,
            "inv_alpha": self.inv_alpha,
            "converged": self.converged,
            "n_restarts": self.n_restarts,
            "lambda_init": self.lambda_init,
            "fisher": None if self.fisher is None else self.fisher.tolist(),
            "diagnostics": list(self.diagnostics),
            "clamp_hits": self.clamp_hits,
        }


def series_fingerprint(y: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(y, dtype="<i8").tobytes()).hexdigest()


# ------------------------------------------------------------
# Optimizer
# ------------------------------------------------------------

class _Objective:
    """Negative average log-likelihood over the unconstrained coordinates."""
    def __init__(self, dist: int, dyn: int, y: np.ndarray, lambda_init: float):
        self.dist = dist
        self.dyn = dyn
        self.y = y
        self.lambda_init = lambda_init
        self.n_evals = 0

    def __call__(self, u: np.ndarray) -> float:
        self.n_evals += 1
        try:
            with np.errstate(all="ignore"):
                kappa = from_unconstrained(self.dist, self.dyn, u)
                ll = average_loglik(self.dist, self.dyn, kappa, self.y, self.lambda_init)
        except (ArithmeticError, ValueError):
            return FAIL_SENTINEL
        return -ll if math.isfinite(ll) else FAIL_SENTINEL


def _simplex(obj: _Objective, u0: np.ndarray, options: FitOptions):
    return minimize(
        obj,
        u0,
        method="Nelder-Mead",
        options={
            "maxiter": options.maxiter,
            "xatol": options.xatol,
            "fatol": options.fatol,
            "adaptive": True,
        },
    )


def _polish(obj: _Objective, u0: np.ndarray, options: FitOptions) -> Tuple[np.ndarray, float, bool]:
    """
    Restart the simplex from its own optimum until one full cycle improves
    the objective by less than cycle_tol.
    """
    res = _simplex(obj, u0, options)
    best_u, best_f = res.x, float(res.fun)
    settled = False
    for cycle in range(options.max_cycles):
        res = _simplex(obj, best_u, options)
        gain = best_f - float(res.fun)
        if res.fun < best_f:
            best_u, best_f = res.x, float(res.fun)
        logger.debug("simplex cycle %d: f=%.12g gain=%.3g", cycle, best_f, gain)
        if gain < options.cycle_tol:
            settled = True
            break
    return best_u, best_f, settled


def _run_start(dist: int, dyn: int, y: np.ndarray, lam1: float, u0: np.ndarray, options: FitOptions):
    obj = _Objective(dist, dyn, y, lam1)
    u, f, settled = _polish(obj, u0, options)
    return u, f, settled, obj.n_evals


def _starts(dist: int, dyn: int, y: np.ndarray, options: FitOptions) -> List[np.ndarray]:
    k0 = np.asarray(options.start, dtype=float) if options.start is not None else start_kappa(dist, dyn, y)
    u0 = to_unconstrained(dist, dyn, k0)
    rng = np.random.default_rng([options.seed, _JITTER_STREAM])
    out = [u0]
    for _ in range(options.n_restarts):
        out.append(u0 + rng.normal(0.0, _JITTER_SD, size=u0.shape))
    return out


# ------------------------------------------------------------
# Fisher information and standard errors
# ------------------------------------------------------------

def numerical_hessian(f, x: np.ndarray, rel_step: float = 1e-4) -> np.ndarray:
    """Central-difference Hessian with h_i = rel_step * max(1, |x_i|)."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    h = rel_step * np.maximum(1.0, np.abs(x))
    f0 = f(x)
    H = np.empty((n, n))

    def at(i: int, si: float, j: int = -1, sj: float = 0.0) -> float:
        z = x.copy()
        z[i] += si * h[i]
        if j >= 0:
            z[j] += sj * h[j]
        return f(z)

    for i in range(n):
        H[i, i] = (at(i, 1.0) - 2.0 * f0 + at(i, -1.0)) / (h[i] * h[i])
        for j in range(i + 1, n):
            v = (at(i, 1.0, j, 1.0) - at(i, 1.0, j, -1.0) - at(i, -1.0, j, 1.0) + at(i, -1.0, j, -1.0))
            H[i, j] = H[j, i] = v / (4.0 * h[i] * h[j])
    return H


def _derived_gradients(spec: ModelSpec) -> Dict[str, np.ndarray]:
    names = spec.param_names
    idx = {n: i for i, n in enumerate(names)}
    th = spec.theta
    grads: Dict[str, np.ndarray] = {}

    g = np.zeros(len(names))
    if spec.dyn == DynFamily.INGARCH:
        gap = 1.0 - th.phi - th.tau
        g[idx["omega"]] = 1.0 / gap
        g[idx["phi"]] = g[idx["tau"]] = th.omega / (gap * gap)
        grads["delta"] = g
    else:
        gap = 1.0 - th.phi
        lg = np.zeros(len(names))
        lg[idx["omega"]] = 1.0 / gap
        lg[idx["phi"]] = th.omega / (gap * gap)
        grads["log_delta"] = lg
        grads["delta"] = th.delta * lg

    g = np.zeros(len(names))
    g[idx["r"]] = -1.0 / (spec.r * spec.r)
    grads["inv_r"] = g
    if spec.alpha is not None:
        g = np.zeros(len(names))
        g[idx["alpha"]] = -1.0 / (spec.alpha * spec.alpha)
        grads["inv_alpha"] = g
    return grads


def standard_errors(
    spec: ModelSpec,
    y: np.ndarray,
    lambda_init: float,
) -> Tuple[Optional[np.ndarray], Optional[np.ndarray], Dict[str, Optional[float]], List[str]]:
    """
    F = -Hessian of the average log-likelihood at kappa (natural scale);
    se_i = sqrt((F^-1)_ii / T). Derived SEs by the delta method.
    """
    kappa = spec.kappa()
    T = y.shape[0]
    notes: List[str] = []

    def f(k: np.ndarray) -> float:
        with np.errstate(all="ignore"):
            return average_loglik(spec.dist, spec.dyn, k, y, lambda_init)

    fisher = -numerical_hessian(f, kappa)
    derived: Dict[str, Optional[float]] = {n: None for n in _derived_gradients(spec)}
    if not np.all(np.isfinite(fisher)):
        notes.append("Hessian has non-finite entries; standard errors unavailable")
        return None, None, derived, notes

    fisher = 0.5 * (fisher + fisher.T)
    try:
        np.linalg.cholesky(fisher)
        cov = np.linalg.inv(fisher) / T
    except np.linalg.LinAlgError:
        notes.append("Fisher matrix is not positive definite; standard errors unavailable")
        return None, fisher, derived, notes

    se = np.sqrt(np.diag(cov))
    for name, g in _derived_gradients(spec).items():
        derived[name] = float(math.sqrt(max(float(g @ cov @ g), 0.0)))
    return se, fisher, derived, notes


# ------------------------------------------------------------
# Public API
# ------------------------------------------------------------

def fit(family: str, y: Sequence[int], options: Optional[FitOptions] = None) -> FitResult:
    """
    Maximum likelihood fit of one family to a count series.

    Nelder-Mead over the unconstrained coordinates from the heuristic start
    plus n_restarts jittered starts; the best optimum is polished until a
    full cycle gains less than cycle_tol.
    """
    options = options or FitOptions()
    dist, dyn = parse_family(family)
    yy = as_counts(y)
    if yy.ndim != 1 or yy.shape[0] < MIN_SERIES_LENGTH:
        raise ValueError(f"need a 1-d series of at least {MIN_SERIES_LENGTH} observations, got {yy.shape}")

    lam1 = default_lambda_init(yy) if options.lambda_init is None else float(options.lambda_init)
    starts = _starts(dist, dyn, yy, options)

    if options.n_jobs == 1:
        runs = [_run_start(dist, dyn, yy, lam1, u0, options) for u0 in starts]
    else:
        runs = Parallel(n_jobs=options.n_jobs)(
            delayed(_run_start)(dist, dyn, yy, lam1, u0, options) for u0 in starts
        )

    # first best in start order, so ties do not depend on the schedule
    best = min(range(len(runs)), key=lambda i: runs[i][1])
    u_hat, f_hat, settled, _ = runs[best]
    for i, (_, f_i, _, n_ev) in enumerate(runs):
        logger.debug("%s start %d: f=%.12g evals=%d", family, i, f_i, n_ev)

    diagnostics: List[str] = []
    converged = settled and f_hat < FAIL_SENTINEL
    if not converged:
        diagnostics.append("optimizer did not settle within max_cycles")

    kappa_hat = from_unconstrained(dist, dyn, u_hat)
    spec = ModelSpec.from_kappa(dist, dyn, kappa_hat)
    T = yy.shape[0]
    loglik = -f_hat * T
    se, fisher, se_derived, notes = standard_errors(spec, yy, lam1)
    diagnostics.extend(notes)

    _, _, hits, _ = filter_path(dist, dyn, kappa_hat, yy, lam1)
    if hits:
        diagnostics.append(f"log-lambda clamp hit {hits} time(s) at the optimum")

    if spec.alpha is not None and spec.alpha <= 2.0:
        diagnostics.append(f"alpha_hat={spec.alpha:.4g} <= 2: normal-theory standard errors are not supported")

    for msg in diagnostics:
        warnings.warn(f"{spec.name}: {msg}", EstimationWarning, stacklevel=2)

    return FitResult(
        spec=spec,
        kappa_hat=kappa_hat,
        se=se,
        se_derived=se_derived,
        loglik=float(loglik),
        aic=aic(loglik, spec.n_params),
        converged=bool(converged),
        n_restarts=options.n_restarts,
        fisher=fisher,
        n_obs=T,
        series_sha256=series_fingerprint(yy),
        lambda_init=lam1,
        diagnostics=tuple(diagnostics),
        clamp_hits=int(hits),
    )


def aic(loglik: float, k: int) -> float:
    return 2.0 * k - 2.0 * float(loglik)


def fit_all(
    y: Sequence[int],
    options: Optional[FitOptions] = None,
    families: Sequence[str] = ALL_FAMILIES,
) -> List[FitResult]:
    options = options or FitOptions()
    if options.n_jobs == 1 or len(families) == 1:
        return [fit(fam, y, options) for fam in families]
    inner = replace(options, n_jobs=1)
    return list(Parallel(n_jobs=options.n_jobs)(delayed(fit)(fam, y, inner) for fam in families))


@dataclass(frozen=True, slots=True)
class RankRow:
    rank: int
    model: str
    k: int
    loglik: float
    aic: float
    delta_aic: float

    def to_dict(self) -> Dict[str, object]:
        return {
            "rank": self.rank,
            "model": self.model,
            "k": self.k,
            "loglik": self.loglik,
            "aic": self.aic,
            "delta_aic": self.delta_aic,
        }


def compare(fits: Sequence[FitResult]) -> List[RankRow]:
    """Ascending AIC; equal AIC goes to the model with fewer parameters."""
    if not fits:
        raise ValueError("nothing to compare")
    ref = fits[0]
    for f in fits[1:]:
        if f.n_obs != ref.n_obs or f.series_sha256 != ref.series_sha256:
            raise SeriesMismatchError(
                f"{f.family} was fitted on a different series (n={f.n_obs}) than {ref.family} (n={ref.n_obs})"
            )
    ordered = sorted(fits, key=lambda f: (f.aic, f.k))
    best = ordered[0].aic
    return [
        RankRow(rank=i + 1, model=f.family, k=f.k, loglik=f.loglik, aic=f.aic, delta_aic=f.aic - best)
        for i, f in enumerate(ordered)
    ]


