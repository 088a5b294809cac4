from __future__ import annotations

from dataclasses import dataclass
import math
from typing import Iterator, NamedTuple, Optional, Tuple, Union

import numpy as np
from scipy.special import betaln, digamma, gammaln, xlogy

from .errors import MomentUndefinedError, ParameterDomainError, TruncationError

Counts = Union[int, np.integer, np.ndarray]

# cdf/quantile stop once the walked mass reaches 1 - CDF_TOL, or refuse past SUPPORT_CAP
CDF_TOL = 1e-12
SUPPORT_CAP = 10**7

_FIRST_CHUNK = 1 << 10
_MAX_CHUNK = 1 << 20

# mixture sampler guards: Beta draws can underflow towards 0 for tiny beta
_TINY_P = 1e-300
_POISSON_MAX = 1e18


# ------------------------------------------------------------
# Parameter packages
# ------------------------------------------------------------

def _require_positive(name: str, x: float) -> None:
    if not (math.isfinite(x) and x > 0.0):
        raise ParameterDomainError(f"{name} must be a finite positive number, got {x!r}")


@dataclass(frozen=True, slots=True)
class BnbParams:
    """
    Conditional BNB law in the mean parametrization.

    lam is the mean (needs alpha > 1), r the dispersion, alpha the tail
    parameter: the m-th moment exists iff alpha > m.
    """
    lam: float
    r: float
    alpha: float

    def __post_init__(self) -> None:
        _require_positive("lambda", self.lam)
        _require_positive("r", self.r)
        if not (math.isfinite(self.alpha) and self.alpha > 1.0):
            raise ParameterDomainError(f"alpha must be > 1 in the mean parametrization, got {self.alpha!r}")

    @property
    def beta(self) -> float:
        return (self.alpha - 1.0) * self.lam / self.r

    @property
    def gamma(self) -> float:
        return (self.alpha - 1.0) / self.r

    def with_lam(self, lam: float) -> "BnbParams":
        return BnbParams(lam=lam, r=self.r, alpha=self.alpha)


@dataclass(frozen=True, slots=True)
class NbParams:
    """Negative binomial with mean lam and dispersion r (the alpha -> inf limit)."""
    lam: float
    r: float

    def __post_init__(self) -> None:
        _require_positive("lambda", self.lam)
        _require_positive("r", self.r)

    @property
    def success_prob(self) -> float:
        return self.lam / (self.r + self.lam)


class BnbMoments(NamedTuple):
    mean: float
    second_moment: float
    variance: float


def as_counts(y: Counts) -> np.ndarray:
    """Validate y as nonnegative integer counts and return it as a float array."""
    arr = np.asarray(y)
    if arr.dtype.kind not in "iuf":
        raise ParameterDomainError(f"counts must be numeric, got dtype {arr.dtype}")
    if arr.dtype.kind == "f" and (not np.all(np.isfinite(arr)) or np.any(arr != np.floor(arr))):
        raise ParameterDomainError("counts must be integers")
    if np.any(arr < 0):
        raise ParameterDomainError("counts must be >= 0")
    return arr.astype(float)


def _scalar_or_array(x: np.ndarray) -> Union[float, np.ndarray]:
    return float(x) if np.ndim(x) == 0 else x


# ------------------------------------------------------------
# Vectorized kernels (no validation; lam may be an array)
# ------------------------------------------------------------

def bnb_log_pmf_kernel(y: np.ndarray, lam: np.ndarray, r: float, alpha: float) -> np.ndarray:
    beta = (alpha - 1.0) * lam / r
    return (
        gammaln(y + r) - gammaln(y + 1.0) - gammaln(r)
        + betaln(alpha + r, beta + y) - betaln(alpha, beta)
    )


def nb_log_pmf_kernel(y: np.ndarray, lam: np.ndarray, r: float) -> np.ndarray:
    return (
        gammaln(y + r) - gammaln(y + 1.0) - gammaln(r)
        - r * np.log1p(lam / r) + xlogy(y, lam / (r + lam))
    )


def bnb_score_kernel(y: np.ndarray, lam: np.ndarray, r: float, alpha: float) -> np.ndarray:
    b = (alpha - 1.0) * lam / r
    return b * (digamma(b + y) + digamma(b + alpha) - digamma(b + y + alpha + r) - digamma(b))


def bnb_score_scalar(y: float, lam: float, r: float, alpha: float) -> float:
    # one ufunc call per step; the score-driven filter calls this T times
    b = (alpha - 1.0) * lam / r
    psi = digamma(np.array([b + y, b + alpha, b + y + alpha + r, b]))
    return float(b * (psi[0] + psi[1] - psi[2] - psi[3]))


def nb_score_scalar(y: float, lam: float, r: float) -> float:
    return r * (y - lam) / (r + lam)


# ------------------------------------------------------------
# BNB pmf / cdf / quantile
# ------------------------------------------------------------

def bnb_log_pmf(y: Counts, p: BnbParams) -> Union[float, np.ndarray]:
    """log P(Y = y), entirely through log-gamma / log-beta."""
    yy = as_counts(y)
    return _scalar_or_array(bnb_log_pmf_kernel(yy, p.lam, p.r, p.alpha))


def bnb_log_pmf_ratio(y: Counts, p: BnbParams) -> Union[float, np.ndarray]:
    """
    log p(y+1) - log p(y) = log[(y+r)(beta+y) / ((y+1)(alpha+beta+r+y))].

    Written as log1p of (num - den)/den, where num - den = r*beta - c - (alpha+1)*y
    with c = alpha + beta + r, so large y does not cancel.
    """
    yy = as_counts(y)
    beta = p.beta
    c = p.alpha + beta + p.r
    den = (yy + 1.0) * (yy + c)
    return _scalar_or_array(np.log1p((p.r * beta - c - (p.alpha + 1.0) * yy) / den))


def _pmf_chunks(p: BnbParams, cap: int) -> Iterator[Tuple[int, np.ndarray]]:
    """
    pmf in consecutive blocks [start, start+n). Each block is anchored by a
    direct log-gamma evaluation and filled by the ratio recurrence.
    """
    start = 0
    n = _FIRST_CHUNK
    while start < cap:
        n = min(n, cap - start)
        ys = np.arange(start, start + n, dtype=float)
        log_p = np.empty(n)
        log_p[0] = bnb_log_pmf_kernel(ys[0], p.lam, p.r, p.alpha)
        if n > 1:
            log_p[1:] = log_p[0] + np.cumsum(bnb_log_pmf_ratio(ys[:-1], p))
        yield start, np.exp(log_p)
        start += n
        n = min(2 * n, _MAX_CHUNK)


def _cumulative_walk(p: BnbParams, cap: int) -> Iterator[Tuple[int, np.ndarray, np.ndarray]]:
    running = 0.0
    for start, pmf in _pmf_chunks(p, cap):
        cum = running + np.cumsum(pmf)
        running = float(cum[-1])
        yield start, pmf, cum


def bnb_pmf_support(p: BnbParams, tol: float = CDF_TOL, cap: int = SUPPORT_CAP) -> Tuple[np.ndarray, np.ndarray]:
    """
    (y, pmf) for y = 0..Y* where Y* is the first point with cumulative mass
    >= 1 - tol. Raises TruncationError if Y* would exceed cap.
    """
    target = 1.0 - tol
    pieces = []
    cum_last = 0.0
    for start, pmf, cum in _cumulative_walk(p, cap):
        hit = np.flatnonzero(cum >= target)
        if hit.size:
            pieces.append(pmf[: hit[0] + 1])
            mass = np.concatenate(pieces)
            return np.arange(mass.size), mass
        pieces.append(pmf)
        cum_last = float(cum[-1])
    raise TruncationError(cap - 1, cum_last, target)


def bnb_cdf(y: Counts, p: BnbParams, tol: float = CDF_TOL, cap: int = SUPPORT_CAP) -> Union[float, np.ndarray]:
    """
    F(y) = sum_{k<=y} p(k) via the ratio recurrence. From the first point Y*
    where the walked mass reaches 1 - tol, F is 1; the tail beyond has mass < tol.
    """
    yy = np.asarray(y)
    if np.any(yy < 0):
        raise ParameterDomainError("cdf is defined for y >= 0 only")
    yy = as_counts(yy).astype(np.int64)
    need = int(np.max(yy)) if yy.size else 0
    target = 1.0 - tol

    blocks = []
    covered = 0
    cum_last = 0.0
    for start, _, cum in _cumulative_walk(p, cap):
        blocks.append(cum)
        covered = start + cum.size
        cum_last = float(cum[-1])
        if covered > need or cum_last >= target:
            break
    else:
        raise TruncationError(cap - 1, cum_last, target)

    cum_all = np.concatenate(blocks)
    hit = np.flatnonzero(cum_all >= target)
    saturated = int(hit[0]) if hit.size else cum_all.size
    idx = np.minimum(yy, cum_all.size - 1)
    # F = 1 from Y* on, whichever way the walk stopped
    out = np.where(yy >= saturated, 1.0, np.minimum(cum_all[idx], 1.0))
    return _scalar_or_array(out)


def bnb_quantile(u: float, p: BnbParams, tol: float = CDF_TOL, cap: int = SUPPORT_CAP) -> int:
    """Smallest y with F(y) >= u."""
    if not (0.0 < u < 1.0):
        raise ParameterDomainError(f"quantile level must lie in (0, 1), got {u!r}")
    target = min(u, 1.0 - tol)
    cum_last = 0.0
    for start, _, cum in _cumulative_walk(p, cap):
        hit = np.flatnonzero(cum >= target)
        if hit.size:
            return int(start + hit[0])
        cum_last = float(cum[-1])
    raise TruncationError(cap - 1, cum_last, target)


# ------------------------------------------------------------
# Sampling
# ------------------------------------------------------------

def draw_bnb(rng: np.random.Generator, lam: float, r: float, alpha: float) -> int:
    """One draw through Beta -> Gamma -> Poisson; the simulation hot path."""
    prob = max(rng.beta(alpha, (alpha - 1.0) * lam / r), _TINY_P)
    rate = min(rng.gamma(r, (1.0 - prob) / prob), _POISSON_MAX)
    return int(rng.poisson(rate))


def draw_nb(rng: np.random.Generator, lam: float, r: float) -> int:
    return int(rng.poisson(min(rng.gamma(r, lam / r), _POISSON_MAX)))


def bnb_sample(
    p: BnbParams,
    rng: np.random.Generator,
    size: Optional[int] = None,
    method: str = "mixture",
) -> Union[int, np.ndarray]:
    """
    Draw from BNB(lam, r, alpha).

    "mixture": P ~ Beta(alpha, beta), Lambda ~ Gamma(r, scale (1-P)/P),
    Y ~ Poisson(Lambda). "inverse_cdf": Y = F^{-1}(U), slower, kept for
    coupling constructions.
    """
    if method == "mixture":
        prob = np.maximum(rng.beta(p.alpha, p.beta, size), _TINY_P)
        rate = np.minimum(rng.gamma(p.r, (1.0 - prob) / prob), _POISSON_MAX)
        draws = rng.poisson(rate)
    elif method == "inverse_cdf":
        u = rng.random(size)
        _, pmf = bnb_pmf_support(p)
        draws = np.searchsorted(np.cumsum(pmf), u, side="left")
    else:
        raise ValueError(f"unknown sampling method {method!r}")
    return int(draws) if size is None else np.asarray(draws, dtype=np.int64)


def nb_sample(p: NbParams, rng: np.random.Generator, size: Optional[int] = None) -> Union[int, np.ndarray]:
    draws = rng.poisson(np.minimum(rng.gamma(p.r, p.lam / p.r, size), _POISSON_MAX))
    return int(draws) if size is None else np.asarray(draws, dtype=np.int64)


# ------------------------------------------------------------
# Moments and score
# ------------------------------------------------------------

def bnb_moments(p: BnbParams) -> BnbMoments:
    """
    E(Y) = lam, E(Y^2) = (alpha+r-1)/(alpha-2) lam + (r+1)(alpha-1)/(r(alpha-2)) lam^2.
    """
    if p.alpha <= 2.0:
        raise MomentUndefinedError(f"second moment is infinite for alpha={p.alpha} <= 2")
    lam, r, a = p.lam, p.r, p.alpha
    second = (a + r - 1.0) / (a - 2.0) * lam + (r + 1.0) * (a - 1.0) / (r * (a - 2.0)) * lam * lam
    return BnbMoments(mean=lam, second_moment=second, variance=second - lam * lam)


def bnb_score_loglambda(y: Counts, p: BnbParams) -> Union[float, np.ndarray]:
    """d log p(y | lam, r, alpha) / d log lam; bounded in [-(r+alpha+1), alpha+1]."""
    yy = as_counts(y)
    return _scalar_or_array(bnb_score_kernel(yy, p.lam, p.r, p.alpha))


# ------------------------------------------------------------
# Negative binomial / Poisson limits
# ------------------------------------------------------------

def nb_log_pmf(y: Counts, p: NbParams) -> Union[float, np.ndarray]:
    yy = as_counts(y)
    return _scalar_or_array(nb_log_pmf_kernel(yy, p.lam, p.r))


def nb_score_loglambda(y: Counts, p: NbParams) -> Union[float, np.ndarray]:
    yy = as_counts(y)
    return _scalar_or_array(p.r * (yy - p.lam) / (p.r + p.lam))


def poisson_log_pmf(y: Counts, lam: float) -> Union[float, np.ndarray]:
    _require_positive("lambda", lam)
    yy = as_counts(y)
    return _scalar_or_array(xlogy(yy, lam) - lam - gammaln(yy + 1.0))
