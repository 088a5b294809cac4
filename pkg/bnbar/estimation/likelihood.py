from __future__ import annotations

from dataclasses import dataclass
import math
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.signal import lfilter

from ..engine.dynamics import LOG_LAMBDA_CLAMP, DistFamily, DynFamily, ModelSpec, score_loglambda
from ..helpers.distributions import as_counts, bnb_log_pmf_kernel, nb_log_pmf_kernel
from ..helpers.errors import FilterError, ParameterDomainError

# lambda_hat_1 = max(sample mean, LAMBDA_FLOOR) so all-zero series still start inside (0, inf)
LAMBDA_FLOOR = 1e-2


@dataclass(frozen=True, eq=False)
class FilterOutput:
    lambda_hat: np.ndarray
    loglik_terms: np.ndarray
    total_loglik: float
    clamp_hits: int
    next_lambda: float        # lambda_hat_{T+1}, the one-step-ahead mean

    @property
    def average_loglik(self) -> float:
        return self.total_loglik / len(self.loglik_terms)


def default_lambda_init(y: np.ndarray) -> float:
    return max(float(np.mean(y)), LAMBDA_FLOOR)


def filter_path(
    dist: int,
    dyn: int,
    kappa: Sequence[float],
    y: np.ndarray,
    lambda_init: float,
) -> Tuple[np.ndarray, np.ndarray, int, float]:
    """
    Raw filter on a float count array; no parameter validation.

    Returns (lambda_hat, log-pmf terms, clamp hits, next lambda). Terms are
    nan wherever lambda_hat left (0, inf), so off-domain kappa shows up as a
    non-finite likelihood rather than an exception. Used directly by the
    optimizer and the finite-difference Hessian.
    """
    if dist == DistFamily.BNB:
        r, alpha, omega, phi, tau = (float(v) for v in kappa)
    else:
        r, omega, phi, tau = (float(v) for v in kappa)
        alpha = None

    hits = 0
    if dyn == DynFamily.INGARCH:
        # lambda_{t+1} = phi * lambda_t + (omega + tau * y_t)
        z, _ = lfilter([1.0], [1.0, -phi], omega + tau * y, zi=[phi * lambda_init])
        lam = np.concatenate(([lambda_init], z[:-1]))
        nxt = float(z[-1])
    else:
        lam = np.empty_like(y)
        log_lam = math.log(lambda_init)
        for t in range(y.shape[0]):
            lam[t] = math.exp(log_lam)
            s = score_loglambda(y[t], lam[t], r, alpha)
            log_lam = omega + phi * log_lam + tau * s
            if not -LOG_LAMBDA_CLAMP <= log_lam <= LOG_LAMBDA_CLAMP:
                hits += 1
                log_lam = -LOG_LAMBDA_CLAMP if log_lam < -LOG_LAMBDA_CLAMP else LOG_LAMBDA_CLAMP
        nxt = math.exp(log_lam)

    if not (r > 0.0 and (alpha is None or alpha > 1.0)):
        return lam, np.full_like(y, np.nan), hits, nxt

    with np.errstate(all="ignore"):
        ok = np.isfinite(lam) & (lam > 0.0)
        safe = np.where(ok, lam, 1.0)
        if alpha is None:
            terms = nb_log_pmf_kernel(y, safe, r)
        else:
            terms = bnb_log_pmf_kernel(y, safe, r, alpha)
    terms = np.where(ok, terms, np.nan)
    return lam, terms, hits, nxt


def average_loglik(dist: int, dyn: int, kappa: Sequence[float], y: np.ndarray, lambda_init: float) -> float:
    """(1/T) sum of log-pmf terms; nan when any term is non-finite."""
    _, terms, _, _ = filter_path(dist, dyn, kappa, y, lambda_init)
    total = float(np.sum(terms))
    return total / y.shape[0] if math.isfinite(total) else math.nan


def filter_series(
    spec: ModelSpec,
    y: Sequence[int],
    lambda_init: Optional[float] = None,
) -> FilterOutput:
    """
    Run lambda_hat_{t+1} = g(y_t, lambda_hat_t) from lambda_hat_1 = lambda_init
    and collect l_t = log p(y_t | lambda_hat_t).

    lambda_init defaults to the sample mean.
    """
    yy = as_counts(y)
    if yy.ndim != 1 or yy.shape[0] == 0:
        raise ParameterDomainError("series must be a nonempty 1-d sequence of counts")
    lam1 = default_lambda_init(yy) if lambda_init is None else float(lambda_init)
    if not (math.isfinite(lam1) and lam1 > 0.0):
        raise ParameterDomainError(f"lambda_init must be > 0, got {lambda_init!r}")

    lam, terms, hits, nxt = filter_path(spec.dist, spec.dyn, spec.kappa(), yy, lam1)
    bad = np.flatnonzero(~np.isfinite(terms))
    if bad.size:
        t = int(bad[0])
        raise FilterError(t, float(terms[t]))

    return FilterOutput(
        lambda_hat=lam,
        loglik_terms=terms,
        total_loglik=float(np.sum(terms)),
        clamp_hits=hits,
        next_lambda=nxt,
    )
