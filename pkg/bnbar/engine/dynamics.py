from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
import math
from typing import Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np

from ..helpers.distributions import bnb_score_scalar, nb_score_scalar
from ..helpers.errors import ParameterDomainError

# log(lambda) is kept inside [-LOG_LAMBDA_CLAMP, LOG_LAMBDA_CLAMP] by the score-driven update
LOG_LAMBDA_CLAMP = 50.0


# ------------------------------------------------------------
# Families
# ------------------------------------------------------------

class DistFamily(IntEnum):
    BNB = 0
    NB = 1


class DynFamily(IntEnum):
    INGARCH = 0
    GAS = 1


FAMILY_NAME: Dict[Tuple[int, int], str] = {
    (DistFamily.BNB, DynFamily.INGARCH): "bnb-ingarch",
    (DistFamily.BNB, DynFamily.GAS): "bnb-gas",
    (DistFamily.NB, DynFamily.INGARCH): "nb-ingarch",
    (DistFamily.NB, DynFamily.GAS): "nb-gas",
}
NAME_TO_FAMILY = {v: k for k, v in FAMILY_NAME.items()}
ALL_FAMILIES = tuple(FAMILY_NAME.values())


def parse_family(name: str) -> Tuple[DistFamily, DynFamily]:
    key = name.strip().lower().replace("_", "-")
    if key not in NAME_TO_FAMILY:
        raise ValueError(f"unknown model family {name!r}; expected one of {', '.join(ALL_FAMILIES)}")
    d, g = NAME_TO_FAMILY[key]
    return DistFamily(d), DynFamily(g)


# ------------------------------------------------------------
# Recursion parameters
# ------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class IngarchParams:
    """lambda_{t+1} = omega + phi * lambda_t + tau * y_t"""
    omega: float
    phi: float
    tau: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.omega) and self.omega > 0.0):
            raise ParameterDomainError(f"INGARCH omega must be > 0, got {self.omega!r}")
        if not (math.isfinite(self.phi) and self.phi >= 0.0):
            raise ParameterDomainError(f"INGARCH phi must be >= 0, got {self.phi!r}")
        if not (math.isfinite(self.tau) and self.tau > 0.0):
            raise ParameterDomainError(f"INGARCH tau must be > 0, got {self.tau!r}")

    @property
    def persistence(self) -> float:
        return self.phi + self.tau

    @property
    def delta(self) -> float:
        """Unconditional mean omega / (1 - phi - tau); inf outside the stationary region."""
        gap = 1.0 - self.persistence
        return self.omega / gap if gap > 0.0 else math.inf

    @staticmethod
    def from_delta(delta: float, phi: float, tau: float) -> "IngarchParams":
        if phi + tau >= 1.0:
            raise ParameterDomainError("delta parametrization needs tau + phi < 1")
        return IngarchParams(omega=delta * (1.0 - phi - tau), phi=phi, tau=tau)


@dataclass(frozen=True, slots=True)
class GasParams:
    """log lambda_{t+1} = omega + phi * log lambda_t + tau * s_t"""
    omega: float
    phi: float
    tau: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.omega):
            raise ParameterDomainError(f"GAS omega must be finite, got {self.omega!r}")
        if not (math.isfinite(self.phi) and 0.0 <= self.phi < 1.0):
            raise ParameterDomainError(f"GAS phi must lie in [0, 1), got {self.phi!r}")
        if not (math.isfinite(self.tau) and self.tau > 0.0):
            raise ParameterDomainError(f"GAS tau must be > 0, got {self.tau!r}")

    @property
    def log_delta(self) -> float:
        return self.omega / (1.0 - self.phi)

    @property
    def delta(self) -> float:
        ld = self.log_delta
        return math.exp(ld) if ld < 709.0 else math.inf

    @staticmethod
    def from_delta(delta: float, phi: float, tau: float) -> "GasParams":
        if not delta > 0.0:
            raise ParameterDomainError("GAS delta must be > 0")
        return GasParams(omega=(1.0 - phi) * math.log(delta), phi=phi, tau=tau)


Theta = Union[IngarchParams, GasParams]


# ------------------------------------------------------------
# Model spec: kappa = (r, alpha, omega, phi, tau), alpha dropped for NB
# ------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class ModelSpec:
    dist: int      # DistFamily
    dyn: int       # DynFamily
    r: float
    alpha: Optional[float]
    theta: Theta

    def __post_init__(self) -> None:
        if not (math.isfinite(self.r) and self.r > 0.0):
            raise ParameterDomainError(f"r must be > 0, got {self.r!r}")
        if self.dist == DistFamily.BNB:
            if self.alpha is None or not (math.isfinite(self.alpha) and self.alpha > 1.0):
                raise ParameterDomainError(f"BNB models need alpha > 1, got {self.alpha!r}")
        elif self.alpha is not None:
            raise ParameterDomainError("NB models carry no alpha")
        want = IngarchParams if self.dyn == DynFamily.INGARCH else GasParams
        if not isinstance(self.theta, want):
            raise ParameterDomainError(f"{self.name} needs {want.__name__}, got {type(self.theta).__name__}")

    # ---------- naming ----------
    @property
    def name(self) -> str:
        return FAMILY_NAME[(self.dist, self.dyn)]

    @property
    def param_names(self) -> Tuple[str, ...]:
        return param_names(self.dist)

    @property
    def n_params(self) -> int:
        return len(self.param_names)

    # ---------- vector form ----------
    def kappa(self) -> np.ndarray:
        th = self.theta
        head = [self.r] if self.alpha is None else [self.r, self.alpha]
        return np.array(head + [th.omega, th.phi, th.tau], dtype=float)

    def as_dict(self) -> Dict[str, float]:
        return dict(zip(self.param_names, (float(v) for v in self.kappa())))

    @staticmethod
    def from_kappa(dist: int, dyn: int, kappa: Sequence[float]) -> "ModelSpec":
        k = [float(v) for v in kappa]
        if len(k) != len(param_names(dist)):
            raise ParameterDomainError(f"kappa has {len(k)} entries, expected {len(param_names(dist))}")
        if dist == DistFamily.BNB:
            r, alpha, rest = k[0], k[1], k[2:]
        else:
            r, alpha, rest = k[0], None, k[1:]
        cls = IngarchParams if dyn == DynFamily.INGARCH else GasParams
        return ModelSpec(dist=DistFamily(dist), dyn=DynFamily(dyn), r=r, alpha=alpha, theta=cls(*rest))

    @staticmethod
    def build(
        family: str,
        r: float,
        phi: float,
        tau: float,
        alpha: Optional[float] = None,
        omega: Optional[float] = None,
        delta: Optional[float] = None,
    ) -> "ModelSpec":
        """Spec from a family name, taking exactly one of omega / delta."""
        dist, dyn = parse_family(family)
        if (omega is None) == (delta is None):
            raise ParameterDomainError("give exactly one of omega or delta")
        cls = IngarchParams if dyn == DynFamily.INGARCH else GasParams
        theta = cls(omega, phi, tau) if omega is not None else cls.from_delta(delta, phi, tau)
        return ModelSpec(dist=dist, dyn=dyn, r=r, alpha=alpha if dist == DistFamily.BNB else None, theta=theta)

    # ---------- derived ----------
    @property
    def xi(self) -> Tuple[float, Optional[float]]:
        return (self.r, self.alpha)

    @property
    def delta(self) -> float:
        return self.theta.delta

    def quantity(self, name: str) -> Optional[float]:
        """Natural-scale parameter or a reported transform: delta, log_delta, inv_r, inv_alpha."""
        if name in self.param_names:
            return float(self.kappa()[self.param_names.index(name)])
        if name == "delta":
            return self.delta
        if name == "log_delta":
            return self.theta.log_delta if self.dyn == DynFamily.GAS else math.log(self.delta)
        if name == "inv_r":
            return 1.0 / self.r
        if name == "inv_alpha":
            return None if self.alpha is None else 1.0 / self.alpha
        raise KeyError(f"unknown quantity {name!r}")

    def unconditional_lambda(self) -> float:
        """Starting point for simulation: delta (INGARCH) or exp(omega/(1-phi)) (GAS)."""
        return self.theta.delta


def param_names(dist: int) -> Tuple[str, ...]:
    if dist == DistFamily.BNB:
        return ("r", "alpha", "omega", "phi", "tau")
    return ("r", "omega", "phi", "tau")


# ------------------------------------------------------------
# Updating functions g_theta(y, lambda)
# ------------------------------------------------------------

def ingarch_update(y: float, lam: float, p: IngarchParams) -> float:
    return p.omega + p.phi * lam + p.tau * y


def score_loglambda(y: float, lam: float, r: float, alpha: Optional[float]) -> float:
    """BNB score when alpha is given, NB score r(y - lam)/(r + lam) otherwise."""
    if alpha is None:
        return nb_score_scalar(y, lam, r)
    return bnb_score_scalar(y, lam, r, alpha)


def gas_log_update(
    y: float,
    log_lam: float,
    p: GasParams,
    r: float,
    alpha: Optional[float],
) -> Tuple[float, bool]:
    """Next log(lambda) and whether the clamp was hit."""
    s = score_loglambda(y, math.exp(log_lam), r, alpha)
    nxt = p.omega + p.phi * log_lam + p.tau * s
    if nxt > LOG_LAMBDA_CLAMP:
        return LOG_LAMBDA_CLAMP, True
    if nxt < -LOG_LAMBDA_CLAMP:
        return -LOG_LAMBDA_CLAMP, True
    if not math.isfinite(nxt):
        return LOG_LAMBDA_CLAMP, True
    return nxt, False


def gas_update(
    y: float,
    lam: float,
    p: GasParams,
    xi: Tuple[float, Optional[float]],
) -> float:
    if not lam > 0.0:
        raise ParameterDomainError(f"lambda must be > 0, got {lam!r}")
    r, alpha = xi
    nxt, _ = gas_log_update(y, math.log(lam), p, r, alpha)
    return math.exp(nxt)


Updater = Callable[[float, float], Tuple[float, bool]]


def make_updater(spec: ModelSpec) -> Updater:
    """g_theta bound to a spec: (y, lambda) -> (next lambda, clamp hit)."""
    th = spec.theta
    if spec.dyn == DynFamily.INGARCH:
        def step(y: float, lam: float) -> Tuple[float, bool]:
            return th.omega + th.phi * lam + th.tau * y, False
        return step

    r, alpha = spec.r, spec.alpha

    def step(y: float, lam: float) -> Tuple[float, bool]:
        nxt, hit = gas_log_update(y, math.log(lam), th, r, alpha)
        return math.exp(nxt), hit
    return step


# ------------------------------------------------------------
# Stationarity diagnostics
# ------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class StationarityReport:
    holds: bool
    margin: float
    condition: str
    sufficient_only: bool = False
    reason: Optional[str] = None

    def to_dict(self) -> Dict[str, object]:
        return {
            "holds": self.holds,
            "margin": self.margin,
            "condition": self.condition,
            "sufficient_only": self.sufficient_only,
            "reason": self.reason,
        }


def gas_contraction_margin(r: float, alpha: float, phi: float, tau: float) -> float:
    """(tau * (gamma(3a+2r+3) + (a+r+1)) / gamma + phi) * exp(tau * (2a+r+2)), gamma = (a-1)/r"""
    g = (alpha - 1.0) / r
    lead = tau * (g * (3.0 * alpha + 2.0 * r + 3.0) + (alpha + r + 1.0)) / g + phi
    return lead * math.exp(tau * (2.0 * alpha + r + 2.0))


def check_strict_stationarity(spec: ModelSpec) -> StationarityReport:
    th = spec.theta
    if spec.dyn == DynFamily.INGARCH:
        m = th.phi + th.tau
        return StationarityReport(holds=m < 1.0, margin=m, condition="tau + phi < 1")

    if spec.dist == DistFamily.BNB:
        m = gas_contraction_margin(spec.r, spec.alpha, th.phi, th.tau)
        return StationarityReport(
            holds=m < 1.0,
            margin=m,
            condition="(tau*(gamma*(3a+2r+3)+(a+r+1))/gamma + phi)*exp(tau*(2a+r+2)) < 1",
            sufficient_only=True,
            reason=None if m < 1.0 else "sufficient condition not met; the process may still be stationary",
        )

    # NB score is unbounded above: no contraction bound, only the log-mean persistence
    return StationarityReport(
        holds=th.phi < 1.0,
        margin=th.phi,
        condition="phi < 1 (log-mean persistence only)",
        reason="no contraction bound is available for the negative binomial score",
    )


def check_weak_stationarity(spec: ModelSpec) -> StationarityReport:
    if spec.dist == DistFamily.BNB and spec.alpha <= 2.0:
        return StationarityReport(
            holds=False,
            margin=math.inf,
            condition="alpha > 2",
            reason="second conditional moment infinite",
        )

    th = spec.theta
    if spec.dyn == DynFamily.INGARCH:
        r = spec.r
        if spec.dist == DistFamily.BNB:
            a = spec.alpha
            k = (r + 1.0) * (a - 1.0) / (r * (a - 2.0))
            cond = "(r+1)(a-1)/(r(a-2)) tau^2 + phi^2 + 2 tau phi < 1"
        else:
            k = (r + 1.0) / r
            cond = "(r+1)/r tau^2 + phi^2 + 2 tau phi < 1"
        m = k * th.tau ** 2 + th.phi ** 2 + 2.0 * th.tau * th.phi
        return StationarityReport(holds=m < 1.0, margin=m, condition=cond)

    # score-driven: lambda_t lives on a compact set, so y_t has m moments iff alpha > m
    strict = check_strict_stationarity(spec)
    return StationarityReport(
        holds=strict.holds,
        margin=strict.margin,
        condition=strict.condition + " and alpha > 2",
        sufficient_only=strict.sufficient_only,
        reason=strict.reason,
    )
