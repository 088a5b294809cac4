import math

import numpy as np
import pytest

from bnbar.engine.dynamics import (
    LOG_LAMBDA_CLAMP,
    DistFamily,
    DynFamily,
    GasParams,
    IngarchParams,
    ModelSpec,
    check_strict_stationarity,
    check_weak_stationarity,
    gas_log_update,
    gas_update,
    ingarch_update,
    make_updater,
    parse_family,
)
from bnbar.helpers.errors import ParameterDomainError


def _bnb_ingarch(phi=0.5, tau=0.2, r=10.0, alpha=5.0, delta=10.0):
    return ModelSpec.build("bnb-ingarch", r=r, alpha=alpha, phi=phi, tau=tau, delta=delta)


def test_parse_family():
    assert parse_family("bnb-gas") == (DistFamily.BNB, DynFamily.GAS)
    assert parse_family("NB_INGARCH") == (DistFamily.NB, DynFamily.INGARCH)
    with pytest.raises(ValueError):
        parse_family("poisson-arma")


def test_spec_from_delta_and_kappa_order():
    spec = _bnb_ingarch()
    assert spec.theta.omega == pytest.approx(3.0)
    assert spec.delta == pytest.approx(10.0)
    assert spec.param_names == ("r", "alpha", "omega", "phi", "tau")
    assert np.allclose(spec.kappa(), [10.0, 5.0, 3.0, 0.5, 0.2])
    back = ModelSpec.from_kappa(spec.dist, spec.dyn, spec.kappa())
    assert back.name == "bnb-ingarch"
    assert np.array_equal(back.kappa(), spec.kappa())


def test_nb_spec_has_four_parameters():
    spec = ModelSpec.build("nb-gas", r=4.0, phi=0.7, tau=0.1, omega=0.6)
    assert spec.alpha is None
    assert spec.n_params == 4
    assert spec.quantity("inv_alpha") is None
    assert spec.quantity("log_delta") == pytest.approx(2.0)
    assert spec.delta == pytest.approx(math.exp(2.0))


def test_spec_quantities():
    spec = _bnb_ingarch()
    assert spec.quantity("inv_r") == pytest.approx(0.1)
    assert spec.quantity("inv_alpha") == pytest.approx(0.2)
    assert spec.quantity("phi") == pytest.approx(0.5)
    with pytest.raises(KeyError):
        spec.quantity("sigma")


def test_spec_validation():
    with pytest.raises(ParameterDomainError):
        ModelSpec(dist=DistFamily.NB, dyn=DynFamily.INGARCH, r=1.0, alpha=5.0, theta=IngarchParams(1.0, 0.5, 0.2))
    with pytest.raises(ParameterDomainError):
        ModelSpec(dist=DistFamily.BNB, dyn=DynFamily.INGARCH, r=1.0, alpha=1.0, theta=IngarchParams(1.0, 0.5, 0.2))
    with pytest.raises(ParameterDomainError):
        ModelSpec(dist=DistFamily.BNB, dyn=DynFamily.GAS, r=1.0, alpha=5.0, theta=IngarchParams(1.0, 0.5, 0.2))
    with pytest.raises(ParameterDomainError):
        GasParams(omega=0.1, phi=1.0, tau=0.1)
    with pytest.raises(ParameterDomainError):
        IngarchParams(omega=0.0, phi=0.5, tau=0.2)
    with pytest.raises(ParameterDomainError):
        ModelSpec.build("bnb-ingarch", r=10.0, alpha=5.0, phi=0.5, tau=0.2)


def test_delta_parametrization_needs_stationary_recursion():
    with pytest.raises(ParameterDomainError, match="tau \\+ phi < 1"):
        IngarchParams.from_delta(10.0, 0.9, 0.2)


def test_ingarch_update():
    p = IngarchParams(omega=3.0, phi=0.5, tau=0.2)
    assert ingarch_update(20, 10.0, p) == pytest.approx(3.0 + 5.0 + 4.0)


def test_gas_update_at_zero_nb_score():
    p = GasParams(omega=0.5, phi=0.6, tau=0.3)
    # NB score r(y - lam)/(r + lam) vanishes at y = lam
    assert gas_update(8, 8.0, p, (5.0, None)) == pytest.approx(math.exp(0.5 + 0.6 * math.log(8.0)))


def test_gas_update_moves_with_the_observation():
    p = GasParams(omega=0.5, phi=0.6, tau=0.3)
    lo = gas_update(0, 8.0, p, (5.0, 5.0))
    hi = gas_update(500, 8.0, p, (5.0, 5.0))
    assert lo < hi
    # bounded BNB score: a huge count moves log-lambda by at most tau * (alpha + 1)
    assert math.log(hi) <= 0.5 + 0.6 * math.log(8.0) + 0.3 * 6.0 + 1e-12


def test_gas_log_update_clamps():
    p = GasParams(omega=100.0, phi=0.5, tau=0.1)
    nxt, hit = gas_log_update(3, 1.0, p, 10.0, 5.0)
    assert hit and nxt == LOG_LAMBDA_CLAMP
    p = GasParams(omega=-100.0, phi=0.5, tau=0.1)
    nxt, hit = gas_log_update(3, 1.0, p, 10.0, 5.0)
    assert hit and nxt == -LOG_LAMBDA_CLAMP


def test_make_updater_matches_update_functions():
    spec = _bnb_ingarch()
    step = make_updater(spec)
    assert step(7.0, 9.0) == (ingarch_update(7.0, 9.0, spec.theta), False)

    gas = ModelSpec.build("bnb-gas", r=10.0, alpha=5.0, phi=0.5, tau=0.2, omega=1.0)
    lam, hit = make_updater(gas)(7.0, 9.0)
    assert not hit
    assert lam == pytest.approx(gas_update(7.0, 9.0, gas.theta, gas.xi))


def test_strict_condition_linear():
    rep = check_strict_stationarity(_bnb_ingarch())
    assert rep.holds and rep.margin == pytest.approx(0.7)
    rep = check_strict_stationarity(ModelSpec.build("nb-ingarch", r=10.0, phi=0.9, tau=0.2, omega=1.0))
    assert not rep.holds and rep.margin == pytest.approx(1.1)
    assert "tau + phi < 1" in rep.condition


def test_strict_condition_score_driven_worked_value():
    spec = ModelSpec.build("bnb-gas", r=10.0, alpha=5.0, phi=0.1, tau=0.001, omega=0.5)
    rep = check_strict_stationarity(spec)
    assert rep.margin == pytest.approx(0.18196, abs=1e-5)
    assert rep.holds and rep.sufficient_only


def test_strict_condition_score_driven_can_fail():
    spec = ModelSpec.build("bnb-gas", r=4.408, alpha=5.029, phi=0.714, tau=0.197, omega=0.597)
    rep = check_strict_stationarity(spec)
    assert not rep.holds
    assert rep.sufficient_only
    assert rep.reason is not None


def test_strict_condition_nb_gas_is_persistence_only():
    rep = check_strict_stationarity(ModelSpec.build("nb-gas", r=4.0, phi=0.7, tau=0.1, omega=0.6))
    assert rep.holds
    assert rep.margin == pytest.approx(0.7)
    assert not rep.sufficient_only
    assert "no contraction bound" in rep.reason


def test_weak_condition_worked_values():
    assert check_weak_stationarity(_bnb_ingarch(phi=0.5)).margin == pytest.approx(0.50867, abs=1e-4)
    rep = check_weak_stationarity(_bnb_ingarch(phi=0.68))
    assert rep.holds
    assert rep.margin == pytest.approx(0.79307, abs=1e-4)


def test_weak_condition_nb_limit():
    spec = ModelSpec.build("nb-ingarch", r=10.0, phi=0.5, tau=0.2, delta=10.0)
    assert check_weak_stationarity(spec).margin == pytest.approx(1.1 * 0.04 + 0.25 + 0.2)


def test_weak_condition_fails_without_second_moment():
    rep = check_weak_stationarity(_bnb_ingarch(alpha=2.0))
    assert not rep.holds
    assert rep.reason == "second conditional moment infinite"
    assert math.isinf(rep.margin)


def test_weak_condition_score_driven_follows_strict():
    spec = ModelSpec.build("bnb-gas", r=10.0, alpha=5.0, phi=0.1, tau=0.001, omega=0.5)
    rep = check_weak_stationarity(spec)
    assert rep.holds
    assert rep.margin == pytest.approx(check_strict_stationarity(spec).margin)
    assert rep.to_dict()["condition"].endswith("alpha > 2")


def test_ingarch_update_is_lipschitz_in_y_and_lambda():
    p = IngarchParams(omega=1.0, phi=0.5, tau=0.2)
    rng = np.random.default_rng(12)
    for _ in range(200):
        y1, y2 = rng.integers(0, 200, size=2)
        l1, l2 = rng.uniform(0.1, 100.0, size=2)
        gap = abs(ingarch_update(y1, l1, p) - ingarch_update(y2, l2, p))
        bound = 0.2 * abs(y1 - y2) + 0.5 * abs(l1 - l2)
        assert gap <= bound + 1e-12
        if (y1 - y2) * (l1 - l2) >= 0:
            assert gap == pytest.approx(bound, abs=1e-12)
    # never below omega
    assert ingarch_update(0, 1e-9, p) >= 1.0


def test_gas_updates_from_far_apart_starts_contract():
    p = GasParams.from_delta(10.0, 0.1, 0.001)
    ys = np.random.default_rng(2).integers(0, 40, size=12)
    a, b = 5.0, 500.0
    gaps = [abs(math.log(a) - math.log(b))]
    for y in ys:
        a = gas_update(float(y), a, p, (10.0, 5.0))
        b = gas_update(float(y), b, p, (10.0, 5.0))
        gaps.append(abs(math.log(a) - math.log(b)))
    assert all(g1 < g0 for g0, g1 in zip(gaps, gaps[1:]))
    assert gaps[-1] < 1e-6


def test_gas_log_lambda_band_is_invariant():
    r, alpha = 10.0, 5.0
    p = GasParams.from_delta(10.0, 0.5, 0.2)
    lo = (p.omega - p.tau * (alpha + r + 1.0)) / (1.0 - p.phi)
    hi = (p.omega + p.tau * (alpha + 1.0)) / (1.0 - p.phi)
    for log_lam in (lo, 0.5 * (lo + hi), hi):
        for y in (0, 1, 10, 10**6):
            nxt, hit = gas_log_update(float(y), log_lam, p, r, alpha)
            assert not hit
            assert lo - 1e-9 <= nxt <= hi + 1e-9
    # so lambda never drops below exp(lo)
    assert gas_update(0.0, math.exp(lo), p, (r, alpha)) >= math.exp(lo) * (1.0 - 1e-9)
