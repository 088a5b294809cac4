import math

import numpy as np
import pytest

from bnbar.engine.dynamics import DistFamily, DynFamily, ModelSpec
from bnbar.engine.simulation import inject_outliers, simulate
from bnbar.estimation.likelihood import average_loglik, filter_path, filter_series
from bnbar.helpers.distributions import BnbParams, NbParams, bnb_log_pmf, nb_log_pmf
from bnbar.helpers.errors import ParameterDomainError

INGARCH = ModelSpec.build("bnb-ingarch", r=10.0, alpha=5.0, phi=0.5, tau=0.2, delta=10.0)
GAS = ModelSpec.build("bnb-gas", r=10.0, alpha=5.0, phi=0.5, tau=0.2, delta=10.0)


def test_single_observation():
    out = filter_series(INGARCH, [7], lambda_init=4.0)
    assert out.total_loglik == pytest.approx(bnb_log_pmf(7, BnbParams(4.0, 10.0, 5.0)))
    assert out.lambda_hat.tolist() == [4.0]
    assert out.next_lambda == pytest.approx(3.0 + 0.5 * 4.0 + 0.2 * 7)


def test_fixed_point_of_linear_recursion():
    out = filter_series(INGARCH, [10] * 40, lambda_init=10.0)
    assert np.allclose(out.lambda_hat, 10.0, atol=1e-12)
    assert out.next_lambda == pytest.approx(10.0)


def test_total_is_sum_of_terms():
    y = simulate(GAS, 200, seed=1, allow_nonstationary=True).y
    out = filter_series(GAS, y)
    assert out.total_loglik == pytest.approx(float(np.sum(out.loglik_terms)))
    assert out.average_loglik == pytest.approx(out.total_loglik / 200)
    assert np.all(out.lambda_hat > 0.0)
    assert out.clamp_hits == 0


def test_default_start_is_sample_mean():
    y = simulate(INGARCH, 100, seed=2).y
    out = filter_series(INGARCH, y)
    assert out.lambda_hat[0] == pytest.approx(float(np.mean(y)))
    # an all-zero series starts at a small positive floor
    assert filter_series(INGARCH, [0] * 30).lambda_hat[0] > 0.0


def test_linear_filter_matches_loop():
    y = simulate(INGARCH, 150, seed=3).y
    out = filter_series(INGARCH, y, lambda_init=2.0)
    th = INGARCH.theta
    lam = [2.0]
    for v in y[:-1]:
        lam.append(th.omega + th.phi * lam[-1] + th.tau * v)
    assert np.allclose(out.lambda_hat, lam, rtol=1e-12)


def test_nb_terms_use_nb_pmf():
    spec = ModelSpec.build("nb-ingarch", r=3.0, phi=0.3, tau=0.3, delta=5.0)
    out = filter_series(spec, [1, 4, 9, 0, 2], lambda_init=5.0)
    assert out.loglik_terms[0] == pytest.approx(nb_log_pmf(1, NbParams(5.0, 3.0)))


@pytest.mark.parametrize("spec", [INGARCH, ModelSpec.build("bnb-gas", r=10.0, alpha=5.0, phi=0.1, tau=0.001, delta=10.0)])
def test_filter_forgets_its_start(spec):
    y = simulate(spec, 500, seed=4).y
    a = filter_series(spec, y, lambda_init=1.0)
    b = filter_series(spec, y, lambda_init=100.0)
    assert abs(a.lambda_hat[-1] - b.lambda_hat[-1]) < 1e-8


def test_score_driven_filter_is_less_disturbed_by_an_outlier():
    path = simulate(INGARCH, 200, seed=6)
    spike = int(round(20 * path.y.mean()))
    dirty = inject_outliers(path, [50], [spike]).y

    def rel_dev(spec):
        clean = filter_series(spec, path.y, lambda_init=10.0).lambda_hat
        hit = filter_series(spec, dirty, lambda_init=10.0).lambda_hat
        return np.max(np.abs(hit[51:61] - clean[51:61]) / clean[51:61])

    assert rel_dev(GAS) < rel_dev(INGARCH)


def test_bad_input_is_refused():
    with pytest.raises(ParameterDomainError):
        filter_series(INGARCH, [])
    with pytest.raises(ParameterDomainError):
        filter_series(INGARCH, [1, -2, 3])
    with pytest.raises(ParameterDomainError):
        filter_series(INGARCH, [1, 2, 3], lambda_init=0.0)


def test_raw_filter_marks_off_domain_parameters():
    y = np.array([1.0, 2.0, 3.0])
    _, terms, _, _ = filter_path(DistFamily.BNB, DynFamily.INGARCH, [10.0, 0.9, 1.0, 0.5, 0.2], y, 2.0)
    assert np.all(np.isnan(terms))
    assert math.isnan(average_loglik(DistFamily.BNB, DynFamily.INGARCH, [-1.0, 5.0, 1.0, 0.5, 0.2], y, 2.0))


@pytest.mark.parametrize("spec", [INGARCH, ModelSpec.build("bnb-gas", r=10.0, alpha=5.0, phi=0.1, tau=0.001, delta=10.0)])
def test_start_gap_decays_geometrically(spec):
    y = simulate(spec, 200, seed=8).y
    a = filter_series(spec, y, lambda_init=1.0).lambda_hat
    b = filter_series(spec, y, lambda_init=100.0).lambda_hat
    gap = np.abs(np.log(a) - np.log(b))
    t = np.flatnonzero(gap > 1e-12)
    assert t.size >= 5
    slope = np.polyfit(t[:30], np.log(gap[t[:30]]), 1)[0]
    assert slope < 0.0
    assert gap[-1] < 1e-8
