import numpy as np
import pytest

from bnbar.engine.dynamics import ModelSpec
from bnbar.engine.simulation import FIXTURE_OUTLIERS, FIXTURE_T, lookalike_spec
from bnbar.estimation.mle import FitOptions
from bnbar.estimation.montecarlo import (
    McDesign,
    outlier_excursion,
    preset_design,
    preset_spec,
    replication_seed,
    robustness_contrast,
    run_mc,
    run_model_selection,
    score_curve,
)
from bnbar.helpers.errors import NonStationaryError, ParameterDomainError

SMALL = FitOptions(n_restarts=0, max_cycles=2)


def _small_design(n_reps=3, T_grid=(100,), base_seed=1):
    return McDesign(spec=preset_spec("phi50-alpha5"), T_grid=T_grid, n_reps=n_reps,
                    base_seed=base_seed, fit_options=SMALL)


def test_replication_seeds():
    assert replication_seed(1, 250, 0) == replication_seed(1, 250, 0)
    seeds = {replication_seed(1, T, k) for T in (250, 500) for k in range(50)}
    assert len(seeds) == 100


def test_presets():
    for name in ("phi50-alpha5", "phi50-alpha10", "phi68-alpha5", "phi68-alpha10"):
        spec = preset_spec(name)
        assert spec.delta == pytest.approx(10.0)
        assert spec.quantity("inv_r") == pytest.approx(0.1)
        assert spec.theta.tau == pytest.approx(0.2)
    assert preset_spec("phi68-alpha10").alpha == pytest.approx(10.0)
    with pytest.raises(KeyError):
        preset_spec("phi99")
    assert preset_design("phi50-alpha5", n_reps=5).truths()["inv_alpha"] == pytest.approx(0.2)


def test_design_validation():
    spec = preset_spec("phi50-alpha5")
    with pytest.raises(ValueError):
        McDesign(spec=spec, T_grid=(40,))
    with pytest.raises(ValueError):
        McDesign(spec=spec, n_reps=0)
    with pytest.raises(NonStationaryError):
        McDesign(spec=ModelSpec.build("bnb-ingarch", r=10.0, alpha=5.0, phi=0.9, tau=0.2, omega=1.0))
    with pytest.raises(ParameterDomainError):
        McDesign(spec=ModelSpec.build("nb-ingarch", r=10.0, phi=0.5, tau=0.2, delta=10.0))


def test_run_mc_small_report():
    report = run_mc(_small_design())
    assert len(report.cells) == 5
    assert report.failure_count == 0 and not report.flagged
    for c in report.cells:
        assert c.n == 3
        assert c.rmse ** 2 == pytest.approx(c.sd ** 2 + c.bias ** 2, abs=1e-10)
        assert c.n_se <= c.n
        if c.n_se:
            assert c.mean_se > 0.0
            assert c.se_ratio == pytest.approx(c.mean_se / c.sd)
    assert report.cell(100, "delta").truth == pytest.approx(10.0)
    assert set(report.to_dict()["cells"][0]) >= {"mean_se", "se_ratio", "n_se"}


def test_single_replication_has_zero_sd():
    report = run_mc(_small_design(n_reps=1))
    for c in report.cells:
        assert c.sd == 0.0
        assert c.rmse == pytest.approx(abs(c.bias))


def test_report_does_not_depend_on_worker_count():
    design = _small_design(n_reps=2, T_grid=(60,))
    assert run_mc(design, n_jobs=1).rows() == run_mc(design, n_jobs=2).rows()


def test_adding_a_sample_size_leaves_cells_alone():
    a = run_mc(_small_design(n_reps=2, T_grid=(60,)))
    b = run_mc(_small_design(n_reps=2, T_grid=(60, 80)))
    assert [r for r in b.rows() if r[0] == 60] == a.rows()


def test_report_files(tmp_path):
    report = run_mc(_small_design(n_reps=1, T_grid=(60,)))
    csv_path = tmp_path / "mc.csv"
    report.to_csv(csv_path, {"seed": 1})
    lines = csv_path.read_text().splitlines()
    assert lines[0].startswith("# config: ")
    assert lines[1] == "T,parameter,truth,mean,sd,rmse"
    assert len(lines) == 2 + 5
    report.to_json(tmp_path / "mc.json", {"seed": 1})
    assert (tmp_path / "mc.json").read_text().count('"parameter"') == 5


def test_score_curve():
    pts = score_curve([1.5, 5.0, 50.0], r=10.0, lam=10.0, y_max=200)
    assert len(pts) == 3 * 201
    for a in (1.5, 5.0, 50.0):
        s = np.array([p.score for p in pts if p.alpha == a])
        assert np.all(np.diff(s) >= -1e-12)
        assert s.max() <= a + 1.0
        assert s.min() >= -(a + 10.0 + 1.0)
        assert s[0] < 0.0
    # heavier tail, flatter response to a large count
    s200 = {p.alpha: p.score for p in pts if p.y == 200}
    assert s200[1.5] < s200[5.0] < s200[50.0]


def test_outlier_excursion():
    lam = [2.0] * 10 + [2.0, 6.0, 4.0, 3.0] + [2.0] * 10
    # spike observed at index 10; lambda rises from 2 to 6 right after
    assert outlier_excursion(lam, [10], window=5) == pytest.approx(2.0)
    assert outlier_excursion(lam, [], window=5) == 0.0


@pytest.fixture(scope="module")
def recovery_report():
    return run_mc(preset_design("phi50-alpha5", T_grid=(1000,), n_reps=200, base_seed=2024))


@pytest.mark.slow
def test_recovery_study_means_at_T1000(recovery_report):
    report = recovery_report
    assert abs(report.cell(1000, "phi").mean - 0.492) < 0.03
    assert abs(report.cell(1000, "tau").mean - 0.199) < 0.01
    assert abs(report.cell(1000, "delta").mean - 9.976) < 0.15
    assert abs(report.cell(1000, "inv_alpha").mean - 0.190) < 0.01
    assert report.cell(1000, "phi").rmse < 1.25 * 0.091
    assert not report.flagged


@pytest.mark.slow
def test_reported_standard_errors_match_the_spread(recovery_report):
    for p in ("delta", "phi", "tau", "inv_r", "inv_alpha"):
        cell = recovery_report.cell(1000, p)
        assert cell.n_se >= 0.9 * cell.n
        assert 0.8 <= cell.se_ratio <= 1.2, p


@pytest.mark.slow
def test_rmse_shrinks_with_sample_size():
    report = run_mc(preset_design("phi50-alpha5", T_grid=(250, 500, 1000, 2000), n_reps=200, base_seed=7))
    for p in ("delta", "phi", "tau", "inv_r", "inv_alpha"):
        rmse = [report.cell(T, p).rmse for T in (250, 500, 1000, 2000)]
        assert all(b <= 1.1 * a for a, b in zip(rmse, rmse[1:]))
    assert report.cell(250, "phi").bias < 0.0


@pytest.mark.slow
def test_bnb_wins_model_selection_on_heavy_tailed_data():
    spec = lookalike_spec()
    rep = run_model_selection(spec, T=FIXTURE_T, n_reps=100, base_seed=3,
                              outlier_positions=FIXTURE_OUTLIERS, outlier_scale=15.0)
    assert rep.bnb_win_rate >= 0.8


@pytest.mark.slow
def test_bnb_filter_is_more_robust_on_the_fixture():
    out = robustness_contrast(seed=0)
    assert out["bnb-gas"] <= 0.5 * out["nb-gas"]
    assert len(FIXTURE_OUTLIERS) == 3
