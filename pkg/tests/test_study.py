import numpy as np
import pytest

from fvlab.study import (StudyConfig, fit_rates, manufactured_solution,
                         run_study, write_rates_csv, write_report_csv)


def test_constant_study_all_zero_residual_columns(tmp_path):
    cfg = StudyConfig(levels=3, nx0=8, ny0=8, solution="constant",
                      layout="mac", rhs_panels=16)
    res = run_study(cfg)
    for r in res.reports:
        assert r.x1 == 0.0
        assert r.x2 == 0.0
        assert r.res_init == 0.0 and r.res_init_signed == 0.0
        assert r.res_time == 0.0 and r.res_time_signed == 0.0
        assert r.res_flux == 0.0
        assert r.r1 == 0.0 and r.r2 == 0.0
        assert r.translate == 0.0
        assert r.weak_gap <= 1e-10          # conclusion gap: quadrature floor
    write_report_csv(res, tmp_path / "report.csv")
    rows = (tmp_path / "report.csv").read_text().splitlines()
    # residual columns (X1 .. translate) print as literal zeros
    assert rows[1].split(",")[6:14] == ["0"] * 8


def test_manufactured_study_monotone_and_rated():
    cfg = StudyConfig(levels=3, nx0=8, ny0=8, solution="sinsin_cos",
                      layout="mac")
    res = run_study(cfg)
    for name in ("res_flux", "R1", "translate", "weak_gap"):
        vals = [r.series(name) for r in res.reports]
        assert np.all(np.diff(vals) < 0)
        assert np.isfinite(res.rates[name].lsq_slope)
    assert all(r.theta3 == 1.0 for r in res.reports)
    assert all(r.theta1 == pytest.approx(2.0) for r in res.reports)


def test_perturbed_rt_study_theta_bounded():
    cfg = StudyConfig(levels=3, nx0=8, ny0=8, solution="sinsin_shear",
                      layout="rt", mesh_family="perturbed", amplitude=0.2,
                      face_scheme="centered", seed=7)
    res = run_study(cfg)
    # amplitude 0.2 bounds adjacent-area ratios within the family
    cap = ((1 + 2 * 0.2) / (1 - 2 * 0.2)) ** 2
    for r in res.reports:
        assert 1.0 < r.theta2 < cap
        assert r.rt_constant == 3
    assert res.rates["R2"].finest_pair >= 0.7


def test_scheme_study_1d_max_principle_and_l1():
    cfg = StudyConfig(levels=3, nx0=32, layout="colocated1d",
                      mesh_family="interval", domain=((0.0, 1.0),),
                      solution="bump_advect_1d", field_source="scheme",
                      cfl=0.5, T=0.25)
    res = run_study(cfg)
    for r in res.reports:
        assert r.scheme_min >= -1e-15
        assert r.scheme_max <= np.exp(-1.0) + 1e-15
        assert r.mass_defect <= 1e-12
    l1 = [r.l1_distance for r in res.reports]
    assert np.all(np.diff(l1) < 0)
    # scheme-generated C(U) vanishes: the weak pairing is identically zero
    for r in res.reports:
        assert abs(r.x1 + r.x2) <= 1e-12
    cauchy = [r.l1_cauchy for r in res.reports[1:]]
    assert np.all(np.isfinite(cauchy))


def test_manufactured_1d_weak_gap_decays():
    cfg = StudyConfig(levels=3, nx0=32, layout="colocated1d",
                      mesh_family="interval", domain=((0.0, 1.0),),
                      solution="bump_advect_1d", field_source="manufactured",
                      dt_over_h=0.5, T=0.25)
    res = run_study(cfg)
    gaps = [r.weak_gap for r in res.reports]
    assert np.all(np.diff(gaps) < 0)
    assert res.rates["weak_gap"].finest_pair >= 0.7


def test_levels_validation():
    cfg = StudyConfig(levels=2)
    with pytest.raises(ValueError, match="3 levels"):
        run_study(cfg)


def test_solution_registry():
    with pytest.raises(KeyError):
        manufactured_solution("nope")
    sol = manufactured_solution("sinsin_cos")
    assert sol["dim"] == 2


def test_mismatched_solution_dimension():
    cfg = StudyConfig(layout="colocated1d", mesh_family="interval",
                      solution="sinsin_cos")
    with pytest.raises(ValueError, match="1D"):
        cfg.validate()


def test_rate_fit_requires_three_levels():
    with pytest.raises(ValueError):
        fit_rates([])


def test_rates_csv_layout(tmp_path):
    cfg = StudyConfig(levels=3, nx0=8, ny0=8, solution="sinsin_cos")
    res = run_study(cfg)
    path = tmp_path / "rates.csv"
    write_rates_csv(res, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "series,lsq_slope,finest_pair_slope,pair_0_1,pair_1_2"
    names = [ln.split(",")[0] for ln in lines[1:]]
    assert names == ["res_init", "res_time", "res_flux", "R1", "R2",
                     "translate", "weak_gap"]
    # LF endings and 17-significant-digit floats
    raw = path.read_bytes()
    assert b"\r" not in raw


def test_scheme_study_mac_pipeline():
    cfg = StudyConfig(levels=3, nx0=8, ny0=8, layout="mac",
                      field_source="scheme", solution="sinsin_shear",
                      cfl=0.4, T=0.2)
    res = run_study(cfg)
    for r in res.reports:
        # the explicit update satisfies C(U) = 0, so the pairing vanishes
        assert abs(r.x1 + r.x2) <= 1e-12
        assert r.mass_defect <= 1e-12
    for name in ("res_flux", "R1", "R2"):
        vals = [r.series(name) for r in res.reports]
        assert np.all(np.diff(vals) < 0)


def test_graded_family_regularity_constant_across_levels():
    # nested subdivision keeps theta1/theta2 literally constant per level
    cfg = StudyConfig(levels=3, nx0=8, ny0=8, layout="mac",
                      mesh_family="graded", grading=1.2,
                      solution="sinsin_shear",
                      support=((0.3, 0.65), (0.3, 0.65)))
    res = run_study(cfg)
    t1 = [r.theta1 for r in res.reports]
    t2 = [r.theta2 for r in res.reports]
    assert max(t1) - min(t1) <= 1e-12 * max(t1)
    assert max(t2) - min(t2) <= 1e-12 * max(t2)
    assert np.allclose(t2, 1.2, rtol=1e-10)
    for name in ("res_flux", "R1", "R2", "weak_gap"):
        assert res.rates[name].finest_pair >= 0.7


def test_alternating_time_grid_study():
    cfg = StudyConfig(levels=3, nx0=8, ny0=8, layout="mac",
                      solution="sinsin_shear", time_pattern="alternating",
                      time_ratio=2.0)
    res = run_study(cfg)
    assert all(abs(r.theta3 - 2.0) < 1e-12 for r in res.reports)
    for name in ("res_time", "res_flux", "R1", "R2", "weak_gap"):
        assert res.rates[name].finest_pair >= 0.7
