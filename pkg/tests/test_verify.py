"""Experiment harness: configuration, report plumbing, small-scale runs.

Full-size runs live in the acceptance module; here the suite is driven
at toy scale to pin down configuration validation, report formats,
abort semantics, determinism, and the structural identities (smoothing
sandwich, exact invariance corner cases).
"""

import json
import math

import numpy as np
import pytest

from matwalk import (
    ConfigError,
    MatrixLaw,
    SquareMatrix,
    canonical_law,
)
from matwalk.verify import (
    CSV_COLUMNS,
    DEFAULT_CHECKS,
    ExperimentConfig,
    Report,
    ReportRow,
    SmoothingFamily,
    config_from_jsonable,
    config_to_jsonable,
    load_config,
    recenter_two_stage,
    run_suite,
)

TINY = dict(
    schedule=(8, 16),
    paths_per_n=20_000,
    llt_paths=20_000,
    clt_n=64,
    clt_paths=30_000,
    caravenna_n=32,
    caravenna_paths=30_000,
    rho_n=16,
    rho_paths=20_000,
    vref_paths=20_000,
    grid_n=64,
)


# ---------------------------------------------------------------------------
# smoothing family


def test_smoothing_sandwich_is_exact():
    for eps in (0.5, 0.1, 0.013):
        fam = SmoothingFamily(eps)
        assert fam.sandwich_gap() == 0.0
        t = np.array([-2 * eps, -eps, -eps / 2, 0.0, eps, 1.0])
        chi = fam.chi(t)
        assert chi.tolist() == [0.0, 0.0, 0.5, 1.0, 1.0, 1.0]
        assert np.allclose(fam.chi_bar(t) + chi, 1.0, atol=1e-15)
        # pointwise sandwich on a dense probe
        s = np.linspace(-3.0, 3.0, 1201)
        ind = (s > 0.0).astype(float)
        assert np.all(fam.chi(s - eps) <= ind + 1e-15)
        assert np.all(ind <= fam.chi(s) + 1e-15)
    with pytest.raises(ValueError):
        SmoothingFamily(0.0)
    with pytest.raises(ValueError):
        SmoothingFamily(-1.0)


# ---------------------------------------------------------------------------
# configuration


def test_config_validation_catches_each_field():
    good = ExperimentConfig()
    good.validate()
    bad_cases = [
        dict(schedule=()),
        dict(schedule=(64, 64)),
        dict(schedule=(64, 32)),
        dict(schedule=(0, 8)),
        dict(paths_per_n=10),
        dict(llt_paths=0),
        dict(t_values=()),
        dict(t_values=(math.inf,)),
        dict(interval=(1.0, 0.0)),
        dict(checks=("unknown_check",)),
        dict(workers=0),
        dict(grid_n=4),
        dict(profile="nonsense"),
        dict(angular_probe=(1.2,)),
    ]
    import dataclasses
    for kw in bad_cases:
        cfg = dataclasses.replace(good, **kw)
        with pytest.raises(ConfigError):
            cfg.validate()


def test_config_json_roundtrip(tmp_path):
    cfg = ExperimentConfig(**TINY, checks=("unconditioned_llt",), seed=5)
    obj = config_to_jsonable(cfg)
    back = config_from_jsonable(obj)
    assert back == cfg
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(obj))
    assert load_config(str(p)) == cfg


def test_config_json_errors(tmp_path):
    with pytest.raises(ConfigError):
        config_from_jsonable({"no_such_field": 1})
    with pytest.raises(ConfigError):
        config_from_jsonable({"schedule": 64})      # must be an array
    with pytest.raises(ConfigError):
        config_from_jsonable([1, 2])
    missing = tmp_path / "missing.json"
    with pytest.raises(ConfigError):
        load_config(str(missing))
    broken = tmp_path / "broken.json"
    broken.write_text("{]")
    with pytest.raises(ConfigError):
        load_config(str(broken))


# ---------------------------------------------------------------------------
# report plumbing


def test_report_row_provenance_guard():
    with pytest.raises(ValueError):
        ReportRow(check="x", name="y", n=None, empirical=1.0, stderr=0.0,
                  reference=1.0, ratio=1.0, tolerance=1.0, passed=True,
                  provenance="hearsay")


def test_report_serialization(tmp_path):
    rows = [
        ReportRow(check="a", name="r1", n=8, empirical=0.5, stderr=0.01,
                  reference=0.52, ratio=0.96, tolerance=0.1, passed=True,
                  provenance="spectral"),
        ReportRow(check="a", name="r2", n=None, empirical=math.nan,
                  stderr=0.0, reference=math.inf, ratio=math.nan,
                  tolerance=math.inf, passed=False, provenance="enumeration"),
    ]
    rep = Report(rows=rows, stamp={"seed": 1})
    assert not rep.all_pass() and rep.exit_code() == 1
    csv_text = rep.to_csv_text()
    lines = csv_text.strip().split("\n")
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert lines[1].startswith("a,r1,8,0.5,0.01,0.52,")
    assert lines[1].endswith(",true")
    assert ",nan," in lines[2] and ",inf," in lines[2]
    assert lines[2].endswith(",false")
    obj = rep.to_jsonable()
    assert obj["all_pass"] is False and obj["aborted"] is None
    assert obj["rows"][0]["provenance"] == "spectral"
    json.dumps(obj)     # non-finite values were made JSON-safe

    rep.write(str(tmp_path))
    assert (tmp_path / "report.csv").read_text() == csv_text
    back = json.loads((tmp_path / "report.json").read_text())
    assert back == json.loads(json.dumps(obj))

    ok = Report(rows=[rows[0]], stamp={})
    assert ok.all_pass() and ok.exit_code() == 0


# ---------------------------------------------------------------------------
# two-stage recentering


def test_recenter_two_stage(law_raw):
    law2, info = recenter_two_stage(law_raw, grid_n=128)
    assert abs(law2.log_shift + info["lambda_spectral"]
               + info["drift_refinement"]) < 1e-12
    assert abs(info["drift_residual"]) < 2e-3
    assert 0.1 < info["upsilon_sq_mc"] < 1.0
    assert 0.1 < info["upsilon_sq_spectral"] < 1.0


# ---------------------------------------------------------------------------
# suite runs at toy scale


def test_run_suite_empty_checks():
    cfg = ExperimentConfig(**TINY, checks=())
    rep = run_suite(cfg)
    assert rep.rows == [] and rep.aborted is None
    assert rep.exit_code() == 0
    assert rep.stamp["seed"] == cfg.seed
    assert "rho_normalization" in rep.stamp


def test_run_suite_unconditioned_and_rho(tmp_path):
    cfg = ExperimentConfig(**TINY, checks=("unconditioned_llt", "rho_harmonicity"),
                           out_dir=str(tmp_path))
    rep = run_suite(cfg)
    assert rep.aborted is None
    names = [r.name for r in rep.rows]
    assert any(n.startswith("ratio_drift_top_pair") for n in names)
    assert any(n.startswith("enumeration_anchor") for n in names)
    assert any(n.startswith("R_invariance") for n in names)
    assert any(n.startswith("q_harmonicity") for n in names)
    assert all(r.passed for r in rep.rows)
    assert (tmp_path / "report.csv").exists()
    assert (tmp_path / "report.json").exists()


def test_run_suite_abort_on_too_few_survivors():
    # a barrier far below zero kills every path at once
    cfg = ExperimentConfig(**TINY, checks=("conditioned_clt",),
                           t_values=(-50.0,))
    rep = run_suite(cfg)
    assert rep.aborted == "conditioned_clt"
    assert rep.exit_code() == 1
    assert not rep.rows[-1].passed
    assert "TooFewSurvivors" in rep.rows[-1].name


def test_run_suite_dim3_aborts_on_angular_checks():
    m = SquareMatrix(np.eye(3) + 0.25 * np.array(
        [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]))
    law3 = MatrixLaw([m, m.inverse()], [0.5, 0.5])
    cfg = ExperimentConfig(**TINY, checks=("caravenna",), law=law3)
    rep = run_suite(cfg)
    assert rep.aborted == "caravenna"
    assert "UnsupportedDim" in rep.rows[-1].name


def test_run_suite_rho_corner_zero_target():
    # profile far below the overshoot floor: both stages integrate to 0
    cfg = ExperimentConfig(**TINY, checks=("rho_harmonicity",),
                           profile="-12:-11:1")
    rep = run_suite(cfg)
    assert rep.aborted is None
    r_rows = [r for r in rep.rows if r.name.startswith("R_invariance")]
    assert len(r_rows) == 1
    assert r_rows[0].empirical == 0.0 and r_rows[0].reference == 0.0
    assert r_rows[0].passed


def test_run_suite_worker_determinism():
    base = ExperimentConfig(**TINY, checks=("unconditioned_llt", "main_cllt"))
    import dataclasses
    rep1 = run_suite(base)
    rep4 = run_suite(dataclasses.replace(base, workers=4))
    assert rep1.to_csv_text() == rep4.to_csv_text()
    assert json.dumps(rep1.to_jsonable()) == json.dumps(rep4.to_jsonable())


def test_run_suite_in_process_law_priority(tmp_path, law_raw):
    # cfg.law wins over law_file; stamps record the law actually used
    from matwalk import save_law
    p = tmp_path / "other.json"
    other = MatrixLaw(law_raw.support, (0.4, 0.1, 0.4, 0.1))
    save_law(other, str(p))
    cfg = ExperimentConfig(**TINY, checks=(), law=law_raw, law_file=str(p))
    rep = run_suite(cfg)
    assert rep.stamp["law_hash_input"] == law_raw.content_hash()
