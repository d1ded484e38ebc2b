"""CLI contract tests: config parsing/validation, exit codes, report
determinism, model integrity, and export round-trips."""

from __future__ import annotations

import json
import math
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from perfstrip.cli import (
    EXIT_CHECKS,
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_SOLVER,
    ChecksumError,
    ConfigError,
    RunConfig,
    load_models,
    main,
)

SMALL_CFG = """
# compact configuration for tests
h = 1/128
n_max = 2
tol = 1e-9
line_samples = 24
radii_samples = 8
sample_count = 1200
"""


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    base = tmp_path_factory.mktemp("cli")
    cfg = base / "cfg.txt"
    cfg.write_text(SMALL_CFG)
    out = base / "out"
    code = main(["run", "--config", str(cfg), "--out", str(out)])
    assert code == EXIT_OK
    return cfg, out


def test_config_parsing_roundtrip(tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text("h = 1/256\nn_max = 3\nslack = 0.2\n")
    parsed = RunConfig.from_file(cfg)
    assert parsed.h == Fraction(1, 256) and parsed.p == 8
    assert parsed.n_max == 3 and parsed.slack == 0.2


def test_config_rejects_unknown_key(tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text("granularity = 3\n")
    with pytest.raises(ConfigError):
        RunConfig.from_file(cfg)


def test_config_validation_messages():
    bad = RunConfig(h=Fraction(1, 512), n_max=6)
    msgs = bad.validate()
    assert any("too coarse" in m and "2^-6" in m for m in msgs)
    assert RunConfig(h=Fraction(3, 512)).validate()
    assert RunConfig(epsilon=1.5).validate()
    assert RunConfig(epsilon=0.7).validate()  # window too short
    assert not RunConfig().validate()


def test_exit_code_config(tmp_path):
    cfg = tmp_path / "bad.txt"
    cfg.write_text("h = 1/512\nn_max = 6\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_exit_code_solver(tmp_path):
    cfg = tmp_path / "s.txt"
    cfg.write_text("h = 1/128\nn_max = 2\ntol = 1e-30\nmax_cycles = 1\nmethod = sor\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_SOLVER


def test_exit_code_check_failure(small_run, tmp_path):
    # a consistent-but-wrong stored constant must trip the check suite:
    # inflating the core depth makes the negative-core bound unattainable
    import hashlib
    import shutil

    _, out = small_run
    bad = tmp_path / "models_wrong"
    shutil.copytree(out / "models", bad)
    meta = json.loads((bad / "meta.json").read_text())
    meta["upper"]["core_depth"] *= 1e3
    (bad / "meta.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    manifest = json.loads((bad / "manifest.json").read_text())
    manifest["files"]["meta.json"] = hashlib.sha256((bad / "meta.json").read_bytes()).hexdigest()
    (bad / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    assert main(["verify", "--models", str(bad)]) == EXIT_CHECKS


def test_report_schema_and_pass(small_run):
    _, out = small_run
    report = json.loads((out / "report.json").read_text())
    assert set(report) == {"config", "constants", "checks", "decay", "pass"}
    assert report["pass"] is True
    for key in ("M", "M1", "t", "t1", "beta", "beta1", "c", "a_out", "lambda", "w_inf", "w_sup"):
        assert key in report["constants"]
    assert report["constants"]["c"] > 1.0
    for chk in report["checks"]:
        assert {"name", "margin", "tolerance", "pass", "witness"} <= set(chk)
        assert chk["pass"] is True
    assert {"rows", "c"} <= set(report["decay"])
    # timing lives outside the deterministic report
    assert (out / "timing.json").exists()


def test_run_determinism(small_run, tmp_path):
    cfg, out = small_run
    out2 = tmp_path / "out2"
    assert main(["run", "--config", str(cfg), "--out", str(out2)]) == EXIT_OK
    assert (out / "report.json").read_bytes() == (out2 / "report.json").read_bytes()


def test_verify_reproduces_checks(small_run, tmp_path):
    cfg, out = small_run
    vout = tmp_path / "ver"
    code = main(["verify", "--models", str(out / "models"), "--out", str(vout)])
    assert code == EXIT_OK
    a = json.loads((out / "report.json").read_text())
    b = json.loads((vout / "report.json").read_text())
    assert json.dumps(a["checks"], sort_keys=True) == json.dumps(b["checks"], sort_keys=True)
    assert a["decay"] == b["decay"]


def test_verify_detects_tampering(small_run, tmp_path):
    _, out = small_run
    import shutil

    bad = tmp_path / "models_bad"
    shutil.copytree(out / "models", bad)
    with open(bad / "green.npz", "ab") as fh:
        fh.write(b"!")
    assert main(["verify", "--models", str(bad)]) == EXIT_CONFIG
    with pytest.raises(ChecksumError):
        load_models(bad)


def test_loaded_models_keep_constants(small_run):
    _, out = small_run
    glued, pot, cfg = load_models(out / "models")
    report = json.loads((out / "report.json").read_text())
    assert glued.constants()["M"] == report["constants"]["M"]
    assert pot.outer_amplitude == report["constants"]["a_out"]
    # the guarded-corner standoffs survive the round trip
    assert any(getattr(cm, "guarded", False) for cm in glued.upper.field.corners)


def test_export_round_trip(small_run, tmp_path):
    _, out = small_run
    for which, cols in (("glued", 3), ("upper", 3), ("annulus", 3)):
        path = tmp_path / f"{which}.csv"
        assert main(["export", "--models", str(out / "models"), "--which", which, "--out", str(path)]) == EXIT_OK
        lines = path.read_text().splitlines()
        assert len(lines[0].split(",")) == cols
        body = lines[1:]
        assert body
        parsed = [tuple(float(tok) for tok in row.split(",")) for row in body[:2000]]
        # shortest-round-trip float formatting: re-emitting reproduces bytes
        for row, vals in zip(body[:2000], parsed):
            assert row == ",".join(repr(v) for v in vals)


def test_export_glued_axis_rows(small_run, tmp_path):
    _, out = small_run
    path = tmp_path / "g.csv"
    main(["export", "--models", str(out / "models"), "--which", "glued", "--out", str(path)])
    rows = [line.split(",") for line in path.read_text().splitlines()[1:]]
    axis = [r for r in rows if float(r[1]) == 0.0]
    assert axis and all(float(r[2]) == 0.0 for r in axis)
    # row count equals the glued export grid size
    glued, _, _ = load_models(out / "models")
    ny = glued.upper.field.values.shape[0] - 1
    nx = glued.upper.field.values.shape[1]
    assert len(rows) == (2 * ny + 1) * nx


def test_loaded_evaluator_matches_fresh(small_run):
    _, out = small_run
    glued, _, _ = load_models(out / "models")
    rng = np.random.default_rng(3)
    zs = rng.uniform(0, 1, 200) + 1j * rng.uniform(-1.3, 1.3, 200)
    fresh = glued.evaluate_many(zs)
    assert np.all(np.isfinite(fresh[np.abs(zs.imag) < 1.3]))
