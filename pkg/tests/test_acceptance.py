"""Acceptance gate: every criterion as a test, one printed line each.

Criteria run at their stated resolutions and tolerances; nothing is
deferred to later calibration.  The expensive shared models come from the
session fixtures (h = 1/256, 1/512, 1/1024, all with truncation depth 4).
"""

from __future__ import annotations

import json
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from perfstrip.annulus import (
    check_annulus_submean,
    check_components,
    check_arc_mass_decay,
)
from perfstrip.assembler import check_intermediate
from perfstrip.geometry import (
    PeriodCell,
    line_intersection_length,
    projection_union_covers_period,
)
from perfstrip.laplace import green_square, solve_dirichlet
from perfstrip.verify import (
    build_decay_table,
    check_majorants,
    check_negative_bounds,
    check_periodicity,
    check_selfsimilarity,
    check_subharmonic,
    sample_frame_interior,
)

from oracles import green_square_series, wos_estimate


def _report(num: int, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {num}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, detail


def test_criterion_1_squares_free_oracle():
    t0 = time.perf_counter()
    f = solve_dirichlet([], p=8, tol=1e-9)
    X, Y = np.meshgrid(f.node_x(), f.node_y())
    err = float(np.max(np.abs(f.values - 0.75 * Y)))
    elapsed = time.perf_counter() - t0
    _report(
        1,
        err <= 1e-6 and elapsed <= 30.0,
        f"squares-free strip max node error {err:.2e} (<= 1e-6), {elapsed:.1f}s (<= 30s)",
    )


def test_criterion_2_green_series_oracle():
    t0 = time.perf_counter()
    g = green_square(p=9, tol=1e-9)
    h = g.regular.h
    rng = np.random.default_rng(17)
    worst = 0.0
    checked = 0
    while checked < 20:
        z = complex(
            round(rng.uniform(-0.28, 0.28) / h) * h,
            round(rng.uniform(0.72, 1.28) / h) * h,
        )
        if abs(z - 1j) < 0.1:
            continue
        series, tail = green_square_series(z)
        diff = abs(g.evaluate(z) - series)
        ok_here = diff <= 5 * h * h + tail
        worst = max(worst, diff / (5 * h * h + tail))
        assert ok_here, f"probe {z}: diff {diff:.2e} vs {5*h*h + tail:.2e}"
        checked += 1
    elapsed = time.perf_counter() - t0
    _report(
        2,
        worst <= 1.0 and elapsed <= 60.0,
        f"Green function vs certified sine series at 20 probes: worst "
        f"diff/tolerance {worst:.3f}, {elapsed:.1f}s (<= 60s)",
    )


def test_criterion_3_walk_on_spheres_oracle(glued_256):
    model = glued_256.upper
    h = model.h
    probes = [0.5 + 0.65j, 0.5 + 1.2j, 0.325 + 1.0j, 0.5 + 0.9j, 0.68 + 0.82j]
    details = []
    ok = True
    for i, z in enumerate(probes):
        est, sigma = wos_estimate(z, n_max=4, walks=10**6, seed=100 + i)
        fd = model.evaluate_frame(np.array([z.real]), np.array([z.imag]))[0]
        band = 3.0 * sigma + 10.0 * h * h
        ok &= abs(fd - est) <= band
        details.append(f"{z}: fd={fd:.5f} wos={est:.5f}+-{sigma:.5f}")
    _report(3, ok, "walk-on-spheres at 5 probes within 3 sigma + 10h^2: " + "; ".join(details))


def test_criterion_4_constants_stability(glued_512, glued_1024):
    a = glued_512.constants()
    b = glued_1024.constants()
    drifts = {k: abs(a[k] - b[k]) / abs(b[k]) for k in ("M", "M1", "t", "t1", "beta", "beta1")}
    ok = all(d <= 0.01 for d in drifts.values()) and a["M"] > 1.0 and a["M1"] > 1.0
    _report(
        4,
        ok,
        "constants at h=1/512 vs 1/1024 within 1%: "
        + ", ".join(f"{k} {100*v:.2f}%" for k, v in drifts.items())
        + f"; M={a['M']:.3e} M1={a['M1']:.3e}",
    )


def test_criterion_5_inequality_suite(glued_512):
    rng = np.random.default_rng(5)
    h = glued_512.h
    tol = 10 * h * h
    margins = {}
    margins["periodicity"] = check_periodicity(glued_512, rng, 10000).margin
    # intermediate per half (the halving inequality and its mirror)
    for model, tag in ((glued_512.upper, "intermediate"), (glued_512.lower, "intermediate-mirror")):
        pts = sample_frame_interior(model, rng, 10000)
        margins[tag], _ = check_intermediate(model, pts)
    margins["selfsimilarity"] = check_selfsimilarity(glued_512, rng, 10000).margin
    rec_abs, rec_rel = check_negative_bounds(glued_512, rng, 10000)
    margins["negative-core"] = rec_abs.margin
    margins["negative-core-relative(1e-6)"] = rec_rel.margin
    hard = {k: v for k, v in margins.items() if v < -tol and "relative" not in k}
    ok = not hard and rec_rel.margin >= -1e-6
    _report(
        5,
        ok,
        f"inequality suite at h=1/512, >=1e4 samples each, tol {tol:.1e}: "
        + ", ".join(f"{k} {v:.2e}" for k, v in margins.items()),
    )


def test_criterion_6_subharmonicity(glued_512):
    rng = np.random.default_rng(6)
    h = glued_512.h
    rec = check_subharmonic(glued_512, rng, radii_cells=(2, 4, 8), count=12000)
    sups = []
    recs_ok = rec.passed
    for n in (1, 2, 3):
        mrec, sup = check_majorants(glued_512, n)
        recs_ok &= mrec.passed
        sups.append(sup)
    decreasing = sups[0] > sups[1] > sups[2]
    _report(
        6,
        recs_ok and decreasing,
        f"sub-mean margins over >=1e4 stratified points, radii 2h/4h/8h: worst "
        f"{rec.margin:.2e} (tol {rec.tolerance:.1e}); majorant sups "
        + " > ".join(f"{s:.2e}" for s in sups),
    )


def test_criterion_7_covering_exact():
    t0 = time.perf_counter()
    ok = all(projection_union_covers_period(n) for n in range(7))
    rng = np.random.default_rng(7)
    xs = rng.uniform(0.0, 1.0, 10000)
    levels = rng.integers(0, 7, 10000)
    needs = [Fraction(4, 7) * Fraction(1, 2**n) for n in range(7)]
    for x, n in zip(xs, levels):
        if line_intersection_length(Fraction(float(x)), int(n)) < needs[n]:
            ok = False
            break
    elapsed = time.perf_counter() - t0
    _report(
        7,
        ok and elapsed <= 1.0,
        f"exact covering for n<=6 and 1e4 random chord lower bounds in "
        f"{elapsed:.3f}s (<= 1s)",
    )


def test_criterion_8_decay_base(glued_512, glued_1024):
    rng = np.random.default_rng(8)
    table, records = build_decay_table(glued_512, rng, line_count=256, slack=0.1)
    core_ok = all(r.passed for r in records if r.name.startswith("line-decay-core-bound"))
    c = table.c
    # stability under h -> h/2
    table_fine, _ = build_decay_table(glued_1024, np.random.default_rng(8), line_count=256, slack=0.1)
    drift_h = abs(c - table_fine.c) / table_fine.c
    # stability under doubling the line samples
    table_dense, _ = build_decay_table(glued_512, np.random.default_rng(9), line_count=512, slack=0.1)
    drift_lines = abs(c - table_dense.c) / table_dense.c
    ok = core_ok and c > 1.0 and drift_h <= 0.05 and drift_lines <= 0.05
    _report(
        8,
        ok,
        f"core line integrals <= -(4/7)2^-n beta~ M~^-n * 0.9 for n=0..4 over 256+ lines; "
        f"c = {c:.4e} (> 1), stable {100*drift_h:.2f}% under h->h/2 and "
        f"{100*drift_lines:.2f}% under doubling lines",
    )


def test_criterion_9_annulus(annulus_512, glued_512):
    rng = np.random.default_rng(9)
    w_inf, w_sup = annulus_512.bounds()
    bounded = math.isfinite(w_inf) and math.isfinite(w_sup)
    sub = check_annulus_submean(annulus_512, rng, count=4000)
    comp_ok = True
    prop_ok = True
    table, _ = build_decay_table(glued_512, np.random.default_rng(8), line_count=256, slack=0.1)
    radii = np.concatenate([[1.0], 1.0 + (np.arange(48) + 0.5) / 48, [2.0]])
    details = []
    for n in range(1, glued_512.n_max + 1):
        crec = check_components(annulus_512, rng, n, count=2000)
        comp_ok &= crec.passed
        prec = check_arc_mass_decay(annulus_512, table.c, radii, n, slack=0.1)
        prop_ok &= prec.passed
        details.append(f"n={n} ratio>={prec.margin + 1.0:.2f}")
    ok = bounded and sub.passed and comp_ok and prop_ok
    _report(
        9,
        ok,
        f"annulus potential bounded (inf {w_inf:.3e}, sup {w_sup:.3e}); sub-mean "
        f"{sub.margin:.2e}; components pass; arc-mass decay for 50 radii, levels 1..4 "
        f"with delta_n = (3 eps/4) c^-n * 0.9: " + ", ".join(details),
    )


def test_criterion_10_determinism_and_contract(tmp_path):
    from perfstrip.cli import EXIT_CHECKS, EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, main

    cfg = tmp_path / "cfg.txt"
    cfg.write_text(
        "h = 1/128\nn_max = 2\nline_samples = 24\nradii_samples = 8\nsample_count = 1200\n"
    )
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    ok = main(["run", "--config", str(cfg), "--out", str(out1)]) == EXIT_OK
    ok &= main(["run", "--config", str(cfg), "--out", str(out2)]) == EXIT_OK
    identical = (out1 / "report.json").read_bytes() == (out2 / "report.json").read_bytes()

    bad_cfg = tmp_path / "bad.txt"
    bad_cfg.write_text("h = 1/512\nn_max = 6\n")
    code_cfg = main(["run", "--config", str(bad_cfg), "--out", str(tmp_path / "ob")])
    solver_cfg = tmp_path / "solver.txt"
    solver_cfg.write_text("h = 1/128\nn_max = 2\ntol = 1e-30\nmax_cycles = 1\nmethod = sor\n")
    code_solver = main(["run", "--config", str(solver_cfg), "--out", str(tmp_path / "os")])

    # a consistent-but-wrong stored constant must yield the check exit code
    import hashlib, shutil

    bad = tmp_path / "models_wrong"
    shutil.copytree(out1 / "models", bad)
    meta = json.loads((bad / "meta.json").read_text())
    meta["upper"]["core_depth"] *= 1e3
    (bad / "meta.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    manifest = json.loads((bad / "manifest.json").read_text())
    manifest["files"]["meta.json"] = hashlib.sha256((bad / "meta.json").read_bytes()).hexdigest()
    (bad / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    code_checks = main(["verify", "--models", str(bad)])

    ok = ok and identical and code_cfg == EXIT_CONFIG and code_solver == EXIT_SOLVER and code_checks == EXIT_CHECKS
    _report(
        10,
        ok,
        f"byte-identical reports: {identical}; exit codes config={code_cfg} (1), "
        f"solver={code_solver} (2), checks={code_checks} (3)",
    )
