"""Check-engine tests: records, decay machinery, the estimate of the
decay base, and the individual named checks at the test spacing."""

from __future__ import annotations

import numpy as np
import pytest

from perfstrip.verify import (
    CheckRecord,
    DecayRow,
    check_continuity,
    check_majorants,
    check_negative_bounds,
    check_periodicity,
    check_selfsimilarity,
    check_sign_structure,
    check_subharmonic,
    estimate_c,
    geometry_checks,
    line_decay,
    run_suite,
)


def test_record_pass_semantics():
    rec = CheckRecord("x", "q", margin=-0.5e-4, tolerance=1e-4)
    assert rec.passed and rec.grade == "pass (discretization)"
    rec2 = CheckRecord("x", "q", margin=0.5, tolerance=0.0)
    assert rec2.passed and rec2.grade == "pass"
    rec3 = CheckRecord("x", "q", margin=-1.0, tolerance=0.1)
    assert not rec3.passed and rec3.grade == "fail"


def test_estimate_c_closed_form():
    rows = [DecayRow(n=n, a_n=0.25**n, bound=0.0, k_ratio=1.0) for n in range(5)]
    assert estimate_c(rows) == pytest.approx(4.0, rel=1e-12)


def test_estimate_c_skips_anomalies():
    rows = [
        DecayRow(n=0, a_n=0.9, bound=0.0, k_ratio=1.0),
        DecayRow(n=1, a_n=1.5, bound=0.0, k_ratio=1.0),  # anomalous
        DecayRow(n=2, a_n=0.01, bound=0.0, k_ratio=1.0),
    ]
    assert estimate_c(rows) == pytest.approx(0.01 ** (-0.5))
    with pytest.raises(ValueError):
        estimate_c([DecayRow(n=1, a_n=1.5, bound=0.0, k_ratio=1.0)])


def test_geometry_records_pass():
    for rec in geometry_checks(6):
        assert rec.passed, rec.name


def test_line_decay_signs_and_ordering(glued_256, rng):
    for x0 in rng.uniform(0, 1, 20):
        for n in range(glued_256.n_max + 1):
            outer, core = line_decay(glued_256, float(x0), n)
            assert outer <= 0.0 and core <= 0.0
            assert outer <= core  # the outer chord contains the core chord


def test_line_decay_halved_step_agrees(glued_256):
    for x0 in (0.1, 0.37):
        a1, k1 = line_decay(glued_256, x0, 2)
        a2, k2 = line_decay(glued_256, x0, 2, step=glued_256.h / 2)
        assert a1 == pytest.approx(a2, rel=5e-4)
        assert k1 == pytest.approx(k2, rel=5e-4)


def test_named_checks_pass_at_256(glued_256, rng):
    h = glued_256.h
    tol = 10 * h * h
    assert check_periodicity(glued_256, rng, 2000).passed
    assert check_selfsimilarity(glued_256, rng, 2000).passed
    rec_abs, rec_rel = check_negative_bounds(glued_256, rng, 2000)
    assert rec_abs.passed and rec_abs.margin >= 0.0  # exact by construction
    assert rec_rel.passed and rec_rel.margin > 0.0
    assert check_sign_structure(glued_256, rng, 1500).passed
    assert check_continuity(glued_256, rng, 1000).passed
    assert check_subharmonic(glued_256, rng, count=3000).passed


def test_majorants(glued_256):
    sups = []
    for n in (1, 2, 3):
        rec, sup = check_majorants(glued_256, n)
        assert rec.passed, rec.name
        sups.append(sup)
    assert sups[0] > sups[1] > sups[2]


def test_full_suite_and_table(glued_256, rng):
    records, table = run_suite(glued_256, rng, line_count=48, sample_count=2500)
    assert all(r.passed for r in records), [r.name for r in records if not r.passed]
    assert table.c > 1.0
    consts = glued_256.constants()
    m_tilde = max(consts["M"], consts["M1"])
    beta_tilde = min(consts["beta"], consts["beta1"])
    for row in table.rows:
        expect = (4.0 / 7.0) * 0.5**row.n * beta_tilde * m_tilde ** (-row.n)
        assert row.bound == pytest.approx(expect, rel=1e-12)
        assert row.a_n >= row.bound  # outer mass dominates the core bound
        assert row.k_ratio >= 1.0


def test_decay_log_envelope(glued_256):
    # geometric decay of the core masses: log I_n runs between the
    # analytic floor (4/7) 2^-n beta~ M~^-n and a ceiling with the
    # gentlest per-level factor 1/(2 min(M, M1)).  Consecutive ratios are
    # NOT confined to a fixed window: the line alternates between the two
    # families, whose depth ratios differ by an order of magnitude, so the
    # bound must be taken per level against each family's own constants.
    consts = glued_256.constants()
    m_low = min(consts["M"], consts["M1"])
    m_tilde = max(consts["M"], consts["M1"])
    beta_tilde = min(consts["beta"], consts["beta1"])
    for x0 in (0.05, 0.33, 0.71):
        cores = [-line_decay(glued_256, x0, n)[1] for n in range(glued_256.n_max + 1)]
        for n, val in enumerate(cores):
            floor = (4.0 / 7.0) * 0.5**n * beta_tilde * m_tilde ** (-n)
            ceiling = 100.0 * cores[0] * (2.0 * m_low) ** (-n)
            assert floor <= val <= ceiling, (x0, n, val, floor, ceiling)
        assert all(b < a for a, b in zip(cores, cores[1:]))  # strictly decreasing


def test_sub_mean_at_filled_pole(glued_256):
    # the core-square center is the Green pole: the value is -inf there and
    # any circle average is finite, so the margin is +inf (subharmonic)
    from perfstrip.laplace import sub_mean_test

    h = glued_256.h
    margin = sub_mean_test(glued_256.evaluate_many, 1j, h, 64)
    assert margin == np.inf


def test_suite_deterministic(glued_256):
    r1, t1 = run_suite(glued_256, np.random.default_rng(7), line_count=16, sample_count=800)
    r2, t2 = run_suite(glued_256, np.random.default_rng(7), line_count=16, sample_count=800)
    assert [a.margin for a in r1] == [b.margin for b in r2]
    assert t1.c == t2.c
