"""Annulus-transport tests: the map, the outer extension, the interface,
the negative-component structure, and the per-level arc-mass decay."""

from __future__ import annotations

import math

import numpy as np
import pytest

from perfstrip.annulus import (
    AnnulusPotential,
    arc_integral_over_level,
    build_annulus,
    check_annulus_submean,
    check_arc_strip_consistency,
    check_components,
    check_arc_mass_decay,
    choose_outer_amplitude,
    map_to_annulus,
    map_to_strip,
)
from perfstrip.verify import line_decay


EPS = 0.4


def test_map_examples():
    assert map_to_strip(np.array([1.0 + 0j]), EPS)[0] == 0.0
    z = map_to_strip(np.array([2.0 + 0j]), EPS)[0]
    assert z.imag == 0.0
    assert z.real == pytest.approx(4.0 * math.log(2.0) / (3.0 * EPS))
    z = map_to_strip(np.array([np.exp(1j * EPS)]), EPS)[0]
    assert z.imag == pytest.approx(4.0 / 3.0, rel=1e-12)
    with pytest.raises(ValueError):
        map_to_strip(np.array([0.0 + 0j]), EPS)


def test_map_round_trip():
    rng = np.random.default_rng(2)
    z = rng.uniform(0, 2, 50) + 1j * rng.uniform(-4 / 3, 4 / 3, 50)
    back = map_to_strip(map_to_annulus(z, EPS), EPS)
    assert np.max(np.abs(back - z)) < 1e-12


def test_window_length_exceeds_two_periods(annulus_512):
    assert annulus_512.window_length > 2.0


def test_sector_exponent_identity(annulus_512):
    lam = annulus_512.sector_exponent
    assert lam * (math.pi - EPS) == pytest.approx(math.pi / 2, rel=1e-15)


def test_outer_formula_values(annulus_512):
    a = annulus_512.outer_amplitude
    lam = annulus_512.sector_exponent
    # positive real axis maps to the real axis: w = 0
    assert annulus_512.evaluate(1.5 + 0j) == 0.0
    # theta = pi: cos term is 1
    w = annulus_512.evaluate(1.5 * np.exp(1j * math.pi))
    assert w == pytest.approx(1.0 + a * 1.5**lam, rel=1e-12)
    # on the rays both charts give 1
    for sgn in (1.0, -1.0):
        w_ray = annulus_512.evaluate(1.4 * np.exp(1j * sgn * EPS))
        assert w_ray == pytest.approx(1.0, abs=5 * annulus_512.h)


def test_chart_agreement_on_rays(annulus_512):
    rs = np.linspace(1.0, 2.0, 23)
    inner = annulus_512.glued.evaluate_many(map_to_strip(rs * np.exp(1j * EPS), EPS))
    outer = annulus_512.outer_value(rs, np.full_like(rs, EPS))
    assert np.max(np.abs(inner - outer)) <= 5 * annulus_512.h


def test_outer_amplitude_positive_and_jump_monotone(glued_512):
    a = choose_outer_amplitude(glued_512, EPS)
    assert a > 0.0
    # doubling the amplitude preserves the jump sign: the outer angular
    # derivative at the ray only grows with the amplitude
    lam = math.pi / (2.0 * (math.pi - EPS))
    inner_sup = a * lam / 2.0  # by construction a = 2 sup / lam
    for amp in (a, 2 * a):
        assert amp * lam * 1.0**lam - inner_sup > 0.0


def test_amplitude_validation(glued_512):
    with pytest.raises(ValueError):
        AnnulusPotential(glued=glued_512, eps=EPS, outer_amplitude=-1.0)
    with pytest.raises(ValueError):
        AnnulusPotential(glued=glued_512, eps=1.2, outer_amplitude=1.0)
    with pytest.raises(ValueError):
        # window shorter than 1.5 periods
        AnnulusPotential(glued=glued_512, eps=0.7, outer_amplitude=1.0)


def test_bounds_finite_and_reported(annulus_512):
    w_inf, w_sup = annulus_512.bounds(24, 192)
    assert math.isfinite(w_inf) and math.isfinite(w_sup)
    assert w_inf <= 0.0 <= w_sup
    assert w_sup <= annulus_512.analytic_sup() + 1e-9


def test_annulus_rejects_outside_points(annulus_512):
    with pytest.raises(ValueError):
        annulus_512.evaluate(0.5 + 0j)
    with pytest.raises(ValueError):
        annulus_512.evaluate(2.5 + 0j)


def test_arc_integral_sign(annulus_512):
    for r in (1.1, 1.5, 1.9):
        for n in (0, 1, 2):
            assert arc_integral_over_level(annulus_512, r, n) <= 0.0


def test_arc_strip_consistency(annulus_512):
    rec = check_arc_strip_consistency(annulus_512, math.sqrt(2.0), 1)
    assert rec.passed, rec.note


def test_arc_mass_decay(annulus_512, rng, glued_512):
    from perfstrip.verify import build_decay_table

    table, _ = build_decay_table(glued_512, rng, line_count=48)
    radii = np.linspace(1.0, 2.0, 12)
    for n in (1, 2):
        rec = check_arc_mass_decay(annulus_512, table.c, radii, n)
        assert rec.passed, (rec.name, rec.margin)


def test_components(annulus_512, rng):
    for n in (1, 2):
        rec = check_components(annulus_512, rng, n, count=800)
        assert rec.passed, (rec.name, rec.margin, rec.note)


def test_annulus_submean(annulus_512, rng):
    rec = check_annulus_submean(annulus_512, rng, count=1500)
    assert rec.passed, (rec.margin, rec.tolerance)
