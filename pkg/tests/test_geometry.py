"""Exact-geometry tests: semigroup law, containment, disjointness, covering."""

from __future__ import annotations

import random
from fractions import Fraction

import pytest

from perfstrip.geometry import (
    K_HALF_SIDE,
    GroupElement,
    PeriodCell,
    SquareSpec,
    check_disjoint,
    covering_squares,
    line_intersection_length,
    locate_square,
    projection_cover,
    projection_union_covers_period,
)


def test_apply_identity():
    g = GroupElement(0, 0)
    assert g.apply(0.3 + 0.4j) == 0.3 + 0.4j


def test_apply_direct_formula():
    assert GroupElement(1, 1).apply(0.2 + 0.4j) == pytest.approx(0.6 + 0.2j)
    assert GroupElement(2, 3).apply(1j) == pytest.approx(0.75 + 0.25j)


def test_composition_law_exact():
    rng = random.Random(20240811)
    z = (Fraction(3, 7), Fraction(5, 11))
    for _ in range(200):
        g1 = GroupElement(rng.randint(0, 10), rng.randint(-100, 100))
        g2 = GroupElement(rng.randint(0, 10), rng.randint(-100, 100))
        step = g2.apply(g1.apply(z))
        combined = g1.then(g2).apply(z)
        assert step == combined  # exact Fractions
        assert g1.then(g2) == GroupElement(
            g1.level + g2.level, g1.shift + g2.shift * 2**g1.level
        )


def test_negative_level_rejected():
    with pytest.raises(ValueError):
        GroupElement(-1, 0)


def test_square_geometry_constants():
    s = SquareSpec("S+", 0, 0)
    assert s.center == (0, 1)
    assert s.half_side == Fraction(3, 10)
    k = SquareSpec("K+", 0, 0)
    assert k.half_side == Fraction(2, 7)
    low = SquareSpec("S-", 2, 3)
    assert low.center == (Fraction(7, 8), Fraction(-1, 4))
    # core square strictly inside its outer square (2/7 < 3/10)
    assert Fraction(2, 7) < Fraction(3, 10)


def test_locate_square_examples():
    hit = locate_square(1j, families=("S+", "S-"))
    assert hit is not None
    spec, where = hit
    assert (spec.family, spec.level, spec.index) == ("S+", 0, 0)

    spec, _ = locate_square(0.5 + 0.5j, families=("S+", "S-"))
    assert (spec.family, spec.level, spec.index) == ("S+", 1, 1)

    assert locate_square(0.5 + 0.65j) is None


def test_locate_square_prefers_core():
    spec, where = locate_square(1j, families=("S+", "K+"))
    assert spec.family == "K+"
    assert where == "interior"


def test_locate_square_boundary():
    spec, where = locate_square((Fraction(3, 10), Fraction(1)))
    assert spec.family == "S+" and where == "boundary"


def test_locate_consistent_with_apply():
    rng = random.Random(7)
    base = SquareSpec("S+", 0, 0)
    for _ in range(100):
        cx = Fraction(rng.randint(-29, 29), 100)
        cy = 1 + Fraction(rng.randint(-29, 29), 100)
        n = rng.randint(0, 4)
        k = rng.randint(-10, 10)
        assert base.contains((cx, cy), closed=False)
        image = GroupElement(n, k).apply((cx, cy))
        hit = locate_square(image, families=("S+",), n_max=4)
        assert hit is not None
        spec, where = hit
        assert (spec.level, spec.index, where) == (n, k, "interior")


def test_check_disjoint_levels():
    ok, witness = check_disjoint(0)
    assert ok and witness is None
    ok, witness = check_disjoint(6)
    assert ok and witness is None
    ok, witness = check_disjoint(6, include_lower=True)
    assert ok and witness is None


def test_check_disjoint_perturbed():
    ok, witness = check_disjoint(0, half_side=Fraction(6, 10))
    assert not ok
    a, b = witness
    assert {a.index, b.index} == {0, 1} and a.level == b.level == 0


def test_projection_cover_examples():
    found = projection_cover(0, 0)
    assert any(s.family == "K+" and s.index == 0 for s in found)

    found = projection_cover(Fraction(1, 2), 0)
    assert any(s.family == "K-" for s in found)

    # 0.35 misses K+ (2/7 ~ 0.2857) but lies in the K- interval
    found = projection_cover(Fraction(35, 100), 0)
    assert found and all(s.family == "K-" for s in found)


def test_projection_cover_brute_force_agreement():
    rng = random.Random(99)
    for _ in range(500):
        x0 = Fraction(rng.randint(0, 10**6), 10**6)
        n = rng.randint(0, 5)
        got = {(s.family, s.index) for s in projection_cover(x0, n)}
        scale = Fraction(1, 2**n)
        expect = set()
        for k in range(-2, 2**n + 2):
            if abs(x0 - k * scale) <= K_HALF_SIDE * scale:
                expect.add(("K+", k))
            if abs(x0 - (k + Fraction(1, 2)) * scale) <= K_HALF_SIDE * scale:
                expect.add(("K-", k))
        assert got == expect and got


def test_line_intersection_length():
    assert line_intersection_length(0, 0) >= Fraction(4, 7)
    assert line_intersection_length(0, 2) >= Fraction(4, 7) / 4
    # level-1 value at x0 = 0.23: exact enumeration
    x0 = Fraction(23, 100)
    count = len(projection_cover(x0, 1))
    assert line_intersection_length(x0, 1) == count * Fraction(4, 7) / 2


def test_projection_union_covers_all_levels():
    for n in range(7):
        assert projection_union_covers_period(n)


def test_period_cell_counts_and_strip():
    cell = PeriodCell(4)
    assert cell.level_counts_ok()
    assert cell.all_inside_open_strip()
    assert PeriodCell(4, upper=False).all_inside_open_strip()
    assert len(cell.squares()) == 2**5 - 1


def test_covering_squares_outer_family():
    found = covering_squares(Fraction(0), 0, ("S+", "S-"))
    assert any(s.family == "S+" for s in found)
