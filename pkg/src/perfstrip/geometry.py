"""Exact dyadic geometry of the square pattern.

The plane is organized by the semigroup of maps g_{n,k}(z) = 2^-n (z + k),
n >= 0, k integer.  Two families of axis-aligned squares live in the strip
|Im z| <= 4/3: "outer" squares of half-side 3/10 and concentric "core"
squares of half-side 2/7, one pair per (n, k) above the real axis (centers
2^-n (k + i)) and one pair below (centers 2^-n (k + 1/2 - i)).

Everything in this module is exact rational arithmetic (fractions.Fraction).
Containment, disjointness and projection-cover decisions are the
combinatorial backbone of the whole construction and must not depend on
floating-point rounding; floats enter only when a caller converts a sampled
point, and Python converts floats to Fraction exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, NamedTuple, Optional, Sequence

__all__ = [
    "S_HALF_SIDE",
    "K_HALF_SIDE",
    "STRIP_HEIGHT",
    "FAMILIES",
    "GroupElement",
    "SquareSpec",
    "Rect",
    "PeriodCell",
    "locate_square",
    "check_disjoint",
    "projection_cover",
    "covering_squares",
    "line_intersection_length",
    "projection_union_covers_period",
]

# Half-sides of the two square families and the strip half-height.
S_HALF_SIDE = Fraction(3, 10)
K_HALF_SIDE = Fraction(2, 7)
STRIP_HEIGHT = Fraction(4, 3)

# Family tags: outer/core squares above (+) and below (-) the real axis.
FAMILIES = ("S+", "K+", "S-", "K-")

RationalPoint = tuple[Fraction, Fraction]


def _to_rational_point(z) -> RationalPoint:
    """Convert a point (complex, float pair, or Fraction pair) exactly."""
    if isinstance(z, tuple):
        return Fraction(z[0]), Fraction(z[1])
    if isinstance(z, complex):
        return Fraction(z.real), Fraction(z.imag)
    # real scalar
    return Fraction(z), Fraction(0)


@dataclass(frozen=True)
class GroupElement:
    """One map z -> 2^-level (z + shift) of the dyadic semigroup."""

    level: int
    shift: int

    def __post_init__(self) -> None:
        if self.level < 0:
            raise ValueError("level must be nonnegative")

    def apply(self, z):
        """Apply the map to a point, preserving the input's exactness.

        Accepts a complex number (float arithmetic) or a pair of
        Fraction/int/float coordinates (exact arithmetic).
        """
        if isinstance(z, tuple):
            x, y = Fraction(z[0]), Fraction(z[1])
            scale = Fraction(1, 2**self.level)
            return ((x + self.shift) * scale, y * scale)
        return (z + self.shift) * 0.5**self.level

    def then(self, other: "GroupElement") -> "GroupElement":
        """Composite map: apply ``self`` first, then ``other``."""
        return GroupElement(
            self.level + other.level,
            self.shift + other.shift * 2**self.level,
        )


class Rect(NamedTuple):
    """Axis-aligned square given by exact center and half-side."""

    cx: Fraction
    cy: Fraction
    half: Fraction

    def contains(self, x: Fraction, y: Fraction, closed: bool = True) -> bool:
        dx, dy = abs(x - self.cx), abs(y - self.cy)
        if closed:
            return dx <= self.half and dy <= self.half
        return dx < self.half and dy < self.half

    def on_boundary(self, x: Fraction, y: Fraction) -> bool:
        return self.contains(x, y, closed=True) and not self.contains(x, y, closed=False)

    def x_interval(self) -> tuple[Fraction, Fraction]:
        return self.cx - self.half, self.cx + self.half

    def y_interval(self) -> tuple[Fraction, Fraction]:
        return self.cy - self.half, self.cy + self.half


@dataclass(frozen=True)
class SquareSpec:
    """One square of the pattern, identified by family and group index."""

    family: str
    level: int
    index: int

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.level < 0:
            raise ValueError("level must be nonnegative")

    @property
    def half_side(self) -> Fraction:
        base = S_HALF_SIDE if self.family.startswith("S") else K_HALF_SIDE
        return base * Fraction(1, 2**self.level)

    @property
    def center(self) -> RationalPoint:
        scale = Fraction(1, 2**self.level)
        if self.family.endswith("+"):
            return (self.index * scale, scale)
        return ((self.index + Fraction(1, 2)) * scale, -scale)

    @property
    def rect(self) -> Rect:
        cx, cy = self.center
        return Rect(cx, cy, self.half_side)

    def reflected_rect(self) -> Rect:
        """Mirror image across the real axis (used to solve the lower
        half-strip as an upper problem)."""
        cx, cy = self.center
        return Rect(cx, -cy, self.half_side)

    def contains(self, z, closed: bool = True) -> bool:
        x, y = _to_rational_point(z)
        return self.rect.contains(x, y, closed=closed)

    def group_element(self) -> GroupElement:
        return GroupElement(self.level, self.index)


def _candidate_indices(x: Fraction, level: int, offset: Fraction) -> Iterator[int]:
    """Integer indices k whose square at ``level`` could contain x.

    Square centers sit at 2^-level (k + offset); half-sides are < 1/2 of the
    level spacing, so at most one k qualifies, but boundary ties make it
    safest to test the two nearest.
    """
    xi = x * 2**level - offset
    k0 = xi.__floor__()
    yield int(k0)
    yield int(k0) + 1


def locate_square(z, families: Sequence[str] = FAMILIES, n_max: int = 4):
    """Find the square (if any) of the requested families containing z.

    Returns (SquareSpec, "interior" | "boundary") or None.  Within one
    family the squares are pairwise disjoint, but an S-square strictly
    contains its core K-square; when both families are requested the
    smallest containing square is returned (K before S).
    """
    x, y = _to_rational_point(z)
    order = sorted(families, key=lambda f: 0 if f.startswith("K") else 1)
    for family in order:
        upper = family.endswith("+")
        if (y > 0) != upper and y != 0:
            continue
        offset = Fraction(0) if upper else Fraction(1, 2)
        for level in range(n_max + 1):
            for k in _candidate_indices(x, level, offset):
                spec = SquareSpec(family, level, k)
                if spec.contains((x, y), closed=True):
                    where = "interior" if spec.contains((x, y), closed=False) else "boundary"
                    return spec, where
    return None


@dataclass(frozen=True)
class PeriodCell:
    """One unit period of the perforated half-strip, truncated at n_max.

    The square pattern at level n has period 2^-n, which divides 1, so one
    x-period of width 1 with wraparound represents the whole strip.  Squares
    with level > n_max are treated as absent from the discrete model.
    """

    n_max: int
    upper: bool = True

    def __post_init__(self) -> None:
        if self.n_max < 0:
            raise ValueError("n_max must be nonnegative")

    @property
    def family(self) -> str:
        return "S+" if self.upper else "S-"

    @property
    def core_family(self) -> str:
        return "K+" if self.upper else "K-"

    def squares(self, family: Optional[str] = None) -> list[SquareSpec]:
        """All squares of one family with center in [0, 1), levels <= n_max."""
        family = family or self.family
        out = []
        for level in range(self.n_max + 1):
            for k in range(2**level):
                out.append(SquareSpec(family, level, k))
        return out

    def level_counts_ok(self) -> bool:
        """Exactly 2^n distinct indices per period at level n."""
        for level in range(self.n_max + 1):
            ks = {s.index for s in self.squares() if s.level == level}
            if ks != set(range(2**level)):
                return False
        return True

    def all_inside_open_strip(self) -> bool:
        """Exact check that every listed square avoids both strip edges."""
        for spec in self.squares():
            lo, hi = spec.rect.y_interval()
            if self.upper:
                if not (lo > 0 and hi < STRIP_HEIGHT):
                    return False
            else:
                if not (hi < 0 and lo > -STRIP_HEIGHT):
                    return False
        return True


def check_disjoint(
    n_max: int,
    half_side: Fraction = S_HALF_SIDE,
    include_lower: bool = False,
) -> tuple[bool, Optional[tuple[SquareSpec, SquareSpec]]]:
    """Exhaustive exact pairwise disjointness test over one period.

    Tests all outer squares at levels <= n_max whose closure meets the
    closed period [0, 1] (closed squares; touching counts as overlap).
    ``half_side`` is injectable so a perturbed geometry can be shown to
    fail.  Returns (ok, witness pair or None).
    """

    def rect_of(spec: SquareSpec) -> Rect:
        cx, cy = spec.center
        return Rect(cx, cy, half_side * Fraction(1, 2**spec.level))

    squares: list[SquareSpec] = []
    for level in range(n_max + 1):
        # indices whose square can meet [0,1] even after perturbation
        margin = int(half_side) + 1
        for k in range(-margin, 2**level + margin + 1):
            spec = SquareSpec("S+", level, k)
            x_lo, x_hi = rect_of(spec).x_interval()
            if x_hi < 0 or x_lo > 1:
                continue
            squares.append(spec)
            if include_lower:
                squares.append(SquareSpec("S-", level, k))

    for i, a in enumerate(squares):
        ra = rect_of(a)
        for b in squares[i + 1 :]:
            rb = rect_of(b)
            sep_x = abs(ra.cx - rb.cx) > ra.half + rb.half
            sep_y = abs(ra.cy - rb.cy) > ra.half + rb.half
            if not (sep_x or sep_y):
                return False, (a, b)
    return True, None


def covering_squares(x0, level: int, families: Sequence[str]) -> list[SquareSpec]:
    """Squares of the given families at ``level`` whose x-projection
    contains x0 (exact decision)."""
    x = Fraction(x0)
    found = []
    for family in families:
        half = S_HALF_SIDE if family.startswith("S") else K_HALF_SIDE
        offset = Fraction(0) if family.endswith("+") else Fraction(1, 2)
        for k in _candidate_indices(x, level, offset):
            spec = SquareSpec(family, level, k)
            lo, hi = spec.rect.x_interval()
            if lo <= x <= hi:
                found.append(spec)
    return found


def projection_cover(x0, level: int) -> list[SquareSpec]:
    """Core squares (either side) whose x-projection contains x0.

    The two core projection unions jointly cover the real axis, so the
    result is never empty; emptiness would mean the pattern constants are
    wrong and raises RuntimeError.
    """
    found = covering_squares(x0, level, ("K+", "K-"))
    if not found:
        raise RuntimeError(
            f"core projections failed to cover x0={x0!r} at level {level}"
        )
    return found


def line_intersection_length(x0, level: int) -> Fraction:
    """Exact total length of the vertical line Re z = x0 inside the level-n
    core squares, within |Im z| <= 4/3.

    Core squares span 2^-n [5/7, 9/7] in |Im z|, which lies inside the
    strip, so every covering square contributes its full chord 2^-n * 4/7.
    The result is therefore always >= (4/7) 2^-n.
    """
    chord = 2 * K_HALF_SIDE * Fraction(1, 2**level)
    return chord * len(projection_cover(x0, level))


def _merge_intervals(
    intervals: Iterable[tuple[Fraction, Fraction]]
) -> list[tuple[Fraction, Fraction]]:
    out: list[tuple[Fraction, Fraction]] = []
    for lo, hi in sorted(intervals):
        if out and lo <= out[-1][1]:
            if hi > out[-1][1]:
                out[-1] = (out[-1][0], hi)
        else:
            out.append((lo, hi))
    return out


def projection_union_covers_period(level: int) -> bool:
    """Exact interval-union proof that the two core projection unions cover
    [0, 1) at the given level (no sampling)."""
    scale = Fraction(1, 2**level)
    intervals = []
    for k in range(-1, 2**level + 1):
        c = k * scale
        intervals.append((c - K_HALF_SIDE * scale, c + K_HALF_SIDE * scale))
        c = (k + Fraction(1, 2)) * scale
        intervals.append((c - K_HALF_SIDE * scale, c + K_HALF_SIDE * scale))
    merged = _merge_intervals(intervals)
    return any(lo <= 0 and hi >= 1 for lo, hi in merged)
