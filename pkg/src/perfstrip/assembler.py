"""Assemble the global potential on the strip |Im z| <= 4/3.

Each half-strip gets one Dirichlet solve on its perforated period cell
(the lower half is reflected to an upper problem; its square pattern is a
genuinely different perforation, not a shift of the upper one).  The
fundamental square's Green function is shared by both halves up to
translation, so it is solved once.

From the solved fields come the model constants: the per-level decay ratio
(the reciprocal of the minimum of the base field on the half-height line),
the Green scale (half the ratio of the extreme boundary normal
derivatives, so the normal-derivative jump stays positive when the squares
are filled with the scaled negative Green function), and the core depth
(scale times the minimum of the Green function over the concentric core
square).  Values inside every square then follow from the self-similar
extension formula; outside, from the interpolated base field; zero on the
real axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import (
    K_HALF_SIDE,
    S_HALF_SIDE,
    STRIP_HEIGHT,
    PeriodCell,
    Rect,
)
from .laplace import (
    GreenField,
    edge_normal_derivative,
    green_edge_normal_derivative,
    green_square,
    solve_dirichlet,
)
from .corners import solve_strip_corrected

__all__ = [
    "HalfStripModel",
    "GluedPotential",
    "build_half_strip",
    "build_glued",
    "compute_decay_ratio",
    "choose_green_scale",
    "compute_core_depth",
    "check_intermediate",
]

_S_HALF = float(S_HALF_SIDE)
_STRIP_TOP = float(STRIP_HEIGHT)


def compute_decay_ratio(field, subsamples: int = 4) -> float:
    """Reciprocal of the minimum of the field on the half-height line.

    The interpolated base field is piecewise linear in x along the line, so
    its exact minimum is attained at grid columns; extra subsamples guard
    the smooth corner-mode parts of a corrected field.  Fails loudly if the
    minimum is not strictly positive (a solver or masking failure).
    """
    h = field.h
    nx = int(round(1.0 / h))
    xs = (np.arange(nx * subsamples) * h) / subsamples
    vals = field.evaluate_many(xs, np.full_like(xs, 2.0 / 3.0))
    vmin = float(vals.min())
    if not vmin > 0.0:
        raise ValueError(f"minimum on the half-height line is {vmin}, not positive")
    return 1.0 / vmin


def choose_green_scale(field, green: GreenField, fund: Rect, offset: Optional[float] = None) -> float:
    """Scale for the negative-Green filling of the squares.

    Half the ratio of (infimum of the outward normal derivative of the
    base field on the fundamental square's boundary) to (supremum of the
    inward normal derivative of the Green function), both sampled away
    from corners.  Any value below the ratio keeps the normal-derivative
    jump positive across the square boundary; the factor 1/2 absorbs the
    O(h) one-sided-derivative error.
    """
    offset = 2 * field.h if offset is None else offset
    inf_u = math.inf
    sup_g = 0.0
    for side in "NSEW":
        _, du = edge_normal_derivative(field, fund, side, offset, outward=True)
        inf_u = min(inf_u, float(du.min()))
        _, dg = green_edge_normal_derivative(green, side, offset)
        sup_g = max(sup_g, float(dg.max()))
    if not inf_u > 0.0:
        raise ValueError(f"outward normal derivative has nonpositive infimum {inf_u}")
    if not sup_g > 0.0:
        raise ValueError("Green normal derivative profile degenerate")
    return 0.5 * inf_u / sup_g


def compute_core_depth(green_scale: float, green: GreenField) -> float:
    """Depth of the filled potential over the core square: scale times the
    minimum of G there (attained on the core boundary)."""
    depth = green_scale * green.min_on_core_boundary(K_HALF_SIDE)
    if not depth > 0.0:
        raise ValueError("core depth not positive")
    return depth


@dataclass
class HalfStripModel:
    """One solved half-strip with its extension constants."""

    orientation: str  # "upper" | "lower"
    n_max: int
    p: int
    field: object  # Field | CorrectedField
    green: GreenField
    decay_ratio: float  # > 1
    green_scale: float  # > 0
    core_depth: float  # > 0
    x_offset: float  # square-center offset in the solved (upper) frame

    def __post_init__(self) -> None:
        if not self.decay_ratio > 1.0:
            raise ValueError("decay ratio must exceed 1")

    @property
    def h(self) -> float:
        return self.field.h

    def locate_level(self, x: np.ndarray, y: np.ndarray):
        """Vectorized square lookup in the solved frame.

        Returns (level, index, frame) where level = -1 means no square;
        frame is the point mapped into the canonical fundamental square.
        Levels are disjoint in y, so at most one can match.  Comparisons
        use the float image of the exact half-side: a point within one
        ulp of an edge may classify either way, which moves its value by
        O(ulp * gradient) only (both charts agree on the edge).
        """
        level = np.full(x.shape, -1, dtype=np.int64)
        index = np.zeros(x.shape, dtype=np.int64)
        fre = np.zeros(x.shape)
        fim = np.zeros(x.shape)
        for n in range(self.n_max + 1):
            twon = float(2**n)
            xi = x * twon - self.x_offset
            k = np.rint(xi)
            dx = xi - k
            dy = y * twon - 1.0
            hit = (np.abs(dx) <= _S_HALF) & (np.abs(dy) <= _S_HALF)
            level = np.where(hit, n, level)
            index = np.where(hit, k.astype(np.int64), index)
            fre = np.where(hit, dx, fre)
            fim = np.where(hit, dy + 1.0, fim)
        return level, index, fre, fim

    def evaluate_frame(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Value at points of the solved (upper) frame, 0 < y <= 4/3."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.empty(x.shape)
        level, _, fre, fim = self.locate_level(x, y)
        outside = level < 0
        if np.any(outside):
            out[outside] = self.field.evaluate_many(x[outside], y[outside])
        inside = ~outside
        if np.any(inside):
            g = self.green.evaluate_z(fre[inside] + 1j * fim[inside])
            scale = self.green_scale * self.decay_ratio ** (-level[inside].astype(float))
            out[inside] = -scale * g
        return out


@dataclass
class GluedPotential:
    """The full potential on |Im z| <= 4/3, evaluable anywhere there."""

    upper: HalfStripModel
    lower: HalfStripModel

    @property
    def h(self) -> float:
        return self.upper.h

    @property
    def n_max(self) -> int:
        return self.upper.n_max

    def evaluate_many(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        x = z.real.astype(float)
        y = z.imag.astype(float)
        if np.any(np.abs(y) > _STRIP_TOP + 1e-12):
            raise ValueError("point outside the strip |Im z| <= 4/3")
        y = np.clip(y, -_STRIP_TOP, _STRIP_TOP)
        out = np.zeros(z.shape)
        top = np.abs(y) >= _STRIP_TOP
        out[top] = 1.0
        up = (y > 0) & ~top
        if np.any(up):
            out[up] = self.upper.evaluate_frame(x[up], y[up])
        low = (y < 0) & ~top
        if np.any(low):
            out[low] = self.lower.evaluate_frame(x[low], -y[low])
        # y == 0 stays exactly 0
        return out

    def evaluate(self, z: complex) -> float:
        return float(self.evaluate_many(np.array([z], dtype=complex))[0])

    def constants(self) -> dict:
        return {
            "M": self.upper.decay_ratio,
            "t": self.upper.green_scale,
            "beta": self.upper.core_depth,
            "M1": self.lower.decay_ratio,
            "t1": self.lower.green_scale,
            "beta1": self.lower.core_depth,
        }


def _strip_rects(cell: PeriodCell) -> list[Rect]:
    if cell.upper:
        return [s.rect for s in cell.squares()]
    return [s.reflected_rect() for s in cell.squares()]


def build_half_strip(
    orientation: str,
    p: int,
    n_max: int = 4,
    tol: float = 1e-9,
    method: str = "auto",
    corner_correction: bool = True,
    corner_passes: int = 2,
    green: Optional[GreenField] = None,
    max_cycles: int = 40,
) -> HalfStripModel:
    """Solve one half-strip problem and extract its constants.

    The lower problem is reflected across the real axis and solved as an
    upper problem whose squares sit at half-integer centers.
    """
    if orientation not in ("upper", "lower"):
        raise ValueError("orientation must be 'upper' or 'lower'")
    upper = orientation == "upper"
    cell = PeriodCell(n_max, upper=upper)
    rects = _strip_rects(cell)
    label = f"{orientation}-strip"
    if corner_correction:
        # correct the corners of the two coarsest levels: they flank the
        # constrictions that set the half-height minimum, and their cutoff
        # annuli are well resolved at production spacings
        coarse = [r for r in rects if r.half >= S_HALF_SIDE / 2]
        field = solve_strip_corrected(
            rects, coarse, p, tol=tol, method=method, passes=corner_passes,
            label=label, max_cycles=max_cycles,
        )
    else:
        field = solve_dirichlet(
            rects, p, tol=tol, method=method, label=label, max_cycles=max_cycles
        )
    fund = next(r for r in rects if r.half == S_HALF_SIDE)
    if green is None:
        green = green_square(p, tol=tol, center=1j, method=method, max_cycles=max_cycles)
    elif abs(green.half_side - float(S_HALF_SIDE)) > 1e-15:
        raise ValueError("shared Green field has wrong square size")
    x_offset = 0.0 if upper else 0.5
    # Green normal-derivative profiles are translation invariant, so the
    # canonical Green field serves both fundamental squares
    scale = choose_green_scale(field, green, fund)
    return HalfStripModel(
        orientation=orientation,
        n_max=n_max,
        p=p,
        field=field,
        green=green,
        decay_ratio=compute_decay_ratio(field),
        green_scale=scale,
        core_depth=compute_core_depth(scale, green),
        x_offset=x_offset,
    )


def build_glued(
    p: int = 9,
    n_max: int = 4,
    tol: float = 1e-9,
    method: str = "auto",
    corner_correction: bool = True,
    corner_passes: int = 2,
    max_cycles: int = 40,
) -> GluedPotential:
    """Build the glued potential: two half-strip solves sharing one Green
    solve of the canonical fundamental square."""
    green = green_square(p, tol=tol, center=1j, method=method, max_cycles=max_cycles)
    upper = build_half_strip(
        "upper", p, n_max, tol, method, corner_correction, corner_passes,
        green=green, max_cycles=max_cycles,
    )
    lower = build_half_strip(
        "lower", p, n_max, tol, method, corner_correction, corner_passes,
        green=green, max_cycles=max_cycles,
    )
    return GluedPotential(upper=upper, lower=lower)


def check_intermediate(
    glued_or_model,
    samples: np.ndarray,
    decay_ratio: Optional[float] = None,
) -> tuple[float, complex]:
    """Worst margin of (ratio * u(z/2) - u(z)) over upper-frame samples.

    ``samples``: complex points in the solved frame of one half-strip,
    outside all squares (the halving inequality lives on the perforated
    domain).  Returns (worst margin, witness point).
    """
    model = glued_or_model
    M = decay_ratio if decay_ratio is not None else model.decay_ratio
    u_z = model.evaluate_frame(samples.real, samples.imag)
    half = samples / 2.0
    u_half = model.evaluate_frame(half.real, half.imag)
    margins = M * u_half - u_z
    i = int(np.argmin(margins))
    return float(margins[i]), complex(samples[i])
