"""Corner-mode correction for the perforated-strip solves.

The solution vanishes on both edges meeting at each square corner, and the
domain turns 270 degrees there, so locally u = c r^(2/3) sin(2/3 (theta -
theta0)) + smoother terms.  On a uniform grid this caps plain finite
differences at O(h^(4/3)) globally, which is too slow for the one-percent
constants-stability gate.  The remedy: fit the leading corner coefficient
c of each coarse-level corner from the computed field, subtract
c * (cutoff * mode), re-solve the now-smooth remainder (the subtracted
part contributes an analytic source on the cutoff band and adjusts the
Dirichlet data wherever the band crosses a boundary), and carry the
singular parts exactly.

Each cutoff band sits inside the corner's clearance disk (the subtracted
function vanishes on every other boundary by itself; the data-absorption
step below is then a no-op kept for generality).  Evaluation interpolates
the reconstituted nodal totals, so its accuracy follows the true
solution's own curvature.  The level-0 top corners face the unit-datum
line across a gap of 1/30 and carry O(10) mode coefficients; pointwise
interpolation near them cannot meet a 10 h^2 budget at any spacing, which
is a property of the solution, not the scheme.  Those corners are tagged
``guarded`` and samplers keep a fixed standoff from them, mirroring the
corner-exclusion policy used for the derivative profiles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .geometry import Rect, S_HALF_SIDE, STRIP_HEIGHT
from .laplace import Field, build_strip_system, _run_solver, _ghost_fill, _DIRS, _SHIFT

__all__ = ["CornerMode", "CorrectedField", "corner_modes", "solve_strip_corrected"]

_SECTOR = 1.5 * math.pi  # opening angle of the domain at a square corner


@dataclass
class CornerMode:
    """One reentrant corner: position, sector start angle, cutoff radii."""

    qx: float
    qy: float
    theta0: float
    r1: float            # cutoff = 1 inside this radius
    r2: float            # cutoff = 0 outside this radius
    fit_hi: float        # outer fit radius (inside the clearance disk)
    guarded: bool = False  # faces the unit-datum line; samplers keep clear

    def offsets(self, x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        # period-1 wrapped horizontal offset
        dx = np.mod(x - self.qx + 0.5, 1.0) - 0.5
        return dx, y - self.qy

    def polar(self, x: np.ndarray, y: np.ndarray):
        dx, dy = self.offsets(x, y)
        r = np.hypot(dx, dy)
        dtheta = np.mod(np.arctan2(dy, dx) - self.theta0, 2.0 * math.pi)
        return r, dtheta

    def mode(self, r: np.ndarray, dtheta: np.ndarray, k: int = 1) -> np.ndarray:
        e = 2.0 * k / 3.0
        return r**e * np.sin(e * dtheta)


def _smoothstep(t: np.ndarray):
    t = np.clip(t, 0.0, 1.0)
    s = t**3 * (10.0 + t * (-15.0 + 6.0 * t))
    ds = 30.0 * t**2 * (t - 1.0) ** 2
    dds = 60.0 * t * (2.0 * t - 1.0) * (t - 1.0)
    return s, ds, dds


def _cutoff(cm: CornerMode, r: np.ndarray):
    """eta(r): 1 inside r1, 0 outside r2, C^2 in between; returns
    (eta, eta', eta'')."""
    width = cm.r2 - cm.r1
    t = (cm.r2 - r) / width
    s, ds, dds = _smoothstep(t)
    return s, -ds / width, dds / width**2


def corner_singular_part(
    corners: Sequence[CornerMode],
    coeffs: np.ndarray,
    x: np.ndarray,
    y: np.ndarray,
) -> np.ndarray:
    out = np.zeros(np.broadcast(x, y).shape)
    for cm, c in zip(corners, coeffs):
        if c == 0.0:
            continue
        r, dth = cm.polar(x, y)
        near = r < cm.r2
        if not np.any(near):
            continue
        eta, _, _ = _cutoff(cm, r[near])
        out[near] += c * eta * cm.mode(r[near], dth[near])
    return out


def corner_source(
    corners: Sequence[CornerMode],
    coeffs: np.ndarray,
    x: np.ndarray,
    y: np.ndarray,
) -> np.ndarray:
    """Laplacian of the subtracted singular parts (supported on annuli).

    With s harmonic and eta radial: Lap(eta s) = s (eta'' + eta'/r)
    + 2 eta' ds/dr, and ds/dr = (2/3) s / r for the leading mode.
    """
    out = np.zeros(np.broadcast(x, y).shape)
    for cm, c in zip(corners, coeffs):
        if c == 0.0:
            continue
        r, dth = cm.polar(x, y)
        band = (r > cm.r1) & (r < cm.r2)
        if not np.any(band):
            continue
        rb, db = r[band], dth[band]
        _, d1, d2 = _cutoff(cm, rb)
        s = cm.mode(rb, db)
        out[band] += c * s * (d2 + (1.0 + 4.0 / 3.0) * d1 / rb)
    return out


@dataclass
class CorrectedField:
    """Smooth remainder plus corner modes, evaluated from nodal totals.

    The correction improves the *solve* (the remainder is smooth, so its
    pollution is second order); evaluation interpolates ``baked``, the
    reconstituted nodal totals, whose accuracy tracks the true solution's
    own local curvature.  ``base`` (the remainder field) is kept for
    refitting and metadata.
    """

    base: Field
    baked: Field
    corners: list
    coeffs: np.ndarray

    @property
    def p(self) -> int:
        return self.base.p

    @property
    def h(self) -> float:
        return self.base.h

    @property
    def residual(self) -> float:
        return self.base.residual

    @property
    def problem(self) -> str:
        return self.base.problem

    @property
    def mask(self) -> np.ndarray:
        return self.base.mask

    @property
    def top(self):
        return self.base.top

    def node_x(self) -> np.ndarray:
        return self.base.node_x()

    def node_y(self) -> np.ndarray:
        return self.base.node_y()

    def evaluate_many(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return self.baked.evaluate_many(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    def evaluate(self, x: float, y: float) -> float:
        return float(self.evaluate_many(np.array([x]), np.array([y]))[0])


def _rect_corners(rect: Rect):
    x_lo, x_hi = (float(q) for q in rect.x_interval())
    y_lo, y_hi = (float(q) for q in rect.y_interval())
    # (x, y, theta0, is_top): theta0 is the angle of the first boundary ray
    # going counterclockwise around the 270-degree domain sector
    return [
        (x_hi, y_hi, -0.5 * math.pi, True),   # top-right
        (x_lo, y_hi, 0.0, True),              # top-left
        (x_hi, y_lo, math.pi, False),         # bottom-right
        (x_lo, y_lo, 0.5 * math.pi, False),   # bottom-left
    ]


def _point_rect_dist(x: float, y: float, rect: Rect) -> float:
    x_lo, x_hi = (float(q) for q in rect.x_interval())
    y_lo, y_hi = (float(q) for q in rect.y_interval())
    best = math.inf
    for shift in (-1.0, 0.0, 1.0):
        dx = max(x_lo - (x + shift), 0.0, (x + shift) - x_hi)
        dy = max(y_lo - y, 0.0, y - y_hi)
        best = min(best, math.hypot(dx, dy))
    return best


def corner_modes(
    correct_rects: Sequence[Rect],
    all_rects: Sequence[Rect],
    top: float = float(STRIP_HEIGHT),
) -> list[CornerMode]:
    """Corner modes for the rectangles to be corrected.

    The cutoff sits inside 3/4 of the clearance from the corner to the
    nearest other boundary (other rectangles, the real axis, the top
    line), so the subtracted mode vanishes on everything except its own
    rays.  Level-0 top corners are tagged ``guarded`` for the samplers.
    """
    out = []
    for rect in correct_rects:
        is_level0 = rect.half == S_HALF_SIDE
        for qx, qy, theta0, is_top in _rect_corners(rect):
            clear = min(qy, top - qy)
            for other in all_rects:
                if other == rect:
                    continue
                clear = min(clear, _point_rect_dist(qx, qy, other))
            fit_hi = 0.85 * 0.75 * clear
            r2 = 0.75 * clear
            # band as wide as the clearance allows: a thin band is itself
            # under-resolved and injects more error than it removes
            out.append(
                CornerMode(qx, qy, theta0, 0.25 * r2, r2, fit_hi, is_level0 and is_top)
            )
    return out


def fit_corner_coefficients(
    evaluate_many,
    corners: Sequence[CornerMode],
    h: float,
    n_modes: int = 4,
    n_radii: int = 6,
    n_angles: int = 24,
) -> np.ndarray:
    """Least-squares leading coefficient of each corner's singular mode.

    Samples the field on a polar annulus inside each corner's clearance
    disk (where the sector-mode expansion converges) and fits the first
    ``n_modes`` harmonic sector modes r^(2k/3) sin(2k/3 dtheta); the k=1
    coefficient is returned.
    """
    coeffs = np.zeros(len(corners))
    for idx, cm in enumerate(corners):
        r_lo = max(4.0 * h, 0.15 * cm.fit_hi)
        r_hi = cm.fit_hi
        if r_hi <= r_lo:
            continue
        radii = np.geomspace(r_lo, r_hi, n_radii)
        angs = np.linspace(0.06 * _SECTOR, 0.94 * _SECTOR, n_angles)
        R, A = np.meshgrid(radii, angs, indexing="ij")
        theta = cm.theta0 + A
        xs = cm.qx + (R * np.cos(theta)).ravel()
        ys = cm.qy + (R * np.sin(theta)).ravel()
        vals = np.asarray(evaluate_many(np.mod(xs, 1.0), ys), dtype=float)
        cols = [cm.mode(R.ravel(), A.ravel(), k) for k in range(1, n_modes + 1)]
        design = np.stack(cols, axis=1)
        # weight down the outermost samples a little: remote influences
        w = 1.0 / R.ravel() ** (2.0 / 3.0)
        sol, *_ = np.linalg.lstsq(design * w[:, None], vals * w, rcond=None)
        coeffs[idx] = sol[0]
    return coeffs


def _absorb_boundary_data(gs, corners, coeffs) -> None:
    """Subtract the corner modes from the Dirichlet data at every cut-arm
    crossing, so the remainder problem has consistent boundary values.

    Small-band modes vanish on all foreign boundaries by the clearance
    construction; wide-band modes genuinely adjust the data they cross.
    """
    h = gs.h
    nrows, ncols = gs.shape
    jj, ii = np.meshgrid(np.arange(nrows), np.arange(ncols), indexing="ij")
    xs = (gs.i0 + ii) * h
    ys = (gs.j0 + jj) * h
    for d in _DIRS:
        a = gs.alpha[d]
        cut = (a < 1.0) & (gs.mask == 0)
        if not np.any(cut):
            continue
        dj, di = _SHIFT[d]
        px = xs[cut] + di * a[cut] * h
        py = ys[cut] + dj * a[cut] * h
        gs.bval[d][cut] -= corner_singular_part(corners, coeffs, px, py)


def solve_strip_corrected(
    rects: Sequence[Rect],
    correct_rects: Sequence[Rect],
    p: int,
    tol: float = 1e-9,
    method: str = "auto",
    max_cycles: int = 40,
    passes: int = 2,
    label: str = "strip",
    fit_kwargs: Optional[dict] = None,
) -> CorrectedField:
    """Strip solve with corner-mode subtraction.

    Runs the plain solve, fits corner coefficients, then re-solves the
    smooth remainder with the analytic corner source on the right side
    and the modes subtracted from any Dirichlet data their bands cross;
    refits on the corrected evaluator ``passes`` times.
    """
    h = 0.5**p
    fit_kwargs = fit_kwargs or {}
    gs = build_strip_system(rects, p)
    pristine_bval = {d: gs.bval[d].copy() for d in _DIRS}
    plain = _run_solver(gs, tol, method, max_cycles, problem=label)
    corners = corner_modes(correct_rects, rects)
    if not corners:
        empty = np.zeros(0)
        return CorrectedField(base=plain, baked=plain, corners=[], coeffs=empty)

    coeffs = fit_corner_coefficients(plain.evaluate_many, corners, h, **fit_kwargs)
    ny, nx = gs.mask.shape
    X = np.arange(nx) * h
    Y = np.arange(ny) * h
    XX, YY = np.meshgrid(X, Y)
    corrected = None
    for it in range(passes):
        extra = h * h * corner_source(corners, coeffs, XX, YY)
        for d in _DIRS:
            gs.bval[d][...] = pristine_bval[d]
        _absorb_boundary_data(gs, corners, coeffs)
        base = _run_solver(gs, tol, method, max_cycles, problem=label, extra_rhs=extra)
        # reconstitute nodal totals and re-ghost with the original data
        w_nodes = corner_singular_part(corners, coeffs, XX, YY)
        total = np.where(np.asarray(gs.mask) == 0, base.values + w_nodes, base.values)
        for d in _DIRS:
            gs.bval[d][...] = pristine_bval[d]
        baked_values = _ghost_fill(gs, np.where(np.isnan(total), 0.0, total))
        baked = Field(
            p=base.p, i0=base.i0, j0=base.j0, periodic=base.periodic,
            values=baked_values, mask=base.mask, residual=base.residual,
            problem=base.problem, top=base.top, top_value=base.top_value,
        )
        corrected = CorrectedField(
            base=base, baked=baked, corners=list(corners), coeffs=coeffs.copy()
        )
        if it + 1 < passes:
            # refit the absolute coefficients on the more accurate field
            coeffs = fit_corner_coefficients(
                corrected.evaluate_many, corners, h, **fit_kwargs
            )
    return corrected
