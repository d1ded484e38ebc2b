"""Transport of the strip potential to the annulus 1 < |zeta| < 2.

The change of variable z = (4/(3 eps)) log zeta maps the sector
Q = {1 < |zeta| < 2, |arg zeta| < eps} onto the axis-aligned window
{0 < Re z < L, |Im z| < 4/3} of the strip, with L = (4/(3 eps)) log 2.
Circles |zeta| = r become vertical strip lines Re z = (4/(3 eps)) log r,
and d(theta) = (3 eps / 4) dy along them.

Outside the sector the function is extended with the harmonic sector mode
1 + a r^lam cos(lam (|theta| - pi)), lam = pi/(2 (pi - eps)): it equals 1
on the rays arg zeta = +-eps (where the inner chart is 1: the rays are the
images of the strip's top and bottom lines), is at least 1 in between,
and the amplitude a is chosen so the angular-derivative jump across the
rays is nonnegative, keeping the glued annulus function subharmonic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .geometry import STRIP_HEIGHT, covering_squares
from .assembler import GluedPotential
from .laplace import line_derivative_profile
from .verify import (
    CheckRecord,
    line_decay,
    _circle_means,
    sample_frame_interior,
    sample_square_boundaries,
)

__all__ = [
    "AnnulusPotential",
    "map_to_strip",
    "map_to_annulus",
    "choose_outer_amplitude",
    "build_annulus",
    "check_arc_mass_decay",
    "check_components",
    "check_annulus_submean",
]

_TOP = float(STRIP_HEIGHT)


def map_to_strip(zeta: np.ndarray, eps: float) -> np.ndarray:
    """z = (4/(3 eps)) log zeta, principal branch."""
    zeta = np.asarray(zeta, dtype=complex)
    if np.any(zeta == 0):
        raise ValueError("log undefined at zeta = 0")
    return (4.0 / (3.0 * eps)) * np.log(zeta)


def map_to_annulus(z: np.ndarray, eps: float) -> np.ndarray:
    return np.exp(np.asarray(z, dtype=complex) * (3.0 * eps / 4.0))


@dataclass
class AnnulusPotential:
    """Bounded subharmonic function on the closed annulus 1 <= |zeta| <= 2."""

    glued: GluedPotential
    eps: float
    outer_amplitude: float

    def __post_init__(self) -> None:
        if not (0.0 < self.eps < math.pi / 4):
            raise ValueError("sector half-angle must lie in (0, pi/4)")
        if self.window_length < 1.5:
            raise ValueError("strip window shorter than 1.5 periods")
        if not self.outer_amplitude > 0.0:
            raise ValueError("outer amplitude must be positive")

    @property
    def sector_exponent(self) -> float:
        return math.pi / (2.0 * (math.pi - self.eps))

    @property
    def window_length(self) -> float:
        return (4.0 / (3.0 * self.eps)) * math.log(2.0)

    @property
    def h(self) -> float:
        return self.glued.h

    def outer_value(self, r: np.ndarray, theta_abs: np.ndarray) -> np.ndarray:
        lam = self.sector_exponent
        return 1.0 + self.outer_amplitude * r**lam * np.cos(lam * (theta_abs - math.pi))

    def evaluate_many(self, zeta: np.ndarray) -> np.ndarray:
        zeta = np.asarray(zeta, dtype=complex)
        r = np.abs(zeta)
        if np.any((r < 1.0 - 1e-12) | (r > 2.0 + 1e-12)):
            raise ValueError("point outside the closed annulus")
        theta = np.angle(zeta)
        inner = np.abs(theta) <= self.eps
        out = np.empty(zeta.shape)
        if np.any(inner):
            z = map_to_strip(zeta[inner], self.eps)
            # the map sends |arg| <= eps into |Im z| <= 4/3 exactly up to
            # float rounding; clamp the last ulp
            zc = z.real + 1j * np.clip(z.imag, -_TOP, _TOP)
            out[inner] = self.glued.evaluate_many(zc)
        if np.any(~inner):
            out[~inner] = self.outer_value(r[~inner], np.abs(theta[~inner]))
        return out

    def evaluate(self, zeta: complex) -> float:
        return float(self.evaluate_many(np.array([zeta], dtype=complex))[0])

    def bounds(self, n_r: int = 60, n_theta: int = 720) -> tuple[float, float]:
        """(inf, sup) over a polar sample grid; sup also has the closed
        form 1 + a 2^lam attained at theta = pi, r = 2."""
        rs = np.linspace(1.0, 2.0, n_r)
        ts = np.linspace(-math.pi, math.pi, n_theta, endpoint=False)
        R, T = np.meshgrid(rs, ts)
        vals = self.evaluate_many(R * np.exp(1j * T))
        return float(vals.min()), float(vals.max())

    def analytic_sup(self) -> float:
        return 1.0 + self.outer_amplitude * 2.0**self.sector_exponent


def choose_outer_amplitude(glued: GluedPotential, eps: float) -> float:
    """Amplitude making the angular-derivative jump across the rays
    arg zeta = +-eps nonnegative.

    Inner chart: d(u o z)/d(theta) = (4/(3 eps)) du/dy on the top line
    (and symmetrically on the bottom).  Outer chart: dq/d(theta) at the
    ray is lam r^lam, minimized at r = 1.  Twice the ratio of the suprema
    keeps the jump positive with margin.
    """
    lam = math.pi / (2.0 * (math.pi - eps))
    sup_inner = 0.0
    for model in (glued.upper, glued.lower):
        xs, d = line_derivative_profile(model.field, _TOP, 1.0, from_below=True)
        sup_inner = max(sup_inner, float(np.max(np.abs(d))))
    sup_theta = (4.0 / (3.0 * eps)) * sup_inner
    return 2.0 * sup_theta / lam


def build_annulus(glued: GluedPotential, eps: float = 0.4) -> AnnulusPotential:
    return AnnulusPotential(
        glued=glued, eps=eps, outer_amplitude=choose_outer_amplitude(glued, eps)
    )


# ---------------------------------------------------------------------------
# annulus structure checks: negative components and per-level arc mass


def arc_integral_over_level(
    pot: AnnulusPotential, r: float, n: int, use_core: bool = False, step: Optional[float] = None
) -> float:
    """Integral of the potential over {theta: r e^(i theta) in E_n} d(theta).

    Independent theta-space quadrature: the exact chord intervals in y are
    transported by theta = (3 eps/4) y.
    """
    eps = pot.eps
    x0 = (4.0 / (3.0 * eps)) * math.log(r)
    h = pot.h
    step = h if step is None else step
    fams = ("K+", "K-") if use_core else ("S+", "S-")
    half = float(Fraction(2, 7) if use_core else Fraction(3, 10))
    total = 0.0
    for spec in covering_squares(Fraction(x0), n, fams):
        scale = 0.5**spec.level
        cy = scale if spec.family.endswith("+") else -scale
        y_lo, y_hi = cy - half * scale, cy + half * scale
        t_lo, t_hi = (3.0 * eps / 4.0) * y_lo, (3.0 * eps / 4.0) * y_hi
        m = int(math.ceil((y_hi - y_lo) / step))
        m += m % 2
        m = max(m, 8)
        ts = t_lo + (np.arange(m) + 0.5) * (t_hi - t_lo) / m
        vals = pot.evaluate_many(r * np.exp(1j * ts))
        total += float(vals.sum() * (t_hi - t_lo) / m)
    return total


def check_arc_mass_decay(
    pot: AnnulusPotential,
    c: float,
    radii: Sequence[float],
    n: int,
    slack: float = 0.1,
) -> CheckRecord:
    """Arc integrals over the level-n components stay below -delta_n with
    delta_n = (3 eps/4) c^-n (1 - slack).

    Checked as the scale-free ratio (-integral)/delta_n >= 1.  The level
    sets are indexed from n = 1: the decay base is calibrated so that
    a_n >= c^-n for n >= 1, while the n = 0 normalization c^0 = 1 would
    demand unit negative mass per line.
    """
    delta_n = (3.0 * pot.eps / 4.0) * c ** (-float(n)) * (1.0 - slack)
    worst = math.inf
    witness = None
    for r in radii:
        val = arc_integral_over_level(pot, float(r), n, use_core=False)
        ratio = -val / delta_n
        if ratio < worst:
            worst = float(ratio)
            witness = complex(r)
    return CheckRecord(
        name=f"annulus-arc-mass-{n}",
        quantifier=f"{len(radii)} radii in [1,2]: (-arc integral)/delta_{n} >= 1",
        margin=worst - 1.0,
        tolerance=0.0,
        witness=witness,
        note=f"delta_{n} = {delta_n:.6e}",
    )


def check_arc_strip_consistency(
    pot: AnnulusPotential, r: float, n: int
) -> CheckRecord:
    """Change-of-variables identity: arc integral equals (3 eps/4) times
    the strip line integral at x0 = (4/(3 eps)) log r."""
    arc = arc_integral_over_level(pot, r, n, use_core=False)
    x0 = (4.0 / (3.0 * pot.eps)) * math.log(r)
    outer, _ = line_decay(pot.glued, x0, n)
    expect = (3.0 * pot.eps / 4.0) * outer
    scale = max(abs(arc), abs(expect), 1e-300)
    rel = abs(arc - expect) / scale
    # the two sides are independent composite-midpoint quadratures of the
    # same integral, so they agree to quadrature accuracy, not exactly
    tol = max(1e-9, 50.0 * pot.h**2)
    return CheckRecord(
        name=f"annulus-arc-consistency-{n}",
        quantifier=f"r={r:.4f}: |arc - (3eps/4) strip| / scale",
        margin=-rel,
        tolerance=tol,
        note=f"arc={arc:.6e}, transported strip={expect:.6e}",
    )


def check_components(
    pot: AnnulusPotential,
    rng: np.random.Generator,
    n: int,
    count: int = 2000,
) -> CheckRecord:
    """Negative set structure at level n: transported squares are negative
    inside, the rest of the sector and the outer region are nonnegative,
    and square boundaries are zero up to the continuity tolerance."""
    glued = pot.glued
    eps = pot.eps
    L = pot.window_length
    h = pot.h
    worst = math.inf
    witness = None
    notes = []

    def to_annulus(z):
        return map_to_annulus(z, eps)

    # interiors of transported level-n squares meeting the window: w < 0
    pts = []
    for fam_off, sgn in ((0.0, 1.0), (0.5, -1.0)):
        scale = 0.5**n
        for k in range(int(math.ceil(L / scale)) + 1):
            cx = (k + fam_off) * scale
            if cx - 0.3 * scale > L:
                continue
            m = max(8, count // 64)
            dx = rng.uniform(-0.29, 0.29, m) * scale
            dy = rng.uniform(-0.29, 0.29, m) * scale
            zz = (cx + dx) + 1j * sgn * (scale + dy)
            keep = (zz.real > 0.0) & (zz.real < L)
            pts.append(zz[keep])
    pts = np.concatenate(pts)
    w = pot.evaluate_many(to_annulus(pts))
    i = int(np.argmax(w))
    if -w[i] < worst:
        worst, witness = float(-w[i]), to_annulus(pts[i : i + 1])[0]
    notes.append(f"square interiors max w {w[i]:.3e}")

    # sector points outside all squares: w >= 0 (the square pattern has
    # period 1, so integer shifts of clean frame samples stay clean)
    for model, sgn in ((glued.upper, 1.0), (glued.lower, -1.0)):
        base = sample_frame_interior(model, rng, count // 4)
        shift = rng.integers(0, int(math.ceil(L)), base.shape)
        xw = base.real + shift
        keep = xw < L
        zz = xw[keep] + 1j * sgn * base.imag[keep]
        w2 = pot.evaluate_many(to_annulus(zz))
        if float(np.min(w2)) < worst:
            worst = float(np.min(w2))
            witness = to_annulus(zz[int(np.argmin(w2)) : int(np.argmin(w2)) + 1])[0]
    outer_t = rng.uniform(eps * 1.01, math.pi, count // 4)
    outer_r = rng.uniform(1.0, 2.0, count // 4)
    souter = np.concatenate([outer_r * np.exp(1j * outer_t), outer_r * np.exp(-1j * outer_t)])
    wo = pot.evaluate_many(souter)
    notes.append(f"outer min w {wo.min():.6f}")
    if float(wo.min() - 1.0) < worst:
        worst = float(wo.min() - 1.0)
        witness = souter[int(np.argmin(wo))]

    # boundaries of transported squares: |w| <= 5h (shift into the window
    # by periodicity, keep points strictly inside it)
    for model, sgn in ((glued.upper, 1.0), (glued.lower, -1.0)):
        bb, _ = sample_square_boundaries(model, rng, count // 4)
        xw = np.mod(bb.real, 1.0) + rng.integers(0, max(1, int(math.ceil(L)) - 1), bb.shape)
        keep = (xw > 0.0) & (xw < L)
        zz = xw[keep] + 1j * sgn * bb.imag[keep]
        wb = pot.evaluate_many(to_annulus(zz))
        bmax = float(np.max(np.abs(wb)))
        if 5 * h - bmax < worst:
            worst = 5 * h - bmax
            witness = to_annulus(zz[int(np.argmax(np.abs(wb))) : int(np.argmax(np.abs(wb))) + 1])[0]
        notes.append(f"{model.orientation} boundary max |w| {bmax:.3e}")

    return CheckRecord(
        name=f"annulus-components-{n}",
        quantifier=f"level-{n} structure: negative inside squares, >=0 outside, ~0 on edges",
        margin=worst,
        tolerance=10 * h * h,
        witness=witness,
        note="; ".join(notes),
    )


def check_annulus_submean(
    pot: AnnulusPotential,
    rng: np.random.Generator,
    radii_cells: Sequence[int] = (2, 4, 8),
    count: int = 4000,
    datum_corner_guard: float = 0.08,
) -> CheckRecord:
    """Sub-mean margins on stratified annulus samples including the
    interface rays arg zeta = +-eps.

    Sector samples keep the same fixed standoff from the images of the
    guarded datum-facing corners as the strip samplers do (the map is
    conformal, so the standoff is applied in strip coordinates).
    """
    from .verify import guarded_corner_exclusions

    h = pot.h
    eps = pot.eps
    rmax = max(radii_cells) * h
    n_in = count // 2
    n_ray = count // 4
    n_out = count - n_in - n_ray

    guards = guarded_corner_exclusions(pot.glued.upper, datum_corner_guard) + \
        guarded_corner_exclusions(pot.glued.lower, datum_corner_guard)

    def keep_clear(r_arr, t_arr):
        z = map_to_strip(r_arr * np.exp(1j * t_arr), eps)
        ok = np.ones(r_arr.shape, dtype=bool)
        scale = 4.0 / (3.0 * eps)  # circle radius magnification, at most
        for ex, ey, er in guards:
            dx = np.mod(z.real - ex + 0.5, 1.0) - 0.5
            ok &= np.hypot(dx, np.abs(z.imag) - ey) > er + scale * rmax
        return ok

    r_in = rng.uniform(1.0 + rmax * 1.01, 2.0 - rmax * 1.01, n_in)
    t_in = rng.uniform(-eps * 0.98, eps * 0.98, n_in)
    sel = keep_clear(r_in, t_in)
    r_in, t_in = r_in[sel], t_in[sel]
    r_ray = rng.uniform(1.0 + rmax * 1.01, 2.0 - rmax * 1.01, n_ray)
    sgn = np.where(rng.uniform(size=n_ray) < 0.5, 1.0, -1.0)
    r_out = rng.uniform(1.0 + rmax * 1.01, 2.0 - rmax * 1.01, n_out)
    t_out = rng.uniform(eps * 1.5, math.pi, n_out) * np.where(rng.uniform(size=n_out) < 0.5, 1.0, -1.0)
    pts = np.concatenate(
        [
            r_in * np.exp(1j * t_in),
            r_ray * np.exp(1j * sgn * eps),
            r_out * np.exp(1j * t_out),
        ]
    )
    worst = math.inf
    witness = None
    centers = pot.evaluate_many(pts)
    for rc in radii_cells:
        means = _circle_means(pot.evaluate_many, pts, rc * h)
        margins = means - centers
        i = int(np.argmin(margins))
        if margins[i] < worst:
            worst = float(margins[i])
            witness = complex(pts[i])
    return CheckRecord(
        name="annulus-submean",
        quantifier=f"{len(pts)} annulus points (sector, rays, outer) x radii {tuple(radii_cells)}h",
        margin=worst,
        tolerance=10 * h * h,
        witness=witness,
    )
