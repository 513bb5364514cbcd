"""Finite nonnegative measures on the closed unit disk and on planar squares.

A measure is a combination of three ingredients:

* point atoms (complex position + nonnegative mass),
* lattice densities: polar or cartesian cells, each carrying its mass at
  uniform planar density (a full ring is a polar cell spanning all angles),
* curve profiles: one-dimensional measures ``dM(r)`` placed at ``r*exp(i*theta(r))``.

Instances are immutable; every query is pure, so callers may fan out over
regions or sample batches freely.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi

# Construction-time consistency check on cached totals.
MASS_RTOL = 1e-12


class MeasureError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Regions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClosedDisk:
    center: complex
    radius: float

    def __post_init__(self):
        if self.radius < 0:
            raise MeasureError("disk radius must be >= 0")

    def contains(self, z):
        z = np.asarray(z, dtype=complex)
        return np.abs(z - self.center) <= self.radius * (1 + 1e-15) + 1e-300


@dataclass(frozen=True)
class Annulus:
    r_lo: float
    r_hi: float

    def __post_init__(self):
        if not (0 <= self.r_lo <= self.r_hi):
            raise MeasureError("annulus bounds must satisfy 0 <= r_lo <= r_hi")

    def contains(self, z):
        r = np.abs(np.asarray(z, dtype=complex))
        return (r >= self.r_lo * (1 - 1e-15)) & (r <= self.r_hi * (1 + 1e-15))


def _angle_in(theta, th_lo, th_hi):
    """Membership of angles in the closed arc [th_lo, th_hi] taken mod 2*pi."""
    span = th_hi - th_lo
    off = np.mod(np.asarray(theta) - th_lo, TWO_PI)
    eps = 1e-12
    return (off <= span + eps) | (off >= TWO_PI - eps)


@dataclass(frozen=True)
class Sector:
    r_lo: float
    r_hi: float
    th_lo: float
    th_hi: float

    def __post_init__(self):
        if not (0 <= self.r_lo <= self.r_hi):
            raise MeasureError("sector radii out of order")
        if not (0 <= self.th_hi - self.th_lo <= TWO_PI):
            raise MeasureError("sector angular span must lie in [0, 2*pi]")

    def contains(self, z):
        z = np.asarray(z, dtype=complex)
        r = np.abs(z)
        ok = (r >= self.r_lo * (1 - 1e-15)) & (r <= self.r_hi * (1 + 1e-15))
        return ok & _angle_in(np.angle(z), self.th_lo, self.th_hi)


@dataclass(frozen=True)
class Rectangle:
    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float

    def __post_init__(self):
        if self.x_lo > self.x_hi or self.y_lo > self.y_hi:
            raise MeasureError("rectangle bounds out of order")

    def contains(self, z):
        z = np.asarray(z, dtype=complex)
        eps_x = 1e-15 * (1 + abs(self.x_lo) + abs(self.x_hi))
        eps_y = 1e-15 * (1 + abs(self.y_lo) + abs(self.y_hi))
        return (
            (z.real >= self.x_lo - eps_x)
            & (z.real <= self.x_hi + eps_x)
            & (z.imag >= self.y_lo - eps_y)
            & (z.imag <= self.y_hi + eps_y)
        )


Region = ClosedDisk | Annulus | Sector | Rectangle


# ---------------------------------------------------------------------------
# Lattice cells
# ---------------------------------------------------------------------------

_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights on [0, 1]."""
    if n not in _GL_CACHE:
        x, w = np.polynomial.legendre.leggauss(n)
        _GL_CACHE[n] = (0.5 * (x + 1.0), 0.5 * w)
    return _GL_CACHE[n]


@dataclass(frozen=True)
class PlanarCell:
    """One lattice cell with uniform planar density.

    kind 'polar': bounds are (r_lo, r_hi, th_lo, th_hi); a cell whose angular
    span is the full circle behaves as a ring and admits exact angular means.
    kind 'cart': bounds are (x_lo, x_hi, y_lo, y_hi).
    """

    kind: str
    a_lo: float
    a_hi: float
    b_lo: float
    b_hi: float
    mass: float

    def __post_init__(self):
        if self.kind not in ("polar", "cart"):
            raise MeasureError(f"unknown cell kind {self.kind!r}")
        if self.mass < 0:
            raise MeasureError("cell mass must be nonnegative")
        if self.a_lo > self.a_hi or self.b_lo > self.b_hi:
            raise MeasureError("cell bounds out of order")

    # -- geometry ----------------------------------------------------------

    @property
    def is_ring(self) -> bool:
        return self.kind == "polar" and (self.b_hi - self.b_lo) >= TWO_PI * (1 - 1e-12)

    def area(self) -> float:
        if self.kind == "cart":
            return (self.a_hi - self.a_lo) * (self.b_hi - self.b_lo)
        return 0.5 * (self.b_hi - self.b_lo) * (self.a_hi**2 - self.a_lo**2)

    def centroid(self) -> complex:
        if self.kind == "cart":
            return complex(0.5 * (self.a_lo + self.a_hi), 0.5 * (self.b_lo + self.b_hi))
        if self.is_ring:
            return 0j
        dth = self.b_hi - self.b_lo
        num = (self.a_hi**3 - self.a_lo**3) / 3.0
        ang = (np.exp(1j * self.b_hi) - np.exp(1j * self.b_lo)) / 1j
        ar = self.area()
        if ar <= 0:
            r_mid = 0.5 * (self.a_lo + self.a_hi)
            th_mid = 0.5 * (self.b_lo + self.b_hi)
            return r_mid * np.exp(1j * th_mid)
        return complex(num * ang / ar)

    def diameter(self) -> float:
        if self.kind == "cart":
            return math.hypot(self.a_hi - self.a_lo, self.b_hi - self.b_lo)
        dth = min(self.b_hi - self.b_lo, math.pi)
        chord = 2.0 * self.a_hi * math.sin(0.5 * dth)
        if self.b_hi - self.b_lo > math.pi:
            return 2.0 * self.a_hi
        return math.hypot(self.a_hi - self.a_lo, chord) + 1e-300

    def corners(self) -> np.ndarray:
        if self.kind == "cart":
            return np.array(
                [
                    complex(self.a_lo, self.b_lo),
                    complex(self.a_hi, self.b_lo),
                    complex(self.a_lo, self.b_hi),
                    complex(self.a_hi, self.b_hi),
                ]
            )
        ths = [self.b_lo, self.b_hi, 0.5 * (self.b_lo + self.b_hi)]
        pts = [r * np.exp(1j * t) for r in (self.a_lo, self.a_hi) for t in ths]
        return np.array(pts)

    def distance_lower_bound(self, z: np.ndarray) -> np.ndarray:
        """Lower bound on dist(z, cell), vectorized; 0 for points inside."""
        z = np.asarray(z, dtype=complex)
        if self.kind == "cart":
            dx = np.maximum(np.maximum(self.a_lo - z.real, z.real - self.a_hi), 0.0)
            dy = np.maximum(np.maximum(self.b_lo - z.imag, z.imag - self.b_hi), 0.0)
            return np.hypot(dx, dy)
        r = np.abs(z)
        dr = np.maximum(np.maximum(self.a_lo - r, r - self.a_hi), 0.0)
        if self.is_ring:
            return dr
        inside_ang = _angle_in(np.angle(z), self.b_lo, self.b_hi)
        span = self.b_hi - self.b_lo
        off = np.mod(np.angle(z) - self.b_lo, TWO_PI)
        dth = np.where(inside_ang, 0.0, np.minimum(np.abs(off - span), np.abs(TWO_PI - off)))
        # chordal bound at the nearest radius
        r_near = np.clip(r, self.a_lo, self.a_hi)
        chord = 2.0 * np.minimum(r, r_near) * np.sin(np.minimum(dth, math.pi) / 2.0)
        return np.hypot(dr, chord) * 0.99  # keep it a valid lower bound

    # -- mass splitting ----------------------------------------------------

    def cut_fraction(self, axis: int, c: float) -> float:
        """Mass fraction of the cell on the low side of coordinate ``c``.

        Axes are the cell's native coordinates (cart: x/y, polar: r/theta).
        Uniform planar density makes the radial marginal quadratic in r and
        every other marginal linear.
        """
        lo, hi = (self.a_lo, self.a_hi) if axis == 0 else (self.b_lo, self.b_hi)
        if c <= lo:
            return 0.0
        if c >= hi:
            return 1.0
        if self.kind == "polar" and axis == 0:
            return (c * c - lo * lo) / (hi * hi - lo * lo)
        return (c - lo) / (hi - lo)

    def split(self, axis: int, c: float) -> tuple["PlanarCell", "PlanarCell"]:
        f = self.cut_fraction(axis, c)
        lo, hi = (self.a_lo, self.a_hi) if axis == 0 else (self.b_lo, self.b_hi)
        c = min(max(c, lo), hi)
        m_lo = self.mass * f
        m_hi = self.mass - m_lo
        if axis == 0:
            return (
                replace(self, a_hi=c, mass=m_lo),
                replace(self, a_lo=c, mass=m_hi),
            )
        return (
            replace(self, b_hi=c, mass=m_lo),
            replace(self, b_lo=c, mass=m_hi),
        )

    def subdivide(self) -> list["PlanarCell"]:
        """2x2 split at the geometric midpoint (radial split at equal-area radius)."""
        if self.kind == "polar":
            mid_a = math.sqrt(0.5 * (self.a_lo**2 + self.a_hi**2))
        else:
            mid_a = 0.5 * (self.a_lo + self.a_hi)
        mid_b = 0.5 * (self.b_lo + self.b_hi)
        out = []
        for part_a in self.split(0, mid_a):
            if part_a.a_hi - part_a.a_lo <= 0 and self.a_hi > self.a_lo:
                continue
            for part in part_a.split(1, mid_b):
                if part.mass > 0 or part.area() > 0:
                    out.append(part)
        return out if out else [self]

    # -- quadrature --------------------------------------------------------

    def quad_nodes(self, n: int = 4) -> tuple[np.ndarray, np.ndarray]:
        """Product Gauss-Legendre nodes (complex positions) and mass weights."""
        x, w = gauss_legendre(n)
        if self.kind == "cart":
            xs = self.a_lo + (self.a_hi - self.a_lo) * x
            ys = self.b_lo + (self.b_hi - self.b_lo) * x
            Z = xs[:, None] + 1j * ys[None, :]
            W = np.outer(w, w) * self.mass
            return Z.ravel(), W.ravel()
        rs = self.a_lo + (self.a_hi - self.a_lo) * x
        ths = self.b_lo + (self.b_hi - self.b_lo) * x
        Z = rs[:, None] * np.exp(1j * ths[None, :])
        # planar-uniform density: weight proportional to r dr dtheta
        wr = w * rs * (self.a_hi - self.a_lo)
        denom = 0.5 * (self.a_hi**2 - self.a_lo**2)
        if denom <= 0:
            wr = w
            denom = 1.0
        W = np.outer(wr / denom, w) * self.mass
        return Z.ravel(), W.ravel()

    def moment(self, k: int, center: complex, rtol: float = 1e-10, depth: int = 0) -> complex:
        """Adaptive integral of (zeta - center)^k over the cell."""
        if self.mass == 0:
            return 0j
        z, w = self.quad_nodes(4)
        coarse = np.sum(w * (z - center) ** k)
        fine = 0j
        children = self.subdivide()
        if len(children) == 1 and depth > 0:
            return coarse
        for ch in children:
            zc, wc = ch.quad_nodes(4)
            fine += np.sum(wc * (zc - center) ** k)
        scale = self.mass * max(self.diameter(), abs(center) + 1.0) ** k
        if abs(fine - coarse) <= rtol * max(abs(fine), 1e-3 * scale) or depth >= 24:
            return fine
        return sum(ch.moment(k, center, rtol, depth + 1) for ch in children)

    # -- region interaction -------------------------------------------------

    def region_parts(self, region: Region) -> list["PlanarCell"]:
        """Sub-cells representing the part of this cell inside ``region``.

        Aligned pairs (polar cell against annulus/sector/centered disk, cart
        cell against rectangle) intersect exactly. Otherwise the boundary is
        resolved by subdivision to ~2^-9 of the cell size and the piece masses
        are rescaled so the total matches the exact overlap mass.
        """
        if self.mass == 0:
            return []
        exact = _intersect_exact(self, region)
        if exact is not None:
            return [c for c in exact if c.mass > 0]
        target = overlap_mass(self, region)
        if target <= 0:
            return []
        if target >= self.mass * (1 - 1e-13):
            return [self]
        inside: list[PlanarCell] = []
        straddle = [self]
        for _ in range(9):
            nxt: list[PlanarCell] = []
            for c in straddle:
                for ch in c.subdivide():
                    v = _quick_verdict(ch, region)
                    if v == 1:
                        inside.append(ch)
                    elif v == 0:
                        nxt.append(ch)
            straddle = nxt
            if not straddle:
                break
        kept = [c for c in straddle if bool(region.contains(np.array([c.centroid()]))[0])]
        got = sum(c.mass for c in inside) + sum(c.mass for c in kept)
        parts = inside + kept
        if not parts:
            parts = [min(straddle, key=lambda c: c.mass)] if straddle else [self]
            got = sum(c.mass for c in parts)
        scale = target / got if got > 0 else 0.0
        return [replace(c, mass=c.mass * scale) for c in parts if c.mass * scale > 0]


def _quick_verdict(cell: PlanarCell, region: Region) -> int:
    """1 fully inside, -1 fully outside, 0 undecided (conservative)."""
    r_lo_c, r_hi_c = cell_radial_range(cell)
    if isinstance(region, ClosedDisk):
        d = abs(region.center)
        if d == 0:
            if r_hi_c <= region.radius * (1 + 1e-15):
                return 1
            if r_lo_c > region.radius * (1 + 1e-15):
                return -1
            return 0
        far = abs(cell.centroid() - region.center) - 0.5 * cell.diameter() * 1.01
        near = abs(cell.centroid() - region.center) + 0.5 * cell.diameter() * 1.01
        if near <= region.radius:
            return 1
        if far > region.radius:
            return -1
        return 0
    if isinstance(region, Annulus):
        if r_lo_c >= region.r_lo * (1 - 1e-15) and r_hi_c <= region.r_hi * (1 + 1e-15):
            return 1
        if r_hi_c < region.r_lo * (1 - 1e-15) or r_lo_c > region.r_hi * (1 + 1e-15):
            return -1
        return 0
    if isinstance(region, Rectangle):
        if cell.kind == "cart":
            if (
                cell.a_lo >= region.x_lo
                and cell.a_hi <= region.x_hi
                and cell.b_lo >= region.y_lo
                and cell.b_hi <= region.y_hi
            ):
                return 1
            if (
                cell.a_hi < region.x_lo
                or cell.a_lo > region.x_hi
                or cell.b_hi < region.y_lo
                or cell.b_lo > region.y_hi
            ):
                return -1
            return 0
        corners = cell.corners()
        if bool(np.all(region.contains(corners))) and r_hi_c <= min(
            abs(region.x_lo), abs(region.x_hi), abs(region.y_lo), abs(region.y_hi)
        ) + max(
            region.x_hi - region.x_lo, region.y_hi - region.y_lo
        ):
            # conservative: only trust full-inclusion when the whole bounding
            # circle of the cell fits in the rectangle
            cx = 0.5 * (region.x_lo + region.x_hi)
            cy = 0.5 * (region.y_lo + region.y_hi)
            half = 0.5 * min(region.x_hi - region.x_lo, region.y_hi - region.y_lo)
            if abs(cell.centroid() - complex(cx, cy)) + 0.51 * cell.diameter() <= half:
                return 1
        return 0
    if isinstance(region, Sector):
        if r_hi_c < region.r_lo * (1 - 1e-15) or r_lo_c > region.r_hi * (1 + 1e-15):
            return -1
        if cell.kind == "polar" and not cell.is_ring:
            radial_in = r_lo_c >= region.r_lo * (1 - 1e-15) and r_hi_c <= region.r_hi * (1 + 1e-15)
            arcs = _arc_intersect(cell.b_lo, cell.b_hi, region.th_lo, region.th_hi)
            covered = sum(b - a for a, b in arcs)
            if radial_in and covered >= (cell.b_hi - cell.b_lo) * (1 - 1e-12):
                return 1
            if covered <= 0:
                return -1
        return 0
    return 0


def cell_radial_range(cell: PlanarCell) -> tuple[float, float]:
    if cell.kind == "polar":
        return cell.a_lo, cell.a_hi
    xs = (cell.a_lo, cell.a_hi)
    ys = (cell.b_lo, cell.b_hi)
    r_hi = max(math.hypot(x, y) for x in xs for y in ys)
    if cell.a_lo <= 0 <= cell.a_hi and cell.b_lo <= 0 <= cell.b_hi:
        r_lo = 0.0
    else:
        dx = max(cell.a_lo, -cell.a_hi, 0.0)
        dy = max(cell.b_lo, -cell.b_hi, 0.0)
        r_lo = math.hypot(dx, dy)
    return r_lo, r_hi


# ---------------------------------------------------------------------------
# Cell/region overlap: exact aligned arithmetic + 1-D quadrature fallback
# ---------------------------------------------------------------------------


def _arc_intersect(c_lo: float, c_hi: float, s_lo: float, s_hi: float) -> list[tuple[float, float]]:
    """Intersection of the arc [c_lo, c_hi] with [s_lo, s_hi] mod 2*pi.

    Returned intervals live in the cell's own coordinate [c_lo, c_hi].
    """
    v = c_hi - c_lo
    w = s_hi - s_lo
    if v <= 0 or w <= 0:
        return []
    if v >= TWO_PI * (1 - 1e-12):
        # full ring: answer is the sector arc itself, anchored near c_lo
        d = math.fmod(s_lo - c_lo, TWO_PI)
        if d < 0:
            d += TWO_PI
        out = [(c_lo + d, c_lo + d + min(w, TWO_PI))]
        fixed = []
        for a, b in out:
            if b <= c_hi:
                fixed.append((a, b))
            else:
                fixed.append((a, c_hi))
                fixed.append((c_lo, c_lo + (b - c_hi)))
        return [(a, b) for a, b in fixed if b > a]
    d = math.fmod(c_lo - s_lo, TWO_PI)
    if d < 0:
        d += TWO_PI
    # cell arc seen from the sector start: [d, d+v]
    pieces = []
    a, b = d, d + v
    lo, hi = max(a, 0.0), min(b, w)
    if hi > lo:
        pieces.append((lo - d, hi - d))
    if b > TWO_PI:
        lo2, hi2 = 0.0, min(b - TWO_PI, w)
        if hi2 > lo2:
            pieces.append((lo2 + TWO_PI - d, hi2 + TWO_PI - d))
    return [(c_lo + p, c_lo + q) for p, q in pieces if q > p]


def _intersect_exact(cell: PlanarCell, region: Region) -> list[PlanarCell] | None:
    """Exact cell/region intersection for aligned pairs, else None."""
    if cell.kind == "polar":
        if isinstance(region, ClosedDisk) and region.center == 0:
            region = Annulus(0.0, region.radius)
        if isinstance(region, Annulus):
            lo = max(cell.a_lo, region.r_lo)
            hi = min(cell.a_hi, region.r_hi)
            if hi <= lo:
                return []
            frac = cell.cut_fraction(0, hi) - cell.cut_fraction(0, lo)
            return [replace(cell, a_lo=lo, a_hi=hi, mass=cell.mass * frac)]
        if isinstance(region, Sector):
            lo = max(cell.a_lo, region.r_lo)
            hi = min(cell.a_hi, region.r_hi)
            if hi <= lo:
                return []
            rfrac = cell.cut_fraction(0, hi) - cell.cut_fraction(0, lo)
            span = cell.b_hi - cell.b_lo
            out = []
            for t_lo, t_hi in _arc_intersect(cell.b_lo, cell.b_hi, region.th_lo, region.th_hi):
                afrac = (t_hi - t_lo) / span
                out.append(
                    PlanarCell("polar", lo, hi, t_lo, t_hi, cell.mass * rfrac * afrac)
                )
            return out
        return None
    if isinstance(region, Rectangle):
        x_lo = max(cell.a_lo, region.x_lo)
        x_hi = min(cell.a_hi, region.x_hi)
        y_lo = max(cell.b_lo, region.y_lo)
        y_hi = min(cell.b_hi, region.y_hi)
        if x_hi <= x_lo or y_hi <= y_lo:
            return []
        frac = ((x_hi - x_lo) * (y_hi - y_lo)) / cell.area()
        return [PlanarCell("cart", x_lo, x_hi, y_lo, y_hi, cell.mass * frac)]
    return None


def _ray_box(theta: float, x_lo: float, x_hi: float, y_lo: float, y_hi: float) -> tuple[float, float]:
    """Radial interval where the ray at angle theta meets the box (slab method)."""
    c, s = math.cos(theta), math.sin(theta)
    lo, hi = 0.0, math.inf
    for d, w_lo, w_hi in ((c, x_lo, x_hi), (s, y_lo, y_hi)):
        if abs(d) < 1e-300:
            if w_lo > 0 or w_hi < 0:
                return (0.0, 0.0)
        else:
            t1, t2 = w_lo / d, w_hi / d
            if t1 > t2:
                t1, t2 = t2, t1
            lo, hi = max(lo, t1), min(hi, t2)
    return (lo, max(hi, lo))


def _ray_circle(theta: float, center: complex, radius: float) -> tuple[float, float]:
    """Radial interval where the ray at angle theta meets the closed disk."""
    b = center.real * math.cos(theta) + center.imag * math.sin(theta)
    disc = b * b - (abs(center) ** 2 - radius**2)
    if disc < 0:
        return (0.0, 0.0)
    root = math.sqrt(disc)
    lo, hi = b - root, b + root
    return (max(lo, 0.0), max(hi, 0.0))


def _adaptive_simpson(f, a: float, b: float, tol: float, depth: int = 24) -> float:
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) * (fa + 4 * fm + fb) / 6.0

    def rec(a, b, fa, fm, fb, whole, d):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = (m - a) * (fa + 4 * flm + fm) / 6.0
        right = (b - m) * (fm + 4 * frm + fb) / 6.0
        if d <= 0 or abs(left + right - whole) <= 15 * tol:
            return left + right + (left + right - whole) / 15.0
        return rec(a, m, fa, flm, fm, left, d - 1) + rec(m, b, fm, frm, fb, right, d - 1)

    return rec(a, b, fa, fm, fb, whole, depth)


def _radial_interval_for_region(theta: float, region: Region) -> tuple[float, float]:
    if isinstance(region, ClosedDisk):
        if region.center == 0:
            return (0.0, region.radius)
        return _ray_circle(theta, region.center, region.radius)
    if isinstance(region, Annulus):
        return (region.r_lo, region.r_hi)
    if isinstance(region, Sector):
        return (region.r_lo, region.r_hi)
    if isinstance(region, Rectangle):
        return _ray_box(theta, region.x_lo, region.x_hi, region.y_lo, region.y_hi)
    raise MeasureError(f"unsupported region {region!r}")


def overlap_mass(cell: PlanarCell, region: Region, rtol: float = 1e-12) -> float:
    """Mass of cell inside the closed region (exact where aligned)."""
    exact = _intersect_exact(cell, region)
    if exact is not None:
        return float(sum(c.mass for c in exact))
    if cell.mass == 0:
        return 0.0
    v = _quick_verdict(cell, region)
    if v == 1:
        return cell.mass
    if v == -1:
        return 0.0
    density = cell.mass / max(cell.area(), 1e-300)

    if cell.kind == "cart" and isinstance(region, ClosedDisk):
        cx, cy, t = region.center.real, region.center.imag, region.radius

        def chord(x):
            dx2 = t * t - (x - cx) ** 2
            if dx2 <= 0:
                return 0.0
            h = math.sqrt(dx2)
            return max(min(cy + h, cell.b_hi) - max(cy - h, cell.b_lo), 0.0)

        area = _adaptive_simpson(chord, cell.a_lo, cell.a_hi, rtol * cell.area() + 1e-300)
        return float(np.clip(area * density, 0.0, cell.mass))

    # polar-coordinate sweep: integrate (r_hi^2 - r_lo^2)/2 over angles
    if cell.kind == "cart":
        box = (cell.a_lo, cell.a_hi, cell.b_lo, cell.b_hi)
        th_windows = [(-math.pi, math.pi)]
    else:
        box = None
        th_windows = [(cell.b_lo, cell.b_hi)]
    if isinstance(region, Sector):
        clipped = []
        for w_lo, w_hi in th_windows:
            clipped.extend(_arc_intersect(w_lo, w_hi, region.th_lo, region.th_hi))
        th_windows = clipped

    def integrand(theta):
        r1, r2 = _radial_interval_for_region(theta, region)
        if box is not None:
            b1, b2 = _ray_box(theta, *box)
            r1, r2 = max(r1, b1), min(r2, b2)
        else:
            r1, r2 = max(r1, cell.a_lo), min(r2, cell.a_hi)
        if r2 <= r1:
            return 0.0
        return 0.5 * (r2 * r2 - r1 * r1)

    area = 0.0
    for w_lo, w_hi in th_windows:
        if w_hi > w_lo:
            area += _adaptive_simpson(integrand, w_lo, w_hi, rtol * cell.area() / max(len(th_windows), 1) + 1e-300)
    return float(np.clip(area * density, 0.0, cell.mass))


# ---------------------------------------------------------------------------
# Curve profiles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CurveProfile:
    """1-D measure dM(r) supported on the curve r -> r*exp(i*theta(r)).

    ``cumulative`` must be nondecreasing with cumulative(r_lo) == 0;
    ``density`` is its derivative. ``theta_lip`` bounds |theta'(r)|.
    """

    r_lo: float
    r_hi: float
    cumulative: Callable[[np.ndarray], np.ndarray]
    density: Callable[[np.ndarray], np.ndarray]
    theta: Callable[[np.ndarray], np.ndarray]
    theta_lip: float
    label: str = "curve"

    def mass_between(self, a: float, b: float) -> float:
        a = max(a, self.r_lo)
        b = min(b, self.r_hi)
        if b <= a:
            return 0.0
        return float(self.cumulative(b) - self.cumulative(a))

    @property
    def total(self) -> float:
        return self.mass_between(self.r_lo, self.r_hi)

    def point(self, r):
        r = np.asarray(r, dtype=float)
        return r * np.exp(1j * np.asarray(self.theta(r)))

    def quad_nodes(self, a: float, b: float, n: int = 16) -> tuple[np.ndarray, np.ndarray]:
        a = max(a, self.r_lo)
        b = min(b, self.r_hi)
        if b <= a:
            return np.empty(0, dtype=complex), np.empty(0)
        x, w = gauss_legendre(n)
        rs = a + (b - a) * x
        wts = w * (b - a) * np.asarray(self.density(rs), dtype=float)
        return self.point(rs), wts

    def region_intervals(self, region: Region, samples: int = 4096) -> list[tuple[float, float]]:
        """Maximal r-intervals whose curve points lie in the (closed) region."""
        rs = np.linspace(self.r_lo, self.r_hi, samples)
        inside = np.asarray(region.contains(self.point(rs)), dtype=bool)
        if not inside.any():
            return []
        out = []
        i = 0
        while i < samples:
            if inside[i]:
                j = i
                while j + 1 < samples and inside[j + 1]:
                    j += 1
                a = rs[i] if i == 0 else _bisect_flip(self, region, rs[i - 1], rs[i])
                b = rs[j] if j == samples - 1 else _bisect_flip(self, region, rs[j + 1], rs[j])
                out.append((min(a, b), max(a, b)))
                i = j + 1
            else:
                i += 1
        return out


def _bisect_flip(curve: CurveProfile, region: Region, r_out: float, r_in: float) -> float:
    for _ in range(60):
        mid = 0.5 * (r_out + r_in)
        if bool(region.contains(np.array([curve.point(mid)]))[0]):
            r_in = mid
        else:
            r_out = mid
    return r_in


def power_curve(
    delta: float,
    sigma: float,
    r_lo: float,
    r_hi: float,
    theta0: float = 0.0,
    slope: float = 0.0,
    label: str = "curve_power",
) -> CurveProfile:
    """Curve with cumulative mass delta/(1-r)^sigma, measured from r_lo."""
    off = delta / (1.0 - r_lo) ** sigma

    def cum(r):
        return delta / (1.0 - np.asarray(r, dtype=float)) ** sigma - off

    def dens(r):
        r = np.asarray(r, dtype=float)
        return delta * sigma / (1.0 - r) ** (sigma + 1.0)

    def theta(r):
        return theta0 + slope * (np.asarray(r, dtype=float) - r_lo)

    return CurveProfile(r_lo, r_hi, cum, dens, theta, abs(slope), label)


def linear_curve(rate: float, r_lo: float, r_hi: float, theta0: float = 0.0) -> CurveProfile:
    """Uniform line density ``rate`` along a ray at constant angle."""

    def cum(r):
        return rate * (np.asarray(r, dtype=float) - r_lo)

    def dens(r):
        return np.full_like(np.asarray(r, dtype=float), rate)

    def theta(r):
        return np.full_like(np.asarray(r, dtype=float), theta0)

    return CurveProfile(r_lo, r_hi, cum, dens, theta, 0.0, "curve_linear")


# ---------------------------------------------------------------------------
# DiskMeasure
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiskMeasure:
    """Composite finite nonnegative measure (atoms + lattice cells + curves)."""

    atoms_z: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=complex))
    atoms_mass: np.ndarray = field(default_factory=lambda: np.empty(0))
    cells: tuple[PlanarCell, ...] = ()
    curves: tuple[CurveProfile, ...] = ()

    def __post_init__(self):
        az = np.atleast_1d(np.asarray(self.atoms_z, dtype=complex))
        am = np.atleast_1d(np.asarray(self.atoms_mass, dtype=float))
        if az.shape != am.shape:
            raise MeasureError("atom positions and masses must align")
        if np.any(am < 0):
            raise MeasureError("atom masses must be nonnegative")
        object.__setattr__(self, "atoms_z", az)
        object.__setattr__(self, "atoms_mass", am)

    # -- constructors --------------------------------------------------------

    @staticmethod
    def from_atoms(points: Sequence[complex], masses: Sequence[float]) -> "DiskMeasure":
        return DiskMeasure(np.asarray(points, dtype=complex), np.asarray(masses, dtype=float))

    @staticmethod
    def from_cells(cells: Sequence[PlanarCell]) -> "DiskMeasure":
        return DiskMeasure(cells=tuple(c for c in cells if c.mass > 0))

    @staticmethod
    def from_curve(curve: CurveProfile) -> "DiskMeasure":
        return DiskMeasure(curves=(curve,))

    @staticmethod
    def combine(*parts: "DiskMeasure") -> "DiskMeasure":
        return DiskMeasure(
            np.concatenate([p.atoms_z for p in parts]) if parts else np.empty(0, complex),
            np.concatenate([p.atoms_mass for p in parts]) if parts else np.empty(0),
            tuple(c for p in parts for c in p.cells),
            tuple(c for p in parts for c in p.curves),
        )

    @staticmethod
    def zero() -> "DiskMeasure":
        return DiskMeasure()

    # -- totals ----------------------------------------------------------------

    @property
    def total_mass(self) -> float:
        return float(
            self.atoms_mass.sum()
            + sum(c.mass for c in self.cells)
            + sum(c.total for c in self.curves)
        )

    def support_radius(self) -> float:
        r = 0.0
        if self.atoms_z.size:
            r = float(np.abs(self.atoms_z).max())
        for c in self.cells:
            r = max(r, cell_radial_range(c)[1])
        for c in self.curves:
            r = max(r, c.r_hi)
        return r

    def is_zero(self) -> bool:
        return self.total_mass <= 0.0

    def scaled(self, factor: float) -> "DiskMeasure":
        return DiskMeasure(
            self.atoms_z.copy(),
            self.atoms_mass * factor,
            tuple(replace(c, mass=c.mass * factor) for c in self.cells),
            self.curves if factor == 1.0 else tuple(_scaled_curve(c, factor) for c in self.curves),
        )


def _scaled_curve(curve: CurveProfile, factor: float) -> CurveProfile:
    cum, dens = curve.cumulative, curve.density
    return replace(
        curve,
        cumulative=lambda r: factor * np.asarray(cum(r)),
        density=lambda r: factor * np.asarray(dens(r)),
    )


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def total_mass(mu: DiskMeasure, region: Region) -> float:
    """mu(region) for a closed region; additive over disjoint regions."""
    out = 0.0
    if mu.atoms_z.size:
        out += float(mu.atoms_mass[np.asarray(region.contains(mu.atoms_z), dtype=bool)].sum())
    for cell in mu.cells:
        out += overlap_mass(cell, region)
    for curve in mu.curves:
        for a, b in curve.region_intervals(region):
            out += curve.mass_between(a, b)
    return out


def moment(mu: DiskMeasure, region: Region, k: int, center: complex = 0j) -> complex:
    """Integral of (zeta - center)^k over the region; k between 1 and 16."""
    if not (1 <= k <= 16):
        raise MeasureError("moment order must be between 1 and 16")
    restricted = restrict(mu, region)
    return moment_free(restricted, k, center)


def moment_free(mu: DiskMeasure, k: int, center: complex = 0j) -> complex:
    out = 0j
    if mu.atoms_z.size:
        out += complex(np.sum(mu.atoms_mass * (mu.atoms_z - center) ** k))
    for cell in mu.cells:
        if cell.is_ring and center == 0:
            continue  # angular symmetry kills every positive moment
        out += cell.moment(k, center)
    for curve in mu.curves:
        out += _curve_moment(curve, k, center)
    return out


def _curve_moment(curve: CurveProfile, k: int, center: complex, rtol: float = 1e-12) -> complex:
    def block(a, b, n):
        z, w = curve.quad_nodes(a, b, n)
        return np.sum(w * (z - center) ** k)

    total = 0j
    stack = [(curve.r_lo, curve.r_hi)]
    while stack:
        a, b = stack.pop()
        coarse = block(a, b, 8)
        fine = block(a, b, 16)
        if abs(fine - coarse) <= rtol * (abs(fine) + 1e-300) or (b - a) < 1e-13:
            total += fine
        else:
            mid = 0.5 * (a + b)
            stack.append((a, mid))
            stack.append((mid, b))
    return complex(total)


def restrict(mu: DiskMeasure, region: Region) -> DiskMeasure:
    """Measure restricted to the closed region; sub-region masses preserved."""
    keep = np.asarray(region.contains(mu.atoms_z), dtype=bool) if mu.atoms_z.size else np.empty(0, bool)
    cells: list[PlanarCell] = []
    for cell in mu.cells:
        cells.extend(cell.region_parts(region))
    curves: list[CurveProfile] = []
    for curve in mu.curves:
        for a, b in curve.region_intervals(region):
            if curve.mass_between(a, b) > 0:
                curves.append(_clip_curve(curve, a, b))
    return DiskMeasure(
        mu.atoms_z[keep] if mu.atoms_z.size else np.empty(0, complex),
        mu.atoms_mass[keep] if mu.atoms_z.size else np.empty(0),
        tuple(cells),
        tuple(curves),
    )


def _clip_curve(curve: CurveProfile, a: float, b: float) -> CurveProfile:
    base = float(curve.cumulative(a))
    cum = curve.cumulative
    return replace(
        curve,
        r_lo=a,
        r_hi=b,
        cumulative=lambda r: np.asarray(cum(np.clip(r, a, b))) - base,
    )


def extract_heavy_atoms(mu: DiskMeasure) -> tuple[list[tuple[complex, int]], DiskMeasure]:
    """Split off the integer part of every atom of mass >= 1.

    Returns (integer atoms as (position, multiplicity), remainder measure);
    the remainder has every point mass < 1 and integer part + remainder == mu.
    """
    heavy: list[tuple[complex, int]] = []
    rem_mass = mu.atoms_mass.copy()
    for i, m in enumerate(mu.atoms_mass):
        k = int(math.floor(m))
        if k >= 1:
            heavy.append((complex(mu.atoms_z[i]), k))
            rem_mass[i] = m - k
    keep = rem_mass > 0
    remainder = DiskMeasure(
        mu.atoms_z[keep],
        rem_mass[keep],
        mu.cells,
        mu.curves,
    )
    return heavy, remainder


# ---------------------------------------------------------------------------
# Named density profiles (rasterized measures)
# ---------------------------------------------------------------------------


def radial_profile_measure(
    cumulative: Callable[[np.ndarray], np.ndarray],
    r_edges: np.ndarray,
    origin_mass: float = 0.0,
) -> DiskMeasure:
    """Rotationally invariant density rasterized into full rings.

    ``cumulative(r)`` is the target mass of the closed disk of radius r
    (excluding ``origin_mass`` which is placed as an atom at 0).
    """
    r_edges = np.asarray(r_edges, dtype=float)
    vals = np.asarray(cumulative(r_edges), dtype=float)
    masses = np.diff(vals)
    if np.any(masses < -1e-12):
        raise MeasureError("cumulative profile must be nondecreasing")
    cells = [
        PlanarCell("polar", r_edges[i], r_edges[i + 1], 0.0, TWO_PI, max(m, 0.0))
        for i, m in enumerate(masses)
        if m > 0
    ]
    parts = [DiskMeasure.from_cells(cells)]
    if origin_mass > 0:
        parts.append(DiskMeasure.from_atoms([0j], [origin_mass]))
    return DiskMeasure.combine(*parts)


def radial_power_measure(coeff: float, exponent: float, r_edges: np.ndarray) -> DiskMeasure:
    """Rotationally invariant measure with n(r) = coeff/(1-r)^exponent.

    The limit mass at the origin (coeff) becomes an atom at 0; the rest is
    rasterized onto the given radial edges as uniform rings.
    """

    def cum(r):
        return coeff / (1.0 - np.asarray(r, dtype=float)) ** exponent - coeff

    return radial_profile_measure(cum, r_edges, origin_mass=coeff)


def uniform_disk_measure(mass: float, radius: float, n_rings: int = 32) -> DiskMeasure:
    edges = radius * np.sqrt(np.linspace(0.0, 1.0, n_rings + 1))

    def cum(r):
        return mass * np.clip(np.asarray(r, dtype=float) / radius, 0, 1) ** 2

    return radial_profile_measure(cum, edges)


def uniform_rect_measure(mass: float, rect: Rectangle, nx: int = 8, ny: int = 8) -> DiskMeasure:
    xs = np.linspace(rect.x_lo, rect.x_hi, nx + 1)
    ys = np.linspace(rect.y_lo, rect.y_hi, ny + 1)
    cells = []
    m = mass / (nx * ny)
    for i in range(nx):
        for j in range(ny):
            cells.append(PlanarCell("cart", xs[i], xs[i + 1], ys[j], ys[j + 1], m))
    return DiskMeasure.from_cells(cells)
