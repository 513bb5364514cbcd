"""Slow-variation machinery for curve-supported measures.

A proximate order rho(R) -> sigma defines the growth scale W(R) = R^rho(R)
and the boundary scale b(t) = (1-t)/W(1/(1-t)). Curve measures with
cumulative mass Delta * W(1/(1-r)) are cut into mass-2 (generally mass-p)
cells between the radii solving Delta * W(1/(1-r_n)) = p*n, with an angular
band wide enough to trap the curve. Local regularity of the measure and the
exceptional neighborhood E_eps of the produced zero set are checked
numerically.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .atomize import AtomSet
from .measure import ClosedDisk, CurveProfile, DiskMeasure, total_mass


class NotInvertible(ValueError):
    pass


class CurveEscapesCell(RuntimeError):
    pass


@dataclass(frozen=True)
class ProximateOrder:
    """Growth order sigma with an optional slowly varying refinement.

    Without a table, rho(R) = sigma identically. A table ((R_i), (rho_i))
    is interpolated linearly in log R and must keep W(R) = R^rho(R)
    nondecreasing on the covered range.
    """

    sigma: float
    table_R: np.ndarray | None = None
    table_rho: np.ndarray | None = None

    def rho(self, R):
        R = np.asarray(R, dtype=float)
        if self.table_R is None:
            return np.full_like(R, self.sigma)
        logR = np.log(np.maximum(R, 1.0))
        return np.interp(logR, np.log(self.table_R), self.table_rho)

    def W(self, R):
        R = np.asarray(R, dtype=float)
        return R ** self.rho(R)

    def w_is_monotone(self, R_lo: float = 1.0, R_hi: float = 1e9, samples: int = 4096) -> bool:
        grid = np.geomspace(max(R_lo, 1.0), R_hi, samples)
        vals = self.W(grid)
        return bool(np.all(np.diff(vals) >= -1e-12 * vals[:-1]))

    def w_inverse(self, y: float, R_hi: float = 1e15) -> float:
        """Solve W(R) = y by bisection (relative tolerance 1e-12)."""
        lo, hi = 1.0, 2.0
        while float(self.W(hi)) < y:
            hi *= 2.0
            if hi > R_hi:
                raise NotInvertible(f"W never reaches {y}")
        for _ in range(100):
            mid = math.sqrt(lo * hi)
            if float(self.W(mid)) >= y:
                hi = mid
            else:
                lo = mid
            if hi - lo <= 1e-12 * hi:
                break
        return hi


def b_from_order(po: ProximateOrder) -> Callable[[np.ndarray], np.ndarray]:
    """Boundary scale b(t) = (1-t)/W(1/(1-t)); equals (1-t)^(1+sigma) for a
    constant order."""

    def b(t):
        t = np.asarray(t, dtype=float)
        R = 1.0 / (1.0 - t)
        return (1.0 - t) / po.W(R)

    return b


@dataclass(frozen=True)
class SlowVarSpec:
    """Scale function with its cell parameters: p atoms per cell, overlap
    bound N, and the support-margin constant."""

    b: Callable[[np.ndarray], np.ndarray]
    p: int = 2
    overlap: int = 2
    support_margin: float = 1.0

    def ratio_constant(self, sigma: float) -> float:
        return 2.0 ** (1.0 + sigma) * 1.01

    def slow_variation_holds(self, r_grid: np.ndarray, sigma: float) -> bool:
        """b(r1) ~ b(r2) whenever 1-r1 ~ 1-r2, sampled at dyadic pairs."""
        c = self.ratio_constant(sigma)
        r1 = np.asarray(r_grid, dtype=float)
        r2 = 1.0 - 0.5 * (1.0 - r1)
        vals = self.b(r1) / self.b(r2)
        return bool(np.all((vals <= c) & (vals >= 1.0 / c)))

    def integral_condition(self, t_hi: float = None, parts: int = 48) -> tuple[bool, float]:
        """Numeric tail estimate of the integral of b^(p-1)(t)/(1-t)^p.

        Integrates over dyadic windows approaching 1; finite when the window
        contributions shrink geometrically."""
        total = 0.0
        prev = None
        ratio_hist = []
        for k in range(1, parts + 1):
            a = 1.0 - 2.0 ** -(k - 1) if k > 1 else 0.0
            bb = 1.0 - 2.0**-k
            ts = np.linspace(a, bb, 257)
            mids = 0.5 * (ts[1:] + ts[:-1])
            vals = self.b(mids) ** (self.p - 1) / (1.0 - mids) ** self.p
            piece = float(np.sum(vals * np.diff(ts)))
            total += piece
            if prev is not None and prev > 0:
                ratio_hist.append(piece / prev)
            prev = piece
        tail_ratio = max(ratio_hist[-5:]) if ratio_hist else 0.0
        finite = tail_ratio < 0.999
        if finite and tail_ratio > 0:
            total += prev * tail_ratio / (1.0 - tail_ratio)
        return finite, total


def radii_sequence(delta: float, po: ProximateOrder, n_max: int, mass_step: float = 2.0) -> np.ndarray:
    """Radii r_1..r_{n_max+1} solving delta * W(1/(1-r_n)) = mass_step * n."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    if not po.w_is_monotone():
        raise NotInvertible("W is not nondecreasing on the sampled range")
    out = np.empty(n_max + 1)
    for i, n in enumerate(range(1, n_max + 2)):
        R = po.w_inverse(mass_step * n / delta)
        out[i] = 1.0 - 1.0 / R
    if np.any(np.diff(out) <= 0):
        raise NotInvertible("radii sequence is not strictly increasing")
    return out


@dataclass(frozen=True)
class CurveCell:
    """Radial band around one mass-p chunk of the curve."""

    n: int
    r_lo: float
    r_hi: float
    th_lo: float
    th_hi: float
    piece: DiskMeasure
    mass: float

    @property
    def diameter(self) -> float:
        chord = 2.0 * self.r_hi * math.sin(min(self.th_hi - self.th_lo, math.pi) / 2.0)
        return math.hypot(self.r_hi - self.r_lo, chord)


def build_curve_cells(
    curve: CurveProfile,
    po: ProximateOrder,
    delta: float,
    K: float,
    n_max: int,
    p: int = 2,
) -> list[CurveCell]:
    """Mass-p cells along the curve between consecutive construction radii.

    The angular band is theta(r_n) +- K (r_{n+1} - r_n); a curve whose angle
    leaves that band (Lipschitz bound exceeded) is rejected.
    """
    from .measure import _clip_curve

    radii = radii_sequence(delta, po, n_max, mass_step=float(p))
    cells: list[CurveCell] = []
    for n in range(1, n_max + 1):
        r_lo, r_hi = float(radii[n - 1]), float(radii[n])
        if r_lo < curve.r_lo - 1e-12 or r_hi > curve.r_hi + 1e-12:
            raise ValueError(
                f"curve support [{curve.r_lo}, {curve.r_hi}] does not cover band {n}: [{r_lo}, {r_hi}]"
            )
        width = r_hi - r_lo
        th0 = float(np.asarray(curve.theta(np.array([r_lo])))[0])
        th_lo, th_hi = th0 - K * width, th0 + K * width
        rs = np.linspace(r_lo, r_hi, 129)
        ths = np.asarray(curve.theta(rs))
        if np.any(ths < th_lo - 1e-12) or np.any(ths > th_hi + 1e-12):
            raise CurveEscapesCell(f"curve angle leaves the K-band in cell {n}")
        piece = DiskMeasure.from_curve(_clip_curve(curve, r_lo, r_hi))
        mass = piece.total_mass
        if abs(mass - p) > 1e-9 * p:
            raise ValueError(f"cell {n} mass {mass} differs from p={p}")
        cells.append(CurveCell(n, r_lo, r_hi, th_lo, th_hi, piece, mass))
    return cells


def cell_overlap_count(cells: Sequence[CurveCell], z: complex) -> int:
    r, th = abs(z), math.atan2(z.imag, z.real)
    cnt = 0
    for c in cells:
        if c.r_lo <= r <= c.r_hi and c.th_lo <= th <= c.th_hi:
            cnt += 1
    return cnt


# ---------------------------------------------------------------------------
# Local regularity
# ---------------------------------------------------------------------------


def _curve_mass_in_disk(curve: CurveProfile, z: complex, ts: np.ndarray) -> np.ndarray:
    """mu(U(z, t)) for every threshold in ts, via one distance profile."""
    t_max = float(ts[-1])
    r_center = abs(z)
    lo = max(curve.r_lo, r_center - 1.2 * t_max)
    hi = min(curve.r_hi, r_center + 1.2 * t_max)
    out = np.zeros(ts.shape)
    if hi <= lo:
        return out
    rs = np.linspace(lo, hi, 4097)
    dist = np.abs(z - curve.point(rs))
    cum = np.asarray(curve.cumulative(rs))
    for j, t in enumerate(ts):
        inside = dist < t
        if not inside.any():
            continue
        d = np.diff(inside.astype(int))
        starts = list(np.where(d == 1)[0] + 1)
        ends = list(np.where(d == -1)[0] + 1)
        if inside[0]:
            starts = [0] + starts
        if inside[-1]:
            ends = ends + [len(rs) - 1]
        acc = 0.0
        for i0, i1 in zip(starts, ends):
            # refine the crossing radii linearly on the sampled profile
            a = rs[i0] if i0 == 0 else _interp_cross(rs, dist, i0 - 1, i0, t)
            b = rs[i1] if i1 == len(rs) - 1 else _interp_cross(rs, dist, i1 - 1, i1, t)
            acc += float(curve.cumulative(b) - curve.cumulative(a))
        out[j] = acc
    return out


def _interp_cross(rs, dist, i, j, t):
    d0, d1 = dist[i] - t, dist[j] - t
    if d1 == d0:
        return rs[j]
    w = -d0 / (d1 - d0)
    return rs[i] + w * (rs[j] - rs[i])


def local_regularity(
    mu: DiskMeasure,
    b: Callable[[np.ndarray], np.ndarray],
    z: complex,
    r0: float = 0.0,
    rel_tol: float = 0.01,
) -> float:
    """Integral over (0, b(|z|)] of mu(U(z, t))/t dt (log-spaced grid,
    >= 64 points, doubled until the change is below 1%).

    An atom exactly at z makes the integral diverge: returns inf.
    """
    if abs(z) <= r0:
        raise ValueError("probe must sit outside the core radius")
    if mu.atoms_z.size and np.any((np.abs(mu.atoms_z - z) < 1e-15) & (mu.atoms_mass > 0)):
        return math.inf
    b_z = float(np.asarray(b(np.array([abs(z)])))[0])
    if b_z <= 0:
        return 0.0
    t_min = b_z * 1e-7

    def mass_at(ts: np.ndarray) -> np.ndarray:
        if len(mu.curves) == 1 and not mu.cells and not mu.atoms_z.size:
            return _curve_mass_in_disk(mu.curves[0], z, ts)
        return np.array([total_mass(mu, ClosedDisk(z, float(t))) for t in ts])

    n = 64
    prev = None
    while n <= 1024:
        ts = np.geomspace(t_min, b_z, n)
        masses = mass_at(ts)
        val = float(np.trapezoid(masses, np.log(ts))) + float(masses[0])
        if prev is not None and abs(val - prev) <= rel_tol * (abs(val) + 1e-12):
            return val
        prev = val
        n *= 2
    return prev


# ---------------------------------------------------------------------------
# Exceptional set and sup-norm reports
# ---------------------------------------------------------------------------


def exceptional_set_membership(
    z, atoms: AtomSet, eps: float, b: Callable[[np.ndarray], np.ndarray]
):
    """True where dist(z, zero set) <= eps * b(|z|)."""
    zz = np.atleast_1d(np.asarray(z, dtype=complex))
    if not atoms.points.size:
        out = np.zeros(zz.shape, dtype=bool)
        return bool(out[0]) if np.isscalar(z) or isinstance(z, complex) else out
    d = np.min(np.abs(zz[:, None] - atoms.points[None, :]), axis=1)
    thresh = eps * np.asarray(b(np.abs(zz)))
    out = d <= thresh
    if np.isscalar(z) or isinstance(z, complex):
        return bool(out[0])
    return out


@dataclass
class SupErrorReport:
    band_ids: np.ndarray
    sup_off_E: np.ndarray  # per band, sup |field| outside E_eps (nan: empty)
    one_sided_max: float  # max over ALL samples of logf - u = -field
    excluded_fraction: float


def sup_error_outside(
    values: np.ndarray,
    samples: np.ndarray,
    band_index: np.ndarray,
    atoms: AtomSet,
    eps: float,
    b: Callable[[np.ndarray], np.ndarray],
    n_bands: int | None = None,
) -> SupErrorReport:
    """Per-band sup of |u - log|f|| off the exceptional set, and the global
    one-sided max of log|f| - u over every finite sample."""
    values = np.asarray(values, dtype=float)
    in_E = exceptional_set_membership(samples, atoms, eps, b)
    finite = np.isfinite(values)
    if n_bands is None:
        n_bands = int(band_index.max()) + 1 if band_index.size else 0
    sups = np.full(n_bands, np.nan)
    for nb in range(n_bands):
        mask = (band_index == nb) & ~in_E & finite
        if mask.any():
            sups[nb] = float(np.max(np.abs(values[mask])))
    one_sided = float(np.max(-values[finite])) if finite.any() else math.nan
    return SupErrorReport(
        band_ids=np.arange(n_bands),
        sup_off_E=sups,
        one_sided_max=one_sided,
        excluded_fraction=float(np.mean(in_E)) if in_E.size else 0.0,
    )


def distance_to_curves(points: np.ndarray, curves: Sequence[CurveProfile]) -> tuple[np.ndarray, np.ndarray]:
    """(distance, radius of the nearest curve point) for each query point."""
    pts = np.atleast_1d(np.asarray(points, dtype=complex))
    best = np.full(pts.shape, np.inf)
    best_r = np.zeros(pts.shape)
    for curve in curves:
        rs = np.linspace(curve.r_lo, curve.r_hi, 20001)
        cz = curve.point(rs)
        for i, zq in enumerate(pts):
            d = np.abs(zq - cz)
            j = int(np.argmin(d))
            lo, hi = max(j - 1, 0), min(j + 1, len(rs) - 1)
            # golden-section polish on the bracketing interval
            a, bb = rs[lo], rs[hi]
            for _ in range(60):
                m1 = a + 0.382 * (bb - a)
                m2 = a + 0.618 * (bb - a)
                if abs(zq - curve.point(m1)) < abs(zq - curve.point(m2)):
                    bb = m2
                else:
                    a = m1
            r_star = 0.5 * (a + bb)
            d_star = float(abs(zq - curve.point(r_star)))
            if d_star < best[i]:
                best[i] = d_star
                best_r[i] = r_star
    return best, best_r


def zero_localization_check(
    atoms: AtomSet,
    curves: Sequence[CurveProfile],
    margin: float,
    b: Callable[[np.ndarray], np.ndarray],
) -> tuple[bool, np.ndarray, np.ndarray]:
    """Every zero must lie within margin * b(radius of nearest support point)
    of the supporting curves. Returns (ok, distances, allowances)."""
    if not atoms.points.size:
        return True, np.empty(0), np.empty(0)
    dist, r_star = distance_to_curves(atoms.points, curves)
    allow = margin * np.asarray(b(r_star))
    return bool(np.all(dist <= allow)), dist, allow
