"""Potentials, per-cell error terms, and log-singularity-aware integration.

Three kernels: the disk Green kernel log|(z-s)/(1-z*conj(s))|, the planar
kernel log|z-s|, and the first-order primary-factor kernel
log|E((1-|s|^2)/(1-conj(s)z), 1)| used for the fractional remainder.

Every kernel admits an exact angular mean over a source ring, so measures
stored as full rings evaluate by 1-D radial quadrature; general cells use
Gauss nodes with geometric refinement near the singularity. The error field
of an approximant is always assembled cell-by-cell (measure term minus the
cell's own atoms) so the far-field cancellation survives in floating point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .atomize import AtomSet
from .diskgrid import AnnularScheme
from .measure import CurveProfile, DiskMeasure, PlanarCell, TWO_PI

ATOM_HIT = float("-inf")


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------


class GreenDisk:
    """log|(z - s) / (1 - z*conj(s))|; nonpositive inside the unit disk."""

    name = "green"

    @staticmethod
    def pointwise(z, s):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.log(np.abs(z - s)) - np.log(np.abs(1.0 - z * np.conj(s)))

    @staticmethod
    def smooth_rest(z, s):
        return -np.log(np.abs(1.0 - z * np.conj(s)))

    @staticmethod
    def ring_mean(rho, az):
        return np.log(np.maximum(rho, az))


class PlanarLog:
    """log|z - s|; symmetric in its arguments."""

    name = "planar"

    @staticmethod
    def pointwise(z, s):
        with np.errstate(divide="ignore"):
            return np.log(np.abs(z - s))

    @staticmethod
    def smooth_rest(z, s):
        return np.zeros(np.broadcast(z, s).shape)

    @staticmethod
    def ring_mean(rho, az):
        with np.errstate(divide="ignore"):
            return np.log(np.maximum(rho, az))


class WeierstrassE:
    """log|E(w, 1)| with w = (1-|s|^2)/(1-conj(s)z) and E(w,1) = (1-w)e^w.

    Requires sources away from the origin (1 - w vanishes for every z when
    s = 0). Using 1 - w = conj(s)(s - z)/(1 - conj(s)z), the kernel splits
    as log|z-s| plus a part smooth in z.
    """

    name = "weier"

    @staticmethod
    def pointwise(z, s):
        w = (1.0 - np.abs(s) ** 2) / (1.0 - np.conj(s) * z)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.log(np.abs(1.0 - w)) + np.real(w)

    @staticmethod
    def smooth_rest(z, s):
        w = (1.0 - np.abs(s) ** 2) / (1.0 - np.conj(s) * z)
        with np.errstate(divide="ignore"):
            return np.log(np.abs(s)) - np.log(np.abs(1.0 - np.conj(s) * z)) + np.real(w)

    @staticmethod
    def ring_mean(rho, az):
        with np.errstate(divide="ignore"):
            return np.log(rho) + np.log(np.maximum(rho, az)) + (1.0 - rho**2)


Kernel = GreenDisk | PlanarLog | WeierstrassE

KERNELS = {k.name: k for k in (GreenDisk, PlanarLog, WeierstrassE)}


def primary_factor_log_bound(w_abs: float) -> float:
    """|log E(w,1)| <= |w|^2 / (2(1-|w|)) for |w| < 1."""
    if w_abs >= 1:
        return math.inf
    return w_abs**2 / (2.0 * (1.0 - w_abs))


# ---------------------------------------------------------------------------
# Cell and curve integration
# ---------------------------------------------------------------------------

_NEAR_FACTOR = 2.0


def _cell_gl_value(cell: PlanarCell, kernel, z: np.ndarray, n: int = 6) -> np.ndarray:
    src, w = cell.quad_nodes(n)
    return kernel.pointwise(z[:, None], src[None, :]) @ w


_INNER_FACTOR = 0.8  # below this many diameters, subdivide instead of GL


def _cell_near_value(cell: PlanarCell, kernel, z: complex, rtol: float, scale: float, depth: int = 0) -> float:
    d = cell.diameter()
    dist = float(cell.distance_lower_bound(np.array([z]))[0])
    if dist > _INNER_FACTOR * d or depth >= 40:
        if dist <= 0 and cell.mass > 0:
            # vanishing cell straddling z: uniform-disk closed form for the
            # log part, smooth remainder frozen at the centroid
            rho_eq = math.sqrt(cell.area() / math.pi + 1e-300)
            smooth = float(np.asarray(kernel.smooth_rest(np.array([z]), np.array([cell.centroid()])))[0])
            return cell.mass * (math.log(max(rho_eq, 1e-300)) - 0.5) + cell.mass * smooth
        return float(_cell_gl_value(cell, kernel, np.array([z]), 10)[0])
    if cell.mass * (abs(math.log(max(d, 1e-300))) + 2.0) < rtol * scale:
        return float(_cell_gl_value(cell, kernel, np.array([z]), 4)[0])
    return sum(_cell_near_value(ch, kernel, z, rtol, scale, depth + 1) for ch in cell.subdivide())


def _int_log_2rho(a, b):
    """Integral of log(rho) * 2 rho over [a, b] (limit 0 at rho = 0)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        fa = np.where(a > 0, a * a * (np.log(np.maximum(a, 1e-300)) - 0.5), 0.0)
        fb = np.where(b > 0, b * b * (np.log(np.maximum(b, 1e-300)) - 0.5), 0.0)
    return fb - fa


def _ring_band_values(cells: Sequence[PlanarCell], kernel, az: np.ndarray) -> np.ndarray:
    """Exact radial integrals of the ring means over full-ring cells.

    Every ring mean is a polynomial in rho plus log(rho) and log(max(rho, az))
    terms, so the planar-uniform radial average has a closed form."""
    az = np.asarray(az, dtype=float)
    out = np.zeros(az.shape)
    for cell in cells:
        r1, r2 = cell.a_lo, cell.a_hi
        if cell.mass <= 0:
            continue
        denom = r2 * r2 - r1 * r1
        if denom <= 0:
            out += cell.mass * np.asarray(kernel.ring_mean(np.full_like(az, max(r1, 1e-300)), az))
            continue
        k = np.clip(az, r1, r2)
        # mean of log(max(rho, az)): log(az) below the kink, log(rho) above
        low_w = (k * k - r1 * r1) / denom
        with np.errstate(divide="ignore", invalid="ignore"):
            low_term = np.where(low_w > 0, low_w * np.log(np.maximum(az, 1e-300)), 0.0)
        mean_logmax = low_term + _int_log_2rho(k, r2) / denom
        vals = mean_logmax
        if kernel is WeierstrassE:
            mean_log = _int_log_2rho(r1, r2) / denom
            mean_one_m_rho2 = 1.0 - (r2**4 - r1**4) / (2.0 * denom)
            vals = vals + mean_log + mean_one_m_rho2
        out += cell.mass * vals
    return out


def _curve_segments(curve: CurveProfile, max_mass: float = 0.5) -> np.ndarray:
    """Break radii giving roughly equal-mass segments along the curve."""
    total = curve.total
    n = max(16, int(math.ceil(total / max_mass)))
    # invert the cumulative on a fine grid
    rs = np.linspace(curve.r_lo, curve.r_hi, 8 * n + 1)
    cum = np.asarray(curve.cumulative(rs))
    targets = np.linspace(0.0, cum[-1], n + 1)
    idx = np.searchsorted(cum, targets[1:-1])
    breaks = np.unique(np.concatenate([[curve.r_lo], rs[np.clip(idx, 0, len(rs) - 1)], [curve.r_hi]]))
    return breaks


def _curve_value(curve: CurveProfile, kernel, z: np.ndarray, rtol: float = 1e-9) -> np.ndarray:
    breaks = _curve_segments(curve)
    out = np.zeros(z.shape)
    for a, b in zip(breaks[:-1], breaks[1:]):
        src, w = curve.quad_nodes(a, b, 12)
        if not src.size:
            continue
        vals = kernel.pointwise(z[:, None], src[None, :]) @ w
        # refine where the evaluation point sits close to the segment
        seg_len = abs(curve.point(b) - curve.point(a)) + (b - a)
        dist = np.min(np.abs(z[:, None] - src[None, :]), axis=1)
        near = dist < 2.0 * seg_len
        if near.any():
            for i in np.where(near)[0]:
                vals[i] = _curve_near(curve, kernel, complex(z[i]), a, b, rtol)
        out += vals
    return out


def _curve_near(curve: CurveProfile, kernel, z: complex, a: float, b: float, rtol: float, depth: int = 0) -> float:
    src, w = curve.quad_nodes(a, b, 12)
    if not src.size:
        return 0.0
    coarse = float((kernel.pointwise(np.array([z])[:, None], src[None, :]) @ w)[0])
    if depth >= 36:
        return coarse
    mid = 0.5 * (a + b)
    sa, wa = curve.quad_nodes(a, mid, 12)
    sb, wb = curve.quad_nodes(mid, b, 12)
    fine = float((kernel.pointwise(np.array([z])[:, None], sa[None, :]) @ wa)[0]) + float(
        (kernel.pointwise(np.array([z])[:, None], sb[None, :]) @ wb)[0]
    )
    if abs(fine - coarse) <= rtol * (abs(fine) + 1.0):
        return fine
    return _curve_near(curve, kernel, z, a, mid, rtol, depth + 1) + _curve_near(
        curve, kernel, z, mid, b, rtol, depth + 1
    )


# ---------------------------------------------------------------------------
# Measure potential evaluation
# ---------------------------------------------------------------------------


class PotentialEvaluator:
    """Batch evaluator for the potential of a measure under one kernel.

    Full-ring cells go through exact angular means (cached on unique radii);
    other cells use Gauss nodes with per-point refinement when the evaluation
    point comes within a couple of diameters.
    """

    def __init__(self, mu: DiskMeasure, kernel, rtol: float = 1e-8, chunk: int = 512):
        self.mu = mu
        self.kernel = kernel
        self.rtol = rtol
        self.chunk = chunk
        self.ring_cells = [c for c in mu.cells if c.is_ring]
        self.gen_cells = [c for c in mu.cells if not c.is_ring]
        self._src = None
        if self.gen_cells:
            zs, ws, owner = [], [], []
            for i, c in enumerate(self.gen_cells):
                z, w = c.quad_nodes(4)
                zs.append(z)
                ws.append(w)
                owner.append(np.full(z.size, i))
            self._src = (np.concatenate(zs), np.concatenate(ws), np.concatenate(owner))
            self._centers = np.array([c.centroid() for c in self.gen_cells])
            self._diams = np.array([c.diameter() for c in self.gen_cells])

    def __call__(self, z: np.ndarray) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        out = np.zeros(z.shape)
        if self.mu.atoms_z.size:
            for i0 in range(0, z.size, self.chunk):
                blk = z[i0 : i0 + self.chunk]
                out[i0 : i0 + self.chunk] += (
                    self.kernel.pointwise(blk[:, None], self.mu.atoms_z[None, :]) @ self.mu.atoms_mass
                )
        if self.ring_cells:
            az = np.abs(z)
            uniq, inv = np.unique(np.round(az, 15), return_inverse=True)
            vals = _ring_band_values(self.ring_cells, self.kernel, uniq)
            out += vals[inv]
        if self.gen_cells:
            src_z, src_w, owner = self._src
            for i0 in range(0, z.size, self.chunk):
                blk = z[i0 : i0 + self.chunk]
                out[i0 : i0 + self.chunk] += self.kernel.pointwise(blk[:, None], src_z[None, :]) @ src_w
            # near-field correction, cell by cell: mid-range points rerun on a
            # high-order rule in one batch, interior points by subdivision
            scale = float(np.mean(np.abs(out)) + 1.0)
            for ci, cell in enumerate(self.gen_cells):
                d = self._diams[ci]
                dist = np.abs(z - self._centers[ci]) - 0.5 * d
                near = np.where(dist < _NEAR_FACTOR * d)[0]
                if not near.size:
                    continue
                own_mask = owner == ci
                sz, sw = src_z[own_mask], src_w[own_mask]
                coarse = self.kernel.pointwise(z[near][:, None], sz[None, :]) @ sw
                lb = cell.distance_lower_bound(z[near])
                inner = lb <= _INNER_FACTOR * d
                refined = np.empty(near.size)
                if (~inner).any():
                    fz, fw = cell.quad_nodes(10)
                    refined[~inner] = self.kernel.pointwise(z[near][~inner][:, None], fz[None, :]) @ fw
                for j in np.where(inner)[0]:
                    refined[j] = _cell_near_value(cell, self.kernel, complex(z[near][j]), self.rtol, scale)
                out[near] += refined - coarse
        for curve in self.mu.curves:
            out += _curve_value(curve, self.kernel, z)
        return out


def eval_potential(mu: DiskMeasure, kernel, z, rtol: float = 1e-8):
    """Potential of ``mu`` under ``kernel`` at z (scalar or array).

    Evaluation exactly on an atom returns the -inf marker.
    """
    scalar = np.isscalar(z) or (isinstance(z, complex)) or getattr(z, "shape", None) == ()
    ev = PotentialEvaluator(mu, kernel, rtol=rtol)
    vals = ev(np.atleast_1d(np.asarray(z, dtype=complex)))
    if scalar:
        return float(vals[0])
    return vals


def eval_atom_sum(atoms: AtomSet, kernel, z):
    """Sum of multiplicity-weighted kernels over the zero set: log|f(z)|."""
    scalar = np.isscalar(z) or isinstance(z, complex)
    zz = np.atleast_1d(np.asarray(z, dtype=complex))
    out = np.zeros(zz.shape)
    if atoms.points.size:
        for i0 in range(0, zz.size, 1024):
            blk = zz[i0 : i0 + 1024]
            out[i0 : i0 + 1024] = kernel.pointwise(blk[:, None], atoms.points[None, :]) @ atoms.mults
    if scalar:
        return float(out[0])
    return out


def weierstrass_tail_bound(q: float, depth: int, az) -> np.ndarray:
    """Upper bound on the discarded fractional-part contribution beyond the
    truncation radius R_depth, from the primary-factor quadratic bound and
    the per-annulus fractional mass cap."""
    az = np.asarray(az, dtype=float)
    one_m_R = 0.5 * q**depth
    s1 = q**depth / (2.0 * (1.0 - q))  # sum of (1 - R_k), k >= depth
    s2 = q ** (2 * depth) / (4.0 * (1.0 - q**2))  # sum of (1 - R_k)^2
    with np.errstate(divide="ignore"):
        bound = 4.0 / (1.0 - az) ** 2 * (13.0 / (1.0 - q) * s1 + 2.0 * s2)
    valid = (1.0 - az) >= 4.0 * one_m_R
    return np.where(valid, bound, np.inf)


def eval_weierstrass_remainder(
    mu2: DiskMeasure, z, q: float | None = None, depth: int | None = None, rtol: float = 1e-8
):
    """Primary-factor remainder of the fractional part, plus tail estimate.

    Returns (values, tail_bound); the bound covers the fractional mass beyond
    the truncation depth and is +inf where the quadratic bound's premise
    fails. Without scheme data the tail is reported as 0 (measure exact).
    """
    vals = eval_potential(mu2, WeierstrassE, z, rtol=rtol)
    if q is None or depth is None:
        tail = np.zeros(np.shape(vals)) if np.ndim(vals) else 0.0
        return vals, tail
    tail = weierstrass_tail_bound(q, depth, np.abs(np.atleast_1d(np.asarray(z, complex))))
    if np.ndim(vals) == 0:
        return vals, float(tail[0])
    return vals, tail


# ---------------------------------------------------------------------------
# Error field
# ---------------------------------------------------------------------------


@dataclass
class FieldTerm:
    """One additive component of u - log|f| with a batch evaluator."""

    name: str
    evaluate: Callable[[np.ndarray], np.ndarray]


def cell_difference_term(
    name: str,
    pieces: Sequence[tuple[DiskMeasure, np.ndarray]],
    kernel,
    rtol: float = 1e-8,
) -> FieldTerm:
    """Sum over cells of (cell potential - cell atom sum), evaluated per cell
    so the near-exact cancellation is preserved."""

    evaluators = [
        (PotentialEvaluator(piece, kernel, rtol=rtol), np.asarray(pts, dtype=complex))
        for piece, pts in pieces
    ]

    def evaluate(z: np.ndarray) -> np.ndarray:
        out = np.zeros(z.shape)
        for ev, pts in evaluators:
            out += ev(z)
            if pts.size:
                out -= kernel.pointwise(z[:, None], pts[None, :]) @ np.ones(pts.size)
        return out

    return FieldTerm(name, evaluate)


def potential_term(name: str, mu: DiskMeasure, kernel, sign: float = 1.0, rtol: float = 1e-8) -> FieldTerm:
    ev = PotentialEvaluator(mu, kernel, rtol=rtol)

    def evaluate(z: np.ndarray) -> np.ndarray:
        return sign * ev(z)

    return FieldTerm(name, evaluate)


@dataclass
class SweepReport:
    """Sampled error field u - log|f| with per-term components."""

    samples: np.ndarray
    weights: np.ndarray
    ring_index: np.ndarray  # quadrature band of each sample (-1: central)
    components: dict[str, np.ndarray]
    atoms: AtomSet
    kernel_name: str
    radial_edges: np.ndarray
    n_theta: int

    @property
    def total(self) -> np.ndarray:
        out = np.zeros(self.samples.shape)
        for v in self.components.values():
            out = out + v
        return out

    def component_or_zero(self, name: str) -> np.ndarray:
        return self.components.get(name, np.zeros(self.samples.shape))


def polar_grid(radial_edges: np.ndarray, n_theta: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Midpoint polar quadrature: samples, planar weights, band index."""
    radial_edges = np.asarray(radial_edges, dtype=float)
    r_mid = 0.5 * (radial_edges[:-1] + radial_edges[1:])
    dr = np.diff(radial_edges)
    th = (np.arange(n_theta) + 0.5) * TWO_PI / n_theta
    dth = TWO_PI / n_theta
    Z = (r_mid[:, None] * np.exp(1j * th[None, :])).ravel()
    W = (r_mid * dr)[:, None].repeat(n_theta, axis=1).ravel() * dth
    band = np.repeat(np.arange(len(r_mid)), n_theta)
    return Z, W, band


def error_field(
    terms: Sequence[FieldTerm],
    radial_edges: np.ndarray,
    n_theta: int,
    atoms: AtomSet,
    kernel_name: str = "green",
) -> SweepReport:
    """Evaluate every field term on a polar midpoint grid."""
    Z, W, band = polar_grid(radial_edges, n_theta)
    comps = {t.name: t.evaluate(Z) for t in terms}
    return SweepReport(
        samples=Z,
        weights=W,
        ring_index=band,
        components=comps,
        atoms=atoms,
        kernel_name=kernel_name,
        radial_edges=np.asarray(radial_edges, dtype=float),
        n_theta=n_theta,
    )


# ---------------------------------------------------------------------------
# L1 integration with atom neighborhoods
# ---------------------------------------------------------------------------


def _abs_log_disk_integral(s: float, mult: float, rho: float) -> float:
    """Integral of |s - mult*log t| over the disk of radius rho (polar center).

    The signed integral is pi rho^2 s + mult pi rho^2 (1/2 - log rho); when
    s - mult*log t changes sign inside, the positive head is doubled.
    """

    def signed(r):
        if r <= 0:
            return 0.0
        return math.pi * r * r * s + mult * math.pi * r * r * (0.5 - math.log(r))

    if mult <= 0:
        return abs(s) * math.pi * rho * rho
    t_star = math.exp(s / mult)
    if t_star >= rho:
        return signed(rho)
    return 2.0 * signed(t_star) - signed(rho)


def _atom_local_radius(report: SweepReport, a: complex) -> float:
    edges = report.radial_edges
    r = abs(a)
    i = int(np.clip(np.searchsorted(edges, r) - 1, 0, len(edges) - 2))
    dr = edges[i + 1] - edges[i]
    arc = max(r, edges[i]) * TWO_PI / report.n_theta
    return 0.5 * math.hypot(dr, arc)


def l1_error_disk(
    report: SweepReport,
    R: float,
    component: str | None = None,
    smooth_at_atoms: Callable[[complex, int], float] | None = None,
) -> float:
    """Integral of |field| over |z| < R by the midpoint rule, with each
    zero's neighborhood replaced by the closed-form log integral.

    ``smooth_at_atoms(a, mult)`` supplies the regular part of the field at a
    zero; when omitted it is taken as 0 (the log term dominates the small
    disks involved)."""
    vals = report.total if component is None else report.components[component]
    Z, W = report.samples, report.weights
    inside = np.abs(Z) <= R
    excluded = np.zeros(Z.shape, dtype=bool)
    corr = 0.0
    for a, mult in zip(report.atoms.points, report.atoms.mults):
        if abs(a) > R:
            continue
        ra = _atom_local_radius(report, complex(a))
        excluded |= np.abs(Z - a) < ra
        s = smooth_at_atoms(complex(a), int(mult)) if smooth_at_atoms else 0.0
        corr += _abs_log_disk_integral(s, float(mult), ra)
    mask = inside & ~excluded
    finite = np.isfinite(vals)
    return float(np.sum(W[mask & finite] * np.abs(vals[mask & finite]))) + corr


def cart_grid(x_lo, x_hi, y_lo, y_hi, nx, ny):
    xs = x_lo + (np.arange(nx) + 0.5) * (x_hi - x_lo) / nx
    ys = y_lo + (np.arange(ny) + 0.5) * (y_hi - y_lo) / ny
    Z = (xs[:, None] + 1j * ys[None, :]).ravel()
    W = np.full(Z.shape, (x_hi - x_lo) * (y_hi - y_lo) / (nx * ny))
    return Z, W


def l1_error_square(
    values: np.ndarray,
    Z: np.ndarray,
    W: np.ndarray,
    atoms: AtomSet,
    cell_diag: float,
    smooth_at_atoms: Callable[[complex, int], float] | None = None,
) -> float:
    """Cartesian analog of l1_error_disk over a precomputed midpoint grid."""
    excluded = np.zeros(Z.shape, dtype=bool)
    corr = 0.0
    ra = 0.5 * cell_diag
    x_min, x_max = Z.real.min(), Z.real.max()
    y_min, y_max = Z.imag.min(), Z.imag.max()
    for a, mult in zip(atoms.points, atoms.mults):
        if not (x_min - ra <= a.real <= x_max + ra and y_min - ra <= a.imag <= y_max + ra):
            continue
        excluded |= np.abs(Z - a) < ra
        s = smooth_at_atoms(complex(a), int(mult)) if smooth_at_atoms else 0.0
        corr += _abs_log_disk_integral(s, float(mult), ra)
    finite = np.isfinite(values)
    mask = ~excluded & finite
    return float(np.sum(W[mask] * np.abs(values[mask]))) + corr


# ---------------------------------------------------------------------------
# Near/far classification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CellClasses:
    near: tuple[int, ...]  # annulus indices within the buffer
    inner: tuple[int, ...]  # strictly inside
    outer: tuple[int, ...]  # strictly outside


def classify_cells(scheme: AnnularScheme, m: int, buffer: int = 13) -> CellClasses:
    """Partition annulus indices around annulus m with the given buffer width.

    Inner annuli are those whose closure lies inside the disk of radius
    R_{m-buffer}, i.e. indices n with n + 1 <= m - buffer.
    """
    if buffer < 1:
        raise ValueError("buffer must be >= 1")
    ns = range(scheme.depth)
    inner = tuple(n for n in ns if n + 1 <= m - buffer)
    outer = tuple(n for n in ns if n >= m + buffer + 1)
    near = tuple(n for n in ns if n not in set(inner) and n not in set(outer))
    return CellClasses(near=near, inner=inner, outer=outer)
