"""End-to-end runs: measure in, zero set + certified error reports out.

Three modes:

* disk: annular scheme split (even parts partitioned in log coordinates and
  replaced by moment-matched pairs; fractional parts kept as the
  primary-factor remainder) plus the central part handled on a square.
* square: a measure of integer mass on a square replaced by a polynomial
  zero set, error integrated over the doubled square.
* curve: mass-2 cells along a curve with power cumulative mass, zeros in
  each cell, uniform error off the exceptional neighborhood of the zeros.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field
from typing import Callable, Sequence

import numpy as np

from .atomize import AtomSet, MomentData, atomize_piece, power_sum_residuals, residual_tolerances
from .diskgrid import (
    AnnularScheme,
    CellJob,
    build_scheme,
    central_split,
    split_scheme_measure,
)
from .measure import (
    Annulus,
    ClosedDisk,
    CurveProfile,
    DiskMeasure,
    PlanarCell,
    Rectangle,
    TWO_PI,
    extract_heavy_atoms,
    overlap_mass,
    power_curve,
    restrict,
)
from .partition import PartitionLeaf, balanced_partition, box_cartesian, box_log_sector
from .potential import (
    FieldTerm,
    GreenDisk,
    PlanarLog,
    PotentialEvaluator,
    SweepReport,
    WeierstrassE,
    cart_grid,
    cell_difference_term,
    error_field,
    eval_atom_sum,
    l1_error_disk,
    l1_error_square,
    polar_grid,
    potential_term,
)
from .slowvar import (
    CurveCell,
    ProximateOrder,
    b_from_order,
    build_curve_cells,
    radii_sequence,
)


@dataclass
class AtomizedCell:
    """One replaced piece: its measure, matched points, and residual data."""

    cell_n: int
    cell_m: int
    piece: DiskMeasure
    atoms: AtomSet
    data: MomentData
    leaf: PartitionLeaf | None = None

    def residuals(self) -> np.ndarray:
        return power_sum_residuals(self.atoms.points, self.data)

    def residual_ok(self, rel: float = 1e-8) -> bool:
        return bool(np.all(self.residuals() <= residual_tolerances(self.data, rel)))


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def split_by_radius(mu: DiskMeasure, r_split: float, r_max: float) -> tuple[DiskMeasure, DiskMeasure, float]:
    """(central part |z| < r_split, annular part r_split <= |z| < r_max,
    dropped mass beyond r_max). Atoms exactly at r_split go annular."""
    if mu.curves:
        raise ValueError("disk mode expects atom/lattice measures")
    r_atom = np.abs(mu.atoms_z) if mu.atoms_z.size else np.empty(0)
    c_sel = r_atom < r_split * (1 - 1e-15) if mu.atoms_z.size else np.empty(0, bool)
    a_sel = (r_atom >= r_split * (1 - 1e-15)) & (r_atom < r_max) if mu.atoms_z.size else np.empty(0, bool)
    central_cells: list[PlanarCell] = []
    annular_cells: list[PlanarCell] = []
    dropped = float(mu.atoms_mass[r_atom >= r_max].sum()) if mu.atoms_z.size else 0.0
    for cell in mu.cells:
        central_cells.extend(cell.region_parts(ClosedDisk(0j, r_split)))
        annular_cells.extend(cell.region_parts(Annulus(r_split, r_max)))
        dropped += overlap_mass(cell, Annulus(r_max, np.inf))
    central = DiskMeasure(mu.atoms_z[c_sel], mu.atoms_mass[c_sel], tuple(central_cells))
    annular = DiskMeasure(mu.atoms_z[a_sel], mu.atoms_mass[a_sel], tuple(annular_cells))
    return central, annular, dropped


def _disk_rect_area(r: float, x0: float, x1: float, y0: float, y1: float) -> float:
    """Area of the centered disk of radius r intersected with a rectangle."""
    from .measure import _adaptive_simpson

    a, b = max(x0, -r), min(x1, r)
    if b <= a or r <= 0:
        return 0.0

    def chord(x):
        s = math.sqrt(max(r * r - x * x, 0.0))
        return max(0.0, min(y1, s) - max(y0, -s))

    return _adaptive_simpson(chord, a, b, 1e-13 * max(r * r, 1e-6))


def cartesianize(mu: DiskMeasure, n_cells: int = 32) -> DiskMeasure:
    """Re-raster the lattice part of a centrally supported measure onto a
    cartesian grid (atoms pass through). Total mass is preserved exactly;
    within-cell placement moves by at most one grid cell."""
    if not mu.cells:
        return mu
    r_max = max(c.a_hi if c.kind == "polar" else 0.0 for c in mu.cells)
    for c in mu.cells:
        if c.kind == "cart":
            from .measure import cell_radial_range

            r_max = max(r_max, cell_radial_range(c)[1])
    half = r_max * (1 + 1e-12)
    xs = np.linspace(-half, half, n_cells + 1)
    masses = np.zeros((n_cells, n_cells))
    total_cells = 0.0
    for cell in mu.cells:
        total_cells += cell.mass
        if cell.kind == "polar" and cell.is_ring:
            r1, r2 = cell.a_lo, cell.a_hi
            ring_area = math.pi * (r2 * r2 - r1 * r1)
            if ring_area <= 0:
                continue
            for i in range(n_cells):
                for j in range(n_cells):
                    a = _disk_rect_area(r2, xs[i], xs[i + 1], xs[j], xs[j + 1]) - _disk_rect_area(
                        r1, xs[i], xs[i + 1], xs[j], xs[j + 1]
                    )
                    if a > 0:
                        masses[i, j] += cell.mass * a / ring_area
        else:
            for i in range(n_cells):
                for j in range(n_cells):
                    m = overlap_mass(cell, Rectangle(xs[i], xs[i + 1], xs[j], xs[j + 1]))
                    if m > 0:
                        masses[i, j] += m
    got = masses.sum()
    if got > 0:
        masses *= total_cells / got
    cells = [
        PlanarCell("cart", xs[i], xs[i + 1], xs[j], xs[j + 1], masses[i, j])
        for i in range(n_cells)
        for j in range(n_cells)
        if masses[i, j] > 0
    ]
    return DiskMeasure(mu.atoms_z.copy(), mu.atoms_mass.copy(), tuple(cells))


def partition_and_atomize_square(
    nu: DiskMeasure,
    bounds: Rectangle,
    p: int = 2,
    cell_tag: int = -2,
) -> tuple[list[AtomizedCell], list[PartitionLeaf]]:
    """Halve, partition on the square, rescale leaves to mass p, atomize."""
    rect = box_cartesian(nu.scaled(1.0 / p), bounds.x_lo, bounds.x_hi, bounds.y_lo, bounds.y_hi)
    leaves = balanced_partition(rect)
    out: list[AtomizedCell] = []
    for i, leaf in enumerate(leaves):
        piece = leaf.rect.to_measure().scaled(float(p))
        aset, data = atomize_piece(piece, p, cell_tag, i)
        out.append(AtomizedCell(cell_tag, i, piece, aset, data, leaf))
    return out, leaves


def numeric_smooth_at(field_fn: Callable[[np.ndarray], np.ndarray], a: complex, mult: int, r_probe: float) -> float:
    """Regular part of the field at a zero: average of field + mult*log|z-a|
    over four probe points (the log singularity cancels in pairs)."""
    ph = np.exp(1j * np.array([0.0, 0.5, 1.0, 1.5]) * math.pi)
    z = a + r_probe * ph
    vals = np.asarray(field_fn(z), dtype=float) + mult * np.log(np.abs(z - a))
    vals = vals[np.isfinite(vals)]
    return float(np.mean(vals)) if vals.size else 0.0


# ---------------------------------------------------------------------------
# Disk mode
# ---------------------------------------------------------------------------


@dataclass
class DiskRunResult:
    scheme: AnnularScheme
    measure: DiskMeasure
    heavy: list[tuple[complex, int]]
    jobs: list[CellJob]
    annular_cells: list[AtomizedCell]
    central_cells: list[AtomizedCell]
    central_rho0: float
    central_N: int
    fractional: DiskMeasure
    shell: DiskMeasure
    atoms: AtomSet
    report: SweepReport
    radial_edges: np.ndarray
    annulus_of_band: np.ndarray
    dropped_mass: float

    def field_fn(self) -> Callable[[np.ndarray], np.ndarray]:
        terms = self._terms
        def fn(z):
            out = np.zeros(np.shape(z))
            for t in terms:
                out = out + t.evaluate(np.asarray(z, dtype=complex))
            return out
        return fn


def disk_radial_edges(scheme: AnnularScheme, central_bands: int, per_annulus: int) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature bands: uniform inside the core, aligned with the annuli
    outside. Returns (edges, annulus index per band; -1 central)."""
    core = np.linspace(0.0, scheme.r_inner, central_bands + 1)
    edges = [core]
    ann_idx = [np.full(central_bands, -1, dtype=int)]
    for n in range(scheme.depth):
        sub = np.linspace(scheme.radii[n], scheme.radii[n + 1], per_annulus + 1)[1:]
        edges.append(sub)
        ann_idx.append(np.full(per_annulus, n, dtype=int))
    return np.concatenate(edges), np.concatenate(ann_idx)


def run_disk(
    mu: DiskMeasure,
    q: float = 0.99,
    depth: int = 100,
    central_bands: int = 48,
    per_annulus: int = 1,
    n_theta: int = 64,
    central_cart_cells: int = 32,
) -> DiskRunResult:
    scheme = build_scheme(q, depth)
    heavy, nu = extract_heavy_atoms(mu)
    central, annular, dropped = split_by_radius(nu, scheme.r_inner, scheme.r_outer)
    jobs, fractional = split_scheme_measure(annular, scheme)

    annular_cells: list[AtomizedCell] = []
    for job in jobs:
        sector = scheme.cell_sector(job.cid.n, job.cid.m)
        rect = box_log_sector(
            job.piece.scaled(0.5), sector.r_lo, sector.r_hi, sector.th_lo, sector.th_hi
        )
        for leaf in balanced_partition(rect):
            piece = leaf.rect.to_measure().scaled(2.0)
            aset, data = atomize_piece(piece, 2, job.cid.n, job.cid.m)
            annular_cells.append(AtomizedCell(job.cid.n, job.cid.m, piece, aset, data, leaf))

    inner, shell, rho0, N_c = central_split(central, scheme.r_inner)
    central_cells: list[AtomizedCell] = []
    if N_c >= 2:
        inner_cart = cartesianize(inner, central_cart_cells)
        half = scheme.r_inner
        central_cells, _ = partition_and_atomize_square(
            inner_cart, Rectangle(-half, half, -half, half), p=2, cell_tag=-2
        )

    heavy_set = (
        AtomSet.build(
            [a for a, _ in heavy],
            mults=[k for _, k in heavy],
            cell_n=[-1] * len(heavy),
            cell_m=list(range(len(heavy))),
        )
        if heavy
        else AtomSet.empty()
    )
    all_atoms = AtomSet.concat(
        heavy_set,
        *(c.atoms for c in central_cells),
        *(c.atoms for c in annular_cells),
    )

    terms: list[FieldTerm] = []
    if annular_cells:
        terms.append(
            cell_difference_term("V", [(c.piece, c.atoms.points) for c in annular_cells], GreenDisk)
        )
    if not fractional.is_zero():
        terms.append(potential_term("u2", fractional, WeierstrassE))
    if central_cells:
        terms.append(
            cell_difference_term(
                "omega", [(c.piece, c.atoms.points) for c in central_cells], PlanarLog
            )
        )
    if not shell.is_zero():
        terms.append(potential_term("v2", shell, PlanarLog))

    edges, ann_of_band = disk_radial_edges(scheme, central_bands, per_annulus)
    report = error_field(terms, edges, n_theta, all_atoms, kernel_name="green")
    result = DiskRunResult(
        scheme=scheme,
        measure=mu,
        heavy=heavy,
        jobs=jobs,
        annular_cells=annular_cells,
        central_cells=central_cells,
        central_rho0=rho0,
        central_N=N_c,
        fractional=fractional,
        shell=shell,
        atoms=all_atoms,
        report=report,
        radial_edges=edges,
        annulus_of_band=ann_of_band,
        dropped_mass=dropped,
    )
    result._terms = terms
    return result


def cumulative_l1_by_annulus(result: DiskRunResult, component: str | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(annulus indices 0..depth-1, I(R_{n+1})): cumulative integral of the
    |field| (or one component) over |z| <= R_{n+1}.

    Zero neighborhoods get the closed-form log integral only for the full
    field; single components carry no zero singularities."""
    from .potential import _abs_log_disk_integral, _atom_local_radius

    rep = result.report
    vals = rep.total if component is None else rep.component_or_zero(component)
    finite = np.isfinite(vals)
    contrib = np.where(finite, np.abs(np.where(finite, vals, 0.0)) * rep.weights, 0.0)
    band_sums = np.zeros(len(rep.radial_edges) - 1)
    np.add.at(band_sums, rep.ring_index, contrib)
    if component is None:
        fn = result.field_fn()
        for a, mult in zip(rep.atoms.points, rep.atoms.mults):
            band = int(np.clip(np.searchsorted(rep.radial_edges, abs(a)) - 1, 0, len(band_sums) - 1))
            ra = _atom_local_radius(rep, complex(a))
            near = np.abs(rep.samples - a) < ra
            if near.any():
                np.add.at(band_sums, rep.ring_index[near], -contrib[near])
            s = numeric_smooth_at(fn, complex(a), int(mult), 0.5 * ra)
            band_sums[band] += _abs_log_disk_integral(s, float(mult), ra)
    cum_bands = np.cumsum(band_sums)
    out = np.zeros(result.scheme.depth)
    for n in range(result.scheme.depth):
        idx = np.where(result.annulus_of_band <= n)[0]
        out[n] = cum_bands[idx[-1]] if idx.size else 0.0
    return np.arange(result.scheme.depth), out


# ---------------------------------------------------------------------------
# Square mode
# ---------------------------------------------------------------------------

UNIT_SQUARE = Rectangle(-0.5, 0.5, -0.5, 0.5)
DOUBLE_SQUARE = Rectangle(-1.0, 1.0, -1.0, 1.0)


@dataclass
class SquareRunResult:
    measure: DiskMeasure
    heavy: list[tuple[complex, int]]
    cells: list[AtomizedCell]
    leaves: list[PartitionLeaf]
    odd_remainder: DiskMeasure
    atoms: AtomSet
    grid: tuple[np.ndarray, np.ndarray]
    values: np.ndarray
    l1_error: float

    def zero_count(self) -> int:
        return self.atoms.total


def run_square(mu: DiskMeasure, grid_n: int = 96, p: int = 2) -> SquareRunResult:
    total = mu.total_mass
    N = int(round(total))
    if abs(total - N) > 1e-9 * max(N, 1):
        raise ValueError(f"square mode needs integer mass, got {total}")
    heavy, nu = extract_heavy_atoms(mu)
    n_prime = nu.total_mass
    Np = int(round(n_prime))
    odd_remainder = DiskMeasure.zero()
    nu_even = nu
    if Np % p != 0:
        # peel a proportional probability-measure share so the rest divides p
        keep = (Np // p) * p
        if keep == 0:
            odd_remainder = nu
            nu_even = DiskMeasure.zero()
        else:
            odd_remainder = nu.scaled((Np - keep) / Np)
            nu_even = nu.scaled(keep / Np)
    cells: list[AtomizedCell] = []
    leaves: list[PartitionLeaf] = []
    if not nu_even.is_zero():
        cells, leaves = partition_and_atomize_square(nu_even, UNIT_SQUARE, p=p, cell_tag=-2)
    heavy_set = (
        AtomSet.build(
            [a for a, _ in heavy], mults=[k for _, k in heavy], cell_n=[-1] * len(heavy)
        )
        if heavy
        else AtomSet.empty()
    )
    atoms = AtomSet.concat(heavy_set, *(c.atoms for c in cells))

    terms: list[FieldTerm] = []
    if cells:
        terms.append(cell_difference_term("omega", [(c.piece, c.atoms.points) for c in cells], PlanarLog))
    if not odd_remainder.is_zero():
        terms.append(potential_term("omega_rem", odd_remainder, PlanarLog))
    Z, W = cart_grid(-1.0, 1.0, -1.0, 1.0, grid_n, grid_n)
    values = np.zeros(Z.shape)
    for t in terms:
        values = values + t.evaluate(Z)

    def field_fn(z):
        out = np.zeros(np.shape(z))
        for t in terms:
            out = out + t.evaluate(np.asarray(z, dtype=complex))
        return out

    cell_diag = math.hypot(2.0 / grid_n, 2.0 / grid_n)
    # heavy zeros cancel exactly against their own potential: corrections
    # apply only to the matched points
    matched = AtomSet.concat(*(c.atoms for c in cells)) if cells else AtomSet.empty()
    l1 = l1_error_square(
        values,
        Z,
        W,
        matched,
        cell_diag,
        smooth_at_atoms=lambda a, m: numeric_smooth_at(field_fn, a, m, 0.25 * cell_diag),
    )
    return SquareRunResult(
        measure=mu,
        heavy=heavy,
        cells=cells,
        leaves=leaves,
        odd_remainder=odd_remainder,
        atoms=atoms,
        grid=(Z, W),
        values=values,
        l1_error=l1,
    )


# ---------------------------------------------------------------------------
# Curve mode
# ---------------------------------------------------------------------------


@dataclass
class CurveRunResult:
    curve: CurveProfile
    po: ProximateOrder
    delta: float
    p: int
    radii: np.ndarray
    cells: list[CurveCell]
    atomized: list[AtomizedCell]
    remainder: DiskMeasure
    atoms: AtomSet
    b: Callable[[np.ndarray], np.ndarray]
    terms: list[FieldTerm]

    def field_fn(self) -> Callable[[np.ndarray], np.ndarray]:
        def fn(z):
            out = np.zeros(np.shape(z))
            for t in self.terms:
                out = out + t.evaluate(np.asarray(z, dtype=complex))
            return out

        return fn

    def u_evaluator(self) -> Callable[[np.ndarray], np.ndarray]:
        full = DiskMeasure.combine(*(c.piece for c in self.cells), self.remainder)
        ev = PotentialEvaluator(full, GreenDisk)
        return lambda z: ev(np.asarray(z, dtype=complex))

    def logf_evaluator(self) -> Callable[[np.ndarray], np.ndarray]:
        return lambda z: eval_atom_sum(self.atoms, GreenDisk, np.asarray(z, dtype=complex))


def run_curve(
    sigma: float = 1.0,
    delta: float = 1.0,
    K: float = 0.5,
    p: int = 2,
    n_max: int = 100,
    theta0: float = 0.0,
    slope: float = 0.0,
    r_start: float = 0.05,
    po: ProximateOrder | None = None,
) -> CurveRunResult:
    po = po or ProximateOrder(sigma)
    radii = radii_sequence(delta, po, n_max, mass_step=float(p))
    curve = power_curve(delta, sigma, r_lo=r_start, r_hi=float(radii[-1]), theta0=theta0, slope=slope)
    cells = build_curve_cells(curve, po, delta, K, n_max, p=p)
    atomized: list[AtomizedCell] = []
    for cell in cells:
        aset, data = atomize_piece(cell.piece, p, cell.n, 0)
        atomized.append(AtomizedCell(cell.n, 0, cell.piece, aset, data))
    from .measure import _clip_curve

    remainder = DiskMeasure.from_curve(_clip_curve(curve, curve.r_lo, float(radii[0])))
    atoms = AtomSet.concat(*(c.atoms for c in atomized)) if atomized else AtomSet.empty()
    terms = [
        cell_difference_term("V", [(c.piece, c.atoms.points) for c in atomized], GreenDisk),
    ]
    if remainder.total_mass > 0:
        terms.append(potential_term("tilde", remainder, GreenDisk))
    return CurveRunResult(
        curve=curve,
        po=po,
        delta=delta,
        p=p,
        radii=radii,
        cells=cells,
        atomized=atomized,
        remainder=remainder,
        atoms=atoms,
        b=b_from_order(po),
        terms=terms,
    )


def curve_sample_grid(
    result: CurveRunResult,
    per_band_radial: int = 2,
    base_angles: int = 48,
    near_angles: int = 48,
    probe_factors: Sequence[float] = (1.5, 3.0),
    eps: float = 0.5,
) -> tuple[np.ndarray, np.ndarray]:
    """Samples covering every cell band: uniform angles plus a cluster around
    the curve, plus rings around each zero just outside the exceptional set.

    Returns (samples, band index)."""
    zs: list[np.ndarray] = []
    bands: list[np.ndarray] = []
    for cell in result.cells:
        rs = np.linspace(cell.r_lo, cell.r_hi, per_band_radial + 2)[1:-1]
        th_u = (np.arange(base_angles) + 0.5) * TWO_PI / base_angles
        width = max(cell.th_hi - cell.th_lo, 1e-12)
        th_n = cell.th_lo - width + (np.arange(near_angles) + 0.5) * (3 * width) / near_angles
        th = np.concatenate([th_u, th_n])
        Z = (rs[:, None] * np.exp(1j * th[None, :])).ravel()
        zs.append(Z)
        bands.append(np.full(Z.size, cell.n - 1, dtype=int))
    pts = result.atoms.points
    if pts.size:
        b_at = np.asarray(result.b(np.abs(pts)))
        band_of_atom = np.clip(np.searchsorted(result.radii, np.abs(pts)) - 1, 0, len(result.cells) - 1)
        for f in probe_factors:
            ph = np.exp(1j * TWO_PI * (np.arange(8) + 0.3) / 8)
            ring = (pts[:, None] + (f * eps * b_at)[:, None] * ph[None, :]).ravel()
            zs.append(ring)
            bands.append(np.repeat(band_of_atom, 8))
    Z = np.concatenate(zs)
    B = np.concatenate(bands)
    keep = np.abs(Z) < 1.0
    return Z[keep], B[keep]
