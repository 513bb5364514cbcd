"""Annular-sector decomposition of the unit disk and per-cell mass splitting.

Radii follow R_n = 1 - q^n/2 for a ratio q in (0,1) passing the validity
gate sum_{j<=12} q^j > 11; each annulus is cut into M_n equal sectors with
M_n = floor(2*pi / log(R_{n+1}/R_n)), so the log-image of every sector is
close to a square far out. Cell measures are split into an even-integer
part (to be replaced by zeros in pairs) and a fractional part below 2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .measure import (
    Annulus,
    ClosedDisk,
    DiskMeasure,
    PlanarCell,
    Sector,
    TWO_PI,
    overlap_mass,
    restrict,
    total_mass,
)


class InvalidQ(ValueError):
    pass


class OutOfRange(ValueError):
    pass


def validate_q(q: float) -> bool:
    """Gate on the annulus ratio: sum_{j=1}^{12} q^j must exceed 11."""
    if not (0.0 < q < 1.0):
        return False
    return sum(q**j for j in range(1, 13)) > 11.0


@dataclass(frozen=True)
class CellId:
    n: int
    m: int


@dataclass(frozen=True)
class LogRectangle:
    """Log-coordinate image of a closed annular sector."""

    sigma_lo: float
    sigma_hi: float
    t_lo: float
    t_hi: float

    @property
    def side_ratio(self) -> float:
        a = self.sigma_hi - self.sigma_lo
        b = self.t_hi - self.t_lo
        return max(a, b) / min(a, b)


@dataclass(frozen=True)
class AnnularScheme:
    q: float
    depth: int
    radii: np.ndarray  # R_0 .. R_depth
    sectors: np.ndarray  # M_0 .. M_{depth-1}

    @property
    def r_inner(self) -> float:
        return float(self.radii[0])

    @property
    def r_outer(self) -> float:
        return float(self.radii[-1])

    def annulus_index(self, r: float) -> int:
        radii = self.radii
        if r < radii[0] or r >= radii[-1]:
            raise OutOfRange(f"radius {r} outside [{radii[0]}, {radii[-1]})")
        n = int(np.searchsorted(radii, r, side="right") - 1)
        return min(max(n, 0), self.depth - 1)

    def cell_sector(self, n: int, m: int) -> Sector:
        M = int(self.sectors[n])
        th = TWO_PI / M
        return Sector(float(self.radii[n]), float(self.radii[n + 1]), m * th, (m + 1) * th)

    def cell_log_rectangle(self, cid: CellId) -> LogRectangle:
        M = int(self.sectors[cid.n])
        th = TWO_PI / M
        return LogRectangle(
            math.log(self.radii[cid.n]),
            math.log(self.radii[cid.n + 1]),
            cid.m * th,
            (cid.m + 1) * th,
        )


def build_scheme(q: float, depth: int) -> AnnularScheme:
    """Radii and sector counts for ``depth`` annuli starting at R_0 = 1/2."""
    if not validate_q(q):
        raise InvalidQ(f"q={q} fails the validity gate sum q^j > 11")
    if depth < 1:
        raise InvalidQ("depth must be >= 1")
    n = np.arange(depth + 1)
    radii = 1.0 - 0.5 * q**n
    ratios = np.log(radii[1:] / radii[:-1])
    sectors = np.floor(TWO_PI / ratios).astype(int)
    if np.any(sectors < 1):
        raise InvalidQ("sector count fell below 1; q too small for this depth")
    return AnnularScheme(q=q, depth=depth, radii=radii, sectors=sectors)


_ANGLE_SNAP = 1e-12


def cell_of(scheme: AnnularScheme, z: complex) -> CellId:
    """Cell containing z; half-open in radius and angle so cells tile."""
    r = abs(z)
    n = scheme.annulus_index(r)
    M = int(scheme.sectors[n])
    ang = math.atan2(z.imag, z.real)
    if ang < 0:
        ang += TWO_PI
    pos = ang / (TWO_PI / M)
    m = int(math.floor(pos))
    # snap float noise at sector boundaries onto the half-open convention
    if pos - m > 1 - _ANGLE_SNAP * M:
        m += 1
    if m >= M:
        m = 0
    return CellId(n=n, m=m)


def even_floor(x: float) -> int:
    """Largest even integer <= x (snaps within 1e-9 of an even integer)."""
    k = 2 * int(math.floor(x / 2.0 + 1e-9))
    if k > x + 1e-9:
        k -= 2
    return max(k, 0)


def split_cell_measure(mu_cell: DiskMeasure) -> tuple[DiskMeasure, DiskMeasure]:
    """Split a cell-restricted measure into (even-integer part, rest < 2).

    The even part is peeled greedily: atoms first (largest mass first), then
    density cells scanned in increasing angle, splitting the last cell.
    """
    total = mu_cell.total_mass
    target = even_floor(total)
    if target == 0:
        return DiskMeasure.zero(), mu_cell
    remaining = float(target)
    part_atoms_z: list[complex] = []
    part_atoms_m: list[float] = []
    rest_atoms_z: list[complex] = []
    rest_atoms_m: list[float] = []
    order = np.argsort(-mu_cell.atoms_mass) if mu_cell.atoms_z.size else []
    for i in order:
        m = float(mu_cell.atoms_mass[i])
        z = complex(mu_cell.atoms_z[i])
        take = min(m, remaining)
        if take > 0:
            part_atoms_z.append(z)
            part_atoms_m.append(take)
            remaining -= take
        if m - take > 0:
            rest_atoms_z.append(z)
            rest_atoms_m.append(m - take)
    part_cells: list[PlanarCell] = []
    rest_cells: list[PlanarCell] = []

    def cell_angle(c: PlanarCell) -> float:
        return c.b_lo if c.kind == "polar" else math.atan2(c.centroid().imag, c.centroid().real)

    for cell in sorted(mu_cell.cells, key=cell_angle):
        if remaining <= 0:
            rest_cells.append(cell)
            continue
        if cell.mass <= remaining:
            part_cells.append(cell)
            remaining -= cell.mass
        else:
            # split the cell along its angular side at the exact fill level
            # (angular marginal is linear, so the cut position is closed form)
            axis = 1 if cell.kind == "polar" else 0
            lo, hi = (cell.b_lo, cell.b_hi) if axis == 1 else (cell.a_lo, cell.a_hi)
            c = lo + (remaining / cell.mass) * (hi - lo)
            taken, left = cell.split(axis, c)
            taken = PlanarCell(taken.kind, taken.a_lo, taken.a_hi, taken.b_lo, taken.b_hi, remaining)
            left = PlanarCell(left.kind, left.a_lo, left.a_hi, left.b_lo, left.b_hi, cell.mass - remaining)
            part_cells.append(taken)
            rest_cells.append(left)
            remaining = 0.0
    if mu_cell.curves:
        raise ValueError("cell measures must be atom/lattice form; rasterize curves first")
    part = DiskMeasure(np.array(part_atoms_z, complex), np.array(part_atoms_m), tuple(part_cells))
    rest = DiskMeasure(np.array(rest_atoms_z, complex), np.array(rest_atoms_m), tuple(rest_cells))
    return part, rest


def central_split(mu: DiskMeasure, radius: float = 0.5) -> tuple[DiskMeasure, DiskMeasure, float, int]:
    """Split a centrally supported measure at the smallest radius capturing
    the largest even integer below its count.

    Returns (inner part of mass N, shell part of mass < 2, rho0, N).
    """
    count = total_mass(mu, ClosedDisk(0j, radius))
    N = even_floor(count)
    if N == 0:
        return DiskMeasure.zero(), mu, 0.0, 0
    lo, hi = 0.0, radius

    def n_of(r: float) -> float:
        return total_mass(mu, ClosedDisk(0j, r))

    if n_of(0.0) >= N:
        rho0 = 0.0
    else:
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if n_of(mid) >= N:
                hi = mid
            else:
                lo = mid
        rho0 = hi
    inner = restrict(mu, ClosedDisk(0j, rho0))
    inner_mass = inner.total_mass
    # mass sitting exactly on the boundary circle may overshoot the target;
    # shave the excess back into the shell (numeric degeneracy rule)
    excess = inner_mass - N
    shell = _complement_at_radius(mu, inner, rho0)
    if excess > 1e-12:
        inner, shaved = _shave_boundary(inner, rho0, excess)
        shell = DiskMeasure.combine(shell, shaved)
    return inner, shell, rho0, N


def _complement_at_radius(mu: DiskMeasure, inner: DiskMeasure, rho0: float) -> DiskMeasure:
    keep = np.abs(mu.atoms_z) > rho0 * (1 + 1e-15) if mu.atoms_z.size else np.empty(0, bool)
    cells = []
    for cell in mu.cells:
        for part in cell.region_parts(Annulus(rho0, np.inf)):
            cells.append(part)
    curves = []
    for curve in mu.curves:
        if curve.r_hi > rho0:
            from .measure import _clip_curve

            curves.append(_clip_curve(curve, max(curve.r_lo, rho0), curve.r_hi))
    return DiskMeasure(
        mu.atoms_z[keep] if mu.atoms_z.size else np.empty(0, complex),
        mu.atoms_mass[keep] if mu.atoms_z.size else np.empty(0),
        tuple(cells),
        tuple(curves),
    )


def _shave_boundary(inner: DiskMeasure, rho0: float, excess: float) -> tuple[DiskMeasure, DiskMeasure]:
    """Move ``excess`` mass sitting at |z| ~ rho0 out of ``inner``."""
    atoms_m = inner.atoms_mass.copy()
    shaved_z: list[complex] = []
    shaved_m: list[float] = []
    if inner.atoms_z.size:
        on_boundary = np.where(np.abs(np.abs(inner.atoms_z) - rho0) <= 1e-12 * max(rho0, 1.0))[0]
        for i in on_boundary:
            if excess <= 1e-15:
                break
            take = min(float(atoms_m[i]), excess)
            atoms_m[i] -= take
            shaved_z.append(complex(inner.atoms_z[i]))
            shaved_m.append(take)
            excess -= take
    keep = atoms_m > 0
    out = DiskMeasure(inner.atoms_z[keep], atoms_m[keep], inner.cells, inner.curves)
    shaved = DiskMeasure.from_atoms(shaved_z, shaved_m) if shaved_m else DiskMeasure.zero()
    return out, shaved


@dataclass(frozen=True)
class CellJob:
    """Even-integer measure piece of one annular cell, ready for partitioning."""

    cid: CellId
    even_mass: int
    piece: DiskMeasure


def split_scheme_measure(
    mu: DiskMeasure, scheme: AnnularScheme
) -> tuple[list[CellJob], DiskMeasure]:
    """Per-cell even/fractional split across the whole scheme.

    ``mu`` must be supported in the scheme's annular shell. Annuli whose
    total mass (plus angular overlap slack) cannot reach 2 in any sector are
    short-circuited into the fractional remainder untouched.
    """
    jobs: list[CellJob] = []
    frac_parts: list[DiskMeasure] = [DiskMeasure(mu.atoms_z[:0], mu.atoms_mass[:0])]
    # bucket cells and atoms by annulus
    radii = scheme.radii
    atom_r = np.abs(mu.atoms_z)
    for n in range(scheme.depth):
        ann = Annulus(float(radii[n]), float(radii[n + 1]))
        sel = (atom_r >= radii[n]) & (atom_r < radii[n + 1]) if mu.atoms_z.size else np.empty(0, bool)
        band_cells = []
        for cell in mu.cells:
            parts = cell.region_parts(ann) if not _within_band(cell, radii[n], radii[n + 1]) else [cell]
            band_cells.extend(p for p in parts if p.mass > 0)
        band_atoms_z = mu.atoms_z[sel] if mu.atoms_z.size else np.empty(0, complex)
        band_atoms_m = mu.atoms_mass[sel] if mu.atoms_z.size else np.empty(0)
        band_mass = float(band_atoms_m.sum() + sum(c.mass for c in band_cells))
        M = int(scheme.sectors[n])
        if band_mass <= 0:
            continue
        band = DiskMeasure(band_atoms_z, band_atoms_m, tuple(band_cells))
        # conservative cap on the mass any single sector could hold: atoms may
        # cluster, each cell contributes at most its angular-window fraction
        theta_w = TWO_PI / M
        cap = float(band_atoms_m.sum())
        for c in band_cells:
            if c.kind == "polar":
                width = max(c.b_hi - c.b_lo, 1e-300)
                cap += c.mass * min(1.0, theta_w / width)
            else:
                cap += c.mass
        if cap < 2.0 - 1e-9:
            frac_parts.append(band)
            continue
        for m in range(M):
            sector = scheme.cell_sector(n, m)
            cell_mu = restrict(band, sector)
            if cell_mu.total_mass < 2.0 - 1e-12:
                frac_parts.append(cell_mu)
                continue
            even, rest = split_cell_measure(cell_mu)
            ev = int(round(even.total_mass))
            if ev >= 2:
                jobs.append(CellJob(CellId(n, m), ev, even))
                frac_parts.append(rest)
            else:
                frac_parts.append(cell_mu)
    return jobs, DiskMeasure.combine(*frac_parts)


def _within_band(cell: PlanarCell, r_lo: float, r_hi: float) -> bool:
    from .measure import cell_radial_range

    a, b = cell_radial_range(cell)
    return a >= r_lo * (1 - 1e-15) and b <= r_hi * (1 + 1e-15)


def fractional_mass_bound(scheme: AnnularScheme, n: int) -> float:
    """Per-annulus cap on the fractional part: 13/((1-q)(1-R_n)) + 2."""
    return 13.0 / ((1.0 - scheme.q) * (1.0 - float(scheme.radii[n]))) + 2.0


def scheme_table(scheme: AnnularScheme) -> np.ndarray:
    """Rows (n, R_n, M_n) for CSV export."""
    rows = np.zeros((scheme.depth, 3))
    rows[:, 0] = np.arange(scheme.depth)
    rows[:, 1] = scheme.radii[:-1]
    rows[:, 2] = scheme.sectors
    return rows
