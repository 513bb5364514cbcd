"""Balanced partition of a rectangle-supported measure into unit-mass leaves.

Recursive bisection: each cut keeps one side, places the other cut inside
the middle third of the longer side at a position where the marginal
cumulative mass is a positive integer. Atoms sitting exactly on a cut line
are split between the two closed children so each child reaches integer
mass; this replaces the measure-theoretic degeneracy hypotheses with a
numeric rule. When no middle-third cut exists the cut nearest the middle
is taken and the leaf is flagged.

Cuts run either in cartesian coordinates or in log-polar coordinates
(x = log r, y = angle), so annular-sector cells partition in the plane
where they are nearly square.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .measure import DiskMeasure, PlanarCell, TWO_PI


class NonIntegerMass(ValueError):
    pass


class NoMiddleThirdCut(RuntimeError):
    pass


CUT_GOOD = 0  # longer side, middle third
CUT_SHORT = 1  # shorter side, middle third (aspect guard respected)
CUT_RELAXED = 2  # integer cut nearest the middle, outside the middle third

_POS_TOL = 1e-12


@dataclass(frozen=True)
class MassRectangle:
    """Rectangle in partition coordinates plus the measure piece it carries."""

    coords: str  # 'cart' | 'logpolar'
    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float
    atoms_xy: np.ndarray  # (n, 2) positions in partition coordinates
    atoms_mass: np.ndarray
    atoms_payload: np.ndarray  # original complex positions
    cells: tuple[PlanarCell, ...]

    @property
    def mass(self) -> float:
        return float(self.atoms_mass.sum() + sum(c.mass for c in self.cells))

    @property
    def sides(self) -> tuple[float, float]:
        return (self.x_hi - self.x_lo, self.y_hi - self.y_lo)

    @property
    def side_ratio(self) -> float:
        a, b = self.sides
        lo, hi = min(a, b), max(a, b)
        if hi <= 0:
            return 1.0
        if lo <= 0:
            return math.inf
        return hi / lo

    def to_measure(self) -> DiskMeasure:
        return DiskMeasure(self.atoms_payload.copy(), self.atoms_mass.copy(), self.cells)

    # -- marginals ---------------------------------------------------------

    def _cell_axis_bounds(self, cell: PlanarCell, axis: int) -> tuple[float, float]:
        if axis == 0:
            lo, hi = cell.a_lo, cell.a_hi
            if self.coords == "logpolar":
                return math.log(max(lo, 1e-300)), math.log(max(hi, 1e-300))
            return lo, hi
        return cell.b_lo, cell.b_hi

    def _cell_cut_native(self, axis: int, c: float) -> float:
        if axis == 0 and self.coords == "logpolar":
            return math.exp(c)
        return c

    def cumulative(self, axis: int, c: float) -> float:
        """Mass on the closed low side {coordinate <= c} of the cut line."""
        total = 0.0
        if self.atoms_mass.size:
            total += float(self.atoms_mass[self.atoms_xy[:, axis] <= c].sum())
        cn = self._cell_cut_native(axis, c)
        for cell in self.cells:
            total += cell.mass * cell.cut_fraction(axis, cn)
        return total

    def cut_position(self, axis: int, k: float, side: str = "left") -> float:
        """Smallest (side='left') or largest (side='right') coordinate where
        the marginal cumulative reaches/exceeds k (bisection to 1e-12)."""
        lo = self.x_lo if axis == 0 else self.y_lo
        hi = self.x_hi if axis == 0 else self.y_hi
        a, b = lo, hi
        for _ in range(60):
            mid = 0.5 * (a + b)
            g = self.cumulative(axis, mid)
            if (g >= k) if side == "left" else (g > k):
                b = mid
            else:
                a = mid
        return b

    # -- splitting ----------------------------------------------------------

    def split_at(self, axis: int, c: float, k: float) -> tuple["MassRectangle", "MassRectangle"]:
        """Split at coordinate ``c`` so the low side carries mass exactly k.

        Cells are cut proportionally (exact); atoms within snapping distance
        of the line are divided to make up the difference.
        """
        span = (self.x_hi - self.x_lo) if axis == 0 else (self.y_hi - self.y_lo)
        snap = _POS_TOL * max(span, 1.0)
        lo_atoms: list[tuple[float, float, float, complex]] = []
        hi_atoms: list[tuple[float, float, float, complex]] = []
        on_line: list[int] = []
        xs = self.atoms_xy
        low_mass = 0.0
        for i in range(len(self.atoms_mass)):
            x = xs[i, axis]
            if x < c - snap:
                lo_atoms.append((xs[i, 0], xs[i, 1], self.atoms_mass[i], self.atoms_payload[i]))
                low_mass += self.atoms_mass[i]
            elif x > c + snap:
                hi_atoms.append((xs[i, 0], xs[i, 1], self.atoms_mass[i], self.atoms_payload[i]))
            else:
                on_line.append(i)
        lo_cells: list[PlanarCell] = []
        hi_cells: list[PlanarCell] = []
        cn = self._cell_cut_native(axis, c)
        for cell in self.cells:
            a, b = cell.split(axis, cn)
            if a.mass > 0:
                lo_cells.append(a)
            if b.mass > 0:
                hi_cells.append(b)
            low_mass += a.mass
        # distribute on-line atom mass to hit the target exactly
        need = k - low_mass
        for i in on_line:
            m = float(self.atoms_mass[i])
            take = min(max(need, 0.0), m)
            if take > 0:
                lo_atoms.append((xs[i, 0], xs[i, 1], take, self.atoms_payload[i]))
            if m - take > 0:
                hi_atoms.append((xs[i, 0], xs[i, 1], m - take, self.atoms_payload[i]))
            need -= take

        def build(atoms, cells, lo_side: bool) -> MassRectangle:
            if atoms:
                arr = np.array([(a[0], a[1]) for a in atoms])
                masses = np.array([a[2] for a in atoms])
                payload = np.array([a[3] for a in atoms], dtype=complex)
            else:
                arr = np.empty((0, 2))
                masses = np.empty(0)
                payload = np.empty(0, dtype=complex)
            kw = dict(
                coords=self.coords,
                atoms_xy=arr,
                atoms_mass=masses,
                atoms_payload=payload,
                cells=tuple(cells),
            )
            if axis == 0:
                return MassRectangle(
                    x_lo=self.x_lo if lo_side else c,
                    x_hi=c if lo_side else self.x_hi,
                    y_lo=self.y_lo,
                    y_hi=self.y_hi,
                    **kw,
                )
            return MassRectangle(
                x_lo=self.x_lo,
                x_hi=self.x_hi,
                y_lo=self.y_lo if lo_side else c,
                y_hi=c if lo_side else self.y_hi,
                **kw,
            )

        return build(lo_atoms, lo_cells, True), build(hi_atoms, hi_cells, False)


@dataclass(frozen=True)
class PartitionLeaf:
    rect: MassRectangle
    depth: int
    cut_quality: int  # worst ancestor cut (CUT_GOOD/CUT_SHORT/CUT_RELAXED)

    @property
    def mass(self) -> float:
        return self.rect.mass

    @property
    def relaxed(self) -> bool:
        return self.cut_quality >= CUT_RELAXED


def find_cut(rect: MassRectangle, axis: int) -> tuple[float, int]:
    """Middle-third cut on ``axis``: returns (position, integer left mass).

    Raises NoMiddleThirdCut when no integer-mass position lies in the middle
    third of that side.
    """
    M = int(round(rect.mass))
    if M < 2:
        raise NonIntegerMass("cut requires integer mass >= 2")
    lo = rect.x_lo if axis == 0 else rect.y_lo
    hi = rect.x_hi if axis == 0 else rect.y_hi
    span = hi - lo
    mt_lo, mt_hi = lo + span / 3.0, lo + 2.0 * span / 3.0
    mid = lo + 0.5 * span
    g_lo = rect.cumulative(axis, mt_lo)
    g_hi = rect.cumulative(axis, mt_hi)
    k_min = max(1, int(math.ceil(g_lo - 1e-9)))
    k_max = min(M - 1, int(math.floor(g_hi + 1e-9)))
    best: tuple[float, float, int] | None = None  # (distance to mid, position, k)
    for k in range(k_min, k_max + 1):
        c_left = rect.cut_position(axis, k, "left")
        c_right = rect.cut_position(axis, k, "right")
        a = max(c_left, mt_lo)
        b = min(c_right, mt_hi)
        if b < a - 1e-13 * max(span, 1.0):
            continue
        c = min(max(mid, a), max(b, a))
        d = abs(c - mid) + 1e-9 * abs(k - M / 2.0) * span
        if best is None or d < best[0]:
            best = (d, c, k)
    if best is None:
        raise NoMiddleThirdCut(f"no integer-mass cut inside the middle third of axis {axis}")
    return best[1], best[2]


def _relaxed_cut(rect: MassRectangle, axis: int) -> tuple[float, int]:
    """Integer-mass cut nearest the middle of the side, no middle-third rule."""
    M = int(round(rect.mass))
    lo = rect.x_lo if axis == 0 else rect.y_lo
    hi = rect.x_hi if axis == 0 else rect.y_hi
    mid = 0.5 * (lo + hi)
    best: tuple[float, float, int] | None = None
    for k in range(1, M):
        c_left = rect.cut_position(axis, k, "left")
        c_right = rect.cut_position(axis, k, "right")
        c = min(max(mid, c_left), max(c_right, c_left))
        d = abs(c - mid)
        if best is None or d < best[0]:
            best = (d, c, k)
    assert best is not None
    return best[1], best[2]


def balanced_partition(
    rect: MassRectangle, l0: float | None = None, mass_tol: float = 1e-9
) -> list[PartitionLeaf]:
    """Split an integer-mass rectangle measure into unit-mass leaves.

    Mass is conserved exactly; leaf interiors are pairwise disjoint by
    construction (children tile their parent along each cut line). The
    side-ratio of every unflagged leaf stays within [1/l, l], l = max(l0, 3);
    the shorter-side fallback is only taken when the children provably stay
    within 3*l.
    """
    total = rect.mass
    if abs(total - round(total)) > mass_tol * max(total, 1.0):
        raise NonIntegerMass(f"rectangle mass {total} is not an integer")
    if l0 is None:
        l0 = rect.side_ratio if math.isfinite(rect.side_ratio) else 1.0
    guard = max(l0, 3.0)
    leaves: list[PartitionLeaf] = []
    stack: list[tuple[MassRectangle, int, int]] = [(rect, 0, CUT_GOOD)]
    while stack:
        cur, depth, quality = stack.pop()
        M = int(round(cur.mass))
        if M <= 0:
            continue
        if M == 1:
            leaves.append(PartitionLeaf(cur, depth, quality))
            continue
        sx, sy = cur.sides
        if max(sx, sy) <= 1e-300:
            # point-supported piece: emit unit shares directly
            leaves.extend(_split_point_mass(cur, M, depth, quality))
            continue
        long_axis = 0 if sx >= sy else 1
        short_axis = 1 - long_axis
        cut: tuple[float, int] | None = None
        cut_quality = quality
        try:
            c, k = find_cut(cur, long_axis)
            cut = (c, k)
            axis = long_axis
        except NoMiddleThirdCut:
            cut = None
        if cut is None and min(sx, sy) > 0:
            try:
                c, k = find_cut(cur, short_axis)
                if _short_cut_ok(cur, short_axis, c, guard):
                    cut = (c, k)
                    axis = short_axis
                    cut_quality = max(quality, CUT_SHORT)
            except NoMiddleThirdCut:
                cut = None
        if cut is None:
            c, k = _relaxed_cut(cur, long_axis)
            axis = long_axis
            cut_quality = max(quality, CUT_RELAXED)
            cut = (c, k)
        c, k = cut
        lo_piece, hi_piece = cur.split_at(axis, c, float(k))
        stack.append((lo_piece, depth + 1, cut_quality))
        stack.append((hi_piece, depth + 1, cut_quality))
    return leaves


def _short_cut_ok(rect: MassRectangle, axis: int, c: float, guard: float) -> bool:
    sx, sy = rect.sides
    long_len = max(sx, sy)
    piece_a = c - (rect.x_lo if axis == 0 else rect.y_lo)
    piece_b = (rect.x_hi if axis == 0 else rect.y_hi) - c
    short_piece = min(piece_a, piece_b)
    if short_piece <= 0:
        return False
    return long_len / short_piece <= 3.0 * guard


def _split_point_mass(rect: MassRectangle, M: int, depth: int, quality: int) -> list[PartitionLeaf]:
    out = []
    for _ in range(M):
        share_atoms = rect.atoms_mass / rect.mass if rect.atoms_mass.size else rect.atoms_mass
        piece = MassRectangle(
            coords=rect.coords,
            x_lo=rect.x_lo,
            x_hi=rect.x_hi,
            y_lo=rect.y_lo,
            y_hi=rect.y_hi,
            atoms_xy=rect.atoms_xy.copy(),
            atoms_mass=share_atoms.copy(),
            atoms_payload=rect.atoms_payload.copy(),
            cells=tuple(replace(cl, mass=cl.mass / rect.mass) for cl in rect.cells),
        )
        out.append(PartitionLeaf(piece, depth, quality))
    return out


# ---------------------------------------------------------------------------
# Boxing measures into partition coordinates
# ---------------------------------------------------------------------------


def box_cartesian(mu: DiskMeasure, x_lo: float, x_hi: float, y_lo: float, y_hi: float) -> MassRectangle:
    """Wrap a (cartesian-cell) measure for partitioning in the plane."""
    for cell in mu.cells:
        if cell.kind != "cart":
            raise ValueError("cartesian boxing requires cartesian cells")
    xy = (
        np.column_stack([mu.atoms_z.real, mu.atoms_z.imag])
        if mu.atoms_z.size
        else np.empty((0, 2))
    )
    return MassRectangle(
        coords="cart",
        x_lo=x_lo,
        x_hi=x_hi,
        y_lo=y_lo,
        y_hi=y_hi,
        atoms_xy=xy,
        atoms_mass=mu.atoms_mass.copy(),
        atoms_payload=mu.atoms_z.copy(),
        cells=mu.cells,
    )


def box_log_sector(mu: DiskMeasure, r_lo: float, r_hi: float, th_lo: float, th_hi: float) -> MassRectangle:
    """Wrap a sector-supported measure in log-polar coordinates.

    Angles are unwrapped into [th_lo, th_lo + 2*pi) so the sector window is a
    contiguous interval even when it straddles the branch cut.
    """
    for cell in mu.cells:
        if cell.kind != "polar":
            raise ValueError("log-polar boxing requires polar cells")
    if mu.atoms_z.size:
        ang = np.angle(mu.atoms_z)
        ang = th_lo + np.mod(ang - th_lo, TWO_PI)
        # atoms exactly at the upper seam belong to the window start
        ang = np.where(ang > th_hi + 1e-12, ang - TWO_PI, ang)
        xy = np.column_stack([np.log(np.abs(mu.atoms_z)), ang])
    else:
        xy = np.empty((0, 2))
    cells = []
    for cell in mu.cells:
        b_lo = th_lo + math.fmod(cell.b_lo - th_lo, TWO_PI)
        if b_lo < th_lo:
            b_lo += TWO_PI
        width = cell.b_hi - cell.b_lo
        cells.append(replace(cell, b_lo=b_lo, b_hi=b_lo + width))
    return MassRectangle(
        coords="logpolar",
        x_lo=math.log(r_lo),
        x_hi=math.log(r_hi),
        y_lo=th_lo,
        y_hi=th_hi,
        atoms_xy=xy,
        atoms_mass=mu.atoms_mass.copy(),
        atoms_payload=mu.atoms_z.copy(),
        cells=tuple(cells),
    )
