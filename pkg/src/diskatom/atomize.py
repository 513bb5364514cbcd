"""Replace a mass-p measure piece by p points matching its first p moments.

Pipeline: centered power sums -> elementary symmetric polynomials (Newton's
identities) -> roots of the monic polynomial (companion matrix + Newton
polish), all in units of the piece diameter so coefficients stay O(1) even
for cells of size 1e-3 near the boundary.

Displacement constants: for p = 2 every solution satisfies
|point - center| <= diameter exactly; for p in {3, 4} the bound constant is
measured by a seeded randomized experiment (tools/calibrate_k1.py) with a
25% safety margin, and capped by the Rouche-type worst case.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .measure import DiskMeasure, cell_radial_range, moment_free


class MassMismatch(ValueError):
    pass


class RootFindingFailure(RuntimeError):
    pass


class BoundViolation(RuntimeError):
    pass


# Measured by tools/calibrate_k1.py (seed 20240817; 4000 random mass-p pieces
# for p in {3,4}, 1200 otherwise; worst observed ratio is (p-1)/p, attained by
# p-1 unit atoms at one end of a diameter and one at the other). Constants are
# the observed maxima with a 25% margin; p = 2 admits the exact bound 1.
K1_DISPLACEMENT = {
    1: 1.0,
    2: 1.0,
    3: 0.834,
    4: 0.938,
    5: 1.0,
    6: 1.042,
    7: 1.072,
    8: 1.094,
}

MAX_P = 8


@dataclass(frozen=True)
class MomentData:
    p: int
    center: complex
    power_sums: np.ndarray  # J_1..J_p (centered)
    diameter: float


def support_diameter(mu: DiskMeasure) -> float:
    """Diameter of the support proxy (atoms plus cell corners)."""
    pts: list[complex] = []
    if mu.atoms_z.size:
        pts.extend(complex(z) for z in mu.atoms_z)
    for cell in mu.cells:
        pts.extend(complex(z) for z in cell.corners())
    for curve in mu.curves:
        rs = np.linspace(curve.r_lo, curve.r_hi, 17)
        pts.extend(complex(z) for z in curve.point(rs))
    if len(pts) <= 1:
        return 0.0
    arr = np.array(pts)
    # exact max over the O(10^2) support proxy points
    diffs = np.abs(arr[:, None] - arr[None, :])
    return float(diffs.max())


def power_sums(mu_cell: DiskMeasure, p: int, center: complex | None = None) -> MomentData:
    """Centered power sums J_k of a mass-p piece about its center of mass."""
    if not (1 <= p <= MAX_P):
        raise MassMismatch(f"p={p} outside supported range 1..{MAX_P}")
    mass = mu_cell.total_mass
    if abs(mass - p) > 1e-9 * max(p, 1):
        raise MassMismatch(f"piece mass {mass} does not match p={p}")
    if center is None:
        center = moment_free(mu_cell, 1, 0j) / p
    J = np.array([moment_free(mu_cell, k, center) for k in range(1, p + 1)])
    d = support_diameter(mu_cell)
    return MomentData(p=p, center=complex(center), power_sums=J, diameter=d)


def newton_to_elementary(J: np.ndarray, p: int | None = None) -> np.ndarray:
    """Elementary symmetric polynomials e_1..e_p from power sums J_1..J_p."""
    J = np.asarray(J, dtype=complex)
    if p is None:
        p = len(J)
    e = np.zeros(p + 1, dtype=complex)
    e[0] = 1.0
    for k in range(1, p + 1):
        acc = 0j
        for i in range(1, k + 1):
            acc += (-1) ** (i - 1) * e[k - i] * J[i - 1]
        e[k] = acc / k
    return e[1:]


def _polish_roots(coeffs: np.ndarray, roots: np.ndarray, tol: float) -> np.ndarray:
    deriv = np.polyder(coeffs)
    out = roots.copy()
    for _ in range(40):
        vals = np.polyval(coeffs, out)
        if np.all(np.abs(vals) <= tol):
            break
        dv = np.polyval(deriv, out)
        step = np.where(np.abs(dv) > 1e-30, vals / np.where(dv == 0, 1, dv), 0)
        cand = out - step
        better = np.abs(np.polyval(coeffs, cand)) < np.abs(vals)
        out = np.where(better, cand, out)
        if not better.any():
            break
    return out


def atoms_from_moments(mu_cell: DiskMeasure, p: int, center: complex | None = None) -> tuple[np.ndarray, MomentData]:
    """The p points whose power sums match the piece's moments.

    Returns (points, moment data); points are center + diameter * roots of
    the scaled monic polynomial.
    """
    data = power_sums(mu_cell, p, center)
    return atoms_from_data(data), data


def atoms_from_data(data: MomentData) -> np.ndarray:
    p = data.p
    d = data.diameter
    if d <= 0:
        # concentrated piece: all moments vanish, p copies of the center
        return np.full(p, data.center, dtype=complex)
    Jh = data.power_sums / d ** np.arange(1, p + 1)
    eh = newton_to_elementary(Jh, p)
    coeffs = np.zeros(p + 1, dtype=complex)
    coeffs[0] = 1.0
    for i in range(1, p + 1):
        coeffs[i] = (-1) ** i * eh[i - 1]
    roots = np.roots(coeffs)
    if roots.size != p or not np.all(np.isfinite(roots)):
        raise RootFindingFailure(f"companion roots failed for p={p}")
    roots = _polish_roots(coeffs, roots, tol=1e-13 * p)
    if np.max(np.abs(np.polyval(coeffs, roots))) > 1e-6:
        raise RootFindingFailure("polynomial residual did not converge")
    return data.center + d * roots


def power_sum_residuals(points: np.ndarray, data: MomentData) -> np.ndarray:
    """|sum_j (xi_j - center)^k - J_k| for k = 1..p (centered system)."""
    w = np.asarray(points, dtype=complex) - data.center
    res = np.empty(data.p)
    for k in range(1, data.p + 1):
        res[k - 1] = abs(np.sum(w**k) - data.power_sums[k - 1])
    return res


def residual_tolerances(data: MomentData, rel: float = 1e-8) -> np.ndarray:
    k = np.arange(1, data.p + 1)
    scale = np.maximum(data.diameter**k, 1e-300)
    return rel * data.p * scale


def verify_atom_bound(points: np.ndarray, center: complex, diameter: float, p: int) -> float:
    """Max displacement ratio max_j |xi_j - center| / diameter.

    Raises BoundViolation above the per-p constant (exactly 1 for p = 2).
    """
    if diameter <= 0:
        return 0.0
    ratio = float(np.max(np.abs(np.asarray(points, dtype=complex) - center)) / diameter)
    limit = K1_DISPLACEMENT.get(p)
    if limit is None:
        raise BoundViolation(f"no displacement constant for p={p}")
    if ratio > limit * (1 + 1e-9):
        raise BoundViolation(f"displacement ratio {ratio:.6f} exceeds K1({p}) = {limit}")
    return ratio


# ---------------------------------------------------------------------------
# Atom sets
# ---------------------------------------------------------------------------


@dataclass
class AtomSet:
    """Zero set of the approximant: points with integer multiplicities,
    grouped by source cell (annulus/sector indices; -1 for extracted atoms,
    -2 for central-square zeros, band index for curve cells)."""

    points: np.ndarray
    mults: np.ndarray
    cell_n: np.ndarray
    cell_m: np.ndarray
    disp_ratio: np.ndarray

    @staticmethod
    def empty() -> "AtomSet":
        return AtomSet(
            np.empty(0, dtype=complex),
            np.empty(0, dtype=int),
            np.empty(0, dtype=int),
            np.empty(0, dtype=int),
            np.empty(0),
        )

    @staticmethod
    def build(points, mults=None, cell_n=None, cell_m=None, disp=None) -> "AtomSet":
        pts = np.asarray(points, dtype=complex)
        n = pts.size
        return AtomSet(
            pts,
            np.ones(n, dtype=int) if mults is None else np.asarray(mults, dtype=int),
            np.full(n, -1, dtype=int) if cell_n is None else np.asarray(cell_n, dtype=int),
            np.full(n, 0, dtype=int) if cell_m is None else np.asarray(cell_m, dtype=int),
            np.zeros(n) if disp is None else np.asarray(disp, dtype=float),
        )

    @staticmethod
    def concat(*sets: "AtomSet") -> "AtomSet":
        keep = [s for s in sets if s.points.size]
        if not keep:
            return AtomSet.empty()
        return AtomSet(
            np.concatenate([s.points for s in keep]),
            np.concatenate([s.mults for s in keep]),
            np.concatenate([s.cell_n for s in keep]),
            np.concatenate([s.cell_m for s in keep]),
            np.concatenate([s.disp_ratio for s in keep]),
        )

    @property
    def total(self) -> int:
        return int(self.mults.sum())

    def flat_points(self) -> np.ndarray:
        """Zero list with multiplicities expanded, for product evaluation."""
        if not self.points.size:
            return np.empty(0, dtype=complex)
        return np.repeat(self.points, self.mults)

    def max_radius(self) -> float:
        return float(np.abs(self.points).max()) if self.points.size else 0.0


def atomize_piece(
    mu_cell: DiskMeasure, p: int, cell_n: int = -1, cell_m: int = 0, check_bound: bool = True
) -> tuple[AtomSet, MomentData]:
    """Full per-cell atomization: moments, roots, displacement check."""
    pts, data = atoms_from_moments(mu_cell, p)
    ratio = (
        verify_atom_bound(pts, data.center, data.diameter, p)
        if check_bound
        else (
            float(np.max(np.abs(pts - data.center)) / data.diameter) if data.diameter > 0 else 0.0
        )
    )
    aset = AtomSet.build(
        pts,
        mults=np.ones(p, dtype=int),
        cell_n=np.full(p, cell_n, dtype=int),
        cell_m=np.full(p, cell_m, dtype=int),
        disp=np.full(p, ratio),
    )
    return aset, data
