"""Growth characteristics on circles and radial exceptional sets.

T(r, v) is the circle mean of the positive part of v; together with the
counting integral N(r) and the mean of the negative part it satisfies the
first-main identity m = T - N - v(0), which doubles as a quadrature check.
The radial density of a set E in [0,1) is the sup of the relative length of
E near the boundary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .measure import ClosedDisk, DiskMeasure, restrict, total_mass
from .potential import PlanarLog, eval_potential

TWO_PI = 2.0 * math.pi


def _circle_values(v: Callable[[np.ndarray], np.ndarray], r: float, n: int) -> np.ndarray:
    th = (np.arange(n) + 0.5) * TWO_PI / n
    return np.asarray(v(r * np.exp(1j * th)), dtype=float)


def _adaptive_circle_mean(
    f: Callable[[np.ndarray], np.ndarray],
    v: Callable[[np.ndarray], np.ndarray],
    r: float,
    n0: int = 1024,
    rel_tol: float = 0.005,
    n_max: int = 1 << 15,
) -> float:
    n = n0
    vals = _circle_values(v, r, n)
    prev = float(np.mean(f(vals[np.isfinite(vals)])))
    while n < n_max:
        n *= 2
        vals = _circle_values(v, r, n)
        cur = float(np.mean(f(vals[np.isfinite(vals)])))
        if abs(cur - prev) <= rel_tol * (abs(cur) + 1e-12):
            return cur
        prev = cur
    return prev


def circle_mean_plus(v: Callable[[np.ndarray], np.ndarray], r: float, **kw) -> float:
    """T(r, v): circle mean of max(v, 0), trapezoid with adaptive doubling."""
    return _adaptive_circle_mean(lambda x: np.maximum(x, 0.0), v, r, **kw)


def circle_mean_minus(v: Callable[[np.ndarray], np.ndarray], r: float, **kw) -> float:
    """m(r, v): circle mean of max(-v, 0)."""
    return _adaptive_circle_mean(lambda x: np.maximum(-x, 0.0), v, r, **kw)


def circle_abs_integral(v: Callable[[np.ndarray], np.ndarray], r: float, **kw) -> float:
    """Full-circle integral of |v| (not the mean)."""
    return TWO_PI * _adaptive_circle_mean(np.abs, v, r, **kw)


def counting_integral(mu: DiskMeasure, r: float) -> float:
    """N(r) = integral over |zeta| <= r of log(r/|zeta|) d mu.

    Equals the integral of n(t)/t for t up to r. Mass at the origin makes it
    diverge, which is rejected."""
    disk = ClosedDisk(0j, r)
    if mu.atoms_z.size and np.any((np.abs(mu.atoms_z) < 1e-300) & (mu.atoms_mass > 0)):
        raise ValueError("counting integral diverges: measure charges the origin")
    inner = restrict(mu, disk)
    mass = inner.total_mass
    if mass == 0:
        return 0.0
    pot0 = eval_potential(inner, PlanarLog, 0j)
    return mass * math.log(r) - float(pot0)


def first_main_identity_residual(
    v: Callable[[np.ndarray], np.ndarray],
    mu: DiskMeasure,
    r: float,
    v0: float | None = None,
    rel_tol: float = 1e-4,
    n0: int = 1 << 12,
) -> float:
    """|m(r,v) - T(r,v) + N(r) + v(0)|; quadrature-small when mu is v's
    Riesz measure."""
    if v0 is None:
        v0 = float(np.asarray(v(np.array([0j])))[0])
    if not math.isfinite(v0):
        raise ValueError("v(0) must be finite for the identity")
    T = circle_mean_plus(v, r, n0=n0, rel_tol=rel_tol)
    m = circle_mean_minus(v, r, n0=n0, rel_tol=rel_tol)
    N = counting_integral(mu, r)
    return abs(m - T + N + v0)


# ---------------------------------------------------------------------------
# Radial sets
# ---------------------------------------------------------------------------


def _normalize_intervals(intervals: Sequence[tuple[float, float]]) -> list[tuple[float, float]]:
    ivs = sorted((max(a, 0.0), min(b, 1.0)) for a, b in intervals if b > a)
    out: list[tuple[float, float]] = []
    for a, b in ivs:
        if out and a <= out[-1][1] + 1e-15:
            out[-1] = (out[-1][0], max(out[-1][1], b))
        else:
            out.append((a, b))
    return out


def radial_density(intervals: Sequence[tuple[float, float]]) -> float:
    """Density of a finite interval union E in [0,1): sup over R of
    l(E intersect [R,1)) / (1-R).

    For finite unions the sup is attained at an interval start (the ratio
    decreases inside intervals and gaps), so this is exact."""
    ivs = _normalize_intervals(intervals)
    if not ivs:
        return 0.0
    lengths = np.array([b - a for a, b in ivs])
    starts = np.array([a for a, _ in ivs])
    tails = np.cumsum(lengths[::-1])[::-1]
    candidates = tails / (1.0 - starts)
    base = tails[0] / 1.0 if starts[0] > 0 else candidates[0]
    return float(max(np.max(candidates), base))


def radial_exceptional_set(
    radii: np.ndarray,
    circle_l1: np.ndarray,
    C: float,
    edges: np.ndarray | None = None,
) -> tuple[list[tuple[float, float]], float, np.ndarray]:
    """Grid radii whose circle integral exceeds C/(1-r).

    Each flagged radius contributes its grid cell [edge_i, edge_{i+1}];
    returns (intervals, density, flag mask)."""
    radii = np.asarray(radii, dtype=float)
    circle_l1 = np.asarray(circle_l1, dtype=float)
    with np.errstate(divide="ignore"):
        flags = circle_l1 > C / (1.0 - radii)
    if edges is None:
        mids = 0.5 * (radii[1:] + radii[:-1])
        edges = np.concatenate([[max(2 * radii[0] - mids[0], 0.0)], mids, [radii[-1] + (radii[-1] - mids[-1])]])
    intervals = [
        (float(edges[i]), float(min(edges[i + 1], 1.0)))
        for i in range(len(radii))
        if flags[i]
    ]
    return intervals, radial_density(intervals), flags


def t_difference(T_u: np.ndarray, T_f: np.ndarray) -> float:
    """max_r |T(r, u) - T(r, log|f|)| over a shared radius grid."""
    return float(np.max(np.abs(np.asarray(T_u) - np.asarray(T_f)))) if len(T_u) else 0.0


@dataclass
class RadialProfile:
    """Per-radius characteristics, one row per grid radius."""

    radii: np.ndarray
    T_u: np.ndarray
    T_logf: np.ndarray
    circle_l1: np.ndarray
    counting: np.ndarray
    bound: np.ndarray
    in_exceptional: np.ndarray

    def rows(self) -> np.ndarray:
        return np.column_stack(
            [
                self.radii,
                self.T_u,
                self.T_logf,
                self.circle_l1,
                self.counting,
                self.bound,
                self.in_exceptional.astype(float),
            ]
        )

    HEADER = "r,T_u,T_logf,circle_L1,n,bound,in_E"
