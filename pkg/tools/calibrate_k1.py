"""Measure the displacement constants K1(p) for the moment-matched points.

Draws random mass-p pieces (unit atoms, weighted atoms, density blocks,
mixtures) on sets of unit diameter, computes the matched points directly,
and records the worst ratio max_j |xi_j - center| / diameter. The shipped
constants are these maxima plus a 25% margin.

Run:  python3 tools/calibrate_k1.py [n_trials]
"""
from __future__ import annotations

import sys

import numpy as np

sys.path.insert(0, "src")

from diskatom.atomize import atoms_from_moments  # noqa: E402
from diskatom.measure import DiskMeasure, PlanarCell, Rectangle, uniform_rect_measure  # noqa: E402

SEED = 20240817


def random_piece(rng: np.random.Generator, p: int) -> DiskMeasure:
    style = rng.integers(0, 4)
    if style == 0:
        # p unit atoms
        pts = rng.uniform(0, 1, p) + 1j * rng.uniform(0, 1, p)
        return DiskMeasure.from_atoms(pts, np.ones(p))
    if style == 1:
        # random weights at random points (including near-degenerate splits)
        n = int(rng.integers(2, p + 4))
        w = rng.dirichlet(np.full(n, rng.uniform(0.05, 1.0))) * p
        pts = rng.uniform(0, 1, n) + 1j * rng.uniform(0, 1, n)
        return DiskMeasure.from_atoms(pts, w)
    if style == 2:
        # uniform block
        x0, y0 = rng.uniform(0, 0.5, 2)
        w, h = rng.uniform(0.1, 1 - max(x0, y0), 2)
        return uniform_rect_measure(p, Rectangle(x0, x0 + w, y0, y0 + h), 4, 4)
    # mixture: block + atoms
    share = rng.uniform(0.1, 0.9)
    block = uniform_rect_measure(share * p, Rectangle(0.2, 0.8, 0.2, 0.8), 3, 3)
    n = int(rng.integers(1, 4))
    w = rng.dirichlet(np.ones(n)) * (1 - share) * p
    pts = rng.uniform(0, 1, n) + 1j * rng.uniform(0, 1, n)
    return DiskMeasure.combine(block, DiskMeasure.from_atoms(pts, w))


def measure_k1(p: int, trials: int, seed: int = SEED) -> float:
    rng = np.random.default_rng(seed + p)
    worst = 0.0
    for _ in range(trials):
        mu = random_piece(rng, p)
        pts, data = atoms_from_moments(mu, p)
        if data.diameter <= 0:
            continue
        ratio = float(np.max(np.abs(pts - data.center)) / data.diameter)
        worst = max(worst, ratio)
    return worst


def main():
    trials = int(sys.argv[1]) if len(sys.argv) > 1 else 20000
    print(f"trials per p: {trials}, seed {SEED}")
    for p in range(2, 9):
        worst = measure_k1(p, trials)
        print(f"p={p}: max ratio {worst:.6f}  -> constant with 25% margin: {1.25 * worst:.4f}")


if __name__ == "__main__":
    main()
