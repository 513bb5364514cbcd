import math

import numpy as np
import pytest

from diskatom.atomize import AtomSet, atomize_piece
from diskatom.diskgrid import build_scheme
from diskatom.measure import (
    DiskMeasure,
    PlanarCell,
    Rectangle,
    linear_curve,
    uniform_rect_measure,
)
from diskatom.potential import (
    FieldTerm,
    GreenDisk,
    PlanarLog,
    PotentialEvaluator,
    SweepReport,
    WeierstrassE,
    cell_difference_term,
    classify_cells,
    error_field,
    eval_atom_sum,
    eval_potential,
    eval_weierstrass_remainder,
    l1_error_disk,
    polar_grid,
    primary_factor_log_bound,
    weierstrass_tail_bound,
)


class TestEvalPotential:
    def test_atom_green(self):
        mu = DiskMeasure.from_atoms([0j], [1.0])
        assert eval_potential(mu, GreenDisk, 0.5 + 0j) == pytest.approx(math.log(0.5), abs=1e-14)

    def test_atom_planar_outside(self):
        mu = DiskMeasure.from_atoms([0j], [1.0])
        assert eval_potential(mu, PlanarLog, 2.0 + 0j) == pytest.approx(math.log(2.0), abs=1e-14)

    def test_thin_ring_planar_center(self):
        # mass 1 on a circle of radius 0.25 (thin band); oracle: trapezoid
        # rule on the exact circle gives log(0.25)
        cell = PlanarCell("polar", 0.2499, 0.2501, 0.0, 2 * math.pi, 1.0)
        mu = DiskMeasure.from_cells([cell])
        got = eval_potential(mu, PlanarLog, 0j)
        assert got == pytest.approx(math.log(0.25), abs=1e-6)

    def test_atom_hit_marker(self):
        mu = DiskMeasure.from_atoms([0.3 + 0j], [1.0])
        assert eval_potential(mu, PlanarLog, 0.3 + 0j) == float("-inf")

    def test_ring_fast_path_matches_generic(self):
        # same band represented as one full ring vs 64 polar sectors
        ring = DiskMeasure.from_cells([PlanarCell("polar", 0.6, 0.65, 0.0, 2 * math.pi, 2.0)])
        sectors = []
        for i in range(64):
            t0 = 2 * math.pi * i / 64
            t1 = 2 * math.pi * (i + 1) / 64
            sectors.append(PlanarCell("polar", 0.6, 0.65, t0, t1, 2.0 / 64))
        gen = DiskMeasure.from_cells(sectors)
        z = np.array([0.1 + 0.2j, 0.5j, 0.62 + 0.01j, 0.9 + 0j])
        for kernel in (GreenDisk, PlanarLog, WeierstrassE):
            a = eval_potential(ring, kernel, z)
            b = eval_potential(gen, kernel, z)
            assert np.max(np.abs(a - b)) < 2e-4

    def test_brute_force_quadrature_oracle(self):
        # dense midpoint sampling of a block density vs the evaluator
        rng = np.random.default_rng(9)
        for _ in range(4):
            x0, y0 = rng.uniform(-0.4, 0.1, 2)
            w, h = rng.uniform(0.1, 0.3, 2)
            mass = rng.uniform(0.5, 2.0)
            mu = uniform_rect_measure(mass, Rectangle(x0, x0 + w, y0, y0 + h), 2, 2)
            z = complex(rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9))
            n = 600
            xs = x0 + (np.arange(n) + 0.5) * w / n
            ys = y0 + (np.arange(n) + 0.5) * h / n
            S = xs[:, None] + 1j * ys[None, :]
            brute = mass / (n * n) * np.sum(np.log(np.abs(z - S)))
            got = eval_potential(mu, PlanarLog, z)
            assert got == pytest.approx(brute, rel=2e-4, abs=2e-4)

    def test_curve_potential_matches_quadrature(self):
        curve = linear_curve(2.0, 0.1, 0.6, theta0=0.4)
        mu = DiskMeasure.from_curve(curve)
        z = 0.3 - 0.5j
        rs = np.linspace(0.1, 0.6, 400001)
        mids = 0.5 * (rs[:-1] + rs[1:])
        pts = mids * np.exp(0.4j)
        brute = np.sum(2.0 * np.diff(rs) * np.log(np.abs(z - pts)))
        assert eval_potential(mu, PlanarLog, z) == pytest.approx(brute, rel=1e-7)


class TestEvalAtomSum:
    def test_blaschke_boundary_zero(self):
        atoms = AtomSet.build([0.4 + 0.1j])
        z = np.exp(0.7j)
        assert eval_atom_sum(atoms, GreenDisk, complex(z)) == pytest.approx(0.0, abs=1e-13)

    def test_empty(self):
        assert eval_atom_sum(AtomSet.empty(), GreenDisk, 0.5 + 0j) == 0.0

    def test_two_planar_zeros(self):
        atoms = AtomSet.build([1 / math.sqrt(3), -1 / math.sqrt(3)])
        got = eval_atom_sum(atoms, PlanarLog, 0j)
        assert got == pytest.approx(math.log(1.0 / 3.0), abs=1e-13)


class TestWeierstrass:
    def test_zero_argument(self):
        # E(0,1) = 1: far-boundary mass contributes nothing at w -> 0
        assert WeierstrassE.pointwise(np.array([0j]), np.array([1.0 - 1e-12 + 0j]))[0] == pytest.approx(
            0.0, abs=1e-10
        )

    def test_primary_factor_bound_on_circle(self):
        # |log E(w,1)| <= |w|^2/(2(1-|w|)) = 0.25 at |w| = 0.5
        th = np.linspace(0, 2 * math.pi, 721)
        w = 0.5 * np.exp(1j * th)
        vals = np.abs(np.log(np.abs(1 - w)) + np.real(w))
        assert np.max(vals) <= 0.25 + 1e-12
        assert primary_factor_log_bound(0.5) == pytest.approx(0.25)

    def test_single_fractional_atom(self):
        # oracle: 0.5*(log(0.81)+0.19) = -0.010360515657826
        mu = DiskMeasure.from_atoms([0.9 + 0j], [0.5])
        vals, tail = eval_weierstrass_remainder(mu, 0j)
        assert vals == pytest.approx(-0.010360515657826, abs=1e-12)
        assert tail == 0.0

    def test_tail_bound_monotone(self):
        # the quadratic bound needs 1-|z| >= 4(1-R_depth)
        b100 = weierstrass_tail_bound(0.99, 100, np.array([0.1]))[0]
        b300 = weierstrass_tail_bound(0.99, 300, np.array([0.1]))[0]
        assert b300 < b100 < np.inf
        # premise fails when the evaluation radius crowds the truncation edge
        assert weierstrass_tail_bound(0.99, 100, np.array([0.5]))[0] == np.inf
        assert weierstrass_tail_bound(0.99, 300, np.array([0.5]))[0] < np.inf


class TestErrorField:
    def test_atomic_measure_cancels_exactly(self):
        # a cell that is exactly two unit atoms: matched points reproduce it
        pts = [0.55 + 0.1j, 0.6 + 0.12j]
        mu = DiskMeasure.from_atoms(pts, [1.0, 1.0])
        aset, data = atomize_piece(mu, 2)
        term = cell_difference_term("V", [(mu, aset.points)], GreenDisk)
        z = np.array([0.2 + 0.1j, -0.4j, 0.8 + 0.05j, 0.57 + 0.11j])
        vals = term.evaluate(z)
        assert np.max(np.abs(vals)) < 1e-10

    def test_zero_measure_zero_field(self):
        term = cell_difference_term("V", [], GreenDisk)
        z = np.array([0.1 + 0.1j])
        assert term.evaluate(z)[0] == 0.0

    def test_far_field_quadratic_decay_green(self):
        # mass-2 block near the origin: |cell term| <= 12 d^2 max_{B} |s-z|^-2
        rng = np.random.default_rng(4)
        for _ in range(6):
            x0 = rng.uniform(-0.05, 0.0)
            w = rng.uniform(0.02, 0.05)
            mu = uniform_rect_measure(2.0, Rectangle(x0, x0 + w, 0.0, w), 3, 3)
            aset, data = atomize_piece(mu, 2)
            d = data.diameter
            term = cell_difference_term("V", [(mu, aset.points)], GreenDisk)
            for _ in range(10):
                z = complex(rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9))
                dist = abs(z - data.center)
                if dist < 10 * d or abs(z) > 0.97:
                    continue
                val = abs(term.evaluate(np.array([z]))[0])
                # max over B_l = closure of U(cell, 2d): nearest point bound
                bound = 12 * d * d / (dist - 3 * d) ** 2
                assert val <= bound * (1 + 1e-9)

    def test_far_field_cubic_decay_planar(self):
        # second-moment matching buys cubic decay: 103 D^3 / |center - z|^3
        mu = uniform_rect_measure(2.0, Rectangle(-0.5, 0.5, -0.02, 0.02), 6, 2)
        aset, data = atomize_piece(mu, 2)
        D = data.diameter
        term = cell_difference_term("Omega", [(mu, aset.points)], PlanarLog)
        for z in (5.0 + 0j, -4.0 + 3.0j, 0.0 + 11.0j, 7.0 - 2.0j):
            dist = abs(z - aset.points[0])
            if dist <= 10 * D:
                continue
            val = abs(term.evaluate(np.array([z]))[0])
            assert val <= 103 * D**3 / dist**3

    def test_report_components_sum(self):
        edges = np.linspace(0.05, 0.9, 20)
        t1 = FieldTerm("a", lambda z: np.abs(z))
        t2 = FieldTerm("b", lambda z: -0.5 * np.abs(z))
        rep = error_field([t1, t2], edges, 16, AtomSet.empty())
        assert np.allclose(rep.total, rep.components["a"] + rep.components["b"])


class TestL1Integration:
    def test_zero_field(self):
        edges = np.linspace(0.0, 1.0, 50)
        rep = error_field([FieldTerm("z", lambda z: np.zeros(z.shape))], edges, 32, AtomSet.empty())
        assert l1_error_disk(rep, 1.0) == 0.0

    def test_constant_field(self):
        edges = np.linspace(0.0, 0.8, 200)
        rep = error_field([FieldTerm("c", lambda z: np.full(z.shape, 0.7))], edges, 32, AtomSet.empty())
        got = l1_error_disk(rep, 0.8)
        assert got == pytest.approx(0.7 * math.pi * 0.64, rel=1e-9)

    def test_single_zero_log_integral(self):
        # f = z, u = 0: integral of |log|z|| over the unit disk is pi/2
        edges = np.linspace(0.0, 1.0, 400)
        atoms = AtomSet.build([0j])

        def neg_log(z):
            with np.errstate(divide="ignore"):
                return -np.log(np.abs(z))

        rep = error_field([FieldTerm("logf", neg_log)], edges, 64, atoms)
        got = l1_error_disk(rep, 1.0, smooth_at_atoms=lambda a, m: 0.0)
        assert got == pytest.approx(math.pi / 2, rel=2e-3)

    def test_doubling_stability(self):
        atoms = AtomSet.build([0.3 + 0.2j])

        def fld(z):
            with np.errstate(divide="ignore"):
                return -np.log(np.abs(z - (0.3 + 0.2j))) + 0.2

        coarse = error_field([FieldTerm("f", fld)], np.linspace(0, 0.9, 150), 64, atoms)
        fine = error_field([FieldTerm("f", fld)], np.linspace(0, 0.9, 300), 128, atoms)
        a = l1_error_disk(coarse, 0.9, smooth_at_atoms=lambda a_, m: 0.2)
        b = l1_error_disk(fine, 0.9, smooth_at_atoms=lambda a_, m: 0.2)
        assert abs(a - b) / b < 0.02


class TestClassifyCells:
    def test_buffer_13_at_m20(self):
        scheme = build_scheme(0.99, 40)
        cls = classify_cells(scheme, 20, 13)
        assert cls.inner == tuple(range(0, 7))
        assert cls.outer == tuple(range(34, 40))
        assert cls.near == tuple(range(7, 34))

    def test_small_m_empty_inner(self):
        scheme = build_scheme(0.99, 40)
        cls = classify_cells(scheme, 5, 13)
        assert cls.inner == ()

    def test_all_near_when_buffer_covers(self):
        scheme = build_scheme(0.99, 10)
        cls = classify_cells(scheme, 5, 13)
        assert cls.near == tuple(range(10))
        assert cls.inner == () and cls.outer == ()
