import math

import numpy as np
import pytest

from diskatom.atomize import AtomSet
from diskatom.measure import DiskMeasure, power_curve
from diskatom.slowvar import (
    CurveEscapesCell,
    NotInvertible,
    ProximateOrder,
    SlowVarSpec,
    b_from_order,
    build_curve_cells,
    cell_overlap_count,
    exceptional_set_membership,
    local_regularity,
    radii_sequence,
    sup_error_outside,
    zero_localization_check,
)


class TestProximateOrder:
    def test_constant_w(self):
        po = ProximateOrder(sigma=1.0)
        assert po.W(np.array([4.0]))[0] == pytest.approx(4.0)
        po2 = ProximateOrder(sigma=0.5)
        assert po2.W(np.array([16.0]))[0] == pytest.approx(4.0)

    def test_b_from_order(self):
        b1 = b_from_order(ProximateOrder(1.0))
        assert b1(np.array([0.9]))[0] == pytest.approx(0.01, rel=1e-12)
        b_half = b_from_order(ProximateOrder(0.5))
        assert b_half(np.array([0.75]))[0] == pytest.approx(0.25**1.5, rel=1e-12)

    def test_table_order(self):
        R = np.geomspace(1, 1e8, 50)
        rho = 1.0 + 0.3 / np.log(np.e + R)  # decays to sigma = 1
        po = ProximateOrder(sigma=1.0, table_R=R, table_rho=rho)
        assert po.w_is_monotone()
        y = float(po.W(np.array([1000.0]))[0])
        assert po.w_inverse(y) == pytest.approx(1000.0, rel=1e-9)


class TestRadiiSequence:
    def test_sigma1_closed_form(self):
        # oracle: 1/(1-r) = 2n  =>  r_n = 1 - 1/(2n)
        po = ProximateOrder(1.0)
        rs = radii_sequence(1.0, po, 10)
        want = 1.0 - 1.0 / (2.0 * np.arange(1, 12))
        assert np.max(np.abs(rs - want)) < 1e-10

    def test_first_radius_half(self):
        rs = radii_sequence(1.0, ProximateOrder(1.0), 1)
        assert rs[0] == pytest.approx(0.5, rel=1e-10)

    def test_delta2_closed_form(self):
        rs = radii_sequence(2.0, ProximateOrder(1.0), 5)
        want = 1.0 - 1.0 / np.arange(1, 7)
        assert np.max(np.abs(rs[1:] - want[1:])) < 1e-10

    def test_sigma_half_closed_form(self):
        # W(R) = sqrt(R): R_n = (2n)^2, r_n = 1 - (2n)^-2
        rs = radii_sequence(1.0, ProximateOrder(0.5), 6)
        want = 1.0 - 1.0 / (2.0 * np.arange(1, 8)) ** 2
        assert np.max(np.abs(rs - want)) < 1e-9

    def test_not_invertible(self):
        R = np.geomspace(1, 1e8, 30)
        rho = np.linspace(1.0, -0.5, 30)  # W eventually decreasing
        po = ProximateOrder(sigma=1.0, table_R=R, table_rho=rho)
        with pytest.raises(NotInvertible):
            radii_sequence(1.0, po, 5)


class TestSlowVarSpec:
    def test_slow_variation_of_default_b(self):
        for sigma in (0.5, 1.0, 2.0):
            spec = SlowVarSpec(b=b_from_order(ProximateOrder(sigma)))
            grid = 1.0 - np.geomspace(0.5, 1e-6, 200)
            assert spec.slow_variation_holds(grid, sigma)

    def test_integral_condition_finite(self):
        # b = (1-t)^2, p = 2: integrand is 1, integral finite on [0,1)
        spec = SlowVarSpec(b=b_from_order(ProximateOrder(1.0)), p=2)
        finite, val = spec.integral_condition()
        assert finite
        assert val == pytest.approx(1.0, rel=0.05)

    def test_integral_condition_infinite(self):
        # b = 1-t, p = 1 gives integrand 1/(1-t): divergent
        spec = SlowVarSpec(b=lambda t: 1.0 - np.asarray(t), p=1)
        finite, _ = spec.integral_condition()
        assert not finite


class TestCurveCells:
    def make_curve(self, n_max=20, sigma=1.0, delta=1.0):
        radii = radii_sequence(delta, ProximateOrder(sigma), n_max)
        return power_curve(delta, sigma, r_lo=0.05, r_hi=float(radii[-1]), theta0=0.0), radii

    def test_radial_segment_cells(self):
        curve, radii = self.make_curve()
        cells = build_curve_cells(curve, ProximateOrder(1.0), 1.0, K=0.5, n_max=20)
        assert len(cells) == 20
        for i, c in enumerate(cells):
            assert c.mass == pytest.approx(2.0, abs=1e-9)
            assert c.r_lo == pytest.approx(radii[i], rel=1e-10)
            assert c.th_lo <= 0.0 <= c.th_hi

    def test_escape_with_zero_band(self):
        radii = radii_sequence(1.0, ProximateOrder(1.0), 10)
        curve = power_curve(1.0, 1.0, 0.05, float(radii[-1]), theta0=0.0, slope=0.3)
        with pytest.raises(CurveEscapesCell):
            build_curve_cells(curve, ProximateOrder(1.0), 1.0, K=0.0, n_max=10)

    def test_overlap_at_most_two(self):
        curve, _ = self.make_curve()
        cells = build_curve_cells(curve, ProximateOrder(1.0), 1.0, K=0.5, n_max=20)
        rng = np.random.default_rng(3)
        for _ in range(200):
            r = rng.uniform(0.5, cells[-1].r_hi)
            th = rng.uniform(-0.01, 0.01)
            assert cell_overlap_count(cells, r * np.exp(1j * th)) <= 2

    def test_width_tracks_b(self):
        curve, _ = self.make_curve(n_max=60)
        cells = build_curve_cells(curve, ProximateOrder(1.0), 1.0, K=0.5, n_max=60)
        b = b_from_order(ProximateOrder(1.0))
        for c in cells[9:]:
            ratio = (c.r_hi - c.r_lo) / float(b(np.array([c.r_lo]))[0])
            assert 1.0 / 3.0 <= ratio <= 3.0


class TestLocalRegularity:
    def test_no_mass_near_probe(self):
        mu = DiskMeasure.from_atoms([0.9j], [1.0])
        b = b_from_order(ProximateOrder(1.0))
        assert local_regularity(mu, b, 0.9 + 0j) == 0.0

    def test_atom_at_probe_diverges(self):
        mu = DiskMeasure.from_atoms([0.9 + 0j], [0.5])
        b = b_from_order(ProximateOrder(1.0))
        assert local_regularity(mu, b, 0.9 + 0j) == math.inf

    def test_curve_measure_bound(self):
        # on-curve probes: integral stays below 3*sigma*Delta*(1+tol)
        radii = radii_sequence(1.0, ProximateOrder(1.0), 300)
        curve = power_curve(1.0, 1.0, 0.05, float(radii[-1]), theta0=0.0)
        mu = DiskMeasure.from_curve(curve)
        b = b_from_order(ProximateOrder(1.0))
        for r in (0.6, 0.9, 0.99, 0.998):
            val = local_regularity(mu, b, complex(r, 0.0))
            assert val <= 3.03
            assert val > 0.5


class TestExceptionalSet:
    def test_far_point(self):
        atoms = AtomSet.build([0.9 + 0j])
        b = b_from_order(ProximateOrder(1.0))
        assert not exceptional_set_membership(0.3 + 0.4j, atoms, 0.5, b)

    def test_zero_always_in(self):
        atoms = AtomSet.build([0.9 + 0j])
        b = b_from_order(ProximateOrder(1.0))
        assert exceptional_set_membership(0.9 + 0j, atoms, 1e-9, b)

    def test_eps_zero_only_zeros(self):
        atoms = AtomSet.build([0.9 + 0j])
        b = b_from_order(ProximateOrder(1.0))
        assert exceptional_set_membership(0.9 + 0j, atoms, 0.0, b)
        assert not exceptional_set_membership(0.9 + 1e-9j, atoms, 0.0, b)


class TestSupError:
    def test_atomic_pipeline_residual_only(self):
        samples = np.array([0.5 + 0.1j, 0.7 - 0.2j, 0.85 + 0j])
        values = np.array([0.0, 0.0, 0.0])
        atoms = AtomSet.build([0.6 + 0j])
        b = b_from_order(ProximateOrder(1.0))
        rep = sup_error_outside(values, samples, np.zeros(3, dtype=int), atoms, 0.5, b, 1)
        assert rep.sup_off_E[0] == 0.0
        assert rep.one_sided_max == 0.0

    def test_empty_band_is_nan(self):
        samples = np.array([0.5 + 0.1j])
        rep = sup_error_outside(
            np.array([1.0]), samples, np.array([0]), AtomSet.empty(), 0.5, lambda t: 0.01 * np.ones_like(t), 3
        )
        assert math.isnan(rep.sup_off_E[1]) and math.isnan(rep.sup_off_E[2])

    def test_one_sided_max(self):
        samples = np.array([0.5, 0.6, 0.7], dtype=complex)
        values = np.array([0.3, -1.2, 0.8])  # field = u - log f
        rep = sup_error_outside(values, samples, np.zeros(3, int), AtomSet.empty(), 0.5, lambda t: np.ones_like(t), 1)
        assert rep.one_sided_max == pytest.approx(1.2)


class TestZeroLocalization:
    def test_atoms_on_curve_pass(self):
        radii = radii_sequence(1.0, ProximateOrder(1.0), 30)
        curve = power_curve(1.0, 1.0, 0.05, float(radii[-1]), theta0=0.0)
        atoms = AtomSet.build([complex(r, 0) for r in (0.6, 0.9, 0.95)])
        ok, dist, allow = zero_localization_check(atoms, [curve], 2.0, b_from_order(ProximateOrder(1.0)))
        assert ok
        assert np.all(dist <= 1e-9)

    def test_planted_far_atom_fails(self):
        # near the boundary the allowance 2*b shrinks like (1-r)^2, so an
        # atom a fixed angle off the curve violates localization
        radii = radii_sequence(1.0, ProximateOrder(1.0), 30)
        curve = power_curve(1.0, 1.0, 0.05, float(radii[-1]), theta0=0.0)
        atoms = AtomSet.build([0.9 * np.exp(0.3j)])
        ok, dist, allow = zero_localization_check(atoms, [curve], 2.0, b_from_order(ProximateOrder(1.0)))
        assert not ok
