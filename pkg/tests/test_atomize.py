import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diskatom.atomize import (
    AtomSet,
    BoundViolation,
    K1_DISPLACEMENT,
    MassMismatch,
    MomentData,
    atomize_piece,
    atoms_from_data,
    atoms_from_moments,
    newton_to_elementary,
    power_sum_residuals,
    power_sums,
    residual_tolerances,
    verify_atom_bound,
)
from diskatom.measure import DiskMeasure, Rectangle, linear_curve, uniform_rect_measure


def sorted_points(pts):
    return sorted((complex(p) for p in pts), key=lambda z: (round(z.real, 9), round(z.imag, 9)))


class TestPowerSums:
    def test_two_atoms(self):
        a, b = 0.3 + 0.1j, -0.2 + 0.4j
        mu = DiskMeasure.from_atoms([a, b], [1.0, 1.0])
        data = power_sums(mu, 2)
        assert data.center == pytest.approx((a + b) / 2, abs=1e-15)
        assert data.power_sums[0] == pytest.approx(0.0, abs=1e-14)
        assert data.power_sums[1] == pytest.approx((a - b) ** 2 / 2, abs=1e-14)

    def test_concentrated_atom(self):
        mu = DiskMeasure.from_atoms([0.5 + 0.2j], [2.0])
        data = power_sums(mu, 2)
        assert abs(data.power_sums[1]) < 1e-15
        assert data.diameter == 0.0

    def test_uniform_segment(self):
        # uniform mass 2 on [-1, 1]: J_2 = 2/3 (1-D Simpson oracle)
        mu = DiskMeasure(curves=(linear_curve(1.0, 0.0, 1.0, 0.0), linear_curve(1.0, 0.0, 1.0, math.pi)))
        data = power_sums(mu, 2)
        assert data.center == pytest.approx(0.0, abs=1e-12)
        assert data.power_sums[1] == pytest.approx(2.0 / 3.0, rel=1e-9)

    def test_mass_mismatch(self):
        mu = DiskMeasure.from_atoms([0.1], [1.5])
        with pytest.raises(MassMismatch):
            power_sums(mu, 2)


class TestNewtonIdentities:
    def test_p2_example(self):
        e = newton_to_elementary(np.array([0.0, 2.0 / 3.0]))
        assert e[0] == pytest.approx(0.0)
        assert e[1] == pytest.approx(-1.0 / 3.0)

    def test_all_zero(self):
        e = newton_to_elementary(np.zeros(4))
        assert np.allclose(e, 0.0)

    def test_p3_centered(self):
        J2, J3 = 0.4 - 0.1j, -0.2 + 0.3j
        e = newton_to_elementary(np.array([0.0, J2, J3]))
        assert e[0] == pytest.approx(0.0)
        assert e[1] == pytest.approx(-J2 / 2)
        assert e[2] == pytest.approx(J3 / 3)

    @given(
        st.lists(
            st.complex_numbers(max_magnitude=1.0, allow_nan=False, allow_infinity=False),
            min_size=2,
            max_size=6,
        )
    )
    @settings(max_examples=60, deadline=None)
    def test_roundtrip_from_roots(self, roots):
        # oracle: identities must reproduce numpy's polynomial coefficients
        w = np.asarray(roots, dtype=complex)
        p = len(w)
        J = np.array([np.sum(w**k) for k in range(1, p + 1)])
        e = newton_to_elementary(J, p)
        coeffs = np.poly(w)  # [1, -e1, +e2, ...]
        want = np.array([(-1) ** (i + 1) * coeffs[i + 1] for i in range(p)])
        assert np.allclose(e, want, atol=1e-8)


class TestAtomsFromMoments:
    def test_two_atoms_recovered(self):
        a, b = 0.4 + 0.2j, -0.1 - 0.3j
        mu = DiskMeasure.from_atoms([a, b], [1.0, 1.0])
        pts, _ = atoms_from_moments(mu, 2)
        assert sorted_points(pts) == pytest.approx(sorted_points([a, b]), abs=1e-12)

    def test_uniform_segment_pm_inv_sqrt3(self):
        mu = DiskMeasure(curves=(linear_curve(1.0, 0.0, 1.0, 0.0), linear_curve(1.0, 0.0, 1.0, math.pi)))
        pts, _ = atoms_from_moments(mu, 2)
        want = [-1 / math.sqrt(3), 1 / math.sqrt(3)]
        got = sorted_points(pts)
        assert got[0].real == pytest.approx(want[0], abs=1e-9)
        assert got[1].real == pytest.approx(want[1], abs=1e-9)
        assert abs(got[0].imag) < 1e-10 and abs(got[1].imag) < 1e-10

    def test_concentrated_mass_p_copies(self):
        c = 0.2 - 0.4j
        for p in (2, 3, 4):
            mu = DiskMeasure.from_atoms([c], [float(p)])
            pts, _ = atoms_from_moments(mu, p)
            assert np.allclose(pts, c, atol=1e-12)

    def test_quadratic_closed_form_oracle(self):
        # p = 2 closed form: roots = center +- sqrt(J2/2)
        rng = np.random.default_rng(21)
        for _ in range(40):
            pts_in = rng.uniform(-0.5, 0.5, 3) + 1j * rng.uniform(-0.5, 0.5, 3)
            w = rng.dirichlet(np.ones(3)) * 2.0
            mu = DiskMeasure.from_atoms(pts_in, w)
            pts, data = atoms_from_moments(mu, 2)
            root = np.sqrt(data.power_sums[1] / 2.0)
            want = sorted_points([data.center + root, data.center - root])
            assert np.max(np.abs(np.array(sorted_points(pts)) - np.array(want))) < 1e-10

    def test_permutation_invariance(self):
        rng = np.random.default_rng(5)
        pts_in = rng.uniform(-0.3, 0.3, 4) + 1j * rng.uniform(-0.3, 0.3, 4)
        mu1 = DiskMeasure.from_atoms(pts_in, np.ones(4))
        mu2 = DiskMeasure.from_atoms(pts_in[::-1], np.ones(4))
        a1, _ = atoms_from_moments(mu1, 4)
        a2, _ = atoms_from_moments(mu2, 4)
        assert np.max(np.abs(np.array(sorted_points(a1)) - np.array(sorted_points(a2)))) < 1e-9

    def test_conjugate_symmetry(self):
        # measure symmetric under conjugation -> point set conjugation-invariant
        mu = DiskMeasure.from_atoms([0.2 + 0.3j, 0.2 - 0.3j, 0.5], [1.0, 1.0, 1.0])
        pts, _ = atoms_from_moments(mu, 3)
        got = np.array(sorted_points(pts))
        conj = np.array(sorted_points(np.conj(pts)))
        assert np.max(np.abs(got - conj)) < 1e-9

    def test_residuals_within_tolerance(self):
        rng = np.random.default_rng(11)
        for p in (2, 3, 4):
            for _ in range(50):
                n = int(rng.integers(2, 6))
                scale = 10.0 ** rng.uniform(-3, 0)
                base = complex(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5))
                pts_in = base + scale * (rng.uniform(0, 1, n) + 1j * rng.uniform(0, 1, n))
                w = rng.dirichlet(np.ones(n)) * p
                mu = DiskMeasure.from_atoms(pts_in, w)
                pts, data = atoms_from_moments(mu, p)
                res = power_sum_residuals(pts, data)
                assert np.all(res <= residual_tolerances(data)), (p, scale, res, residual_tolerances(data))


class TestDisplacementBound:
    def test_uniform_segment_ratio(self):
        mu = DiskMeasure(curves=(linear_curve(1.0, 0.0, 1.0, 0.0), linear_curve(1.0, 0.0, 1.0, math.pi)))
        pts, data = atoms_from_moments(mu, 2)
        ratio = verify_atom_bound(pts, data.center, data.diameter, 2)
        assert ratio == pytest.approx((1 / math.sqrt(3)) / 2.0, rel=1e-6)

    def test_concentrated_zero_ratio(self):
        mu = DiskMeasure.from_atoms([0.1 + 0.1j], [2.0])
        pts, data = atoms_from_moments(mu, 2)
        assert verify_atom_bound(pts, data.center, data.diameter, 2) == 0.0

    def test_diameter_endpoints_ratio_half(self):
        mu = DiskMeasure.from_atoms([0.0, 0.1], [1.0, 1.0])
        pts, data = atoms_from_moments(mu, 2)
        ratio = verify_atom_bound(pts, data.center, data.diameter, 2)
        assert ratio == pytest.approx(0.5, abs=1e-10)

    def test_violation_raises(self):
        with pytest.raises(BoundViolation):
            verify_atom_bound(np.array([3.0 + 0j]), 0j, 1.0, 2)

    def test_rouche_containment_random(self):
        # sampled version of the root containment across p in {2,3,4}
        rng = np.random.default_rng(2024)
        for p in (2, 3, 4):
            worst = 0.0
            for _ in range(1000):
                n = int(rng.integers(2, p + 4))
                pts_in = rng.uniform(0, 1, n) + 1j * rng.uniform(0, 1, n)
                w = rng.dirichlet(np.full(n, rng.uniform(0.2, 1.0))) * p
                mu = DiskMeasure.from_atoms(pts_in, w)
                pts, data = atoms_from_moments(mu, p)
                if data.diameter <= 0:
                    continue
                ratio = float(np.max(np.abs(pts - data.center)) / data.diameter)
                worst = max(worst, ratio)
                assert ratio <= K1_DISPLACEMENT[p] * (1 + 1e-9)
            assert worst <= K1_DISPLACEMENT[p]


class TestAtomSet:
    def test_flat_points_expands_multiplicity(self):
        s = AtomSet.build([0.1 + 0j, 0.2j], mults=[2, 1])
        assert s.total == 3
        assert list(s.flat_points()) == [0.1 + 0j, 0.1 + 0j, 0.2j]

    def test_concat(self):
        a = AtomSet.build([0.1])
        b = AtomSet.build([0.2, 0.3], mults=[1, 4])
        c = AtomSet.concat(a, b)
        assert c.total == 6
        assert c.points.size == 3

    def test_atomize_piece_records_cell(self):
        mu = DiskMeasure.from_atoms([0.5, 0.52], [1.0, 1.0])
        aset, data = atomize_piece(mu, 2, cell_n=7, cell_m=3)
        assert np.all(aset.cell_n == 7)
        assert np.all(aset.cell_m == 3)
        assert aset.total == 2
