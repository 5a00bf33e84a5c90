import math

import numpy as np
import pytest

from conftest import UNIT, affine_roof_system, full_branch, geometric_system, lorenz_system, skew_system, SKEW_POT
from inducedflow import (
    DomainError,
    FiniteLinear,
    ModelError,
    PotentialSpec,
    SingularInputError,
    SuspensionPoint,
    SuspensionSystem,
    TailError,
    coboundary_B,
    enumerate_cylinders,
    holder_certificate,
    induced_potential_W,
    induced_roof,
    verify_coboundary_identity,
)
from inducedflow.inducing import cylinder_interval, word_orbit

S_POT = PotentialSpec.affine(s=1.0)


class TestCylinders:
    def test_dyadic_quarters(self, doubling):
        cyl = enumerate_cylinders(doubling, None, 2, cutoff=2)
        assert sorted(c.interval for c in cyl) == [(0.0, 0.25), (0.25, 0.5), (0.5, 0.75), (0.75, 1.0)]

    def test_constant_roof_depth_three(self, doubling):
        assert all(c.induced_roof == pytest.approx(3.0) for c in enumerate_cylinders(doubling, None, 3))

    def test_geometric_cocycle(self):
        assert induced_roof(geometric_system(), (2, 3), rep=0.37) == pytest.approx(5.0, abs=1e-14)

    def test_countable_needs_enough_branches(self):
        with pytest.raises(TailError) as err:
            enumerate_cylinders(geometric_system(), None, 1, cutoff=5)
        # 2^-N <= 1e-6 first holds at N = 20
        assert err.value.required == 20

    def test_countable_needs_a_cutoff(self):
        with pytest.raises(ModelError):
            enumerate_cylinders(geometric_system(), None, 1)

    def test_cylinders_partition_the_base(self):
        sys_ = affine_roof_system()
        cyl = enumerate_cylinders(sys_, None, 3)
        assert sum(c.length for c in cyl) == pytest.approx(1.0, abs=1e-14)

    def test_cylinder_interval_matches_word_orbit(self, doubling):
        a, b = cylinder_interval(doubling, (2, 1, 2))
        y = word_orbit(doubling, (2, 1, 2), 0.5)[0]
        assert a <= y <= b


class TestInducedRoof:
    def test_empty_word(self, doubling):
        assert induced_roof(doubling, ()) == 0.0

    def test_single_branch(self):
        sys_ = affine_roof_system()
        y = float(sys_.family.inverse(2, 0.3))
        assert induced_roof(sys_, (2,), rep=0.3) == pytest.approx(float(sys_.roof(2, y)), abs=1e-15)

    def test_two_letters_direct(self):
        sys_ = affine_roof_system()
        z = 0.41
        x2 = float(sys_.family.inverse(2, z))
        x1 = float(sys_.family.inverse(1, x2))
        direct = float(sys_.roof(1, x1)) + float(sys_.roof(2, x2))
        assert induced_roof(sys_, (1, 2), rep=z) == pytest.approx(direct, abs=1e-14)

    def test_invalid_word(self, doubling):
        with pytest.raises(DomainError):
            induced_roof(doubling, (1, 5))


class TestInducedPotential:
    def test_zero_potential(self):
        sys_ = affine_roof_system()
        assert induced_potential_W(sys_, PotentialSpec.constant(0.0), 0.2, 1) == 0.0

    def test_constant_case(self):
        assert induced_potential_W(full_branch(c=2.5), PotentialSpec.constant(0.7), 0.8, 2) == pytest.approx(1.75)

    def test_skew_without_shift_matches_skew_off(self):
        fam = FiniteLinear(UNIT, [1.0, 1.0], [1.0, 1.5], roof_slopes=[0.25, -0.25])
        on = SuspensionSystem(fam, stable_rate=1.0, stable_shift=0.0)
        off = SuspensionSystem(fam)
        for x, i in [(0.1, 1), (0.7, 2)]:
            assert induced_potential_W(on, SKEW_POT, x, i) == pytest.approx(
                induced_potential_W(off, SKEW_POT, x, i), abs=1e-14)

    def test_outside_branch_image(self, doubling):
        with pytest.raises(DomainError):
            induced_potential_W(doubling, PotentialSpec.constant(1.0), 0.8, 1)

    def test_cusp(self):
        with pytest.raises(SingularInputError):
            induced_potential_W(lorenz_system(), PotentialSpec.constant(1.0), 0.0, 1)


class TestCoboundary:
    def test_on_projection(self):
        assert coboundary_B(skew_system(), S_POT, SuspensionPoint(0.3, 0.0, 0.0)) == (0.0, 0.0)

    def test_s_free_potential(self):
        val, tail = coboundary_B(skew_system(), PotentialSpec.affine(x=1.0, t=1.0), SuspensionPoint(0.3, 0, 0.8))
        assert val == 0.0 and 0.0 < tail <= 1e-10

    def test_exponential_closed_form(self):
        # without a ceiling shift, int_0^inf s0 e^{-t} dt = s0
        sys_ = full_branch(stable_rate=1.0, stable_shift=0.0)
        s0 = 0.37
        val, tail = coboundary_B(sys_, S_POT, SuspensionPoint(0.3, 0.0, s0))
        assert tail <= 1e-10
        assert abs(val - s0) <= tail + 1e-12

    def test_needs_skew(self, doubling):
        with pytest.raises(ModelError):
            coboundary_B(doubling, S_POT, SuspensionPoint(0.3, 0.0, 1.0))


class TestCoboundaryIdentity:
    def _points(self, rng, n=40, s=True):
        return np.column_stack([rng.uniform(0, 1, n), rng.uniform(-1, 1, n) if s else np.zeros(n)])

    def test_constant_potential(self, rng):
        out = verify_coboundary_identity(skew_system(), PotentialSpec.constant(2.0), self._points(rng))
        assert out["max_residual"] <= 1e-12

    def test_pure_s_potential(self, rng):
        sys_ = full_branch(stable_rate=1.0, stable_shift=0.5)
        out = verify_coboundary_identity(sys_, S_POT, self._points(rng))
        assert out["max_residual"] <= 2 * out["tail_bound"] + out["quadrature_error"] + 1e-12

    def test_zero_fibre_is_quadrature_only(self, rng):
        sys_ = skew_system()
        out = verify_coboundary_identity(sys_, SKEW_POT, self._points(rng, s=False))
        assert out["max_residual"] <= out["quadrature_error"] + 2 * out["tail_bound"] + 1e-12

    def test_general_skew_model(self, rng):
        out = verify_coboundary_identity(skew_system(), SKEW_POT, self._points(rng, 100))
        assert out["max_residual"] <= 1e-6 and out["tail_bound"] <= 1e-10


class TestHolder:
    def test_constant_roof(self, doubling):
        assert holder_certificate(doubling, None, 3)["roof"].kappa == 0.0

    def test_piecewise_constant_W(self, doubling):
        cert = holder_certificate(doubling, PotentialSpec.branchwise([0.2, -1.0]), 1)
        assert cert["W"].kappa == pytest.approx(0.0, abs=1e-15)

    @pytest.mark.parametrize("depth", [1, 2, 4, 6])
    def test_doubling_x_geometric_bound(self, doubling, depth):
        cert = holder_certificate(doubling, PotentialSpec.affine(x=1.0), depth, gamma=1.0)
        assert cert["W"].kappa <= 1.0 + 1e-12
        assert cert["W"].worst_pair is not None
