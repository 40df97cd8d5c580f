from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial import polynomial as npoly

from rsvolterra.errors import (
    ConditionFailed,
    DegenerateRoot,
    DomainError,
    NotRegularSingular,
    NoVanishing,
)
from rsvolterra.kernels import (
    PerturbationKernel,
    SeparableKernel,
    estimate_gamma,
    estimate_tau,
    taylor_shift,
    verify_diag,
    verify_reg_p,
    verify_sing,
)

from .conftest import toy_perturbation, toy_separable

# p = (zeta - 1)(zeta - 2), q = 1.5 - zeta
TWO_ROOT_P = [2.0, -3.0, 1.0]
TWO_ROOT_Q = [1.5, -1.0]


def two_root_kernel() -> SeparableKernel:
    return SeparableKernel.from_polynomials(TWO_ROOT_P, TWO_ROOT_Q, 1.0)


class TestEstimateTau:
    def test_exact_residue(self):
        assert estimate_tau(toy_separable()) == pytest.approx(0.5, abs=1e-12)

    def test_two_root_residue(self):
        assert estimate_tau(two_root_kernel()) == pytest.approx(0.5, abs=1e-10)

    def test_vanishing_q(self):
        k0 = SeparableKernel.from_polynomials([1.0, -1.0], [-1.0, 1.0], 1.0)
        with pytest.raises(NotRegularSingular):
            estimate_tau(k0)

    @settings(max_examples=20, deadline=None)
    @given(
        st.complex_numbers(min_magnitude=0.1, max_magnitude=3, allow_nan=False),
        st.floats(0.1, 3.0),
        st.floats(0.0, 2 * np.pi),
    )
    def test_matches_residue_formula(self, root2, tau, theta):
        # p = (zeta - 1)(zeta - 1 - root2); choose q(1) so the residue is tau
        p = npoly.polyfromroots([1.0, 1.0 + root2])
        dp1 = npoly.polyval(1.0, npoly.polyder(p))
        q = [-tau * dp1 - 0.3, 0.3]
        k0 = SeparableKernel.from_polynomials(p, q, 1.0)
        est = estimate_tau(k0, theta=theta, h0=min(0.05, abs(root2) / 8))
        assert est == pytest.approx(tau, abs=1e-8)


class TestVerifySing:
    def test_exact_toy(self):
        rep = verify_sing(toy_separable(), 0.5, 0.55)
        assert rep.verified
        assert rep.constants["diag_bound"] <= 1e-12

    def test_two_root_kernel(self):
        rep = verify_sing(two_root_kernel(), 0.5, 0.55)
        assert rep.verified and rep.constants["delta"] < 1

    def test_sigma_must_exceed_tau(self):
        with pytest.raises(DomainError):
            verify_sing(toy_separable(), 0.5, 0.5)

    def test_report_is_json(self):
        rep = verify_sing(toy_separable(), 0.5, 0.55)
        assert '"condition": "sing"' in rep.to_json()


class TestVerifyDiag:
    def test_separable_constant(self):
        rep = verify_diag(toy_separable(), 0.0)
        assert rep.verified and rep.constants["C"] == pytest.approx(0.5, rel=1e-7)

    def test_perturbation_constant(self):
        rep = verify_diag(toy_perturbation(), 1.0, alpha=1.0)
        assert rep.verified and rep.constants["C"] == pytest.approx(0.25, rel=1e-6)

    def test_double_pole(self):
        k0 = SeparableKernel(lambda z: (z - 1) ** 2, lambda z: 0.5 + 0 * z, 1.0)
        with pytest.raises(ConditionFailed) as exc:
            verify_diag(k0, 1.0)
        assert not exc.value.report.verified

    def test_constant_monotone_in_rate(self):
        k = PerturbationKernel(lambda z, zp: np.exp(z - zp) * (z - zp) / (z - 1), 1.0, 1.0)
        c1 = verify_diag(k, 1.0, alpha=1.0).constants["C"]
        c2 = verify_diag(k, 2.0, alpha=1.0).constants["C"]
        assert c2 <= c1


class TestEstimateGamma:
    @pytest.mark.parametrize("power", [1, 2])
    def test_exact_power(self, power):
        k = PerturbationKernel(lambda z, zp: (z - zp) ** power / (z - 1), power, 1.0)
        assert estimate_gamma(k, 1.0) == pytest.approx(power, abs=1e-4)

    def test_nonvanishing_diagonal(self):
        k = PerturbationKernel(lambda z, zp: 1.0 + (z - zp), 1.0, 1.0)
        with pytest.raises(NoVanishing):
            estimate_gamma(k, 1.0)

    @settings(max_examples=10, deadline=None)
    @given(st.complex_numbers(min_magnitude=1e-3, max_magnitude=1e3, allow_nan=False))
    def test_scale_invariant(self, c):
        k = toy_perturbation()
        kc = PerturbationKernel(lambda z, zp: c * k(z, zp), 1.0, 1.0)
        assert estimate_gamma(kc, 1.0) == pytest.approx(estimate_gamma(k, 1.0), abs=1e-10)


class TestVerifyRegP:
    def test_linear(self):
        rep = verify_reg_p(lambda z: 1 - z, 1.0)
        assert rep.constants["B"] == pytest.approx(-1.0)
        assert rep.constants["epsilon"] >= 1

    def test_quadratic(self):
        rep = verify_reg_p(lambda z: (z - 1) * (z - 2), 1.0)
        assert rep.constants["B"] == pytest.approx(-1.0, abs=1e-10)
        assert rep.constants["epsilon"] == pytest.approx(1.0, abs=1e-6)

    def test_double_root(self):
        with pytest.raises(DegenerateRoot):
            verify_reg_p(lambda z: (z - 1) ** 2, 1.0)


def test_separable_kernel_requires_a_root():
    with pytest.raises(DomainError):
        SeparableKernel.from_polynomials([1.0, -1.0], [0.5], 2.0)


@settings(max_examples=25, deadline=None)
@given(
    st.lists(st.complex_numbers(max_magnitude=5, allow_nan=False), min_size=1, max_size=6),
    st.complex_numbers(max_magnitude=3, allow_nan=False),
    st.complex_numbers(max_magnitude=1, allow_nan=False),
)
def test_taylor_shift(coeffs, alpha, x):
    shifted = taylor_shift(coeffs, alpha)
    scale = 1 + npoly.polyval(abs(alpha) + abs(x), np.abs(coeffs))
    assert abs(npoly.polyval(x, shifted) - npoly.polyval(alpha + x, coeffs)) <= 1e-12 * scale
