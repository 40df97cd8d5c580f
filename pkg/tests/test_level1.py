from __future__ import annotations

import math

import numpy as np
import pytest

from rsvolterra.errors import NoAdmissibleRay, NotRegularSingular
from rsvolterra.kernels import estimate_tau
from rsvolterra.laplace import laplace_transform
from rsvolterra.level1 import (
    Level1Problem,
    borel_sum,
    borel_sum_all,
    build_kernels,
    choose_ray,
    ode_residual,
    singular_points,
    solve_at,
    thread_count,
    validate_problem,
)
from rsvolterra.solver import fit_series_coefficients, series_oracle

from .conftest import R0, TAU

TWO_ROOTS = Level1Problem([2, 3, 1], [1.5, 1])


def exact_perturbed(z, r0=R0, tau=TAU):
    return math.gamma(tau) * np.exp(-z) * z**-tau * np.exp(r0 / z)


class TestValidate:
    def test_two_roots(self):
        assert validate_problem(Level1Problem([2, 3, 1], [1.5, 1], [0.25])).verified

    @pytest.mark.parametrize(
        ("prob", "reason"),
        [
            (Level1Problem([1, 2, 1], [0.5, 1]), "DoubleRoot"),
            (Level1Problem([2, 3, 1], [1.5]), "DegreeMismatch"),
            (Level1Problem([2, 3, 2], [1.5, 1]), "NotMonic"),
            (Level1Problem([2, 3, 1], [1, 1]), "QVanishesAtRoot"),
            (Level1Problem([1, 1], [0.5], [1, 10, 100, 1000], A=2.0), "SeriesGrowth"),
        ],
    )
    def test_failures(self, prob, reason):
        rep = validate_problem(prob)
        assert not rep.verified and reason in rep.reasons

    def test_growth_within_bound(self):
        assert validate_problem(Level1Problem([1, 1], [0.5], [1, 2, 4, 8], A=2.0)).verified


class TestSingularPoints:
    def test_single_root(self):
        (pt,) = singular_points(Level1Problem([1, 1], [0.5]))
        assert pt.alpha == 1 and pt.tau_real == pytest.approx(0.5) and pt.admissible

    def test_two_roots(self):
        pts = singular_points(TWO_ROOTS)
        assert [p.alpha for p in pts] == [1, 2]
        for p in pts:
            assert abs(p.tau - 0.5) <= 1e-10 and p.admissible

    def test_inadmissible_zero_exponent(self):
        pts = {p.alpha: p for p in singular_points(Level1Problem([0, 1, 1], [0, 1]))}
        assert pts[1].admissible and pts[1].tau_real == pytest.approx(1.0)
        assert not pts[0].admissible

    def test_complex_roots(self):
        # P = x^2 + 1, Q = 2x + 0.5: tau = Q(-a)/P'(-a) = 1 -/+ 0.25 i, not admissible
        pts = singular_points(Level1Problem([1, 0, 1], [0.5, 2]))
        assert len(pts) == 2 and not any(p.admissible for p in pts)

    @pytest.mark.parametrize("alpha", [1.0, 2.0])
    def test_matches_kernel_residue(self, alpha):
        pt = next(p for p in singular_points(TWO_ROOTS) if p.alpha == alpha)
        k0 = build_kernels(TWO_ROOTS, alpha).k0
        assert estimate_tau(k0, theta=np.pi / 2) == pytest.approx(pt.tau_real, abs=1e-8)


class TestBuildKernels:
    def test_no_series(self):
        assert build_kernels(Level1Problem([1, 1], [0.5]), 1.0).k_star is None

    def test_single_term(self):
        kp = build_kernels(Level1Problem([1, 1], [0.5], [R0]), 1.0)
        z, zp = 1.7 + 0.2j, 1.3 - 0.1j
        assert kp.k_star(z, zp) == pytest.approx(R0 * (z - zp) / (z - 1), rel=1e-14)
        assert kp.k_star.gamma == 1.0 and kp.k_star.lambda_delta == 1.0
        assert kp.k0(z, zp) == pytest.approx(0.5 / (z - 1), rel=1e-14)

    def test_series_terms(self):
        R = [0.3, -0.2, 0.1]
        kp = build_kernels(Level1Problem([1, 1], [0.5], R, A=1.0), 1.0)
        z, zp = 2.5, 1.5
        kR = sum(R[j] * (z - zp) ** (j + 1) / math.factorial(j + 1) for j in range(3))
        assert kp.k_star(z, zp) == pytest.approx(-kR / (1 - z), rel=1e-14)
        assert kp.k_star.lambda_delta == 2.0


class TestChooseRay:
    def test_requested_direction(self):
        assert choose_ray(TWO_ROOTS, 1.0, np.pi / 2).theta == pytest.approx(np.pi / 2)

    def test_blocked_direction(self):
        with pytest.raises(NoAdmissibleRay):
            choose_ray(TWO_ROOTS, 1.0, 0.0)

    def test_single_root_default(self):
        assert choose_ray(Level1Problem([1, 1], [0.5]), 1.0).theta == 0.0

    def test_default_avoids_other_roots(self):
        assert choose_ray(TWO_ROOTS, 1.0).theta == pytest.approx(np.pi)
        assert choose_ray(TWO_ROOTS, 2.0).theta == 0.0


class TestSolveAt:
    def test_prototype_case(self, exponential_monomial):
        _, res = exponential_monomial
        f = res.psi.f
        np.testing.assert_allclose(f.values(), f.grid.nodes**-0.5, rtol=1e-10)
        assert res.volterra_residual <= 1e-8

    def test_perturbed_coefficients(self, perturbed):
        prob, res = perturbed
        c = fit_series_coefficients(res.psi.f, TAU, 2)
        k0 = build_kernels(prob, 1.0).k0
        np.testing.assert_allclose(c, series_oracle(k0, prob.R, TAU, 2)[1:], atol=1e-4)
        assert c[0] == pytest.approx(0.5, abs=1e-4)
        assert c[1] == pytest.approx(1 / 24, abs=1e-4)

    def test_inadmissible(self):
        with pytest.raises(NotRegularSingular):
            solve_at(Level1Problem([0, 1, 1], [0, 1]), 0.0)

    def test_two_root_closed_form(self, two_roots):
        _, res = two_roots
        f = res.psi.f
        exact = ((f.grid.zeta - 1) * (f.grid.zeta - 2)) ** -0.5
        ratio = f.values() / exact
        np.testing.assert_allclose(ratio, ratio[0], rtol=1e-6)


class TestBorelSum:
    def test_exponential_monomial(self, exponential_monomial):
        _, res = exponential_monomial
        z = res.Psi.z_samples
        exact = math.gamma(0.5) * np.exp(-z) * z**-0.5
        err = np.abs(res.Psi.phi_values - exact) / np.abs(exact)
        assert np.all(err <= 1e-6 + res.Psi.tail_bound)
        assert res.ode_residual <= 1e-6

    def test_perturbed(self, perturbed):
        _, res = perturbed
        z = res.Psi.z_samples
        np.testing.assert_allclose(res.Psi.phi_values, exact_perturbed(z), rtol=1e-8)
        assert res.ode_residual <= 1e-6

    def test_scaling_leaves_ode_residual(self, perturbed):
        prob, res = perturbed
        r1 = ode_residual(prob, res.psi.f, [2.0], res.Psi.lam)
        r2 = ode_residual(prob, res.psi.f * (3 - 2j), [2.0], res.Psi.lam)
        assert r2 == pytest.approx(r1, rel=1e-6, abs=1e-14)

    def test_asymptotics(self, perturbed):
        _, res = perturbed
        x = np.array([4.0, 8.0, 16.0, 32.0])
        Psi = laplace_transform(res.psi.f, x).phi_values
        dev = np.abs(np.log(np.abs(Psi) * np.exp(x)) + TAU * np.log(x) - math.lgamma(TAU))
        assert np.all(np.diff(dev) < 0) and dev[-1] < 0.01

    def test_ray_independence(self):
        prob = Level1Problem([2, 3, 1], [1.5, 1], [0.1])
        a = borel_sum(prob, 1.0, choose_ray(prob, 1.0, np.pi / 2), z_samples=[-2 - 2j])
        b = borel_sum(prob, 1.0, choose_ray(prob, 1.0, 3 * np.pi / 4), z_samples=[-2 - 2j])
        tails = a.Psi.tail_bound + b.Psi.tail_bound
        diff = np.abs(a.Psi.phi_values - b.Psi.phi_values) / np.abs(a.Psi.phi_values)
        assert np.all(diff <= 1e-6 + tails)

    def test_two_root_frequency_oracle(self, two_roots):
        prob, res = two_roots
        out = borel_sum(prob, 1.0, z_samples=[2 - 2j], solution=res)
        assert out.ode_residual <= 1e-6

    def test_all_points(self, monkeypatch):
        monkeypatch.setenv("RSV_THREADS", "2")
        assert thread_count() == 2
        res = borel_sum_all(TWO_ROOTS, {1.0: [-3.0], 2.0: [3.0]}, nodes_per_panel=12)
        assert [r.alpha for r in res] == [1, 2]
        for r in res:
            assert r.ode_residual <= 1e-6
            assert r.volterra_residual <= 1e-8


def test_thread_count_fallback(monkeypatch):
    monkeypatch.setenv("RSV_THREADS", "many")
    assert thread_count() == 1
