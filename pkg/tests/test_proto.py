from __future__ import annotations

import json

import numpy as np
import pytest

from rsvolterra.errors import NotProportional
from rsvolterra.grid import (
    NormParams,
    Ray,
    SingularFunction,
    build_ray_grid,
    evaluate,
    weighted_norm,
)
from rsvolterra.kernels import SeparableKernel
from rsvolterra.proto import (
    base_point_invariance,
    compute_prototype,
    estimate_leading_constant,
    proportionality,
    verify_fixed_point,
    write_prototype,
)

from .conftest import toy_separable


def two_root_kernel() -> SeparableKernel:
    return SeparableKernel.from_polynomials([2.0, -3.0, 1.0], [1.5, -1.0], 1.0)


@pytest.fixture(scope="module")
def vertical_grid():
    return build_ray_grid(Ray(1.0, np.pi / 2, 8.0))


class TestComputePrototype:
    def test_toy_magnitude(self, toy_grid):
        proto = compute_prototype(toy_separable(), 0.5, toy_grid, base_t=1.0)
        assert abs(evaluate(proto.f0, 0.25)) == pytest.approx(2.0, rel=1e-12)
        t = toy_grid.nodes
        np.testing.assert_allclose(np.abs(proto.f0.values()), t**-0.5, rtol=1e-12)
        assert proto.f0.sigma == pytest.approx(-0.5)

    def test_unit_exponent_has_constant_magnitude(self, toy_grid):
        k0 = SeparableKernel.from_polynomials([1.0, -1.0], [1.0], 1.0)
        proto = compute_prototype(k0, 1.0, toy_grid, base_t=1.0)
        np.testing.assert_allclose(np.abs(proto.f0.values()), 1.0, rtol=1e-12)

    def test_two_root_closed_form(self, vertical_grid):
        proto = compute_prototype(two_root_kernel(), 0.5, vertical_grid)
        z = vertical_grid.zeta
        exact = SingularFunction.from_callable(
            vertical_grid, lambda z: ((z - 1) * (z - 2)) ** -0.5, -0.5
        )
        # the principal branch may flip sign along the ray; compare magnitudes first
        np.testing.assert_allclose(
            np.abs(proto.f0.values()) / np.abs(exact.values()),
            np.abs(proto.f0.values()[0] / exact.values()[0]),
            rtol=1e-10,
        )
        assert np.all(np.isfinite(z))

    def test_default_base_point_is_inside_the_grid(self, toy_grid):
        proto = compute_prototype(toy_separable(), 0.5, toy_grid)
        assert toy_grid.t_min <= proto.base_t <= toy_grid.T

    def test_normalized(self, toy_grid):
        proto = compute_prototype(toy_separable(), 0.5, toy_grid, normalize=True)
        M, _ = estimate_leading_constant(proto)
        assert M == pytest.approx(1.0, abs=1e-10)

    def test_bounded_near_alpha_under_refinement(self):
        consts = []
        for n in (8, 16):
            grid = build_ray_grid(Ray(1.0, np.pi / 2, 8.0), nodes_per_panel=n)
            f0 = compute_prototype(two_root_kernel(), 0.5, grid, base_t=0.5).f0
            consts.append(weighted_norm(f0, NormParams(-0.5, 0.0)))
        assert consts[0] == pytest.approx(consts[1], rel=1e-8)


class TestLeadingConstant:
    def test_toy_unit_modulus(self, toy_grid):
        M, _ = estimate_leading_constant(compute_prototype(toy_separable(), 0.5, toy_grid, 1.0))
        assert abs(M) == pytest.approx(1.0, rel=1e-10)

    def test_two_root_rate(self, vertical_grid):
        proto = compute_prototype(two_root_kernel(), 0.5, vertical_grid)
        M, rate = estimate_leading_constant(proto)
        assert np.isfinite(M) and M != 0
        assert rate == pytest.approx(1.0, abs=0.05)


class TestFixedPoint:
    def test_toy_residual(self, toy_grid):
        proto = compute_prototype(toy_separable(), 0.5, toy_grid)
        assert verify_fixed_point(proto, toy_separable()) <= 1e-8

    def test_homogeneous(self, toy_grid):
        proto = compute_prototype(toy_separable(), 0.5, toy_grid)
        r1 = verify_fixed_point(proto, toy_separable())
        r2 = verify_fixed_point(proto.f0 * 2.0, toy_separable())
        assert r2 == pytest.approx(r1, rel=1e-6, abs=1e-15)

    def test_wrong_exponent(self, toy_grid):
        wrong = SingularFunction(toy_grid, 0.5, np.ones(toy_grid.size))
        assert verify_fixed_point(wrong, toy_separable()) > 0.1

    def test_two_root_residual_improves_with_nodes(self):
        res = []
        for n in (6, 12):
            grid = build_ray_grid(Ray(1.0, np.pi / 2, 8.0), nodes_per_panel=n)
            proto = compute_prototype(two_root_kernel(), 0.5, grid)
            res.append(verify_fixed_point(proto, two_root_kernel()))
        assert res[1] < res[0] / 16


class TestBasePoint:
    def test_ratio(self, toy_grid):
        c = base_point_invariance(toy_separable(), 0.5, toy_grid, 1.0, 2.0)
        assert abs(c) == pytest.approx(np.sqrt(2.0), rel=1e-12)

    def test_same_point(self, toy_grid):
        c = base_point_invariance(toy_separable(), 0.5, toy_grid, 1.5, 1.5)
        assert c == pytest.approx(1.0, abs=1e-14)

    def test_two_root_ratio_matches_closed_form(self, vertical_grid):
        c = base_point_invariance(two_root_kernel(), 0.5, vertical_grid, 0.5, 2.0)
        # f0 carries the factor |(zeta(b)-1)(zeta(b)-2)|^(-1/2), so c = h(b2) / h(b1)
        def h(t):
            z = 1 + 1j * t
            return abs((z - 1) * (z - 2)) ** 0.5

        assert abs(c) == pytest.approx(h(2.0) / h(0.5), rel=1e-8)

    def test_corrupted_samples(self, toy_grid):
        f1 = compute_prototype(toy_separable(), 0.5, toy_grid, 1.0).f0
        g = f1.g.copy()
        g[5] *= 1.01
        _, dev = proportionality(f1.with_samples(g), f1)
        assert dev > 1e-8

    def test_raises_on_inconsistent_kernel(self, toy_grid, monkeypatch):
        import rsvolterra.proto as proto_mod

        real = proto_mod.compute_prototype
        calls = []

        def corrupt(*args, **kwargs):
            out = real(*args, **kwargs)
            calls.append(1)
            if len(calls) == 2:
                g = out.f0.g.copy()
                g[3] *= 1.5
                out = proto_mod.PrototypeSolution(out.f0.with_samples(g), out.base_t, out.tau)
            return out

        monkeypatch.setattr(proto_mod, "compute_prototype", corrupt)
        with pytest.raises(NotProportional):
            proto_mod.base_point_invariance(toy_separable(), 0.5, toy_grid, 1.0, 2.0)


def test_write_prototype(tmp_path, toy_grid):
    proto = compute_prototype(toy_separable(), 0.5, toy_grid, normalize=True)
    csv_path, json_path = write_prototype(proto, tmp_path / "f0")
    header = json.loads(json_path.read_text())
    assert header["tau"] == 0.5 and header["M"] == [1.0, 0.0]
    assert csv_path.read_text().count("\n") == toy_grid.size + 2
