from __future__ import annotations

import numpy as np
import pytest

from rsvolterra.grid import Ray, build_ray_grid
from rsvolterra.kernels import KernelPair, PerturbationKernel, SeparableKernel
from rsvolterra.level1 import Level1Problem, borel_sum, choose_ray, solve_at
from rsvolterra.solver import SolveConfig, solve_homogeneous

TAU = 0.5
R0 = 0.25


def toy_separable() -> SeparableKernel:
    """``k0 = 0.5 / (zeta - 1)`` from ``p = 1 - zeta``, ``q = 0.5``."""
    return SeparableKernel.from_polynomials([1.0, -1.0], [0.5], 1.0)


def toy_perturbation(r0: float = R0) -> PerturbationKernel:
    return PerturbationKernel(lambda z, zp: r0 * (z - zp) / (z - 1), 1.0, 1.0)


@pytest.fixture(scope="session")
def toy_grid():
    return build_ray_grid(Ray(1.0, 0.0, 40.0))


@pytest.fixture(scope="session")
def small_grid():
    return build_ray_grid(Ray(1.0, 0.0, 8.0), nodes_per_panel=12)


@pytest.fixture(scope="session")
def toy_kernels():
    return KernelPair(toy_separable(), toy_perturbation())


@pytest.fixture(scope="session")
def toy_solution(toy_grid, toy_kernels):
    cfg = SolveConfig(tol=1e-10, stop_lambda=0.0)
    return solve_homogeneous(toy_kernels.k0, toy_kernels.k_star, TAU, toy_grid, cfg)


@pytest.fixture(scope="session")
def exponential_monomial():
    prob = Level1Problem([1, 1], [0.5])
    return prob, borel_sum(prob, 1.0, z_samples=[2.0, 4.0, 8.0])


@pytest.fixture(scope="session")
def perturbed():
    prob = Level1Problem([1, 1], [0.5], [R0])
    return prob, borel_sum(prob, 1.0, z_samples=[2.0, 4.0])


@pytest.fixture(scope="session")
def two_roots():
    prob = Level1Problem([2, 3, 1], [1.5, 1])
    ray = choose_ray(prob, 1.0, np.pi / 2)
    return prob, solve_at(prob, 1.0, ray)


def pytest_terminal_summary(terminalreporter):
    from .test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[k])
