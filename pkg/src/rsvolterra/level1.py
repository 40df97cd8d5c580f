"""Level-1 linear ODEs and their Borel-Laplace resummed solutions.

A level-1 problem is the frequency-domain equation

    [P(d/dz) + (1/z) Q(d/dz) + (1/z^2) R(1/z)] Phi = 0

with ``P`` monic of degree ``d`` with simple roots and ``deg Q = d - 1``.
In the position domain each zero ``alpha`` of ``p(zeta) = P(-zeta)`` carries
a regular singular Volterra equation whose solution ``psi_alpha`` behaves like
``(zeta - alpha)^(tau - 1)``, ``tau = Q(-alpha) / P'(-alpha)``. Its Laplace
transform along a ray solves the ODE with ``e^{-alpha z} z^{-tau}``
asymptotics.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import NoAdmissibleRay, NotRegularSingular, RootFindingFailure
from .grid import Ray, RayGrid, build_ray_grid
from .kernels import ConditionReport, KernelPair, PerturbationKernel, SeparableKernel
from .laplace import (
    LaplaceResult,
    _transform,
    cauchy_derivatives,
    derivative_radius,
    laplace_transform,
)
from .solver import Solution, SolveConfig, solve_homogeneous
from .volterra import OperatorHandle

ROOT_TOL = 1e-6
ADMISSIBLE_TOL = 1e-10


def _trim(c) -> np.ndarray:
    c = np.asarray(c, dtype=complex)
    nz = np.nonzero(c)[0]
    return c[: nz[-1] + 1] if nz.size else np.zeros(0, dtype=complex)


@dataclass(frozen=True)
class Level1Problem:
    """Ascending coefficients of ``P``, ``Q`` and the series ``R(1/z) = sum R_j z^-j``."""

    P: tuple[complex, ...]
    Q: tuple[complex, ...]
    R: tuple[complex, ...] = ()
    A: float = 0.0

    def __post_init__(self) -> None:
        for name in ("P", "Q", "R"):
            object.__setattr__(self, name, tuple(complex(c) for c in getattr(self, name)))
        object.__setattr__(self, "A", float(self.A))

    @property
    def degree(self) -> int:
        return _trim(self.P).size - 1

    def operator(self, derivs: np.ndarray, z: complex) -> complex:
        """``P(d) Phi + Q(d) Phi / z + R(1/z) Phi / z^2`` from ``derivs[k] = Phi^(k)(z)``."""
        P, Q, R = np.array(self.P), np.array(self.Q), np.array(self.R)
        out = np.dot(P, derivs[: P.size]) + np.dot(Q, derivs[: Q.size]) / z
        if R.size:
            out += npoly.polyval(1 / z, R) * derivs[0] / z**2
        return complex(out)


@dataclass(frozen=True)
class SingularPoint:
    alpha: complex
    tau: complex
    admissible: bool

    @property
    def tau_real(self) -> float:
        return float(self.tau.real)


@dataclass
class ResummedSolution:
    alpha: complex
    tau: float
    ray: Ray
    psi: Solution
    volterra_residual: float
    Psi: LaplaceResult | None = None
    ode_residual: float | None = None
    extra: dict = field(default_factory=dict)


# {{{ validation and singular points


def _roots(P) -> np.ndarray:
    P = _trim(P)
    if P.size < 2:
        return np.zeros(0, dtype=complex)
    roots = np.roots(P[::-1]).astype(complex)
    dP = npoly.polyder(P)
    scale = np.sum(np.abs(P))
    for _ in range(8):
        step = npoly.polyval(roots, P) / npoly.polyval(roots, dP)
        step[~np.isfinite(step)] = 0
        roots = roots - step
    if np.any(np.abs(npoly.polyval(roots, P)) > 1e-8 * scale * np.maximum(1, np.abs(roots)) ** (P.size - 1)):
        raise RootFindingFailure("polished roots do not satisfy P(x) = 0")
    return roots


def validate_problem(prob: Level1Problem) -> ConditionReport:
    """Check that ``P`` is monic with simple roots, ``deg Q = d - 1``, ``Q`` is
    nonzero at those roots, and the ``R_j`` grow no faster than ``A^j``."""
    reasons: list[str] = []
    P, Q, R = _trim(prob.P), _trim(prob.Q), _trim(prob.R)
    d = P.size - 1
    constants: dict = {"degree": d}
    if d < 1 or abs(P[-1] - 1) > 1e-12:
        reasons.append("NotMonic")
    if Q.size - 1 != d - 1:
        reasons.append("DegreeMismatch")

    roots = _roots(P) if d >= 1 else np.zeros(0, dtype=complex)
    constants["roots"] = roots.tolist()
    if roots.size > 1:
        gaps = np.abs(roots[:, None] - roots[None, :])
        np.fill_diagonal(gaps, np.inf)
        min_gap = float(gaps.min())
        constants["min_root_gap"] = min_gap
        if min_gap < ROOT_TOL * max(1.0, float(np.max(np.abs(roots)))):
            reasons.append("DoubleRoot")
    if roots.size and Q.size:
        qv = np.abs(npoly.polyval(roots, Q))
        if np.any(qv <= 1e-10 * np.sum(np.abs(Q))):
            reasons.append("QVanishesAtRoot")
    elif roots.size:
        reasons.append("QVanishesAtRoot")

    nz = np.nonzero(R)[0]
    if nz.size >= 3:
        rate = float(np.exp(np.polyfit(nz, np.log(np.abs(R[nz])), 1)[0]))
        constants["series_rate"] = rate
        if rate > prob.A * (1 + 1e-6) + 1e-12:
            reasons.append("SeriesGrowth")

    return ConditionReport("level1", not reasons, constants, {}, reasons)


def singular_points(prob: Level1Problem) -> list[SingularPoint]:
    """Zeros ``alpha`` of ``P(-zeta)`` with ``tau = Q(-alpha) / P'(-alpha)``."""
    P, Q = _trim(prob.P), _trim(prob.Q)
    dP = npoly.polyder(P)
    out = []
    for x in _roots(P):
        alpha = -x
        tau = complex(npoly.polyval(x, Q) / npoly.polyval(x, dP))
        ok = abs(tau.imag) <= ADMISSIBLE_TOL and tau.real > ADMISSIBLE_TOL
        if ok:
            tau = complex(tau.real, 0.0)
        out.append(SingularPoint(_clean(alpha), tau, ok))
    return sorted(out, key=lambda s: (s.alpha.real, s.alpha.imag))


def _clean(z: complex) -> complex:
    z = complex(z)
    re = 0.0 if abs(z.real) < 1e-15 * max(1, abs(z)) else z.real
    im = 0.0 if abs(z.imag) < 1e-13 * max(1, abs(z)) else z.imag
    return complex(re, im)


def _point(prob: Level1Problem, alpha: complex) -> SingularPoint:
    pts = singular_points(prob)
    best = min(pts, key=lambda s: abs(s.alpha - alpha))
    if abs(best.alpha - alpha) > 1e-8 * max(1, abs(alpha)):
        raise NotRegularSingular(f"{alpha} is not a zero of P(-zeta)")
    return best


# }}}


# {{{ kernels and rays


def build_kernels(prob: Level1Problem, alpha: complex, max_separation: float = 40.0) -> KernelPair:
    """Kernels of the position-domain equation at the zero *alpha*.

    ``k0 = -Q(-zeta') / P(-zeta)`` and ``k_star = -k_R / P(-zeta)`` with
    ``k_R = sum_j R_j (zeta - zeta')^(j+1) / (j+1)!``; the series is cut
    once its terms fall below ``1e-16`` of the largest at separation
    *max_separation*.
    """
    pt = _point(prob, alpha)
    alpha = pt.alpha
    P, Q = _trim(prob.P), _trim(prob.Q)
    neg = (-1.0) ** np.arange(max(P.size, Q.size))
    p_coeffs = P * neg[: P.size]
    q_coeffs = Q * neg[: Q.size]
    roots = _roots(P)

    def p(z):
        # factored form keeps relative accuracy near each zero
        z = np.asarray(z, dtype=complex)
        out = np.ones_like(z)
        for x in roots:
            out = out * (-z - x)
        return out

    def q(z):
        return npoly.polyval(z, q_coeffs)

    k0 = SeparableKernel(p, q, alpha, tuple(p_coeffs), tuple(q_coeffs))

    R = _trim(prob.R)
    if R.size == 0:
        return KernelPair(k0)
    bound = np.array(
        [abs(R[j]) * max_separation ** (j + 1) / math.factorial(j + 1) for j in range(R.size)]
    )
    keep = int(np.nonzero(bound >= 1e-16 * bound.max())[0][-1]) + 1
    coeffs = np.array([R[j] / math.factorial(j + 1) for j in range(keep)])

    def k_star(z, zp):
        dz = np.asarray(z) - np.asarray(zp)
        kR = dz * npoly.polyval(dz, coeffs)
        return -kR / p(z)

    return KernelPair(k0, PerturbationKernel(k_star, 1.0, max(prob.A, 0.0) + 1.0))


def _angle_gap(a: float, b: float) -> float:
    d = (a - b) % (2 * np.pi)
    return min(d, 2 * np.pi - d)


def choose_ray(
    prob: Level1Problem,
    alpha: complex,
    requested_theta: float | None = None,
    T: float = 40.0,
    margin: float = np.deg2rad(10.0),
) -> Ray:
    """Ray from *alpha* that stays at least *margin* away from every other zero."""
    pts = singular_points(prob)
    alpha = _point(prob, alpha).alpha
    dirs = [
        float(np.angle(s.alpha - alpha)) % (2 * np.pi)
        for s in pts
        if abs(s.alpha - alpha) > 1e-12
    ]

    def clear(theta):
        return all(_angle_gap(theta, d) > margin for d in dirs)

    if requested_theta is not None:
        if not clear(requested_theta):
            raise NoAdmissibleRay(
                f"direction {requested_theta:.4g} passes within the margin of another singular point"
            )
        return Ray(alpha, requested_theta, T)
    if clear(0.0):
        return Ray(alpha, 0.0, T)
    ds = sorted(dirs)
    gaps = [((ds[(i + 1) % len(ds)] - ds[i]) % (2 * np.pi) or 2 * np.pi, ds[i]) for i in range(len(ds))]
    width, start = max(gaps)
    if width / 2 <= margin:
        raise NoAdmissibleRay("no direction clears every other singular point")
    return Ray(alpha, (start + width / 2) % (2 * np.pi), T)


# }}}


# {{{ pipeline


def solve_at(
    prob: Level1Problem,
    alpha: complex,
    ray: Ray | None = None,
    cfg: SolveConfig | None = None,
    grid: RayGrid | None = None,
    nodes_per_panel: int = 16,
    ratio: float = 2.0,
    order: int = 20,
    quad_tol: float = 1e-9,
) -> ResummedSolution:
    """Position-domain solution ``psi_alpha``, normalized to ``(zeta - alpha)^(tau-1) + ...``."""
    pt = _point(prob, alpha)
    if not pt.admissible:
        raise NotRegularSingular(f"tau={pt.tau} at alpha={pt.alpha} is not real and positive")
    if ray is None:
        ray = choose_ray(prob, pt.alpha)
    if cfg is None:
        cfg = SolveConfig(stop_lambda=0.0)
    if grid is None:
        grid = build_ray_grid(ray, ratio=ratio, nodes_per_panel=nodes_per_panel)
    kernels = build_kernels(prob, pt.alpha, max_separation=ray.T)
    op = OperatorHandle(kernels, grid, order=order, quad_tol=quad_tol)
    sol = solve_homogeneous(kernels.k0, kernels.k_star, pt.tau_real, grid, cfg, gamma=1.0, op=op)
    return ResummedSolution(pt.alpha, pt.tau_real, ray, sol, sol.final_residual)


def ode_residual(prob: Level1Problem, psi, z_samples, lam: float) -> float:
    """Largest ``|P Psi| / |Psi|`` over *z_samples*, derivatives by Cauchy circles."""
    theta = psi.grid.ray.theta
    d = max(len(prob.P), len(prob.Q)) - 1
    worst = 0.0
    for z in np.atleast_1d(np.asarray(z_samples, dtype=complex)):
        r = derivative_radius(z, theta, lam)
        derivs = cauchy_derivatives(lambda w: _transform(psi, w), z, d, r)
        worst = max(worst, abs(prob.operator(derivs, z)) / abs(derivs[0]))
    return worst


def borel_sum(
    prob: Level1Problem,
    alpha: complex,
    ray: Ray | None = None,
    z_samples=(2.0,),
    cfg: SolveConfig | None = None,
    margin: float = 0.1,
    accuracy: float | None = 1e-8,
    solution: ResummedSolution | None = None,
    **grid_opts,
) -> ResummedSolution:
    """Resummed solution ``Psi_alpha`` at *z_samples* with its ODE residual."""
    res = solution if solution is not None else solve_at(prob, alpha, ray, cfg, **grid_opts)
    psi = res.psi.f
    Psi = laplace_transform(psi, z_samples, margin, accuracy)
    res.Psi = Psi
    res.ode_residual = ode_residual(prob, psi, Psi.z_samples, Psi.lam)
    return res


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("RSV_THREADS", "0")) or os.cpu_count() or 1)
    except ValueError:
        return 1


def borel_sum_all(prob: Level1Problem, z_by_alpha=None, **kwargs) -> list[ResummedSolution]:
    """Resummed solutions at every admissible singular point, run concurrently."""
    pts = [s for s in singular_points(prob) if s.admissible]
    z_by_alpha = z_by_alpha or {}

    def run(pt):
        return borel_sum(prob, pt.alpha, z_samples=z_by_alpha.get(pt.alpha, (2.0,)), **kwargs)

    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        return list(pool.map(run, pts))


# }}}
