"""Fixed-point solution of regular singular Volterra equations.

The inhomogeneous equation ``f = V f + g`` is solved by Picard iteration in
the weighted space ``(rho - 1, Lambda)``, where ``V`` is a contraction. The
homogeneous equation ``f = V f`` is reduced to it through ``f = f0 + f_star``
with ``f0`` the prototype solution and ``g = V_star f0``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    DomainError,
    MaxIterExceeded,
    MismatchDetected,
    NotContracting,
    ResonanceError,
)
from .grid import NormParams, RayGrid, SingularFunction, weighted_norm
from .kernels import (
    KernelPair,
    PerturbationKernel,
    SeparableKernel,
    _jsonable,
    taylor_shift,
)
from .proto import PrototypeSolution, compute_prototype
from .volterra import (
    ContractionEstimate,
    OperatorHandle,
    apply,
    contraction_estimate,
    lambda_lower_search,
)

#: relative size of an iterate difference treated as roundoff
ROUNDOFF_FLOOR = 1e-13


@dataclass(frozen=True)
class SolveConfig:
    """Parameters of the fixed-point iteration.

    ``lam = 0`` selects ``Lambda`` by :func:`lambda_lower_search`. When
    *stop_lambda* is set, iteration also continues until the difference of
    iterates is below tolerance in the ``(rho - 1, stop_lambda)`` norm, which
    controls the far field on the truncated ray.
    """

    rho: float | None = None
    lam: float = 0.0
    kappa_target: float = 0.9
    tol: float = 1e-10
    max_iter: int = 500
    stop_lambda: float | None = None
    delta: float | None = None
    seed: int = 0
    trials: int = 16

    def __post_init__(self) -> None:
        if not self.tol > 0:
            raise DomainError(f"tolerance must be positive, got {self.tol}")
        if not 0 < self.kappa_target < 1:
            raise DomainError(f"kappa_target must lie in (0, 1), got {self.kappa_target}")
        if self.max_iter < 1:
            raise DomainError("max_iter must be at least 1")


@dataclass
class HomogeneousProblem:
    k0: SeparableKernel
    k_star: PerturbationKernel | None
    tau: float
    grid: RayGrid
    gamma: float | None = None


@dataclass
class Solution:
    f: SingularFunction
    f_star: SingularFunction
    iterations: int
    final_residual: float
    contraction: ContractionEstimate
    lam: float
    rho: float
    history: list[float] = field(default_factory=list)
    proto: PrototypeSolution | None = None
    problem: HomogeneousProblem | None = None
    cfg: SolveConfig | None = None

    def report(self, n_coefficients: int = 3) -> dict:
        out = {
            "iterations": self.iterations,
            "kappa": self.contraction.overall,
            "contraction": json.loads(self.contraction.to_json()),
            "lambda": self.lam,
            "rho": self.rho,
            "residual": self.final_residual,
            "lambda_hint": self.f.lambda_hint,
        }
        if self.problem is not None:
            coeffs = fit_series_coefficients(self.f, self.problem.tau, n_coefficients)
            out["leading_coefficients"] = [1.0 + 0j, *coeffs]
        return _jsonable(out)

    def to_json(self) -> str:
        return json.dumps(self.report(), sort_keys=True, indent=2)


def growth_rate(f: SingularFunction, panels: int = 2) -> float:
    """Nonnegative exponential growth rate of ``|f|`` over the outer panels."""
    grid = f.grid
    n = grid.nodes_per_panel * min(panels, grid.npanels)
    t = grid.nodes[-n:]
    v = np.abs(f.g[-n:])
    if not np.all(v > 0):
        return 0.0
    slope = np.polyfit(t, np.log(v), 1)[0]
    return max(0.0, float(slope))


def _choose_lambda(op: OperatorHandle, rho: float, cfg: SolveConfig):
    delta = cfg.delta if cfg.delta is not None else min(1.0, op.grid.T / 2)
    if cfg.lam > 0:
        lam = cfg.lam
    else:
        lam = lambda_lower_search(
            op, rho, cfg.kappa_target, 0.0, delta, trials=cfg.trials, seed=cfg.seed
        )
    return lam, contraction_estimate(op, rho, lam, delta, cfg.trials, cfg.seed)


def solve_inhomogeneous(
    op: OperatorHandle, g: SingularFunction, cfg: SolveConfig, lam: float | None = None
) -> Solution:
    """Fixed point of ``f = V f + g`` by Picard iteration from ``f = g``.

    The iterates keep the storage exponent of *g*; the convergence test and
    the contraction factor use the ``(rho - 1, Lambda)`` norm.
    """
    rho = cfg.rho
    if rho is None:
        raise DomainError("the inhomogeneous solve needs an explicit rho")
    if g.sigma < rho - 1 - 1e-12:
        raise DomainError(f"source exponent {g.sigma} is below rho - 1 = {rho - 1}")

    if lam is None:
        lam, est = _choose_lambda(op, rho, cfg)
    else:
        delta = cfg.delta if cfg.delta is not None else min(1.0, op.grid.T / 2)
        est = contraction_estimate(op, rho, lam, delta, cfg.trials, cfg.seed)
    kappa = est.overall
    if kappa >= 1:
        raise NotContracting(f"measured contraction {kappa:.4g} at Lambda={lam:g}")

    norms = [NormParams(rho - 1, lam)]
    if cfg.stop_lambda is not None:
        norms.append(NormParams(rho - 1, cfg.stop_lambda))
    target = cfg.tol * (1 - kappa)

    f = g
    history: list[float] = []
    growing = 0
    for it in range(1, cfg.max_iter + 1):
        f_new = apply(op, f, sigma_out=g.sigma) + g
        diff = f_new - f
        d = [weighted_norm(diff, p) for p in norms]
        history.append(d[0])
        f = f_new
        if all(di <= target for di in d):
            break
        scale = weighted_norm(f, norms[0])
        if it > 1 and history[-1] >= history[-2] and history[-1] > ROUNDOFF_FLOOR * scale:
            growing += 1
            if growing >= 3:
                raise NotContracting(
                    f"iterate differences grew for 3 steps (last {history[-1]:.3g})"
                )
        else:
            growing = 0
    else:
        raise MaxIterExceeded(f"no convergence in {cfg.max_iter} iterations")

    res = f - apply(op, f, sigma_out=g.sigma) - g
    residual = weighted_norm(res, norms[0])
    f = SingularFunction(f.grid, f.sigma, f.g, growth_rate(f))
    return Solution(f, f, len(history), residual, est, lam, rho, history, cfg=cfg)


def solve_homogeneous(
    k0: SeparableKernel,
    k_star: PerturbationKernel | None,
    tau: float,
    grid: RayGrid,
    cfg: SolveConfig,
    gamma: float | None = None,
    op: OperatorHandle | None = None,
) -> Solution:
    """Normalized solution ``f = f0 + f_star`` of ``f = V f``.

    ``f0`` is the prototype divided by its leading coefficient and
    ``f_star`` solves ``f_star = V_star f0 + V f_star``. The returned
    ``final_residual`` is ``|f - V f|`` in the ``(tau - 1, Lambda)`` norm.
    """
    if gamma is None:
        gamma = k_star.gamma if k_star is not None else 1.0
    problem = HomogeneousProblem(k0, k_star, tau, grid, gamma)
    rho = cfg.rho if cfg.rho is not None else tau + min(gamma, 1.0)
    if not rho > tau:
        raise DomainError(f"need rho > tau, got rho={rho}, tau={tau}")
    cfg = replace(cfg, rho=rho)

    if op is None:
        op = OperatorHandle(KernelPair(k0, k_star), grid)
    proto = compute_prototype(k0, tau, grid, normalize=True)
    f0 = proto.f0

    if k_star is None:
        lam, est = _choose_lambda(op, rho, cfg)
        f_star = SingularFunction.zeros(grid, tau - 1 + gamma)
        inner = Solution(f_star, f_star, 0, 0.0, est, lam, rho, [], cfg=cfg)
    else:
        g = apply(op.restrict("perturbation"), f0, sigma_out=tau - 1 + gamma)
        inner = solve_inhomogeneous(op, g, cfg)
        f_star = inner.f

    f = f0 + f_star
    f = SingularFunction(grid, f.sigma, f.g, growth_rate(f))
    res = f - apply(op, f)
    residual = weighted_norm(res, NormParams(tau - 1, inner.lam))
    return Solution(
        f,
        f_star,
        inner.iterations,
        residual,
        inner.contraction,
        inner.lam,
        rho,
        inner.history,
        proto=proto,
        problem=problem,
        cfg=cfg,
    )


# {{{ series oracle


def series_oracle(
    k0: SeparableKernel, R, tau: float, N: int, alpha: complex | None = None
) -> np.ndarray:
    """Coefficients ``c_0..c_N`` of ``psi = sum c_n (zeta - alpha)^(tau - 1 + n)``.

    Solves ``p psi + int q psi + int k_R psi = 0`` term by term, where
    ``k_R(zeta, zeta') = sum_j R_j (zeta - zeta')^(j+1) / (j+1)!``. This is an
    independent check on the numerical solution and needs polynomial ``p, q``.
    """
    if k0.p_coeffs is None or k0.q_coeffs is None:
        raise DomainError("the series oracle needs polynomial coefficients for p and q")
    alpha = k0.alpha if alpha is None else complex(alpha)
    p = taylor_shift(k0.p_coeffs, alpha)
    q = taylor_shift(k0.q_coeffs, alpha)
    R = np.asarray(R, dtype=complex) if R is not None else np.zeros(0, dtype=complex)

    def coeff(a, k):
        return a[k] if 0 <= k < a.size else 0.0

    def gamma_ratio(m, n):
        # Gamma(tau + m) / Gamma(tau + n + 1) for m <= n
        return 1.0 / math.prod(tau + i for i in range(m, n + 1))

    p1 = p[1]
    c = np.zeros(N + 1, dtype=complex)
    c[0] = 1.0
    for n in range(1, N + 1):
        if any(abs(tau + i) < 1e-14 for i in range(n + 1)):
            raise ResonanceError(f"recursion denominator vanishes at n={n}")
        acc = sum(coeff(p, k) * c[n + 1 - k] for k in range(2, n + 2))
        acc += sum(coeff(q, k) * c[n - k] for k in range(1, n + 1)) / (tau + n)
        acc += sum(coeff(R, j) * c[n - 1 - j] * gamma_ratio(n - 1 - j, n) for j in range(n))
        c[n] = -(tau + n) / (n * p1) * acc
    return c


def fit_series_coefficients(
    f: SingularFunction, tau: float, n_terms: int = 3, t_max: float = 0.5, degree: int = 10
) -> np.ndarray:
    """Least-squares ``c_1..c_n`` with ``f = (zeta - alpha)^(tau-1) (1 + sum c_k x^k)``.

    A polynomial of *degree* in ``x = t e^{i theta}`` is fitted to the smooth
    part on ``t <= t_max`` and its first *n_terms* higher coefficients are
    returned.
    """
    grid = f.grid
    g = f.with_exponent(tau - 1).g
    mask = grid.nodes <= t_max
    x = grid.nodes[mask] * grid.ray.direction
    V = np.vander(x / t_max, degree + 1, increasing=True)
    coef, *_ = np.linalg.lstsq(V, g[mask], rcond=None)
    coef = coef / t_max ** np.arange(degree + 1)
    return coef[1 : n_terms + 1] / coef[0]


# }}}


def uniqueness_probe(solution: Solution, rho_alt: float) -> dict:
    """Re-solve with ``rho = rho_alt`` and compare with *solution*.

    The two solutions are compared in the coarser norm, with the smaller
    power and the larger exponential rate.
    """
    prob = solution.problem
    if prob is None or solution.cfg is None:
        raise DomainError("uniqueness probes need a homogeneous solution")
    if not rho_alt > prob.tau or rho_alt == solution.rho:
        raise DomainError(f"rho_alt must exceed tau and differ from rho={solution.rho}")
    cfg = replace(solution.cfg, rho=rho_alt, lam=0.0)
    other = solve_homogeneous(prob.k0, prob.k_star, prob.tau, prob.grid, cfg, prob.gamma)
    params = NormParams(min(solution.rho, rho_alt) - 1, max(solution.lam, other.lam))
    diff = weighted_norm(solution.f - other.f, params)
    threshold = 10 * max(solution.cfg.tol, cfg.tol)
    report = {
        "rho": solution.rho,
        "rho_alt": rho_alt,
        "lambda": solution.lam,
        "lambda_alt": other.lam,
        "difference": diff,
        "threshold": threshold,
    }
    if diff > threshold:
        raise MismatchDetected(f"solutions differ by {diff:.3g} > {threshold:.3g}")
    return report
