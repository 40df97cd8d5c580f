"""Application of regular singular Volterra operators, smoothing and contraction.

``V0`` has the separable kernel ``k0``, ``V_star`` the perturbation kernel and
``V = V0 + V_star``. Operators act on :class:`SingularFunction` samples through
a dense matrix assembled once per pair of storage exponents.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DomainError, ExponentTooSingular, QuadratureFailure, SearchExhausted
from .grid import NormParams, RayGrid, SingularFunction, log_weighted_profile
from .kernels import ConditionReport, KernelPair
from .quadrature import assemble, is_integer

PARTS = ("full", "separable", "perturbation")


@dataclass(eq=False)
class OperatorHandle:
    """A Volterra operator bound to a grid and a quadrature rule.

    *part* selects ``V`` (``"full"``), ``V0`` (``"separable"``) or ``V_star``
    (``"perturbation"``). The quadrature error of every application is
    estimated by comparing rules of order ``order`` and ``order + 8``.
    """

    kernel: KernelPair
    grid: RayGrid
    part: str = "full"
    order: int = 20
    rule: str = "gauss-jacobi"
    quad_tol: float = 1e-9
    reports: tuple[ConditionReport, ...] = ()
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if self.part not in PARTS:
            raise ValueError(f"unknown operator part {self.part!r}")
        if self.rule != "gauss-jacobi":
            raise ValueError(f"unsupported quadrature rule {self.rule!r}")

    def restrict(self, part: str) -> OperatorHandle:
        return OperatorHandle(
            self.kernel, self.grid, part, self.order, self.rule, self.quad_tol, self.reports
        )

    @property
    def is_zero(self) -> bool:
        k0, ks = self.kernel.k0, self.kernel.k_star
        if self.part == "separable":
            return k0 is None
        if self.part == "perturbation":
            return ks is None
        return k0 is None and ks is None

    def default_sigma_out(self, sigma: float) -> float:
        if self.part == "perturbation" and self.kernel.k_star is not None:
            return sigma + self.kernel.k_star.gamma
        return sigma

    def _assemble(self, sigma_in: float, sigma_out: float, order: int) -> np.ndarray:
        k0, ks = self.kernel.k0, self.kernel.k_star
        N = self.grid.size
        M = np.zeros((N, N), dtype=complex)
        if k0 is not None and self.part in ("full", "separable"):
            M += assemble(self.grid, k0, sigma_in, sigma_out, 0.0, order)
        if ks is not None and self.part in ("full", "perturbation"):
            gamma = ks.gamma
            if self.part == "perturbation" and not is_integer(gamma):
                theta = self.grid.ray.theta

                def k_hat(z, zp):
                    return ks(z, zp) / (np.abs(z - zp) ** gamma * np.exp(1j * gamma * theta))

                M += assemble(self.grid, k_hat, sigma_in, sigma_out, gamma, order)
            else:
                M += assemble(self.grid, ks, sigma_in, sigma_out, 0.0, order)
        return M

    def matrix(self, sigma_in: float, sigma_out: float) -> tuple[np.ndarray, np.ndarray]:
        """Operator matrix on smooth parts and its quadrature-error companion."""
        key = (float(sigma_in), float(sigma_out))
        if key not in self._cache:
            lo = self._assemble(sigma_in, sigma_out, self.order)
            hi = self._assemble(sigma_in, sigma_out, self.order + 8)
            self._cache[key] = (hi, hi - lo)
        return self._cache[key]


def apply(op: OperatorHandle, phi: SingularFunction, sigma_out: float | None = None):
    """``op`` applied to ``phi``, resampled on the same grid."""
    if phi.grid is not op.grid:
        raise ValueError("function and operator live on different grids")
    if phi.sigma <= -1:
        raise ExponentTooSingular(f"exponent {phi.sigma} is not integrable at alpha")
    if sigma_out is None:
        sigma_out = op.default_sigma_out(phi.sigma)
    if op.is_zero:
        return SingularFunction(op.grid, sigma_out, np.zeros(op.grid.size), phi.lambda_hint)

    M, dM = op.matrix(phi.sigma, sigma_out)
    g = M @ phi.g
    scale = max(np.max(np.abs(g)), np.max(np.abs(phi.g)) * 1e-300)
    if scale > 0:
        err = np.max(np.abs(dM @ phi.g)) / scale
        if err > op.quad_tol:
            raise QuadratureFailure(f"panel quadrature unresolved (estimated error {err:.2e})")
    return SingularFunction(op.grid, sigma_out, g, phi.lambda_hint)


def beta_moment(gamma: float, sigma: float) -> float:
    """``int_0^1 (1 - t)^gamma t^sigma dt = Gamma(gamma+1) Gamma(sigma+1) / Gamma(sigma+gamma+2)``."""
    if gamma <= -1 or sigma <= -1:
        raise DomainError(f"beta moment needs gamma, sigma > -1, got {gamma}, {sigma}")
    return math.exp(math.lgamma(gamma + 1) + math.lgamma(sigma + 1) - math.lgamma(sigma + gamma + 2))


def fitted_order(f: SingularFunction, panels: int = 3) -> float | None:
    """Log-log slope of ``|f|`` over the innermost *panels* panels."""
    grid = f.grid
    n = grid.nodes_per_panel * min(panels, grid.npanels)
    t = grid.nodes[:n]
    v = np.abs(f.values()[:n])
    if not np.all(v > 0):
        return None
    return float(np.polyfit(np.log(t), np.log(v), 1)[0])


def smoothing_order(op: OperatorHandle, phi: SingularFunction) -> float | None:
    """Fitted exponent of ``V_star phi`` near ``alpha``; ``None`` if it vanishes."""
    if op.part != "perturbation":
        op = op.restrict("perturbation")
    out = apply(op, phi)
    if not np.any(out.g):
        return None
    return fitted_order(out)


# {{{ contraction


@dataclass
class ContractionEstimate:
    rho: float
    lam: float
    near_factor: float
    far_factor: float
    overall: float
    delta_split: float
    trials: int = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _random_trial(grid: RayGrid, rng: np.random.Generator, degree: int = 8) -> np.ndarray:
    r = np.sqrt(rng.uniform(size=degree + 1))
    c = r * np.exp(2j * np.pi * rng.uniform(size=degree + 1))
    return np.polynomial.polynomial.polyval(grid.nodes / grid.T, c)


def _split_sup(f: SingularFunction, params: NormParams, delta: float) -> tuple[float, float]:
    t, logw = log_weighted_profile(f, params)
    near = logw[t < delta]
    far = logw[t >= delta]
    return (
        float(near.max()) if near.size else -np.inf,
        float(far.max()) if far.size else -np.inf,
    )


def contraction_estimate(
    op: OperatorHandle,
    rho: float,
    lam: float,
    delta: float,
    trials: int = 16,
    seed: int = 0,
) -> ContractionEstimate:
    """Empirical norm of ``V`` on the ``(rho - 1, lam)`` space, split at ``delta``.

    Test functions are ``(zeta - alpha)^(rho-1)`` times random degree-8
    polynomials in ``t/T``, plus the monomial itself, which is extremal for
    the separable part near ``alpha``. Ratios are formed in log space so very
    large ``lam`` does not underflow.
    """
    grid = op.grid
    params = NormParams(rho - 1, lam)
    if op.is_zero:
        return ContractionEstimate(rho, lam, 0.0, 0.0, 0.0, delta, trials)

    samples = [np.ones(grid.size, dtype=complex)]
    for k in range(trials):
        samples.append(_random_trial(grid, np.random.default_rng([seed, k])))

    near = far = -np.inf
    for g in samples:
        phi = SingularFunction(grid, rho - 1, g)
        _, logw = log_weighted_profile(phi, params)
        log_norm = float(logw.max())
        n_out, f_out = _split_sup(apply(op, phi), params, delta)
        near = max(near, n_out - log_norm)
        far = max(far, f_out - log_norm)
    near_f, far_f = math.exp(near), math.exp(far)
    return ContractionEstimate(rho, lam, near_f, far_f, max(near_f, far_f), delta, len(samples))


def lambda_lower_search(
    op: OperatorHandle,
    rho: float,
    kappa_target: float,
    lambda_start: float = 0.0,
    delta: float | None = None,
    max_doublings: int = 40,
    trials: int = 16,
    seed: int = 0,
) -> float:
    """Smallest ``Lambda = start * 2^k`` whose measured contraction is below target.

    Starts from ``max(lambda_start, lambda_delta + 1)``; the result is always
    larger than the kernel's ``lambda_delta``.
    """
    if not 0 < kappa_target < 1:
        raise DomainError(f"kappa_target must lie in (0, 1), got {kappa_target}")
    lam = max(lambda_start, op.kernel.lambda_delta + 1)
    if op.is_zero:
        return lam
    if delta is None:
        delta = min(1.0, op.grid.T / 2)
    for _ in range(max_doublings + 1):
        est = contraction_estimate(op, rho, lam, delta, trials, seed)
        if est.overall <= kappa_target:
            return lam
        lam *= 2
    raise SearchExhausted(
        f"no Lambda up to {lam / 2:.3g} gives contraction below {kappa_target} "
        f"(last measured {est.overall:.4g})"
    )


# }}}
