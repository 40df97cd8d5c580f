"""Fractional integrals and the Laplace transform along a ray.

The transform of ``phi`` along the ray from ``alpha`` in direction ``theta``
is

    Phi(z) = int_0^infty e^{-z zeta} phi(zeta) d zeta,   zeta = alpha + t e^{i theta},

truncated at the ray length ``T``. The omitted tail is bounded from the
weighted norm of ``phi`` and an incomplete gamma function.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.special import gammaincc

from .errors import DomainError, HalfPlaneViolation, TailTooLarge
from .grid import NormParams, RayGrid, SingularFunction, weighted_norm
from .kernels import _jsonable
from .quadrature import assemble, gauss_jacobi, gauss_legendre

#: largest ``|z| h`` allowed on a quadrature subpanel of length ``h``
OSCILLATION_LIMIT = 4.0


# {{{ fractional integrals


@lru_cache(maxsize=64)
def _fractional_matrix(grid: RayGrid, nu: float, sigma: float, order: int) -> np.ndarray:
    return assemble(grid, None, sigma, sigma + nu, nu - 1, order) / math.gamma(nu)


def fractional_integral(nu: float, phi: SingularFunction, order: int = 24) -> SingularFunction:
    """Riemann-Liouville integral of order *nu* based at ``alpha``.

    The result is stored with exponent ``sigma + nu``.
    """
    if not nu > 0:
        raise DomainError(f"order must be positive, got {nu}")
    if not phi.sigma > -1:
        raise DomainError(f"exponent must exceed -1, got {phi.sigma}")
    M = _fractional_matrix(phi.grid, float(nu), phi.sigma, order)
    return SingularFunction(phi.grid, phi.sigma + nu, M @ phi.g, phi.lambda_hint)


def multiply_by_zeta_power(phi: SingularFunction, n: int) -> SingularFunction:
    """``zeta^n phi`` in the same representation."""
    zeta = phi.grid.zeta
    return SingularFunction(phi.grid, phi.sigma, zeta**n * phi.g, phi.lambda_hint)


# }}}


# {{{ Laplace transform


@dataclass(frozen=True)
class LaplaceResult:
    theta: float
    alpha: complex
    z_samples: np.ndarray
    phi_values: np.ndarray
    tail_bound: np.ndarray
    lam: float
    T: float

    def header(self) -> dict:
        return _jsonable(
            {"theta": self.theta, "alpha": self.alpha, "lambda": self.lam, "T": self.T}
        )

    def write_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["re_z", "im_z", "re_phi", "im_phi", "tail_bound"])
            for z, v, b in zip(self.z_samples, self.phi_values, self.tail_bound):
                writer.writerow([float(z.real), float(z.imag), float(v.real), float(v.imag), float(b)])
        path.with_suffix(".json").write_text(
            json.dumps(self.header(), sort_keys=True, indent=2) + "\n"
        )


def _quadrature_points(grid: RayGrid, zmax: float, m: int):
    """Points and weights on ``[t_min, T]`` resolving ``e^{-z t}`` for ``|z| <= zmax``."""
    x, w = gauss_legendre(m)
    ts, ws = [], []
    for a, b in grid.panels:
        pieces = max(1, math.ceil(zmax * (b - a) / OSCILLATION_LIMIT))
        ends = np.linspace(a, b, pieces + 1)
        lo, hi = ends[:-1, None], ends[1:, None]
        ts.append((0.5 * (lo + hi) + 0.5 * (hi - lo) * x).ravel())
        ws.append((0.5 * (hi - lo) * w).ravel())
    return np.concatenate(ts), np.concatenate(ws)


def _transform(phi: SingularFunction, z: np.ndarray, m: int = 24) -> np.ndarray:
    """Truncated transform at every entry of *z*, without admissibility checks."""
    grid = phi.grid
    ray = grid.ray
    e = ray.direction
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    sigma = phi.sigma

    # innermost [0, t_min] carries t^sigma as a Jacobi weight
    xj, wj = gauss_jacobi(m, 0.0, sigma)
    h = grid.t_min
    t0 = h * (1 + xj) / 2
    w0 = wj * (h / 2) ** (sigma + 1)
    g0 = grid.interpolation_matrix(t0) @ phi.g

    t1, w1 = _quadrature_points(grid, float(np.max(np.abs(z))), m)
    g1 = grid.interpolation_matrix(t1, extrapolate=False) @ phi.g
    w1 = w1 * t1**sigma

    t = np.concatenate([t0, t1])
    wg = np.concatenate([w0 * g0, w1 * g1])
    integral = np.exp(-np.outer(z * e, t)) @ wg
    return np.exp(-z * ray.alpha) * np.exp(1j * ray.theta * (sigma + 1)) * integral


def tail_bounds(phi: SingularFunction, z, lam: float) -> np.ndarray:
    """Bound on ``|int_T^infty e^{-z zeta} phi d zeta|`` given exponential type *lam*.

    Uses ``|phi| <= C t^sigma e^{lam t}`` with ``C`` the grid weighted norm.
    """
    grid = phi.grid
    ray = grid.ray
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    C = weighted_norm(phi, NormParams(phi.sigma, lam))
    c = (z * ray.direction).real - lam
    s = phi.sigma + 1
    tail = gamma_fn(s) * gammaincc(s, c * ray.T) * c**-s
    return np.abs(np.exp(-z * ray.alpha)) * C * tail


def laplace_transform(
    phi: SingularFunction,
    z_samples,
    margin: float = 0.1,
    accuracy: float | None = None,
    lam: float | None = None,
    order: int = 24,
) -> LaplaceResult:
    """Truncated ray Laplace transform with per-sample tail bounds.

    Every sample must satisfy ``Re(z e^{i theta}) >= lam + margin`` where
    *lam* defaults to ``phi.lambda_hint``. With *accuracy* set, a sample
    whose tail bound exceeds ``accuracy |Phi(z)|`` raises
    :class:`TailTooLarge`.
    """
    if not phi.sigma > -1:
        raise DomainError(f"exponent must exceed -1, got {phi.sigma}")
    if not margin > 0:
        raise DomainError("margin must be positive")
    grid = phi.grid
    ray = grid.ray
    lam = phi.lambda_hint if lam is None else lam
    z = np.atleast_1d(np.asarray(z_samples, dtype=complex))
    reach = (z * ray.direction).real
    bad = reach < lam + margin
    if np.any(bad):
        raise HalfPlaneViolation(
            f"z={z[bad][0]} lies outside Re(z e^(i theta)) >= {lam + margin:g}"
        )

    values = _transform(phi, z, order)
    tails = tail_bounds(phi, z, lam)
    if accuracy is not None:
        rel = tails / np.maximum(np.abs(values), 1e-300)
        if np.any(rel > accuracy):
            k = int(np.argmax(rel))
            raise TailTooLarge(
                f"tail bound {tails[k]:.3g} at z={z[k]} exceeds the requested accuracy"
            )
    return LaplaceResult(ray.theta, ray.alpha, z, values, tails, float(lam), ray.T)


# }}}


# {{{ frequency-domain derivatives and the operator dictionary


def cauchy_derivatives(func, z: complex, n_max: int, radius: float, N: int = 64) -> np.ndarray:
    """Derivatives ``f^(k)(z)`` for ``k = 0..n_max`` by the trapezoid rule on a circle."""
    if not radius > 0:
        raise DomainError("radius must be positive")
    w = radius * np.exp(2j * np.pi * np.arange(N) / N)
    a = np.fft.fft(func(z + w)) / N
    k = np.arange(n_max + 1)
    return a[: n_max + 1] * np.array([math.factorial(j) for j in k]) / radius**k


def derivative_radius(z: complex, theta: float, lam: float) -> float:
    """Half the distance from *z* to the boundary ``Re(z e^{i theta}) = lam``."""
    return 0.5 * ((z * np.exp(1j * theta)).real - lam)


def ray_power(z, s: float, theta: float):
    """``z^s`` on the branch continuous along the half-plane facing the ray."""
    w = np.asarray(z, dtype=complex) * np.exp(1j * theta)
    return w**s * np.exp(-1j * s * theta)


def verify_dictionary(
    phi: SingularFunction,
    nu: float,
    n: int,
    z_samples,
    margin: float = 0.1,
    lam: float | None = None,
) -> dict:
    """Check ``L d^-nu phi = z^-nu L phi`` and ``L(zeta^n phi) = (-d/dz)^n L phi``.

    Returns the largest relative mismatch of each identity over the samples
    together with the tail bounds that limit how small it can be.
    """
    grid = phi.grid
    theta = grid.ray.theta
    lam = phi.lambda_hint if lam is None else lam
    z = np.atleast_1d(np.asarray(z_samples, dtype=complex))

    base = laplace_transform(phi, z, margin, lam=lam)
    frac = laplace_transform(fractional_integral(nu, phi), z, margin, lam=lam)
    rhs = ray_power(z, -nu, theta) * base.phi_values
    frac_err = np.abs(frac.phi_values - rhs) / np.abs(rhs)

    moved = laplace_transform(multiply_by_zeta_power(phi, n), z, margin, lam=lam)
    deriv = np.empty(z.size, dtype=complex)
    for i, zi in enumerate(z):
        r = derivative_radius(zi, theta, lam)
        deriv[i] = (-1) ** n * cauchy_derivatives(lambda w: _transform(phi, w), zi, n, r)[n]
    mult_err = np.abs(moved.phi_values - deriv) / np.abs(deriv)

    return _jsonable(
        {
            "nu": nu,
            "n": n,
            "z": z.tolist(),
            "fractional_mismatch": float(np.max(frac_err)),
            "multiplication_mismatch": float(np.max(mult_err)),
            "tail": float(np.max(np.concatenate([base.tail_bound, frac.tail_bound, moved.tail_bound]))),
        }
    )


# }}}
