"""Prototype solutions of the separable equation ``f = V0 f``.

For ``k0 = -q(zeta') / p(zeta)`` the equation is solved in closed form by

    f0(zeta) = (1 / p(zeta)) exp(-int_b^zeta q/p),

and the only nonsmooth piece of the exponent is ``tau log(zeta - alpha)``.
That term is integrated exactly; the bounded remainder
``q/p + tau/(zeta - alpha)`` is integrated by Gauss-Legendre panels.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import NoLimit, NotProportional, QuadratureFailure
from .grid import NormParams, RayGrid, SingularFunction, weighted_norm, write_csv
from .kernels import KernelPair, SeparableKernel, _jsonable, taylor_shift, verify_sing
from .quadrature import gauss_legendre

#: relative standard deviation above which two functions are not proportional
PROPORTIONALITY_TOL = 1e-8


@dataclass(frozen=True)
class PrototypeSolution:
    f0: SingularFunction
    base_t: float
    tau: float
    #: leading coefficient of f0 at alpha, when it has been computed
    M: complex | None = None
    #: fitted rate of convergence toward M
    rate: float | None = None

    def header(self) -> dict:
        return _jsonable({"tau": self.tau, "M": self.M, "base_t": self.base_t, "rate": self.rate})


class _Factors:
    """Accurate evaluation of ``x / p(alpha + x)`` and of the exponent remainder."""

    def __init__(self, k0: SeparableKernel, tau: float):
        self.k0 = k0
        self.tau = tau
        self.p1 = self.n1 = None
        if k0.p_coeffs is not None and k0.q_coeffs is not None:
            ps = taylor_shift(k0.p_coeffs, k0.alpha)
            qs = taylor_shift(k0.q_coeffs, k0.alpha)
            # p(alpha + x) = x P1(x) and q + tau P1 = q(alpha) + tau p'(alpha) + x N1(x)
            self.p1 = ps[1:]
            num = np.zeros(max(qs.size, self.p1.size), dtype=complex)
            num[: qs.size] += qs
            num[: self.p1.size] += tau * self.p1
            self.n1 = num[1:] if num.size > 1 else np.zeros(1, dtype=complex)

    def x_over_p(self, x):
        if self.p1 is not None:
            return 1.0 / npoly.polyval(x, self.p1)
        return x / self.k0.p(self.k0.alpha + x)

    def remainder(self, x):
        """``q/p + tau/x`` at ``zeta = alpha + x``, bounded near ``x = 0``."""
        if self.p1 is not None:
            return npoly.polyval(x, self.n1) / npoly.polyval(x, self.p1)
        z = self.k0.alpha + x
        return self.k0.q(z) / self.k0.p(z) + self.tau / x


def _cumulative_integral(func, direction: complex, panels: np.ndarray, t, m: int):
    """``int_0^t func(u e^{i theta}) e^{i theta} du`` for every entry of *t*."""
    x, w = gauss_legendre(m)
    ends = np.concatenate([[0.0], panels[:, 0], [panels[-1, 1]]])

    def segment(a, b):
        a = np.asarray(a, dtype=float)[..., None]
        b = np.asarray(b, dtype=float)[..., None]
        u = 0.5 * (a + b) + 0.5 * (b - a) * x
        return np.sum(0.5 * (b - a) * w * func(u * direction), axis=-1) * direction

    full = np.concatenate([[0.0], np.cumsum(segment(ends[:-1], ends[1:]))])
    t = np.asarray(t, dtype=float)
    k = np.clip(np.searchsorted(ends, t, side="right") - 1, 0, ends.size - 2)
    return full[k] + segment(ends[k], t)


def compute_prototype(
    k0: SeparableKernel,
    tau: float,
    grid: RayGrid,
    base_t: float | None = None,
    normalize: bool = False,
    order: int = 24,
    quad_tol: float = 1e-12,
) -> PrototypeSolution:
    """Prototype solution ``f0`` stored with exponent ``tau - 1``.

    *base_t* defaults to half the radius on which ``|k0| |zeta - alpha|``
    stays below ``1.1 tau``. With *normalize* the result is divided by its
    leading coefficient, so ``f0 = (zeta - alpha)^(tau - 1) (1 + o(1))``.
    """
    ray = grid.ray
    if base_t is None:
        rep = verify_sing(k0, tau, 1.1 * tau, ray.theta, delta_max=min(1.0, grid.T))
        base_t = rep.constants["delta"] / 2
    base_t = float(np.clip(base_t, grid.t_min, grid.T))

    fac = _Factors(k0, tau)
    e = ray.direction
    ts = np.concatenate([grid.nodes, [base_t]])
    R = _cumulative_integral(fac.remainder, e, grid.panels, ts, order)
    R2 = _cumulative_integral(fac.remainder, e, grid.panels, ts, 2 * order)
    err = np.max(np.abs(R2 - R))
    if not np.all(np.isfinite(R2)) or err > quad_tol * max(1.0, np.max(np.abs(R2))):
        raise QuadratureFailure(f"exponent remainder unresolved (estimated error {err:.2e})")

    R, Rb = R2[:-1], R2[-1]
    g = fac.x_over_p(grid.nodes * e) * ray.power(-tau, base_t) * np.exp(-(R - Rb))
    f0 = SingularFunction(grid, tau - 1, g)
    proto = PrototypeSolution(f0, base_t, float(tau))
    if normalize:
        M, rate = estimate_leading_constant(proto)
        proto = PrototypeSolution(f0 / M, base_t, float(tau), 1.0 + 0j, rate)
    return proto


def estimate_leading_constant(proto: PrototypeSolution | SingularFunction, panels: int = 2):
    """Limit of ``f0 / (t e^{i theta})^(tau - 1)`` as ``t -> 0`` and its rate.

    The smooth part is continued to ``t = 0`` from the innermost panel. The
    rate is the log-log slope of ``|g(t) - M|`` over the first *panels*
    panels; if that difference is at roundoff the rate is reported as 1.
    """
    f = proto.f0 if isinstance(proto, PrototypeSolution) else proto
    grid = f.grid
    n = grid.nodes_per_panel * min(panels, grid.npanels)
    t, g = grid.nodes[:n], f.g[:n]
    if not np.all(np.isfinite(g)) or not np.any(g):
        raise NoLimit("smooth part vanishes or is not finite near alpha")
    slope = np.polyfit(np.log(t), np.log(np.abs(g)), 1)[0]
    if slope < -0.05:
        raise NoLimit(f"smooth part grows like t^{slope:.3g} toward alpha")

    M = complex((grid.interpolation_matrix([0.0]) @ f.g)[0])
    if M == 0 or not np.isfinite(M):
        raise NoLimit("extrapolated leading coefficient vanishes")
    diff = np.abs(g - M)
    keep = diff > 1e-9 * abs(M)
    if keep.sum() < 4:
        rate = 1.0
    else:
        rate = float(np.polyfit(np.log(t[keep]), np.log(diff[keep]), 1)[0])
        if rate <= 0:
            raise NoLimit(f"smooth part does not settle toward alpha (rate {rate:.3g})")
    return M, rate


def verify_fixed_point(
    proto: PrototypeSolution | SingularFunction,
    k0: SeparableKernel,
    lam: float = 0.0,
    op=None,
) -> float:
    """Relative residual ``|f0 - V0 f0| / |f0|`` in the ``(sigma, lam)`` norm."""
    from .volterra import OperatorHandle, apply

    f = proto.f0 if isinstance(proto, PrototypeSolution) else proto
    if op is None:
        op = OperatorHandle(KernelPair(k0), f.grid, part="separable")
    params = NormParams(f.sigma, lam)
    res = f - apply(op, f)
    return weighted_norm(res, params) / weighted_norm(f, params)


def proportionality(f1: SingularFunction, f2: SingularFunction) -> tuple[complex, float]:
    """Least-squares constant ``c`` with ``f1 = c f2`` and the relative deviation."""
    a = f1.values()
    b = f2.values()
    c = complex(np.vdot(b, a) / np.vdot(b, b))
    dev = float(np.max(np.abs(a - c * b)) / np.max(np.abs(c * b)))
    return c, dev


def base_point_invariance(
    k0: SeparableKernel, tau: float, grid: RayGrid, t_b1: float, t_b2: float
) -> complex:
    """Constant ``c`` with ``f0^(b1) = c f0^(b2)``."""
    f1 = compute_prototype(k0, tau, grid, t_b1).f0
    f2 = compute_prototype(k0, tau, grid, t_b2).f0
    ratio = f1.g / f2.g
    c = complex(np.mean(ratio))
    dev = float(np.std(ratio) / abs(c))
    if dev > PROPORTIONALITY_TOL:
        raise NotProportional(f"prototypes differ beyond a constant (deviation {dev:.2e})")
    return c


def write_prototype(proto: PrototypeSolution, stem) -> tuple[Path, Path]:
    """Write ``<stem>.csv`` with the samples and ``<stem>.json`` with the header."""
    stem = Path(stem)
    csv_path = stem.with_suffix(".csv")
    json_path = stem.with_suffix(".json")
    write_csv(proto.f0, csv_path)
    json_path.write_text(json.dumps(proto.header(), sort_keys=True, indent=2) + "\n")
    return csv_path, json_path
