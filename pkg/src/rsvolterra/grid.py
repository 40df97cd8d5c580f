"""Rays from a singular point, graded collocation grids and weighted norms.

A function on the ray ``zeta = alpha + t e^{i theta}`` is stored as

    f(alpha + t e^{i theta}) = (t e^{i theta})^sigma * g(t),

where the smooth part ``g`` is sampled at Chebyshev points of the first kind
on geometrically graded panels covering ``[t_min, T]``. Fractional powers
always use the branch ``(t e^{i theta})^s := t^s e^{i s theta}``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import IllegalInclusion, InvalidGrading, OutOfRange

#: Degree of the least-squares polynomial used to continue ``g`` from the
#: innermost panels down to ``t = 0``.
EXTRAPOLATION_DEGREE = 8

#: The continuation is fitted on ``[t_min, t_K]`` with ``t_K`` the first panel
#: end reaching this multiple of ``t_min``, so ``[0, t_min)`` sits close to the
#: fitted data and the continuation stays well conditioned.
EXTRAPOLATION_SPAN = 16.0

_RANGE_SLACK = 1e-12


# {{{ Chebyshev helpers


def chebyshev_points(n: int) -> np.ndarray:
    """Ascending Chebyshev points of the first kind on [-1, 1]."""
    k = np.arange(n)
    return -np.cos((2 * k + 1) * np.pi / (2 * n))


def _barycentric_weights(n: int) -> np.ndarray:
    k = np.arange(n)
    return (-1.0) ** k * np.sin((2 * k + 1) * np.pi / (2 * n))


def _chebyshev_vander(x: np.ndarray, deg: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    V = np.empty((x.size, deg + 1))
    V[:, 0] = 1.0
    if deg >= 1:
        V[:, 1] = x
    for k in range(2, deg + 1):
        V[:, k] = 2 * x * V[:, k - 1] - V[:, k - 2]
    return V


def barycentric_matrix(x: np.ndarray, nodes: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Rows interpolating values at *nodes* onto the points *x*."""
    x = np.asarray(x, dtype=float)
    diff = x[:, None] - nodes[None, :]
    exact = diff == 0.0
    diff[exact] = 1.0
    L = weights[None, :] / diff
    L /= L.sum(axis=1, keepdims=True)
    hit = exact.any(axis=1)
    if hit.any():
        L[hit] = exact[hit].astype(float)
    return L


# }}}


# {{{ rays and grids


@dataclass(frozen=True)
class Ray:
    """The segment ``{alpha + t e^{i theta} : 0 < t <= T}``."""

    alpha: complex
    theta: float
    T: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "alpha", complex(self.alpha))
        theta = float(self.theta) % (2 * math.pi)
        object.__setattr__(self, "theta", theta)
        if not self.T > 0:
            raise InvalidGrading(f"ray length must be positive, got T={self.T}")

    @property
    def direction(self) -> complex:
        return complex(math.cos(self.theta), math.sin(self.theta))

    def zeta(self, t):
        return self.alpha + np.asarray(t) * self.direction

    def power(self, s: float, t) -> np.ndarray:
        """``(t e^{i theta})^s`` with the fixed branch convention."""
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            return t**s * np.exp(1j * s * self.theta)


@dataclass(frozen=True, eq=False)
class RayGrid:
    ray: Ray
    panels: np.ndarray
    nodes_per_panel: int
    nodes: np.ndarray = field(repr=False)

    @property
    def t_min(self) -> float:
        return float(self.panels[0, 0])

    @property
    def T(self) -> float:
        return float(self.panels[-1, 1])

    @property
    def npanels(self) -> int:
        return self.panels.shape[0]

    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def zeta(self) -> np.ndarray:
        return self.ray.zeta(self.nodes)

    def power(self, s: float, t=None) -> np.ndarray:
        return self.ray.power(s, self.nodes if t is None else t)

    @cached_property
    def _ref_nodes(self) -> np.ndarray:
        return chebyshev_points(self.nodes_per_panel)

    @cached_property
    def _ref_weights(self) -> np.ndarray:
        return _barycentric_weights(self.nodes_per_panel)

    @cached_property
    def _extrapolation_map(self) -> tuple[float, int, np.ndarray]:
        """Span, degree and the map from the innermost node values to coefficients."""
        ends = self.panels[:, 1]
        K = int(min(np.searchsorted(ends, EXTRAPOLATION_SPAN * self.t_min) + 1, self.npanels))
        span = float(ends[K - 1])
        m = K * self.nodes_per_panel
        deg = min(m - 1, EXTRAPOLATION_DEGREE)
        V = _chebyshev_vander(2 * self.nodes[:m] / span - 1, deg)
        return span, deg, np.linalg.pinv(V)

    def locate(self, t) -> np.ndarray:
        """Panel index containing each *t*; values below ``t_min`` map to 0."""
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.panels[:, 0], t, side="right") - 1
        return np.clip(idx, 0, self.npanels - 1)

    def interpolation_coo(self, t, extrapolate: bool = True):
        """``(row, col, value)`` triplets of the interpolation matrix for *t*.

        Points in ``[0, t_min)`` are served by a low-degree least-squares
        continuation of the innermost panels when *extrapolate* is set.
        """
        t = np.atleast_1d(np.asarray(t, dtype=float))
        lo, hi = self.t_min, self.T
        if not extrapolate and (
            np.any(t < lo * (1 - _RANGE_SLACK)) or np.any(t > hi * (1 + _RANGE_SLACK))
        ):
            raise OutOfRange(f"t outside [{lo:g}, {hi:g}]")
        if np.any(t < 0) or np.any(t > hi * (1 + 1e-9)):
            raise OutOfRange(f"t outside [0, {hi:g}]")

        n = self.nodes_per_panel
        inner = np.flatnonzero(t >= lo)
        outer = np.flatnonzero(t < lo)

        idx = self.locate(t[inner])
        a, b = self.panels[idx, 0], self.panels[idx, 1]
        x = (2 * t[inner] - (a + b)) / (b - a)
        L = barycentric_matrix(x, self._ref_nodes, self._ref_weights)
        rows = [np.repeat(inner, n)]
        cols = [(idx[:, None] * n + np.arange(n)).ravel()]
        vals = [L.ravel()]

        if outer.size:
            span, deg, C = self._extrapolation_map
            E = _chebyshev_vander(2 * t[outer] / span - 1, deg) @ C
            m = E.shape[1]
            rows.append(np.repeat(outer, m))
            cols.append(np.tile(np.arange(m), outer.size))
            vals.append(E.ravel())
        return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)

    def interpolation_matrix(self, t, extrapolate: bool = True) -> np.ndarray:
        """Dense matrix mapping node samples to values at *t*."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        rows, cols, vals = self.interpolation_coo(t, extrapolate=extrapolate)
        M = np.zeros((t.size, self.size))
        M[rows, cols] = vals
        return M

    @cached_property
    def norm_points(self) -> np.ndarray:
        """Nodes, midpoints between consecutive nodes and the panel ends."""
        mid = 0.5 * (self.nodes[1:] + self.nodes[:-1])
        return np.unique(np.concatenate([self.nodes, mid, self.panels.ravel()]))

    @cached_property
    def norm_matrix(self) -> np.ndarray:
        return self.interpolation_matrix(self.norm_points, extrapolate=False)


def build_ray_grid(
    ray: Ray,
    t_min: float | None = None,
    ratio: float = 2.0,
    nodes_per_panel: int = 16,
) -> RayGrid:
    """Geometrically graded panels on ``[t_min, T]`` with Chebyshev nodes.

    The number of panels is the smallest ``K`` with ``t_min ratio^K >= T``;
    the endpoints are then spread geometrically, so the effective ratio never
    exceeds *ratio*. ``t_min`` defaults to ``2^-20 T``.
    """
    T = ray.T
    if t_min is None:
        t_min = T * 2.0**-20
    if not ratio > 1:
        raise InvalidGrading(f"grading ratio must exceed 1, got {ratio}")
    if not 0 < t_min < T:
        raise InvalidGrading(f"need 0 < t_min < T, got t_min={t_min}, T={T}")
    if nodes_per_panel < 2:
        raise InvalidGrading("need at least 2 nodes per panel")

    K = max(1, math.ceil(math.log(T / t_min) / math.log(ratio) - 1e-9))
    ends = np.geomspace(t_min, T, K + 1)
    ends[0], ends[-1] = t_min, T
    panels = np.column_stack([ends[:-1], ends[1:]])

    x = chebyshev_points(nodes_per_panel)
    a, b = panels[:, :1], panels[:, 1:]
    nodes = (0.5 * (a + b) + 0.5 * (b - a) * x[None, :]).ravel()
    return RayGrid(ray=ray, panels=panels, nodes_per_panel=nodes_per_panel, nodes=nodes)


# }}}


# {{{ functions


@dataclass(frozen=True)
class NormParams:
    sigma: float
    lam: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.sigma) and math.isfinite(self.lam)):
            raise ValueError("norm parameters must be finite")


@dataclass(frozen=True, eq=False)
class SingularFunction:
    """``f(alpha + t e^{i theta}) = (t e^{i theta})^sigma g(t)`` on a grid."""

    grid: RayGrid
    sigma: float
    g: np.ndarray = field(repr=False)
    #: a Lambda for which the Lambda-weighted norm is known to be finite
    lambda_hint: float = 0.0

    def __post_init__(self) -> None:
        g = np.asarray(self.g, dtype=complex)
        if g.shape != (self.grid.size,):
            raise ValueError(f"expected {self.grid.size} samples, got shape {g.shape}")
        if not np.all(np.isfinite(g)):
            raise ValueError("smooth part has non-finite samples")
        g.setflags(write=False)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "sigma", float(self.sigma))

    @classmethod
    def from_callable(cls, grid: RayGrid, func, sigma: float, lambda_hint: float = 0.0):
        """Sample ``func(zeta)`` and divide out ``(zeta - alpha)^sigma``."""
        values = np.asarray(func(grid.zeta), dtype=complex)
        values = np.broadcast_to(values, grid.nodes.shape)
        return cls(grid, sigma, values / grid.power(sigma), lambda_hint)

    @classmethod
    def zeros(cls, grid: RayGrid, sigma: float = 0.0):
        return cls(grid, sigma, np.zeros(grid.size))

    def __call__(self, t):
        return evaluate(self, t)

    def values(self) -> np.ndarray:
        return self.grid.power(self.sigma) * self.g

    def smooth_part(self, t, extrapolate: bool = False) -> np.ndarray:
        M = self.grid.interpolation_matrix(t, extrapolate=extrapolate)
        return M @ self.g

    def with_exponent(self, sigma: float) -> SingularFunction:
        """Same function, stored with a different exponent."""
        if sigma == self.sigma:
            return self
        g = self.g * self.grid.power(self.sigma - sigma)
        return SingularFunction(self.grid, sigma, g, self.lambda_hint)

    def with_samples(self, g) -> SingularFunction:
        return SingularFunction(self.grid, self.sigma, g, self.lambda_hint)

    def _align(self, other: SingularFunction):
        if other.grid is not self.grid:
            raise ValueError("functions live on different grids")
        sigma = min(self.sigma, other.sigma)
        return self.with_exponent(sigma), other.with_exponent(sigma)

    def __add__(self, other):
        if not isinstance(other, SingularFunction):
            return NotImplemented
        a, b = self._align(other)
        return SingularFunction(
            a.grid, a.sigma, a.g + b.g, max(self.lambda_hint, other.lambda_hint)
        )

    def __sub__(self, other):
        if not isinstance(other, SingularFunction):
            return NotImplemented
        return self + (-1.0) * other

    def __mul__(self, c):
        if not np.isscalar(c):
            return NotImplemented
        return SingularFunction(self.grid, self.sigma, c * self.g, self.lambda_hint)

    __rmul__ = __mul__

    def __neg__(self):
        return -1.0 * self

    def __truediv__(self, c):
        return self * (1.0 / c)


def evaluate(f: SingularFunction, t):
    """Value of *f* at parameter(s) *t* in ``[t_min, T]``."""
    scalar = np.ndim(t) == 0
    t = np.atleast_1d(np.asarray(t, dtype=float))
    g = f.smooth_part(t, extrapolate=False)
    out = f.grid.power(f.sigma, t) * g
    return complex(out[0]) if scalar else out


def log_weighted_profile(f: SingularFunction, params: NormParams):
    """Points and ``log(t^-sigma e^-Lambda t |f|)`` on the norm sampling set."""
    grid = f.grid
    t = grid.norm_points
    g = grid.norm_matrix @ f.g
    with np.errstate(divide="ignore"):
        logw = (f.sigma - params.sigma) * np.log(t) - params.lam * t + np.log(np.abs(g))
    return t, logw


def weighted_norm(f: SingularFunction, params: NormParams) -> float:
    """Grid surrogate of ``sup |zeta - alpha|^-sigma e^{-Lambda |zeta - alpha|} |f|``.

    The supremum is taken over the grid nodes and the midpoints between them,
    so it depends on the truncation length ``T`` of the underlying ray.
    """
    _, logw = log_weighted_profile(f, params)
    top = np.max(logw)
    return 0.0 if top == -np.inf else float(np.exp(top))


def include(f: SingularFunction, new_params: NormParams) -> tuple[SingularFunction, float]:
    """Re-tag *f* for a weaker norm and bound the inclusion.

    The current norm of *f* is taken to be ``(f.sigma, f.lambda_hint)``. The
    target must have a larger exponential rate and a smaller (or equal)
    power, or the same power and a rate at least as large. Returns the
    re-tagged function together with the grid supremum of
    ``t^(sigma - sigma') e^((Lambda - Lambda') t)``, which bounds the ratio of
    the new norm to the old one.
    """
    s, lam = f.sigma, f.lambda_hint
    s2, lam2 = new_params.sigma, new_params.lam
    legal = (s2 == s and lam2 >= lam) or (s2 < s and lam2 > lam)
    if not legal:
        raise IllegalInclusion(
            f"no continuous inclusion from (sigma={s}, Lambda={lam}) "
            f"to (sigma={s2}, Lambda={lam2})"
        )
    t = f.grid.norm_points
    bound = float(np.max(np.exp((s - s2) * np.log(t) + (lam - lam2) * t)))
    return SingularFunction(f.grid, f.sigma, f.g, lam2), bound


# }}}


# {{{ CSV dumps


def write_csv(f: SingularFunction, path) -> None:
    """Dump *f* as ``t, re_g, im_g, sigma`` with a ray/grid header line."""
    grid = f.grid
    ray = grid.ray
    header = {
        "alpha_re": float(ray.alpha.real),
        "alpha_im": float(ray.alpha.imag),
        "theta": float(ray.theta),
        "T": float(ray.T),
        "t_min": float(grid.t_min),
        "npanels": grid.npanels,
        "nodes_per_panel": grid.nodes_per_panel,
        "lambda_hint": float(f.lambda_hint),
    }
    with Path(path).open("w", newline="") as fh:
        fh.write("# " + ",".join(f"{k}={v!r}" for k, v in header.items()) + "\n")
        writer = csv.writer(fh)
        writer.writerow(["t", "re_g", "im_g", "sigma"])
        for t, g in zip(grid.nodes, f.g):
            writer.writerow([repr(float(t)), repr(float(g.real)), repr(float(g.imag)), repr(float(f.sigma))])


def read_csv(path) -> SingularFunction:
    with Path(path).open(newline="") as fh:
        first = fh.readline()
        if not first.startswith("# "):
            raise ValueError("missing header line")
        meta = dict(item.split("=", 1) for item in first[2:].strip().split(","))
        rows = list(csv.DictReader(fh))

    T = float(meta["T"])
    ray = Ray(complex(float(meta["alpha_re"]), float(meta["alpha_im"])), float(meta["theta"]), T)
    t_min = float(meta["t_min"])
    npanels = int(meta["npanels"])
    ratio = (T / t_min) ** (1.0 / npanels) * (1 + 1e-12)
    grid = build_ray_grid(ray, t_min, ratio, int(meta["nodes_per_panel"]))
    if grid.npanels != npanels:
        raise ValueError("header does not describe a consistent grid")
    g = np.array([complex(float(r["re_g"]), float(r["im_g"])) for r in rows])
    sigma = float(rows[0]["sigma"]) if rows else 0.0
    return SingularFunction(grid, sigma, g, float(meta["lambda_hint"]))


# }}}
