"""Singularity-aware product quadrature for integrals along a ray.

Every operator in the package has the form

    [W phi](t) = int_0^t w(zeta_t, zeta_u) phi(zeta_u) dzeta_u,

with ``phi = (u e^{i theta})^sigma g(u)`` and possibly a diagonal factor
``(zeta_t - zeta_u)^beta`` in ``w``. Substituting ``u = s t`` gives an integral
over ``s in (0, 1]`` with endpoint weights ``s^sigma`` and ``(1 - s)^beta``.
The rule is composite: panels ``[2^-k-1, 2^-k]`` refine geometrically toward
``s = 0`` until ``s t`` drops below the grid's ``t_min``, and are further cut
wherever ``s t`` crosses a grid panel boundary, so the interpolated smooth
part is a polynomial on every panel. The innermost panel carries the
Gauss-Jacobi weight ``s^sigma`` and the outermost carries ``(1 - s)^beta``
when ``beta`` is not an integer.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.sparse import coo_matrix
from scipy.special import roots_jacobi, roots_legendre

from .errors import ExponentTooSingular
from .grid import RayGrid


@lru_cache(maxsize=None)
def gauss_legendre(m: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = roots_legendre(m)
    return x, w


@lru_cache(maxsize=None)
def gauss_jacobi(m: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights on [-1, 1] for the weight ``(1 - x)^a (1 + x)^b``."""
    x, w = roots_jacobi(m, a, b)
    return x, w


def is_integer(x: float) -> bool:
    return abs(x - round(x)) < 1e-14


def unit_rule(
    sigma: float, beta: float, m: int, breaks: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for ``int_0^1 s^sigma (1 - s)^beta F(s) ds``.

    *breaks* are the interior breakpoints in increasing order, with
    ``breaks[0] <= 1/2``; ``F`` need only be smooth between them.
    """
    if sigma <= -1 or beta <= -1:
        raise ExponentTooSingular(f"endpoint exponents must exceed -1 (sigma={sigma}, beta={beta})")
    fold_beta = is_integer(beta)
    xs, ws = [], []

    # innermost panel [0, h]: s^sigma is the Jacobi weight
    h = breaks[0]
    xj, wj = gauss_jacobi(m, 0.0, sigma)
    s = h * (1 + xj) / 2
    xs.append(s)
    ws.append(wj * (h / 2) ** (sigma + 1) * (1 - s) ** beta)

    # interior panels, plus the outermost one when (1 - s)^beta is smooth
    xl, wl = gauss_legendre(m)
    ends = np.append(breaks, 1.0) if fold_beta else breaks
    a, b = ends[:-1, None], ends[1:, None]
    s = (0.5 * (a + b) + 0.5 * (b - a) * xl).ravel()
    xs.append(s)
    ws.append((0.5 * (b - a) * wl).ravel() * s**sigma * (1 - s) ** beta)

    if not fold_beta:
        a = breaks[-1]
        xb, wb = gauss_jacobi(m, beta, 0.0)
        s = a + (1 - a) * (1 + xb) / 2
        xs.append(s)
        ws.append(wb * ((1 - a) / 2) ** (beta + 1) * s**sigma)

    return np.concatenate(xs), np.concatenate(ws)


def breakpoints(t: float, t_min: float, panel_ends: np.ndarray) -> np.ndarray:
    """Dyadic points ``2^-k`` toward ``t_min / t`` merged with the grid's ``e_k / t``."""
    levels = levels_for(t, t_min)
    dyadic = 2.0 ** -np.arange(levels, 0, -1)
    grid = panel_ends[(panel_ends < t * (1 - 1e-13))] / t
    pts = np.unique(np.concatenate([dyadic, grid]))
    # grade toward s = 1 so no panel sits closer to it than its own length
    d = 1.0 - pts[-1]
    if pts.size > 1:
        k = np.arange(1, max(1, math.ceil(math.log2((1 - pts[-2]) / d))))
        pts = np.unique(np.concatenate([pts, 1.0 - d * 2.0**k]))
    # drop slivers that would only duplicate a neighbor
    keep = np.concatenate([[True], np.diff(pts) > 1e-13])
    return pts[keep]


def levels_for(t: float, t_min: float) -> int:
    return max(1, math.ceil(math.log2(t / t_min) - 1e-12))


def assemble(
    grid: RayGrid,
    kernel,
    sigma_in: float,
    sigma_out: float,
    beta: float = 0.0,
    order: int = 20,
) -> np.ndarray:
    """Matrix ``M`` with ``g_out = M g_in`` for a Volterra-type operator.

    *kernel* is ``w_hat(zeta_t, zeta_u)``, the kernel with the diagonal power
    ``(zeta_t - zeta_u)^beta`` divided out (pass ``None`` for ``w_hat = 1``).
    Input and output are stored with exponents *sigma_in* and *sigma_out*.
    """
    ray = grid.ray
    N = grid.size
    rows, us, ws = [], [], []
    panel_ends = grid.panels[:, 0]
    for i, t in enumerate(grid.nodes):
        s, w = unit_rule(sigma_in, beta, order, breakpoints(t, grid.t_min, panel_ends))
        rows.append(np.full(s.size, i))
        us.append(s * t)
        ws.append(w)
    rows = np.concatenate(rows)
    u = np.concatenate(us)
    w = np.concatenate(ws).astype(complex)

    if kernel is not None:
        w = w * kernel(ray.zeta(grid.nodes[rows]), ray.zeta(u))
    w = w * ray.power(sigma_in + 1 + beta - sigma_out, grid.nodes)[rows]

    k, cols, vals = grid.interpolation_coo(u)
    return coo_matrix((w[k] * vals, (rows[k], cols)), shape=(N, N)).toarray()
