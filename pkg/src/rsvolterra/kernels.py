"""Volterra kernels and sampled checks of their regularity hypotheses.

The prototype kernel is separable, ``k0(a, a') = -q(zeta(a')) / p(zeta(a))``,
with a simple pole at the root ``alpha`` of ``p``. The perturbation kernel
``k_star`` may share that pole but must vanish to some order ``gamma`` on the
diagonal. Hypotheses quantify over open sets; here they are certified on
finite samples along a ray, and each check returns a :class:`ConditionReport`
carrying its witness data.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Callable

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import (
    ConditionFailed,
    DegenerateRoot,
    DomainError,
    NotRegularSingular,
    NoVanishing,
)

Kernel2 = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SeparableKernel:
    """``k0(a, a') = -q(zeta(a')) / p(zeta(a))`` with ``p(alpha) = 0``."""

    p: Callable[[np.ndarray], np.ndarray]
    q: Callable[[np.ndarray], np.ndarray]
    alpha: complex
    #: optional ascending coefficients in zeta, used by the series oracle
    p_coeffs: tuple[complex, ...] | None = None
    q_coeffs: tuple[complex, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "alpha", complex(self.alpha))
        scale = max(1.0, abs(complex(self.p(self.alpha + 1.0))))
        if abs(complex(self.p(self.alpha))) > 1e-8 * scale:
            raise DomainError(f"p does not vanish at alpha={self.alpha}")

    @classmethod
    def from_polynomials(cls, p_coeffs, q_coeffs, alpha) -> SeparableKernel:
        pc = tuple(complex(c) for c in p_coeffs)
        qc = tuple(complex(c) for c in q_coeffs)
        return cls(
            p=lambda z: npoly.polyval(z, pc),
            q=lambda z: npoly.polyval(z, qc),
            alpha=alpha,
            p_coeffs=pc,
            q_coeffs=qc,
        )

    def __call__(self, z, zp):
        return -self.q(zp) / self.p(z)

    def diagonal(self, z):
        return self(z, z)


@dataclass(frozen=True)
class PerturbationKernel:
    """Non-separable kernel vanishing to order ``gamma`` on the diagonal."""

    k_star: Kernel2
    gamma: float
    lambda_delta: float

    def __post_init__(self) -> None:
        if not self.gamma > 0:
            raise DomainError(f"diagonal vanishing order must be positive, got {self.gamma}")

    def __call__(self, z, zp):
        return self.k_star(z, zp)


@dataclass(frozen=True)
class KernelPair:
    """Full kernel ``k = k0 + k_star``; either part may be absent."""

    k0: SeparableKernel | None
    k_star: PerturbationKernel | None = None

    @property
    def alpha(self) -> complex:
        return self.k0.alpha if self.k0 is not None else 0j

    @property
    def gamma(self) -> float | None:
        return None if self.k_star is None else self.k_star.gamma

    @property
    def lambda_delta(self) -> float:
        return 0.0 if self.k_star is None else self.k_star.lambda_delta


def _jsonable(value):
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value


@dataclass
class ConditionReport:
    condition: str
    verified: bool
    constants: dict[str, Any] = field(default_factory=dict)
    witness: dict[str, Any] = field(default_factory=dict)
    reasons: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return _jsonable(asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


# {{{ tau and Condition (sing)


def richardson(values: np.ndarray) -> tuple[complex, float]:
    """Extrapolate a sequence sampled at ``h, h/2, h/4, ...`` to ``h = 0``.

    Assumes an error expansion in integer powers of ``h``. Returns the limit
    and the difference of the last two diagonal entries as an error estimate.
    """
    n = len(values)
    table = np.zeros((n, n), dtype=complex)
    table[:, 0] = values
    for j in range(1, n):
        for k in range(j, n):
            table[k, j] = table[k, j - 1] + (table[k, j - 1] - table[k - 1, j - 1]) / (2**j - 1)
    err = abs(table[-1, -1] - table[-2, -2]) if n > 1 else math.inf
    return complex(table[-1, -1]), float(err)


def estimate_tau(
    k0: SeparableKernel, theta: float = 0.0, h0: float = 0.05, levels: int = 6
) -> float:
    """Residue of the kernel diagonal at ``alpha``.

    Richardson-extrapolates ``(zeta - alpha) k0(zeta, zeta)`` as ``zeta`` runs
    into ``alpha`` along direction *theta*.
    """
    h = h0 * 2.0 ** -np.arange(levels)
    dz = h * np.exp(1j * theta)
    seq = dz * k0.diagonal(k0.alpha + dz)
    tau, err = richardson(seq)
    scale = max(1.0, abs(tau))
    if not np.isfinite(tau) or err > 1e-6 * scale:
        raise NotRegularSingular(f"diagonal residue does not converge (error {err:.3g})")
    if abs(tau.imag) > 1e-6 * scale:
        raise NotRegularSingular(f"diagonal residue {tau} is not real")
    if tau.real <= 1e-10:
        raise NotRegularSingular(f"diagonal residue {tau.real:.6g} is not positive")
    return float(tau.real)


def verify_sing(
    k0: SeparableKernel,
    tau: float,
    sigma: float,
    theta: float = 0.0,
    delta_max: float = 1.0,
    t_min: float = 1e-6,
    samples: int = 32,
) -> ConditionReport:
    """Find ``delta`` with ``|k0(a, a')| |zeta(a) - alpha| < sigma`` inside it.

    Halves ``delta`` from *delta_max* until every sampled pair with both
    points within ``delta`` of ``alpha`` satisfies the bound. Also reports the
    largest sampled ``|k0(a, a) - tau/(zeta(a) - alpha)|`` in that range.
    """
    if not sigma > tau:
        raise DomainError(f"need sigma > tau, got sigma={sigma}, tau={tau}")
    e = np.exp(1j * theta)
    delta = delta_max
    worst = None
    while delta >= t_min:
        t = np.geomspace(t_min, delta * (1 - 1e-12), samples)
        z = k0.alpha + t * e
        ratio = np.abs(k0(z[:, None], z[None, :])) * t[:, None]
        i, j = np.unravel_index(np.argmax(ratio), ratio.shape)
        worst = (float(t[i]), float(t[j]), float(ratio[i, j]))
        if ratio[i, j] < sigma:
            diag = np.abs(k0.diagonal(z) - tau / (z - k0.alpha))
            return ConditionReport(
                "sing",
                True,
                constants={
                    "tau": tau,
                    "sigma": sigma,
                    "delta": delta,
                    "diag_bound": float(np.max(diag)),
                },
                witness={"t": worst[0], "t_prime": worst[1], "margin": sigma - worst[2]},
            )
        delta /= 2
    report = ConditionReport(
        "sing",
        False,
        constants={"tau": tau, "sigma": sigma},
        witness={"t": worst[0], "t_prime": worst[1], "margin": sigma - worst[2]},
        reasons=["bound fails down to t_min"],
    )
    raise ConditionFailed(f"no radius down to {t_min:g} satisfies the bound", report)


# }}}


# {{{ diagonal conditions


def verify_diag(
    kernel: SeparableKernel | PerturbationKernel,
    lambda_delta: float,
    alpha: complex | None = None,
    theta: float = 0.0,
    T: float = 4.0,
    t_lo: float = 1e-8,
    samples: int = 40,
) -> ConditionReport:
    """Fit ``C`` in the off-diagonal growth bound and test it for boundedness.

    For a separable kernel the template is
    ``C e^{lambda |zeta(a) - zeta(a')|} / |zeta(a) - alpha|``; a perturbation
    kernel carries an extra ``|zeta(a) - zeta(a')|^gamma``. The fitted ``C``
    is the sampled supremum; it is declared unbounded when including the four
    decades closest to ``alpha`` (or the outer half of the ray) inflates it
    by more than a factor four.
    """
    if not math.isfinite(lambda_delta):
        raise DomainError("lambda_delta must be finite")
    perturbation = isinstance(kernel, PerturbationKernel)
    if alpha is None:
        if perturbation:
            raise DomainError("alpha is required for a perturbation kernel")
        alpha = kernel.alpha
    e = np.exp(1j * theta)

    t = np.geomspace(t_lo, T, samples)
    tp = np.concatenate([t, t * (1 - 1e-8)])
    z = alpha + t * e
    zp = alpha + tp * e
    # distances from the rounded samples themselves, so kernel and template agree
    dist = np.abs(z - alpha)
    sep = np.abs(z[:, None] - zp[None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.abs(kernel(z[:, None], zp[None, :])) * dist[:, None] * np.exp(-lambda_delta * sep)
        if perturbation:
            val = val / sep**kernel.gamma
    if perturbation:
        val = np.where(sep > 0, val, 0.0)
    val = np.where(np.isnan(val), np.inf, val)

    i, j = np.unravel_index(np.argmax(val), val.shape)
    C = float(val[i, j])
    near = t[:, None] >= t_lo * 1e4
    far = (t[:, None] <= T / 2) & (tp[None, :] <= T / 2)
    C_near = float(np.max(np.where(near, val, 0.0)))
    C_far = float(np.max(np.where(far, val, 0.0)))
    name = "diag_star" if perturbation else "diag_0"
    constants = {"C": C, "lambda_delta": lambda_delta}
    if perturbation:
        constants["gamma"] = kernel.gamma
    witness = {"t": float(t[i]), "t_prime": float(tp[j]), "value": C}

    reasons = []
    if not math.isfinite(C):
        reasons.append("non-finite kernel samples")
    elif C > 4 * C_near:
        reasons.append("unbounded near alpha")
    elif C > 4 * C_far:
        reasons.append("faster than exponential growth off the diagonal")
    if reasons:
        report = ConditionReport(name, False, constants, witness, reasons)
        raise ConditionFailed(f"condition {name} fails: {reasons[0]}", report)
    return ConditionReport(name, True, constants, witness)


def estimate_gamma(
    k_star: PerturbationKernel,
    alpha: complex,
    theta: float = 0.0,
    bases: tuple[float, ...] = (0.25, 0.5, 1.0),
    h_frac: float = 0.1,
    levels: int = 7,
) -> float:
    """Fitted order of vanishing of ``k_star`` on the diagonal."""
    e = np.exp(1j * theta)
    slopes = []
    for tb in bases:
        zb = alpha + tb * e
        if abs(complex(k_star(zb, zb))) > 1e-300:
            raise NoVanishing(f"k_star does not vanish on the diagonal at t={tb}")
        d = h_frac * tb * 2.0 ** -np.arange(levels)
        val = np.abs(k_star(zb, zb - d * e) * (tb * e))
        if np.any(val == 0):
            continue
        slopes.append(np.polyfit(np.log(d), np.log(val), 1)[0])
    if not slopes:
        raise NoVanishing("k_star vanishes identically near the samples")
    gamma = float(np.mean(slopes))
    if gamma <= 0:
        raise NoVanishing(f"fitted diagonal order {gamma:.3g} is not positive")
    return gamma


def verify_reg_p(
    p: Callable, alpha: complex, theta: float = 0.0, h0: float = 0.05, levels: int = 6
) -> ConditionReport:
    """Fit ``p(zeta) = B (zeta - alpha) + O(|zeta - alpha|^{1 + eps})``."""
    h = h0 * 2.0 ** -np.arange(levels)
    dz = h * np.exp(1j * theta)
    B, err = richardson(p(alpha + dz) / dz)
    if abs(B) <= 1e-8 or err > 1e-6 * max(1.0, abs(B)):
        raise DegenerateRoot(f"root of p at {alpha} is not simple (B={B:.3g})")

    rem = np.abs(p(alpha + dz) - B * dz)
    exact = bool(np.all(rem <= 1e-12 * abs(B) * h))
    if exact:
        eps = 1.0
    else:
        keep = rem > 1e-13 * abs(B) * h
        eps = float(np.polyfit(np.log(h[keep]), np.log(rem[keep]), 1)[0] - 1)
    return ConditionReport(
        "reg_p",
        eps > 0,
        constants={"B": B, "epsilon": eps, "remainder_vanishes": exact},
        witness={"h": float(h[-1]), "remainder": float(rem[-1])},
        reasons=[] if eps > 0 else ["remainder is not of higher order"],
    )


# }}}


def taylor_shift(coeffs, alpha: complex) -> np.ndarray:
    """Ascending coefficients of ``x -> poly(alpha + x)``."""
    c = np.asarray(coeffs, dtype=complex)
    out = np.empty(c.size, dtype=complex)
    for k in range(c.size):
        out[k] = npoly.polyval(alpha, c) / math.factorial(k)
        c = npoly.polyder(c)
    return out
