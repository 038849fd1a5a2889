"""Cumulant machinery for the two driving normal-inverse-Gaussian processes.

Both market factors are time-homogeneous NIG Levy processes.  Exponential
moments E[exp(z L_t)] = exp(t * theta(z)) exist only while Re(z) stays inside
an open strip determined by the tail parameters, so every evaluation is
guarded by a strip check.  Deterministic integrands f(s) feed the identity
E[exp(int f dL)] = exp(int theta(f(s)) ds), which is what ``cumulant_integral``
evaluates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import integrate

DEFAULT_STRIP_MARGIN = 1e-6
DEFAULT_INTEGRAL_RTOL = 1e-10

__all__ = [
    "NigParams",
    "StripViolationError",
    "QuadratureError",
    "validate_strip",
    "check_strip",
    "nig_cumulant",
    "cumulant_integral",
    "split_at_breakpoints",
    "gauss_legendre_panel",
]


class StripViolationError(ValueError):
    """A cumulant argument's real part left the admissible strip."""


class QuadratureError(RuntimeError):
    """A numerical integration did not converge to the requested tolerance."""


@dataclass(frozen=True)
class NigParams:
    """Parameter triple (alpha, beta, delta) of one NIG process.

    alpha > 0 controls tail heaviness, beta the asymmetry (|beta| < alpha),
    delta > 0 the time scale.  The cumulant

        theta(z) = delta * (sqrt(alpha^2 - beta^2) - sqrt(alpha^2 - (beta + z)^2))

    is analytic for Re(z) in the open strip (-alpha - beta, alpha - beta).
    """

    alpha: float
    beta: float
    delta: float

    def __post_init__(self) -> None:
        if not self.alpha > 0.0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.delta > 0.0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if not abs(self.beta) < self.alpha:
            raise ValueError(
                f"require |beta| < alpha, got beta={self.beta}, alpha={self.alpha}"
            )

    @property
    def strip(self) -> tuple[float, float]:
        """Open interval of admissible real parts for cumulant arguments."""
        return (-self.alpha - self.beta, self.alpha - self.beta)

    @property
    def gamma(self) -> float:
        """sqrt(alpha^2 - beta^2)."""
        return math.sqrt(self.alpha * self.alpha - self.beta * self.beta)

    def mean_rate(self) -> float:
        """First cumulant per unit time, theta'(0) = delta*beta/gamma."""
        return self.delta * self.beta / self.gamma

    def variance_rate(self) -> float:
        """Second cumulant per unit time, theta''(0) = delta*alpha^2/gamma^3."""
        return self.delta * self.alpha * self.alpha / self.gamma**3

    def cumulant(self, z: complex | np.ndarray) -> complex | np.ndarray:
        """Cumulant theta(z) with a strip check.  Accepts scalars or arrays."""
        return nig_cumulant(self, z)

    def cumulant_unchecked(self, z: np.ndarray) -> np.ndarray:
        """Cumulant without the per-call strip check.

        Meant for hot loops whose argument real parts were validated once at
        construction time (they are u-independent for all integrand families).
        """
        w = self.alpha * self.alpha - np.square(self.beta + np.asarray(z, dtype=complex))
        return self.delta * (self.gamma - np.sqrt(w))


def validate_strip(
    p: NigParams,
    re_lo: float,
    re_hi: float,
    margin: float = DEFAULT_STRIP_MARGIN,
) -> bool:
    """True iff [re_lo, re_hi] sits inside the strip with a safety margin."""
    if re_lo > re_hi:
        raise ValueError(f"re_lo={re_lo} exceeds re_hi={re_hi}")
    lo, hi = p.strip
    return (re_lo > lo + margin) and (re_hi < hi - margin)


def check_strip(
    p: NigParams,
    re_lo: float,
    re_hi: float,
    margin: float = DEFAULT_STRIP_MARGIN,
    what: str = "cumulant argument",
) -> None:
    """Raise ``StripViolationError`` if [re_lo, re_hi] leaves the strip."""
    if not validate_strip(p, re_lo, re_hi, margin):
        lo, hi = p.strip
        raise StripViolationError(
            f"{what} has real part in [{re_lo:.6g}, {re_hi:.6g}], outside the "
            f"admissible strip ({lo:.6g}, {hi:.6g}) with margin {margin:g}"
        )


def nig_cumulant(p: NigParams, z: complex | np.ndarray) -> complex | np.ndarray:
    """theta(z) on the principal square-root branch.

    The real part of every entry of ``z`` must lie strictly inside the strip;
    inside it, alpha^2 - (beta + z)^2 has positive real part, so the branch
    cut on the negative real axis is never approached.
    """
    za = np.asarray(z, dtype=complex)
    re = za.real
    re_lo = float(np.min(re))
    re_hi = float(np.max(re))
    lo, hi = p.strip
    if re_lo <= lo or re_hi >= hi:
        raise StripViolationError(
            f"cumulant argument has real part in [{re_lo:.6g}, {re_hi:.6g}], "
            f"outside the open strip ({lo:.6g}, {hi:.6g})"
        )
    out = p.cumulant_unchecked(za)
    if np.isscalar(z) or np.ndim(z) == 0:
        return complex(out)
    return out


def split_at_breakpoints(
    t0: float, t1: float, breakpoints: Iterable[float]
) -> list[tuple[float, float]]:
    """Sub-intervals of [t0, t1] cut at every interior breakpoint."""
    if t0 > t1:
        raise ValueError(f"t0={t0} exceeds t1={t1}")
    cuts = sorted({float(b) for b in breakpoints if t0 < b < t1})
    knots = [t0, *cuts, t1]
    return [(a, b) for a, b in zip(knots[:-1], knots[1:]) if b > a]


def gauss_legendre_panel(
    a: float, b: float, order: int = 24
) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [a, b]."""
    x, w = np.polynomial.legendre.leggauss(order)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return mid + half * x, half * w


def cumulant_integral(
    p: NigParams,
    g: Callable[[float], complex],
    t0: float,
    t1: float,
    breakpoints: Sequence[float] = (),
    rtol: float = DEFAULT_INTEGRAL_RTOL,
) -> complex:
    """Adaptive evaluation of int_{t0}^{t1} theta(g(s)) ds.

    ``breakpoints`` must contain every discontinuity of ``g`` (indicator jumps
    at contract grid dates); the integral is evaluated separately on each
    sub-interval.  The real part of ``g`` is strip-checked at every sampled
    point, so a violation anywhere on the interval raises.
    """

    def integrand(s: float) -> complex:
        return nig_cumulant(p, g(s))

    total = 0.0 + 0.0j
    for a, b in split_at_breakpoints(t0, t1, breakpoints):
        val, err = integrate.quad(
            integrand, a, b, epsabs=1e-14, epsrel=rtol, limit=200, complex_func=True
        )
        scale = max(abs(val), 1.0)
        if abs(err) > 100.0 * rtol * scale + 1e-12:
            raise QuadratureError(
                f"cumulant integral on [{a}, {b}] only reached error {abs(err):.3g} "
                f"for value {abs(val):.3g} (rtol {rtol:g})"
            )
        total += val
    return total
