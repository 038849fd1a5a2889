"""Deterministic term-structure machinery.

The forward-rate volatilities are the exponential pair sigma1(s, T) =
a*exp(-a*(T-s)) and beta(s, T) = b*exp(-b*(T-s)), whose time integrals
Sigma1, Sigma2 have closed forms.  The no-arbitrage drift A(u, T) couples
them to the two NIG cumulants, and omega(t) is the equity drift correction
that makes the discounted index a martingale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate

from .levy import NigParams, check_strip

MAX_HORIZON = 100.0

__all__ = ["FlatCurve", "TableCurve", "load_curve_table", "MarketModel", "MAX_HORIZON"]


@dataclass(frozen=True)
class FlatCurve:
    """Initial forward curve f(0, .) at a constant level."""

    level: float = 0.02

    def rate(self, t: float) -> float:
        return self.level

    def integral(self, t0: float, t1: float) -> float:
        """Exact integral of the flat curve over [t0, t1]."""
        if t0 > t1:
            raise ValueError(f"t0={t0} exceeds t1={t1}")
        return self.level * (t1 - t0)


@dataclass(frozen=True, eq=False)
class TableCurve:
    """Piecewise-linear forward curve from (maturity, rate) knots.

    Linear interpolation between knots, flat extrapolation beyond the first
    and last knot.  Integrals are exact for the interpolant.
    """

    maturities: np.ndarray
    rates: np.ndarray

    def __post_init__(self) -> None:
        x = np.asarray(self.maturities, dtype=float)
        y = np.asarray(self.rates, dtype=float)
        if x.ndim != 1 or x.shape != y.shape or x.size == 0:
            raise ValueError("curve table needs matching 1-d maturity and rate columns")
        if np.any(np.diff(x) <= 0.0):
            raise ValueError("curve maturities must be strictly increasing")
        object.__setattr__(self, "maturities", x)
        object.__setattr__(self, "rates", y)
        # cumulative exact integral of the interpolant from the first knot
        cum = np.concatenate(
            ([0.0], np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))
        )
        object.__setattr__(self, "_cum", cum)

    def rate(self, t: float) -> float:
        return float(np.interp(t, self.maturities, self.rates))

    def _antiderivative(self, t: float) -> float:
        x, y, cum = self.maturities, self.rates, self._cum
        if t <= x[0]:
            return y[0] * (t - x[0])
        if t >= x[-1]:
            return cum[-1] + y[-1] * (t - x[-1])
        k = int(np.searchsorted(x, t, side="right") - 1)
        ya = y[k]
        yb = ya + (y[k + 1] - ya) * (t - x[k]) / (x[k + 1] - x[k])
        return float(cum[k] + 0.5 * (ya + yb) * (t - x[k]))

    def integral(self, t0: float, t1: float) -> float:
        if t0 > t1:
            raise ValueError(f"t0={t0} exceeds t1={t1}")
        return self._antiderivative(t1) - self._antiderivative(t0)


def load_curve_table(path: str | Path) -> TableCurve:
    """Read a two-column (maturity_years, forward_rate) plain-text file."""
    rows = []
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 2:
            raise ValueError(f"curve table line needs two columns, got: {raw!r}")
        rows.append((float(parts[0]), float(parts[1])))
    if not rows:
        raise ValueError(f"curve table {path} is empty")
    arr = np.array(rows, dtype=float)
    return TableCurve(arr[:, 0], arr[:, 1])


@dataclass(frozen=True, eq=False)
class MarketModel:
    """Term-structure and equity parameters with the two NIG factors.

    a, b are the exponential-volatility rates of the forward curve, sigma2
    the constant equity volatility, f0 the initial forward curve.  Strip
    bounds for Sigma1, -Sigma2 and sigma2 are validated once at construction
    over the supported horizon.
    """

    a: float
    b: float
    sigma2: float
    nig1: NigParams
    nig2: NigParams
    f0: FlatCurve | TableCurve = field(default_factory=FlatCurve)

    def __post_init__(self) -> None:
        if not self.a > 0.0:
            raise ValueError(f"a must be positive, got {self.a}")
        if self.b == 0.0:
            raise ValueError("b must be nonzero")
        if self.sigma2 < 0.0:
            raise ValueError(f"sigma2 must be nonnegative, got {self.sigma2}")
        self.check_strips(MAX_HORIZON)
        object.__setattr__(self, "_drift_cache", {})

    # -- volatility integrals ------------------------------------------------

    def big_sigma1(self, u: float, T: float) -> float:
        """Sigma1(u, T) = 1 - exp(-a (T - u)), the integral of sigma1(u, .)."""
        if u > T:
            raise ValueError(f"need u <= T, got u={u}, T={T}")
        return -math.expm1(-self.a * (T - u))

    def big_sigma2(self, u: float, T: float) -> float:
        """Sigma2(u, T) = 1 - exp(-b (T - u))."""
        if u > T:
            raise ValueError(f"need u <= T, got u={u}, T={T}")
        return -math.expm1(-self.b * (T - u))

    # -- drifts ----------------------------------------------------------------

    def drift_A(self, u: float, T: float) -> float:
        """No-arbitrage drift A(u, T) = theta1(Sigma1) + theta2(-Sigma2)."""
        z1 = self.big_sigma1(u, T)
        z2 = -self.big_sigma2(u, T)
        return complex(self.nig1.cumulant(z1)).real + complex(
            self.nig2.cumulant(z2)
        ).real

    def drift_integral(self, t0: float, t1: float, T: float) -> float:
        """int_{t0}^{t1} A(s, T) ds by adaptive quadrature (cached)."""
        key = (t0, t1, T)
        cache = self._drift_cache
        if key not in cache:
            val, err = integrate.quad(
                lambda s: self.drift_A(s, T), t0, t1, epsabs=1e-13, epsrel=1e-12
            )
            cache[key] = float(val)
        return cache[key]

    def omega(self, t: float) -> float:
        """Equity drift correction; t * theta2(sigma2) for constant sigma2."""
        if t < 0.0:
            raise ValueError(f"t must be nonnegative, got {t}")
        return t * complex(self.nig2.cumulant(self.sigma2)).real

    # -- initial curve ---------------------------------------------------------

    def forward_integral(self, t0: float, t1: float) -> float:
        """int_{t0}^{t1} f(0, s) ds."""
        return self.f0.integral(t0, t1)

    def bond_price0(self, T: float) -> float:
        """Zero-coupon price B(0, T) = exp(-int_0^T f(0, s) ds)."""
        if T < 0.0:
            raise ValueError(f"T must be nonnegative, got {T}")
        return math.exp(-self.forward_integral(0.0, T))

    # -- validation --------------------------------------------------------------

    def check_strips(self, horizon: float) -> None:
        """Strip pre-validation for every (u, T) with 0 <= u <= T <= horizon.

        Sigma1 ranges over [0, 1 - exp(-a*horizon)] and -Sigma2 over the
        matching interval for b; sigma2 must also be admissible for the
        second cumulant.  Raises ``StripViolationError`` on failure.
        """
        s1_hi = -math.expm1(-self.a * horizon)
        check_strip(self.nig1, 0.0, s1_hi, what="Sigma1(u,T)")
        s2 = -math.expm1(-self.b * horizon)
        lo, hi = min(-s2, 0.0), max(-s2, 0.0)
        check_strip(self.nig2, lo, hi, what="-Sigma2(u,T)")
        check_strip(self.nig2, min(self.sigma2, 0.0), max(self.sigma2, 0.0), what="sigma2")
