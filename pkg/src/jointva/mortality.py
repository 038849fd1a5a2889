"""Closed-form joint lifetime analytics for a coupled pair with bereavement.

Each spouse's pre-death mortality intensity follows d(lambda) = mu*lambda dt
+ sigma dW.  At the first death the survivor's intensity jumps by
eps * lambda_surv(first-death time) and the jump decays at rate kappa
(broken-heart syndrome).  The joint density rho(t1, t2) of the two death
times has a closed form; everything else here (marginal tails, interval
probabilities, the union-survival factors used by the pricer) is obtained by
quadrature of rho over panels of a fixed grid, split along the diagonal
where rho is defined piecewise.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = ["SpouseParams", "CoupleMortality"]

_GL_ORDER = 8


@dataclass(frozen=True)
class SpouseParams:
    """Per-spouse mortality parameters (lam0, mu, sigma, eps, kappa).

    lam0 is the initial intensity, mu the intensity drift, sigma the
    intensity volatility; eps scales the bereavement jump (0 switches the
    broken-heart effect off) and kappa is its decay rate.
    """

    lam0: float
    mu: float
    sigma: float
    eps: float
    kappa: float

    def __post_init__(self) -> None:
        for name in ("lam0", "mu", "sigma", "kappa"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.eps < 0.0:
            raise ValueError(f"eps must be nonnegative, got {self.eps}")

    def hazard_mean(self, t):
        """E of the integrated intensity over [0, t]."""
        t = np.asarray(t, dtype=float)
        return self.lam0 / self.mu * np.expm1(self.mu * t)

    def hazard_variance(self, t):
        """Variance of the integrated intensity over [0, t]."""
        t = np.asarray(t, dtype=float)
        r = self.sigma / self.mu
        return r * r * (
            t
            - 2.0 / self.mu * np.expm1(self.mu * t)
            + 0.5 / self.mu * np.expm1(2.0 * self.mu * t)
        )

    def artifact_onset(self) -> float:
        """Horizon where variance/2 of the integrated intensity starts
        outgrowing its mean.

        The Gaussian intensity can go negative; beyond this time the
        single-life survival exponent variance/2 - mean turns around and the
        closed forms stop behaving like survival quantities.  The survival
        exponent is at its most negative exactly here, so the genuine mass
        beyond is nil.
        """
        a = 0.5 * (self.sigma / self.mu) ** 2
        y = ((2.0 * a + self.lam0) + math.sqrt(self.lam0 * (4.0 * a + self.lam0))) / (
            2.0 * a
        )
        return math.log(y) / self.mu


def _density_ordered(tf, dt, first: SpouseParams, second: SpouseParams):
    """Joint density at (first death = tf, second death = tf + dt), dt > 0.

    ``first`` is the spouse dying at tf, ``second`` the bereaved spouse.
    Vectorized over matching array shapes.
    """
    s1sq = first.sigma * first.sigma
    mu1 = first.mu
    e1 = np.exp(mu1 * tf)
    c1 = s1sq / (2.0 * mu1 * mu1)
    poly1 = -c1 * (e1 - 1.0) ** 2 + e1 * first.lam0
    exp1 = np.exp(
        -c1 * (-tf + 2.0 / mu1 * (e1 - 1.0) - 0.5 / mu1 * (e1 * e1 - 1.0))
        - (e1 - 1.0) * first.lam0 / mu1
    )

    mu2 = second.mu
    s2sq = second.sigma * second.sigma
    c2 = s2sq / (2.0 * mu2 * mu2)
    g = np.exp(mu2 * dt)
    h = np.exp(-second.kappa * dt)
    big_g = g + mu2 * second.eps / second.kappa * (1.0 - h)
    e2 = np.exp(mu2 * tf)
    poly2 = -c2 * (g - 1.0) ** 2 + (g + second.eps * h) * (
        c2 * (2.0 * (e2 - 1.0) - big_g * (e2 * e2 - 1.0)) + e2 * second.lam0
    )
    exp2 = np.exp(
        -c2 * (-dt + 2.0 / mu2 * (g - 1.0) - 0.5 / mu2 * (g * g - 1.0))
        - c2
        * (
            -tf
            + 2.0 / mu2 * big_g * (e2 - 1.0)
            - 0.5 / mu2 * big_g * big_g * (e2 * e2 - 1.0)
        )
        - (big_g * e2 - 1.0) * second.lam0 / mu2
    )
    return poly1 * exp1 * poly2 * exp2


@dataclass(frozen=True, eq=False)
class CoupleMortality:
    """Joint lifetime model for two coupled lives over a horizon t_star.

    t_star truncates all lifetime integrals; it must be large enough that
    the density mass outside [0, t_star]^2 is negligible (the default 100
    years leaves well under 1e-4 for intensities of practical size).
    """

    spouse1: SpouseParams
    spouse2: SpouseParams
    t_star: float = 100.0

    def __post_init__(self) -> None:
        if not self.t_star > 0.0:
            raise ValueError(f"t_star must be positive, got {self.t_star}")
        object.__setattr__(self, "_cell_cache", {})

    @property
    def quadrature_horizon(self) -> float:
        """Effective upper limit of the lifetime quadratures.

        t_star capped at the artifact onset of either spouse: past that
        point the closed-form density is no longer a density (negative
        intensities dominate) while the mass it should carry has already
        decayed below underflow level, so the cap costs nothing.
        """
        return min(
            self.t_star,
            self.spouse1.artifact_onset(),
            self.spouse2.artifact_onset(),
        )

    # -- closed forms --------------------------------------------------------

    def mean_m(self, t):
        """Mean of int_0^t (lambda1 + lambda2) ds."""
        return self.spouse1.hazard_mean(t) + self.spouse2.hazard_mean(t)

    def variance_sigma2(self, t):
        """Variance of int_0^t (lambda1 + lambda2) ds."""
        return self.spouse1.hazard_variance(t) + self.spouse2.hazard_variance(t)

    def joint_survival(self, t):
        """P(both alive at t) = exp(variance/2 - mean) of the summed hazard.

        The Gaussian-intensity closed form can marginally exceed 1 for
        extreme parameters; the raw value is returned and flagged, never
        clipped.
        """
        val = np.exp(0.5 * self.variance_sigma2(t) - self.mean_m(t))
        if np.any(np.asarray(val) > 1.0 + 1e-12):
            warnings.warn(
                "joint survival probability exceeds 1 (Gaussian-intensity artifact)",
                RuntimeWarning,
                stacklevel=2,
            )
        return val

    def joint_density(self, t1, t2):
        """Joint density rho(t1, t2) of the two death times.

        Defined piecewise across the diagonal: for t1 < t2 spouse 1 dies
        first, otherwise the roles (and parameter blocks) are swapped.
        Diagonal evaluations are rejected; the diagonal carries no mass.
        """
        t1a = np.asarray(t1, dtype=float)
        t2a = np.asarray(t2, dtype=float)
        if np.any(t1a < 0.0) or np.any(t2a < 0.0):
            raise ValueError("death times must be nonnegative")
        if np.any(t1a == t2a):
            raise ValueError("joint density is not defined on the diagonal t1 == t2")
        t1a, t2a = np.broadcast_arrays(t1a, t2a)
        out = np.empty(t1a.shape, dtype=float)
        lower = t1a < t2a
        if np.any(lower):
            out[lower] = _density_ordered(
                t1a[lower], t2a[lower] - t1a[lower], self.spouse1, self.spouse2
            )
        upper = ~lower
        if np.any(upper):
            out[upper] = _density_ordered(
                t2a[upper], t1a[upper] - t2a[upper], self.spouse2, self.spouse1
            )
        if out.ndim == 0 or (np.ndim(t1) == 0 and np.ndim(t2) == 0):
            return float(out.reshape(-1)[0])
        return out

    # -- panel quadrature of rho ----------------------------------------------

    def _knots(self, extra: tuple[float, ...]) -> tuple[float, ...]:
        ts = self.quadrature_horizon
        base = np.concatenate(
            (
                np.arange(0.0, min(12.0, ts), 0.5),
                np.arange(12.0, min(30.0, ts), 1.0),
                np.arange(30.0, ts, 5.0),
                [ts],
            )
        )
        knots = np.unique(np.concatenate((base, [e for e in extra if 0.0 <= e <= ts])))
        return tuple(float(k) for k in knots)

    def _cell_masses(self, knots: tuple[float, ...]) -> np.ndarray:
        """Matrix of int over [k_i, k_i+1] x [k_j, k_j+1] of rho, all cells.

        Off-diagonal cells use tensor Gauss-Legendre; diagonal cells are
        split into their two triangles (rho is defined piecewise there) and
        each triangle is integrated with a mapped product rule.
        """
        cache = self._cell_cache
        if knots in cache:
            return cache[knots]
        kn = np.asarray(knots)
        n = kn.size - 1
        xg, wg = np.polynomial.legendre.leggauss(_GL_ORDER)
        # per-panel nodes/weights, flattened to one axis
        mid = 0.5 * (kn[1:] + kn[:-1])
        half = 0.5 * np.diff(kn)
        nodes = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
        weights = (half[:, None] * wg[None, :]).ravel()

        dens = np.zeros((nodes.size, nodes.size))
        x = nodes[:, None]
        y = nodes[None, :]
        lower = x > y
        upper = x < y
        with np.errstate(under="ignore", over="ignore"):
            dl = _density_ordered(y, x - y, self.spouse2, self.spouse1)
            du = _density_ordered(x, y - x, self.spouse1, self.spouse2)
        dens[lower] = dl[lower]
        dens[upper] = du[upper]
        contrib = weights[:, None] * weights[None, :] * dens
        cells = contrib.reshape(n, _GL_ORDER, n, _GL_ORDER).sum(axis=(1, 3))

        # diagonal cells: triangles {a<=t2<=t1<=b} and its mirror
        tau, wtau = np.polynomial.legendre.leggauss(_GL_ORDER)
        tau = 0.5 * (tau + 1.0)
        wtau = 0.5 * wtau
        for i in range(n):
            a, b = kn[i], kn[i + 1]
            xs, wxs = mid[i] + half[i] * xg, half[i] * wg
            tf = a + (xs[:, None] - a) * tau[None, :]
            jac = xs[:, None] - a
            with np.errstate(under="ignore", over="ignore"):
                tri_low = _density_ordered(
                    tf, xs[:, None] - tf, self.spouse2, self.spouse1
                )
                tri_up = _density_ordered(
                    tf, xs[:, None] - tf, self.spouse1, self.spouse2
                )
            w2 = wxs[:, None] * wtau[None, :] * jac
            cells[i, i] = float(np.sum(w2 * (tri_low + tri_up)))
        cache[knots] = cells
        return cells

    def _grid_index(self, knots: tuple[float, ...], t: float) -> int:
        idx = int(np.searchsorted(np.asarray(knots), t))
        if not math.isclose(knots[idx], t, abs_tol=1e-12):
            raise ValueError(f"time {t} is not aligned with the quadrature grid")
        return idx

    def total_mass(self, extra_knots: tuple[float, ...] = ()) -> float:
        """int of rho over [0, t_star]^2 (should be 1 up to truncation)."""
        knots = self._knots(extra_knots)
        return float(self._cell_masses(knots).sum())

    def marginal_tail(self, spouse: int, t: float) -> float:
        """P(tau_spouse > t) as a tail integral of rho.

        The marginal law of one lifetime is not the single-life survival
        whenever the bereavement effect is on, so it is obtained from rho.
        """
        if spouse not in (1, 2):
            raise ValueError("spouse must be 1 or 2")
        knots = self._knots((float(t),))
        cells = self._cell_masses(knots)
        i = self._grid_index(knots, float(t))
        return float(cells[i:, :].sum() if spouse == 1 else cells[:, i:].sum())

    def square_mass(self, lo: float, hi: float) -> float:
        """P(both deaths fall in [lo, hi))."""
        knots = self._knots((float(lo), float(hi)))
        cells = self._cell_masses(knots)
        i = self._grid_index(knots, float(lo))
        j = self._grid_index(knots, float(hi))
        return float(cells[i:j, i:j].sum())

    def tail_square_mass(self, t: float) -> float:
        """int of rho over (t, t_star)^2, the quadrature twin of joint_survival."""
        knots = self._knots((float(t),))
        cells = self._cell_masses(knots)
        i = self._grid_index(knots, float(t))
        return float(cells[i:, i:].sum())

    # -- pricing probabilities --------------------------------------------------

    def prob_union_alive(self, t: float) -> float:
        """P(at least one spouse alive at t).

        Two marginal tail quadratures of rho minus the closed-form joint
        survival; the tails are cached per grid-aligned date.
        """
        if not 0.0 <= t <= self.t_star:
            raise ValueError(f"t must lie in [0, {self.t_star}], got {t}")
        val = (
            self.marginal_tail(1, t)
            + self.marginal_tail(2, t)
            - float(self.joint_survival(t))
        )
        return min(max(val, 0.0), 1.0)

    def prob_death_interval(
        self, i: int, tbar: np.ndarray, alpha_mult: float
    ) -> float:
        """Death-benefit weight for monitoring interval [tbar_{i-1}, tbar_i).

        Sum of the two marginal interval probabilities plus
        (alpha_mult - 2) times the both-die-in-interval mass.  This is a
        payout weight, not a probability, and may exceed 1.
        """
        tbar = np.asarray(tbar, dtype=float)
        if not 1 <= i < tbar.size:
            raise ValueError(f"interval index {i} out of range for grid of size {tbar.size}")
        if not 1.0 < alpha_mult < 2.0:
            raise ValueError(f"alpha_mult must lie in (1, 2), got {alpha_mult}")
        lo, hi = float(tbar[i - 1]), float(tbar[i])
        p1 = self.marginal_tail(1, lo) - self.marginal_tail(1, hi)
        p2 = self.marginal_tail(2, lo) - self.marginal_tail(2, hi)
        both = self.square_mass(lo, hi)
        return p1 + p2 + (alpha_mult - 2.0) * both
