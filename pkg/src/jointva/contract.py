"""Contract schedule, penalty function and the deterministic w-constants.

The surrender grid t_0 < ... < t_K (t_K < T) carries the surrender
opportunities t_1..t_{K-1}; the death grid tbar_0 < ... < tbar_N = T is
where mortality is monitored, and the surrender grid must be a subset of
it.  The w-constants are the deterministic parts of the log-moneyness
process D(t) at those dates and feed every Fourier integrand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .term_structure import MarketModel

__all__ = ["ContractSpec", "WConstants", "w_constants", "default_contract"]


@dataclass(frozen=True)
class ContractSpec:
    """Joint-life variable annuity terms.

    notional is invested in the equity index at inception; the guarantee
    accrues at ``guarantee_rate``.  ``death_multiplier`` (in (1,2)) scales
    the death benefit when both spouses die within one monitoring interval,
    ``damping`` (in (1,2)) is the transform damping parameter for the
    call-type payoffs, and the surrender intensity at date t_i is
    ``surrender_beta * |D(t_i)| + surrender_base``.
    """

    notional: float = 100.0
    maturity: float = 3.0
    guarantee_rate: float = 0.02
    surrender_grid: tuple[float, ...] = (0.0, 1.0, 2.0)
    death_grid: tuple[float, ...] = (0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0)
    penalty_floor: float = 0.95
    death_multiplier: float = 1.5
    damping: float = 1.5
    surrender_beta: float = 0.02
    surrender_base: float = 0.005

    def __post_init__(self) -> None:
        t = np.asarray(self.surrender_grid, dtype=float)
        tbar = np.asarray(self.death_grid, dtype=float)
        if self.notional <= 0.0:
            raise ValueError(f"notional must be positive, got {self.notional}")
        if self.maturity <= 0.0:
            raise ValueError(f"maturity must be positive, got {self.maturity}")
        if t.size < 2 or tbar.size < 2:
            raise ValueError("both grids need at least two dates")
        if t[0] != 0.0 or tbar[0] != 0.0:
            raise ValueError("grids must start at 0")
        if np.any(np.diff(t) <= 0.0) or np.any(np.diff(tbar) <= 0.0):
            raise ValueError("grids must be strictly increasing")
        if not t[-1] < self.maturity:
            raise ValueError(
                f"last surrender-grid date {t[-1]} must lie strictly before maturity"
            )
        if tbar[-1] != self.maturity:
            raise ValueError(f"death grid must end at maturity, got {tbar[-1]}")
        missing = set(np.round(t, 12)) - set(np.round(tbar, 12))
        if missing:
            raise ValueError(f"surrender grid must be a subset of the death grid: {sorted(missing)}")
        if not 0.0 < self.penalty_floor <= 1.0:
            raise ValueError(f"penalty_floor must lie in (0, 1], got {self.penalty_floor}")
        if not 1.0 < self.death_multiplier < 2.0:
            raise ValueError(f"death_multiplier must lie in (1, 2), got {self.death_multiplier}")
        if not 1.0 < self.damping < 2.0:
            raise ValueError(f"damping must lie in (1, 2), got {self.damping}")
        if not 0.0 <= self.surrender_beta <= 1.0:
            raise ValueError(f"surrender_beta must lie in [0, 1], got {self.surrender_beta}")
        if self.surrender_base < 0.0:
            raise ValueError(f"surrender_base must be nonnegative, got {self.surrender_base}")

    # -- grid shorthands -------------------------------------------------------

    @property
    def n_surrender(self) -> int:
        """K, the index of the last surrender-grid date."""
        return len(self.surrender_grid) - 1

    @property
    def n_death(self) -> int:
        """N, the number of death-monitoring intervals."""
        return len(self.death_grid) - 1

    def delta_t(self, l: int) -> float:
        """t_l - t_{l-1} for l in 1..K."""
        return self.surrender_grid[l] - self.surrender_grid[l - 1]

    # -- penalty ---------------------------------------------------------------

    def penalty_ptilde(self, t: float) -> float:
        """Refund fraction, increasing from penalty_floor at 0 to 1 at maturity."""
        if not 0.0 <= t <= self.maturity:
            raise ValueError(f"t must lie in [0, {self.maturity}], got {t}")
        return self.penalty_floor + (1.0 - self.penalty_floor) * t / self.maturity

    def penalty_p(self, t: float) -> float:
        """Log-penalty p(t) = -log(refund fraction); zero at maturity."""
        return -math.log(self.penalty_ptilde(t))

    # -- surrender intensity ingredients ----------------------------------------

    def surrender_intensity_weights(self) -> list[tuple[float, float]]:
        """(interval length, Cauchy scale) per surrender exposure l = 2..K.

        The Cauchy scale beta * dt_l is the width of the transform factor
        attached to |D(t_{l-1})|.  Empty when K = 1 (no surrender date).
        """
        return [
            (self.delta_t(l), self.surrender_beta * self.delta_t(l))
            for l in range(2, self.n_surrender + 1)
        ]

    @property
    def beta_degenerate(self) -> bool:
        """True when the Cauchy scales collapse (beta ~ 0): the market-driven
        part of the surrender intensity vanishes and the transform factors
        integrate out analytically."""
        if self.n_surrender < 2:
            return True
        scale = self.surrender_beta * min(
            self.delta_t(l) for l in range(2, self.n_surrender + 1)
        )
        return scale < 1e-12

    def baseline_survival_factor(self, idx: int) -> float:
        """exp(-C (t_idx - t_1)), the deterministic no-surrender factor.

        Equals 1 when the baseline intensity C is zero or K = 1.
        """
        if not 1 <= idx <= self.n_surrender:
            raise ValueError(f"index {idx} outside 1..{self.n_surrender}")
        return math.exp(
            -self.surrender_base * (self.surrender_grid[idx] - self.surrender_grid[1])
        )

    # -- death-date branch map ---------------------------------------------------

    def death_branches(self) -> list[tuple[str, int, int]]:
        """Per death date i = 1..N: ("pre", 0, i) when no surrender date can
        precede it, else ("ji", j, i) with t_j < tbar_i <= t_{j+1} (j capped
        at K-1 for dates beyond the last surrender opportunity)."""
        out: list[tuple[str, int, int]] = []
        t = self.surrender_grid
        K = self.n_surrender
        for i in range(1, self.n_death + 1):
            ti = self.death_grid[i]
            if K == 1 or ti <= t[1]:
                out.append(("pre", 0, i))
            else:
                j = int(np.searchsorted(t, ti, side="left")) - 1
                out.append(("ji", min(j, K - 1), i))
        return out


def default_contract(
    maturity: float,
    surrender_step: float = 1.0,
    death_step: float = 0.5,
    **overrides,
) -> ContractSpec:
    """Contract with grids derived from the maturity.

    Surrender dates at multiples of ``surrender_step`` strictly below
    maturity, death monitoring at multiples of ``death_step`` up to it.
    """
    n_s = math.ceil(round(maturity / surrender_step, 9)) - 1
    if n_s < 1:
        raise ValueError(f"maturity {maturity} leaves no surrender-grid date")
    t = tuple(l * surrender_step for l in range(n_s + 1))
    n_d = round(maturity / death_step)
    if not math.isclose(n_d * death_step, maturity, rel_tol=0, abs_tol=1e-9):
        raise ValueError("death_step must divide the maturity")
    tbar = tuple(i * death_step for i in range(n_d)) + (maturity,)
    return ContractSpec(
        maturity=maturity, surrender_grid=t, death_grid=tbar, **overrides
    )


@dataclass(frozen=True)
class WConstants:
    """Deterministic constants entering the Fourier integrands.

    w[l-1] for l = 1..K-1 is the deterministic part of D(t_l) (penalty
    included); w[K-1] is the maturity constant (no penalty).  w_tbar[i-1]
    is the forward-measure constant at death date tbar_i.  The drift
    integrals int_0^. A(s, horizon) ds are kept alongside because the
    price assemblies need them as prefactors.
    """

    w: tuple[float, ...]
    w_tbar: tuple[float, ...]
    int_a_maturity: float
    int_a_tbar: tuple[float, ...]


def w_constants(model: MarketModel, contract: ContractSpec) -> WConstants:
    """Compute all w-constants for one (model, contract) pair."""
    T = contract.maturity
    delta = contract.guarantee_rate
    f0_T = model.forward_integral(0.0, T)
    K = contract.n_surrender

    w = []
    for l in range(1, K):
        tl = contract.surrender_grid[l]
        w.append(
            model.drift_integral(0.0, tl, T)
            + f0_T
            - delta * T
            - model.omega(tl)
            - contract.penalty_p(tl)
        )
    int_a_maturity = model.drift_integral(0.0, T, T)
    w.append(int_a_maturity + f0_T - delta * T - model.omega(T))

    w_tbar = []
    int_a_tbar = []
    for i in range(1, contract.n_death + 1):
        ti = contract.death_grid[i]
        ia = model.drift_integral(0.0, ti, ti)
        int_a_tbar.append(ia)
        w_tbar.append(ia + model.forward_integral(0.0, ti) - model.omega(ti))

    return WConstants(
        w=tuple(w),
        w_tbar=tuple(w_tbar),
        int_a_maturity=int_a_maturity,
        int_a_tbar=tuple(int_a_tbar),
    )


def with_overrides(contract: ContractSpec, **kwargs) -> ContractSpec:
    """dataclasses.replace wrapper kept for discoverability."""
    return replace(contract, **kwargs)
