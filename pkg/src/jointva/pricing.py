"""Benefit price assembly from transform integrals and mortality weights.

Each benefit price is a sum of survival-weighted transform integrals:

* accumulation benefit: P_union(T) * B(0,T) * I * e^(delta T) * (A1 + A2),
* surrender benefit:    I * sum_i refund(t_i) * (B1_i - B2_i) * P_union(t_i),
* death benefit:        sum_i P(i) * I * e^(delta tbar_i) * B(0, tbar_i) * (...),

with every A/B obtained by quadrature or importance sampling of the
integrand families.  Integrals depend only on (model, contract), mortality
only enters through the probability weights, so the engine caches the
integrals and can re-price under a different mortality for free (used by
the sensitivity grids).
"""

from __future__ import annotations

import math
import warnings
import zlib
from dataclasses import dataclass, field, replace

import numpy as np

from . import integrands as ig
from .contract import ContractSpec, WConstants, w_constants
from .integration import IntegralEstimate, SamplerPlan, mc_is, quad_nd
from .mortality import CoupleMortality, SpouseParams
from .term_structure import MarketModel

__all__ = [
    "EngineConfig",
    "PriceBreakdown",
    "PricingEngine",
    "price_gmab",
    "price_sb",
    "price_db",
    "price_total",
    "sensitivity_grid",
    "SENSITIVITY_PARAMETERS",
]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class EngineConfig:
    """Evaluator selection and tolerances.

    method "auto" uses quadrature up to ``quad_dim_max`` dimensions and the
    importance sampler above; "quad" / "mc" force one evaluator.
    """

    method: str = "auto"
    mc_samples: int = 1_000_000
    seed: int = 2024
    quad_tol: float = 1e-7
    quad_tol_3d: float = 3e-6
    quad_dim_max: int = 3

    def __post_init__(self) -> None:
        if self.method not in ("auto", "quad", "mc"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.mc_samples < 2:
            raise ValueError("mc_samples must be at least 2")


@dataclass(frozen=True)
class PriceBreakdown:
    """Per-benefit prices with standard errors and per-piece diagnostics."""

    gmab: float
    sb: float
    db: float
    total: float
    gmab_se: float
    sb_se: float
    db_se: float
    total_se: float
    diagnostics: dict[str, IntegralEstimate] = field(default_factory=dict)
    probabilities: dict[str, float] = field(default_factory=dict)
    seed: int = 0
    method: str = "auto"


class PricingEngine:
    """Caches the transform integrals of one (model, contract) pair."""

    def __init__(
        self,
        model: MarketModel,
        contract: ContractSpec,
        config: EngineConfig | None = None,
    ):
        self.model = model
        self.contract = contract
        self.config = config or EngineConfig()
        self.w: WConstants = w_constants(model, contract)
        self._cache: dict[str, IntegralEstimate] = {}

    # -- evaluation ---------------------------------------------------------

    def _plan(self, label: str) -> SamplerPlan:
        mixed = (self.config.seed * 0x9E3779B9 + zlib.crc32(label.encode())) % (1 << 63)
        return SamplerPlan(n=self.config.mc_samples, seed=int(mixed))

    def _evaluate(self, integrand: ig.FourierIntegrand) -> IntegralEstimate:
        cfg = self.config
        use_quad = cfg.method == "quad" or (
            cfg.method == "auto" and integrand.dim <= cfg.quad_dim_max
        )
        if integrand.dim == 0:
            use_quad = True
        if use_quad:
            tol = cfg.quad_tol if integrand.dim <= 2 else cfg.quad_tol_3d
            return quad_nd(integrand, tol=tol)
        return mc_is(integrand, self._plan(integrand.label))

    def _assembled(
        self, label: str, builder, prefactor: float
    ) -> IntegralEstimate:
        """(prefactor / (2 pi)^dim) * integral of the built integrand, cached.

        Dimensions dropped by the beta-degeneracy each contribute an exact
        2 pi that cancels here, which is why the active dimension is used.
        """
        if label not in self._cache:
            integrand = builder()
            est = self._evaluate(integrand)
            est = est.scaled(prefactor / TWO_PI**integrand.dim)
            self._warn_imag(label, est)
            self._cache[label] = est
        return self._cache[label]

    @staticmethod
    def _warn_imag(label: str, est: IntegralEstimate) -> None:
        if est.imag_residual > max(1e-8, 10.0 * est.std_error):
            warnings.warn(
                f"{label}: imaginary residual {est.imag_residual:.3g} exceeds "
                f"max(1e-8, 10 * std error)",
                RuntimeWarning,
                stacklevel=3,
            )

    # -- component integrals ---------------------------------------------------

    def gmab_terms(self) -> tuple[IntegralEstimate, IntegralEstimate]:
        m, c, w = self.model, self.contract, self.w
        pref = c.baseline_survival_factor(c.n_surrender) * math.exp(-w.int_a_maturity)
        a1 = self._assembled("gmab.A1", lambda: ig.gmab_m(m, c, w), pref)
        a2 = self._assembled("gmab.A2", lambda: ig.gmab_n(m, c, w), pref)
        return a1, a2

    def sb_terms(self) -> list[tuple[int, IntegralEstimate, IntegralEstimate]]:
        m, c, w = self.model, self.contract, self.w
        out = []
        for i in range(1, c.n_surrender):
            if i == 1:
                b1 = IntegralEstimate(1.0, 0.0, 1, "analytic")
            else:
                b1 = self._assembled(
                    f"sb.B1[{i}]",
                    lambda i=i: ig.sb_m(m, c, w, i),
                    c.baseline_survival_factor(i),
                )
            b2 = self._assembled(
                f"sb.B2[{i}]",
                lambda i=i: ig.sb_n(m, c, w, i),
                c.baseline_survival_factor(i + 1),
            )
            out.append((i, b1, b2))
        return out

    def db_terms(self) -> list[tuple[str, int, int, IntegralEstimate, IntegralEstimate]]:
        """Per death date: (branch, j, i, survival-part, call-part).

        For the pre-first-surrender branch the survival part is exactly 1.
        """
        m, c, w = self.model, self.contract, self.w
        out = []
        for branch, j, i in c.death_branches():
            if branch == "pre":
                pref = math.exp(-w.int_a_tbar[i - 1])
                one = IntegralEstimate(1.0, 0.0, 1, "analytic")
                a0 = self._assembled(
                    f"db.A0[{i}]", lambda i=i: ig.db_n0(m, c, w, i), pref
                )
                out.append((branch, j, i, one, a0))
            else:
                pref = c.baseline_survival_factor(j + 1) * math.exp(
                    -w.int_a_tbar[i - 1]
                )
                a1 = self._assembled(
                    f"db.A1[{j},{i}]", lambda j=j, i=i: ig.db_m(m, c, w, j, i), pref
                )
                a2 = self._assembled(
                    f"db.A2[{j},{i}]", lambda j=j, i=i: ig.db_n(m, c, w, j, i), pref
                )
                out.append((branch, j, i, a1, a2))
        return out

    # -- prices ------------------------------------------------------------------

    def price_gmab(self, mortality: CoupleMortality):
        c = self.contract
        a1, a2 = self.gmab_terms()
        p_T = mortality.prob_union_alive(c.maturity)
        scale = (
            p_T
            * self.model.bond_price0(c.maturity)
            * c.notional
            * math.exp(c.guarantee_rate * c.maturity)
        )
        value = scale * (a1.value + a2.value)
        se = scale * math.hypot(a1.std_error, a2.std_error)
        diag = {"gmab.A1": a1, "gmab.A2": a2}
        return value, se, diag, {"P_union[T]": p_T}

    def price_sb(self, mortality: CoupleMortality):
        c = self.contract
        diag: dict[str, IntegralEstimate] = {}
        probs: dict[str, float] = {}
        if c.surrender_beta == 0.0 and c.surrender_base == 0.0:
            # no surrender intensity at all: every continuation factor equals
            # the survival factor analytically, so the benefit is exactly zero
            return 0.0, 0.0, diag, probs
        value = 0.0
        var = 0.0
        for i, b1, b2 in self.sb_terms():
            ti = c.surrender_grid[i]
            p_i = mortality.prob_union_alive(ti)
            probs[f"P_union[t{i}]"] = p_i
            diag[f"sb.B1[{i}]"] = b1
            diag[f"sb.B2[{i}]"] = b2
            gap = b1.value - b2.value
            sigma = math.hypot(b1.std_error, b2.std_error)
            if gap < -3.0 * sigma:
                warnings.warn(
                    f"surrender term {i}: continuation factor exceeds survival "
                    f"factor beyond 3 sigma ({gap:.3g} +- {sigma:.3g})",
                    RuntimeWarning,
                    stacklevel=2,
                )
            term_scale = c.notional * c.penalty_ptilde(ti) * p_i
            value += term_scale * gap
            var += (term_scale * sigma) ** 2
        return value, math.sqrt(var), diag, probs

    def price_db(self, mortality: CoupleMortality):
        c = self.contract
        diag: dict[str, IntegralEstimate] = {}
        probs: dict[str, float] = {}
        tbar = np.asarray(c.death_grid)
        value = 0.0
        var = 0.0
        for branch, j, i, part1, part2 in self.db_terms():
            ti = c.death_grid[i]
            p_i = mortality.prob_death_interval(i, tbar, c.death_multiplier)
            probs[f"P[{i}]"] = p_i
            if branch == "pre":
                diag[f"db.A0[{i}]"] = part2
            else:
                diag[f"db.A1[{j},{i}]"] = part1
                diag[f"db.A2[{j},{i}]"] = part2
            scale = (
                p_i
                * c.notional
                * math.exp(c.guarantee_rate * ti)
                * self.model.bond_price0(ti)
            )
            value += scale * (part1.value + part2.value)
            var += (scale * math.hypot(part1.std_error, part2.std_error)) ** 2
        return value, math.sqrt(var), diag, probs

    def price_total(self, mortality: CoupleMortality) -> PriceBreakdown:
        g, g_se, g_diag, g_probs = self.price_gmab(mortality)
        s, s_se, s_diag, s_probs = self.price_sb(mortality)
        d, d_se, d_diag, d_probs = self.price_db(mortality)
        for name, val in (("GMAB", g), ("SB", s), ("DB", d)):
            if val < 0.0:
                warnings.warn(
                    f"{name} price is negative ({val:.6g})", RuntimeWarning, stacklevel=2
                )
        return PriceBreakdown(
            gmab=g,
            sb=s,
            db=d,
            total=g + s + d,
            gmab_se=g_se,
            sb_se=s_se,
            db_se=d_se,
            total_se=math.sqrt(g_se**2 + s_se**2 + d_se**2),
            diagnostics={**g_diag, **s_diag, **d_diag},
            probabilities={**g_probs, **s_probs, **d_probs},
            seed=self.config.seed,
            method=self.config.method,
        )


def price_gmab(model, contract, mortality, config=None) -> PriceBreakdown:
    """Accumulation-benefit price only (other components zero in the result)."""
    engine = PricingEngine(model, contract, config)
    v, se, diag, probs = engine.price_gmab(mortality)
    return PriceBreakdown(v, 0, 0, v, se, 0, 0, se, diag, probs, engine.config.seed)


def price_sb(model, contract, mortality, config=None) -> PriceBreakdown:
    engine = PricingEngine(model, contract, config)
    v, se, diag, probs = engine.price_sb(mortality)
    return PriceBreakdown(0, v, 0, v, 0, se, 0, se, diag, probs, engine.config.seed)


def price_db(model, contract, mortality, config=None) -> PriceBreakdown:
    engine = PricingEngine(model, contract, config)
    v, se, diag, probs = engine.price_db(mortality)
    return PriceBreakdown(0, 0, v, v, 0, 0, se, se, diag, probs, engine.config.seed)


def price_total(model, contract, mortality, config=None) -> PriceBreakdown:
    """Full contract price, the sum of the three benefit prices."""
    return PricingEngine(model, contract, config).price_total(mortality)


SENSITIVITY_PARAMETERS = ("beta", "C", "delta", "eps1", "eps2", "kappa1", "kappa2")


def _apply_parameter(contract: ContractSpec, mortality: CoupleMortality, name, value):
    if name == "beta":
        return replace(contract, surrender_beta=value), mortality
    if name == "C":
        return replace(contract, surrender_base=value), mortality
    if name == "delta":
        return replace(contract, guarantee_rate=value), mortality
    if name in ("eps1", "kappa1", "eps2", "kappa2"):
        which = "spouse1" if name.endswith("1") else "spouse2"
        spouse = replace(
            getattr(mortality, which),
            **{("eps" if name.startswith("eps") else "kappa"): value},
        )
        return contract, replace(mortality, **{which: spouse})
    raise ValueError(
        f"unknown sensitivity parameter {name!r}; supported: {SENSITIVITY_PARAMETERS}"
    )


def sensitivity_grid(
    model: MarketModel,
    contract: ContractSpec,
    mortality: CoupleMortality,
    axis1: tuple[str, np.ndarray],
    axis2: tuple[str, np.ndarray],
    config: EngineConfig | None = None,
) -> list[dict]:
    """Price breakdowns over a 2-d parameter grid.

    Engines (hence integrals) are shared between cells that only differ in
    mortality parameters; mortality objects are shared between cells that
    only differ in market/contract parameters.
    """
    name1, values1 = axis1
    name2, values2 = axis2
    engines: dict[tuple, PricingEngine] = {}
    mortalities: dict[tuple, CoupleMortality] = {}
    rows = []
    for v1 in values1:
        for v2 in values2:
            c_cell, m_cell = _apply_parameter(contract, mortality, name1, float(v1))
            c_cell, m_cell = _apply_parameter(c_cell, m_cell, name2, float(v2))
            ckey = (c_cell.surrender_beta, c_cell.surrender_base, c_cell.guarantee_rate)
            mkey = (
                m_cell.spouse1.eps,
                m_cell.spouse1.kappa,
                m_cell.spouse2.eps,
                m_cell.spouse2.kappa,
            )
            if ckey not in engines:
                engines[ckey] = PricingEngine(model, c_cell, config)
            if mkey not in mortalities:
                mortalities[mkey] = m_cell
            try:
                breakdown = engines[ckey].price_total(mortalities[mkey])
            except Exception as exc:
                raise RuntimeError(
                    f"sensitivity cell ({name1}={v1}, {name2}={v2}) failed: {exc}"
                ) from exc
            rows.append(
                {
                    name1: float(v1),
                    name2: float(v2),
                    "breakdown": breakdown,
                }
            )
    return rows
