"""Complex-valued Fourier integrands for the three benefit transforms.

Every benefit price reduces to integrals over R^d of a product of three
pieces: a deterministic phase exp(i sum u_l w_l) (damped payoff dimensions
carry (i x + r) w instead), an exponential of cumulant integrals whose
arguments are piecewise-smooth in the time variable (indicator jumps at the
surrender dates), and rational Cauchy / payoff-transform factors in the
integration variables.  The classes here evaluate batches of points with
the cumulant integrals done on fixed Gauss-Legendre panels split at the
indicator dates; panel accuracy is cross-checked in the tests against the
adaptive reference integrator.

Axis convention: indicator dimensions first (matching u_1..u_m), then the
optional trailing dimension (the undamped D(t_i) exposure for the surrender
family, or the damped payoff variable).  Points where the surrender
sensitivity is effectively zero collapse the Cauchy dimensions: those axes
are dropped and the factor-of-2pi bookkeeping is exposed via ``full_dim``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .contract import ContractSpec, WConstants
from .levy import NigParams, check_strip, gauss_legendre_panel, split_at_breakpoints
from .term_structure import MarketModel

_PANEL_ORDER = 20

__all__ = [
    "FourierIntegrand",
    "gmab_m",
    "gmab_n",
    "sb_m",
    "sb_n",
    "db_m",
    "db_n",
    "db_n0",
    "damping_proposal_scale",
]


def damping_proposal_scale(r: float) -> float:
    """Cauchy proposal scale sqrt(r (r-1)) matched to the payoff transform.

    The transform magnitude 1/sqrt((x^2+(r-1)^2)(x^2+r^2)) and the Cauchy
    density with this scale have the same value ratio at x = 0 and x -> inf,
    keeping the importance weight bounded on both ends.
    """
    return math.sqrt(r * (r - 1.0))


@dataclass
class _Panel:
    weights: np.ndarray
    eb: np.ndarray
    es: np.ndarray | None
    el: np.ndarray | None
    fb: np.ndarray
    fs: np.ndarray | None
    fl: np.ndarray | None


class FourierIntegrand:
    """Batched evaluator for one transform integrand.

    ``smooth`` evaluates the integrand without the Cauchy factors of the
    canceling dimensions (the importance sampler cancels them against its
    proposals analytically); ``full`` restores them.
    """

    def __init__(
        self,
        label: str,
        nig1: NigParams,
        nig2: NigParams,
        panels: list[_Panel],
        w_ind: np.ndarray,
        scales: tuple[float, ...],
        cancel: tuple[bool, ...],
        full_dim: int,
        last_kind: str | None = None,
        w_last: float = 0.0,
        damping: float | None = None,
        log_const: float = 0.0,
    ):
        self.label = label
        self.nig1 = nig1
        self.nig2 = nig2
        self.panels = panels
        self.w_ind = np.asarray(w_ind, dtype=float)
        self.n_ind = self.w_ind.size
        self.scales = scales
        self.cancel = cancel
        self.full_dim = full_dim
        self.last_kind = last_kind
        self.w_last = w_last
        self.damping = damping
        self.log_const = log_const
        self.dim = self.n_ind + (1 if last_kind is not None else 0)
        if len(scales) != self.dim or len(cancel) != self.dim:
            raise ValueError("scales/cancel length must match the active dimension")

    @property
    def dropped_dims(self) -> int:
        """Cauchy dimensions integrated out analytically (each worth 2*pi)."""
        return self.full_dim - self.dim

    def _theta_sum(
        self, n: int, suffix: np.ndarray | None, xl: np.ndarray | None
    ) -> np.ndarray:
        total = np.zeros(n, dtype=complex)
        for p, panel in enumerate(self.panels):
            z_e = np.broadcast_to(panel.eb, (n, panel.eb.size)).astype(complex)
            z_f = np.broadcast_to(panel.fb, (n, panel.fb.size)).astype(complex)
            if panel.es is not None and suffix is not None:
                s = suffix[:, p][:, None]
                z_e = z_e + panel.es[None, :] * s
                z_f = z_f + panel.fs[None, :] * s
            if panel.el is not None and xl is not None:
                z_f = z_f + panel.fl[None, :] * xl[:, None]
                z_e = z_e + panel.el[None, :] * xl[:, None]
            total += self.nig1.cumulant_unchecked(z_e) @ panel.weights
            total += self.nig2.cumulant_unchecked(z_f) @ panel.weights
        return total

    def smooth(self, x: np.ndarray) -> np.ndarray:
        """Integrand without the canceling Cauchy factors; x has shape (n, dim)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.dim:
            raise ValueError(f"expected {self.dim} columns, got {x.shape[1]}")
        n = x.shape[0]
        u = x[:, : self.n_ind]
        xl = x[:, self.n_ind] if self.last_kind is not None else None

        if self.n_ind:
            # suffix[:, p] = sum of u_l active on panel p (l > p, 0-based)
            rev = np.cumsum(u[:, ::-1], axis=1)[:, ::-1]
            suffix = np.concatenate((rev, np.zeros((n, 1))), axis=1)
        else:
            suffix = None

        with np.errstate(under="ignore"):
            exponent = self._theta_sum(n, suffix, xl) + self.log_const
            if self.n_ind:
                exponent = exponent + 1j * (u @ self.w_ind)
            if self.last_kind == "damped":
                exponent = exponent + (1j * xl + self.damping) * self.w_last
            elif self.last_kind == "cauchy":
                exponent = exponent + 1j * xl * self.w_last
            val = np.exp(exponent)
            if self.last_kind == "damped":
                iz = 1j * xl + self.damping
                val = val / ((iz - 1.0) * iz)
        return val

    def full(self, x: np.ndarray) -> np.ndarray:
        """Integrand including every Cauchy factor."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        val = self.smooth(x)
        for k, (scale, flag) in enumerate(zip(self.scales, self.cancel)):
            if flag:
                val = val * (2.0 * scale / (x[:, k] ** 2 + scale * scale))
        return val


# -- construction -----------------------------------------------------------------


def _kernels(model: MarketModel, s: np.ndarray, horizon: float):
    s1 = 1.0 - np.exp(-model.a * (horizon - s))
    s2 = 1.0 - np.exp(-model.b * (horizon - s))
    return s1, s2


def _build(
    label: str,
    model: MarketModel,
    contract: ContractSpec,
    *,
    horizon: float,
    n_ind_full: int,
    w_ind_full: np.ndarray,
    mode: str,
    last_kind: str | None,
    w_last: float = 0.0,
    kernel_horizon: float | None = None,
    log_const: float = 0.0,
) -> FourierIntegrand:
    """Shared constructor for all integrand families.

    ``mode`` selects the E/F base profiles: "forward" (maturity-measure
    families with real bases Sigma1 / -Sigma2), "spot" (stock-measure
    surrender families with base sigma2 on F and none on E), and their
    damped variants "forward-damped", "spot is never damped", plus
    "single-damped" for the pre-first-surrender death dates.
    """
    r = contract.damping
    sig2 = model.sigma2
    kh = horizon if kernel_horizon is None else kernel_horizon
    drop = contract.beta_degenerate

    n_ind = 0 if drop else n_ind_full
    w_ind = np.zeros(0) if drop else np.asarray(w_ind_full, dtype=float)
    dates = contract.surrender_grid[1 : n_ind + 1]

    panels: list[_Panel] = []
    e_lo, e_hi = math.inf, -math.inf
    f_lo, f_hi = math.inf, -math.inf
    for a, b in split_at_breakpoints(0.0, horizon, dates):
        s, wq = gauss_legendre_panel(a, b, _PANEL_ORDER)
        s1_T, s2_T = _kernels(model, s, contract.maturity)
        s1_h, s2_h = _kernels(model, s, kh)
        if mode == "forward":
            eb, es, el = s1_h, -1j * s1_T, None
            fb, fs, fl = -s2_h, 1j * (sig2 + s2_T), None
        elif mode == "forward-damped":
            eb, es, el = (1.0 - r) * s1_h, -1j * s1_T, -1j * s1_h
            fb = r * sig2 + (r - 1.0) * s2_h
            fs, fl = 1j * (sig2 + s2_T), 1j * (sig2 + s2_h)
        elif mode == "spot":
            eb, es, el = np.zeros_like(s), -1j * s1_T, None
            fb, fs, fl = np.full_like(s, sig2), 1j * (sig2 + s2_T), None
            if last_kind == "cauchy":
                el, fl = -1j * s1_T, 1j * (sig2 + s2_T)
        elif mode == "single-damped":
            eb, es, el = (1.0 - r) * s1_h, None, -1j * s1_h
            fb = -s2_h + r * (sig2 + s2_h)
            fs, fl = None, 1j * (sig2 + s2_h)
        else:
            raise ValueError(f"unknown mode {mode!r}")
        if last_kind is None:
            el = fl = None
        if n_ind == 0:
            es = fs = None
        panels.append(_Panel(wq, eb + 0j, es, el, fb + 0j, fs, fl))
        e_lo, e_hi = min(e_lo, float(eb.min())), max(e_hi, float(eb.max()))
        f_lo, f_hi = min(f_lo, float(fb.min())), max(f_hi, float(fb.max()))

    check_strip(model.nig1, e_lo, e_hi, what=f"{label} first-factor argument")
    check_strip(model.nig2, f_lo, f_hi, what=f"{label} second-factor argument")
    _check_branch_distance(model.nig1, e_lo, e_hi)
    _check_branch_distance(model.nig2, f_lo, f_hi)

    weights = contract.surrender_intensity_weights()
    cauchy_scales = tuple(g for _, g in weights[:n_ind_full])
    if last_kind == "cauchy":
        cauchy_scales = cauchy_scales + (weights[n_ind_full][1],)
    full_dim = n_ind_full + (1 if last_kind is not None else 0)

    if drop:
        scales: tuple[float, ...] = ()
        cancel: tuple[bool, ...] = ()
        if last_kind == "damped":
            scales, cancel = (damping_proposal_scale(r),), (False,)
        effective_last = "damped" if last_kind == "damped" else None
    else:
        scales = cauchy_scales[: n_ind_full + (1 if last_kind == "cauchy" else 0)]
        cancel = (True,) * len(scales)
        if last_kind == "damped":
            scales = scales + (damping_proposal_scale(r),)
            cancel = cancel + (False,)
        effective_last = last_kind

    return FourierIntegrand(
        label,
        model.nig1,
        model.nig2,
        panels,
        w_ind,
        scales,
        cancel,
        full_dim,
        last_kind=effective_last,
        w_last=w_last,
        damping=r if last_kind == "damped" else None,
        log_const=log_const,
    )


def _check_branch_distance(p: NigParams, re_lo: float, re_hi: float) -> None:
    # principal-branch safety: alpha^2 - (beta + z)^2 must stay clear of the cut
    worst = min(
        p.alpha**2 - (p.beta + re_lo) ** 2, p.alpha**2 - (p.beta + re_hi) ** 2
    )
    if worst < 1e-8:
        raise ValueError(
            f"cumulant argument approaches the square-root branch cut (margin {worst:.3g})"
        )


def gmab_m(model: MarketModel, contract: ContractSpec, w: WConstants) -> FourierIntegrand:
    """Accumulation-benefit survival integrand; d = K - 1."""
    K = contract.n_surrender
    return _build(
        "gmab.M",
        model,
        contract,
        horizon=contract.maturity,
        n_ind_full=K - 1,
        w_ind_full=np.asarray(w.w[: K - 1]),
        mode="forward",
        last_kind=None,
    )


def gmab_n(model: MarketModel, contract: ContractSpec, w: WConstants) -> FourierIntegrand:
    """Accumulation-benefit call-transform integrand; d = K."""
    K = contract.n_surrender
    return _build(
        "gmab.N",
        model,
        contract,
        horizon=contract.maturity,
        n_ind_full=K - 1,
        w_ind_full=np.asarray(w.w[: K - 1]),
        mode="forward-damped",
        last_kind="damped",
        w_last=w.w[K - 1],
    )


def sb_m(
    model: MarketModel, contract: ContractSpec, w: WConstants, i: int
) -> FourierIntegrand:
    """Surrender-date-i survival integrand under the stock measure; d = i - 1."""
    if not 2 <= i <= contract.n_surrender - 1:
        raise ValueError(f"sb_m index must lie in 2..K-1, got {i}")
    ti = contract.surrender_grid[i]
    return _build(
        f"sb.M[{i}]",
        model,
        contract,
        horizon=ti,
        n_ind_full=i - 1,
        w_ind_full=np.asarray(w.w[: i - 1]),
        mode="spot",
        last_kind=None,
        log_const=-model.omega(ti),
    )


def sb_n(
    model: MarketModel, contract: ContractSpec, w: WConstants, i: int
) -> FourierIntegrand:
    """Surrender continuation integrand (one extra undamped exposure); d = i."""
    if not 1 <= i <= contract.n_surrender - 1:
        raise ValueError(f"sb_n index must lie in 1..K-1, got {i}")
    ti = contract.surrender_grid[i]
    return _build(
        f"sb.N[{i}]",
        model,
        contract,
        horizon=ti,
        n_ind_full=i - 1,
        w_ind_full=np.asarray(w.w[: i - 1]),
        mode="spot",
        last_kind="cauchy",
        w_last=w.w[i - 1],
        log_const=-model.omega(ti),
    )


def db_m(
    model: MarketModel, contract: ContractSpec, w: WConstants, j: int, i: int
) -> FourierIntegrand:
    """Death-benefit survival integrand for branch (j, i); d = j."""
    _check_db_indices(contract, j, i)
    ti = contract.death_grid[i]
    return _build(
        f"db.M[{j},{i}]",
        model,
        contract,
        horizon=ti,
        n_ind_full=j,
        w_ind_full=np.asarray(w.w[:j]),
        mode="forward",
        last_kind=None,
        kernel_horizon=ti,
    )


def db_n(
    model: MarketModel, contract: ContractSpec, w: WConstants, j: int, i: int
) -> FourierIntegrand:
    """Death-benefit call-transform integrand for branch (j, i); d = j + 1."""
    _check_db_indices(contract, j, i)
    ti = contract.death_grid[i]
    return _build(
        f"db.N[{j},{i}]",
        model,
        contract,
        horizon=ti,
        n_ind_full=j,
        w_ind_full=np.asarray(w.w[:j]),
        mode="forward-damped",
        last_kind="damped",
        w_last=w.w_tbar[i - 1] - contract.guarantee_rate * ti,
        kernel_horizon=ti,
    )


def db_n0(
    model: MarketModel, contract: ContractSpec, w: WConstants, i: int
) -> FourierIntegrand:
    """Call transform for death dates at or before the first surrender date; d = 1."""
    ti = contract.death_grid[i]
    if contract.n_surrender >= 2 and ti > contract.surrender_grid[1]:
        raise ValueError(
            f"db_n0 needs tbar_i <= t_1, got tbar_{i}={ti} > {contract.surrender_grid[1]}"
        )
    return _build(
        f"db.N0[{i}]",
        model,
        contract,
        horizon=ti,
        n_ind_full=0,
        w_ind_full=np.zeros(0),
        mode="single-damped",
        last_kind="damped",
        w_last=w.w_tbar[i - 1] - contract.guarantee_rate * ti,
        kernel_horizon=ti,
    )


def _check_db_indices(contract: ContractSpec, j: int, i: int) -> None:
    K = contract.n_surrender
    if not 1 <= j <= K - 1:
        raise ValueError(f"death-benefit branch j must lie in 1..K-1, got {j}")
    if not 1 <= i <= contract.n_death:
        raise ValueError(f"death date index {i} out of range")
    ti = contract.death_grid[i]
    t = contract.surrender_grid
    hi = contract.maturity if j == K - 1 else t[j + 1]
    if not (t[j] < ti <= hi):
        raise ValueError(
            f"death date tbar_{i}={ti} not admissible for branch j={j} "
            f"(needs ({t[j]}, {hi}])"
        )
