"""Full path simulation of the model: an independent pricing oracle.

Market paths draw exact NIG increments on a fine grid and accumulate them
against the deterministic volatility kernels (left-point sums); the
integrated short rate uses its bank-account representation, so discount
factors, the equity index and the surrender spread D(t) all come from the
same two increment streams.  Couple lifetimes are simulated from exact
Gaussian transitions of the two intensities with first-jump inversion of
the cumulative hazard, the bereavement jump applied to the survivor, and
a second inversion for the remaining lifetime.

Mortality and market consume disjoint random substreams, mirroring the
model's independence assumption structurally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .contract import ContractSpec, w_constants
from .levy import NigParams
from .mortality import CoupleMortality
from .term_structure import MarketModel

__all__ = [
    "simulate_nig_increments",
    "simulate_couples",
    "CoupleSample",
    "simulate_market",
    "MarketSample",
    "OracleEstimate",
    "OracleBreakdown",
    "oracle_price",
]

_BATCH = 25_000


def simulate_nig_increments(
    p: NigParams, dt: float, size, rng: np.random.Generator
) -> np.ndarray:
    """Exact NIG increments over a step dt (mixture construction).

    An inverse-Gaussian subordinator draw V with mean delta*dt/gamma and
    shape (delta*dt)^2, then beta*V + sqrt(V)*Z; the exponential moments
    match exp(dt * theta(z)) exactly.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    mean = p.delta * dt / p.gamma
    shape = (p.delta * dt) ** 2
    v = rng.wald(mean, shape, size=size)
    return p.beta * v + np.sqrt(v) * rng.standard_normal(size=size)


# -- couple lifetimes -------------------------------------------------------------


@dataclass
class CoupleSample:
    """Simulated death times (inf when beyond the horizon) and diagnostics."""

    tau1: np.ndarray
    tau2: np.ndarray
    first_is_spouse1: np.ndarray
    floored_fraction: float


def _ou_paths(lam0, mu, sigma, n, steps, h, rng):
    lam = np.empty((n, steps + 1))
    lam[:, 0] = lam0
    growth = math.exp(mu * h)
    sd = sigma * math.sqrt(math.expm1(2.0 * mu * h) / (2.0 * mu))
    z = rng.standard_normal((n, steps))
    for k in range(steps):
        lam[:, k + 1] = lam[:, k] * growth + sd * z[:, k]
    return lam


def _invert_hazard(cum, grid, draws):
    """First grid time where the cumulative hazard reaches the draw.

    Piecewise-linear inversion between nodes; +inf when never reached.
    """
    n = cum.shape[0]
    reached = cum >= draws[:, None]
    hit = reached.any(axis=1)
    idx = np.argmax(reached, axis=1)
    idx = np.clip(idx, 1, cum.shape[1] - 1)
    lo = np.take_along_axis(cum, (idx - 1)[:, None], axis=1)[:, 0]
    hi = np.take_along_axis(cum, idx[:, None], axis=1)[:, 0]
    t_lo = grid[idx - 1]
    dt = grid[idx] - grid[idx - 1]
    frac = np.where(hi > lo, (draws - lo) / np.maximum(hi - lo, 1e-300), 1.0)
    out = np.where(hit, t_lo + np.clip(frac, 0.0, 1.0) * dt, np.inf)
    return out


def simulate_couples(
    mortality: CoupleMortality,
    horizon: float,
    n: int,
    rng: np.random.Generator,
    grid_step: float = 1.0 / 64.0,
) -> CoupleSample:
    """Lifetimes of n couples up to the horizon.

    The joint first-death time inverts the summed hazard against a unit
    exponential; a uniform draw against the intensity ratio labels the
    deceased spouse; the survivor continues with its own intensity plus the
    decaying bereavement jump.  Negative hazard increments (the Gaussian
    intensities admit them transiently) are floored at zero and counted.
    """
    steps = int(round(horizon / grid_step))
    if abs(steps * grid_step - horizon) > 1e-9:
        steps = int(math.ceil(horizon / grid_step))
    grid = np.linspace(0.0, steps * grid_step, steps + 1)
    h = grid_step
    s1, s2 = mortality.spouse1, mortality.spouse2

    tau1 = np.full(n, np.inf)
    tau2 = np.full(n, np.inf)
    first1 = np.zeros(n, dtype=bool)
    floored = 0
    total_incr = 0

    for lo in range(0, n, _BATCH):
        nb = min(_BATCH, n - lo)
        lam1 = _ou_paths(s1.lam0, s1.mu, s1.sigma, nb, steps, h, rng)
        lam2 = _ou_paths(s2.lam0, s2.mu, s2.sigma, nb, steps, h, rng)

        def cumhaz(lam):
            incr = 0.5 * (lam[:, 1:] + lam[:, :-1]) * h
            neg = incr < 0.0
            out = np.concatenate(
                (np.zeros((lam.shape[0], 1)), np.cumsum(np.where(neg, 0.0, incr), axis=1)),
                axis=1,
            )
            return out, int(np.count_nonzero(neg)), neg.size

        cum1, f1, m1 = cumhaz(lam1)
        cum2, f2, m2 = cumhaz(lam2)
        floored += f1 + f2
        total_incr += m1 + m2

        e1 = rng.exponential(size=nb)
        tp = _invert_hazard(cum1 + cum2, grid, e1)
        died = np.isfinite(tp)

        # intensities at the first death time (linear interpolation)
        ki = np.clip(np.searchsorted(grid, np.where(died, tp, 0.0), side="right") - 1, 0, steps - 1)
        w = (np.where(died, tp, 0.0) - grid[ki]) / h
        l1_tp = (1 - w) * np.take_along_axis(lam1, ki[:, None], 1)[:, 0] + w * np.take_along_axis(lam1, (ki + 1)[:, None], 1)[:, 0]
        l2_tp = (1 - w) * np.take_along_axis(lam2, ki[:, None], 1)[:, 0] + w * np.take_along_axis(lam2, (ki + 1)[:, None], 1)[:, 0]
        denom = np.where(l1_tp + l2_tp > 0.0, l1_tp + l2_tp, 1.0)
        u = rng.uniform(size=nb)
        is1 = died & (u <= l1_tp / denom)

        # survivor hazard from tp: own cumulative hazard plus the decaying jump
        e2 = rng.exponential(size=nb)
        surv_cum = np.where(is1[:, None], cum2, cum1)
        surv_lam_tp = np.where(is1, l2_tp, l1_tp)
        eps = np.where(is1, s2.eps, s1.eps)
        kappa = np.where(is1, s2.kappa, s1.kappa)
        cum_at_tp = np.where(died, _interp_rows(surv_cum, grid, tp), 0.0)
        dtg = grid[None, :] - np.where(died, tp, 0.0)[:, None]
        jump = (
            eps[:, None]
            * np.maximum(surv_lam_tp, 0.0)[:, None]
            / kappa[:, None]
            * -np.expm1(-kappa[:, None] * np.maximum(dtg, 0.0))
        )
        # zero before the first death so the inversion cannot trigger early;
        # the straddling step interpolates from the preceding node (O(h) bias)
        tilde = np.where(dtg >= 0.0, surv_cum - cum_at_tp[:, None] + jump, 0.0)
        tq = np.where(died, _invert_hazard(tilde, grid, e2), np.inf)
        tq = np.maximum(tq, np.where(died, tp, np.inf))

        t1b = np.where(is1, tp, np.where(died, tq, np.inf))
        t2b = np.where(is1, np.where(died, tq, np.inf), tp)
        tau1[lo : lo + nb] = t1b
        tau2[lo : lo + nb] = t2b
        first1[lo : lo + nb] = is1

    return CoupleSample(tau1, tau2, first1, floored / max(total_incr, 1))


def _interp_rows(values, grid, t):
    """Per-row linear interpolation values(t) on a shared grid."""
    h = grid[1] - grid[0]
    ki = np.clip(((t / h).astype(int)), 0, len(grid) - 2)
    w = np.clip((t - grid[ki]) / h, 0.0, 1.0)
    lo = np.take_along_axis(values, ki[:, None], 1)[:, 0]
    hi = np.take_along_axis(values, (ki + 1)[:, None], 1)[:, 0]
    return (1 - w) * lo + w * hi


# -- market paths ----------------------------------------------------------------


@dataclass
class MarketSample:
    """Path functionals at the contract dates for one batch of paths."""

    dates: np.ndarray
    discount: np.ndarray  # exp(-int_0^t r), shape (n, len(dates))
    equity: np.ndarray  # S_t
    spread: np.ndarray  # D(t_l) at the surrender dates, shape (n, K-1)
    surrender_date_idx: np.ndarray  # index into the surrender grid, 0 = none


def simulate_market(
    model: MarketModel,
    contract: ContractSpec,
    n: int,
    rng: np.random.Generator,
    grid_step: float = 1.0 / 64.0,
) -> MarketSample:
    """Market paths evaluated at every death-grid date.

    The fine grid must refine all contract dates; increments are exact NIG
    draws, stochastic integrals use left-point sums of the smooth kernels.
    """
    T = contract.maturity
    steps = int(round(T / grid_step))
    if abs(steps * grid_step - T) > 1e-9:
        raise ValueError("grid step must divide the maturity")
    dates = np.asarray(contract.death_grid[1:])
    idx = np.round(dates / grid_step).astype(int)
    if np.max(np.abs(idx * grid_step - dates)) > 1e-9:
        raise ValueError("grid step must refine every contract date")
    s_left = np.arange(steps) * grid_step

    w = w_constants(model, contract)
    K = contract.n_surrender
    t_surr = np.asarray(contract.surrender_grid[1:K])
    f0 = np.array([model.forward_integral(0.0, t) for t in dates])
    int_a = np.asarray(w.int_a_tbar)
    omega = np.array([model.omega(t) for t in dates])

    dl1 = simulate_nig_increments(model.nig1, grid_step, (n, steps), rng)
    dl2 = simulate_nig_increments(model.nig2, grid_step, (n, steps), rng)

    def date_sums(dl, rate):
        cum = np.concatenate((np.zeros((n, 1)), np.cumsum(dl, axis=1)), axis=1)
        gcum = np.concatenate(
            (np.zeros((n, 1)), np.cumsum(np.exp(rate * s_left) * dl, axis=1)), axis=1
        )
        return cum[:, idx], gcum[:, idx]

    l1, g1 = date_sums(dl1, model.a)
    l2, g2 = date_sums(dl2, model.b)

    # int_0^t Sigma_k(s, H) dL_k = L(t) - exp(-rate*H) * G(t)
    x1_own = l1 - np.exp(-model.a * dates)[None, :] * g1
    x2_own = l2 - np.exp(-model.b * dates)[None, :] * g2
    r_int = f0[None, :] + int_a[None, :] - x1_own + x2_own
    equity = np.exp(r_int + model.sigma2 * l2 - omega[None, :])
    discount = np.exp(-r_int)

    # spread at the surrender dates (kernels with maturity horizon)
    spread = np.zeros((n, K - 1))
    if K >= 2:
        sidx = np.searchsorted(dates, t_surr)
        x1_T = l1[:, sidx] - math.exp(-model.a * T) * g1[:, sidx]
        x2_T = l2[:, sidx] - math.exp(-model.b * T) * g2[:, sidx]
        spread = np.asarray(w.w[: K - 1])[None, :] - x1_T + (
            model.sigma2 * l2[:, sidx] + x2_T
        )

    surr_idx = _draw_surrender(contract, spread, rng)
    return MarketSample(dates, discount, equity, spread, surr_idx)


def _draw_surrender(
    contract: ContractSpec, spread: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Surrender date index per path (0 = never) from the survival products."""
    n = spread.shape[0]
    K = contract.n_surrender
    if K < 2:
        return np.zeros(n, dtype=int)
    lam = contract.surrender_beta * np.abs(spread) + contract.surrender_base
    dt = np.diff(np.asarray(contract.surrender_grid))[1:]  # dt_2..dt_K
    surv = np.concatenate(
        (np.ones((n, 1)), np.exp(-np.cumsum(lam * dt[None, :], axis=1))), axis=1
    )  # surv[:, i-1] = P(tau_s >= t_i), i = 1..K
    u = rng.uniform(size=n)
    out = np.zeros(n, dtype=int)
    for i in range(1, K):
        hit = (u < surv[:, i - 1]) & (u >= surv[:, i]) & (out == 0)
        out[hit] = i
    return out


# -- oracle pricing ----------------------------------------------------------------


@dataclass
class OracleEstimate:
    value: float
    std_error: float


@dataclass
class OracleBreakdown:
    gmab: OracleEstimate
    sb: OracleEstimate
    db: OracleEstimate
    total: OracleEstimate
    n_paths: int
    seed: int
    grid_step: float
    floored_fraction: float = 0.0


def oracle_price(
    model: MarketModel,
    contract: ContractSpec,
    mortality: CoupleMortality,
    n: int,
    seed: int,
    grid_step: float = 1.0 / 64.0,
) -> OracleBreakdown:
    """Monte Carlo price of every benefit from paired (market, couple) draws.

    Market and mortality generators are spawned from disjoint substreams of
    the seed.  Returns per-benefit means and standard errors over n paths.
    """
    if n < 10_000:
        raise ValueError("oracle needs at least 1e4 paths")
    root = np.random.SeedSequence(seed)
    market_ss, couple_ss = root.spawn(2)
    n_batches = (n + _BATCH - 1) // _BATCH
    market_children = market_ss.spawn(n_batches)
    couple_children = couple_ss.spawn(n_batches)

    c = contract
    T = c.maturity
    tbar = np.asarray(c.death_grid)
    dates = tbar[1:]
    K = c.n_surrender
    t_surr = np.asarray(c.surrender_grid[1:K])
    date_of_surr = np.searchsorted(dates, t_surr)  # death-grid column of each t_i
    alpha = c.death_multiplier
    guar = np.exp(c.guarantee_rate * dates)
    ptilde = np.array([c.penalty_ptilde(t) for t in t_surr]) if K >= 2 else np.zeros(0)

    sums = np.zeros(4)
    sums2 = np.zeros(4)
    floored = 0.0
    for b in range(n_batches):
        nb = min(_BATCH, n - b * _BATCH)
        mrng = np.random.Generator(np.random.Philox(market_children[b]))
        crng = np.random.Generator(np.random.Philox(couple_children[b]))
        mk = simulate_market(model, c, nb, mrng, grid_step)
        cp = simulate_couples(mortality, T, nb, crng, grid_step)
        floored += cp.floored_fraction * nb

        union_alive = (cp.tau1[:, None] > dates[None, :]) | (
            cp.tau2[:, None] > dates[None, :]
        )
        no_surrender = mk.surrender_date_idx == 0

        # accumulation benefit at maturity
        gmab = (
            np.maximum(c.notional * mk.equity[:, -1], c.notional * guar[-1])
            * mk.discount[:, -1]
            * no_surrender
            * union_alive[:, -1]
        )

        # surrender benefit at the chosen date
        sb = np.zeros(nb)
        for i in range(1, K):
            col = date_of_surr[i - 1]
            pay = (
                c.notional
                * mk.equity[:, col]
                * ptilde[i - 1]
                * mk.discount[:, col]
                * (mk.surrender_date_idx == i)
                * union_alive[:, col]
            )
            sb += pay

        # death benefit at the monitoring date after each death
        in1 = (cp.tau1[:, None] >= tbar[None, :-1]) & (cp.tau1[:, None] < tbar[None, 1:])
        in2 = (cp.tau2[:, None] >= tbar[None, :-1]) & (cp.tau2[:, None] < tbar[None, 1:])
        x_alpha = in1 * 1.0 + in2 * 1.0 + (alpha - 2.0) * (in1 & in2)
        surr_time = np.where(
            mk.surrender_date_idx > 0,
            np.asarray(c.surrender_grid)[mk.surrender_date_idx],
            np.inf,
        )
        active = surr_time[:, None] >= dates[None, :]
        payoff = np.maximum(c.notional * mk.equity, c.notional * guar[None, :])
        db = np.sum(payoff * mk.discount * active * x_alpha, axis=1)

        total = gmab + sb + db
        for k, arr in enumerate((gmab, sb, db, total)):
            sums[k] += float(arr.sum())
            sums2[k] += float((arr * arr).sum())

    def est(k):
        mean = sums[k] / n
        var = max(sums2[k] - n * mean * mean, 0.0) / (n - 1)
        return OracleEstimate(mean, math.sqrt(var / n))

    return OracleBreakdown(
        est(0), est(1), est(2), est(3), n, seed, grid_step, floored / n
    )
