"""Structure-matched random portfolios under the no-predictability null.

Each month's random portfolio replicates the optimal portfolio's bound-count
structure (n_u names at the upper limit, n_l at the lower limit) with names
drawn uniformly, plus one balancing name restoring zero total PVLGD. When no
balancing name exists, extreme names are exchanged between the long and short
sets; when switching loops, extreme names are dropped. Trial return and
Sharpe distributions give empirical p-values, and a correlated-Bernoulli
simulation provides the joint significance test across specifications.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .exceptions import InfeasibleProblem, ValidationError
from .portfolio import PortfolioState, annualized_return, portfolio_return_series, sharpe_ratio

__all__ = [
    "NullTrial",
    "JointTestConfig",
    "sample_null_portfolio",
    "simulate_null",
    "empirical_p_value",
    "significance_stars",
    "correlated_bernoulli_pmax",
]

log = logging.getLogger(__name__)

_MAX_DRAW_ATTEMPTS = 100


@dataclass
class NullTrial:
    trial: int
    seed: int
    weights_by_month: dict[str, dict[str, float]] = field(default_factory=dict)
    returns: dict[str, float] = field(default_factory=dict)
    annualized: float = np.nan
    sharpe: float = np.nan


@dataclass(frozen=True)
class JointTestConfig:
    """Correlated-Bernoulli joint test: 15 indicators firing 5% of the time."""

    n_variables: int = 15
    threshold: float = 1.645
    draws_per_c: int = 50_000
    c_step: float = 0.05


def _leverage_ok(weights: np.ndarray, short_limit: float, long_limit: float) -> bool:
    pos = weights[weights > 0].sum()
    neg = weights[weights < 0].sum()
    return pos <= long_limit + 1e-12 and neg >= short_limit - 1e-12


def _admissible(pv: np.ndarray, taken: np.ndarray, target: float,
                lower: float, upper: float) -> np.ndarray:
    """Names that can absorb `target` dollars of PVLGD within [l, u]."""
    free = ~taken
    ok = (lower * pv <= target) & (target <= upper * pv)
    return np.flatnonzero(free & ok)


def _assemble(n: int, s_u, s_l, balancer: int, balance_w: float,
              upper: float, lower: float) -> np.ndarray:
    w = np.zeros(n)
    w[list(s_u)] = upper
    w[list(s_l)] = lower
    w[balancer] = balance_w
    return w


def sample_null_portfolio(
    pvlgds,
    structure: tuple[int, int],
    lower: float,
    upper: float,
    short_limit: float,
    long_limit: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """One random portfolio matching the (n_u, n_l) bound counts.

    Uniform draws are retried up to 100 times; then the extreme-PVLGD members
    of the long and short sets are swapped until a balancing name exists, and
    if switching revisits a configuration, extreme names are dropped.
    """
    pv = np.asarray(pvlgds, dtype=float)
    n = pv.size
    n_u, n_l = structure
    if np.any(pv <= 0):
        raise ValidationError("PVLGDs must be positive")
    if n_u + n_l + 1 > n:
        raise ValidationError(
            f"universe of {n} names cannot host structure ({n_u}, {n_l}) plus a balancer"
        )

    def try_sets(s_u: np.ndarray, s_l: np.ndarray) -> np.ndarray | None:
        target = -(upper * pv[s_u].sum() + lower * pv[s_l].sum())
        taken = np.zeros(n, dtype=bool)
        taken[s_u] = taken[s_l] = True
        s_o = _admissible(pv, taken, target, lower, upper)
        if s_o.size == 0:
            return None
        balancer = int(rng.choice(s_o))
        w = _assemble(n, s_u, s_l, balancer, target / pv[balancer], upper, lower)
        return w if _leverage_ok(w, short_limit, long_limit) else None

    s_u = s_l = None
    for _ in range(_MAX_DRAW_ATTEMPTS):
        picks = rng.choice(n, size=n_u + n_l, replace=False)
        s_u, s_l = picks[:n_u], picks[n_u:]
        w = try_sets(s_u, s_l)
        if w is not None:
            return w

    # switching: exchange extreme-PVLGD names between the sets
    su, sl = list(s_u), list(s_l)
    seen = {(frozenset(su), frozenset(sl))}
    while True:
        total = upper * pv[su].sum() + lower * pv[sl].sum()
        if su and sl:
            if total > 0:
                move_u = max(su, key=lambda i: pv[i])   # largest PVLGD long -> short
                move_l = min(sl, key=lambda i: pv[i])   # smallest PVLGD short -> long
            else:
                move_u = min(su, key=lambda i: pv[i])
                move_l = max(sl, key=lambda i: pv[i])
            su = [i for i in su if i != move_u] + [move_l]
            sl = [i for i in sl if i != move_l] + [move_u]
            key = (frozenset(su), frozenset(sl))
            looped = key in seen
            seen.add(key)
        else:
            looped = True
        if not looped:
            w = try_sets(np.array(su, dtype=int), np.array(sl, dtype=int))
            if w is not None:
                log.info("null sampler used switching fallback")
                return w
            continue
        # drop procedure: remove the most extreme name on the heavy side
        if total > 0 and su:
            su.remove(max(su, key=lambda i: pv[i]))
        elif sl:
            sl.remove(max(sl, key=lambda i: pv[i]))
        elif su:
            su.remove(max(su, key=lambda i: pv[i]))
        else:
            raise InfeasibleProblem("null sampler exhausted the universe")
        seen = {(frozenset(su), frozenset(sl))}
        w = try_sets(np.array(su, dtype=int), np.array(sl, dtype=int))
        if w is not None:
            log.info("null sampler used the drop fallback (structure not matched)")
            return w


def _trial_rng(seed: int, trial: int, month_pos: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, trial, month_pos]))


def simulate_null(
    pvlgd: pd.DataFrame,
    structures: dict[str, tuple[int, int]],
    lower: float,
    upper: float,
    short_limit: float,
    long_limit: float,
    trials: int = 100,
    seed: int = 0,
    forward_coverage_months: int = 3,
) -> list[NullTrial]:
    """Per trial: one structure-matched random portfolio per month, pushed
    through the sub-portfolio ring return pipeline.

    pvlgd: columns entity_id, month, pvlgd. structures: month -> (n_u, n_l)
    from the actual strategy. Trials are independent and reproducible from
    (seed, trial, month) substreams regardless of execution order.
    """
    pv_wide = pvlgd.pivot(index="month", columns="entity_id", values="pvlgd").sort_index()
    months = list(pv_wide.index)
    out = []
    for trial in range(trials):
        state = PortfolioState()
        record = NullTrial(trial=trial, seed=seed)
        for t, month in enumerate(months):
            if t + forward_coverage_months >= len(months):
                break
            if t > 0 and state.ring:
                pv_now = pv_wide.iloc[t].dropna().to_dict()
                pv_prev = pv_wide.iloc[t - 1].dropna().to_dict()
                record.returns[month] = portfolio_return_series(state, pv_now, pv_prev)
            if month not in structures:
                continue
            window = pv_wide.iloc[t : t + forward_coverage_months + 1]
            names = list(window.columns[window.notna().all(axis=0)])
            rng = _trial_rng(seed, trial, t)
            try:
                w = sample_null_portfolio(
                    pv_wide.loc[month, names].to_numpy(),
                    structures[month][:2],
                    lower, upper, short_limit, long_limit, rng,
                )
            except (InfeasibleProblem, ValidationError) as exc:
                raise type(exc)(f"trial {trial}, month {month}: {exc}") from exc
            state.push(month, {nm: float(x) for nm, x in zip(names, w) if x != 0.0})
            record.weights_by_month[month] = {
                nm: float(x) for nm, x in zip(names, w) if x != 0.0
            }
        r = np.array(list(record.returns.values()))
        if r.size:
            record.annualized = annualized_return(r)
            record.sharpe = sharpe_ratio(r) if r.size > 1 and np.ptp(r) > 0 else np.nan
        out.append(record)
    return out


def empirical_p_value(actual: float, null_values) -> float:
    """Fraction of null outcomes at or above the actual value."""
    null_values = np.asarray(null_values, dtype=float)
    if null_values.size == 0:
        raise ValidationError("empty null distribution")
    return float((null_values >= actual).sum() / null_values.size)


def significance_stars(p: float) -> str:
    if p <= 0.01:
        return "***"
    if p <= 0.05:
        return "**"
    if p <= 0.10:
        return "*"
    return ""


def correlated_bernoulli_pmax(
    k_successes: int,
    config: JointTestConfig = JointTestConfig(),
    seed: int = 0,
) -> tuple[float, float]:
    """Max over the correlation grid of P(exactly k of the indicators fire).

    Indicators are 1{sqrt(c) F + sqrt(1-c) S_i >= threshold} with a common
    factor F; each grid point is estimated from fresh Monte Carlo draws.
    Returns (max probability, argmax c).
    """
    if not 0 <= k_successes <= config.n_variables:
        raise ValidationError("k out of range")
    rng = np.random.default_rng(seed)
    cs = np.round(np.arange(0.0, 1.0 + config.c_step / 2, config.c_step), 10)
    cs = cs[cs <= 1.0]
    best_p, best_c = -1.0, 0.0
    for c in cs:
        f = rng.standard_normal((config.draws_per_c, 1))
        s = rng.standard_normal((config.draws_per_c, config.n_variables))
        x = np.sqrt(c) * f + np.sqrt(1.0 - c) * s
        fired = (x >= config.threshold).sum(axis=1)
        p = float((fired == k_successes).mean())
        if p > best_p:
            best_p, best_c = p, float(c)
    return best_p, best_c
