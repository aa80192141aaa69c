"""Monthly maximal-mispricing portfolios: LP solve, the three-sub-portfolio
ring, return accounting, Sharpe ratios, and event studies.

Each month the LP maximizes the weighted credit score subject to zero total
PVLGD, per-name bounds l <= w_i <= u, and leverage limits on the long and
short sides. The live position averages the three most recent monthly
sub-portfolios; the monthly excess return is minus the average PVLGD change
per $100 of capital.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .exceptions import InfeasibleProblem, ValidationError
from .simplex import solve_lp

__all__ = [
    "PortfolioProblem",
    "PortfolioState",
    "solve_monthly_lp",
    "classify_weight_structure",
    "sub_portfolio_change",
    "portfolio_return_series",
    "annualized_return",
    "sharpe_ratio",
    "run_backtest",
    "event_study",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PortfolioProblem:
    """One month's inputs: scores, PVLGDs, and the bound set."""

    credit_scores: np.ndarray
    pvlgds: np.ndarray
    lower: float
    upper: float
    short_limit: float
    long_limit: float

    def __post_init__(self):
        cs = np.asarray(self.credit_scores, dtype=float)
        pv = np.asarray(self.pvlgds, dtype=float)
        object.__setattr__(self, "credit_scores", cs)
        object.__setattr__(self, "pvlgds", pv)
        if cs.shape != pv.shape or cs.ndim != 1:
            raise ValidationError("credit_scores and pvlgds must be equal-length vectors")
        if cs.size < 2:
            raise ValidationError("need at least two names")
        if not (self.lower < 0 < self.upper):
            raise ValidationError("need lower < 0 < upper")
        if not (self.short_limit < 0 < self.long_limit):
            raise ValidationError("need short_limit < 0 < long_limit")
        if np.any(pv <= 0):
            raise ValidationError("PVLGDs must be positive")


def solve_monthly_lp(problem: PortfolioProblem) -> np.ndarray:
    """Optimal vertex weights via the positive/negative-part LP split.

    Weights are w = p - q with p in [0, u], q in [0, -l]; the leverage
    constraints become sum(p) <= U and sum(q) <= -L.
    """
    cs, pv = problem.credit_scores, problem.pvlgds
    n = cs.size
    u, l = problem.upper, problem.lower
    U, L = problem.long_limit, problem.short_limit

    c = np.concatenate([cs, -cs])
    A_eq = np.concatenate([pv, -pv])[None, :]
    b_eq = np.zeros(1)
    eye = np.eye(n)
    zero = np.zeros((n, n))
    A_ub = np.vstack(
        [
            np.concatenate([np.ones(n), np.zeros(n)])[None, :],   # sum p <= U
            np.concatenate([np.zeros(n), np.ones(n)])[None, :],   # sum q <= -L
            np.hstack([eye, zero]),                                # p_i <= u
            np.hstack([zero, eye]),                                # q_i <= -l
        ]
    )
    b_ub = np.concatenate([[U, -L], np.full(n, u), np.full(n, -l)])

    x = solve_lp(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq)
    w = x[:n] - x[n:]

    scale = max(np.abs(w) @ pv, 1.0)
    if abs(w @ pv) > 1e-8 * scale:
        raise InfeasibleProblem("solver returned a portfolio violating zero PVLGD")
    if w.max() > u + 1e-8 or w.min() < l - 1e-8:
        raise InfeasibleProblem("solver returned weights outside the name bounds")
    return w


def classify_weight_structure(weights, lower: float, upper: float,
                              tol: float = 1e-9) -> tuple[int, int, int]:
    """(n_u, n_l, n_o): counts at the upper bound, at the lower bound, and
    strictly interior nonzero. Zeros are excluded."""
    w = np.asarray(weights, dtype=float)
    at_u = np.abs(w - upper) <= tol
    at_l = np.abs(w - lower) <= tol
    interior = (~at_u) & (~at_l) & (np.abs(w) > tol)
    return int(at_u.sum()), int(at_l.sum()), int(interior.sum())


def sub_portfolio_change(weights: dict[str, float], pv_now: dict[str, float],
                         pv_prev: dict[str, float]) -> float:
    """Sum of w_i * (PV_i,t - PV_i,t-1) over the sub-portfolio's names."""
    total = 0.0
    for name, w in weights.items():
        if w == 0.0:
            continue
        if name not in pv_now or name not in pv_prev:
            raise ValidationError(f"missing PVLGD for held name {name!r}")
        total += w * (pv_now[name] - pv_prev[name])
    return total


@dataclass
class PortfolioState:
    """Ring of the three live sub-portfolios plus the accumulated series."""

    ring: list[tuple[str, dict[str, float]]] = field(default_factory=list)
    returns: dict[str, float] = field(default_factory=dict)
    structures: dict[str, tuple[int, int, int]] = field(default_factory=dict)
    skipped_months: list[str] = field(default_factory=list)

    def push(self, month: str, weights: dict[str, float]) -> None:
        if not self.ring:
            self.ring = [(month, weights)] * 3
        else:
            self.ring = [(month, weights)] + self.ring[:2]

    @property
    def live_subs(self) -> list[dict[str, float]]:
        return [w for _, w in self.ring]


def portfolio_return_series(state: PortfolioState, pv_now: dict[str, float],
                            pv_prev: dict[str, float]) -> float:
    """Month-t excess return: minus the mean sub-portfolio change over 100."""
    changes = [sub_portfolio_change(w, pv_now, pv_prev) for w in state.live_subs]
    return -float(np.mean(changes)) / 100.0


def annualized_return(returns) -> float:
    """Geometric annualization: prod(1+R)^(12/T) - 1."""
    r = np.asarray(returns, dtype=float)
    if r.size < 1:
        raise ValidationError("need at least one return")
    if np.any(r <= -1):
        raise ValidationError("returns must exceed -100%")
    return float(np.prod(1.0 + r) ** (12.0 / r.size) - 1.0)


def sharpe_ratio(returns) -> float:
    """Annualized mean-over-stdev: mean(R)/std(R) * sqrt(12)."""
    r = np.asarray(returns, dtype=float)
    if r.size < 2 or np.ptp(r) == 0:
        raise ValidationError("zero return variance")
    return float(r.mean() / r.std(ddof=1) * np.sqrt(12.0))


def run_backtest(
    scores: pd.DataFrame,
    pvlgd: pd.DataFrame,
    lower: float,
    upper: float,
    short_limit: float,
    long_limit: float,
    score_staleness_months: int = 2,
    forward_coverage_months: int = 3,
) -> PortfolioState:
    """Monthly loop: eligibility filter, LP solve, ring update, returns.

    scores: columns entity_id, month, credit_score (one row per call month).
    pvlgd:  columns entity_id, month, pvlgd (end of month).

    A name is eligible at formation month t if it has a call score within the
    last `score_staleness_months` months and PVLGD data in every month t
    through t+`forward_coverage_months`. Months where sampling or solving
    fails keep the previous sub-portfolio (logged, recorded in the state).
    """
    pv_wide = pvlgd.pivot(index="month", columns="entity_id", values="pvlgd").sort_index()
    months = list(pv_wide.index)
    month_pos = {m: i for i, m in enumerate(months)}
    score_sorted = scores.sort_values("month")

    state = PortfolioState()
    for t, month in enumerate(months):
        if t + forward_coverage_months >= len(months):
            break
        lo_month = months[max(0, t - score_staleness_months)]
        recent = score_sorted[
            (score_sorted["month"] >= lo_month) & (score_sorted["month"] <= month)
        ]
        latest = recent.groupby("entity_id").tail(1)
        window = pv_wide.iloc[t : t + forward_coverage_months + 1]
        covered = window.columns[window.notna().all(axis=0)]
        latest = latest[latest["entity_id"].isin(covered)]
        names = list(latest["entity_id"])

        if t > 0 and state.ring:
            pv_now = pv_wide.iloc[t].dropna().to_dict()
            pv_prev = pv_wide.iloc[t - 1].dropna().to_dict()
            state.returns[month] = portfolio_return_series(state, pv_now, pv_prev)

        if len(names) < 2:
            if state.ring:
                log.info("month %s: %d eligible names; rolling prior sub forward",
                         month, len(names))
                state.skipped_months.append(month)
                state.push(month, state.ring[0][1])
            continue
        problem = PortfolioProblem(
            credit_scores=latest["credit_score"].to_numpy(),
            pvlgds=pv_wide.loc[month, names].to_numpy(),
            lower=lower,
            upper=upper,
            short_limit=short_limit,
            long_limit=long_limit,
        )
        try:
            w = solve_monthly_lp(problem)
        except InfeasibleProblem:
            if state.ring:
                log.info("month %s: infeasible LP; rolling prior sub forward", month)
                state.skipped_months.append(month)
                state.push(month, state.ring[0][1])
            continue
        state.structures[month] = classify_weight_structure(w, lower, upper)
        state.push(month, {n: float(x) for n, x in zip(names, w) if x != 0.0})
    return state


def event_study(panel: pd.DataFrame, events: list[tuple[str, str]],
                window: int = 8, freq: str = "Q") -> pd.DataFrame:
    """Average normalized PVLGD path around events.

    panel: columns entity_id, period, pvlgd. Only events with the full
    2*window+1 periods of data qualify; each path is divided by its value at
    the event period, so the time-zero level is one by construction. The band
    is the independence-based 95% interval of the cross-event mean.
    """
    if window < 1:
        raise ValidationError("window must be >= 1")
    wide = panel.pivot(index="period", columns="entity_id", values="pvlgd")
    wide.index = pd.PeriodIndex(wide.index, freq=freq)
    offsets = np.arange(-window, window + 1)
    paths = []
    for entity, period in events:
        if entity not in wide.columns:
            continue
        p0 = pd.Period(period, freq=freq)
        idx = pd.PeriodIndex([p0 + int(k) for k in offsets], freq=freq)
        series = wide[entity].reindex(idx).to_numpy(dtype=float)
        if np.isnan(series).any() or series[window] == 0:
            continue
        paths.append(series / series[window])
    if not paths:
        return pd.DataFrame(columns=["offset", "mean", "lo", "hi", "n_events"])
    arr = np.vstack(paths)
    mean = arr.mean(axis=0)
    n = arr.shape[0]
    half = 1.96 * arr.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros_like(mean)
    return pd.DataFrame(
        {"offset": offsets, "mean": mean, "lo": mean - half, "hi": mean + half,
         "n_events": n}
    )
