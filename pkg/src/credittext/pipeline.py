"""End-to-end assembly: spreads -> PVLGDs -> call alignment -> scores ->
factor panel -> regressions -> backtest -> null significance."""

from __future__ import annotations

import logging

import numpy as np
import pandas as pd

from .exceptions import ValidationError
from .factors import (
    analyst_dispersion,
    demean_deciles,
    dist_default,
    equity_factors,
    equity_risk_inputs,
    fundamental_factors,
    monthly_cds_factors,
    to_decile,
    transcript_stats,
)
from .model import RollingConfig, aggregate_scores, credit_score, fit_full_sample, fit_rolling
from .nullsim import empirical_p_value, significance_stars, simulate_null
from .portfolio import annualized_return, run_backtest, sharpe_ratio
from .pricing import ContractSpec, SpreadConverter
from .regression import RegressionSpec, add_lead_change, run_spec
from .text import Transcript, WordLists
from .workbench import align_call_to_cds, fundamentals_availability_month

__all__ = [
    "price_spreads",
    "month_end_panel",
    "transcripts_from_frame",
    "align_actual_pvlgd",
    "full_sample_scores",
    "rolling_sample_scores",
    "build_factor_panel",
    "forecast_regression",
    "backtest_with_null",
]

log = logging.getLogger(__name__)


def price_spreads(cds_daily: pd.DataFrame, spec: ContractSpec) -> pd.DataFrame:
    """Add intensity and pvlgd columns to a daily spread table."""
    conv = SpreadConverter(spec)
    out = cds_daily.copy()
    h = conv.intensity_from_spread(out["spread_bp"].to_numpy(dtype=float))
    out["intensity"] = h
    out["pvlgd"] = conv.pvlgd_from_spread(out["spread_bp"].to_numpy(dtype=float))
    return out


def month_end_panel(daily_pvlgd: pd.DataFrame) -> pd.DataFrame:
    """Last available daily PVLGD per entity-month."""
    df = daily_pvlgd.sort_values("date")
    df = df.assign(month=df["date"].astype(str).str[:7])
    out = df.groupby(["entity_id", "month"], as_index=False).tail(1)
    return out[["entity_id", "month", "pvlgd"]].reset_index(drop=True)


def transcripts_from_frame(frame: pd.DataFrame) -> list[Transcript]:
    required = {"call_id", "entity_id", "timestamp", "text"}
    missing = required - set(frame.columns)
    if missing:
        raise ValidationError(f"transcript table missing columns {sorted(missing)}")
    return [
        Transcript(
            call_id=str(r.call_id),
            entity_id=str(r.entity_id),
            timestamp=str(r.timestamp),
            text=str(r.text),
            sector=str(getattr(r, "sector", "")),
        )
        for r in frame.itertuples(index=False)
    ]


def align_actual_pvlgd(transcripts: pd.DataFrame, daily_pvlgd: pd.DataFrame) -> pd.DataFrame:
    """Per call: the matched quote date and PVLGD under the 4 PM rule."""
    rows = []
    by_entity = {e: g.set_index("date")["pvlgd"] for e, g in daily_pvlgd.groupby("entity_id")}
    for r in transcripts.itertuples(index=False):
        series = by_entity.get(str(r.entity_id))
        if series is None:
            log.info("call %s: no CDS data for entity", r.call_id)
            continue
        quote_date = align_call_to_cds(str(r.timestamp), series.index)
        if quote_date is None:
            log.info("call %s: no quote within 5 business days", r.call_id)
            continue
        rows.append(
            {
                "call_id": str(r.call_id),
                "entity_id": str(r.entity_id),
                "quote_date": quote_date,
                "month": quote_date[:7],
                "actual_pvlgd": float(series.loc[quote_date]),
            }
        )
    return pd.DataFrame(rows)


def full_sample_scores(
    transcripts: pd.DataFrame,
    daily_pvlgd: pd.DataFrame,
    top_n: int = 2000,
    t_c: float = 1.0,
    n_fs: int = 250,
    word_lists: WordLists | None = None,
    folds: int = 10,
    seed: int = 0,
):
    """Full-sample text model: returns (fit, scores with months attached)."""
    aligned = align_actual_pvlgd(transcripts, daily_pvlgd)
    keep = transcripts[transcripts["call_id"].isin(aligned["call_id"])]
    keep = keep.set_index("call_id").loc[aligned["call_id"]].reset_index()
    calls = transcripts_from_frame(keep)
    fit, scores = fit_full_sample(
        calls, aligned["actual_pvlgd"].to_numpy(), top_n=top_n, t_c=t_c,
        n_fs=n_fs, word_lists=word_lists, folds=folds, seed=seed,
    )
    scores = scores.merge(aligned[["call_id", "quote_date", "month"]], on="call_id")
    return fit, scores


def rolling_sample_scores(
    transcripts: pd.DataFrame,
    daily_pvlgd: pd.DataFrame,
    configs: list[RollingConfig],
    first_training_month: str,
    word_lists: WordLists | None = None,
    folds: int = 10,
    seed: int = 0,
):
    """Rolling out-of-sample scores aggregated across candidate configs."""
    aligned = align_actual_pvlgd(transcripts, daily_pvlgd)
    keep = transcripts[transcripts["call_id"].isin(aligned["call_id"])]
    keep = keep.set_index("call_id").loc[aligned["call_id"]].reset_index()
    calls = transcripts_from_frame(keep)
    origin = aligned["month"].min()
    fits = fit_rolling(
        calls,
        aligned["actual_pvlgd"].to_numpy(),
        list(aligned["month"]),
        configs,
        first_training_month=first_training_month,
        origin=origin,
        word_lists=word_lists,
        folds=folds,
        seed=seed,
    )
    return fits, aggregate_scores(fits, origin)


def _info_deciles(calls_info: pd.DataFrame, col: str) -> np.ndarray:
    """Decile of each call's value against calls in the prior 12 months."""
    months = pd.PeriodIndex(calls_info["month"], freq="M")
    values = calls_info[col].to_numpy(dtype=float)
    out = np.full(len(calls_info), np.nan)
    for m in months.unique():
        mask = months == m
        window = (months >= m - 12) & (months <= m - 1)
        if window.any():
            out[mask] = to_decile(values[mask], values[window])
    return out


def build_factor_panel(
    monthly_pvlgd: pd.DataFrame,
    daily_pvlgd: pd.DataFrame | None = None,
    equity: pd.DataFrame | None = None,
    fundamentals: pd.DataFrame | None = None,
    analyst: pd.DataFrame | None = None,
    transcripts: pd.DataFrame | None = None,
) -> pd.DataFrame:
    """One row per entity-month with every available control factor."""
    panel = monthly_cds_factors(monthly_pvlgd, daily_pvlgd)

    if equity is not None:
        panel = panel.merge(equity_factors(equity), on=["entity_id", "month"], how="left")

    if fundamentals is not None and equity is not None:
        fund = fundamentals.copy()
        fund["month"] = fund["data_date"].astype(str).str[:7]
        fund = fund.merge(
            equity[["entity_id", "month", "price", "shares"]],
            on=["entity_id", "month"], how="left",
        )
        base = fundamental_factors(fund)
        risk = equity_risk_inputs(equity)
        dd_in = fund.merge(risk, on=["entity_id", "month"], how="left")
        with np.errstate(invalid="ignore"):
            E = dd_in["shares"].to_numpy(float) * dd_in["price"].to_numpy(float)
            D = dd_in["debt_current"].to_numpy(float) + 0.5 * dd_in["debt_long_term"].to_numpy(float)
            ok = (E > 0) & (dd_in["equity_vol"].to_numpy(float) > 0)
            dd = np.full(len(dd_in), np.nan)
            if ok.any():
                dd[ok] = dist_default(
                    E[ok], D[ok],
                    dd_in["trailing_return"].to_numpy(float)[ok],
                    dd_in["equity_vol"].to_numpy(float)[ok],
                )
        base["DistDefault"] = dd
        # a statement dated month m is joined to panel months m+3
        base["month"] = [fundamentals_availability_month(m) for m in base["month"]]
        panel = panel.merge(base, on=["entity_id", "month"], how="left")

    if analyst is not None:
        rows = []
        a = analyst.copy()
        a["_p"] = pd.PeriodIndex(a["month"], freq="M")
        for entity, grp in a.groupby("entity_id"):
            grp = grp.sort_values("_p")
            for m in grp["_p"].unique():
                window = grp[(grp["_p"] >= m - 12) & (grp["_p"] <= m - 1)]
                num, disp = analyst_dispersion(
                    window["mean"], window["std"], window["count"]
                )
                rows.append(
                    {"entity_id": entity, "month": str(m), "NumAnlst": num,
                     "DispAnlst": disp}
                )
        panel = panel.merge(pd.DataFrame(rows), on=["entity_id", "month"], how="left")

    if transcripts is not None:
        stats = []
        for r in transcripts.itertuples(index=False):
            s = transcript_stats(str(r.text))
            stats.append(
                {"entity_id": str(r.entity_id), "month": str(r.timestamp)[:7],
                 "TransLen": s["TransLen"], "FKGrade": s["FKGrade"]}
            )
        info = pd.DataFrame(stats)
        for col in ("TransLen", "FKGrade"):
            info[f"{col}_decile"] = _info_deciles(info, col)
        panel = panel.merge(
            info.groupby(["entity_id", "month"], as_index=False).tail(1),
            on=["entity_id", "month"], how="left",
        )
        for col in ("TransLen", "FKGrade"):
            panel[f"MD_{col}"] = demean_deciles(panel[f"{col}_decile"])

    if analyst is not None:
        # comparison set: the month-t cross-section of firms with a call in
        # the trailing year (all firms with data when calls are unknown)
        if transcripts is not None:
            call_months = pd.PeriodIndex(
                transcripts["timestamp"].astype(str).str[:7], freq="M"
            )
            call_entities = transcripts["entity_id"].astype(str).to_numpy()
        months = pd.PeriodIndex(panel["month"], freq="M")
        for col in ("NumAnlst", "DispAnlst"):
            values = panel[col].to_numpy(dtype=float)
            d = np.full(len(panel), np.nan)
            for m in months.unique():
                mask = np.asarray(months == m)
                if transcripts is not None:
                    recent = (call_months >= m - 12) & (call_months <= m - 1)
                    firms = set(call_entities[recent])
                    eligible = mask & panel["entity_id"].isin(firms).to_numpy()
                else:
                    eligible = mask
                if eligible.any():
                    d[mask] = to_decile(values[mask], values[eligible])
            panel[f"{col}_decile"] = d
            panel[f"MD_{col}"] = demean_deciles(d)
    return panel


def forecast_regression(
    scores: pd.DataFrame,
    monthly_pvlgd: pd.DataFrame,
    horizon: int = 12,
    controls: tuple[str, ...] = (),
    factor_panel: pd.DataFrame | None = None,
    fixed_effects: tuple[str, ...] = (),
    standardization: str = "none",
):
    """Forecasting spec: lead PVLGD change on PVLGD level, credit score, and
    controls, clustered by entity and month."""
    monthly = add_lead_change(monthly_pvlgd, "pvlgd", horizon)
    monthly_scores = (
        scores.sort_values("month").groupby(["entity_id", "month"], as_index=False).tail(1)
    )
    data = monthly.merge(
        monthly_scores[["entity_id", "month", "credit_score"]],
        on=["entity_id", "month"], how="inner",
    )
    if factor_panel is not None:
        data = data.merge(factor_panel, on=["entity_id", "month"], how="left",
                          suffixes=("", "_panel"))
    spec = RegressionSpec(
        dependent=f"d_pvlgd_{horizon}",
        regressors=("pvlgd", "credit_score", *controls),
        fixed_effects=fixed_effects,
        standardization=standardization,
    )
    return run_spec(spec, data)


def backtest_with_null(
    scores: pd.DataFrame,
    monthly_pvlgd: pd.DataFrame,
    lower: float,
    upper: float,
    short_limit: float,
    long_limit: float,
    trials: int = 100,
    seed: int = 0,
) -> dict:
    """Run the strategy, simulate the structure-matched null, report p-values."""
    monthly_scores = (
        scores.sort_values("month").groupby(["entity_id", "month"], as_index=False).tail(1)
    )
    state = run_backtest(
        monthly_scores[["entity_id", "month", "credit_score"]],
        monthly_pvlgd, lower, upper, short_limit, long_limit,
    )
    r = np.array(list(state.returns.values()))
    if r.size == 0:
        raise ValidationError("backtest produced no returns")
    actual_ret = annualized_return(r)
    actual_sr = sharpe_ratio(r) if r.size > 1 and np.ptp(r) > 0 else np.nan

    trials_out = simulate_null(
        monthly_pvlgd, state.structures, lower, upper, short_limit, long_limit,
        trials=trials, seed=seed,
    )
    null_ret = np.array([t.annualized for t in trials_out])
    null_sr = np.array([t.sharpe for t in trials_out])
    p_ret = empirical_p_value(actual_ret, null_ret)
    p_sr = (
        empirical_p_value(actual_sr, null_sr[~np.isnan(null_sr)])
        if np.isfinite(actual_sr) else np.nan
    )
    return {
        "annualized_return": actual_ret,
        "sharpe_ratio": actual_sr,
        "p_value_return": p_ret,
        "stars_return": significance_stars(p_ret),
        "p_value_sharpe": p_sr,
        "monthly_returns": state.returns,
        "structures": state.structures,
        "skipped_months": state.skipped_months,
        "null_returns": null_ret.tolist(),
        "null_sharpes": null_sr.tolist(),
    }
