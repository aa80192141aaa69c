"""Control factors, information variables, deciles, and panel normalizations.

Everything is computed at month end from data available at or before that
month; missing values stay missing (NaN) and are never silently zeroed.
"""

from __future__ import annotations

import re

import numpy as np
import pandas as pd

from .exceptions import ValidationError

__all__ = [
    "monthly_cds_factors",
    "illiq",
    "equity_factors",
    "fundamental_factors",
    "dist_default",
    "analyst_dispersion",
    "count_syllables",
    "fk_grade",
    "transcript_stats",
    "to_decile",
    "demean_deciles",
    "winsorize",
    "iqr_standardize",
    "validate_passthrough",
]

_MIN_ILLIQ_PAIRS = 10


def illiq(daily_pvlgd: np.ndarray) -> float:
    """Within-month illiquidity: minus the covariance between daily log-PVLGD
    changes and their one-day lag. Missing with fewer than 10 change pairs."""
    pv = np.asarray(daily_pvlgd, dtype=float)
    pv = pv[~np.isnan(pv)]
    changes = np.diff(np.log(pv))
    if changes.size - 1 < _MIN_ILLIQ_PAIRS:
        return np.nan
    x, y = changes[1:], changes[:-1]
    return float(-np.cov(x, y, ddof=1)[0, 1])


def monthly_cds_factors(monthly: pd.DataFrame, daily: pd.DataFrame | None = None) -> pd.DataFrame:
    """Per entity-month CDS factors from end-of-month and daily PVLGDs.

    monthly: columns entity_id, month (YYYY-MM), pvlgd (end of month).
    daily:   columns entity_id, date (YYYY-MM-DD), pvlgd; used for ILLIQ only.

    CDSChg_1 = PV[t-1] - PV[t-2]; CDSChg_26 = PV[t-2] - PV[t-6];
    RVCredit = stdev of the 12 trailing monthly changes.
    """
    out = []
    for entity, grp in monthly.groupby("entity_id"):
        grp = grp.sort_values("month")
        pv = grp.set_index("month")["pvlgd"]
        idx = pd.PeriodIndex(pv.index, freq="M")
        full = pv.copy()
        full.index = idx
        full = full.reindex(pd.period_range(idx.min(), idx.max(), freq="M"))
        chg = full.diff()
        frame = pd.DataFrame(
            {
                "entity_id": entity,
                "month": full.index.astype(str),
                "pvlgd": full.to_numpy(),
                "CDSChg_1": (full.shift(1) - full.shift(2)).to_numpy(),
                "CDSChg_26": (full.shift(2) - full.shift(6)).to_numpy(),
                "RVCredit": chg.rolling(12).std().to_numpy(),
            }
        )
        out.append(frame)
    result = pd.concat(out, ignore_index=True) if out else pd.DataFrame(
        columns=["entity_id", "month", "pvlgd", "CDSChg_1", "CDSChg_26", "RVCredit"]
    )
    if daily is not None:
        d = daily.copy()
        d["month"] = d["date"].astype(str).str[:7]
        il = (
            d.sort_values("date")
            .groupby(["entity_id", "month"])["pvlgd"]
            .apply(lambda s: illiq(s.to_numpy()))
            .rename("ILLIQ")
            .reset_index()
        )
        result = result.merge(il, on=["entity_id", "month"], how="left")
    else:
        result["ILLIQ"] = np.nan
    return result


def equity_factors(equity: pd.DataFrame) -> pd.DataFrame:
    """EqRet_1, EqRet_26, and Size from monthly price and share data.

    equity: columns entity_id, month, price, shares (thousands or any fixed
    unit; Size is log(shares * price)).
    """
    out = []
    for entity, grp in equity.groupby("entity_id"):
        grp = grp.sort_values("month")
        idx = pd.PeriodIndex(grp["month"], freq="M")
        px = pd.Series(grp["price"].to_numpy(), index=idx)
        px = px.reindex(pd.period_range(idx.min(), idx.max(), freq="M"))
        sh = pd.Series(grp["shares"].to_numpy(), index=idx).reindex(px.index)
        with np.errstate(divide="ignore", invalid="ignore"):
            frame = pd.DataFrame(
                {
                    "entity_id": entity,
                    "month": px.index.astype(str),
                    "EqRet_1": ((px.shift(1) - px.shift(2)) / px.shift(2)).to_numpy(),
                    "EqRet_26": ((px.shift(2) - px.shift(6)) / px.shift(6)).to_numpy(),
                    "Size": np.log((sh * px).to_numpy()),
                }
            )
        out.append(frame)
    return pd.concat(out, ignore_index=True) if out else pd.DataFrame(
        columns=["entity_id", "month", "EqRet_1", "EqRet_26", "Size"]
    )


def fundamental_factors(fund: pd.DataFrame) -> pd.DataFrame:
    """Profit, RatioBM, EarnYield, SUE from statement fields joined to price.

    fund columns: entity_id, month, price, shares, income,
    preferred_dividends, deferred_taxes, book_equity, total_assets,
    total_liabilities, eps_diluted. Zero denominators yield missing values.
    """
    out = []
    for entity, grp in fund.groupby("entity_id"):
        grp = grp.sort_values("month").reset_index(drop=True)
        eps = pd.Series(grp["eps_diluted"].to_numpy(),
                        index=pd.PeriodIndex(grp["month"], freq="M"))
        eps_lag = eps.reindex(eps.index - 12).to_numpy()
        price = grp["price"].to_numpy(dtype=float)
        shares = grp["shares"].to_numpy(dtype=float)
        book = grp["book_equity"].to_numpy(dtype=float)
        mktval = shares * price
        with np.errstate(divide="ignore", invalid="ignore"):
            profit = np.where(
                book != 0,
                (grp["income"] - grp["preferred_dividends"] + grp["deferred_taxes"]) / book,
                np.nan,
            )
            ratio_bm = np.where(
                mktval != 0,
                (grp["total_assets"] - grp["total_liabilities"]) / mktval,
                np.nan,
            )
            earn_yield = np.where(price != 0, grp["eps_diluted"] / price, np.nan)
            sue = np.where(price != 0, (grp["eps_diluted"].to_numpy() - eps_lag) / price, np.nan)
        out.append(
            pd.DataFrame(
                {
                    "entity_id": entity,
                    "month": grp["month"],
                    "Profit": profit,
                    "RatioBM": ratio_bm,
                    "EarnYield": earn_yield,
                    "SUE": sue,
                }
            )
        )
    return pd.concat(out, ignore_index=True) if out else pd.DataFrame(
        columns=["entity_id", "month", "Profit", "RatioBM", "EarnYield", "SUE"]
    )


def equity_risk_inputs(equity: pd.DataFrame) -> pd.DataFrame:
    """Trailing 12-month compounded return and annualized return volatility,
    per entity-month, from the monthly `ret` column."""
    out = []
    for entity, grp in equity.groupby("entity_id"):
        grp = grp.sort_values("month")
        ret = pd.Series(grp["ret"].to_numpy(dtype=float),
                        index=pd.PeriodIndex(grp["month"], freq="M"))
        ret = ret.reindex(pd.period_range(ret.index.min(), ret.index.max(), freq="M"))
        trailing = (1.0 + ret).rolling(12).apply(np.prod, raw=True) - 1.0
        vol = ret.rolling(12).std() * np.sqrt(12.0)
        out.append(
            pd.DataFrame(
                {
                    "entity_id": entity,
                    "month": ret.index.astype(str),
                    "trailing_return": trailing.to_numpy(),
                    "equity_vol": vol.to_numpy(),
                }
            )
        )
    return pd.concat(out, ignore_index=True) if out else pd.DataFrame(
        columns=["entity_id", "month", "trailing_return", "equity_vol"]
    )


def dist_default(equity_value, debt_face, trailing_return, equity_vol, horizon: float = 1.0):
    """Merton-style distance to default with the debt-weighted volatility proxy.

    sigma_V = w_E * sigma_E + w_D * (0.05 + 0.25 * sigma_E) with value weights,
    DD = [ln((E+D)/D) + (r - sigma_V^2/2) T] / (sigma_V sqrt(T)).
    Zero debt is a log singularity and yields missing.
    """
    E = np.asarray(equity_value, dtype=float)
    D = np.asarray(debt_face, dtype=float)
    r = np.asarray(trailing_return, dtype=float)
    s_e = np.asarray(equity_vol, dtype=float)
    if np.any(E <= 0) or np.any(s_e <= 0):
        raise ValidationError("dist_default requires E > 0 and equity_vol > 0")
    with np.errstate(divide="ignore", invalid="ignore"):
        w_e = E / (E + D)
        sigma_v = w_e * s_e + (1 - w_e) * (0.05 + 0.25 * s_e)
        dd = (np.log((E + D) / D) + (r - sigma_v**2 / 2.0) * horizon) / (
            sigma_v * np.sqrt(horizon)
        )
        dd = np.where(D > 0, dd, np.nan)
    return float(dd) if dd.ndim == 0 else dd


def analyst_dispersion(means, stds, counts) -> tuple[int, float]:
    """Pooled 12-month forecast dispersion from monthly (mean, std, count).

    Returns (NumAnlst, DispAnlst): the pooled forecast count and the pooled
    standard deviation over the pooled mean. Zero total count gives (0, NaN).
    """
    m = np.asarray(means, dtype=float)
    s = np.asarray(stds, dtype=float)
    n = np.asarray(counts, dtype=float)
    ok = ~(np.isnan(m) | np.isnan(s) | np.isnan(n))
    m, s, n = m[ok], s[ok], n[ok]
    total = n.sum()
    if total <= 0:
        return 0, np.nan
    avg = (m * n).sum() / total
    avg_sq = ((m**2 + s**2) * n).sum() / total
    std = np.sqrt(max(avg_sq - avg**2, 0.0))
    disp = std / avg if avg != 0 else np.nan
    return int(total), float(disp)


_VOWEL_GROUP = re.compile(r"[aeiouy]+")


def count_syllables(word: str) -> int:
    """Vowel-group heuristic: maximal vowel runs, silent trailing 'e' dropped,
    minimum one syllable per word."""
    w = word.lower()
    groups = _VOWEL_GROUP.findall(w)
    count = len(groups)
    if count > 1 and w.endswith("e") and not w.endswith(("le", "ee")):
        count -= 1
    return max(count, 1)


def fk_grade(total_words: float, total_sentences: float, total_syllables: float) -> float:
    """Reading grade level: 0.39 w/s + 11.8 syll/w - 15.59."""
    if total_words <= 0 or total_sentences <= 0:
        return np.nan
    return 0.39 * (total_words / total_sentences) + 11.8 * (
        total_syllables / total_words
    ) - 15.59


def transcript_stats(text: str) -> dict:
    """Word/sentence/syllable counts plus TransLen and FKGrade for one text."""
    from .text import split_sentences

    sentences = split_sentences(text)
    words = [w for s in sentences for w in re.findall(r"[a-zA-Z']+", s)]
    syllables = sum(count_syllables(w) for w in words)
    return {
        "total_words": len(words),
        "total_sentences": len(sentences),
        "total_syllables": syllables,
        "TransLen": len(words),
        "FKGrade": fk_grade(len(words), len(sentences), syllables),
    }


def to_decile(values, comparison) -> np.ndarray:
    """Count-based decile (1..10) of each value against a comparison set.

    bucket = ceil(10 * #{c < v} / (m+1)) clipped to [1, 10]; ties share the
    lower bucket. An empty comparison set yields missing.
    """
    v = np.atleast_1d(np.asarray(values, dtype=float))
    comp = np.sort(np.asarray(comparison, dtype=float))
    comp = comp[~np.isnan(comp)]
    if comp.size == 0:
        return np.full(v.shape, np.nan)
    rank = np.searchsorted(comp, v, side="left")
    decile = np.ceil(10.0 * rank / (comp.size + 1))
    decile = np.clip(decile, 1, 10)
    return np.where(np.isnan(v), np.nan, decile)


def demean_deciles(deciles) -> np.ndarray:
    """Subtract the full-sample mean decile level (NaNs ignored in the mean)."""
    d = np.asarray(deciles, dtype=float)
    return d - np.nanmean(d)


def winsorize(panel: pd.DataFrame, lower: float = 0.01, upper: float = 0.99,
              columns=None) -> pd.DataFrame:
    """Clamp each column to its full-sample percentile bounds (linear
    interpolation); missing values are preserved."""
    if not 0 <= lower < upper <= 1:
        raise ValidationError("need 0 <= lower < upper <= 1")
    out = panel.copy()
    cols = columns if columns is not None else [
        c for c in panel.columns if pd.api.types.is_numeric_dtype(panel[c])
    ]
    for c in cols:
        x = out[c].to_numpy(dtype=float)
        good = ~np.isnan(x)
        if not good.any():
            continue
        lo, hi = np.percentile(x[good], [100 * lower, 100 * upper])
        out[c] = np.clip(x, lo, hi)
    return out


def iqr_standardize(series) -> np.ndarray:
    """(x - median) / (Q75 - Q25); errors if the IQR is zero."""
    x = np.asarray(series, dtype=float)
    good = x[~np.isnan(x)]
    q25, q50, q75 = np.percentile(good, [25, 50, 75])
    if q75 - q25 == 0:
        raise ValidationError("IQR is zero; cannot standardize")
    return (x - q50) / (q75 - q25)


def validate_passthrough(panel: pd.DataFrame) -> None:
    """Range checks for pass-through columns: LEV in [0,1], IV >= 0."""
    if "LEV" in panel:
        lev = panel["LEV"].dropna()
        if ((lev < 0) | (lev > 1)).any():
            raise ValidationError("LEV outside [0, 1]")
    if "IV" in panel:
        iv = panel["IV"].dropna()
        if (iv < 0).any():
            raise ValidationError("IV must be nonnegative")
