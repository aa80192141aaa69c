"""Synthetic desk-scale universe with a planted text->PVLGD model.

Token counts are drawn per call, the call-implied PVLGD is an exact linear
function of the informative counts plus a sector intercept, and the market
PVLGD equals implied plus a mean-reverting mispricing term (the planted
credit score) plus observation noise. Daily CDS spreads are emitted by
inverting the pricing map, so running the full pipeline on the bundle should
recover the planted coefficients and the mispricing's forecasting power.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from ._porter2 import stem
from .exceptions import ValidationError
from .pricing import ContractSpec, SpreadConverter

__all__ = ["SynthBundle", "generate_synthetic_universe", "shuffle_transcript_texts"]

SECTORS = (
    "energy", "technology", "industrial", "utility", "basic_materials",
    "consumer_goods", "consumer_services", "telecom", "healthcare",
)

_ANCHOR = "We also reviewed our debt and liquidity position in detail."
_OPENER = "Good afternoon and welcome to the quarterly call."
_CLOSER = "Thank you all for joining and we will talk next quarter."

_SYLLABLES = [
    "ba", "ce", "di", "fo", "gu", "ha", "je", "ki", "lo", "mu",
    "na", "pe", "qi", "ro", "su", "ta", "ve", "wi", "xo", "zu",
]


@dataclass
class SynthBundle:
    transcripts: pd.DataFrame
    cds_daily: pd.DataFrame
    equity: pd.DataFrame
    fundamentals: pd.DataFrame
    analyst: pd.DataFrame
    ratings: pd.DataFrame
    truth: dict

    def write_to(self, directory) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        self.transcripts.to_csv(directory / "transcripts.csv", index=False)
        self.cds_daily.to_csv(directory / "cds_daily.csv", index=False)
        self.equity.to_csv(directory / "equity.csv", index=False)
        self.fundamentals.to_csv(directory / "fundamentals.csv", index=False)
        self.analyst.to_csv(directory / "analyst.csv", index=False)
        self.ratings.to_csv(directory / "ratings.csv", index=False)
        with open(directory / "truth.json", "w") as fh:
            json.dump(self.truth, fh, indent=2, default=str)


def _stem_stable_words(rng: np.random.Generator, count: int) -> list[str]:
    words: list[str] = []
    seen = set()
    while len(words) < count:
        w = "".join(rng.choice(_SYLLABLES, size=int(rng.integers(2, 4))))
        if w in seen or stem(w) != w:
            continue
        seen.add(w)
        words.append(w)
    return words


def _business_days(month: pd.Period) -> pd.DatetimeIndex:
    return pd.bdate_range(month.start_time, month.end_time)


def generate_synthetic_universe(
    seed: int = 0,
    n_entities: int = 100,
    n_months: int = 60,
    vocab_size: int = 500,
    start_month: str = "2010-01",
    n_informative: int = 30,
    mispricing_scale: float = 1.5,
    noise_scale: float = 0.1,
    mispricing_decay: float = 0.85,
    risk_free_rate: float = 0.0226,
) -> SynthBundle:
    """Build the full input bundle with known ground truth.

    Same seed, same bundle, byte for byte. `noise_scale` is the observation
    noise on market PVLGDs; `mispricing_scale` is the stdev of the planted
    credit score whose decay at `mispricing_decay` per month creates the
    mean reversion that the forecasting regression should detect.
    """
    if min(n_entities, n_months, vocab_size) <= 0:
        raise ValidationError("sizes must be positive")
    rng = np.random.default_rng(seed)
    words = _stem_stable_words(rng, vocab_size)
    n_informative = min(n_informative, vocab_size)
    beta = np.zeros(vocab_size)
    signs = rng.choice([-1.0, 1.0], size=n_informative)
    beta[:n_informative] = signs * rng.uniform(0.4, 1.0, size=n_informative)
    sector_base = {s: 8.0 + 1.5 * i for i, s in enumerate(SECTORS)}

    months = [pd.Period(start_month, "M") + i for i in range(n_months)]
    spec = ContractSpec(risk_free_rate=risk_free_rate, loss_given_default=60.0)
    converter = SpreadConverter(spec)

    transcripts, daily_rows, truth_scores = [], [], []
    equity_rows, fund_rows, analyst_rows, rating_rows = [], [], [], []

    for e in range(n_entities):
        entity = f"E{e:04d}"
        sector = SECTORS[e % len(SECTORS)]
        rating = int(rng.integers(1, 10))
        rating_rows.append({"entity_id": entity, "rating": rating})
        call_offset = e % 3

        implied = sector_base[sector]
        cs_current = 0.0
        months_since_call = 0
        pv_prev_month = None
        price = float(rng.uniform(10, 80))
        shares = float(rng.integers(50, 500))

        for m_idx, month in enumerate(months):
            is_call_month = m_idx % 3 == call_offset
            if is_call_month:
                rates = np.where(
                    np.arange(vocab_size) < n_informative,
                    rng.uniform(0.5, 1.2),
                    0.25,
                )
                counts = rng.poisson(rates)
                implied = sector_base[sector] + float(counts @ beta)
                cs_current = float(rng.normal(scale=mispricing_scale))
                months_since_call = 0
                call_day = int(rng.integers(3, 20))
                hour = int(rng.choice([10, 11, 14, 17]))
                day = _business_days(month)[min(call_day, len(_business_days(month)) - 1)]
                call_id = f"{entity}_{month}"
                payload = np.repeat(words, counts)
                rng.shuffle(payload)
                chunks = [c for c in np.array_split(payload, 4) if len(c)]
                sentences = [_OPENER, _ANCHOR]
                sentences += [" ".join(c) + "." for c in chunks]
                sentences.append(_CLOSER)
                transcripts.append(
                    {
                        "call_id": call_id,
                        "entity_id": entity,
                        "timestamp": f"{day.date()}T{hour:02d}:00:00",
                        "sector": sector,
                        "text": " ".join(sentences),
                    }
                )
                truth_scores.append(
                    {"call_id": call_id, "month": str(month), "mispricing": cs_current,
                     "implied_pvlgd": implied}
                )
            else:
                months_since_call += 1

            pv_month = (
                implied
                + cs_current * mispricing_decay**months_since_call
                + float(rng.normal(scale=noise_scale))
            )
            pv_month = float(np.clip(pv_month, 0.8, 48.0))

            days = _business_days(month)
            anchor = pv_prev_month if pv_prev_month is not None else pv_month
            frac = np.linspace(0.0, 1.0, len(days))
            pv_days = anchor + (pv_month - anchor) * frac
            pv_days = pv_days + rng.normal(scale=max(noise_scale, 0.01) / 4, size=len(days))
            pv_days[-1] = pv_month
            pv_days = np.clip(pv_days, 0.5, 49.0)
            spreads = converter.spread_from_pvlgd(pv_days)
            for d, s in zip(days, np.atleast_1d(spreads)):
                daily_rows.append(
                    {"entity_id": entity, "date": str(d.date()), "spread_bp": float(s)}
                )
            pv_prev_month = pv_month

            ret = float(rng.normal(0.005, 0.06))
            price = max(price * (1 + ret), 1.0)
            equity_rows.append(
                {"entity_id": entity, "month": str(month), "price": price,
                 "shares": shares, "ret": ret}
            )
            analyst_rows.append(
                {"entity_id": entity, "month": str(month),
                 "mean": price * float(rng.uniform(0.9, 1.1)),
                 "std": price * 0.05, "count": int(rng.integers(1, 8))}
            )
            if month.month in (3, 6, 9, 12):
                eps = float(rng.normal(1.5, 0.5))
                fund_rows.append(
                    {
                        "entity_id": entity,
                        "data_date": str(month.end_time.date()),
                        "income": float(rng.normal(50, 15)),
                        "preferred_dividends": float(rng.uniform(0, 4)),
                        "deferred_taxes": float(rng.uniform(0, 6)),
                        "book_equity": float(rng.uniform(200, 900)),
                        "total_assets": float(rng.uniform(1000, 4000)),
                        "total_liabilities": float(rng.uniform(400, 2500)),
                        "eps_diluted": eps,
                        "debt_current": float(rng.uniform(20, 150)),
                        "debt_long_term": float(rng.uniform(100, 900)),
                    }
                )

    truth = {
        "seed": seed,
        "token_coefficients": {w: float(b) for w, b in zip(words, beta) if b != 0.0},
        "sector_intercepts": sector_base,
        "mispricing_scale": mispricing_scale,
        "noise_scale": noise_scale,
        "mispricing_decay": mispricing_decay,
        "risk_free_rate": risk_free_rate,
        "calls": truth_scores,
    }
    return SynthBundle(
        transcripts=pd.DataFrame(transcripts),
        cds_daily=pd.DataFrame(daily_rows),
        equity=pd.DataFrame(equity_rows),
        fundamentals=pd.DataFrame(fund_rows),
        analyst=pd.DataFrame(analyst_rows),
        ratings=pd.DataFrame(rating_rows),
        truth=truth,
    )


def shuffle_transcript_texts(transcripts: pd.DataFrame, seed: int = 0) -> pd.DataFrame:
    """Negative control: permute call texts across calls, severing the
    token-to-PVLGD link while keeping every identifier and timestamp."""
    rng = np.random.default_rng(seed)
    out = transcripts.copy()
    out["text"] = out["text"].to_numpy()[rng.permutation(len(out))]
    return out
