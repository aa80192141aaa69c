"""Data plumbing: identifier mapping with validity intervals, call-to-quote
temporal alignment, fundamental lags, rating partitions, and pipeline config
validation.

Dates are ISO-8601, months are YYYY-MM, and the business-day calendar is
Monday-Friday with no holiday schedule. Call timestamps without a timezone
are taken as market (U.S. Eastern) wall-clock time.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields

import numpy as np
import pandas as pd

from .exceptions import ValidationError

__all__ = [
    "IdMapping",
    "validate_mappings",
    "resolve_id",
    "next_business_day",
    "align_call_to_cds",
    "fundamentals_availability_month",
    "fundamentals_join_month",
    "rating_group",
    "PipelineConfig",
]

MARKET_CLOSE_HOUR = 16
IG_RATINGS = frozenset({"AAA", "AA", "A", "BBB"})


@dataclass(frozen=True)
class IdMapping:
    """One row of a mapping file: source maps to target within [from, to]."""

    source_id: str
    target_id: str
    valid_from: str
    valid_to: str

    def __post_init__(self):
        if self.valid_from > self.valid_to:
            raise ValidationError(
                f"mapping {self.source_id}->{self.target_id}: "
                f"valid_from {self.valid_from} after valid_to {self.valid_to}"
            )

    def contains(self, date: str) -> bool:
        return self.valid_from <= date <= self.valid_to


def validate_mappings(mappings: list[IdMapping]) -> list[tuple[IdMapping, IdMapping]]:
    """Return overlapping-interval pairs for the same source (flagged, not fatal)."""
    overlaps = []
    by_source: dict[str, list[IdMapping]] = {}
    for m in mappings:
        by_source.setdefault(m.source_id, []).append(m)
    for group in by_source.values():
        group = sorted(group, key=lambda m: m.valid_from)
        for a, b in zip(group, group[1:]):
            if b.valid_from <= a.valid_to:
                overlaps.append((a, b))
    return overlaps


def resolve_id(source_id: str, date: str, mappings: list[IdMapping]) -> str | None:
    """The unique target valid on `date`, None when unmatched, error on
    ambiguity (multiple surviving intervals)."""
    hits = [m for m in mappings if m.source_id == source_id and m.contains(date)]
    if len(hits) > 1:
        detail = "; ".join(
            f"{m.target_id} [{m.valid_from}..{m.valid_to}]" for m in hits
        )
        raise ValidationError(f"ambiguous mapping for {source_id} on {date}: {detail}")
    return hits[0].target_id if hits else None


def next_business_day(date: pd.Timestamp) -> pd.Timestamp:
    day = date + pd.Timedelta(days=1)
    while day.weekday() >= 5:
        day += pd.Timedelta(days=1)
    return day


def align_call_to_cds(call_timestamp: str, quote_dates, max_search: int = 5) -> str | None:
    """Quote date for a call: same day before 16:00, next trading day after.

    Rolls forward to the first date with a quote; unmatched (None) when no
    quote exists within `max_search` business days of the target.
    """
    ts = pd.Timestamp(call_timestamp)
    target = ts.normalize()
    if ts.hour >= MARKET_CLOSE_HOUR or target.weekday() >= 5:
        target = next_business_day(target)
    available = set(pd.Timestamp(d).normalize() for d in quote_dates)
    day = target
    for _ in range(max_search):
        if day in available:
            return str(day.date())
        day = next_business_day(day)
    return None


def fundamentals_availability_month(data_date: str) -> str:
    """A statement dated in month m is usable from month m+3 onward."""
    return str(pd.Period(str(data_date)[:7], freq="M") + 3)


def fundamentals_join_month(call_month: str) -> str:
    """A call in month t joins the fundamentals dated end of month t-3."""
    return str(pd.Period(call_month, freq="M") - 3)


def rating_group(rating) -> str:
    """IG for AAA/AA/A/BBB (integer codes 1-4); HY otherwise, including
    unclassified."""
    if isinstance(rating, str) and not rating.isdigit():
        return "IG" if rating.upper() in IG_RATINGS else "HY"
    return "IG" if int(rating) <= 4 else "HY"


_MENUS = {
    "top_n": (2000, 5000),
    "t_c": (1 / 3, 1 / 2, 1.0),
    "n_fs": (250, 500, 1000),
    "lookback_months": (24, 36, 60, "expanding"),
    "update_frequency_months": (1, 12),
}


@dataclass
class PipelineConfig:
    """Validated hyperparameter grid plus bounds, word lists, and seeds."""

    top_n: list = field(default_factory=lambda: [2000])
    t_c: list = field(default_factory=lambda: [1.0])
    n_fs: list = field(default_factory=lambda: [250])
    lookback_months: list = field(default_factory=lambda: [36])
    update_frequency_months: list = field(default_factory=lambda: [12])
    bounds: dict = field(
        default_factory=lambda: {
            "IG": {"lower": -0.1, "upper": 0.1, "short_limit": -4.0, "long_limit": 4.0},
            "HY": {"lower": -0.1, "upper": 0.1, "short_limit": -2.0, "long_limit": 2.0},
        }
    )
    credit_words_path: str | None = None
    excluded_phrases_path: str | None = None
    seed: int = 0
    enforce_menus: bool = True

    def __post_init__(self):
        if not self.enforce_menus:
            return
        for name, menu in _MENUS.items():
            for value in getattr(self, name):
                if not any(np.isclose(value, m) if isinstance(m, float) else value == m
                           for m in menu):
                    raise ValidationError(
                        f"{name}={value!r} is not in the allowed menu {menu}"
                    )
        for group, b in self.bounds.items():
            if not (b["lower"] < 0 < b["upper"]) or not (b["short_limit"] < 0 < b["long_limit"]):
                raise ValidationError(f"bounds for {group} must straddle zero")

    @classmethod
    def from_json(cls, path) -> "PipelineConfig":
        with open(path) as fh:
            raw = json.load(fh)
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)

    def rolling_configs(self):
        from .model import RollingConfig

        return [
            RollingConfig(top_n=n, t_c=tc, n_fs=fs, lookback_months=lb,
                          update_frequency_months=f)
            for n in self.top_n
            for tc in self.t_c
            for fs in self.n_fs
            for lb in self.lookback_months
            for f in self.update_frequency_months
        ]
