"""Credit scores from the lasso text model, full-sample and rolling.

The credit score of a call is actual PVLGD minus model-implied PVLGD. In the
rolling protocol a model is re-estimated at each updating month on a trailing
window (vocabulary, token ranking, and lasso all refit within the window),
scores are produced for the following prediction window, and each calendar
month keeps the scores of whichever candidate configuration had the highest
training R-squared for that month.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, RegressorMixin

from .exceptions import ValidationError
from .lasso import LassoFit, fit_lasso
from .selection import ForwardSelector
from .text import CreditWindowVectorizer, DocumentTermMatrix, Transcript, WordLists

__all__ = [
    "LassoCreditModel",
    "implied_pvlgd",
    "credit_score",
    "RollingConfig",
    "RollingFit",
    "fit_rolling",
    "select_best_model",
    "aggregate_scores",
    "fit_full_sample",
]

log = logging.getLogger(__name__)

EXPANDING = "expanding"


class LassoCreditModel(BaseEstimator, RegressorMixin):
    """Estimator facade over fit_lasso: fit on a DTM, predict implied PVLGD."""

    def __init__(self, folds: int = 10, seed: int = 0):
        self.folds = folds
        self.seed = seed

    def fit(self, dtm: DocumentTermMatrix, pvlgd, **kwargs):
        self.fit_ = fit_lasso(dtm, pvlgd, folds=self.folds, seed=self.seed, **kwargs)
        return self

    def predict(self, dtm: DocumentTermMatrix) -> np.ndarray:
        if not hasattr(self, "fit_"):
            raise ValidationError("model must be fit before predict")
        aligned = dtm.restrict(list(self.fit_.tokens))
        return implied_pvlgd(self.fit_, aligned.dense(), aligned.sector_of_row)


def implied_pvlgd(fit: LassoFit, rows, sectors) -> np.ndarray:
    """Sector intercept plus token contribution, vectorized over rows.

    Rows must be aligned to fit.tokens (missing tokens count zero, via
    DocumentTermMatrix.restrict). Unknown sectors fall back to the mean
    fitted intercept and are flagged with a warning.
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.shape[1] != len(fit.tokens):
        raise ValidationError("rows must be aligned to the fit's token vocabulary")
    sectors = [sectors] if isinstance(sectors, str) else list(sectors)
    unknown = sorted({s for s in sectors if s not in fit.sector_intercepts})
    if unknown:
        warnings.warn(f"unknown sectors {unknown}; using mean fitted intercept")
    intercepts = np.array(
        [fit.sector_intercepts.get(s, fit.mean_intercept) for s in sectors]
    )
    return intercepts + rows @ fit.coefficients


def credit_score(actual_pvlgd, implied) -> np.ndarray | float:
    """Actual minus implied; positive means the market trades wider than
    the call language suggests."""
    out = np.asarray(actual_pvlgd, dtype=float) - np.asarray(implied, dtype=float)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# rolling protocol


@dataclass(frozen=True)
class RollingConfig:
    """One rolling model candidate: DTM/selection hyperparameters plus the
    lookback window (months, or "expanding") and updating frequency."""

    top_n: int = 2000
    t_c: float = 1.0
    n_fs: int = 250
    lookback_months: int | str = 36
    update_frequency_months: int = 12

    def __post_init__(self):
        if self.lookback_months != EXPANDING and (
            not isinstance(self.lookback_months, int) or self.lookback_months <= 0
        ):
            raise ValidationError(
                f"lookback_months must be a positive int or '{EXPANDING}'"
            )
        if self.update_frequency_months <= 0:
            raise ValidationError("update_frequency_months must be positive")

    @property
    def model_id(self) -> str:
        return (
            f"N{self.top_n}-tc{self.t_c:g}-fs{self.n_fs}"
            f"-lb{self.lookback_months}-f{self.update_frequency_months}"
        )


@dataclass
class RollingFit:
    """One training-window fit and the scores of its prediction window."""

    config: RollingConfig
    train_start: int
    train_end: int          # exclusive updating month s
    predict_end: int        # exclusive, = s + f
    fit: LassoFit
    scores: pd.DataFrame = field(repr=False)

    def covers(self, month_index: int) -> bool:
        return self.train_end <= month_index < self.predict_end


def month_index(months, origin: str) -> np.ndarray:
    """YYYY-MM labels -> integer month offsets from origin."""
    base = pd.Period(origin, freq="M")
    return np.array([(pd.Period(m, freq="M") - base).n for m in np.atleast_1d(months)])


def _window_fit(
    transcripts: list[Transcript],
    pvlgd: np.ndarray,
    midx: np.ndarray,
    cfg: RollingConfig,
    start: int,
    s: int,
    f: int,
    origin: str,
    word_lists: WordLists | None,
    folds: int,
    seed: int,
) -> RollingFit | None:
    train = (midx >= start) & (midx < s)
    predict = (midx >= s) & (midx < s + f)
    if train.sum() < 10 * folds:
        log.info("skipping %s at month %d: %d training rows", cfg.model_id, s, train.sum())
        return None

    train_calls = [t for t, m in zip(transcripts, train) if m]
    vec = CreditWindowVectorizer(word_lists=word_lists, top_n=cfg.top_n)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        train_dtm = vec.fit_transform(train_calls)
        selector = ForwardSelector(n_fs=cfg.n_fs, t_c=cfg.t_c)
        design = selector.fit_transform(train_dtm, pvlgd[train])
        fit = fit_lasso(
            design,
            pvlgd[train],
            folds=folds,
            seed=seed,
            hyperparams={"N": cfg.top_n, "t_c": cfg.t_c, "N_FS": cfg.n_fs},
            training_window=(
                str(pd.Period(origin, "M") + int(start)),
                str(pd.Period(origin, "M") + int(s)),
            ),
        )
        model = LassoCreditModel(folds=folds, seed=seed)
        model.fit_ = fit

        pred_calls = [t for t, m in zip(transcripts, predict) if m]
        if pred_calls:
            implied = model.predict(selector.transform(vec.transform(pred_calls)))
        else:
            implied = np.array([])
    actual = pvlgd[predict]
    scores = pd.DataFrame(
        {
            "call_id": [t.call_id for t in pred_calls],
            "entity_id": [t.entity_id for t in pred_calls],
            "month_index": midx[predict],
            "actual_pvlgd": actual,
            "implied_pvlgd": implied,
            "credit_score": credit_score(actual, implied),
            "model_id": cfg.model_id,
        }
    )
    return RollingFit(
        config=cfg, train_start=start, train_end=s, predict_end=s + f,
        fit=fit, scores=scores,
    )


def fit_rolling(
    transcripts: list[Transcript],
    pvlgd,
    months,
    configs: list[RollingConfig],
    first_training_month: str,
    origin: str | None = None,
    last_month: str | None = None,
    word_lists: WordLists | None = None,
    folds: int = 10,
    seed: int = 0,
) -> list[RollingFit]:
    """Fit every config at each of its updating months.

    The training window is [s - lookback, s) clipped at the panel origin:
    a window that does not yet have full lookback history uses all months
    from the origin (the expanding bootstrap), and "expanding" configs always
    do. No row dated at or after s is ever passed to a training fit.
    """
    pvlgd = np.asarray(pvlgd, dtype=float)
    months = list(months)
    if not (len(transcripts) == len(pvlgd) == len(months)):
        raise ValidationError("transcripts, pvlgd, and months must align")
    origin = origin or min(months)
    midx = month_index(months, origin)
    if midx.min() < 0:
        raise ValidationError("origin must not postdate the first panel month")
    s0 = int(month_index(first_training_month, origin)[0])
    end = (
        int(month_index(last_month, origin)[0]) + 1
        if last_month is not None
        else int(midx.max()) + 1
    )

    fits = []
    for cfg in configs:
        f = cfg.update_frequency_months
        for s in range(s0, end, f):
            if cfg.lookback_months == EXPANDING:
                start = 0
            else:
                start = max(0, s - int(cfg.lookback_months))
            rf = _window_fit(
                transcripts, pvlgd, midx, cfg, start, s, f, origin,
                word_lists, folds, seed,
            )
            if rf is not None:
                fits.append(rf)
    return fits


def select_best_model(fits: list[RollingFit], month_idx: int) -> RollingFit:
    """Among fits whose prediction window covers the month, pick the one with
    the highest training R-squared; ties resolve by config order in `fits`."""
    qualifying = [rf for rf in fits if rf.covers(month_idx)]
    if not qualifying:
        raise ValidationError(f"no fit covers month index {month_idx}")
    best = qualifying[0]
    for rf in qualifying[1:]:
        if rf.fit.r_squared > best.fit.r_squared:
            best = rf
    return best


def aggregate_scores(fits: list[RollingFit], origin: str) -> pd.DataFrame:
    """Month-by-month concatenation: each month's rows come exclusively from
    that month's selected model. Months with no scores are recorded as gaps."""
    if not fits:
        return pd.DataFrame(
            columns=["call_id", "entity_id", "month", "actual_pvlgd",
                     "implied_pvlgd", "credit_score", "model_id"]
        )
    lo = min(rf.train_end for rf in fits)
    hi = max(rf.predict_end for rf in fits)
    parts = []
    for m in range(lo, hi):
        try:
            best = select_best_model(fits, m)
        except ValidationError:
            log.info("month index %d not covered by any fit", m)
            continue
        rows = best.scores[best.scores["month_index"] == m]
        if rows.empty:
            log.info("month index %d has no scored calls", m)
            continue
        parts.append(rows)
    out = pd.concat(parts, ignore_index=True) if parts else pd.DataFrame(
        columns=["call_id", "entity_id", "month_index", "actual_pvlgd",
                 "implied_pvlgd", "credit_score", "model_id"]
    )
    base = pd.Period(origin, "M")
    out = out.assign(month=[str(base + int(i)) for i in out["month_index"]])
    return out.drop(columns=["month_index"])[
        ["call_id", "entity_id", "month", "actual_pvlgd", "implied_pvlgd",
         "credit_score", "model_id"]
    ]


def fit_full_sample(
    transcripts: list[Transcript],
    pvlgd,
    top_n: int = 2000,
    t_c: float = 1.0,
    n_fs: int = 250,
    word_lists: WordLists | None = None,
    folds: int = 10,
    seed: int = 0,
) -> tuple[LassoFit, pd.DataFrame]:
    """One model on the whole panel; scores are in-sample lasso residuals."""
    pvlgd = np.asarray(pvlgd, dtype=float)
    vec = CreditWindowVectorizer(word_lists=word_lists, top_n=top_n)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        dtm = vec.fit_transform(transcripts)
        selector = ForwardSelector(n_fs=n_fs, t_c=t_c)
        design = selector.fit_transform(dtm, pvlgd)
        fit = fit_lasso(
            design, pvlgd, folds=folds, seed=seed,
            hyperparams={"N": top_n, "t_c": t_c, "N_FS": n_fs},
        )
        model = LassoCreditModel(folds=folds, seed=seed)
        model.fit_ = fit
        implied = model.predict(design)
    scores = pd.DataFrame(
        {
            "call_id": [t.call_id for t in transcripts],
            "entity_id": [t.entity_id for t in transcripts],
            "timestamp": [t.timestamp for t in transcripts],
            "actual_pvlgd": pvlgd,
            "implied_pvlgd": implied,
            "credit_score": credit_score(pvlgd, implied),
            "model_id": "full-sample",
        }
    )
    return fit, scores
