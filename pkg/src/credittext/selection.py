"""Token ranking by incremental explanatory power for PVLGDs.

Each step picks the unselected token whose counts have the highest absolute
correlation with the running residual, then updates the residual with a
univariate regression on that token. Tokens heavily concentrated in a single
sector can be dropped afterward, back-filling from the ranking.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator

from .exceptions import ValidationError
from .text import DocumentTermMatrix

__all__ = [
    "RankedTokens",
    "forward_select",
    "sector_concentration",
    "apply_concentration_filter",
    "ForwardSelector",
]


@dataclass(frozen=True)
class RankedTokens:
    """Forward-selection output, aligned across all fields by rank."""

    tokens: tuple[str, ...]
    step_slopes: np.ndarray
    step_correlations: np.ndarray
    concentration: np.ndarray

    def __post_init__(self):
        n = len(self.tokens)
        if len(set(self.tokens)) != n:
            raise ValidationError("ranked tokens must be unique")
        for name in ("step_slopes", "step_correlations", "concentration"):
            arr = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, arr)
            if arr.shape != (n,):
                raise ValidationError(f"{name} must align with tokens")

    def __len__(self) -> int:
        return len(self.tokens)

    def head(self, n: int) -> "RankedTokens":
        return RankedTokens(
            tokens=self.tokens[:n],
            step_slopes=self.step_slopes[:n],
            step_correlations=self.step_correlations[:n],
            concentration=self.concentration[:n],
        )


def _forward_steps(dtm: DocumentTermMatrix, pvlgd: np.ndarray):
    """Yield (column index, slope, correlation) per selection step.

    The correlation scan is vectorized over all candidate columns; only the
    residual changes between steps, so column moments are precomputed once.
    """
    X = dtm.counts.astype(float).tocsc()
    n = X.shape[0]
    col_mean = np.asarray(X.mean(axis=0)).ravel()
    col_sq = np.asarray(X.multiply(X).mean(axis=0)).ravel()
    col_var = np.maximum(col_sq - col_mean**2, 0.0)
    col_std = np.sqrt(col_var)
    usable = col_var > 0

    tokens = np.asarray(dtm.vocabulary)
    resid = pvlgd.astype(float).copy()
    selected = np.zeros(X.shape[1], dtype=bool)

    while True:
        candidates = usable & ~selected
        if not candidates.any():
            return
        r_std = resid.std()
        if r_std == 0:
            return
        cov = np.asarray(X.T @ resid).ravel() / n - col_mean * resid.mean()
        with np.errstate(divide="ignore", invalid="ignore"):
            corr = np.abs(cov) / (col_std * r_std)
        corr[~candidates] = -np.inf
        best = corr.max()
        ties = np.flatnonzero(corr == best)
        j = ties[np.argmin(tokens[ties])] if ties.size > 1 else ties[0]

        x = np.asarray(X[:, j].todense()).ravel()
        beta = cov[j] / col_var[j]
        alpha = resid.mean() - beta * col_mean[j]
        resid = resid - alpha - beta * x
        selected[j] = True
        signed_corr = np.sign(beta) * best
        yield int(j), float(beta), float(signed_corr)


def forward_select(dtm: DocumentTermMatrix, pvlgd, n_fs: int) -> RankedTokens:
    """Rank the first n_fs tokens by recursive residual correlation."""
    pvlgd = np.asarray(pvlgd, dtype=float)
    if pvlgd.shape != (dtm.shape[0],):
        raise ValidationError("pvlgd must align with dtm rows")
    if n_fs > dtm.shape[1]:
        raise ValidationError(f"n_fs={n_fs} exceeds vocabulary size {dtm.shape[1]}")
    if dtm.shape[0] and pvlgd.std() == 0:
        raise ValidationError("pvlgd is constant; correlations are undefined")

    conc = sector_concentration(dtm)
    idx, slopes, corrs = [], [], []
    for j, beta, corr in _forward_steps(dtm, pvlgd):
        idx.append(j)
        slopes.append(beta)
        corrs.append(corr)
        if len(idx) == n_fs:
            break
    return RankedTokens(
        tokens=tuple(dtm.vocabulary[j] for j in idx),
        step_slopes=np.array(slopes),
        step_correlations=np.array(corrs),
        concentration=conc[idx],
    )


def sector_concentration(dtm: DocumentTermMatrix, sector_of_row=None) -> np.ndarray:
    """Largest single-sector share of each token's total count.

    Tokens with zero total count get concentration 1 and trigger a warning.
    """
    sectors = list(sector_of_row) if sector_of_row is not None else dtm.sector_of_row
    if len(sectors) != dtm.shape[0]:
        raise ValidationError("sector labels must align with dtm rows")
    labels = sorted(set(sectors))
    if dtm.shape[0] and not labels:
        raise ValidationError("at least one sector required")

    X = dtm.counts
    totals = np.asarray(X.sum(axis=0)).ravel().astype(float)
    if not labels or X.shape[1] == 0:
        return np.ones(X.shape[1])
    sec_idx = {s: k for k, s in enumerate(labels)}
    rows = np.array([sec_idx[s] for s in sectors])
    group = sp.csr_matrix(
        (np.ones(len(rows)), (rows, np.arange(len(rows)))), shape=(len(labels), len(rows))
    )
    by_sector = np.asarray((group @ X).todense(), dtype=float)
    zero = totals == 0
    if zero.any():
        warnings.warn(f"{int(zero.sum())} tokens have zero total count; concentration set to 1")
    with np.errstate(divide="ignore", invalid="ignore"):
        conc = by_sector.max(axis=0) / totals
    conc[zero] = 1.0
    return conc


def apply_concentration_filter(ranked: RankedTokens, t_c: float, n_fs: int) -> RankedTokens:
    """Drop tokens with concentration > t_c, back-fill from the ranking.

    Keeps c_j == t_c. Returns at most n_fs tokens in their original rank
    order; warns when the ranking cannot supply n_fs survivors.
    """
    if not 0 < t_c <= 1:
        raise ValidationError(f"t_c must be in (0, 1], got {t_c}")
    keep = np.flatnonzero(ranked.concentration <= t_c)[:n_fs]
    if keep.size < n_fs:
        warnings.warn(
            f"only {keep.size} of the requested {n_fs} tokens survive the "
            f"concentration filter at t_c={t_c}"
        )
    return RankedTokens(
        tokens=tuple(ranked.tokens[i] for i in keep),
        step_slopes=ranked.step_slopes[keep],
        step_correlations=ranked.step_correlations[keep],
        concentration=ranked.concentration[keep],
    )


class ForwardSelector(BaseEstimator):
    """Estimator wrapper: rank tokens on fit, restrict DTM columns on transform.

    Ranking continues past n_fs when the concentration filter drops tokens,
    so the selected set has n_fs members whenever the vocabulary allows.
    """

    def __init__(self, n_fs: int = 250, t_c: float = 1.0):
        self.n_fs = n_fs
        self.t_c = t_c

    def fit(self, dtm: DocumentTermMatrix, pvlgd):
        pvlgd = np.asarray(pvlgd, dtype=float)
        if pvlgd.shape != (dtm.shape[0],):
            raise ValidationError("pvlgd must align with dtm rows")
        if dtm.shape[0] and pvlgd.std() == 0:
            raise ValidationError("pvlgd is constant; correlations are undefined")
        conc = sector_concentration(dtm)
        idx, slopes, corrs = [], [], []
        survivors = 0
        for j, beta, corr in _forward_steps(dtm, pvlgd):
            idx.append(j)
            slopes.append(beta)
            corrs.append(corr)
            if conc[j] <= self.t_c:
                survivors += 1
                if survivors == self.n_fs:
                    break
        ranking = RankedTokens(
            tokens=tuple(dtm.vocabulary[j] for j in idx),
            step_slopes=np.array(slopes),
            step_correlations=np.array(corrs),
            concentration=conc[idx],
        )
        self.ranking_ = ranking
        self.selected_ = apply_concentration_filter(ranking, self.t_c, self.n_fs)
        return self

    def transform(self, dtm: DocumentTermMatrix) -> DocumentTermMatrix:
        if not hasattr(self, "selected_"):
            raise ValidationError("selector must be fit before transform")
        return dtm.restrict(list(self.selected_.tokens))

    def fit_transform(self, dtm: DocumentTermMatrix, pvlgd) -> DocumentTermMatrix:
        return self.fit(dtm, pvlgd).transform(dtm)
