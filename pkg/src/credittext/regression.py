"""Panel regressions with two-way clustered standard errors.

Supports the contemporaneous, forecasting, risk/fundamental channel, and
interaction specifications: lead changes in PVLGD regressed on levels,
contemporaneous changes, credit score, demeaned-decile interactions, and
controls, with entity+month clustering and optional two-way fixed effects.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .exceptions import ConvergenceError, ValidationError
from .factors import iqr_standardize, winsorize

__all__ = [
    "RegressionSpec",
    "RegressionResult",
    "ols_fit",
    "clustered_se",
    "within_transform",
    "run_spec",
    "add_lead_change",
    "add_contemporaneous_changes",
    "risk_measures",
]


@dataclass(frozen=True)
class RegressionSpec:
    """Declarative regression: columns, interactions, clustering, options."""

    dependent: str
    regressors: tuple[str, ...]
    interactions: tuple[tuple[str, str], ...] = ()
    cluster_dims: tuple[str, str] = ("entity_id", "month")
    fixed_effects: tuple[str, ...] = ()
    standardization: str = "none"
    winsorize_limits: tuple[float, float] | None = (0.01, 0.99)

    def __post_init__(self):
        for a, b in self.interactions:
            if a not in self.regressors or b not in self.regressors:
                raise ValidationError(
                    f"interaction ({a},{b}) components must be among regressors"
                )
        if self.standardization not in ("none", "iqr"):
            raise ValidationError("standardization must be 'none' or 'iqr'")
        bad = set(self.fixed_effects) - {"firm", "month"}
        if bad:
            raise ValidationError(f"unknown fixed effects {sorted(bad)}")


@dataclass
class RegressionResult:
    names: list[str]
    coefficients: np.ndarray
    std_errors: np.ndarray
    t_stats: np.ndarray
    r_squared: float
    n_obs: int
    metadata: dict = field(default_factory=dict)

    def table(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "regressor": self.names,
                "coef": self.coefficients,
                "se": self.std_errors,
                "t": self.t_stats,
            }
        )

    def __getitem__(self, name: str) -> tuple[float, float, float]:
        i = self.names.index(name)
        return (
            float(self.coefficients[i]),
            float(self.std_errors[i]),
            float(self.t_stats[i]),
        )


def _collinear_columns(X: np.ndarray, names: list[str]) -> list[str]:
    rank = np.linalg.matrix_rank(X)
    flagged = []
    for j in range(X.shape[1]):
        others = np.delete(X, j, axis=1)
        if np.linalg.matrix_rank(others) == rank:
            flagged.append(names[j])
    return flagged


def ols_fit(y, X, names: list[str] | None = None):
    """Least squares with an exact rank check.

    X must already include any intercept column. Returns (beta, residuals, r2).
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    names = names or [f"x{j}" for j in range(X.shape[1])]
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValidationError("X must be 2-D and aligned with y")
    rank = np.linalg.matrix_rank(X)
    if rank < X.shape[1]:
        raise ValidationError(
            f"design is rank deficient ({rank}/{X.shape[1]}); "
            f"collinear columns: {_collinear_columns(X, names)}"
        )
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    tss = ((y - y.mean()) ** 2).sum()
    r2 = 1.0 - (resid @ resid) / tss if tss > 0 else 0.0
    return beta, resid, float(r2)


def _cluster_meat(X: np.ndarray, resid: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, int]:
    """Sum over clusters of (X_g' u_g)(X_g' u_g)'; returns (meat, n clusters)."""
    scores = X * resid[:, None]
    frame = pd.DataFrame(scores)
    sums = frame.groupby(labels).sum().to_numpy()
    return sums.T @ sums, sums.shape[0]


def _one_way_cov(X, resid, labels, bread) -> tuple[np.ndarray, int]:
    n, k = X.shape
    meat, g = _cluster_meat(X, resid, labels)
    if g < 2:
        raise ValidationError("need at least two clusters per dimension")
    correction = (g / (g - 1)) * ((n - 1) / (n - k))
    return correction * bread @ meat @ bread, g


def clustered_se(X, resid, firm_ids, month_ids) -> np.ndarray:
    """Two-way clustered standard errors via inclusion-exclusion:
    V = V_firm + V_month - V_firm∩month, with a per-component small-sample
    correction G/(G-1)*(N-1)/(N-K). Any negative diagonal entry is floored at
    the intersection-only sandwich and flagged."""
    X = np.asarray(X, dtype=float)
    resid = np.asarray(resid, dtype=float)
    firm = np.asarray(firm_ids)
    month = np.asarray(month_ids)
    bread = np.linalg.inv(X.T @ X)
    v_firm, _ = _one_way_cov(X, resid, firm, bread)
    v_month, _ = _one_way_cov(X, resid, month, bread)
    both = pd.factorize(pd.Series(list(zip(firm, month))))[0]
    v_both, _ = _one_way_cov(X, resid, both, bread)
    var = np.diag(v_firm + v_month - v_both).copy()
    floor_var = np.diag(v_both)
    bad = var <= 0
    if bad.any():
        warnings.warn(
            f"{int(bad.sum())} two-way clustered variances were non-positive; "
            "floored at the intersection sandwich"
        )
        var[bad] = floor_var[bad]
    return np.sqrt(var)


def within_transform(panel: pd.DataFrame, columns, firm_col="entity_id",
                     time_col="month", tol: float = 1e-10,
                     max_iter: int = 1000) -> pd.DataFrame:
    """Two-way within transform by iterated demeaning over firm then month."""
    out = panel.copy()
    vals = out[list(columns)].to_numpy(dtype=float)
    firm = out[firm_col].to_numpy()
    time = out[time_col].to_numpy()
    for _ in range(max_iter):
        before = vals.copy()
        frame = pd.DataFrame(vals)
        vals = vals - frame.groupby(firm).transform("mean").to_numpy()
        frame = pd.DataFrame(vals)
        vals = vals - frame.groupby(time).transform("mean").to_numpy()
        if np.abs(vals - before).max() < tol:
            out[list(columns)] = vals
            return out
    raise ConvergenceError(f"within transform did not converge in {max_iter} iterations")


def add_lead_change(panel: pd.DataFrame, column: str = "pvlgd", horizon: int = 12,
                    entity_col: str = "entity_id", month_col: str = "month") -> pd.DataFrame:
    """Add `d_{column}_{horizon}` = value at t+horizon minus value at t."""
    out = panel.copy()
    name = f"d_{column}_{horizon}"
    parts = []
    for _, grp in out.groupby(entity_col):
        s = pd.Series(grp[column].to_numpy(dtype=float),
                      index=pd.PeriodIndex(grp[month_col], freq="M"))
        lead = s.reindex(s.index + horizon).to_numpy()
        parts.append(pd.Series(lead - s.to_numpy(), index=grp.index))
    out[name] = pd.concat(parts).sort_index()
    return out


def add_contemporaneous_changes(panel: pd.DataFrame, columns, horizon: int = 12,
                                entity_col: str = "entity_id",
                                month_col: str = "month") -> pd.DataFrame:
    """Add `d_{col}_{horizon}` for each column (changes over [t, t+horizon])."""
    out = panel
    for c in columns:
        out = add_lead_change(out, c, horizon, entity_col, month_col)
    return out


def run_spec(spec: RegressionSpec, data: pd.DataFrame) -> RegressionResult:
    """Materialize interactions, winsorize, optionally IQR-standardize, then
    fit with an intercept and cluster SEs on the spec's two dimensions."""
    for col in (spec.dependent, *spec.regressors, *spec.cluster_dims):
        if col not in data.columns:
            raise ValidationError(f"column {col!r} missing from data")

    df = data.copy()
    inter_names = []
    for a, b in spec.interactions:
        name = f"{a}_x_{b}"
        df[name] = df[a] * df[b]
        inter_names.append(name)

    used = [spec.dependent, *spec.regressors, *inter_names]
    keep = df[used].notna().all(axis=1)
    n_dropped = int((~keep).sum())
    df = df.loc[keep]
    if df.empty:
        raise ValidationError("no complete rows for this specification")

    if spec.winsorize_limits is not None:
        lo, hi = spec.winsorize_limits
        df = winsorize(df, lo, hi, columns=used)
    if spec.standardization == "iqr":
        for c in used:
            df[c] = iqr_standardize(df[c].to_numpy())

    if spec.fixed_effects:
        fe_map = {"firm": spec.cluster_dims[0], "month": spec.cluster_dims[1]}
        if set(spec.fixed_effects) == {"firm", "month"}:
            df = within_transform(df, used, fe_map["firm"], fe_map["month"])
        else:
            dim = fe_map[spec.fixed_effects[0]]
            grouped = df.groupby(dim)[used].transform("mean")
            df[used] = df[used].to_numpy() - grouped.to_numpy()

    names = ["const", *spec.regressors, *inter_names]
    X = np.column_stack(
        [np.ones(len(df))] + [df[c].to_numpy(dtype=float) for c in names[1:]]
    )
    y = df[spec.dependent].to_numpy(dtype=float)
    beta, resid, r2 = ols_fit(y, X, names)
    se = clustered_se(X, resid, df[spec.cluster_dims[0]].to_numpy(),
                      df[spec.cluster_dims[1]].to_numpy())
    return RegressionResult(
        names=names,
        coefficients=beta,
        std_errors=se,
        t_stats=beta / se,
        r_squared=r2,
        n_obs=len(df),
        metadata={
            "dropped_missing_rows": n_dropped,
            "fixed_effects": list(spec.fixed_effects),
            "clustering": list(spec.cluster_dims),
            "standardization": spec.standardization,
            "df_convention": "K counts regression columns only; absorbed "
                             "effects are not subtracted",
        },
    )


def run_interaction_pair(spec: RegressionSpec, data: pd.DataFrame
                         ) -> tuple[RegressionResult, RegressionResult]:
    """Run an interaction spec and its plain counterpart on the identical row
    sample (rows complete for the full interaction column set)."""
    from dataclasses import replace

    if not spec.interactions:
        raise ValidationError("spec has no interactions")
    used = [spec.dependent, *spec.regressors]
    for a, b in spec.interactions:
        used.extend([a, b])
    keep = data[list(dict.fromkeys(used))].notna().all(axis=1)
    sample = data.loc[keep]
    with_res = run_spec(spec, sample)
    plain_res = run_spec(replace(spec, interactions=()), sample)
    return with_res, plain_res


def risk_measures(monthly: pd.DataFrame, horizon: int = 12,
                  entity_col: str = "entity_id", month_col: str = "month",
                  column: str = "pvlgd") -> pd.DataFrame:
    """Forward-looking risk of the PVLGD path over (t, t+horizon].

    RiskVol: stdev of the monthly changes; RiskMaxIncr: largest monthly
    change; RiskCumSum: largest cumulative change from t.
    """
    out = []
    for entity, grp in monthly.groupby(entity_col):
        grp = grp.sort_values(month_col)
        idx = pd.PeriodIndex(grp[month_col], freq="M")
        s = pd.Series(grp[column].to_numpy(dtype=float), index=idx)
        s = s.reindex(pd.period_range(idx.min(), idx.max(), freq="M"))
        vals = s.to_numpy()
        n = len(vals)
        vol = np.full(n, np.nan)
        max_incr = np.full(n, np.nan)
        max_cum = np.full(n, np.nan)
        for i in range(n):
            path = vals[i : i + horizon + 1]
            if len(path) < horizon + 1 or np.isnan(path).any():
                continue
            changes = np.diff(path)
            vol[i] = changes.std(ddof=1)
            max_incr[i] = changes.max()
            max_cum[i] = np.cumsum(changes).max()
        out.append(
            pd.DataFrame(
                {
                    entity_col: entity,
                    month_col: s.index.astype(str),
                    "RiskVol": vol,
                    "RiskMaxIncr": max_incr,
                    "RiskCumSum": max_cum,
                }
            )
        )
    return pd.concat(out, ignore_index=True) if out else pd.DataFrame(
        columns=[entity_col, month_col, "RiskVol", "RiskMaxIncr", "RiskCumSum"]
    )
