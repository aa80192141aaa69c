"""Lasso text->PVLGD mapping with sector intercepts.

Coordinate descent on the Gram system minimizing

    (1/2n) ||y - X beta||^2 + lambda * sum_j |beta_j|

where X holds the token counts (standardized to unit variance) plus one dummy
per sector (centered, not scaled). Every column is penalized; a global
unpenalized intercept is absorbed by centering, and the reported per-sector
intercept is intercept + dummy coefficient. The penalty is chosen by K-fold
cross validation over a log-spaced path from lambda_max down.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConvergenceError, ValidationError
from .text import DocumentTermMatrix

__all__ = ["LassoFit", "fit_lasso", "coordinate_descent", "lambda_grid_for"]

_TOL = 1e-9
_MAX_SWEEPS = 20_000


@dataclass(frozen=True)
class LassoFit:
    """Fitted mapping: per-sector intercepts plus sparse token coefficients."""

    tokens: tuple[str, ...]
    coefficients: np.ndarray
    sector_intercepts: dict[str, float]
    penalty: float
    r_squared: float
    hyperparams: dict = field(default_factory=dict)
    training_window: tuple[str, str] | None = None

    def __post_init__(self):
        coef = np.asarray(self.coefficients, dtype=float)
        object.__setattr__(self, "coefficients", coef)
        if coef.shape != (len(self.tokens),):
            raise ValidationError("coefficients must align with tokens")

    @property
    def mean_intercept(self) -> float:
        return float(np.mean(list(self.sector_intercepts.values())))

    def nonzero(self) -> dict[str, float]:
        return {
            t: float(b) for t, b in zip(self.tokens, self.coefficients) if b != 0.0
        }


def _soft(x: float, thresh: float) -> float:
    if x > thresh:
        return x - thresh
    if x < -thresh:
        return x + thresh
    return 0.0


def coordinate_descent(
    G: np.ndarray,
    c: np.ndarray,
    yty: float,
    n: int,
    lam: float,
    beta: np.ndarray | None = None,
    tol: float = _TOL,
    max_sweeps: int = _MAX_SWEEPS,
) -> np.ndarray:
    """Cyclic coordinate descent on the Gram system G = X'X, c = X'y.

    The objective is checked after every sweep and must never increase;
    convergence is max coordinate change < tol.
    """
    p = G.shape[0]
    beta = np.zeros(p) if beta is None else beta.copy()
    diag = np.ascontiguousarray(np.diag(G))
    nl = n * lam

    def objective(b):
        return (yty - 2.0 * b @ c + b @ G @ b) / (2.0 * n) + lam * np.abs(b).sum()

    prev_obj = objective(beta)
    for sweep in range(max_sweeps):
        max_delta = 0.0
        for j in range(p):
            if diag[j] <= 0.0:
                continue
            old = beta[j]
            rho = c[j] - G[j] @ beta + diag[j] * old
            new = _soft(rho, nl) / diag[j]
            if new != old:
                beta[j] = new
                delta = abs(new - old)
                if delta > max_delta:
                    max_delta = delta
        obj = objective(beta)
        if obj > prev_obj + 1e-10 * (1.0 + abs(prev_obj)):
            raise ConvergenceError(
                f"lasso objective increased within a sweep ({prev_obj} -> {obj})"
            )
        prev_obj = obj
        if max_delta < tol:
            return beta
    raise ConvergenceError(
        f"coordinate descent did not converge in {max_sweeps} sweeps "
        f"(lambda={lam:.3e}, last max step {max_delta:.3e})"
    )


def lambda_grid_for(Xc: np.ndarray, yc: np.ndarray, n_lambdas: int = 100,
                    min_ratio: float = 1e-4) -> np.ndarray:
    """Log-spaced penalty path from lambda_max = max|X'y|/n downward."""
    n = Xc.shape[0]
    lam_max = np.abs(Xc.T @ yc).max() / n
    if lam_max <= 0:
        raise ValidationError("degenerate design: lambda_max is zero")
    return np.geomspace(lam_max, lam_max * min_ratio, n_lambdas)


def _path(G, c, yty, n, lambdas) -> np.ndarray:
    """Solve the descending penalty path with warm starts; returns (L, p)."""
    betas = np.empty((len(lambdas), G.shape[0]))
    beta = np.zeros(G.shape[0])
    for i, lam in enumerate(lambdas):
        beta = coordinate_descent(G, c, yty, n, lam, beta)
        betas[i] = beta
    return betas


def _fold_assignment(n: int, folds: int, seed: int) -> np.ndarray:
    """Deterministic fold label per row index for the given seed."""
    order = np.random.default_rng(seed).permutation(n)
    labels = np.empty(n, dtype=int)
    labels[order] = np.arange(n) % folds
    return labels


def _design(dtm: DocumentTermMatrix) -> tuple[np.ndarray, list[str], np.ndarray]:
    """Token counts + sector dummies; returns (X, sector labels, scale)."""
    X_tok = dtm.dense()
    sectors = sorted(set(dtm.sector_of_row))
    dummies = np.column_stack(
        [np.asarray([s == k for s in dtm.sector_of_row], dtype=float) for k in sectors]
    )
    std = X_tok.std(axis=0)
    scale = np.where(std > 0, std, 1.0)
    X = np.column_stack([X_tok / scale, dummies])
    return X, sectors, scale


def fit_lasso(
    dtm: DocumentTermMatrix,
    target,
    folds: int = 10,
    lambda_grid=None,
    seed: int = 0,
    hyperparams: dict | None = None,
    training_window: tuple[str, str] | None = None,
) -> LassoFit:
    """Cross-validated lasso of PVLGD on token counts and sector dummies.

    Standardization and the penalty grid are computed on the full training
    data; each fold refits the path on its own rows (warm-started) and the
    penalty minimizing mean out-of-fold MSE wins, larger penalty on ties.
    """
    y = np.asarray(target, dtype=float)
    n = dtm.shape[0]
    if y.shape != (n,):
        raise ValidationError("target must align with dtm rows")
    if n < folds:
        raise ValidationError(f"need at least folds={folds} rows, got {n}")
    if y.std() == 0:
        raise ValidationError("target variance is zero")
    if not np.all(np.isfinite(y)):
        raise ValidationError("target contains non-finite values")

    X, sectors, scale = _design(dtm)
    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    Xc = X - x_mean
    yc = y - y_mean

    lambdas = (
        np.asarray(lambda_grid, dtype=float)
        if lambda_grid is not None
        else lambda_grid_for(Xc, yc)
    )
    if lambdas.ndim != 1 or np.any(np.diff(lambdas) > 0):
        raise ValidationError("lambda grid must be non-increasing")

    if len(lambdas) > 1:
        fold_of = _fold_assignment(n, folds, seed)
        mse = np.zeros(len(lambdas))
        for k in range(folds):
            test = fold_of == k
            train = ~test
            Xf = Xc[train]
            yf = yc[train]
            f_xm = Xf.mean(axis=0)
            f_ym = yf.mean()
            Xf = Xf - f_xm
            yf = yf - f_ym
            betas = _path(Xf.T @ Xf, Xf.T @ yf, yf @ yf, Xf.shape[0], lambdas)
            pred = (Xc[test] - f_xm) @ betas.T + f_ym
            mse += ((pred - yc[test, None]) ** 2).sum(axis=0)
        mse /= n
        best = int(np.argmin(mse))  # descending grid: ties go to larger penalty
        lambdas = lambdas[: best + 1]

    betas = _path(Xc.T @ Xc, Xc.T @ yc, yc @ yc, n, lambdas)
    beta_std = betas[-1]
    lam_star = float(lambdas[-1])

    p_tok = len(dtm.vocabulary)
    coef_tok = beta_std[:p_tok] / scale
    coef_dum = beta_std[p_tok:]
    intercept = y_mean - x_mean[:p_tok] @ beta_std[:p_tok] - x_mean[p_tok:] @ coef_dum
    sector_intercepts = {k: float(intercept + b) for k, b in zip(sectors, coef_dum)}

    fitted = X[:, :p_tok] @ beta_std[:p_tok] + X[:, p_tok:] @ coef_dum + intercept
    r2 = 1.0 - (y - fitted).var() / y.var()

    return LassoFit(
        tokens=tuple(dtm.vocabulary),
        coefficients=coef_tok,
        sector_intercepts=sector_intercepts,
        penalty=lam_star,
        r_squared=float(r2),
        hyperparams=dict(hyperparams or {}),
        training_window=training_window,
    )
