import numpy as np
import pytest
import scipy.sparse as sp

from credittext.exceptions import ValidationError
from credittext.lasso import (
    coordinate_descent,
    fit_lasso,
    lambda_grid_for,
)
from credittext.text import DocumentTermMatrix


def make_dtm(X, sectors=None, tokens=None):
    n, p = X.shape
    tokens = tokens or [f"tok{j:03d}" for j in range(p)]
    sectors = sectors or ["s0"] * n
    return DocumentTermMatrix(
        row_ids=[f"r{i}" for i in range(n)],
        vocabulary=tokens,
        counts=sp.csr_matrix(np.asarray(X)),
        sector_of_row=sectors,
    )


def prox_grad_lasso(X, y, lam, iters=300_000, tol=1e-13):
    """ISTA oracle for (1/2n)||y - Xb||^2 + lam*|b|_1."""
    n, p = X.shape
    step = n / np.linalg.norm(X, 2) ** 2
    beta = np.zeros(p)
    for _ in range(iters):
        grad = X.T @ (X @ beta - y) / n
        z = beta - step * grad
        new = np.sign(z) * np.maximum(np.abs(z) - lam * step, 0.0)
        if np.abs(new - beta).max() < tol:
            return new
        beta = new
    return beta


class TestCoordinateDescent:
    def test_matches_prox_grad_oracle(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(50, 5))
        y = X @ np.array([2.0, 0.0, -1.5, 0.0, 0.5]) + rng.normal(scale=0.3, size=50)
        lam_max = np.abs(X.T @ y).max() / 50
        G, c, yty = X.T @ X, X.T @ y, y @ y
        for lam in np.geomspace(lam_max * 0.9, lam_max * 1e-3, 10):
            got = coordinate_descent(G, c, yty, 50, lam)
            want = prox_grad_lasso(X, y, lam)
            np.testing.assert_allclose(got, want, atol=1e-4)

    def test_lambda_max_all_zero(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(40, 6))
        X -= X.mean(axis=0)
        y = rng.normal(size=40)
        y -= y.mean()
        lam_max = np.abs(X.T @ y).max() / 40
        beta = coordinate_descent(X.T @ X, X.T @ y, y @ y, 40, lam_max)
        assert np.all(beta == 0.0)

    def test_lambda_zero_is_least_squares(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(30, 4))
        y = X @ np.array([1.0, -2.0, 0.5, 3.0]) + rng.normal(scale=0.1, size=30)
        beta = coordinate_descent(X.T @ X, X.T @ y, y @ y, 30, 0.0)
        want = np.linalg.lstsq(X, y, rcond=None)[0]
        np.testing.assert_allclose(beta, want, atol=1e-6)


class TestFitLasso:
    def _problem(self, seed=3, n=60, p=5):
        rng = np.random.default_rng(seed)
        X = rng.poisson(2.0, size=(n, p)).astype(float)
        y = 5.0 + X @ np.array([1.0, 0.0, -0.8, 0.0, 0.4])[:p] + rng.normal(scale=0.2, size=n)
        return X, y

    def test_unpenalized_limit_matches_ols(self):
        X, y = self._problem()
        dtm = make_dtm(X)
        fit = fit_lasso(dtm, y, folds=5, lambda_grid=np.array([0.0]))
        design = np.column_stack([np.ones(len(y)), X])
        ols = np.linalg.lstsq(design, y, rcond=None)[0]
        np.testing.assert_allclose(fit.sector_intercepts["s0"], ols[0], atol=1e-6)
        np.testing.assert_allclose(fit.coefficients, ols[1:], atol=1e-6)
        assert fit.r_squared > 0.9

    def test_lambda_above_max_zeros_everything(self):
        X, y = self._problem(seed=4)
        dtm = make_dtm(X)
        Xc = (X / X.std(axis=0))
        Xc = Xc - Xc.mean(axis=0)
        lam_max = np.abs(Xc.T @ (y - y.mean())).max() / len(y)
        fit = fit_lasso(dtm, y, folds=5, lambda_grid=np.array([lam_max * 1.01]))
        assert np.all(fit.coefficients == 0.0)
        assert fit.sector_intercepts["s0"] == pytest.approx(y.mean())

    def test_cv_is_deterministic_in_seed(self):
        X, y = self._problem(seed=5)
        dtm = make_dtm(X)
        a = fit_lasso(dtm, y, folds=5, seed=11)
        b = fit_lasso(dtm, y, folds=5, seed=11)
        assert a.penalty == b.penalty
        np.testing.assert_array_equal(a.coefficients, b.coefficients)

    def test_sector_dummies_are_penalizable(self):
        # two sectors with identical conditional distributions: large penalty
        # shrinks the sector split to nothing
        X, y = self._problem(seed=6, n=80)
        sectors = ["a"] * 40 + ["b"] * 40
        dtm = make_dtm(X, sectors=sectors)
        Xs = X / X.std(axis=0)
        D = np.column_stack([np.arange(80) < 40, np.arange(80) >= 40]).astype(float)
        full = np.column_stack([Xs, D])
        full -= full.mean(axis=0)
        lam_max = np.abs(full.T @ (y - y.mean())).max() / 80
        fit = fit_lasso(dtm, y, folds=5, lambda_grid=np.array([lam_max * 1.01]))
        assert fit.sector_intercepts["a"] == fit.sector_intercepts["b"]

    def test_r_squared_definition(self):
        X, y = self._problem(seed=7)
        dtm = make_dtm(X)
        fit = fit_lasso(dtm, y, folds=5)
        fitted = fit.sector_intercepts["s0"] + X @ fit.coefficients
        want = 1.0 - (y - fitted).var() / y.var()
        assert fit.r_squared == pytest.approx(want, abs=1e-12)

    def test_degenerate_target_errors(self):
        X, _ = self._problem()
        with pytest.raises(ValidationError, match="variance"):
            fit_lasso(make_dtm(X), np.ones(len(X)), folds=5)

    def test_too_few_rows(self):
        X, y = self._problem(n=4)
        with pytest.raises(ValidationError, match="folds"):
            fit_lasso(make_dtm(X), y, folds=10)

    def test_grid_shape(self):
        X, y = self._problem(seed=9)
        Xc = X / X.std(axis=0)
        Xc -= Xc.mean(axis=0)
        grid = lambda_grid_for(Xc, y - y.mean())
        assert len(grid) == 100
        assert grid[0] / grid[-1] == pytest.approx(1e4)
        assert np.all(np.diff(grid) < 0)
