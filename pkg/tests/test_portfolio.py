import numpy as np
import pandas as pd
import pytest

from credittext.exceptions import InfeasibleProblem, ValidationError
from credittext.portfolio import (
    PortfolioProblem,
    PortfolioState,
    annualized_return,
    classify_weight_structure,
    event_study,
    portfolio_return_series,
    run_backtest,
    sharpe_ratio,
    solve_monthly_lp,
    sub_portfolio_change,
)
from credittext.simplex import solve_lp


def paper_problem():
    return PortfolioProblem(
        credit_scores=np.array([1.0, 1.0, -1.0]),
        pvlgds=np.array([10.0, 10.0, 5.0]),
        lower=-2.0,
        upper=0.5,
        short_limit=-2.0,
        long_limit=1.0,
    )


def random_problem(rng, n=4):
    return PortfolioProblem(
        credit_scores=rng.normal(size=n),
        pvlgds=rng.uniform(2.0, 40.0, size=n),
        lower=-float(rng.uniform(0.5, 2.0)),
        upper=float(rng.uniform(0.2, 1.0)),
        short_limit=-float(rng.uniform(1.0, 3.0)),
        long_limit=float(rng.uniform(1.0, 3.0)),
    )


def grid_oracle(problem, n_grid=41):
    """Brute-force: grid the first n-1 weights, solve the last from the
    zero-PVLGD equality, keep feasible combos, return the best objective."""
    cs, pv = problem.credit_scores, problem.pvlgds
    l, u = problem.lower, problem.upper
    L, U = problem.short_limit, problem.long_limit
    grids = [np.linspace(l, u, n_grid)] * (len(cs) - 1)
    best = -np.inf
    mesh = np.meshgrid(*grids, indexing="ij")
    flat = np.column_stack([m.ravel() for m in mesh])
    w_last = -(flat @ pv[:-1]) / pv[-1]
    ok = (w_last >= l) & (w_last <= u)
    W = np.column_stack([flat[ok], w_last[ok]])
    pos = np.where(W > 0, W, 0.0).sum(axis=1)
    neg = np.where(W < 0, W, 0.0).sum(axis=1)
    feas = (pos <= U + 1e-12) & (neg >= L - 1e-12)
    if feas.any():
        best = (W[feas] @ cs).max()
    return best


def random_feasible(problem, rng):
    cs, pv = problem.credit_scores, problem.pvlgds
    l, u = problem.lower, problem.upper
    for _ in range(2000):
        w = rng.uniform(l, u, size=len(cs) - 1)
        last = -(w @ pv[:-1]) / pv[-1]
        if not l <= last <= u:
            continue
        full = np.append(w, last)
        if full[full > 0].sum() <= problem.long_limit and full[full < 0].sum() >= problem.short_limit:
            return full
    return None


class TestSimplexCore:
    def test_simple_max(self):
        # max x+y st x+y<=1, x,y>=0
        x = solve_lp(np.array([1.0, 1.0]), A_ub=np.array([[1.0, 1.0]]), b_ub=[1.0])
        assert x.sum() == pytest.approx(1.0)

    def test_equality_and_redundant_row(self):
        # x + y = 1 stated twice (redundant)
        x = solve_lp(
            np.array([2.0, 1.0]),
            A_eq=np.array([[1.0, 1.0], [1.0, 1.0]]),
            b_eq=[1.0, 1.0],
        )
        np.testing.assert_allclose(x, [1.0, 0.0], atol=1e-9)

    def test_infeasible(self):
        with pytest.raises(InfeasibleProblem):
            solve_lp(
                np.array([1.0]),
                A_ub=np.array([[1.0]]), b_ub=[1.0],
                A_eq=np.array([[1.0]]), b_eq=[2.0],
            )

    def test_unbounded(self):
        with pytest.raises(ValueError, match="unbounded"):
            solve_lp(np.array([1.0]))


class TestMonthlyLp:
    def test_paper_worked_example(self):
        w = solve_monthly_lp(paper_problem())
        np.testing.assert_allclose(w, [0.5, 0.5, -2.0], atol=1e-9)
        assert w @ paper_problem().pvlgds == pytest.approx(0.0, abs=1e-9)
        assert w @ paper_problem().credit_scores == pytest.approx(3.0)

    def test_zero_scores_zero_objective(self):
        p = PortfolioProblem(
            credit_scores=np.zeros(4),
            pvlgds=np.array([5.0, 10.0, 20.0, 7.0]),
            lower=-1.0, upper=1.0, short_limit=-2.0, long_limit=2.0,
        )
        w = solve_monthly_lp(p)
        assert w @ p.credit_scores == pytest.approx(0.0)
        assert abs(w @ p.pvlgds) < 1e-8

    def test_matches_grid_oracle(self):
        rng = np.random.default_rng(0)
        for trial in range(30):
            p = random_problem(rng)
            w = solve_monthly_lp(p)
            obj = w @ p.credit_scores
            grid = grid_oracle(p)
            # LP optimum can never be beaten by a feasible grid point
            assert obj >= grid - 1e-9, f"trial {trial}"
            step = (p.upper - p.lower) / 40
            slack = step * (np.abs(p.credit_scores).sum()
                            + abs(p.credit_scores[-1]) * p.pvlgds.sum() / p.pvlgds[-1])
            assert obj <= grid + slack, f"trial {trial}"

    def test_beats_random_feasible_portfolios(self):
        rng = np.random.default_rng(1)
        p = random_problem(rng, n=6)
        w = solve_monthly_lp(p)
        obj = w @ p.credit_scores
        count = 0
        while count < 1000:
            cand = random_feasible(p, rng)
            if cand is None:
                break
            assert cand @ p.credit_scores <= obj + 1e-9
            count += 1

    def test_constraint_satisfaction(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            p = random_problem(rng, n=7)
            w = solve_monthly_lp(p)
            assert abs(w @ p.pvlgds) <= 1e-8 * max(np.abs(w) @ p.pvlgds, 1.0)
            assert w.max() <= p.upper + 1e-9 and w.min() >= p.lower - 1e-9
            assert w[w > 0].sum() <= p.long_limit + 1e-8
            assert w[w < 0].sum() >= p.short_limit - 1e-8

    def test_invalid_problems(self):
        with pytest.raises(ValidationError):
            PortfolioProblem(np.ones(3), np.ones(3), lower=0.1, upper=0.5,
                             short_limit=-1, long_limit=1)
        with pytest.raises(ValidationError):
            PortfolioProblem(np.ones(3), np.array([1.0, -2.0, 3.0]), lower=-1,
                             upper=1, short_limit=-1, long_limit=1)


class TestClassify:
    def test_paper_portfolio(self):
        assert classify_weight_structure([0.5, 0.5, -2.0], -2.0, 0.5) == (2, 1, 0)

    def test_all_zero(self):
        assert classify_weight_structure(np.zeros(5), -1.0, 1.0) == (0, 0, 0)

    def test_interior_balancer(self):
        assert classify_weight_structure([0.5, 0.5, -0.37], -2.0, 0.5) == (2, 0, 1)


class TestReturns:
    def test_paper_return_example(self):
        state = PortfolioState()
        state.push("2015-01", {"a": 0.5, "b": 0.5, "c": -2.0})
        pv_prev = {"a": 10.0, "b": 10.0, "c": 5.0}
        pv_now = {"a": 8.0, "b": 8.0, "c": 4.5}
        r = portfolio_return_series(state, pv_now, pv_prev)
        assert r == pytest.approx(0.01)

    def test_unchanged_pvlgds_zero(self):
        state = PortfolioState()
        state.push("2015-01", {"a": 1.0, "b": -0.5})
        pv = {"a": 3.0, "b": 6.0}
        assert portfolio_return_series(state, pv, pv) == 0.0

    def test_three_identical_subs_equal_one(self):
        w = {"a": 0.5, "b": -0.25}
        state = PortfolioState()
        state.push("m1", w)
        pv_prev = {"a": 10.0, "b": 20.0}
        pv_now = {"a": 9.0, "b": 21.0}
        single = -sub_portfolio_change(w, pv_now, pv_prev) / 100.0
        assert portfolio_return_series(state, pv_now, pv_prev) == pytest.approx(single)

    def test_zero_weight_name_ignored(self):
        w = {"a": 1.0, "ghost": 0.0}
        pv_prev = {"a": 10.0}
        pv_now = {"a": 9.0}
        assert sub_portfolio_change(w, pv_now, pv_prev) == pytest.approx(-1.0)

    def test_missing_held_name_errors(self):
        with pytest.raises(ValidationError, match="ghost"):
            sub_portfolio_change({"ghost": 1.0}, {"a": 1.0}, {"a": 1.0})


class TestAnnualized:
    def test_zero(self):
        assert annualized_return(np.zeros(24)) == 0.0

    def test_one_percent_monthly(self):
        assert annualized_return(np.full(12, 0.01)) == pytest.approx(1.01**12 - 1)

    def test_single_month(self):
        assert annualized_return([0.05]) == pytest.approx(1.05**12 - 1)

    def test_crash_rejected(self):
        with pytest.raises(ValidationError):
            annualized_return([-1.0])


class TestSharpe:
    def test_zero_mean(self):
        assert sharpe_ratio([0.01, -0.01, 0.01, -0.01]) == pytest.approx(0.0)

    def test_known_value(self):
        z = np.array([-1.0, 1.0]) / np.sqrt(2)
        r = 0.01 + 0.02 * z
        assert sharpe_ratio(r) == pytest.approx(0.5 * np.sqrt(12))

    def test_scale_invariance(self):
        rng = np.random.default_rng(3)
        r = rng.normal(0.01, 0.02, size=60)
        assert sharpe_ratio(3.0 * r) == pytest.approx(sharpe_ratio(r))

    def test_zero_variance_errors(self):
        with pytest.raises(ValidationError):
            sharpe_ratio(np.full(12, 0.01))


def backtest_inputs(n_entities=6, n_months=12, seed=4):
    rng = np.random.default_rng(seed)
    months = [str(pd.Period("2015-01", "M") + i) for i in range(n_months)]
    pv_rows, score_rows = [], []
    for e in range(n_entities):
        pv = 10.0 + e
        for m, month in enumerate(months):
            pv += rng.normal(scale=0.3)
            pv_rows.append({"entity_id": f"E{e}", "month": month, "pvlgd": pv})
            score_rows.append(
                {"entity_id": f"E{e}", "month": month, "credit_score": rng.normal()}
            )
    return pd.DataFrame(score_rows), pd.DataFrame(pv_rows), months


class TestBacktest:
    def test_ring_holds_last_three_formations(self):
        scores, pvlgd, months = backtest_inputs()
        state = run_backtest(scores, pvlgd, lower=-0.5, upper=0.5,
                             short_limit=-2.0, long_limit=2.0)
        formed = [m for m, _ in state.ring]
        # ring built at the last formation month holds t, t-1, t-2
        last = formed[0]
        idx = months.index(last)
        assert formed == [months[idx], months[idx - 1], months[idx - 2]]

    def test_returns_and_structures_populated(self):
        scores, pvlgd, months = backtest_inputs()
        state = run_backtest(scores, pvlgd, lower=-0.5, upper=0.5,
                             short_limit=-2.0, long_limit=2.0)
        assert len(state.returns) >= 5
        for n_u, n_l, n_o in state.structures.values():
            assert n_u + n_l + n_o >= 2

    def test_forward_coverage_filter(self):
        scores, pvlgd, months = backtest_inputs()
        # entity E0 loses data after month 6: not eligible at months 4+
        cut = months[7]
        pvlgd = pvlgd[~((pvlgd["entity_id"] == "E0") & (pvlgd["month"] >= cut))]
        state = run_backtest(scores, pvlgd, lower=-0.5, upper=0.5,
                             short_limit=-2.0, long_limit=2.0)
        for month, _ in state.ring:
            if month >= months[4]:
                for f_month, w in state.ring:
                    if f_month >= months[4]:
                        assert "E0" not in w


class TestEventStudy:
    def _panel(self, values, entity="E1", start="2013Q1"):
        periods = [str(pd.Period(start, "Q") + i) for i in range(len(values))]
        return pd.DataFrame(
            {"entity_id": entity, "period": periods, "pvlgd": values}
        )

    def test_single_event_normalized(self):
        vals = np.linspace(10, 26, 17)
        panel = self._panel(vals)
        out = event_study(panel, [("E1", str(pd.Period("2013Q1", "Q") + 8))])
        assert out["n_events"].iloc[0] == 1
        mid = out[out["offset"] == 0]["mean"].iloc[0]
        assert mid == pytest.approx(1.0)
        np.testing.assert_allclose(out["mean"], vals / vals[8], atol=1e-12)

    def test_constant_firm_flat_path(self):
        panel = self._panel(np.full(17, 5.0))
        out = event_study(panel, [("E1", str(pd.Period("2013Q1", "Q") + 8))])
        np.testing.assert_allclose(out["mean"], 1.0, atol=1e-12)

    def test_mirrored_paths_average_flat(self):
        # two firms whose normalized paths are mirror images around 1
        base = np.ones(17)
        dev = np.linspace(-0.3, 0.3, 17)
        p1 = self._panel(20.0 * (base + dev) / (base[8] + dev[8]), entity="A")
        p2 = self._panel(20.0 * (base - dev) / (base[8] - dev[8]), entity="B")
        panel = pd.concat([p1, p2], ignore_index=True)
        ev = str(pd.Period("2013Q1", "Q") + 8)
        out = event_study(panel, [("A", ev), ("B", ev)])
        np.testing.assert_allclose(out["mean"], 1.0, atol=1e-12)
        # band width from the 2-sample stdev
        expect_half = 1.96 * np.abs(np.vstack([
            (base + dev) / (base[8] + dev[8]),
            (base - dev) / (base[8] - dev[8]),
        ]).std(axis=0, ddof=1)) / np.sqrt(2)
        np.testing.assert_allclose(out["hi"] - out["mean"], expect_half, atol=1e-12)

    def test_incomplete_coverage_excluded(self):
        panel = self._panel(np.linspace(10, 20, 12))
        out = event_study(panel, [("E1", str(pd.Period("2013Q1", "Q") + 8))])
        assert out.empty
