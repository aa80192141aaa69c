import json

import numpy as np
import pandas as pd
import pytest

from credittext.cli import main
from credittext.synth import generate_synthetic_universe


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("bundle")
    bundle = generate_synthetic_universe(
        seed=3, n_entities=12, n_months=18, vocab_size=60, n_informative=8,
        noise_scale=0.05,
    )
    bundle.write_to(d)
    return d


class TestPrice:
    def test_single_quote_json(self, capsys):
        assert main(["price", "--spread-bp", "100", "--rate", "0.0226"]) == 0
        record = json.loads(capsys.readouterr().out)
        assert record["pvlgd"] == pytest.approx(4.517, abs=0.01)
        assert record["intensity"] == pytest.approx(0.017, abs=1e-3)

    def test_batch_mode(self, tmp_path):
        src = tmp_path / "in.csv"
        out = tmp_path / "out.csv"
        pd.DataFrame(
            {"entity_id": ["A", "B"], "date": ["2015-01-02"] * 2,
             "spread_bp": [100.0, 600.0]}
        ).to_csv(src, index=False)
        assert main(["price", "--input", str(src), "--output", str(out)]) == 0
        got = pd.read_csv(out)
        assert list(got.columns) == ["entity_id", "date", "spread_bp", "intensity", "pvlgd"]
        assert got["pvlgd"].iloc[1] == pytest.approx(22.150, abs=0.01)

    def test_validation_exit_code(self, capsys):
        assert main(["price", "--spread-bp", "-5"]) == 2

    def test_no_input_is_validation_failure(self):
        assert main(["price"]) == 2


class TestTokenizeSelect:
    def test_tokenize_then_select(self, data_dir, tmp_path):
        dtm_path = tmp_path / "dtm.csv"
        vocab_path = tmp_path / "vocab.txt"
        rc = main([
            "tokenize", "--transcripts", str(data_dir / "transcripts.csv"),
            "--output-dtm", str(dtm_path), "--output-vocab", str(vocab_path),
            "--top-n", "80",
        ])
        assert rc == 0
        triplets = pd.read_csv(dtm_path)
        assert set(triplets.columns) == {"call_id", "token", "count"}
        vocab = vocab_path.read_text().split()
        assert len(vocab) <= 80

        # pvlgd per call from the daily file (month-end proxy is fine here)
        transcripts = pd.read_csv(data_dir / "transcripts.csv")
        daily = pd.read_csv(data_dir / "cds_daily.csv")
        from credittext.pipeline import align_actual_pvlgd, price_spreads
        from credittext.pricing import ContractSpec

        priced = price_spreads(daily, ContractSpec(risk_free_rate=0.0226))
        aligned = align_actual_pvlgd(transcripts, priced)
        pv_path = tmp_path / "pv.csv"
        aligned.rename(columns={"actual_pvlgd": "pvlgd"}).merge(
            transcripts[["call_id", "sector"]], on="call_id"
        )[["call_id", "pvlgd", "sector"]].to_csv(pv_path, index=False)

        out = tmp_path / "ranked.csv"
        rc = main([
            "select", "--dtm", str(dtm_path), "--vocab", str(vocab_path),
            "--pvlgd", str(pv_path), "--n-fs", "10", "--tc", "1.0",
            "--output", str(out),
        ])
        assert rc == 0
        ranked = pd.read_csv(out)
        assert list(ranked.columns) == ["token", "rank", "slope", "correlation",
                                        "concentration"]
        assert len(ranked) == 10


class TestFitScoreBacktest:
    def test_fit_full_sample_and_score(self, data_dir, tmp_path):
        model_path = tmp_path / "model.json"
        scores_path = tmp_path / "scores.csv"
        rc = main([
            "fit", "--transcripts", str(data_dir / "transcripts.csv"),
            "--cds", str(data_dir / "cds_daily.csv"),
            "--top-n", "80", "--n-fs", "15", "--folds", "4",
            "--model-out", str(model_path), "--scores-out", str(scores_path),
        ])
        assert rc == 0
        model = json.loads(model_path.read_text())
        assert model["r_squared"] > 0.5
        scores = pd.read_csv(scores_path)
        assert {"entity_id", "date", "actual_pvlgd", "implied_pvlgd",
                "credit_score", "model_id"} <= set(scores.columns)
        np.testing.assert_allclose(
            scores["credit_score"],
            scores["actual_pvlgd"] - scores["implied_pvlgd"],
            atol=1e-12,
        )

        out = tmp_path / "rescored.csv"
        rc = main([
            "score", "--model", str(model_path),
            "--transcripts", str(data_dir / "transcripts.csv"),
            "--cds", str(data_dir / "cds_daily.csv"),
            "--output", str(out),
        ])
        assert rc == 0
        rescored = pd.read_csv(out).rename(columns={"quote_date": "date"})
        joined = rescored.merge(scores, on=["entity_id", "date"],
                                suffixes=("_new", "_fit"))
        assert len(joined) == len(scores)
        np.testing.assert_allclose(
            joined["implied_pvlgd_new"], joined["implied_pvlgd_fit"], atol=1e-8
        )

    def test_fit_rolling(self, data_dir, tmp_path):
        scores_path = tmp_path / "rolling_scores.csv"
        rc = main([
            "fit", "--rolling", "--transcripts", str(data_dir / "transcripts.csv"),
            "--cds", str(data_dir / "cds_daily.csv"),
            "--top-n", "60", "--n-fs", "10", "--folds", "2",
            "--lookback", "6", "--update", "12", "--first-month", "2010-07",
            "--scores-out", str(scores_path),
        ])
        assert rc == 0
        scores = pd.read_csv(scores_path)
        assert (scores["month"] >= "2010-07").all()

    def test_rolling_requires_first_month(self, data_dir, tmp_path):
        rc = main([
            "fit", "--rolling", "--transcripts", str(data_dir / "transcripts.csv"),
            "--cds", str(data_dir / "cds_daily.csv"),
            "--scores-out", str(tmp_path / "x.csv"),
        ])
        assert rc == 2

    def test_backtest_and_simulate(self, data_dir, tmp_path):
        from credittext.pipeline import month_end_panel, price_spreads
        from credittext.pricing import ContractSpec

        daily = price_spreads(pd.read_csv(data_dir / "cds_daily.csv"),
                              ContractSpec(risk_free_rate=0.0226))
        monthly = month_end_panel(daily)
        monthly_path = tmp_path / "monthly.csv"
        monthly.to_csv(monthly_path, index=False)

        rng = np.random.default_rng(0)
        scores = monthly.assign(credit_score=rng.normal(size=len(monthly)))
        scores_path = tmp_path / "scores.csv"
        scores[["entity_id", "month", "credit_score"]].to_csv(scores_path, index=False)

        config_path = tmp_path / "bounds.json"
        config_path.write_text(json.dumps(
            {"lower": -0.3, "upper": 0.3, "short_limit": -2.0, "long_limit": 2.0}
        ))
        returns_path = tmp_path / "returns.csv"
        summary_path = tmp_path / "summary.json"
        rc = main([
            "backtest", "--scores", str(scores_path), "--pvlgd", str(monthly_path),
            "--config", str(config_path), "--trials", "10",
            "--returns-out", str(returns_path), "--summary-out", str(summary_path),
        ])
        assert rc == 0
        summary = json.loads(summary_path.read_text())
        assert "annualized_return" in summary and "structures" in summary
        assert len(pd.read_csv(returns_path)) > 0

        null_path = tmp_path / "null.csv"
        rc = main([
            "simulate", "--scores", str(scores_path), "--pvlgd", str(monthly_path),
            "--config", str(config_path), "--trials", "5", "--seed", "1",
            "--output", str(null_path),
        ])
        assert rc == 0
        assert len(pd.read_csv(null_path)) == 5


class TestRegress:
    def test_regress_from_files(self, tmp_path):
        rng = np.random.default_rng(1)
        n = 400
        data = pd.DataFrame(
            {
                "entity_id": rng.integers(0, 20, n).astype(str),
                "month": rng.integers(0, 12, n).astype(str),
                "x": rng.normal(size=n),
            }
        )
        data["y"] = 2.0 * data["x"] + rng.normal(size=n)
        data_path = tmp_path / "data.csv"
        data.to_csv(data_path, index=False)
        spec_path = tmp_path / "spec.json"
        spec_path.write_text(json.dumps({"dependent": "y", "regressors": ["x"]}))
        out = tmp_path / "table.csv"
        rc = main(["regress", "--spec", str(spec_path), "--data", str(data_path),
                   "--output", str(out)])
        assert rc == 0
        table = pd.read_csv(out)
        row = table[table["regressor"] == "x"].iloc[0]
        assert row["coef"] == pytest.approx(2.0, abs=0.2)


class TestJointTest:
    def test_prints_max_p(self, capsys):
        rc = main(["jointtest", "--k", "1", "--n", "15", "--p", "0.05",
                   "--draws", "20000", "--seed", "2"])
        assert rc == 0
        out = json.loads(capsys.readouterr().out)
        assert out["max_p_value"] == pytest.approx(0.3658, abs=0.02)


class TestSynthAndPipeline:
    def test_synth_writes_bundle(self, tmp_path):
        rc = main(["synth", "--seed", "4", "--entities", "4", "--months", "8",
                   "--vocab", "30", "--outdir", str(tmp_path / "u")])
        assert rc == 0
        assert (tmp_path / "u" / "transcripts.csv").exists()

    def test_pipeline_end_to_end(self, data_dir, tmp_path):
        outdir = tmp_path / "run"
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "top_n": [60], "n_fs": [10], "t_c": [1.0],
            "bounds": {
                "IG": {"lower": -0.3, "upper": 0.3, "short_limit": -4.0,
                       "long_limit": 4.0},
                "HY": {"lower": -0.3, "upper": 0.3, "short_limit": -2.0,
                       "long_limit": 2.0},
            },
            "enforce_menus": False,
        }))
        rc = main([
            "pipeline", "--data-dir", str(data_dir), "--outdir", str(outdir),
            "--config", str(cfg), "--horizon", "6", "--trials", "5",
        ])
        assert rc == 0
        summary = json.loads((outdir / "summary.json").read_text())
        assert summary
        for group in summary:
            assert summary[group]["lasso_r_squared"] > 0.3
            assert (outdir / f"scores_{group}.csv").exists()
        assert (outdir / "factor_panel.csv").exists()
