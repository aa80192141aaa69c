"""Command-line interface.

Verbs: price, tokenize, select, fit, score, factors, regress, backtest,
simulate, jointtest, synth, pipeline. Exit codes: 0 success, 2 validation
failure, 3 infeasibility or convergence failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from .exceptions import ConvergenceError, InfeasibleProblem, ValidationError
from .lasso import LassoFit
from .model import EXPANDING, LassoCreditModel, RollingConfig, credit_score
from .nullsim import JointTestConfig, correlated_bernoulli_pmax
from .pricing import ContractSpec, SpreadConverter, pv01
from .selection import ForwardSelector, sector_concentration
from .text import CreditWindowVectorizer, DocumentTermMatrix, WordLists, build_dtm

log = logging.getLogger(__name__)


def _word_lists(args) -> WordLists | None:
    if getattr(args, "credit_words", None) or getattr(args, "excluded_phrases", None):
        if not (args.credit_words and args.excluded_phrases):
            raise ValidationError("--credit-words and --excluded-phrases go together")
        return WordLists.from_files(args.credit_words, args.excluded_phrases)
    return None


def _contract(args) -> ContractSpec:
    return ContractSpec(
        risk_free_rate=args.rate,
        maturity_years=args.maturity,
        coupon_interval_years=args.interval,
        loss_given_default=args.lgd,
    )


def cmd_price(args) -> int:
    spec = _contract(args)
    conv = SpreadConverter(spec)
    if args.input:
        frame = pd.read_csv(args.input)
        h = conv.intensity_from_spread(frame["spread_bp"].to_numpy(float))
        frame["intensity"] = h
        frame["pvlgd"] = conv.pvlgd_from_spread(frame["spread_bp"].to_numpy(float))
        frame.to_csv(args.output or sys.stdout, index=False)
        return 0
    if args.spread_bp is None:
        raise ValidationError("provide --spread-bp or --input")
    h = conv.intensity_from_spread(args.spread_bp)
    record = {
        "spread_bp": args.spread_bp,
        "intensity": h,
        "pv01": pv01(h, spec),
        "pvlgd": conv.pvlgd_from_spread(args.spread_bp),
    }
    print(json.dumps(record, indent=2))
    return 0


def _dtm_to_triplets(dtm: DocumentTermMatrix) -> pd.DataFrame:
    coo = dtm.counts.tocoo()
    return pd.DataFrame(
        {
            "call_id": [dtm.row_ids[i] for i in coo.row],
            "token": [dtm.vocabulary[j] for j in coo.col],
            "count": coo.data,
        }
    )


def _dtm_from_triplets(triplets: pd.DataFrame, vocabulary: list[str],
                       sectors: dict[str, str] | None = None) -> DocumentTermMatrix:
    import scipy.sparse as sp

    row_ids = list(dict.fromkeys(triplets["call_id"].astype(str)))
    row_of = {r: i for i, r in enumerate(row_ids)}
    col_of = {t: j for j, t in enumerate(vocabulary)}
    rows = [row_of[str(r)] for r in triplets["call_id"]]
    cols = [col_of[t] for t in triplets["token"]]
    counts = sp.csr_matrix(
        (triplets["count"].to_numpy(), (rows, cols)),
        shape=(len(row_ids), len(vocabulary)), dtype=np.int64,
    )
    sectors = sectors or {}
    return DocumentTermMatrix(
        row_ids=row_ids,
        vocabulary=list(vocabulary),
        counts=counts,
        sector_of_row=[sectors.get(r, "") for r in row_ids],
    )


def cmd_tokenize(args) -> int:
    from .pipeline import transcripts_from_frame

    frame = pd.read_csv(args.transcripts)
    calls = transcripts_from_frame(frame)
    vec = CreditWindowVectorizer(word_lists=_word_lists(args), top_n=args.top_n)
    dtm = vec.fit_transform(calls)
    _dtm_to_triplets(dtm).to_csv(args.output_dtm, index=False)
    Path(args.output_vocab).write_text("\n".join(dtm.vocabulary) + "\n")
    print(f"wrote {dtm.shape[0]} calls x {dtm.shape[1]} tokens")
    return 0


def cmd_select(args) -> int:
    triplets = pd.read_csv(args.dtm)
    vocabulary = Path(args.vocab).read_text().split()
    pv = pd.read_csv(args.pvlgd)
    sectors = None
    if "sector" in pv.columns:
        sectors = dict(zip(pv["call_id"].astype(str), pv["sector"].astype(str)))
    dtm = _dtm_from_triplets(triplets, vocabulary, sectors)
    target = pv.set_index(pv["call_id"].astype(str)).loc[dtm.row_ids, "pvlgd"].to_numpy()
    selector = ForwardSelector(n_fs=args.n_fs, t_c=args.tc).fit(dtm, target)
    sel = selector.selected_
    pd.DataFrame(
        {
            "token": sel.tokens,
            "rank": np.arange(1, len(sel) + 1),
            "slope": sel.step_slopes,
            "correlation": sel.step_correlations,
            "concentration": sel.concentration,
        }
    ).to_csv(args.output, index=False)
    return 0


def _fit_to_json(fit: LassoFit) -> dict:
    return {
        "tokens": list(fit.tokens),
        "nonzero_coefficients": fit.nonzero(),
        "sector_intercepts": fit.sector_intercepts,
        "penalty": fit.penalty,
        "r_squared": fit.r_squared,
        "hyperparams": fit.hyperparams,
        "training_window": fit.training_window,
    }


def _fit_from_json(raw: dict) -> LassoFit:
    coefs = raw["nonzero_coefficients"]
    return LassoFit(
        tokens=tuple(raw["tokens"]),
        coefficients=np.array([coefs.get(t, 0.0) for t in raw["tokens"]]),
        sector_intercepts=dict(raw["sector_intercepts"]),
        penalty=raw["penalty"],
        r_squared=raw["r_squared"],
        hyperparams=raw.get("hyperparams", {}),
        training_window=tuple(raw["training_window"]) if raw.get("training_window") else None,
    )


def cmd_fit(args) -> int:
    from .pipeline import full_sample_scores, price_spreads, rolling_sample_scores

    transcripts = pd.read_csv(args.transcripts)
    daily = price_spreads(pd.read_csv(args.cds), _contract(args))
    lists = _word_lists(args)
    if args.rolling:
        lookback = EXPANDING if args.lookback == EXPANDING else int(args.lookback)
        cfg = RollingConfig(
            top_n=args.top_n, t_c=args.tc, n_fs=args.n_fs,
            lookback_months=lookback, update_frequency_months=args.update,
        )
        if not args.first_month:
            raise ValidationError("--rolling requires --first-month YYYY-MM")
        fits, scores = rolling_sample_scores(
            transcripts, daily, [cfg], first_training_month=args.first_month,
            word_lists=lists, folds=args.folds, seed=args.seed,
        )
        if args.model_out:
            Path(args.model_out).write_text(
                json.dumps([_fit_to_json(f.fit) for f in fits], indent=2)
            )
        out_cols = ["entity_id", "month", "actual_pvlgd", "implied_pvlgd",
                    "credit_score", "model_id"]
    else:
        fit, scores = full_sample_scores(
            transcripts, daily, top_n=args.top_n, t_c=args.tc, n_fs=args.n_fs,
            word_lists=lists, folds=args.folds, seed=args.seed,
        )
        if args.model_out:
            Path(args.model_out).write_text(json.dumps(_fit_to_json(fit), indent=2))
        scores["date"] = scores["quote_date"]
        out_cols = ["entity_id", "date", "actual_pvlgd", "implied_pvlgd",
                    "credit_score", "model_id"]
    scores[out_cols].to_csv(args.scores_out, index=False)
    print(f"wrote {len(scores)} scores to {args.scores_out}")
    return 0


def cmd_score(args) -> int:
    from .pipeline import align_actual_pvlgd, price_spreads, transcripts_from_frame

    fit = _fit_from_json(json.loads(Path(args.model).read_text()))
    transcripts = pd.read_csv(args.transcripts)
    daily = price_spreads(pd.read_csv(args.cds), _contract(args))
    aligned = align_actual_pvlgd(transcripts, daily)
    keep = transcripts[transcripts["call_id"].isin(aligned["call_id"])]
    keep = keep.set_index("call_id").loc[aligned["call_id"]].reset_index()
    calls = transcripts_from_frame(keep)
    vec = CreditWindowVectorizer(word_lists=_word_lists(args), top_n=len(fit.tokens))
    corpus = [vec.process_document(t.text) for t in calls]
    dtm = build_dtm(
        corpus,
        call_ids=[t.call_id for t in calls],
        sectors=[t.sector for t in calls],
        vocabulary=list(fit.tokens),
        underscore_phrases=set((vec.word_lists or WordLists()).credit_stems),
    )
    model = LassoCreditModel()
    model.fit_ = fit
    implied = model.predict(dtm)
    out = aligned.assign(
        implied_pvlgd=implied,
        credit_score=credit_score(aligned["actual_pvlgd"].to_numpy(), implied),
    )
    out.to_csv(args.output, index=False)
    return 0


def cmd_factors(args) -> int:
    from .pipeline import build_factor_panel, month_end_panel, price_spreads

    daily = price_spreads(pd.read_csv(args.cds), _contract(args))
    monthly = month_end_panel(daily)
    panel = build_factor_panel(
        monthly,
        daily_pvlgd=daily,
        equity=pd.read_csv(args.equity) if args.equity else None,
        fundamentals=pd.read_csv(args.fundamentals) if args.fundamentals else None,
        analyst=pd.read_csv(args.analyst) if args.analyst else None,
        transcripts=pd.read_csv(args.transcripts) if args.transcripts else None,
    )
    panel.to_csv(args.output, index=False)
    print(f"wrote {len(panel)} entity-months")
    return 0


def cmd_regress(args) -> int:
    from .regression import RegressionSpec, run_spec

    raw = json.loads(Path(args.spec).read_text())
    spec = RegressionSpec(
        dependent=raw["dependent"],
        regressors=tuple(raw["regressors"]),
        interactions=tuple(tuple(p) for p in raw.get("interactions", [])),
        cluster_dims=tuple(raw.get("cluster_dims", ("entity_id", "month"))),
        fixed_effects=tuple(raw.get("fixed_effects", [])),
        standardization=raw.get("standardization", "none"),
    )
    data = pd.read_csv(args.data)
    result = run_spec(spec, data)
    result.table().to_csv(args.output or sys.stdout, index=False)
    print(f"# r_squared={result.r_squared:.6f} n_obs={result.n_obs}")
    return 0


def cmd_backtest(args) -> int:
    from .pipeline import backtest_with_null

    config = json.loads(Path(args.config).read_text())
    scores = pd.read_csv(args.scores)
    pvlgd = pd.read_csv(args.pvlgd)
    out = backtest_with_null(
        scores, pvlgd,
        lower=config["lower"], upper=config["upper"],
        short_limit=config["short_limit"], long_limit=config["long_limit"],
        trials=args.trials, seed=args.seed,
    )
    pd.DataFrame(
        {"month": list(out["monthly_returns"]), "return": list(out["monthly_returns"].values())}
    ).to_csv(args.returns_out, index=False)
    summary = {
        "annualized_return": out["annualized_return"],
        "sharpe_ratio": out["sharpe_ratio"],
        "p_value_return": out["p_value_return"],
        "stars_return": out["stars_return"],
        "p_value_sharpe": out["p_value_sharpe"],
        "structures": {m: list(s) for m, s in out["structures"].items()},
        "skipped_months": out["skipped_months"],
    }
    Path(args.summary_out).write_text(json.dumps(summary, indent=2))
    print(json.dumps({k: summary[k] for k in
                      ("annualized_return", "sharpe_ratio", "p_value_return")}, indent=2))
    return 0


def cmd_simulate(args) -> int:
    from .nullsim import simulate_null
    from .portfolio import run_backtest

    config = json.loads(Path(args.config).read_text())
    scores = pd.read_csv(args.scores)
    pvlgd = pd.read_csv(args.pvlgd)
    state = run_backtest(
        scores, pvlgd, lower=config["lower"], upper=config["upper"],
        short_limit=config["short_limit"], long_limit=config["long_limit"],
    )
    trials = simulate_null(
        pvlgd, state.structures, lower=config["lower"], upper=config["upper"],
        short_limit=config["short_limit"], long_limit=config["long_limit"],
        trials=args.trials, seed=args.seed,
    )
    pd.DataFrame(
        {
            "trial": [t.trial for t in trials],
            "annualized_return": [t.annualized for t in trials],
            "sharpe": [t.sharpe for t in trials],
        }
    ).to_csv(args.output, index=False)
    print(f"wrote {len(trials)} null trials to {args.output}")
    return 0


def cmd_jointtest(args) -> int:
    from scipy.stats import norm

    threshold = float(norm.ppf(1.0 - args.p))
    cfg = JointTestConfig(
        n_variables=args.n, threshold=round(threshold, 3), draws_per_c=args.draws
    )
    p_max, c_star = correlated_bernoulli_pmax(args.k, cfg, seed=args.seed)
    print(json.dumps({"k": args.k, "n": args.n, "max_p_value": p_max, "argmax_c": c_star}))
    return 0


def cmd_synth(args) -> int:
    from .synth import generate_synthetic_universe

    bundle = generate_synthetic_universe(
        seed=args.seed, n_entities=args.entities, n_months=args.months,
        vocab_size=args.vocab, noise_scale=args.noise,
        mispricing_scale=args.mispricing,
    )
    bundle.write_to(args.outdir)
    print(f"wrote synthetic universe to {args.outdir}")
    return 0


def cmd_pipeline(args) -> int:
    from .pipeline import (
        backtest_with_null,
        build_factor_panel,
        forecast_regression,
        full_sample_scores,
        month_end_panel,
        price_spreads,
    )
    from .workbench import PipelineConfig, rating_group

    cfg = PipelineConfig.from_json(args.config) if args.config else PipelineConfig()
    data_dir = Path(args.data_dir)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    transcripts = pd.read_csv(data_dir / "transcripts.csv")
    cds = pd.read_csv(data_dir / "cds_daily.csv")
    spec = ContractSpec(risk_free_rate=args.rate, loss_given_default=args.lgd)
    daily = price_spreads(cds, spec)
    monthly = month_end_panel(daily)
    monthly.to_csv(outdir / "monthly_pvlgd.csv", index=False)

    lists = None
    if cfg.credit_words_path:
        lists = WordLists.from_files(cfg.credit_words_path, cfg.excluded_phrases_path)

    summary: dict = {}
    ratings_path = data_dir / "ratings.csv"
    groups: dict[str, list[str]] = {}
    if ratings_path.exists():
        ratings = pd.read_csv(ratings_path)
        ratings["group"] = [rating_group(r) for r in ratings["rating"]]
        for g, grp in ratings.groupby("group"):
            groups[str(g)] = list(grp["entity_id"].astype(str))
    else:
        groups["ALL"] = list(transcripts["entity_id"].astype(str).unique())

    for group, entities in groups.items():
        t_g = transcripts[transcripts["entity_id"].isin(entities)]
        d_g = daily[daily["entity_id"].isin(entities)]
        m_g = monthly[monthly["entity_id"].isin(entities)]
        if t_g.empty or len(m_g) < 10:
            log.info("group %s too small; skipped", group)
            continue
        fit, scores = full_sample_scores(
            t_g, d_g, top_n=cfg.top_n[0], t_c=cfg.t_c[0], n_fs=cfg.n_fs[0],
            word_lists=lists, seed=cfg.seed,
        )
        scores.to_csv(outdir / f"scores_{group}.csv", index=False)
        reg = forecast_regression(scores, m_g, horizon=args.horizon)
        bounds = cfg.bounds.get(group) or next(iter(cfg.bounds.values()))
        bt = backtest_with_null(
            scores, m_g, trials=args.trials, seed=cfg.seed, **bounds
        )
        pd.DataFrame(
            {"month": list(bt["monthly_returns"]),
             "return": list(bt["monthly_returns"].values())}
        ).to_csv(outdir / f"returns_{group}.csv", index=False)
        summary[group] = {
            "lasso_r_squared": fit.r_squared,
            "n_scores": len(scores),
            "forecast_cs_coef": reg["credit_score"][0],
            "forecast_cs_t": reg["credit_score"][2],
            "annualized_return": bt["annualized_return"],
            "p_value_return": bt["p_value_return"],
            "stars": bt["stars_return"],
        }

    panel = build_factor_panel(
        monthly, daily_pvlgd=daily,
        equity=_maybe(data_dir / "equity.csv"),
        fundamentals=_maybe(data_dir / "fundamentals.csv"),
        analyst=_maybe(data_dir / "analyst.csv"),
        transcripts=transcripts,
    )
    panel.to_csv(outdir / "factor_panel.csv", index=False)
    Path(outdir / "summary.json").write_text(json.dumps(summary, indent=2))
    print(json.dumps(summary, indent=2))
    return 0


def _maybe(path: Path) -> pd.DataFrame | None:
    return pd.read_csv(path) if path.exists() else None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="credittext")
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_contract_flags(p):
        p.add_argument("--rate", type=float, default=0.0226)
        p.add_argument("--lgd", type=float, default=60.0)
        p.add_argument("--maturity", type=float, default=5.0)
        p.add_argument("--interval", type=float, default=0.25)

    p = sub.add_parser("price", help="spread -> intensity, PV01, PVLGD")
    p.add_argument("--spread-bp", type=float)
    p.add_argument("--input", help="CSV with entity_id,date,spread_bp")
    p.add_argument("--output")
    add_contract_flags(p)
    p.set_defaults(func=cmd_price)

    p = sub.add_parser("tokenize", help="transcripts -> sparse DTM triplets")
    p.add_argument("--transcripts", required=True)
    p.add_argument("--output-dtm", required=True)
    p.add_argument("--output-vocab", required=True)
    p.add_argument("--top-n", type=int, default=2000)
    p.add_argument("--credit-words")
    p.add_argument("--excluded-phrases")
    p.set_defaults(func=cmd_tokenize)

    p = sub.add_parser("select", help="rank tokens by residual correlation")
    p.add_argument("--dtm", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--pvlgd", required=True, help="CSV call_id,pvlgd[,sector]")
    p.add_argument("--n-fs", type=int, default=250)
    p.add_argument("--tc", type=float, default=1.0)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("fit", help="fit the text model, emit scores")
    p.add_argument("--transcripts", required=True)
    p.add_argument("--cds", required=True, help="daily CSV entity_id,date,spread_bp")
    p.add_argument("--top-n", type=int, default=2000)
    p.add_argument("--tc", type=float, default=1.0)
    p.add_argument("--n-fs", type=int, default=250)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rolling", action="store_true")
    p.add_argument("--lookback", default="36", help="24|36|60|expanding")
    p.add_argument("--update", type=int, default=12, choices=(1, 12))
    p.add_argument("--first-month", help="first training month YYYY-MM")
    p.add_argument("--model-out")
    p.add_argument("--scores-out", required=True)
    p.add_argument("--credit-words")
    p.add_argument("--excluded-phrases")
    add_contract_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("score", help="apply a saved model to new transcripts")
    p.add_argument("--model", required=True)
    p.add_argument("--transcripts", required=True)
    p.add_argument("--cds", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--credit-words")
    p.add_argument("--excluded-phrases")
    add_contract_flags(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("factors", help="build the factor panel CSV")
    p.add_argument("--cds", required=True)
    p.add_argument("--equity")
    p.add_argument("--fundamentals")
    p.add_argument("--analyst")
    p.add_argument("--transcripts")
    p.add_argument("--output", required=True)
    add_contract_flags(p)
    p.set_defaults(func=cmd_factors)

    p = sub.add_parser("regress", help="run a regression spec")
    p.add_argument("--spec", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--output")
    p.set_defaults(func=cmd_regress)

    p = sub.add_parser("backtest", help="run the LP strategy and its null test")
    p.add_argument("--scores", required=True, help="CSV entity_id,month,credit_score")
    p.add_argument("--pvlgd", required=True, help="CSV entity_id,month,pvlgd")
    p.add_argument("--config", required=True, help="JSON bounds")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--returns-out", required=True)
    p.add_argument("--summary-out", required=True)
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("simulate", help="null distribution only")
    p.add_argument("--scores", required=True)
    p.add_argument("--pvlgd", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("jointtest", help="correlated-Bernoulli joint significance")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--n", type=int, default=15)
    p.add_argument("--p", type=float, default=0.05)
    p.add_argument("--draws", type=int, default=50_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_jointtest)

    p = sub.add_parser("synth", help="generate a synthetic universe")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--entities", type=int, default=100)
    p.add_argument("--months", type=int, default=60)
    p.add_argument("--vocab", type=int, default=500)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--mispricing", type=float, default=1.5)
    p.add_argument("--outdir", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("pipeline", help="run the whole chain from a data dir")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--outdir", required=True)
    p.add_argument("--config", help="pipeline config JSON")
    p.add_argument("--rate", type=float, default=0.0226)
    p.add_argument("--lgd", type=float, default=60.0)
    p.add_argument("--horizon", type=int, default=12)
    p.add_argument("--trials", type=int, default=100)
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except (InfeasibleProblem, ConvergenceError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
