"""Command line front end: synth, ingest, fit, eval, recommend, watch.

Artifacts live under ``$DALEEL_DATA_DIR`` (default ``./daleel_data``) unless
``--input``/``--out`` say otherwise::

    runs.csv             profiling runs (synth / ingest)
    model.json           fitted model (fit)
    eval/report.json     diagnostics, plus qq.csv and pred_vs_actual.csv (eval)
    recommendation.json  ranked candidates (recommend)
    events.ndjson        trigger log (watch)
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from daleel import actuator, dataset, modeleval, planner, portfolio, regress, synthgen

DEFAULT_SEED = 42
DEFAULT_TRAIN_FRACTION = 0.57
DEFAULT_FOLDS = 10
DEFAULT_GRID = (1e10, 1e-2, 100)


class CLIError(Exception):
    pass


def data_dir() -> Path:
    return Path(os.environ.get("DALEEL_DATA_DIR", "daleel_data"))


def _generated_at() -> str:
    return datetime.now(timezone.utc).isoformat()


def _out(path, default_name) -> Path:
    p = Path(path) if path else data_dir() / default_name
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _in(path, default_name) -> Path:
    p = Path(path) if path else data_dir() / default_name
    if not p.exists():
        raise CLIError(f"input file not found: {p}")
    return p


def _floats(text, n, flag):
    try:
        vals = [float(t) for t in text.split(",")]
    except ValueError:
        raise CLIError(f"{flag}: expected {n} comma-separated numbers, got {text!r}") from None
    if len(vals) != n:
        raise CLIError(f"{flag}: expected {n} comma-separated numbers, got {text!r}")
    return vals


def _grid(text):
    hi, lo, count = _floats(text, 3, "--lambda-grid")
    if count != int(count):
        raise CLIError(f"--lambda-grid: count must be an integer, got {count}")
    return regress.lambda_grid(hi, lo, int(count))


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args):
    scenario = synthgen.load_scenario(args.input) if args.input else synthgen.default_scenario()
    d = synthgen.generate(scenario, args.seed)
    out = _out(args.out, "runs.csv")
    dataset.write_runs(d, out)
    print(f"wrote {len(d)} runs to {out}")


def cmd_ingest(args):
    if not args.input:
        raise CLIError("ingest needs --input")
    d = dataset.ingest_runs(args.input)
    out = _out(args.out, "runs.csv")
    dataset.write_runs(d, out)
    names = sorted({r.instance_name for r in d})
    print(f"ingested {len(d)} runs for app {d.app_id!r} over {len(names)} instance types; wrote {out}")


def _split(d, fraction, seed):
    return dataset.split(d, fraction, seed)


def cmd_fit(args):
    kind = regress.ModelKind.parse(args.model)
    basis = regress.BasisSpec.parse(args.degrees) if args.degrees else regress.default_basis(kind)
    d = dataset.ingest_runs(_in(args.input, "runs.csv"))
    train, _ = _split(d, args.train_fraction, args.seed)
    X = dataset.to_design(train, basis)
    training = {"train_fraction": args.train_fraction, "seed": args.seed, "records": len(d)}

    if kind.penalized:
        if args.lam is not None and args.lambda_grid:
            raise CLIError("give either --lambda or --lambda-grid, not both")
        if args.lam is not None:
            lam = args.lam
        else:
            grid = _grid(args.lambda_grid) if args.lambda_grid else regress.lambda_grid(*DEFAULT_GRID)
            cv = modeleval.CVConfig(args.folds, args.seed)
            lam, scores = modeleval.select_lambda(X, kind, grid, cv)
            training["lambda_selection"] = {
                "folds": args.folds,
                "grid": grid,
                "cv_mse": scores,
            }
    else:
        if args.lam not in (None, 0.0) or args.lambda_grid:
            raise CLIError(f"--lambda/--lambda-grid do not apply to {kind.value.lower()} models")
        lam = 0.0

    model = regress.fit(X, kind, lam)
    out = _out(args.out, "model.json")
    regress.save_model(model, out, extra={"training": training, "generated_at": _generated_at()})
    print(f"fit {kind.value} degrees={list(basis.degrees)} lambda={lam:g} on {X.n} runs; wrote {out}")


def _model_and_split(args):
    model_path = _in(args.model_file, "model.json")
    model = regress.load_model(model_path)
    meta = json.loads(Path(model_path).read_text()).get("training", {})
    fraction = args.train_fraction if args.train_fraction is not None else meta.get(
        "train_fraction", DEFAULT_TRAIN_FRACTION)
    seed = args.seed if args.seed is not None else meta.get("seed", DEFAULT_SEED)
    d = dataset.ingest_runs(_in(args.input, "runs.csv"))
    return model, d, fraction, seed


def cmd_eval(args):
    model, d, fraction, seed = _model_and_split(args)
    train, test = _split(d, fraction, seed)
    report = modeleval.diagnostics(model, train)
    cfg = modeleval.ModelConfig(model.kind, model.basis, model.lam)
    cv_mse = modeleval.kfold_cv(train, cfg, modeleval.CVConfig(args.folds, seed))
    test_mse = modeleval.diagnostics(model, test).mse

    out_dir = Path(args.out) if args.out else data_dir() / "eval"
    out_dir.mkdir(parents=True, exist_ok=True)
    modeleval.write_report(report, out_dir / "report.json", extra={
        "cv_mse": cv_mse,
        "folds": args.folds,
        "test_mse": test_mse,
        "n_test": len(test),
        "lambda": model.lam,
        "flags": list(report.flags),
        "generated_at": _generated_at(),
    })
    modeleval.write_qq(modeleval.qq_data(modeleval.residuals(model, train)), out_dir / "qq.csv")
    modeleval.write_pred_vs_actual(modeleval.pred_vs_actual(model, test),
                                   out_dir / "pred_vs_actual.csv")

    def fmt(v, spec):
        return "--" if v is None else format(v, spec)

    print(f"{model.kind.value} on {report.n} training runs, {len(test)} test runs")
    print(f"  MSE ({args.folds}-fold CV)  {cv_mse:.2f}")
    print(f"  R^2                {fmt(report.r_squared, '.4f')}")
    print(f"  F-statistic        {fmt(report.f_statistic, '.0f')}")
    print(f"  RSE                {fmt(report.rse, '.2f')}")
    print(f"  test MSE           {test_mse:.2f}")
    print(f"wrote {out_dir}/report.json, qq.csv, pred_vs_actual.csv")


def _constraints(args):
    c = portfolio.load_constraints(args.constraints) if args.constraints else portfolio.Constraints()
    if args.weights:
        c = portfolio.Constraints(c.max_execution_time_s, c.budget_usd, c.allowed_days,
                                  tuple(_floats(args.weights, 2, "--weights")))
    if args.budget is not None:
        c = portfolio.Constraints(c.max_execution_time_s, args.budget, c.allowed_days, c.weights)
    if args.max_time is not None:
        c = portfolio.Constraints(args.max_time, c.budget_usd, c.allowed_days, c.weights)
    return portfolio.validate_constraints(c)


def cmd_recommend(args):
    model = regress.load_model(_in(args.model_file, "model.json"))
    port = portfolio.load_portfolio(args.portfolio) if args.portfolio else portfolio.default_portfolio()
    c = _constraints(args)
    ranked = planner.recommend(port, c, model,
                               planner.BillingPolicy(args.billing_granularity))
    out = _out(args.out, "recommendation.json")
    planner.write_recommendation(ranked, out)
    print(planner.format_table(ranked, args.top))
    print(f"wrote {len(ranked)} ranked candidates to {out}")


def cmd_watch(args):
    model = regress.load_model(_in(args.model_file, "model.json"))
    d = dataset.ingest_runs(_in(args.input, "runs.csv"))
    state = actuator.ActuatorState.for_portfolio(
        portfolio.default_portfolio(), epsilon=args.epsilon, window_size=args.window)
    events = []
    if args.portfolio and len(d):
        ev = actuator.on_portfolio_change(state, portfolio.load_portfolio(args.portfolio),
                                          at=d[0].timestamp)
        if ev:
            events.append(ev)
    for r in d:
        ev = actuator.observe(state, r.execution_time_s,
                              max(regress.predict(model, r.predictors), 1e-9), at=r.timestamp)
        if ev:
            events.append(ev)
    out = _out(args.out, "events.ndjson")
    actuator.write_events(events, out)
    counts = {}
    for e in events:
        counts[e.kind.value] = counts.get(e.kind.value, 0) + 1
    print(f"replayed {len(d)} runs; events {counts or '{}'}; wrote {out}")


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="daleel", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        return p

    p = add("synth", cmd_synth, "generate a synthetic runs CSV")
    p.add_argument("--input", help="scenario JSON (default: built-in scenario)")
    p.add_argument("--out")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)

    p = add("ingest", cmd_ingest, "validate a runs CSV and store it")
    p.add_argument("--input")
    p.add_argument("--out")

    p = add("fit", cmd_fit, "fit a model on the training split")
    p.add_argument("--input")
    p.add_argument("--out")
    p.add_argument("--model", choices=["linear", "poly", "ridge", "lasso"], default="poly")
    p.add_argument("--degrees", help="d1,d2,d3 for ram, vcpu, day")
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--lambda-grid", help="hi,lo,count")
    p.add_argument("--folds", type=int, default=DEFAULT_FOLDS)
    p.add_argument("--train-fraction", type=float, default=DEFAULT_TRAIN_FRACTION)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)

    p = add("eval", cmd_eval, "diagnostics, CV and test MSE for a fitted model")
    p.add_argument("--input")
    p.add_argument("--out", help="output directory")
    p.add_argument("--model-file")
    p.add_argument("--folds", type=int, default=DEFAULT_FOLDS)
    p.add_argument("--train-fraction", type=float)
    p.add_argument("--seed", type=int)

    p = add("recommend", cmd_recommend, "rank (instance, day) deployments")
    p.add_argument("--model-file")
    p.add_argument("--portfolio")
    p.add_argument("--constraints")
    p.add_argument("--weights", help="time,cost")
    p.add_argument("--budget", type=float)
    p.add_argument("--max-time", type=float)
    p.add_argument("--billing-granularity", type=int, default=3600)
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--out")

    p = add("watch", cmd_watch, "replay runs against a model and log triggers")
    p.add_argument("--input")
    p.add_argument("--model-file")
    p.add_argument("--portfolio")
    p.add_argument("--epsilon", type=float, default=actuator.DEFAULT_EPSILON)
    p.add_argument("--window", type=int, default=actuator.DEFAULT_WINDOW)
    p.add_argument("--out")
    return parser


def _module_of(exc) -> str:
    mod = type(exc).__module__
    if mod.startswith("daleel."):
        return mod.split(".", 1)[1]
    return "daleel"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except CLIError as exc:
        print(f"daleel: cli: {exc}", file=sys.stderr)
        return 1
    except planner.NoFeasibleCandidate as exc:
        print(f"daleel: planner: {exc}", file=sys.stderr)
        return 3
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"daleel: {_module_of(exc)}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
