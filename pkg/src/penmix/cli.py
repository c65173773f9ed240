"""Command-line front end: catalog, gen, fit, simulate."""

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .catalog import all_models, parse_model_id, resolve_model, sample
from .dataio import read_dataset_csv, write_dataset_csv
from .em import EmConfig, multi_start_fit
from .exceptions import AllDegenerate, PenmixError
from .harness import method_from_name, run_study
from .mixture import MixingDistribution, PenaltySpec, sample_covariance, sample_mean

FIT_SCHEMA = "penmix.fit/1"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="penmix", description=__doc__)
    parser.add_argument("--version", action="version", version=f"penmix {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_cat = sub.add_parser("catalog", help="list or show simulation models")
    p_cat.add_argument("--list", action="store_true", help="list all 72 model ids")
    p_cat.add_argument("--show", metavar="MODEL", help="print one resolved model")

    p_gen = sub.add_parser("gen", help="generate a dataset from a catalog model")
    p_gen.add_argument("--model", required=True, help="model id, e.g. I.2.1")
    p_gen.add_argument("--n", type=int, default=None, help="sample size (default: the model's)")
    p_gen.add_argument("--seed", type=int, default=1)
    p_gen.add_argument("--out", required=True, help="output CSV path")
    p_gen.add_argument("--header", action="store_true", help="write a header row x1..xd")

    p_fit = sub.add_parser("fit", help="fit a mixture to a CSV dataset")
    p_fit.add_argument("data", help="input CSV path")
    p_fit.add_argument("--p", type=int, required=True, help="number of components")
    p_fit.add_argument("--method", choices=("mle", "pmle"), default="pmle")
    p_fit.add_argument("--an", type=float, default=None,
                       help="penalty strength override (pmle only; default n^-1/2)")
    p_fit.add_argument("--seed", type=int, default=1)
    p_fit.add_argument("--out", default=None, help="also write the fit document here")

    p_sim = sub.add_parser("simulate", help="run a Monte-Carlo study")
    p_sim.add_argument("--models", required=True, help="comma-separated model ids")
    p_sim.add_argument("--methods", default="mle,pmle1,pmle2",
                       help="comma-separated subset of mle,pmle1,pmle2")
    p_sim.add_argument("--reps", type=int, required=True, help="replications per model")
    p_sim.add_argument("--n", type=int, default=None,
                       help="sample-size override (default: each model's)")
    p_sim.add_argument("--seed", type=int, default=1)
    p_sim.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p_sim.add_argument("--out", default=None, help="directory for report files")
    return parser


def _cmd_catalog(args) -> int:
    if not args.list and not args.show:
        print("nothing to do: pass --list or --show MODEL", file=sys.stderr)
        return 2
    if args.list:
        for model in all_models():
            g = resolve_model(model)
            means = " | ".join(
                "(" + ", ".join(f"{v:g}" for v in g.means[j]) + ")" for j in range(g.order)
            )
            weights = "/".join(f"{w:g}" for w in g.weights)
            print(
                f"{model.model_id:<8} p={model.order} d={model.dim} n={model.n}"
                f"  {model.mean_label:<8} weights {weights}  means {means}"
            )
    if args.show:
        model = parse_model_id(args.show)
        g = resolve_model(model)
        doc = g.to_dict()
        doc["model_id"] = model.model_id
        doc["n"] = model.n
        print(json.dumps(doc, indent=2))
    return 0


def _cmd_gen(args) -> int:
    model = parse_model_id(args.model)
    g = resolve_model(model)
    n = model.n if args.n is None else args.n
    if n < 1:
        print(f"--n must be >= 1, got {n}", file=sys.stderr)
        return 2
    data = sample(g, n, args.seed)
    write_dataset_csv(args.out, data, header=args.header)
    doc = g.to_dict()
    doc["model_id"] = model.model_id
    doc["n"] = n
    doc["seed"] = args.seed
    print(json.dumps(doc, indent=2))
    return 0


def _data_based_starts(data: np.ndarray, p: int, seed: int) -> list:
    """Ten starts from sample statistics alone (truth unknown for user data)."""
    rng = np.random.default_rng(seed)
    d = data.shape[1]
    xbar = sample_mean(data)
    s_x = sample_covariance(data)
    scale = data.std(axis=0, ddof=1)
    weights = np.full(p, 1.0 / p)
    covs = np.broadcast_to(s_x, (p, d, d))
    starts = [MixingDistribution(weights, np.tile(xbar, (p, 1)), covs)]
    for _ in range(9):
        means = xbar + rng.uniform(-scale, scale, size=(p, d))
        starts.append(MixingDistribution(weights, means, covs))
    return starts


def _cmd_fit(args) -> int:
    if args.p < 1:
        print(f"--p must be >= 1, got {args.p}", file=sys.stderr)
        return 2
    if args.method == "mle" and args.an is not None:
        print("--an only applies to --method pmle", file=sys.stderr)
        return 2
    if args.an is not None and args.an < 0:
        print(f"--an must be >= 0, got {args.an}", file=sys.stderr)
        return 2
    data = read_dataset_csv(args.data)
    n = data.shape[0]
    if args.method == "mle":
        a_n = 0.0
    else:
        a_n = n ** -0.5 if args.an is None else args.an
    spec = PenaltySpec(a_n, sample_covariance(data))
    starts = _data_based_starts(data, args.p, args.seed)
    try:
        fit = multi_start_fit(data, starts, spec, EmConfig())
    except AllDegenerate as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        return 1
    doc = {
        "schema": FIT_SCHEMA,
        "method": args.method,
        "a_n": a_n,
        "p": args.p,
        "d": data.shape[1],
        "n": n,
        "seed": args.seed,
        "pll": fit.best.final_pll,
        "iterations": fit.best.iterations,
        "converged": fit.best.converged,
        "degenerate_runs": fit.degeneracy_count,
        "starts": len(starts),
        "estimate": fit.best.estimate.to_dict(),
    }
    text = json.dumps(doc, indent=2)
    print(text)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return 0


def _print_report_table(report) -> None:
    methods = [m.method for m in report.methods]
    header = f"{'parameter':<12}{'truth':>9}" + "".join(f"{m:>18}" for m in methods)
    print(f"model {report.model.model_id}  n={report.n}  reps={report.replications}")
    print(header)
    for k, name in enumerate(report.parameters):
        cells = "".join(
            f"{m.bias[k]:>9.2f} ({m.std[k]:.2f})" for m in report.methods
        )
        print(f"{name:<12}{report.truth[k]:>9.2f}{cells}")
    for m in report.methods:
        print(
            f"degenerate[{m.method}] = {m.degeneracy_count}/{m.total_starts}"
            f"  failed replications = {m.failed_replications}"
        )


def _cmd_simulate(args) -> int:
    models = [parse_model_id(mid) for mid in args.models.split(",") if mid]
    methods = [method_from_name(name) for name in args.methods.split(",") if name]
    if args.reps < 2:
        print(f"--reps must be >= 2, got {args.reps}", file=sys.stderr)
        return 2
    if args.out:
        os.makedirs(args.out, exist_ok=True)
    # One model at a time so each report is flushed as soon as it is ready.
    for model in models:
        reports = run_study(
            [model],
            methods,
            replications=args.reps,
            base_seed=args.seed,
            parallelism=max(1, args.threads),
            n=args.n,
        )
        report = reports[0]
        _print_report_table(report)
        if args.out:
            path = os.path.join(args.out, f"report_{model.model_id}.json")
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(report.to_json())
            print(f"wrote {path}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "catalog":
            return _cmd_catalog(args)
        if args.command == "gen":
            return _cmd_gen(args)
        if args.command == "fit":
            return _cmd_fit(args)
        return _cmd_simulate(args)
    except (PenmixError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    raise SystemExit(main())
