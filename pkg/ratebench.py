"""
Command-line entry point for the rating prediction benchmark
"""
import argparse
import logging
import subprocess
import sys
from pathlib import Path

from config import experiment_config, hyper_params, load_config, parse_sweep
from errors import ConfigError, RatebenchError
from harness import (
    compare_methods, format_comparison, load_dataset, method_settings, predict_pairs,
    results_frame, results_header, run, tune_integrated, write_results, fold_splits,
)
from models import integrated, iterative_mf
from ratings import load_csv, load_pairs, save_csv, save_predictions, split
from synthetic import SyntheticSpec, generate_synthetic

logger = logging.getLogger("ratebench")

COMMANDS = ("ubcf", "imf", "integrated", "compare", "generate", "tune", "predict", "dashboard")


class UsageParser(argparse.ArgumentParser):
    """Argument parser whose usage errors surface as ConfigError (exit code 1)"""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser() -> UsageParser:
    common = UsageParser(add_help=False)
    source = common.add_mutually_exclusive_group()
    source.add_argument("--data", help="ratings CSV with header user_id,item_id,rating")
    source.add_argument("--synthetic", help="synthetic spec users=U,items=I,rank=R,noise=s,density=d,seed=n")
    common.add_argument("--config", help="TOML configuration file (default: ratebench.toml if present)")
    common.add_argument("--split", type=float, help="training fraction of each split (default 0.9)")
    common.add_argument("--seed", type=int, help="base random seed")
    common.add_argument("--out", help="output CSV path (default: stdout)")
    common.add_argument("--sweep", action="append", metavar="PARAM=V1,V2", help="sweep axis, repeatable")
    common.add_argument("--folds", type=int, help="number of cross-validation folds")
    common.add_argument("--kfold", action="store_true", help="strict k-fold instead of repeated sub-sampling")
    common.add_argument("--no-clamp", action="store_true", help="evaluate raw, unclamped predictions")
    common.add_argument("--timing", action="store_true", help="record wall_time_ms (output no longer byte-stable)")
    common.add_argument("--workers", type=int, help="cells evaluated concurrently")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true")
    verbosity.add_argument("-q", "--quiet", action="store_true")

    parser = UsageParser(prog="ratebench", description="Rating prediction benchmark")
    commands = parser.add_subparsers(dest="command", required=True)

    ubcf = commands.add_parser("ubcf", parents=[common], help="user-based collaborative filtering")
    ubcf.add_argument("--metric", choices=["pearson", "cosine"])
    ubcf.add_argument("--neighbors", type=int, dest="k")

    imf = commands.add_parser("imf", parents=[common], help="iterative SVD matrix completion")
    imf.add_argument("--rank", type=int)
    imf.add_argument("--iterations", type=int)
    imf.add_argument("--trace", help="write per-iteration rank,iteration,rmse CSV for the first split")

    model = commands.add_parser("integrated", parents=[common], help="integrated neighborhood + factor model")
    model.add_argument("--k", type=int, help="item neighbors")
    model.add_argument("--factors", type=int, dest="K", help="latent factor dimension")
    model.add_argument("--lambda1", type=float, help="similarity shrinkage")
    model.add_argument("--epochs", type=int)
    model.add_argument("--dump", help="save parameters trained on the first split to this .npz file")

    commands.add_parser("compare", parents=[common], help="all three methods on one shared split")
    commands.add_parser("generate", parents=[common], help="write a synthetic ratings CSV")

    tune = commands.add_parser("tune", parents=[common], help="coordinate search over k, lambda1, K")
    tune.add_argument("--ks", default="50,150,300")
    tune.add_argument("--lambda1s", default="100,200,400,600")
    tune.add_argument("--factor-counts", default="2,5,10,20")

    predict = commands.add_parser("predict", parents=[common], help="train on all ratings and score query pairs")
    predict.add_argument("--method", choices=["ubcf", "imf", "integrated"], required=True)
    predict.add_argument("--pairs", required=True, help="CSV with header user_id,item_id")

    commands.add_parser("dashboard", help="launch the Streamlit dashboard")
    return parser


def merged_settings(args) -> dict:
    """Defaults < TOML file < command-line flags"""
    settings = load_config(args.config)
    experiment = settings["experiment"]
    if args.data:
        experiment["data"], experiment["synthetic"] = args.data, ""
    if args.synthetic:
        experiment["synthetic"], experiment["data"] = args.synthetic, ""
    for name, value in (("split", args.split), ("seed", args.seed), ("folds", args.folds), ("workers", args.workers)):
        if value is not None:
            experiment[name] = value
    if args.kfold:
        experiment["cv_mode"] = "kfold"
    if args.no_clamp:
        experiment["clamp"] = False
    if args.timing:
        experiment["timing"] = True
    if args.command in settings:
        for name in settings[args.command]:
            value = getattr(args, name, None)
            if value is not None:
                settings[args.command][name] = value
    sweep = parse_sweep(args.sweep)
    if sweep:
        settings["sweep"] = sweep
    return settings


def configure_logging(args):
    level = logging.INFO
    if getattr(args, "verbose", False):
        level = logging.DEBUG
    elif getattr(args, "quiet", False):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def emit(frame, path, header=None):
    """Write a result table to path, or to stdout when no path is given"""
    handle = open(path, "w", encoding="utf-8", newline="") if path else sys.stdout
    try:
        if header:
            handle.write(header + "\n")
        frame.to_csv(handle, index=False, float_format="%.8f", lineterminator="\n")
    finally:
        if path:
            handle.close()


# Command handlers
def run_method(args, settings):
    config = experiment_config(settings, args.command)
    dataset = load_dataset(config)
    rows = run(config, dataset)
    if args.out:
        write_results(rows, args.out, config)
    else:
        emit(results_frame(rows), None, results_header(config))

    if args.command == "imf" and args.trace:
        first = fold_splits(dataset, config)[0]
        ranks = [int(r) for r in config.sweep.get("rank", [config.params["rank"]])]
        table = iterative_mf.sweep_rank_iterations(first.train, first.validation, ranks,
                                                   int(config.params["iterations"]), config.clamp)
        emit(table, args.trace)
    if args.command == "integrated" and args.dump:
        first = fold_splits(dataset, config)[0]
        params = integrated.train(first.train, hyper_params(config.params), seed=first.seed)
        integrated.save_params(params, args.dump)
        logger.info(f"Saved integrated model parameters to {args.dump}")


def run_compare(args, settings):
    settings["sweep"] = {}
    config = experiment_config(settings, "ubcf")
    dataset = load_dataset(config)
    table = compare_methods(dataset, seed=config.seed, fraction=config.split, clamp=config.clamp,
                            settings=method_settings(dataset, settings))
    print(format_comparison(table))
    if args.out:
        emit(table, args.out)


def run_generate(args, settings):
    spec_text = settings["experiment"]["synthetic"]
    if not spec_text:
        raise ConfigError("generate needs --synthetic SPEC")
    data = generate_synthetic(SyntheticSpec.parse(spec_text))
    if args.out:
        save_csv(data.dataset, args.out)
    else:
        save_csv(data.dataset, sys.stdout)


def run_tune(args, settings):
    config = experiment_config(settings, "integrated")
    dataset = load_dataset(config)
    data_split = split(dataset, config.split, config.seed)
    hp, trace = tune_integrated(
        data_split.train, data_split.validation,
        ks=[int(v) for v in args.ks.split(",")],
        lambda1s=[float(v) for v in args.lambda1s.split(",")],
        factor_counts=[int(v) for v in args.factor_counts.split(",")],
        base=hyper_params(config.params), seed=config.seed, clamp=config.clamp,
    )
    print(f"Chosen: k={hp.k} lambda1={hp.lambda1} K={hp.K}", file=sys.stderr)
    emit(trace, args.out)


def run_predict(args, settings):
    experiment = settings["experiment"]
    if not experiment["data"]:
        raise ConfigError("predict needs --data PATH")
    dataset = load_csv(experiment["data"])
    users, items = load_pairs(args.pairs, dataset)
    params = method_settings(dataset, settings)[args.method]
    predictions = predict_pairs(args.method, params, dataset, users, items,
                                clamp=bool(experiment["clamp"]), seed=int(experiment["seed"]))
    save_predictions(args.out or sys.stdout, users, items, predictions, dataset)


def run_dashboard():
    app = Path(__file__).resolve().parent / "dashboard.py"
    return subprocess.call([sys.executable, "-m", "streamlit", "run", str(app)])


HANDLERS = {
    "ubcf": run_method,
    "imf": run_method,
    "integrated": run_method,
    "compare": run_compare,
    "generate": run_generate,
    "tune": run_tune,
    "predict": run_predict,
}


def main(argv=None) -> int:
    """Parse arguments, dispatch, and map errors onto exit codes"""
    try:
        args = build_parser().parse_args(argv)
        configure_logging(args)
        if args.command == "dashboard":
            return run_dashboard()
        HANDLERS[args.command](args, merged_settings(args))
    except RatebenchError as e:
        logger.error(str(e))
        return e.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
