"""Command-line entry point.

Subcommands: ingest (validate/convert a corpus), run (execute an experiment
config), optimize-hp (standalone hyperparameter search), optimize-interlayer
(standalone mask search), report (tables and plots from saved runs). Errors
exit nonzero with a single machine-parseable line on stderr.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cmaes import optimize_interlayer
from .config import load_config
from .datasets import parse_feature_csv, parse_jv, save_npz
from .experiment import (
    TAG_CMA,
    TAG_MASK,
    apply_noise,
    build_architecture,
    load_task_dataset,
    run_experiment,
    tune_hypers,
)
from .report import write_report
from .seeds import derive_seed


def _cmd_ingest(args) -> int:
    if args.format == "jv":
        if not (args.train and args.test):
            raise ValueError("--format jv needs --train and --test")
        dataset = parse_jv(
            Path(args.train).read_text(encoding="utf-8"),
            Path(args.test).read_text(encoding="utf-8"),
        )
    else:
        if not args.input:
            raise ValueError("--format csv needs --input")
        dataset = parse_feature_csv(Path(args.input).read_text(encoding="utf-8"))
    save_npz(dataset, args.out)
    split = f"{len(dataset.split[0])}/{len(dataset.split[1])}" if dataset.split else "none"
    print(
        f"ingest: {len(dataset.sequences)} sequences, {dataset.n_classes} classes, "
        f"{dataset.n_features} features, split {split}, out {args.out}"
    )
    return 0


def _overrides(args) -> dict:
    return {"seed": args.seed, "repeats": args.repeats, "snr_db": args.snr_db}


def _cmd_run(args) -> int:
    config = load_config(args.config).override(**_overrides(args))
    record = run_experiment(config, out_dir=args.out)
    print(
        f"run: fingerprint={record.fingerprint} repeats={len(record.results)} "
        f"mean_error={record.mean_error:.6f} std_error={record.std_error:.6f} out={args.out}"
    )
    return 0


def _cmd_optimize_hp(args) -> int:
    config = load_config(args.config).override(**_overrides(args))
    if not config.optimize_hypers:
        raise ValueError("config has optimize_hypers = false; nothing to tune")
    dataset = apply_noise(load_task_dataset(config), config, 0)
    point, trace = tune_hypers(dataset, config)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        rows = ["index\tfeedback_gain\tinput_gain\tlog10_lambda\tvalue\tincumbent"]
        rows += [
            f"{i}\t{p.feedback_gain!r}\t{p.input_gain!r}\t{p.log10_lambda!r}\t{v!r}\t{inc!r}"
            for i, p, v, inc in trace.trace
        ]
        (out / "bo_trace.tsv").write_text("\n".join(rows) + "\n", encoding="utf-8")
        (out / "best_hypers.json").write_text(
            json.dumps(
                {
                    "feedback_gain": point.feedback_gain,
                    "input_gain": point.input_gain,
                    "log10_lambda": point.log10_lambda,
                    "ridge_lambda": point.ridge_lambda,
                    "best_value": trace.best_value,
                    "evaluations": trace.evaluations,
                },
                indent=2,
                sort_keys=True,
            )
            + "\n",
            encoding="utf-8",
        )
    print(
        f"optimize-hp: best_value={trace.best_value:.6f} "
        f"feedback_gain={point.feedback_gain:.6f} input_gain={point.input_gain:.6f} "
        f"log10_lambda={point.log10_lambda:.6f} evaluations={trace.evaluations}"
    )
    return 0


def _cmd_optimize_interlayer(args) -> int:
    config = load_config(args.config).override(**_overrides(args))
    if config.architecture != "deep_optimized":
        raise ValueError("config must use architecture = deep_optimized")
    dataset = apply_noise(load_task_dataset(config), config, 0)
    hypers, _ = tune_hypers(dataset, config)
    mask_seed = derive_seed(config.seed, TAG_MASK, 0)
    arch = build_architecture(config, dataset.n_features, hypers, mask_seed)
    opt = optimize_interlayer(
        dataset, arch,
        ridge_lambda=hypers.ridge_lambda,
        budget_iterations=config.cma_iterations,
        seed=derive_seed(config.seed, TAG_CMA, 0),
        sigma0=config.cma_sigma0,
        patience=config.cma_patience,
        method=config.method,
        log_test=True,
    )
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        np.save(out / "best_mask.npy", opt.best_mask.values)
        rows = ["generation\tgen_best\tgen_mean\trunning_best\ttest_of_gen_best\ttest_of_running_best"]
        rows += [
            "\t".join([str(int(row[0]))] + [repr(float(v)) for v in row[1:]])
            for row in opt.history
        ]
        (out / "cma_history.tsv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    print(
        f"optimize-interlayer: best_fitness={opt.best_fitness:.6f} "
        f"initial_fitness={opt.initial_fitness:.6f} iterations={opt.iterations_run} "
        f"evaluations={opt.evaluations}"
    )
    return 0


def _cmd_report(args) -> int:
    table_path, plot_path = write_report(args.runs, args.out)
    print(Path(table_path).read_text(encoding="utf-8"), end="")
    print(f"report: table={table_path} plot={plot_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deepdelay",
        description="Deep delay-based reservoir computing experiments.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate and convert a corpus to npz")
    p.add_argument("--format", choices=("jv", "csv"), required=True)
    p.add_argument("--train", help="train-side text file (jv format)")
    p.add_argument("--test", help="test-side text file (jv format)")
    p.add_argument("--input", help="feature table (csv format)")
    p.add_argument("--out", required=True, help="output .npz path")
    p.set_defaults(func=_cmd_ingest)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="experiment INI file")
    common.add_argument("--seed", type=int, default=None, help="override base seed")
    common.add_argument("--repeats", type=int, default=None, help="override repeat count")
    common.add_argument("--snr-db", dest="snr_db", type=float, default=None,
                        help="override input noise SNR in dB")

    p = sub.add_parser("run", parents=[common], help="execute an experiment config")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("optimize-hp", parents=[common], help="standalone hyperparameter search")
    p.add_argument("--out", default=None, help="output directory for traces")
    p.set_defaults(func=_cmd_optimize_hp)

    p = sub.add_parser("optimize-interlayer", parents=[common],
                       help="standalone interlayer mask search")
    p.add_argument("--out", default=None, help="output directory for traces")
    p.set_defaults(func=_cmd_optimize_interlayer)

    p = sub.add_parser("report", help="tables and plots from saved runs")
    p.add_argument("--runs", nargs="+", required=True, help="run output directories")
    p.add_argument("--out", required=True, help="report output directory")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - single reporting point for the CLI
        message = " ".join(str(exc).split()) or type(exc).__name__
        print(f"error: {type(exc).__name__}: {message}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
