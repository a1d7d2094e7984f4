"""Experiment orchestration: dataset resolution, the three architecture
modes (shallow, deep with random masks, deep with an optimized interlayer
mask), hyperparameter tuning, and result persistence.

Every random choice is keyed off the config's base seed through tagged
derivations, so a (config, seed) pair fully determines every emitted
number; rerunning writes byte-identical record files.
"""

import json
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .bayesopt import BoResult, HyperBounds, HyperPoint, bo_optimize
from .cmaes import InterlayerOptResult, optimize_interlayer
from .config import ExperimentConfig, format_config
from .datasets import Dataset, FeatureSequence, parse_feature_csv, parse_jv, standardize, synth_dataset
from .kernels import BACKEND
from .readout import EvalResult, evaluate_pipeline, kfold_split
from .reservoir import DeepConfig, DelayReservoirParams, inject_noise, make_deep_config
from .seeds import derive_seed, rng_from

# seed-derivation tags, one per independent randomness consumer
TAG_MASK, TAG_NOISE, TAG_BO, TAG_CMA, TAG_EVAL = 101, 102, 103, 104, 105


@dataclass(frozen=True, eq=False)
class RunRecord:
    config: ExperimentConfig
    fingerprint: str
    hypers: HyperPoint
    repeat_seeds: tuple[int, ...]
    results: tuple[EvalResult, ...]
    mean_error: float
    std_error: float
    bo_trace: BoResult | None
    cma_results: tuple[InterlayerOptResult, ...]
    wall_clock_s: float
    backend: str
    version: str


def _read_text(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise ValueError(f"cannot read dataset file {path!r}: {exc}") from None


def _stratified_half_split(dataset: Dataset) -> Dataset:
    """Deterministic per-class half split (first half of each class in
    corpus order trains) for tasks that come without a stored split."""
    per_class: dict[int, list[int]] = {}
    for i, seq in enumerate(dataset.sequences):
        per_class.setdefault(seq.label, []).append(i)
    train, test = [], []
    for label in sorted(per_class):
        items = per_class[label]
        cut = (len(items) + 1) // 2
        train.extend(items[:cut])
        test.extend(items[cut:])
    return dataset.with_split(sorted(train), sorted(test))


def load_task_dataset(config: ExperimentConfig) -> Dataset:
    """Resolve the config's task to a concrete dataset (pre-noise)."""
    if config.task == "synthetic":
        dataset = synth_dataset(
            n_classes=config.synth_classes,
            n_per_class=config.synth_per_class,
            t_range=(config.synth_t_lo, config.synth_t_hi),
            n_features=config.synth_features,
            difficulty=config.synth_difficulty,
            seed=config.synth_seed,
        )
        if config.protocol == "fixed":
            dataset = _stratified_half_split(dataset)
    elif config.task == "japanese_vowels":
        if not (config.jv_train_path and config.jv_test_path):
            raise ValueError("japanese_vowels task needs jv_train_path and jv_test_path")
        dataset = parse_jv(_read_text(config.jv_train_path), _read_text(config.jv_test_path))
    else:
        if not config.csv_path:
            raise ValueError("feature_csv task needs csv_path")
        dataset = parse_feature_csv(_read_text(config.csv_path))
        if config.protocol == "fixed":
            dataset = _stratified_half_split(dataset)
    if config.standardize != "none":
        dataset = standardize(dataset, config.standardize)
    return dataset


def apply_noise(dataset: Dataset, config: ExperimentConfig, repeat: int) -> Dataset:
    """Additive input noise at the configured SNR, fresh per repeat."""
    if math.isinf(config.snr_db):
        return dataset
    sequences = tuple(
        FeatureSequence(
            values=inject_noise(
                seq.values, config.snr_db, derive_seed(config.seed, TAG_NOISE, repeat, i)
            ),
            label=seq.label,
            id=seq.id,
        )
        for i, seq in enumerate(dataset.sequences)
    )
    return Dataset(
        sequences=sequences,
        n_classes=dataset.n_classes,
        split=dataset.split,
        provenance=f"{dataset.provenance}|noise({config.snr_db:g}dB,rep{repeat})",
    )


def build_architecture(
    config: ExperimentConfig, n_inputs: int, hypers: HyperPoint, mask_seed: int
) -> DeepConfig:
    layer = DelayReservoirParams(
        n_nodes=config.nodes_per_layer,
        delay_steps=config.effective_delay_steps,
        feedback_gain=hypers.feedback_gain,
        input_gain=hypers.input_gain,
        nonlinearity=config.nonlinearity,
    )
    return make_deep_config(n_inputs, [layer] * config.n_layers, mask_seed)


def hyper_point_from_config(config: ExperimentConfig) -> HyperPoint:
    lam = config.ridge_lambda
    return HyperPoint(
        feedback_gain=config.feedback_gain,
        input_gain=config.input_gain,
        log10_lambda=math.log10(lam) if lam > 0 else -math.inf,
    )


def _tuning_split(dataset: Dataset, config: ExperimentConfig) -> tuple[list[int], list[int]]:
    """Train/validation indices for hyper tuning, never touching held-out
    test items: the stored train side (fixed protocol) or everything
    outside the first evaluation fold (kfold), split 80/20."""
    if config.protocol == "fixed":
        pool = list(dataset.split[0])
    else:
        eval_seed = derive_seed(config.seed, TAG_EVAL, 0)
        folds = kfold_split(len(dataset.sequences), config.folds, derive_seed(eval_seed, 0))
        held_out = set(folds[0].tolist())
        pool = [i for i in range(len(dataset.sequences)) if i not in held_out]
    order = rng_from(derive_seed(config.seed, TAG_BO, 0)).permutation(len(pool))
    n_val = max(1, round(0.2 * len(pool)))
    if n_val >= len(pool):
        raise ValueError("dataset too small for a tuning split")
    val = [pool[i] for i in order[:n_val]]
    train = [pool[i] for i in order[n_val:]]
    return train, val


def tune_hypers(
    dataset: Dataset, config: ExperimentConfig
) -> tuple[HyperPoint, BoResult | None]:
    """Bayesian optimization of (feedback gain, input gain, ridge lambda) on
    a validation split, using the first repeat's masks; the tuned point is
    shared by all repeats."""
    if not config.optimize_hypers:
        return hyper_point_from_config(config), None
    bounds = HyperBounds()
    train, val = _tuning_split(dataset, config)
    tuning_set = dataset.with_split(train, val)
    mask_seed = derive_seed(config.seed, TAG_MASK, 0)

    def objective(point: HyperPoint) -> float:
        arch = build_architecture(config, dataset.n_features, point, mask_seed)
        result = evaluate_pipeline(
            tuning_set, arch, protocol="fixed", ridge_lambda=point.ridge_lambda,
            washout=config.washout, method=config.method,
        )
        return result.error_rate

    trace = bo_optimize(
        objective, bounds, budget=config.bo_budget, seed=derive_seed(config.seed, TAG_BO, 1)
    )
    return trace.best_point, trace


def run_experiment(config: ExperimentConfig, out_dir: str | None = None) -> RunRecord:
    """Execute a config end to end and optionally persist the results.

    Pipeline per repeat: fresh masks (and noise realization, when enabled),
    optional interlayer-mask optimization, then the configured evaluation
    protocol. Hyperparameters are fixed from the config or tuned once.
    """
    started = time.perf_counter()
    base = load_task_dataset(config)
    hypers, bo_trace = tune_hypers(apply_noise(base, config, 0), config)

    repeat_seeds = []
    results = []
    cma_results = []
    for r in range(config.repeats):
        mask_seed = int(derive_seed(config.seed, TAG_MASK, r))
        repeat_seeds.append(mask_seed)
        dataset_r = apply_noise(base, config, r)
        arch = build_architecture(config, base.n_features, hypers, mask_seed)
        if config.architecture == "deep_optimized":
            opt = optimize_interlayer(
                dataset_r, arch,
                ridge_lambda=hypers.ridge_lambda,
                budget_iterations=config.cma_iterations,
                seed=derive_seed(config.seed, TAG_CMA, r),
                sigma0=config.cma_sigma0,
                patience=config.cma_patience,
                method=config.method,
                log_test=True,
            )
            cma_results.append(opt)
            arch = arch.replace_interlayer(0, opt.best_mask)
        result = evaluate_pipeline(
            dataset_r, arch,
            protocol=config.protocol, folds=config.folds,
            ridge_lambda=hypers.ridge_lambda,
            washout=config.washout, method=config.method,
            seed=derive_seed(config.seed, TAG_EVAL, r),
        )
        results.append(result)

    errors = np.array([res.error_rate for res in results])
    record = RunRecord(
        config=config,
        fingerprint=config.fingerprint(),
        hypers=hypers,
        repeat_seeds=tuple(repeat_seeds),
        results=tuple(results),
        mean_error=float(errors.mean()),
        std_error=float(errors.std(ddof=1)) if errors.size > 1 else 0.0,
        bo_trace=bo_trace,
        cma_results=tuple(cma_results),
        wall_clock_s=time.perf_counter() - started,
        backend=BACKEND,
        version=__version__,
    )
    if out_dir is not None:
        persist_record(record, out_dir)
    return record


def _record_payload(record: RunRecord) -> dict:
    payload = {
        "fingerprint": record.fingerprint,
        "version": record.version,
        "backend": record.backend,
        "wall_clock_s": record.wall_clock_s,
        "config": record.config.to_dict(),
        "hypers": {
            "feedback_gain": record.hypers.feedback_gain,
            "input_gain": record.hypers.input_gain,
            "log10_lambda": record.hypers.log10_lambda,
            "ridge_lambda": record.hypers.ridge_lambda,
        },
        "repeats": [
            {
                "mask_seed": seed,
                "error_rate": res.error_rate,
                "per_fold": list(res.per_fold_rates),
                "n_items": res.n_items,
                "eval_fingerprint": res.config_fingerprint,
            }
            for seed, res in zip(record.repeat_seeds, record.results)
        ],
        "mean_error": record.mean_error,
        "std_error": record.std_error,
        "bo": None,
        "cma": [
            {
                "best_fitness": opt.best_fitness,
                "initial_fitness": opt.initial_fitness,
                "iterations_run": opt.iterations_run,
                "evaluations": opt.evaluations,
                "history": [list(row) for row in opt.history],
            }
            for opt in record.cma_results
        ],
    }
    if record.bo_trace is not None:
        payload["bo"] = {
            "best_value": record.bo_trace.best_value,
            "evaluations": record.bo_trace.evaluations,
            "trace": [
                [i, p.feedback_gain, p.input_gain, p.log10_lambda, v, inc]
                for i, p, v, inc in record.bo_trace.trace
            ],
        }
    return payload


def persist_record(record: RunRecord, out_dir: str):
    """Write config.ini, records.tsv, record.json, and optimizer traces.
    All writes stay inside ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(format_config(record.config), encoding="utf-8")

    lines = ["fingerprint\tmask_seed\tfold\terror_rate"]
    for seed, res in zip(record.repeat_seeds, record.results):
        for fold, rate in enumerate(res.per_fold_rates):
            lines.append(f"{record.fingerprint}\t{seed}\t{fold}\t{rate:.6f}")
    (out / "records.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    payload = _record_payload(record)
    (out / "record.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    if record.bo_trace is not None:
        rows = ["index\tfeedback_gain\tinput_gain\tlog10_lambda\tvalue\tincumbent"]
        rows += ["\t".join(repr(v) for v in row) for row in payload["bo"]["trace"]]
        (out / "bo_trace.tsv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    for r, opt in enumerate(record.cma_results):
        rows = ["generation\tgen_best\tgen_mean\trunning_best\ttest_of_gen_best\ttest_of_running_best"]
        rows += [
            "\t".join([str(int(row[0]))] + [repr(float(v)) for v in row[1:]])
            for row in opt.history
        ]
        (out / f"cma_history_r{r}.tsv").write_text("\n".join(rows) + "\n", encoding="utf-8")
