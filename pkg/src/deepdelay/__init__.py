"""Deep time-multiplexed reservoir computing.

Software model of a delay-based photonic reservoir computer: a single
nonlinear node with delayed feedback realizes N virtual neurons per layer,
layers stack through fixed or optimized interlayer masks, and a ridge
readout over all layers' states performs winner-takes-all sequence
classification. Includes the two optimizers used to configure such systems
(CMA-ES over interlayer masks, GP-based Bayesian optimization over the
gain/regularization hyperparameters) and a reproducible experiment harness.
"""

__version__ = "0.1.0"

from .bayesopt import (
    BoResult,
    GaussianProcess,
    HyperBounds,
    HyperPoint,
    bo_optimize,
    expected_improvement,
    gp_fit,
    matern52,
)
from .cmaes import (
    CmaEs,
    InterlayerOptResult,
    MinimizeResult,
    cma_ask,
    cma_best,
    cma_init,
    cma_tell,
    minimize,
    optimize_interlayer,
    overfitting_signature,
)
from .config import ExperimentConfig, format_config, load_config, parse_config, save_config
from .datasets import (
    CsvSchema,
    Dataset,
    FeatureSequence,
    class_templates,
    load_npz,
    parse_feature_csv,
    parse_jv,
    save_npz,
    standardize,
    synth_dataset,
    write_feature_csv,
    write_jv,
)
from .experiment import (
    RunRecord,
    apply_noise,
    build_architecture,
    load_task_dataset,
    run_experiment,
    tune_hypers,
)
from .kernels import BACKEND, backend
from .readout import (
    EvalResult,
    ReadoutWeights,
    TargetMatrix,
    build_targets,
    classify_utterance,
    error_rate,
    evaluate_pipeline,
    kfold_split,
    readout_apply,
    ridge_train,
)
from .report import load_record, plot_records, sample_std, summary_table, write_report
from .reservoir import (
    DeepConfig,
    DelayReservoirParams,
    Mask,
    concat_states,
    deep_run,
    delay_reservoir_run,
    eq6_reference_run,
    esn_run,
    generate_uniform_mask,
    inject_noise,
    make_deep_config,
    mask_from_values,
    masked_drive,
    physical_delay_to_steps,
)
from .seeds import derive_seed, rng_from

__all__ = [
    "__version__",
    "BACKEND",
    "BoResult",
    "CmaEs",
    "CsvSchema",
    "Dataset",
    "DeepConfig",
    "DelayReservoirParams",
    "EvalResult",
    "ExperimentConfig",
    "FeatureSequence",
    "GaussianProcess",
    "HyperBounds",
    "HyperPoint",
    "InterlayerOptResult",
    "Mask",
    "MinimizeResult",
    "ReadoutWeights",
    "RunRecord",
    "TargetMatrix",
    "apply_noise",
    "backend",
    "bo_optimize",
    "build_architecture",
    "build_targets",
    "class_templates",
    "classify_utterance",
    "cma_ask",
    "cma_best",
    "cma_init",
    "cma_tell",
    "concat_states",
    "deep_run",
    "delay_reservoir_run",
    "derive_seed",
    "eq6_reference_run",
    "error_rate",
    "esn_run",
    "evaluate_pipeline",
    "expected_improvement",
    "format_config",
    "generate_uniform_mask",
    "gp_fit",
    "inject_noise",
    "kfold_split",
    "load_config",
    "load_npz",
    "load_record",
    "load_task_dataset",
    "make_deep_config",
    "mask_from_values",
    "masked_drive",
    "matern52",
    "minimize",
    "optimize_interlayer",
    "overfitting_signature",
    "parse_config",
    "parse_feature_csv",
    "parse_jv",
    "physical_delay_to_steps",
    "plot_records",
    "readout_apply",
    "ridge_train",
    "rng_from",
    "run_experiment",
    "sample_std",
    "save_config",
    "save_npz",
    "standardize",
    "summary_table",
    "synth_dataset",
    "tune_hypers",
    "write_feature_csv",
    "write_jv",
    "write_report",
]
