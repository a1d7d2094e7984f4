"""Experiment configuration: flat INI files with a lossless round-trip.

One [experiment] section of key = value pairs, every key typed and
validated. Serialization is canonical (fixed key order, round-trip float
formatting), so parse(format(c)) == c and the fingerprint is stable under
reordering of the input file.
"""

import configparser
import io
import math
from dataclasses import dataclass, fields, replace

from .readout import config_fingerprint

SECTION = "experiment"

ARCHITECTURES = ("shallow", "deep", "deep_optimized")
TASKS = ("synthetic", "japanese_vowels", "feature_csv")
PROTOCOLS = ("kfold", "fixed")


@dataclass(frozen=True)
class ExperimentConfig:
    # task and data
    task: str = "synthetic"
    jv_train_path: str = ""
    jv_test_path: str = ""
    csv_path: str = ""
    synth_classes: int = 9
    synth_per_class: int = 40
    synth_t_lo: int = 7
    synth_t_hi: int = 29
    synth_features: int = 12
    synth_difficulty: float = 0.5
    synth_seed: int = 0
    standardize: str = "none"
    snr_db: float = math.inf
    # architecture
    architecture: str = "shallow"
    n_layers: int = 1
    nodes_per_layer: int = 100
    delay_steps: int = 0  # 0 selects nodes_per_layer + 1
    nonlinearity: str = "sine"
    feedback_gain: float = 0.9
    input_gain: float = 0.3
    ridge_lambda: float = 1e-6
    optimize_hypers: bool = False
    bo_budget: int = 30
    cma_iterations: int = 40
    cma_sigma0: float = 0.3
    cma_patience: int = 10
    # protocol
    protocol: str = "kfold"
    folds: int = 10
    washout: int = 0
    method: str = "vote"
    repeats: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"architecture must be one of {ARCHITECTURES}")
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"protocol must be one of {PROTOCOLS}")
        if self.standardize not in ("none", "zscore", "maxabs"):
            raise ValueError("standardize must be none, zscore, or maxabs")
        if self.method not in ("vote", "mean"):
            raise ValueError("method must be vote or mean")
        if self.nonlinearity not in ("sine", "tanh"):
            raise ValueError("nonlinearity must be sine or tanh")
        if self.architecture == "shallow" and self.n_layers != 1:
            raise ValueError("shallow architecture requires n_layers = 1")
        if self.architecture != "shallow" and self.n_layers < 2:
            raise ValueError("deep architectures require n_layers >= 2")
        if self.architecture == "deep_optimized" and self.n_layers != 2:
            raise ValueError("interlayer optimization supports exactly 2 layers")
        if self.architecture == "deep_optimized" and self.protocol != "fixed":
            raise ValueError("deep_optimized requires protocol = fixed")
        for name in ("nodes_per_layer", "folds", "repeats", "bo_budget",
                     "cma_iterations", "cma_patience", "synth_classes",
                     "synth_per_class", "synth_features"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.delay_steps < 0:
            raise ValueError("delay_steps must be >= 0 (0 selects nodes + 1)")
        if self.washout < 0:
            raise ValueError("washout must be >= 0")
        if not 1 <= self.synth_t_lo <= self.synth_t_hi:
            raise ValueError("need 1 <= synth_t_lo <= synth_t_hi")
        if not (math.isfinite(self.snr_db) or self.snr_db == math.inf):
            raise ValueError("snr_db must be finite or +inf")

    @property
    def effective_delay_steps(self) -> int:
        return self.delay_steps if self.delay_steps else self.nodes_per_layer + 1

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool):
                out[f.name] = "true" if v else "false"
            elif isinstance(v, float):
                out[f.name] = repr(v)
            else:
                out[f.name] = str(v)
        return out

    def fingerprint(self) -> str:
        return config_fingerprint(self.to_dict())

    def override(self, **kwargs) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})


def _coerce(name: str, kind: type, raw: str):
    raw = raw.strip()
    try:
        if kind is bool:
            lowered = raw.lower()
            if lowered in ("true", "yes", "1", "on"):
                return True
            if lowered in ("false", "no", "0", "off"):
                return False
            raise ValueError
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw
    except ValueError:
        raise ValueError(f"key {name!r}: cannot parse {raw!r} as {kind.__name__}") from None


def parse_config(text: str) -> ExperimentConfig:
    """Parse an INI experiment file; unknown keys are rejected."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ValueError(f"malformed config: {exc}") from None
    if not parser.has_section(SECTION):
        raise ValueError(f"config must contain an [{SECTION}] section")
    extra = [s for s in parser.sections() if s != SECTION]
    if extra:
        raise ValueError(f"unexpected sections: {extra}")
    defaults = ExperimentConfig()
    known = {f.name for f in fields(ExperimentConfig)}
    kwargs = {}
    for key, raw in parser.items(SECTION):
        if key not in known:
            raise ValueError(f"unknown config key {key!r}")
        kwargs[key] = _coerce(key, type(getattr(defaults, key)), raw)
    return ExperimentConfig(**kwargs)


def format_config(config: ExperimentConfig) -> str:
    """Canonical INI text: declaration order, round-trip value formatting."""
    parser = configparser.ConfigParser(interpolation=None)
    parser[SECTION] = config.to_dict()
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def load_config(path: str) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def save_config(config: ExperimentConfig, path: str):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_config(config))
