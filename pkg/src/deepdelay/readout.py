"""Linear readout training and the classification evaluation pipeline.

The readout is the only trained part of the system: a ridge-regression map
from reservoir states to one +/-1 indicator channel per class,

    w = (X^T X + lambda I)^(-1) X^T Y,        y(n) = w x(n),

followed by winner-takes-all voting over the timesteps of each utterance.
"""

import hashlib
import json
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .reservoir import DeepConfig, concat_states, deep_run
from .seeds import derive_seed, rng_from

DEFAULT_LAMBDA_GRID = tuple(10.0**e for e in range(-9, 1))


@dataclass(frozen=True, eq=False)
class TargetMatrix:
    """Per-timestep +/-1 one-hot targets with utterance row ranges."""

    values: np.ndarray
    utterance_boundaries: tuple[tuple[int, int], ...]


@dataclass(frozen=True, eq=False)
class ReadoutWeights:
    """Trained linear output map, one row per class."""

    values: np.ndarray  # C x P (C x (P + 1) when fit with a bias column)
    ridge_lambda: float
    bias: bool = False

    @property
    def n_features(self) -> int:
        return self.values.shape[1] - (1 if self.bias else 0)


@dataclass(frozen=True, eq=False)
class EvalResult:
    error_rate: float
    per_fold_rates: tuple[float, ...]
    confusion: np.ndarray  # C x C counts, rows = true class
    n_items: int
    config_fingerprint: str


def build_targets(labels, lengths, n_classes: int) -> TargetMatrix:
    """Repeat each utterance's +/-1 one-hot coding over its timesteps."""
    if len(labels) != len(lengths):
        raise ValueError("labels and lengths must have equal length")
    bounds = []
    rows = []
    start = 0
    for label, length in zip(labels, lengths):
        if not 0 <= label < n_classes:
            raise ValueError(f"label {label} outside [0, {n_classes})")
        if length < 1:
            raise ValueError("utterance lengths must be >= 1")
        row = -np.ones(n_classes)
        row[label] = 1.0
        rows.append(np.tile(row, (length, 1)))
        bounds.append((start, start + length))
        start += length
    return TargetMatrix(values=np.vstack(rows), utterance_boundaries=tuple(bounds))


def _solve_normal_equations(gram: np.ndarray, xty: np.ndarray, lam: float) -> np.ndarray:
    """Solve (gram + lam I) w = xty by Cholesky; raises LinAlgError if not PD."""
    a = gram if lam == 0 else gram + lam * np.eye(gram.shape[0])
    try:
        c, low = scipy.linalg.cho_factor(a)
    except scipy.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"normal equations not positive definite (lambda={lam:g}); "
            "a singular state matrix needs lambda > 0"
        ) from exc
    return scipy.linalg.cho_solve((c, low), xty)


def ridge_train(x: np.ndarray, y: np.ndarray, ridge_lambda: float, bias: bool = False) -> ReadoutWeights:
    """Fit the readout by regularized linear regression.

    Solves the normal equations (X^T X + lambda I) w^T = X^T Y with a
    Cholesky factorization; the result matches the explicit inverse formula
    to solver precision on conditioned problems.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 2 or x.shape[0] != y.shape[0] or x.shape[0] < 1:
        raise ValueError("X and Y must be 2-D with matching row counts >= 1")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite entries in regression inputs")
    if not ridge_lambda >= 0:
        raise ValueError("ridge_lambda must be >= 0")
    if bias:
        x = np.hstack([x, np.ones((x.shape[0], 1))])
    w = _solve_normal_equations(x.T @ x, x.T @ y, ridge_lambda)
    return ReadoutWeights(values=w.T, ridge_lambda=float(ridge_lambda), bias=bias)


def readout_apply(x: np.ndarray, weights: ReadoutWeights) -> np.ndarray:
    """Per-timestep class scores y = X w^T."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != weights.n_features:
        raise ValueError(
            f"state width {x.shape[1] if x.ndim == 2 else '?'} does not match "
            f"readout width {weights.n_features}"
        )
    if weights.bias:
        return x @ weights.values[:, :-1].T + weights.values[:, -1]
    return x @ weights.values.T


def classify_utterance(scores: np.ndarray, method: str = "vote") -> int:
    """Utterance label from a T x C score block.

    "vote": per-timestep argmax, then the most recurrent class (ties broken
    by lowest class index). "mean": argmax of the time-averaged scores.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.shape[0] < 1:
        raise ValueError("scores must be a nonempty T x C block")
    if method == "vote":
        votes = np.argmax(scores, axis=1)
        return int(np.argmax(np.bincount(votes, minlength=scores.shape[1])))
    if method == "mean":
        return int(np.argmax(scores.mean(axis=0)))
    raise ValueError(f"unknown classification method {method!r}")


def error_rate(predictions, labels) -> float:
    """Fraction of misclassified items."""
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape or predictions.size == 0:
        raise ValueError("predictions and labels must be nonempty and equal-length")
    return float(np.mean(predictions != labels))


def kfold_split(n_items: int, k: int, seed: int) -> list[np.ndarray]:
    """Seeded partition into k disjoint folds with sizes differing by at most 1."""
    if k < 2:
        raise ValueError("k must be >= 2")
    if n_items < k:
        raise ValueError(f"cannot split {n_items} items into {k} folds")
    perm = rng_from(seed).permutation(n_items)
    return [np.sort(fold) for fold in np.array_split(perm, k)]


def config_fingerprint(payload: dict) -> str:
    """Stable hash of a configuration payload (order-independent)."""
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def compute_dataset_states(dataset, config: DeepConfig) -> list[np.ndarray]:
    """Concatenated multi-layer states for every sequence, buffers re-zeroed
    between utterances."""
    return [concat_states(deep_run(seq.values, config)) for seq in dataset.sequences]


class _GramAccumulator:
    """Running X^T X and X^T Y over utterances, exploiting constant targets
    within each utterance (X^T Y = outer(column sums, one-hot row))."""

    def __init__(self, width: int, n_classes: int):
        self.gram = np.zeros((width, width))
        self.xty = np.zeros((width, n_classes))
        self.rows = 0

    def add(self, x: np.ndarray, label: int):
        self.gram += x.T @ x
        coding = -np.ones(self.xty.shape[1])
        coding[label] = 1.0
        self.xty += np.outer(x.sum(axis=0), coding)
        self.rows += x.shape[0]


def _fold_gram(states, labels, indices, n_classes, washout):
    acc = _GramAccumulator(states[0].shape[1], n_classes)
    for i in indices:
        x = states[i][washout:]
        if x.shape[0]:
            acc.add(x, labels[i])
    return acc


def _fit_from_grams(total: _GramAccumulator, held_out: _GramAccumulator | None, lam: float) -> ReadoutWeights:
    if held_out is None:
        gram, xty = total.gram, total.xty
    else:
        gram, xty = total.gram - held_out.gram, total.xty - held_out.xty
    return ReadoutWeights(values=_solve_normal_equations(gram, xty, lam).T, ridge_lambda=lam)


def _classify_indices(states, weights, indices, method):
    return [classify_utterance(states[i] @ weights.values.T, method) for i in indices]


def _select_lambda(states, labels, train_gram, train_idx, n_classes, grid, washout, method, seed):
    """Pick lambda on an inner validation split carved from the training set."""
    order = rng_from(seed).permutation(len(train_idx))
    n_val = max(1, round(0.2 * len(train_idx)))
    val_idx = [train_idx[i] for i in order[:n_val]]
    val_gram = _fold_gram(states, labels, val_idx, n_classes, washout)
    val_labels = [labels[i] for i in val_idx]
    best_lam, best_err = None, None
    for lam in grid:
        w = _fit_from_grams(train_gram, val_gram, lam)
        err = error_rate(_classify_indices(states, w, val_idx, method), val_labels)
        if best_err is None or err < best_err:
            best_lam, best_err = lam, err
    return best_lam


def evaluate_pipeline(
    dataset,
    config: DeepConfig,
    *,
    protocol: str,
    folds: int = 10,
    ridge_lambda: float | None = None,
    lambda_grid=DEFAULT_LAMBDA_GRID,
    washout: int = 0,
    method: str = "vote",
    seed: int = 0,
    states: list[np.ndarray] | None = None,
) -> EvalResult:
    """Run the full classification evaluation for one architecture.

    States are computed once per utterance (independent of folds and of
    lambda) and reused. ``protocol`` is "kfold" (seeded partition of all
    sequences) or "fixed" (the dataset's stored train/test split). When
    ``ridge_lambda`` is None it is chosen per training set from
    ``lambda_grid`` on an inner validation split of the training items only.

    ``states`` may carry precomputed per-utterance state matrices (callers
    that sweep lambda or masks); they must match the dataset and config.
    """
    labels = [seq.label for seq in dataset.sequences]
    if states is None:
        states = compute_dataset_states(dataset, config)
    if protocol == "kfold":
        fold_sets = [list(f) for f in kfold_split(len(states), folds, derive_seed(seed, 0))]
        splits = [
            ([i for f, fs in enumerate(fold_sets) if f != j for i in fs], fold_sets[j])
            for j in range(folds)
        ]
    elif protocol == "fixed":
        if dataset.split is None:
            raise ValueError("protocol 'fixed' needs a dataset with a stored split")
        splits = [(list(dataset.split[0]), list(dataset.split[1]))]
    else:
        raise ValueError(f"unknown protocol {protocol!r}")

    n_classes = dataset.n_classes
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    per_fold = []
    for j, (train_idx, test_idx) in enumerate(splits):
        train_gram = _fold_gram(states, labels, train_idx, n_classes, washout)
        lam = ridge_lambda
        if lam is None:
            lam = _select_lambda(
                states, labels, train_gram, train_idx, n_classes,
                lambda_grid, washout, method, derive_seed(seed, 1, j),
            )
        weights = _fit_from_grams(train_gram, None, lam)
        preds = _classify_indices(states, weights, test_idx, method)
        fold_labels = [labels[i] for i in test_idx]
        per_fold.append(error_rate(preds, fold_labels))
        for p, t in zip(preds, fold_labels):
            confusion[t, p] += 1

    n_items = int(confusion.sum())
    fingerprint = config_fingerprint(
        {
            "layers": [
                (p.n_nodes, p.delay_steps, p.feedback_gain, p.input_gain, p.nonlinearity)
                for p in config.layers
            ],
            "mask_seeds": [config.input_mask.seed] + [m.seed for m in config.interlayer_masks],
            "protocol": protocol,
            "folds": folds if protocol == "kfold" else None,
            "ridge_lambda": ridge_lambda,
            "lambda_grid": list(lambda_grid) if ridge_lambda is None else None,
            "washout": washout,
            "method": method,
            "seed": seed,
            "dataset": dataset.provenance,
        }
    )
    return EvalResult(
        error_rate=float(1.0 - confusion.trace() / n_items),
        per_fold_rates=tuple(per_fold),
        confusion=confusion,
        n_items=n_items,
        config_fingerprint=fingerprint,
    )


def format_records(result: EvalResult, seed: int) -> list[str]:
    """One line per fold: fingerprint, seed, fold index, error rate."""
    return [
        f"{result.config_fingerprint}\t{seed}\t{fold}\t{rate:.6f}"
        for fold, rate in enumerate(result.per_fold_rates)
    ]
