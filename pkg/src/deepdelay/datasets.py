"""Dataset containers, corpus parsers, and the synthetic classification task.

All tasks are sequence classification: variable-length utterances of
fixed-width feature vectors, one integer class label per utterance.
"""

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .seeds import derive_seed, rng_from

JV_ROW_WIDTH = 12
JV_N_SPEAKERS = 9
# Documented utterance counts of the nine-speaker vowel corpus.
JV_TRAIN_COUNTS = (30,) * 9
JV_TEST_COUNTS = (31, 35, 88, 44, 29, 24, 40, 50, 29)


@dataclass(frozen=True, eq=False)
class FeatureSequence:
    """One utterance: T x K features plus its class label."""

    values: np.ndarray
    label: int
    id: str

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ValueError(f"sequence {self.id!r} must be a nonempty T x K array")
        if not np.all(np.isfinite(values)):
            raise ValueError(f"non-finite features in sequence {self.id!r}")
        if self.label < 0:
            raise ValueError(f"negative label in sequence {self.id!r}")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def length(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class Dataset:
    """A labelled sequence corpus with an optional stored train/test split."""

    sequences: tuple[FeatureSequence, ...]
    n_classes: int
    split: tuple[tuple[int, ...], tuple[int, ...]] | None = None
    provenance: str = "unknown"

    def __post_init__(self):
        sequences = tuple(self.sequences)
        if not sequences:
            raise ValueError("dataset must contain at least one sequence")
        width = sequences[0].values.shape[1]
        for seq in sequences:
            if seq.values.shape[1] != width:
                raise ValueError(
                    f"feature width mismatch: {seq.id!r} has {seq.values.shape[1]}, expected {width}"
                )
            if seq.label >= self.n_classes:
                raise ValueError(f"label {seq.label} outside [0, {self.n_classes})")
        object.__setattr__(self, "sequences", sequences)
        if self.split is not None:
            train, test = (tuple(int(i) for i in part) for part in self.split)
            seen = set(train) | set(test)
            if len(train) + len(test) != len(seen):
                raise ValueError("train/test splits overlap or repeat indices")
            if not all(0 <= i < len(sequences) for i in seen):
                raise ValueError("split index out of range")
            missing = set(range(self.n_classes)) - {sequences[i].label for i in train}
            if missing:
                raise ValueError(f"classes {sorted(missing)} absent from the train split")
            object.__setattr__(self, "split", (train, test))

    @property
    def n_features(self) -> int:
        return self.sequences[0].values.shape[1]

    def labels(self) -> np.ndarray:
        return np.array([seq.label for seq in self.sequences])

    def with_split(self, train, test) -> "Dataset":
        return replace(self, split=(tuple(train), tuple(test)))

    def subset(self, indices, provenance_suffix: str = "subset") -> "Dataset":
        seqs = tuple(self.sequences[i] for i in indices)
        return Dataset(
            sequences=seqs,
            n_classes=self.n_classes,
            split=None,
            provenance=f"{self.provenance}|{provenance_suffix}",
        )


def _parse_block_rows(lines, width, first_line_no):
    rows = []
    for offset, line in enumerate(lines):
        parts = line.split()
        if len(parts) != width:
            raise ValueError(
                f"line {first_line_no + offset}: expected {width} values, got {len(parts)}"
            )
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            raise ValueError(f"line {first_line_no + offset}: non-numeric value") from None
    return np.array(rows)


def _split_blocks(text):
    """Split utterance blocks separated by blank lines; yields
    (block line list, 1-based line number of the block's first line)."""
    blocks = []
    current, current_start = [], None
    for line_no, line in enumerate(text.splitlines(), start=1):
        if line.strip():
            if not current:
                current_start = line_no
            current.append(line)
        elif current:
            blocks.append((current, current_start))
            current = []
    if current:
        blocks.append((current, current_start))
    return blocks


def _parse_jv_part(text, counts, part_name):
    blocks = _split_blocks(text)
    if len(blocks) != sum(counts):
        raise ValueError(
            f"{part_name}: found {len(blocks)} utterance blocks, "
            f"speaker counts sum to {sum(counts)}"
        )
    sequences = []
    block_iter = iter(blocks)
    for speaker, count in enumerate(counts):
        for k in range(count):
            lines, start = next(block_iter)
            values = _parse_block_rows(lines, JV_ROW_WIDTH, start)
            sequences.append(
                FeatureSequence(values=values, label=speaker, id=f"{part_name}_s{speaker}_u{k}")
            )
    return sequences


def parse_jv(train_text: str, test_text: str, per_speaker_counts=None) -> Dataset:
    """Parse the nine-speaker vowel corpus from its two block-format text files.

    Utterances are blank-line-separated blocks of rows with 12 cepstral
    coefficients each; block k belongs to the speaker whose cumulative count
    range contains k. Speaker index is the class label.
    """
    train_counts, test_counts = per_speaker_counts or (JV_TRAIN_COUNTS, JV_TEST_COUNTS)
    if len(train_counts) != len(test_counts):
        raise ValueError("train and test speaker count lists must have equal length")
    train_seqs = _parse_jv_part(train_text, train_counts, "train")
    test_seqs = _parse_jv_part(test_text, test_counts, "test")
    n_train = len(train_seqs)
    return Dataset(
        sequences=tuple(train_seqs + test_seqs),
        n_classes=len(train_counts),
        split=(tuple(range(n_train)), tuple(range(n_train, n_train + len(test_seqs)))),
        provenance="japanese_vowels",
    )


def _format_block(values):
    return "\n".join(" ".join(repr(float(v)) for v in row) for row in values)


def write_jv(dataset: Dataset) -> tuple[str, str]:
    """Serialize a split dataset back to the two block-format texts.

    Floats are written with round-trip precision, so parse_jv(write_jv(d))
    reproduces d exactly.
    """
    if dataset.split is None:
        raise ValueError("write_jv needs a dataset with a train/test split")
    parts = []
    for indices in dataset.split:
        ordered = sorted(indices, key=lambda i: dataset.sequences[i].label)
        blocks = [_format_block(dataset.sequences[i].values) for i in ordered]
        parts.append("\n\n".join(blocks) + "\n")
    return parts[0], parts[1]


def jv_counts_from_split(dataset: Dataset) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Per-speaker utterance counts of each side of the stored split."""
    counts = []
    for indices in dataset.split:
        part = np.zeros(dataset.n_classes, dtype=int)
        for i in indices:
            part[dataset.sequences[i].label] += 1
        counts.append(tuple(int(c) for c in part))
    return counts[0], counts[1]


@dataclass(frozen=True)
class CsvSchema:
    """Column layout of a flat feature table: one timestep per row, rows
    grouped into utterances by the id column in file order."""

    id_column: str = "id"
    label_column: str = "label"
    delimiter: str = ","


def parse_feature_csv(text: str, schema: CsvSchema = CsvSchema()) -> Dataset:
    """Parse a delimited feature table into a dataset.

    The header names the id and label columns; every remaining column is a
    feature. Labels must be nonnegative integers and constant within an
    utterance; class count is max label + 1.
    """
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty feature table")
    header = [h.strip() for h in lines[0].split(schema.delimiter)]
    for name in (schema.id_column, schema.label_column):
        if name not in header:
            raise ValueError(f"missing required column {name!r} in header")
    id_pos = header.index(schema.id_column)
    label_pos = header.index(schema.label_column)
    feat_pos = [i for i in range(len(header)) if i not in (id_pos, label_pos)]
    if not feat_pos:
        raise ValueError("no feature columns in header")

    order: list[str] = []
    rows: dict[str, list[list[float]]] = {}
    labels: dict[str, int] = {}
    for line_no, line in enumerate(lines[1:], start=2):
        parts = [p.strip() for p in line.split(schema.delimiter)]
        if len(parts) != len(header):
            raise ValueError(f"line {line_no}: expected {len(header)} columns, got {len(parts)}")
        uid = parts[id_pos]
        try:
            label = int(parts[label_pos])
        except ValueError:
            raise ValueError(f"line {line_no}: label {parts[label_pos]!r} is not an integer") from None
        if label < 0:
            raise ValueError(f"line {line_no}: negative label {label}")
        try:
            features = [float(parts[i]) for i in feat_pos]
        except ValueError:
            raise ValueError(f"line {line_no}: non-numeric feature value") from None
        if uid not in rows:
            order.append(uid)
            rows[uid] = []
            labels[uid] = label
        elif labels[uid] != label:
            raise ValueError(f"line {line_no}: label changes within utterance {uid!r}")
        rows[uid].append(features)

    sequences = tuple(
        FeatureSequence(values=np.array(rows[uid]), label=labels[uid], id=uid) for uid in order
    )
    n_classes = max(labels.values()) + 1
    return Dataset(sequences=sequences, n_classes=n_classes, provenance="feature_csv")


def write_feature_csv(dataset: Dataset, schema: CsvSchema = CsvSchema()) -> str:
    """Serialize to the flat table format with round-trip float precision."""
    k = dataset.n_features
    header = [schema.id_column, schema.label_column] + [f"f{i}" for i in range(k)]
    lines = [schema.delimiter.join(header)]
    for seq in dataset.sequences:
        for row in seq.values:
            cells = [seq.id, str(seq.label)] + [repr(float(v)) for v in row]
            lines.append(schema.delimiter.join(cells))
    return "\n".join(lines) + "\n"


def synth_dataset(
    n_classes: int = 9,
    n_per_class: int = 40,
    t_range: tuple[int, int] = (7, 29),
    n_features: int = 12,
    difficulty: float = 0.5,
    seed: int = 0,
) -> Dataset:
    """Generate the synthetic multivariate classification task.

    Each class is a bank of slow sinusoidal feature templates (per-class
    frequency, per-feature phase and amplitude); an utterance is a random-
    length cut of its class template with a random overall gain in
    [0.8, 1.2] plus white feature noise of standard deviation ``difficulty``.
    At difficulty -> 0 classes are separated exactly by template matching;
    raising difficulty degrades any classifier smoothly.
    """
    if n_classes < 2 or n_per_class < 1 or n_features < 1:
        raise ValueError("need n_classes >= 2, n_per_class >= 1, n_features >= 1")
    t_lo, t_hi = t_range
    if not 1 <= t_lo <= t_hi:
        raise ValueError("t_range must satisfy 1 <= lo <= hi")
    if difficulty < 0:
        raise ValueError("difficulty must be >= 0")

    freqs, phases, amps = _synth_class_params(n_classes, n_features, seed)

    sequences = []
    for c in range(n_classes):
        for u in range(n_per_class):
            rng = rng_from(derive_seed(seed, 1, c, u))
            t = int(rng.integers(t_lo, t_hi + 1))
            gain = rng.uniform(0.8, 1.2)
            steps = np.arange(t)[:, None]
            template = amps[c] * np.sin(freqs[c] * steps + phases[c])
            noise = difficulty * rng.standard_normal((t, n_features))
            sequences.append(
                FeatureSequence(values=gain * template + noise, label=c, id=f"c{c}_u{u}")
            )
    return Dataset(
        sequences=tuple(sequences),
        n_classes=n_classes,
        provenance=f"synthetic(classes={n_classes},difficulty={difficulty:g},seed={seed})",
    )


def save_npz(dataset: Dataset, path: str):
    """Store a dataset as a flat npz archive (no pickling): concatenated
    feature rows plus offsets, labels, ids, split, provenance."""
    values = np.vstack([seq.values for seq in dataset.sequences])
    lengths = np.array([seq.length for seq in dataset.sequences], dtype=np.int64)
    split = dataset.split or ((), ())
    np.savez(
        path,
        values=values,
        lengths=lengths,
        labels=np.array([seq.label for seq in dataset.sequences], dtype=np.int64),
        ids=np.array([seq.id for seq in dataset.sequences]),
        n_classes=np.array(dataset.n_classes, dtype=np.int64),
        has_split=np.array(dataset.split is not None),
        split_train=np.array(split[0], dtype=np.int64),
        split_test=np.array(split[1], dtype=np.int64),
        provenance=np.array(dataset.provenance),
    )


def load_npz(path: str) -> Dataset:
    with np.load(path, allow_pickle=False) as archive:
        offsets = np.concatenate([[0], np.cumsum(archive["lengths"])])
        values = archive["values"]
        sequences = tuple(
            FeatureSequence(
                values=values[offsets[i] : offsets[i + 1]],
                label=int(label),
                id=str(uid),
            )
            for i, (label, uid) in enumerate(zip(archive["labels"], archive["ids"]))
        )
        split = None
        if bool(archive["has_split"]):
            split = (
                tuple(int(i) for i in archive["split_train"]),
                tuple(int(i) for i in archive["split_test"]),
            )
        return Dataset(
            sequences=sequences,
            n_classes=int(archive["n_classes"]),
            split=split,
            provenance=str(archive["provenance"]),
        )


def _synth_class_params(n_classes, n_features, seed):
    rng = rng_from(derive_seed(seed, 0))
    freqs = rng.uniform(0.1, 0.5, size=n_classes)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(n_classes, n_features))
    amps = rng.uniform(0.3, 1.0, size=(n_classes, n_features))
    return freqs, phases, amps


def class_templates(n_classes: int, t: int, n_features: int, seed: int) -> np.ndarray:
    """Noise-free class templates of the synthetic task, for template-matching
    baselines: n_classes x t x n_features."""
    freqs, phases, amps = _synth_class_params(n_classes, n_features, seed)
    steps = np.arange(t)[:, None]
    return np.stack([amps[c] * np.sin(freqs[c] * steps + phases[c]) for c in range(n_classes)])


def standardize(dataset: Dataset, scheme: str = "zscore") -> Dataset:
    """Rescale features using statistics of the train split only.

    "zscore" centers and scales each feature; a zero-variance feature is
    passed through unscaled with a warning. "maxabs" divides all features by
    the global maximum absolute value. Falls back to the whole corpus when
    no split is stored.
    """
    indices = dataset.split[0] if dataset.split is not None else range(len(dataset.sequences))
    stacked = np.vstack([dataset.sequences[i].values for i in indices])
    if scheme == "zscore":
        mean = stacked.mean(axis=0)
        std = stacked.std(axis=0)
        dead = std == 0
        if np.any(dead):
            warnings.warn(
                f"zero-variance features {np.flatnonzero(dead).tolist()} left unscaled",
                stacklevel=2,
            )
            std = np.where(dead, 1.0, std)
            mean = np.where(dead, 0.0, mean)

        def transform(v):
            return (v - mean) / std
    elif scheme == "maxabs":
        peak = np.max(np.abs(stacked))
        if peak == 0:
            raise ValueError("all-zero corpus cannot be maxabs-scaled")

        def transform(v):
            return v / peak
    else:
        raise ValueError(f"unknown standardization scheme {scheme!r}")
    sequences = tuple(
        FeatureSequence(values=transform(seq.values), label=seq.label, id=seq.id)
        for seq in dataset.sequences
    )
    return replace(
        dataset, sequences=sequences, provenance=f"{dataset.provenance}|{scheme}(train)"
    )
