"""Shared fixtures: the stand-in speech corpus and real-corpus discovery.

The nine-speaker vowel corpus cannot be vendored; tests that need the real
data (see REAL_JV_HELP) auto-skip when it is absent. A structurally
identical stand-in corpus — same class count, feature width, utterance
lengths, split sizes, and on-disk text format — is generated
deterministically so the full pipeline is exercised end to end regardless.
"""

import os
from pathlib import Path

import pytest

from deepdelay.datasets import (
    JV_TEST_COUNTS,
    JV_TRAIN_COUNTS,
    Dataset,
    parse_jv,
    synth_dataset,
    write_jv,
)

REAL_JV_HELP = (
    "real nine-speaker vowel corpus not found: set DEEPDELAY_JV_DIR or place "
    "ae.train/ae.test under data/japanese_vowels/"
)

# stand-in hardness, pinned so its error levels stay in a useful range:
# large enough that reservoir size matters, small enough that the task is
# clearly learnable (calibrated once against the shallow N=100 baseline,
# which lands near 0.06 test error with tuned gains at this setting)
STANDIN_DIFFICULTY = 0.35
STANDIN_SEED = 97


def build_standin_dataset(difficulty: float = STANDIN_DIFFICULTY) -> Dataset:
    """9 classes x 12 features with the real corpus's 270/370 split shape."""
    n_train = JV_TRAIN_COUNTS[0]
    per_class = max(JV_TEST_COUNTS) + n_train
    full = synth_dataset(
        n_classes=9,
        n_per_class=per_class,
        t_range=(7, 29),
        n_features=12,
        difficulty=difficulty,
        seed=STANDIN_SEED,
    )
    by_class = [
        [seq for seq in full.sequences if seq.label == c] for c in range(9)
    ]
    train = [seq for c in range(9) for seq in by_class[c][:n_train]]
    test = [seq for c in range(9) for seq in by_class[c][n_train : n_train + JV_TEST_COUNTS[c]]]
    sequences = tuple(train + test)
    return Dataset(
        sequences=sequences,
        n_classes=9,
        split=(tuple(range(len(train))), tuple(range(len(train), len(sequences)))),
        provenance="synthetic_vowels_standin",
    )


@pytest.fixture(scope="session")
def standin_corpus_dir(tmp_path_factory) -> Path:
    """Directory holding the stand-in corpus in the two-file text format."""
    dataset = build_standin_dataset()
    train_text, test_text = write_jv(dataset)
    out = tmp_path_factory.mktemp("standin_jv")
    (out / "ae.train").write_text(train_text, encoding="utf-8")
    (out / "ae.test").write_text(test_text, encoding="utf-8")
    return out


@pytest.fixture(scope="session")
def standin_dataset(standin_corpus_dir) -> Dataset:
    """The stand-in corpus read back through the real text parser."""
    return parse_jv(
        (standin_corpus_dir / "ae.train").read_text(encoding="utf-8"),
        (standin_corpus_dir / "ae.test").read_text(encoding="utf-8"),
    )


def find_real_jv_dir() -> Path | None:
    candidates = []
    env = os.environ.get("DEEPDELAY_JV_DIR")
    if env:
        candidates.append(Path(env))
    candidates.append(Path(__file__).resolve().parent.parent / "data" / "japanese_vowels")
    for cand in candidates:
        if (cand / "ae.train").is_file() and (cand / "ae.test").is_file():
            return cand
    return None


@pytest.fixture(scope="session")
def real_jv_dataset() -> Dataset:
    jv_dir = find_real_jv_dir()
    if jv_dir is None:
        pytest.skip(REAL_JV_HELP)
    return parse_jv(
        (jv_dir / "ae.train").read_text(encoding="utf-8"),
        (jv_dir / "ae.test").read_text(encoding="utf-8"),
    )
