"""Readout training, classification, cross-validation, and pipeline tests."""

import numpy as np
import pytest

from deepdelay import datasets as ds
from deepdelay import readout as ro
from deepdelay import reservoir as rv


def explicit_ridge(x, y, lam):
    return (np.linalg.inv(x.T @ x + lam * np.eye(x.shape[1])) @ x.T @ y).T


class TestRidge:
    def test_matches_explicit_inverse(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            t = int(rng.integers(25, 51))
            p = int(rng.integers(2, 21))
            c = int(rng.integers(1, 6))
            x = rng.normal(size=(t, p))
            y = rng.normal(size=(t, c))
            lam = 10.0 ** rng.uniform(-6, 0)
            got = ro.ridge_train(x, y, lam).values
            assert np.max(np.abs(got - explicit_ridge(x, y, lam))) < 1e-8

    def test_identity_design(self):
        # X = I: (I + lam I)^-1 Y = Y / (1 + lam)
        y = np.array([[1.0, -1.0], [0.5, 2.0], [0.0, 1.0]])
        w = ro.ridge_train(np.eye(3), y, 0.5)
        assert np.allclose(w.values, y.T / 1.5)

    def test_shrinkage_monotone(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(40, 6))
        y = rng.normal(size=(40, 2))
        norms = [
            np.linalg.norm(ro.ridge_train(x, y, lam).values)
            for lam in (1e-6, 1e-2, 1.0, 1e2, 1e6)
        ]
        assert all(a > b for a, b in zip(norms, norms[1:]))
        assert norms[-1] < 1e-3

    def test_singular_needs_lambda(self):
        x = np.ones((10, 3))  # rank 1
        y = np.ones((10, 1))
        with pytest.raises(np.linalg.LinAlgError):
            ro.ridge_train(x, y, 0.0)
        w = ro.ridge_train(x, y, 1e-6)
        assert np.all(np.isfinite(w.values))

    def test_bias_column(self):
        # y = 2 x + 3 is exactly representable only with the bias term
        x = np.linspace(-1, 1, 50)[:, None]
        y = 2.0 * x + 3.0
        w = ro.ridge_train(x, y, 0.0, bias=True)
        assert w.values[0] == pytest.approx([2.0, 3.0], abs=1e-9)
        scores = ro.readout_apply(x, w)
        assert np.max(np.abs(scores - y)) < 1e-9

    def test_input_validation(self):
        with pytest.raises(ValueError):
            ro.ridge_train(np.ones((3, 2)), np.ones((4, 1)), 0.1)
        with pytest.raises(ValueError):
            ro.ridge_train(np.full((3, 2), np.nan), np.ones((3, 1)), 0.1)
        with pytest.raises(ValueError):
            ro.ridge_train(np.ones((3, 2)), np.ones((3, 1)), -1.0)

    def test_apply_width_checked(self):
        w = ro.ridge_train(np.eye(3), np.ones((3, 2)), 0.1)
        with pytest.raises(ValueError):
            ro.readout_apply(np.ones((5, 4)), w)


class TestTargets:
    def test_hand_case(self):
        tm = ro.build_targets([0, 2], [2, 3], 3)
        assert tm.values.shape == (5, 3)
        assert np.array_equal(tm.values[0], [1.0, -1.0, -1.0])
        assert np.array_equal(tm.values[2], [-1.0, -1.0, 1.0])
        assert tm.utterance_boundaries == ((0, 2), (2, 5))

    def test_rowsums(self):
        # each +/-1 one-hot row sums to 2 - C
        tm = ro.build_targets([3, 1, 4], [4, 2, 7], 9)
        assert np.all(tm.values.sum(axis=1) == 2 - 9)

    def test_errors(self):
        with pytest.raises(ValueError):
            ro.build_targets([0, 3], [2, 2], 3)
        with pytest.raises(ValueError):
            ro.build_targets([0], [0], 2)
        with pytest.raises(ValueError):
            ro.build_targets([0, 1], [2], 2)


class TestClassify:
    def test_vote_majority(self):
        scores = np.array([[3.0, 0.0], [2.0, 5.0], [1.0, 4.0]])
        assert ro.classify_utterance(scores) == 1

    def test_vote_tie_lowest_index(self):
        scores = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
        assert ro.classify_utterance(scores) == 0

    def test_mean_mode(self):
        scores = np.array([[0.0, 10.0], [0.4, -9.0], [0.4, -9.0]])
        assert ro.classify_utterance(scores, method="vote") == 0
        assert ro.classify_utterance(scores, method="mean") == 0
        scores2 = np.array([[0.0, 10.0], [0.4, 0.0], [0.4, 0.0]])
        assert ro.classify_utterance(scores2, method="mean") == 1

    def test_invalid(self):
        with pytest.raises(ValueError):
            ro.classify_utterance(np.zeros((0, 3)))
        with pytest.raises(ValueError):
            ro.classify_utterance(np.zeros((2, 3)), method="median")

    def test_error_rate(self):
        assert ro.error_rate([0, 1, 2, 1], [0, 1, 1, 1]) == 0.25
        assert ro.error_rate([1], [1]) == 0.0
        with pytest.raises(ValueError):
            ro.error_rate([], [])
        with pytest.raises(ValueError):
            ro.error_rate([0, 1], [0])


class TestKfold:
    def test_partition_properties(self):
        folds = ro.kfold_split(23, 4, seed=9)
        sizes = [len(f) for f in folds]
        assert max(sizes) - min(sizes) <= 1
        joined = np.sort(np.concatenate(folds))
        assert np.array_equal(joined, np.arange(23))

    def test_determinism_and_seed_sensitivity(self):
        a = ro.kfold_split(30, 5, seed=1)
        b = ro.kfold_split(30, 5, seed=1)
        c = ro.kfold_split(30, 5, seed=2)
        assert all(np.array_equal(x, y) for x, y in zip(a, b))
        assert any(not np.array_equal(x, y) for x, y in zip(a, c))

    def test_argument_validation(self):
        with pytest.raises(ValueError):
            ro.kfold_split(3, 5, seed=0)
        with pytest.raises(ValueError):
            ro.kfold_split(10, 1, seed=0)


def small_config(n_inputs, n_nodes=24, mask_seed=3):
    params = rv.DelayReservoirParams(n_nodes, n_nodes + 1, 0.9, 0.4)
    return rv.make_deep_config(n_inputs, [params], mask_seed)


class TestPipeline:
    def test_gram_path_equals_ridge_train(self):
        # the pipeline accumulates X^T X per utterance; the result must match
        # a direct ridge fit of the stacked problem
        rng = np.random.default_rng(4)
        states = [rng.normal(size=(int(rng.integers(3, 8)), 6)) for _ in range(7)]
        labels = [int(rng.integers(0, 3)) for _ in range(7)]
        acc = ro._fold_gram(states, labels, range(7), 3, washout=0)
        w_gram = ro._fit_from_grams(acc, None, 0.01)
        x = np.vstack(states)
        y = ro.build_targets(labels, [s.shape[0] for s in states], 3).values
        w_ref = ro.ridge_train(x, y, 0.01)
        assert np.max(np.abs(w_gram.values - w_ref.values)) < 1e-10

    def test_learnable_task_low_error(self):
        data = ds.synth_dataset(4, 10, (6, 10), 6, difficulty=0.05, seed=5)
        cfg = small_config(6)
        res = ro.evaluate_pipeline(data, cfg, protocol="kfold", folds=5,
                                   ridge_lambda=1e-6, seed=0)
        assert res.error_rate <= 0.05
        assert res.n_items == 40
        assert len(res.per_fold_rates) == 5

    def test_shuffled_labels_hit_chance(self):
        data = ds.synth_dataset(9, 15, (6, 10), 6, difficulty=0.3, seed=6)
        rng = np.random.default_rng(0)
        perm = rng.permutation(data.labels())
        shuffled = ds.Dataset(
            sequences=tuple(
                ds.FeatureSequence(values=s.values, label=int(l), id=s.id)
                for s, l in zip(data.sequences, perm)
            ),
            n_classes=9,
            provenance="shuffled",
        )
        res = ro.evaluate_pipeline(shuffled, small_config(6), protocol="kfold",
                                   folds=5, ridge_lambda=1e-4, seed=1)
        assert abs(res.error_rate - 8.0 / 9.0) < 0.08

    def test_determinism(self):
        data = ds.synth_dataset(3, 8, (5, 9), 5, difficulty=0.4, seed=7)
        cfg = small_config(5)
        a = ro.evaluate_pipeline(data, cfg, protocol="kfold", folds=4, seed=3)
        b = ro.evaluate_pipeline(data, cfg, protocol="kfold", folds=4, seed=3)
        assert a.error_rate == b.error_rate
        assert a.per_fold_rates == b.per_fold_rates
        assert a.config_fingerprint == b.config_fingerprint
        c = ro.evaluate_pipeline(data, cfg, protocol="kfold", folds=4, seed=4)
        assert c.config_fingerprint != a.config_fingerprint

    def test_fixed_protocol(self):
        data = ds.synth_dataset(3, 10, (5, 9), 5, difficulty=0.2, seed=8)
        split_data = data.with_split(
            [i for i in range(30) if i % 10 < 7], [i for i in range(30) if i % 10 >= 7]
        )
        cfg = small_config(5)
        res = ro.evaluate_pipeline(split_data, cfg, protocol="fixed", ridge_lambda=1e-5)
        assert res.n_items == 9
        assert len(res.per_fold_rates) == 1
        with pytest.raises(ValueError):
            ro.evaluate_pipeline(data, cfg, protocol="fixed", ridge_lambda=1e-5)

    def test_precomputed_states_match(self):
        data = ds.synth_dataset(3, 8, (5, 9), 5, difficulty=0.4, seed=9)
        cfg = small_config(5)
        states = ro.compute_dataset_states(data, cfg)
        a = ro.evaluate_pipeline(data, cfg, protocol="kfold", folds=4, seed=0)
        b = ro.evaluate_pipeline(data, cfg, protocol="kfold", folds=4, seed=0, states=states)
        assert a.error_rate == b.error_rate and a.per_fold_rates == b.per_fold_rates

    def test_lambda_grid_selection_runs(self):
        data = ds.synth_dataset(3, 8, (5, 9), 5, difficulty=0.3, seed=10)
        cfg = small_config(5)
        res = ro.evaluate_pipeline(data, cfg, protocol="kfold", folds=4,
                                   ridge_lambda=None, lambda_grid=(1e-8, 1e-4, 1e-1),
                                   seed=2)
        assert 0.0 <= res.error_rate <= 1.0

    def test_confusion_matrix_consistent(self):
        data = ds.synth_dataset(4, 8, (5, 9), 5, difficulty=0.5, seed=11)
        cfg = small_config(5)
        res = ro.evaluate_pipeline(data, cfg, protocol="kfold", folds=4, seed=5)
        assert res.confusion.shape == (4, 4)
        assert res.confusion.sum() == 32
        row_counts = res.confusion.sum(axis=1)
        assert np.array_equal(np.sort(row_counts), np.full(4, 8))
        assert res.error_rate == pytest.approx(
            1.0 - res.confusion.trace() / res.confusion.sum()
        )

    def test_record_lines(self):
        data = ds.synth_dataset(3, 6, (5, 7), 4, difficulty=0.4, seed=12)
        cfg = small_config(4)
        res = ro.evaluate_pipeline(data, cfg, protocol="kfold", folds=3, seed=6)
        lines = ro.format_records(res, seed=6)
        assert len(lines) == 3
        for fold, line in enumerate(lines):
            fp, seed, idx, rate = line.split("\t")
            assert fp == res.config_fingerprint
            assert int(seed) == 6 and int(idx) == fold
            assert 0.0 <= float(rate) <= 1.0
