"""Core reservoir tests: recursion oracles, stacking, masks, noise."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deepdelay import reservoir as rv


def random_instance(rng, n_nodes=None, n_timesteps=None, n_inputs=None):
    n = n_nodes or int(rng.integers(1, 9))
    t = n_timesteps or int(rng.integers(1, 11))
    k = n_inputs or int(rng.integers(1, 5))
    inputs = rng.uniform(-1.0, 1.0, size=(t, k))
    mask = rv.generate_uniform_mask(n, k, seed=int(rng.integers(0, 2**32)))
    return inputs, mask, n, t, k


def brute_force_flat(inputs, mask, n_nodes, delay, alpha, beta, nonlinearity="sine", init=None):
    """Plain-python flat-time recursion, written independently of the kernels."""
    f = math.sin if nonlinearity == "sine" else math.tanh
    t_steps = inputs.shape[0] * n_nodes
    drive = beta * (inputs @ mask.values.T)
    flat = [0.0] * t_steps
    for t in range(t_steps):
        if t >= delay:
            prev = flat[t - delay]
        else:
            prev = 0.0 if init is None else float(init[t])
        flat[t] = f(alpha * prev + drive[t // n_nodes, t % n_nodes])
    return np.array(flat).reshape(inputs.shape[0], n_nodes)


class TestDelayRecursion:
    def test_hand_computed_three_steps(self):
        # N=1, K=1, T=3, D=1, alpha=0.5, beta=1, mask=[1]:
        #   s0 = sin(1.0)
        #   s1 = sin(0.5 sin(1.0) - 0.2)
        #   s2 = sin(0.5 s1 + 0.4)
        inputs = np.array([[1.0], [-0.2], [0.4]])
        mask = rv.mask_from_values(np.array([[1.0]]))
        params = rv.DelayReservoirParams(
            n_nodes=1, delay_steps=1, feedback_gain=0.5, input_gain=1.0
        )
        expected0 = math.sin(1.0)
        expected1 = math.sin(0.5 * expected0 - 0.2)
        expected2 = math.sin(0.5 * expected1 + 0.4)
        states = rv.delay_reservoir_run(inputs, mask, params)
        assert states.shape == (3, 1)
        assert states[:, 0] == pytest.approx([expected0, expected1, expected2], abs=1e-15)

    def test_matches_brute_force_python(self):
        rng = np.random.default_rng(10)
        for _ in range(30):
            inputs, mask, n, t, k = random_instance(rng)
            delay = int(rng.integers(1, 3 * n + 2))
            alpha, beta = rng.uniform(0, 1.1), rng.uniform(0, 1.5)
            params = rv.DelayReservoirParams(n, delay, alpha, beta)
            got = rv.delay_reservoir_run(inputs, mask, params)
            ref = brute_force_flat(inputs, mask, n, delay, alpha, beta)
            assert np.max(np.abs(got - ref)) < 1e-15

    def test_init_is_prehistory(self):
        rng = np.random.default_rng(11)
        inputs, mask, n, t, k = random_instance(rng, n_nodes=3, n_timesteps=4)
        params = rv.DelayReservoirParams(3, 5, 0.9, 0.7)
        init = rng.uniform(-1, 1, size=5)
        got = rv.delay_reservoir_run(inputs, mask, params, init=init)
        ref = brute_force_flat(inputs, mask, 3, 5, 0.9, 0.7, init=init)
        assert np.max(np.abs(got - ref)) < 1e-15

    def test_default_init_is_zeros(self):
        rng = np.random.default_rng(12)
        inputs, mask, n, t, k = random_instance(rng)
        params = rv.DelayReservoirParams(n, n + 1, 0.8, 0.5)
        a = rv.delay_reservoir_run(inputs, mask, params)
        b = rv.delay_reservoir_run(inputs, mask, params, init=np.zeros(n + 1))
        assert np.array_equal(a, b)

    def test_init_length_checked(self):
        inputs = np.zeros((4, 2))
        mask = rv.generate_uniform_mask(3, 2, seed=0)
        params = rv.DelayReservoirParams(3, 7, 0.9, 0.5)
        with pytest.raises(ValueError):
            rv.delay_reservoir_run(inputs, mask, params, init=np.zeros(6))

    def test_causality(self):
        # a perturbation at timestep t0 cannot reach earlier rows
        rng = np.random.default_rng(13)
        inputs = rng.uniform(-1, 1, size=(8, 3))
        mask = rv.generate_uniform_mask(5, 3, seed=4)
        params = rv.DelayReservoirParams(5, 6, 0.9, 0.6)
        base = rv.delay_reservoir_run(inputs, mask, params)
        bumped = inputs.copy()
        bumped[5] += 0.25
        pert = rv.delay_reservoir_run(bumped, mask, params)
        assert np.array_equal(base[:5], pert[:5])
        assert not np.array_equal(base[5:], pert[5:])

    def test_fading_memory(self):
        # contracting feedback (|alpha| < 1, sine is 1-Lipschitz) forgets the
        # initial buffer at rate alpha^(steps/delay)
        rng = np.random.default_rng(14)
        inputs = rng.uniform(-1, 1, size=(200, 2))
        mask = rv.generate_uniform_mask(10, 2, seed=5)
        params = rv.DelayReservoirParams(10, 11, 0.9, 0.8)
        a = rv.delay_reservoir_run(inputs, mask, params, init=rng.uniform(-1, 1, 11))
        b = rv.delay_reservoir_run(inputs, mask, params, init=rng.uniform(-1, 1, 11))
        assert np.max(np.abs(a[-1] - b[-1])) < 1e-6
        assert np.max(np.abs(a[0] - b[0])) > 1e-3

    def test_sine_states_bounded(self):
        rng = np.random.default_rng(15)
        inputs = rng.uniform(-10, 10, size=(20, 4))
        mask = rv.generate_uniform_mask(7, 4, seed=6)
        params = rv.DelayReservoirParams(7, 8, 1.1, 1.9)
        states = rv.delay_reservoir_run(inputs, mask, params)
        assert np.all(states >= -1.0) and np.all(states <= 1.0)

    def test_tanh_nonlinearity(self):
        rng = np.random.default_rng(16)
        inputs, mask, n, t, k = random_instance(rng, n_nodes=4)
        params = rv.DelayReservoirParams(4, 5, 0.7, 0.9, nonlinearity="tanh")
        got = rv.delay_reservoir_run(inputs, mask, params)
        ref = brute_force_flat(inputs, mask, 4, 5, 0.7, 0.9, nonlinearity="tanh")
        assert np.max(np.abs(got - ref)) < 1e-12


class TestClassicalEquivalence:
    def test_oracle_equivalence_batch(self):
        # D = N + 1 reproduces the classical two-branch update exactly
        rng = np.random.default_rng(20)
        for _ in range(100):
            inputs, mask, n, t, k = random_instance(rng)
            alpha, beta = rng.uniform(0, 1.2), rng.uniform(0, 2.0)
            init = rng.uniform(-1, 1, size=n + 1)
            params = rv.DelayReservoirParams(n, n + 1, alpha, beta)
            flat = rv.delay_reservoir_run(inputs, mask, params, init=init)
            ref = rv.eq6_reference_run(inputs, mask, alpha, beta, init=init)
            assert np.max(np.abs(flat - ref)) <= 1e-15

    @settings(max_examples=40, deadline=None)
    @given(
        n=st.integers(1, 8),
        t=st.integers(1, 10),
        k=st.integers(1, 4),
        seed=st.integers(0, 2**31),
    )
    def test_oracle_equivalence_property(self, n, t, k, seed):
        rng = np.random.default_rng(seed)
        inputs = rng.uniform(-1, 1, size=(t, k))
        mask = rv.generate_uniform_mask(n, k, seed=seed)
        alpha, beta = rng.uniform(0, 1.2), rng.uniform(0, 2.0)
        params = rv.DelayReservoirParams(n, n + 1, alpha, beta)
        flat = rv.delay_reservoir_run(inputs, mask, params)
        ref = rv.eq6_reference_run(inputs, mask, alpha, beta)
        assert np.max(np.abs(flat - ref)) <= 1e-15


class TestDeepStacking:
    def _two_layer_config(self, rng, k=3, n1=4, n2=5):
        p1 = rv.DelayReservoirParams(n1, n1 + 1, 0.9, 0.6)
        p2 = rv.DelayReservoirParams(n2, n2 + 1, 0.9, 0.6)
        return rv.make_deep_config(k, [p1, p2], mask_seed=int(rng.integers(0, 2**32)))

    def test_depth_one_bit_identical(self):
        rng = np.random.default_rng(30)
        for _ in range(50):
            inputs, mask, n, t, k = random_instance(rng)
            params = rv.DelayReservoirParams(n, int(rng.integers(1, 2 * n + 2)),
                                             rng.uniform(0, 1.1), rng.uniform(0, 1.5))
            config = rv.DeepConfig(layers=(params,), input_mask=mask)
            deep = rv.deep_run(inputs, config)
            assert len(deep) == 1
            single = rv.delay_reservoir_run(inputs, mask, params)
            assert np.array_equal(deep[0], single)

    def test_stacked_matches_brute_force(self):
        rng = np.random.default_rng(31)
        for _ in range(10):
            config = self._two_layer_config(rng)
            inputs = rng.uniform(-1, 1, size=(6, 3))
            got = rv.deep_run(inputs, config)
            ref1 = brute_force_flat(inputs, config.input_mask, 4, 5, 0.9, 0.6)
            ref2 = brute_force_flat(ref1, config.interlayer_masks[0], 5, 6, 0.9, 0.6)
            assert np.max(np.abs(got[0] - ref1)) < 1e-12
            assert np.max(np.abs(got[1] - ref2)) < 1e-12

    def test_zero_input_gain_severs_layers(self):
        # with beta_2 = 0 the second layer ignores the first entirely
        rng = np.random.default_rng(32)
        p1 = rv.DelayReservoirParams(4, 5, 0.9, 0.6)
        p2 = rv.DelayReservoirParams(3, 4, 0.9, 0.0)
        cfg_a = rv.make_deep_config(2, [p1, p2], mask_seed=1, shared_gains=False)
        inputs_a = rng.uniform(-1, 1, size=(7, 2))
        inputs_b = rng.uniform(-1, 1, size=(7, 2))
        out_a = rv.deep_run(inputs_a, cfg_a)
        out_b = rv.deep_run(inputs_b, cfg_a)
        assert not np.array_equal(out_a[0], out_b[0])
        assert np.array_equal(out_a[1], out_b[1])

    def test_concat_layout(self):
        rng = np.random.default_rng(33)
        config = self._two_layer_config(rng)
        inputs = rng.uniform(-1, 1, size=(6, 3))
        per_layer = rv.deep_run(inputs, config)
        concat = rv.concat_states(per_layer)
        assert concat.shape == (6, 9)
        assert np.array_equal(concat[:, :4], per_layer[0])
        assert np.array_equal(concat[:, 4:], per_layer[1])

    def test_concat_timestep_mismatch(self):
        with pytest.raises(ValueError):
            rv.concat_states([np.zeros((3, 2)), np.zeros((4, 2))])

    def test_config_dimension_chain_checked(self):
        p = rv.DelayReservoirParams(4, 5, 0.9, 0.6)
        good = rv.generate_uniform_mask(4, 2, seed=0)
        bad_interlayer = rv.generate_uniform_mask(4, 3, seed=1)  # expects 4x4
        with pytest.raises(ValueError):
            rv.DeepConfig(layers=(p, p), input_mask=good,
                          interlayer_masks=(bad_interlayer,))

    def test_mask_seed_determinism(self):
        p = rv.DelayReservoirParams(4, 5, 0.9, 0.6)
        a = rv.make_deep_config(3, [p, p], mask_seed=42)
        b = rv.make_deep_config(3, [p, p], mask_seed=42)
        c = rv.make_deep_config(3, [p, p], mask_seed=43)
        assert np.array_equal(a.input_mask.values, b.input_mask.values)
        assert np.array_equal(a.interlayer_masks[0].values, b.interlayer_masks[0].values)
        assert not np.array_equal(a.input_mask.values, c.input_mask.values)

    def test_dataset_states_helper(self):
        rng = np.random.default_rng(34)
        mask = rv.generate_uniform_mask(4, 2, seed=7)
        params = rv.DelayReservoirParams(4, 5, 0.9, 0.6)
        seqs = [rng.uniform(-1, 1, size=(int(rng.integers(2, 6)), 2)) for _ in range(5)]
        got = rv.compute_dataset_states_single(seqs, params, mask)
        for seq, states in zip(seqs, got):
            assert np.array_equal(states, rv.delay_reservoir_run(seq, mask, params))


class TestMasks:
    def test_uniform_moments(self):
        mask = rv.generate_uniform_mask(400, 250, seed=8)
        values = mask.values.ravel()
        assert np.all(np.abs(values) <= 1.0)
        assert abs(values.mean()) < 0.01
        assert abs(values.var() - 1.0 / 3.0) < 0.01

    def test_uniform_histogram(self):
        # 10 equal bins of U(-1, 1): each holds 10% +/- sampling error
        values = rv.generate_uniform_mask(500, 200, seed=9).values.ravel()
        counts, _ = np.histogram(values, bins=10, range=(-1.0, 1.0))
        assert np.all(np.abs(counts / values.size - 0.1) < 0.01)

    def test_mask_immutable(self):
        mask = rv.generate_uniform_mask(3, 3, seed=1)
        with pytest.raises(ValueError):
            mask.values[0, 0] = 2.0

    def test_mask_value_bounds_checked(self):
        with pytest.raises(ValueError):
            rv.mask_from_values(np.array([[1.5]]))
        with pytest.raises(ValueError):
            rv.mask_from_values(np.array([[np.nan]]))

    def test_masked_drive_hand_case(self):
        inputs = np.array([[1.0, 2.0], [0.5, -1.0]])
        mask = rv.mask_from_values(np.array([[1.0, 0.0], [0.5, -0.5]]))
        drive = rv.masked_drive(inputs, mask, input_gain=2.0)
        assert drive == pytest.approx(np.array([[2.0, -1.0], [1.0, 1.5]]))


class TestNoise:
    def test_noise_power_oracle(self):
        rng = np.random.default_rng(40)
        signal = rng.uniform(-1, 1, size=(500, 200))
        noisy = rv.inject_noise(signal, snr_db=3.0, seed=11)
        noise_power = np.mean((noisy - signal) ** 2)
        signal_power = np.mean(signal**2)
        assert noise_power / signal_power == pytest.approx(10 ** (-0.3), rel=0.05)

    def test_infinite_snr_copies(self):
        signal = np.ones((3, 2))
        out = rv.inject_noise(signal, snr_db=math.inf, seed=0)
        assert np.array_equal(out, signal)
        assert out is not signal

    def test_noise_determinism(self):
        signal = np.ones((10, 4))
        a = rv.inject_noise(signal, 3.0, seed=5)
        b = rv.inject_noise(signal, 3.0, seed=5)
        c = rv.inject_noise(signal, 3.0, seed=6)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_invalid_snr(self):
        with pytest.raises(ValueError):
            rv.inject_noise(np.ones((2, 2)), math.nan, seed=0)
        with pytest.raises(ValueError):
            rv.inject_noise(np.ones((2, 2)), -math.inf, seed=0)


class TestHardwareMapping:
    def test_reference_loop_parameters(self):
        # 205 MHz clock, 7.94 us loop, 8 samples per node
        steps = rv.physical_delay_to_steps(205e6, 7.94e-6, 8)
        assert steps == pytest.approx(203.4625, rel=1e-12)

    def test_positive_arguments_required(self):
        with pytest.raises(ValueError):
            rv.physical_delay_to_steps(-1.0, 7.94e-6, 8)
        with pytest.raises(ValueError):
            rv.physical_delay_to_steps(205e6, 0.0, 8)


class TestEsn:
    def test_zero_recurrence_reduces_to_feedforward(self):
        rng = np.random.default_rng(50)
        w_in = rng.uniform(-1, 1, size=(6, 3))
        inputs = rng.uniform(-1, 1, size=(5, 3))
        states = rv.esn_run(inputs, np.zeros((6, 6)), w_in)
        assert np.allclose(states, np.tanh(inputs @ w_in.T))

    def test_hand_recurrence(self):
        w = np.array([[0.5]])
        w_in = np.array([[1.0]])
        inputs = np.array([[0.3], [0.1]])
        states = rv.esn_run(inputs, w, w_in)
        x1 = math.tanh(0.3)
        x2 = math.tanh(0.5 * x1 + 0.1)
        assert states[:, 0] == pytest.approx([x1, x2], abs=1e-15)
