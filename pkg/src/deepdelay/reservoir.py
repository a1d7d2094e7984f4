"""Delay-based reservoir dynamics.

A delay reservoir is a single nonlinear node plus a delay line; N virtual
nodes per input timestep are created by time-multiplexing the input against
a periodic mask. In flat node-time t = 0 .. T*N-1 the state obeys

    s(t) = f(alpha * s(t - D) + beta * (M @ u(t // N))[t % N])

where D is the delay in node-update steps, decoupled from N. Row n of the
returned state matrix is (s(nN), ..., s(nN + N - 1)). The classical
two-branch time-multiplexed update (node 0 fed back from node N-1 two input
steps earlier, node i from node i-1 one step earlier) is the special case
D = N + 1; ``eq6_reference_run`` transcribes that form literally and is kept
as a test oracle for the flat-time path.

Deep configurations stack layers: layer l >= 2 is a delay reservoir driven
by the previous layer's state sequence through an interlayer mask.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .kernels import NONLIN_SINE, NONLIN_TANH, delay_recursion
from .seeds import derive_seed, rng_from

NONLINEARITIES = ("sine", "tanh")
_NONLIN_CODE = {"sine": NONLIN_SINE, "tanh": NONLIN_TANH}
_NONLIN_FUNC = {"sine": np.sin, "tanh": np.tanh}


@dataclass(frozen=True, eq=False)
class Mask:
    """Fixed random connectivity matrix with entries in [-1, +1].

    Plays both the input-mask role (N x K) and the interlayer role
    (N_l x N_{l-1}). ``seed`` is recorded when the entries were drawn from
    it; masks produced by an optimizer carry ``seed=None``.
    """

    rows: int
    cols: int
    values: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.rows, self.cols):
            raise ValueError(f"mask values shape {v.shape} != ({self.rows}, {self.cols})")
        if not np.all(np.isfinite(v)):
            raise ValueError("mask entries must be finite")
        if np.any(np.abs(v) > 1.0):
            raise ValueError("mask entries must lie in [-1, +1]")
        v = np.ascontiguousarray(v)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)


def generate_uniform_mask(rows: int, cols: int, seed: int) -> Mask:
    """Mask with entries drawn uniformly from [-1, +1], bit-reproducible in seed."""
    if rows < 1 or cols < 1:
        raise ValueError(f"mask dimensions must be positive, got ({rows}, {cols})")
    values = rng_from(seed).uniform(-1.0, 1.0, size=(rows, cols))
    return Mask(rows=rows, cols=cols, values=values, seed=int(seed))


def mask_from_values(values: np.ndarray, seed: int | None = None) -> Mask:
    """Wrap an explicit matrix (already in [-1, +1]) as a Mask."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ValueError("mask values must be a 2-D matrix")
    return Mask(rows=values.shape[0], cols=values.shape[1], values=values, seed=seed)


@dataclass(frozen=True)
class DelayReservoirParams:
    """One delay-reservoir layer: N virtual nodes, delay D in node steps,
    feedback gain alpha, input gain beta."""

    n_nodes: int
    delay_steps: int
    feedback_gain: float
    input_gain: float
    nonlinearity: str = "sine"

    def __post_init__(self):
        if self.n_nodes < 1:
            raise ValueError("n_nodes must be >= 1")
        if self.delay_steps < 1:
            raise ValueError("delay_steps must be >= 1")
        if not (math.isfinite(self.feedback_gain) and self.feedback_gain >= 0):
            raise ValueError("feedback_gain must be finite and >= 0")
        if not (math.isfinite(self.input_gain) and self.input_gain >= 0):
            raise ValueError("input_gain must be finite and >= 0")
        if self.nonlinearity not in NONLINEARITIES:
            raise ValueError(f"nonlinearity must be one of {NONLINEARITIES}")


@dataclass(frozen=True, eq=False)
class DeepConfig:
    """Stack of delay-reservoir layers chained by interlayer masks.

    Layer 1 is driven by the masked external input; layer l >= 2 by the
    previous layer's states through ``interlayer_masks[l-2]``. When
    ``shared_gains`` is set, all layers must carry identical gains.
    """

    layers: tuple[DelayReservoirParams, ...]
    input_mask: Mask
    interlayer_masks: tuple[Mask, ...] = ()
    shared_gains: bool = True

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "interlayer_masks", tuple(self.interlayer_masks))
        if not self.layers:
            raise ValueError("at least one layer required")
        if len(self.interlayer_masks) != len(self.layers) - 1:
            raise ValueError(
                f"{len(self.layers)} layers need {len(self.layers) - 1} interlayer "
                f"masks, got {len(self.interlayer_masks)}"
            )
        if self.input_mask.rows != self.layers[0].n_nodes:
            raise ValueError("input_mask rows must equal first layer n_nodes")
        for i, m in enumerate(self.interlayer_masks):
            if m.rows != self.layers[i + 1].n_nodes or m.cols != self.layers[i].n_nodes:
                raise ValueError(
                    f"interlayer mask {i} is {m.rows}x{m.cols}, expected "
                    f"{self.layers[i + 1].n_nodes}x{self.layers[i].n_nodes}"
                )
        if self.shared_gains:
            a0, b0 = self.layers[0].feedback_gain, self.layers[0].input_gain
            for p in self.layers[1:]:
                if p.feedback_gain != a0 or p.input_gain != b0:
                    raise ValueError("shared_gains set but layer gains differ")

    @property
    def n_inputs(self) -> int:
        return self.input_mask.cols

    @property
    def total_nodes(self) -> int:
        return sum(p.n_nodes for p in self.layers)

    def replace_interlayer(self, index: int, mask: Mask) -> "DeepConfig":
        masks = list(self.interlayer_masks)
        masks[index] = mask
        return DeepConfig(self.layers, self.input_mask, tuple(masks), self.shared_gains)


def make_deep_config(
    n_inputs: int,
    layer_params: list[DelayReservoirParams],
    mask_seed: int,
    shared_gains: bool = True,
) -> DeepConfig:
    """Build a DeepConfig with independently seeded input and interlayer masks."""
    input_mask = generate_uniform_mask(
        layer_params[0].n_nodes, n_inputs, derive_seed(mask_seed, 0)
    )
    inter = tuple(
        generate_uniform_mask(
            layer_params[l].n_nodes, layer_params[l - 1].n_nodes, derive_seed(mask_seed, l)
        )
        for l in range(1, len(layer_params))
    )
    return DeepConfig(tuple(layer_params), input_mask, inter, shared_gains)


def _mask_values(mask) -> np.ndarray:
    return mask.values if isinstance(mask, Mask) else np.asarray(mask, dtype=np.float64)


def masked_drive(inputs: np.ndarray, mask, input_gain: float) -> np.ndarray:
    """T x N drive term beta * (M @ u(n)) shared by the run paths."""
    inputs = np.ascontiguousarray(inputs, dtype=np.float64)
    m = _mask_values(mask)
    if inputs.ndim != 2 or inputs.shape[0] < 1:
        raise ValueError("inputs must be a T x K matrix with T >= 1")
    if m.shape[1] != inputs.shape[1]:
        raise ValueError(
            f"mask has {m.shape[1]} columns but inputs have {inputs.shape[1]} features"
        )
    return input_gain * (inputs @ m.T)


def delay_reservoir_run(
    inputs: np.ndarray,
    input_mask,
    params: DelayReservoirParams,
    init: np.ndarray | None = None,
) -> np.ndarray:
    """Run the flat-time delay recursion over an input sequence.

    Args:
        inputs: T x K feature sequence u(n), one row per timestep.
        input_mask: N x K mask (a ``Mask`` or a plain matrix).
        params: layer parameters; ``params.n_nodes`` must match mask rows.
        init: pre-history of the delay buffer, length ``params.delay_steps``
            (default all zeros).

    Returns:
        T x N state matrix; row n holds the node vector at timestep n.
    """
    m = _mask_values(input_mask)
    if m.shape[0] != params.n_nodes:
        raise ValueError(f"mask has {m.shape[0]} rows but params.n_nodes={params.n_nodes}")
    drive = masked_drive(inputs, m, params.input_gain)
    n_steps = drive.size
    if init is None:
        init = np.zeros(params.delay_steps)
    else:
        init = np.ascontiguousarray(init, dtype=np.float64)
        if init.shape != (params.delay_steps,):
            raise ValueError(f"init must have length delay_steps={params.delay_steps}")
    out = np.empty(n_steps)
    delay_recursion(
        np.ascontiguousarray(drive.ravel()),
        init,
        out,
        params.delay_steps,
        params.feedback_gain,
        _NONLIN_CODE[params.nonlinearity],
    )
    return out.reshape(drive.shape)


def eq6_reference_run(
    inputs: np.ndarray,
    input_mask,
    feedback_gain: float,
    input_gain: float,
    init: np.ndarray | None = None,
) -> np.ndarray:
    """Literal two-branch transcription of the time-multiplexed update.

        x_0(n) = sin(alpha * x_{N-1}(n-2) + beta * (M @ u(n))[0])
        x_i(n) = sin(alpha * x_{i-1}(n-1) + beta * (M @ u(n))[i]),  i >= 1

    Kept solely as a test oracle: it must match ``delay_reservoir_run`` with
    delay_steps = N + 1 element-wise. ``init`` is the flat pre-history of
    length N + 1 (default zeros), indexed the same way as the flat path.
    """
    m = _mask_values(input_mask)
    drive = masked_drive(inputs, m, input_gain)
    n_t, n_nodes = drive.shape
    if init is None:
        init = np.zeros(n_nodes + 1)
    else:
        init = np.asarray(init, dtype=np.float64)
        if init.shape != (n_nodes + 1,):
            raise ValueError("init must have length N + 1")
    states = np.zeros((n_t, n_nodes))
    for n in range(n_t):
        for i in range(n_nodes):
            t = n * n_nodes + i
            if i == 0:
                prev = states[n - 2, n_nodes - 1] if n >= 2 else init[t]
            else:
                prev = states[n - 1, i - 1] if n >= 1 else init[t]
            states[n, i] = math.sin(feedback_gain * prev + drive[n, i])
    return states


def esn_run(
    inputs: np.ndarray,
    w: np.ndarray,
    w_in: np.ndarray,
    nonlinearity: str = "tanh",
    init: np.ndarray | None = None,
) -> np.ndarray:
    """Reference echo-state recursion x(n) = f(W x(n-1) + W_in u(n)).

    Provided as the classical fully-connected topology for documentation and
    cross-checks; the experiments use the delay topology.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    w_in = np.asarray(w_in, dtype=np.float64)
    if inputs.ndim != 2 or inputs.shape[0] < 1:
        raise ValueError("inputs must be a T x K matrix with T >= 1")
    n_nodes = w.shape[0]
    if w.shape != (n_nodes, n_nodes):
        raise ValueError("W must be square")
    if w_in.shape != (n_nodes, inputs.shape[1]):
        raise ValueError(
            f"W_in shape {w_in.shape} incompatible with N={n_nodes}, K={inputs.shape[1]}"
        )
    if nonlinearity not in NONLINEARITIES:
        raise ValueError(f"nonlinearity must be one of {NONLINEARITIES}")
    f = _NONLIN_FUNC[nonlinearity]
    x = np.zeros(n_nodes) if init is None else np.asarray(init, dtype=np.float64).copy()
    if x.shape != (n_nodes,):
        raise ValueError("init must have length N")
    states = np.empty((inputs.shape[0], n_nodes))
    for n in range(inputs.shape[0]):
        x = f(w @ x + w_in @ inputs[n])
        states[n] = x
    return states


def deep_run(
    inputs: np.ndarray,
    config: DeepConfig,
    inits: list[np.ndarray] | None = None,
) -> list[np.ndarray]:
    """Run a stacked configuration over one sequence.

    Layer 1 sees the masked external input; layer l >= 2 runs the delay
    recursion on the previous layer's T x N_{l-1} states through its
    interlayer mask. Returns one T x N_l state matrix per layer.

    ``inits`` optionally carries per-layer delay-buffer pre-histories
    (continuous-feed mode); the default re-zeroes every buffer.
    """
    if inits is not None and len(inits) != len(config.layers):
        raise ValueError("need one init per layer")
    per_layer = []
    current = np.asarray(inputs, dtype=np.float64)
    if current.shape[1] != config.n_inputs:
        raise ValueError(
            f"config expects {config.n_inputs} input features, got {current.shape[1]}"
        )
    for l, params in enumerate(config.layers):
        mask = config.input_mask if l == 0 else config.interlayer_masks[l - 1]
        init = None if inits is None else inits[l]
        current = delay_reservoir_run(current, mask, params, init=init)
        per_layer.append(current)
    return per_layer


def compute_dataset_states_single(
    inputs_list, params: DelayReservoirParams, mask
) -> list[np.ndarray]:
    """One delay layer over many sequences, buffers re-zeroed between them.

    ``inputs_list`` holds the per-sequence drive sources: raw features for a
    first layer, or a previous layer's state matrices for a stacked one.
    """
    return [delay_reservoir_run(x, mask, params) for x in inputs_list]


def concat_states(per_layer: list[np.ndarray]) -> np.ndarray:
    """Column-wise concatenation [X^1, X^2, ..., X^L] in layer order."""
    if not per_layer:
        raise ValueError("no state matrices given")
    n_t = per_layer[0].shape[0]
    for i, x in enumerate(per_layer):
        if x.shape[0] != n_t:
            raise ValueError(f"layer {i} has {x.shape[0]} timesteps, expected {n_t}")
    if len(per_layer) == 1:
        return per_layer[0]
    return np.hstack(per_layer)


def inject_noise(values: np.ndarray, snr_db: float, seed: int) -> np.ndarray:
    """Add zero-mean Gaussian noise at a fixed signal-to-noise ratio.

    Signal power is the mean square over all entries of the sequence; noise
    power is signal power / 10^(snr_db / 10). ``snr_db = +inf`` is the
    documented sentinel for "noise disabled" and returns an unchanged copy.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("cannot inject noise into an empty sequence")
    if math.isinf(snr_db) and snr_db > 0:
        return values.copy()
    if not math.isfinite(snr_db):
        raise ValueError("snr_db must be finite (or +inf to disable)")
    signal_power = float(np.mean(values**2))
    noise_std = math.sqrt(signal_power / 10.0 ** (snr_db / 10.0))
    return values + rng_from(seed).normal(0.0, noise_std, size=values.shape)


def physical_delay_to_steps(clock_hz: float, delay_s: float, samples_per_node: int) -> float:
    """Delay of a physical loop expressed in node-update steps.

    One node update consumes ``samples_per_node`` clock cycles, so the loop
    stores delay_s * clock_hz / samples_per_node node slots. Callers round
    to an integer for ``DelayReservoirParams.delay_steps``.
    """
    if not (clock_hz > 0 and delay_s > 0 and samples_per_node > 0):
        raise ValueError("all arguments must be positive")
    return delay_s * clock_hz / samples_per_node
