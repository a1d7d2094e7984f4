"""Covariance matrix adaptation evolution strategy, and its application to
interlayer mask optimization.

Standard (mu/mu_w, lambda) CMA-ES: rank-based selection with log weights,
cumulative step-size adaptation, and rank-one plus rank-mu covariance
updates. Sampling is generation-keyed, so asking twice without an
intervening tell returns identical candidates. For very high dimension a
separable (diagonal-covariance) variant is selected automatically.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .readout import error_rate, evaluate_pipeline
from .reservoir import DeepConfig, Mask, compute_dataset_states_single, mask_from_values
from .seeds import derive_seed, rng_from

DIAGONAL_DIM_THRESHOLD = 4096
CONDITION_LIMIT = 1e14


def default_popsize(dim: int) -> int:
    return 4 + int(3 * math.log(dim))


class CmaEs:
    """Minimizer state with ask/tell interface.

    ask() draws ``popsize`` candidates from N(mean, sigma^2 C); tell() ranks
    them by fitness (stable sort, so ties keep sampling order) and updates
    mean, evolution paths, covariance, and step size. Only fitness ranks
    matter: adding a constant to all fitnesses changes nothing.
    """

    def __init__(self, x0, sigma0: float, *, popsize: int | None = None, seed: int = 0,
                 diagonal: bool | None = None):
        x0 = np.asarray(x0, dtype=np.float64)
        if x0.ndim != 1 or x0.size < 1 or not np.all(np.isfinite(x0)):
            raise ValueError("x0 must be a finite 1-D vector")
        if not sigma0 > 0:
            raise ValueError("sigma0 must be > 0")
        n = x0.size
        self.dim = n
        self.popsize = int(popsize) if popsize is not None else default_popsize(n)
        if self.popsize < 2:
            raise ValueError("popsize must be >= 2")
        self.diagonal = bool(diagonal) if diagonal is not None else n >= DIAGONAL_DIM_THRESHOLD
        self.seed = seed

        mu = self.popsize // 2
        raw = math.log((self.popsize + 1) / 2) - np.log(np.arange(1, mu + 1))
        self.weights = raw / raw.sum()
        self.mu = mu
        self.mu_eff = 1.0 / np.sum(self.weights**2)

        m = self.mu_eff
        self.c_sigma = (m + 2) / (n + m + 5)
        self.d_sigma = 1 + 2 * max(0.0, math.sqrt((m - 1) / (n + 1)) - 1) + self.c_sigma
        self.c_c = (4 + m / n) / (n + 4 + 2 * m / n)
        self.c_1 = 2 / ((n + 1.3) ** 2 + m)
        self.c_mu = min(1 - self.c_1, 2 * (m - 2 + 1 / m) / ((n + 2) ** 2 + m))
        if self.diagonal:
            # separable variant learns n instead of n^2 covariance entries,
            # so the covariance learning rates scale up accordingly
            boost = (n + 2) / 3
            self.c_1 = min(1.0, self.c_1 * boost)
            self.c_mu = min(1 - self.c_1, self.c_mu * boost)
        self.chi_n = math.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n * n))

        self.mean = x0.copy()
        self.sigma = float(sigma0)
        self.path_sigma = np.zeros(n)
        self.path_c = np.zeros(n)
        self.generation = 0
        self.best_x: np.ndarray | None = None
        self.best_f = math.inf
        self.evaluations = 0

        if self.diagonal:
            self.cov_diag = np.ones(n)
        else:
            self.cov = np.eye(n)
            self._basis = np.eye(n)
            self._scales = np.ones(n)  # sqrt of eigenvalues
            self._decomposed_at = 0
            # refreshing the eigendecomposition every generation is wasteful
            # when the covariance moves slowly; this is the standard lazy gap
            self._eigen_gap = max(1, int(1 / (10 * n * (self.c_1 + self.c_mu))))

    def _refresh_eigen(self):
        self.cov = (self.cov + self.cov.T) / 2
        eigvals, basis = np.linalg.eigh(self.cov)
        top = eigvals[-1]
        floor = max(top / CONDITION_LIMIT, 0.0)
        if eigvals[0] < floor:
            shift = floor - eigvals[0]
            eigvals = eigvals + shift
            self.cov = self.cov + shift * np.eye(self.dim)
        self._basis = basis
        self._scales = np.sqrt(eigvals)
        self._decomposed_at = self.generation

    def ask(self) -> np.ndarray:
        """Sample the generation's candidates, popsize x dim."""
        if not self.diagonal and self.generation - self._decomposed_at >= self._eigen_gap:
            self._refresh_eigen()
        rng = rng_from(derive_seed(self.seed, self.generation))
        z = rng.standard_normal((self.popsize, self.dim))
        if self.diagonal:
            steps = z * np.sqrt(self.cov_diag)
        else:
            steps = (z * self._scales) @ self._basis.T
        return self.mean + self.sigma * steps

    def _invsqrt_times(self, v: np.ndarray) -> np.ndarray:
        if self.diagonal:
            return v / np.sqrt(self.cov_diag)
        return self._basis @ ((self._basis.T @ v) / self._scales)

    def tell(self, candidates, fitnesses) -> "CmaEs":
        candidates = np.asarray(candidates, dtype=np.float64)
        fitnesses = np.asarray(fitnesses, dtype=np.float64)
        if candidates.shape != (self.popsize, self.dim):
            raise ValueError(f"expected {self.popsize} candidates of dimension {self.dim}")
        if fitnesses.shape != (self.popsize,) or not np.all(np.isfinite(fitnesses)):
            raise ValueError("fitnesses must be finite, one per candidate")

        order = np.argsort(fitnesses, kind="stable")
        if fitnesses[order[0]] < self.best_f:
            self.best_f = float(fitnesses[order[0]])
            self.best_x = candidates[order[0]].copy()
        self.evaluations += self.popsize

        selected = candidates[order[: self.mu]]
        old_mean = self.mean
        self.mean = self.weights @ selected
        mean_step = (self.mean - old_mean) / self.sigma

        c_s = self.c_sigma
        self.path_sigma = (1 - c_s) * self.path_sigma + math.sqrt(
            c_s * (2 - c_s) * self.mu_eff
        ) * self._invsqrt_times(mean_step)
        self.generation += 1
        norm = np.linalg.norm(self.path_sigma)
        expected = math.sqrt(1 - (1 - c_s) ** (2 * self.generation))
        h_sigma = norm / expected < (1.4 + 2 / (self.dim + 1)) * self.chi_n

        c_c = self.c_c
        self.path_c = (1 - c_c) * self.path_c + (
            math.sqrt(c_c * (2 - c_c) * self.mu_eff) * mean_step if h_sigma else 0.0
        )

        steps = (selected - old_mean) / self.sigma
        decay = 1 - self.c_1 - self.c_mu + (0.0 if h_sigma else self.c_1 * c_c * (2 - c_c))
        if self.diagonal:
            self.cov_diag = (
                decay * self.cov_diag
                + self.c_1 * self.path_c**2
                + self.c_mu * (self.weights @ steps**2)
            )
        else:
            rank_mu = (steps.T * self.weights) @ steps
            self.cov = (
                decay * self.cov
                + self.c_1 * np.outer(self.path_c, self.path_c)
                + self.c_mu * rank_mu
            )

        self.sigma *= math.exp((c_s / self.d_sigma) * (norm / self.chi_n - 1))
        return self

    @property
    def best(self) -> tuple[np.ndarray, float]:
        if self.best_x is None:
            raise ValueError("no candidates evaluated yet")
        return self.best_x, self.best_f


def cma_init(dim: int, x0, sigma0: float, popsize: int | None = None, seed: int = 0,
             diagonal: bool | None = None) -> CmaEs:
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.size != dim:
        raise ValueError(f"x0 has size {x0.size}, expected dim={dim}")
    return CmaEs(x0, sigma0, popsize=popsize, seed=seed, diagonal=diagonal)


def cma_ask(state: CmaEs) -> np.ndarray:
    return state.ask()


def cma_tell(state: CmaEs, candidates, fitnesses) -> CmaEs:
    return state.tell(candidates, fitnesses)


def cma_best(state: CmaEs) -> tuple[np.ndarray, float]:
    return state.best


@dataclass(frozen=True, eq=False)
class MinimizeResult:
    best_x: np.ndarray
    best_f: float
    evaluations: int
    iterations: int
    history: tuple[tuple[int, float, float], ...]  # (generation, gen best, running best)


def minimize(objective, x0, sigma0: float, *, popsize: int | None = None, seed: int = 0,
             max_evaluations: int = 10000, target: float | None = None,
             diagonal: bool | None = None) -> MinimizeResult:
    """Drive CmaEs on a scalar objective until the evaluation budget is
    spent or the running best drops to ``target``."""
    es = CmaEs(np.asarray(x0, dtype=np.float64), sigma0, popsize=popsize, seed=seed,
               diagonal=diagonal)
    history = []
    while es.evaluations + es.popsize <= max_evaluations:
        candidates = es.ask()
        fitnesses = np.array([float(objective(c)) for c in candidates])
        es.tell(candidates, fitnesses)
        history.append((es.generation, float(fitnesses.min()), es.best_f))
        if target is not None and es.best_f <= target:
            break
    best_x, best_f = es.best
    return MinimizeResult(
        best_x=best_x, best_f=best_f, evaluations=es.evaluations,
        iterations=es.generation, history=tuple(history),
    )


@dataclass(frozen=True, eq=False)
class InterlayerOptResult:
    best_mask: Mask
    best_fitness: float
    iterations_run: int
    evaluations: int
    # per iteration: (generation, gen best val, gen mean val, running best val,
    #                 test error of gen best, test error of running best)
    history: tuple[tuple[int, float, float, float, float, float], ...]
    initial_fitness: float


def _masked_eval(states_prev, mask_values, dataset, config, indices_train, indices_val,
                 ridge_lambda, method):
    """Validation error of a two-layer stack whose interlayer mask is given;
    first-layer states are precomputed and shared across candidates."""
    mask = mask_from_values(mask_values)
    cfg = config.replace_interlayer(0, mask)
    layer2 = compute_dataset_states_single(states_prev, cfg.layers[1], mask)
    states = [np.hstack([a, b]) for a, b in zip(states_prev, layer2)]
    sub = dataset.with_split(indices_train, indices_val)
    result = evaluate_pipeline(
        sub, cfg, protocol="fixed", ridge_lambda=ridge_lambda, method=method, states=states,
    )
    return result.error_rate, states


def optimize_interlayer(
    dataset,
    config: DeepConfig,
    *,
    ridge_lambda: float,
    budget_iterations: int = 40,
    seed: int = 0,
    sigma0: float = 0.3,
    popsize: int | None = None,
    val_fraction: float = 0.2,
    patience: int = 10,
    method: str = "vote",
    log_test: bool = False,
) -> InterlayerOptResult:
    """Optimize the interlayer mask of a two-layer stack with CMA-ES.

    The flattened mask is the search vector, started from the config's
    current (random) interlayer mask. Fitness is the validation error rate
    on a held-out fraction of the dataset's train split; candidates are
    clipped to [-1, 1] before being turned into masks. Stops early after
    ``patience`` iterations without improvement of the running best. When
    ``log_test`` is set, each iteration also records test-split error of the
    iteration's best and the running best mask (diagnostics only; never fed
    back into the optimization).
    """
    if len(config.layers) != 2:
        raise ValueError("interlayer optimization expects exactly two layers")
    if dataset.split is None:
        raise ValueError("dataset needs a train/test split")
    if not 0 < val_fraction < 1:
        raise ValueError("val_fraction must be in (0, 1)")

    train_idx = list(dataset.split[0])
    test_idx = list(dataset.split[1])
    order = rng_from(derive_seed(seed, 0)).permutation(len(train_idx))
    n_val = max(1, round(val_fraction * len(train_idx)))
    if n_val >= len(train_idx):
        raise ValueError("train split too small for the validation fraction")
    val_idx = [train_idx[i] for i in order[:n_val]]
    inner_idx = [train_idx[i] for i in order[n_val:]]

    # first-layer states depend only on the input mask: compute once
    states1 = compute_dataset_states_single(
        [seq.values for seq in dataset.sequences], config.layers[0], config.input_mask
    )

    def fitness(flat):
        clipped = np.clip(flat, -1.0, 1.0)
        shape = (config.layers[1].n_nodes, config.layers[0].n_nodes)
        err, states = _masked_eval(
            states1, clipped.reshape(shape), dataset, config, inner_idx, val_idx,
            ridge_lambda, method,
        )
        return err, clipped.reshape(shape), states

    def test_error(states):
        sub = dataset.with_split(inner_idx, test_idx)
        result = evaluate_pipeline(
            sub, config, protocol="fixed", ridge_lambda=ridge_lambda, method=method,
            states=states,
        )
        return result.error_rate

    x0 = config.interlayer_masks[0].values.ravel()
    initial_fitness, _, initial_states = fitness(x0)
    best_f = initial_fitness
    best_mask_values = config.interlayer_masks[0].values
    best_test = test_error(initial_states) if log_test else math.nan

    es = CmaEs(x0, sigma0, popsize=popsize, seed=derive_seed(seed, 1))
    history = []
    stagnant = 0
    for _ in range(budget_iterations):
        candidates = es.ask()
        errs = []
        gen_best_err, gen_best_values, gen_best_states = math.inf, None, None
        for cand in candidates:
            err, mask_values, states = fitness(cand)
            errs.append(err)
            if err < gen_best_err:
                gen_best_err, gen_best_values, gen_best_states = err, mask_values, states
        es.tell(candidates, np.array(errs))

        improved = gen_best_err < best_f
        if improved:
            best_f = gen_best_err
            best_mask_values = gen_best_values
            stagnant = 0
        else:
            stagnant += 1

        if log_test:
            gen_test = test_error(gen_best_states)
            if improved:
                best_test = gen_test
            history.append((es.generation, gen_best_err, float(np.mean(errs)), best_f,
                            gen_test, best_test))
        else:
            history.append((es.generation, gen_best_err, float(np.mean(errs)), best_f,
                            math.nan, math.nan))
        if stagnant >= patience:
            break

    return InterlayerOptResult(
        best_mask=mask_from_values(best_mask_values),
        best_fitness=best_f,
        iterations_run=es.generation,
        evaluations=es.evaluations + 1,
        history=tuple(history),
        initial_fitness=initial_fitness,
    )


def overfitting_signature(history) -> bool:
    """True when generalization worsened after the validation optimum: some
    iteration after the first running-best achiever has a higher test error
    of its iteration-best mask than the achiever's."""
    rows = list(history)
    if len(rows) < 2:
        return False
    running_best = [r[3] for r in rows]
    final = min(running_best)
    pivot = next(i for i, v in enumerate(running_best) if v == final)
    baseline = rows[pivot][4]
    if math.isnan(baseline):
        raise ValueError("history has no test-error column; rerun with log_test")
    return any(rows[i][4] > baseline for i in range(pivot + 1, len(rows)))
