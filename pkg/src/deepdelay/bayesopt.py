"""Gaussian-process Bayesian optimization of the reservoir hyperparameters.

A Matern-5/2 GP with per-dimension lengthscales models the objective on the
unit cube; candidates are scored by expected improvement over the incumbent.
Kernel hyperparameters come from a deterministic grid search maximizing the
log marginal likelihood, so the whole loop is reproducible from one seed.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.stats
from scipy.stats import qmc

from .seeds import derive_seed, rng_from

JITTER = 1e-6
LENGTHSCALE_GRID = (0.1, 0.3, 1.0, 3.0)
SIGNAL_GRID = (0.25, 1.0, 4.0)
FAILURE_PENALTY = 1e6


@dataclass(frozen=True)
class HyperPoint:
    """One hyperparameter setting: gains plus log-scale ridge parameter."""

    feedback_gain: float
    input_gain: float
    log10_lambda: float

    @property
    def ridge_lambda(self) -> float:
        return 10.0**self.log10_lambda


@dataclass(frozen=True)
class HyperBounds:
    """Box constraints for the search, mapped to and from the unit cube."""

    feedback_gain: tuple[float, float] = (0.0, 1.2)
    input_gain: tuple[float, float] = (0.0, 2.0)
    log10_lambda: tuple[float, float] = (-9.0, 0.0)

    def __post_init__(self):
        for name, (lo, hi) in self._items():
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ValueError(f"bad bounds for {name}: ({lo}, {hi})")

    def _items(self):
        return (
            ("feedback_gain", self.feedback_gain),
            ("input_gain", self.input_gain),
            ("log10_lambda", self.log10_lambda),
        )

    def to_unit(self, point: HyperPoint) -> np.ndarray:
        coords = []
        for name, (lo, hi) in self._items():
            v = getattr(point, name)
            if not lo <= v <= hi:
                raise ValueError(f"{name}={v} outside [{lo}, {hi}]")
            coords.append((v - lo) / (hi - lo))
        return np.array(coords)

    def from_unit(self, x: np.ndarray) -> HyperPoint:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (3,) or np.any(x < 0) or np.any(x > 1):
            raise ValueError("unit coordinates must be 3 values in [0, 1]")
        vals = [lo + float(u) * (hi - lo) for u, (_, (lo, hi)) in zip(x, self._items())]
        return HyperPoint(*vals)


def matern52(a: np.ndarray, b: np.ndarray, lengthscales, signal_variance: float) -> np.ndarray:
    """Matern-5/2 kernel matrix with per-dimension lengthscales."""
    a = np.atleast_2d(a) / lengthscales
    b = np.atleast_2d(b) / lengthscales
    d2 = np.maximum(
        np.sum(a**2, axis=1)[:, None] + np.sum(b**2, axis=1)[None, :] - 2.0 * a @ b.T, 0.0
    )
    r = np.sqrt(5.0 * d2)
    return signal_variance * (1.0 + r + r**2 / 3.0) * np.exp(-r)


class GaussianProcess:
    """Zero-mean-after-centering GP regressor on the unit cube."""

    def __init__(self, lengthscales, signal_variance: float, noise_variance: float = JITTER):
        self.lengthscales = np.asarray(lengthscales, dtype=np.float64)
        self.signal_variance = float(signal_variance)
        self.noise_variance = float(noise_variance)
        self._x = None

    def fit(self, x: np.ndarray, y: np.ndarray) -> "GaussianProcess":
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        y = np.asarray(y, dtype=np.float64).ravel()
        if x.shape[0] != y.size or y.size < 1:
            raise ValueError("x rows and y length must match and be >= 1")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("non-finite training data")
        k = matern52(x, x, self.lengthscales, self.signal_variance)
        n = y.size
        jitter = self.noise_variance
        while True:
            try:
                chol = scipy.linalg.cho_factor(k + jitter * np.eye(n), lower=True)
                break
            except scipy.linalg.LinAlgError:
                # duplicate or near-duplicate points: lift the jitter
                jitter *= 10.0
                if jitter > 1e3 * max(self.signal_variance, 1.0):
                    raise
        self._x = x
        self._y_mean = float(y.mean())
        self._y_centered = y - self._y_mean
        self._chol = chol
        self._alpha = scipy.linalg.cho_solve(chol, self._y_centered)
        self._effective_noise = jitter
        return self

    def log_marginal_likelihood(self) -> float:
        # -1/2 y^T K^-1 y - sum log L_ii - n/2 log 2pi, on centered y
        n = self._x.shape[0]
        fit_term = -0.5 * float(self._y_centered @ self._alpha)
        logdet = float(np.sum(np.log(np.diag(self._chol[0]))))
        return fit_term - logdet - 0.5 * n * math.log(2.0 * math.pi)

    def predict(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and variance at query rows."""
        if self._x is None:
            raise ValueError("predict before fit")
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        ks = matern52(x, self._x, self.lengthscales, self.signal_variance)
        mean = self._y_mean + ks @ self._alpha
        v = scipy.linalg.cho_solve(self._chol, ks.T)
        var = self.signal_variance - np.sum(ks * v.T, axis=1)
        return mean, np.maximum(var, 0.0)


def gp_fit(x: np.ndarray, y: np.ndarray) -> GaussianProcess:
    """Fit a GP with kernel hyperparameters chosen by deterministic grid
    search over per-dimension lengthscales and signal variance, maximizing
    the log marginal likelihood."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    d = x.shape[1]
    y_scale = max(float(np.var(y)), 1e-12)
    if d <= 4:
        ls_combos = np.array(np.meshgrid(*([LENGTHSCALE_GRID] * d))).T.reshape(-1, d)
    else:
        ls_combos = np.array([[ls] * d for ls in LENGTHSCALE_GRID])
    best_gp, best_lml = None, -math.inf
    for ls in ls_combos:
        for sv in SIGNAL_GRID:
            gp = GaussianProcess(ls, sv * y_scale).fit(x, y)
            lml = gp.log_marginal_likelihood()
            if lml > best_lml:
                best_gp, best_lml = gp, lml
    return best_gp


def expected_improvement(mean, var, best: float) -> np.ndarray:
    """EI for minimization: E[max(0, best - f(x))] under the posterior."""
    mean = np.asarray(mean, dtype=np.float64)
    sd = np.sqrt(np.asarray(var, dtype=np.float64))
    improvement = best - mean
    out = np.maximum(improvement, 0.0)
    positive = sd > 0
    z = improvement[positive] / sd[positive]
    out[positive] = improvement[positive] * scipy.stats.norm.cdf(z) + sd[positive] * scipy.stats.norm.pdf(z)
    return out


@dataclass(frozen=True, eq=False)
class BoResult:
    best_point: HyperPoint
    best_value: float
    # per evaluation: (index, point, value, incumbent value)
    trace: tuple[tuple[int, HyperPoint, float, float], ...]
    evaluations: int


def _safe_eval(objective, point, values):
    try:
        value = float(objective(point))
    except Exception:
        value = math.nan
    if not math.isfinite(value):
        finite = [v for v in values if math.isfinite(v)]
        value = (max(finite) + 1.0) if finite else FAILURE_PENALTY
    return value


def bo_optimize(
    objective,
    bounds: HyperBounds = HyperBounds(),
    *,
    budget: int = 30,
    init_count: int = 5,
    seed: int = 0,
    n_candidates: int = 4096,
    target: float | None = None,
) -> BoResult:
    """Minimize a black-box objective over the bounded hyperparameter box.

    Starts from a Latin hypercube design, then repeats fit-GP / maximize-EI
    (over seeded uniform candidates plus Gaussian perturbations of the
    incumbent) / evaluate. Objective failures (exceptions or non-finite
    returns) are recorded at a penalty above the worst finite value seen so
    far and the loop continues.
    """
    if budget < 1 or not 1 <= init_count <= budget:
        raise ValueError("need 1 <= init_count <= budget")
    sampler = qmc.LatinHypercube(d=3, seed=int(derive_seed(seed, 0)))
    xs = list(sampler.random(min(init_count, budget)))
    values: list[float] = []
    trace = []
    for i, x in enumerate(xs):
        point = bounds.from_unit(x)
        values.append(_safe_eval(objective, point, values))
        incumbent = min(values)
        trace.append((i, point, values[i], incumbent))
        if target is not None and incumbent <= target:
            break

    while len(values) < budget and (target is None or min(values) > target):
        gp = gp_fit(np.array(xs), np.array(values))
        best = min(values)
        rng = rng_from(derive_seed(seed, 1, len(values)))
        candidates = rng.uniform(size=(n_candidates, 3))
        incumbent_x = xs[int(np.argmin(values))]
        local = incumbent_x + rng.normal(scale=0.05, size=(256, 3))
        candidates = np.vstack([candidates, np.clip(local, 0.0, 1.0)])
        mean, var = gp.predict(candidates)
        pick = candidates[int(np.argmax(expected_improvement(mean, var, best)))]
        point = bounds.from_unit(pick)
        xs.append(pick)
        values.append(_safe_eval(objective, point, values))
        trace.append((len(values) - 1, point, values[-1], min(values)))

    best_i = int(np.argmin(values))
    return BoResult(
        best_point=bounds.from_unit(xs[best_i]),
        best_value=values[best_i],
        trace=tuple(trace),
        evaluations=len(values),
    )
