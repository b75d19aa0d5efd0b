"""One-dimensional Bayesian optimisation of the interpolation weight.

A zero-mean Gaussian process with an RBF kernel and fixed hyperparameters
models the noisy reward curve on [0, 1]; the next weight maximises EI or UCB
over a dense grid.
"""
import csv
import math
from dataclasses import dataclass, field
from typing import List

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.stats import norm

from .errors import ConfigurationError, IllConditionedKernel, ObjectiveError


def rbf_kernel(a, b, signal_var=1.0, length_scale=0.15):
    """signal_var * exp(-(a - b)**2 / (2 length_scale**2)); broadcasts."""
    if signal_var <= 0 or length_scale <= 0:
        raise ValueError("signal_var and length_scale must be positive")
    d = np.subtract(a, b)
    return signal_var * np.exp(-(d * d) / (2.0 * length_scale * length_scale))


@dataclass
class GPModel:
    signal_var: float = 1.0
    length_scale: float = 0.15
    noise_var: float = 1e-4
    xs: List[float] = field(default_factory=list)
    ys: List[float] = field(default_factory=list)

    def __post_init__(self):
        if min(self.signal_var, self.length_scale, self.noise_var) <= 0:
            raise ConfigurationError("GP hyperparameters must be positive")
        self._chol = None
        self._alpha = None
        if self.xs:
            self.fit(self.xs, self.ys)

    def fit(self, xs, ys):
        xs = np.asarray(xs, dtype=np.float64).reshape(-1)
        ys = np.asarray(ys, dtype=np.float64).reshape(-1)
        if xs.shape != ys.shape or xs.size == 0:
            raise ValueError("need matching, nonempty observation arrays")
        gram = rbf_kernel(xs[:, None], xs[None, :], self.signal_var, self.length_scale)
        gram[np.diag_indices_from(gram)] += self.noise_var
        try:
            self._chol = cho_factor(gram, lower=True)
        except LinAlgError as exc:
            raise IllConditionedKernel(f"kernel matrix is not positive definite: {exc}") from None
        self._alpha = cho_solve(self._chol, ys)
        self.xs, self.ys = list(xs), list(ys)
        return self

    def add(self, x, y):
        return self.fit(self.xs + [float(x)], self.ys + [float(y)])

    def predict(self, query):
        """Posterior mean and variance (clipped at zero) at ``query``."""
        if self._chol is None:
            raise ValueError("GP has no observations")
        q = np.atleast_1d(np.asarray(query, dtype=np.float64))
        cross = rbf_kernel(q[:, None], np.asarray(self.xs)[None, :], self.signal_var, self.length_scale)
        mean = cross @ self._alpha
        var = self.signal_var - np.einsum("ij,ji->i", cross, cho_solve(self._chol, cross.T))
        var = np.maximum(var, 0.0)
        if np.ndim(query) == 0:
            return float(mean[0]), float(var[0])
        return mean, var


def gp_posterior(gp, query):
    return gp.predict(query)


def expected_improvement(mean, std, f_best):
    """E[max(f - f_best, 0)] for f ~ N(mean, std**2); vectorised."""
    mean, std = np.broadcast_arrays(np.asarray(mean, dtype=np.float64), np.asarray(std, dtype=np.float64))
    scalar = mean.ndim == 0
    mean, std = np.atleast_1d(mean), np.atleast_1d(std)
    if np.any(std < 0):
        raise ValueError("std must be nonnegative")
    gap = mean - f_best
    out = np.maximum(gap, 0.0)
    pos = std > 0
    with np.errstate(over="ignore", divide="ignore"):
        z = gap[pos] / std[pos]
        out[pos] = gap[pos] * norm.cdf(z) + std[pos] * norm.pdf(z)
    out = np.maximum(out, 0.0)
    return float(out[0]) if scalar else out


def ucb_beta(n, delta):
    if n < 1 or not 0 < delta:
        raise ValueError("need n >= 1 and delta > 0")
    return math.sqrt(max(2.0 * math.log(n * n * math.pi**2 / (6.0 * delta)), 0.0))


def ucb(mean, std, n, delta=0.1):
    """mean + sqrt(2 log(n^2 pi^2 / (6 delta))) * std."""
    return np.asarray(mean) + ucb_beta(n, delta) * np.asarray(std)


@dataclass(frozen=True)
class BOConfig:
    budget: int = 15
    n_init: int = 4
    acquisition: str = "ei"
    delta: float = 0.1
    grid_points: int = 1001
    batch_per_eval: int = 1000
    seed: int = 0
    signal_var: float = 1.0
    length_scale: float = 0.15
    noise_var: float = 1e-4

    def __post_init__(self):
        if not 1 <= self.n_init < self.budget:
            raise ConfigurationError("need 1 <= n_init < budget")
        if self.acquisition not in ("ei", "ucb"):
            raise ConfigurationError(f"acquisition must be 'ei' or 'ucb', got {self.acquisition!r}")
        if self.grid_points < 101:
            raise ConfigurationError("grid_points must be at least 101")
        if self.acquisition == "ucb" and not 0 < self.delta < 1:
            raise ConfigurationError("UCB delta must be in (0, 1)")


@dataclass(frozen=True)
class BOStep:
    iter: int
    lam: float
    reward_estimate: float
    acquisition_value: float


def _evaluate(objective, lam):
    try:
        value = float(objective(lam))
    except Exception as exc:
        raise ObjectiveError(str(exc), lam=lam) from exc
    if not np.isfinite(value):
        raise ObjectiveError(f"non-finite value {value}", lam=lam)
    return value


def bo_optimize(objective, config=BOConfig()):
    """Maximise a noisy black-box ``objective`` on [0, 1].

    Returns ``(lambda_star, best_value, history)`` where ``lambda_star`` is
    the evaluated weight with the largest observed value.  Acquisition
    ties break toward the smallest weight.
    """
    rng = np.random.default_rng(config.seed)
    grid = np.linspace(0.0, 1.0, config.grid_points)
    history = []
    for lam in rng.uniform(0.0, 1.0, size=config.n_init):
        history.append(BOStep(len(history), float(lam), _evaluate(objective, float(lam)), float("nan")))

    gp = GPModel(config.signal_var, config.length_scale, config.noise_var)
    gp.fit([h.lam for h in history], [h.reward_estimate for h in history])
    while len(history) < config.budget:
        mean, var = gp.predict(grid)
        std = np.sqrt(var)
        if config.acquisition == "ei":
            acq = expected_improvement(mean, std, max(h.reward_estimate for h in history))
        else:
            acq = ucb(mean, std, len(history), config.delta)
        pick = int(np.argmax(acq))  # first maximum, i.e. smallest lambda
        lam = float(grid[pick])
        history.append(BOStep(len(history), lam, _evaluate(objective, lam), float(acq[pick])))
        gp.add(lam, history[-1].reward_estimate)

    best = max(range(len(history)), key=lambda i: (history[i].reward_estimate, -i))
    return history[best].lam, history[best].reward_estimate, history


def write_history(history, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iter", "lambda", "reward_estimate", "acquisition_value"])
        for h in history:
            writer.writerow([h.iter, repr(h.lam), repr(h.reward_estimate), repr(h.acquisition_value)])
