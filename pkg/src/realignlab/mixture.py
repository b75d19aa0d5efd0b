"""Gaussian-mixture data models with exact denoisers and exact reward tilting.

These stand in for trained networks: every quantity a sampler needs (the
noised marginal, the optimal noise prediction, the KL-regularised optimum
for a linear or quadratic reward) is available in closed form.
"""
import json
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np
from scipy.special import logsumexp

from . import kernels
from .errors import ConfigurationError, NonNormalizableTilt, ShapeError

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True, eq=False)
class GaussianMixture:
    """Mixture of axis-aligned Gaussians.

    Weights are held in the log domain.  ``variances`` has shape (K, D); a
    mixture is isotropic when every row is constant.
    """

    log_weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        log_w = np.array(self.log_weights, dtype=np.float64).reshape(-1)
        means = np.array(self.means, dtype=np.float64)
        if means.ndim == 1:
            means = means[:, None]
        var = np.array(self.variances, dtype=np.float64)
        if var.ndim == 1:
            var = np.repeat(var[:, None], means.shape[1], axis=1)
        if means.ndim != 2 or means.shape[0] != log_w.shape[0] or var.shape != means.shape:
            raise ShapeError(
                f"inconsistent shapes: log_weights {log_w.shape}, means {means.shape}, variances {var.shape}"
            )
        if log_w.size == 0:
            raise ConfigurationError("a mixture needs at least one component")
        if not np.all(np.isfinite(log_w)):
            raise ConfigurationError("every component weight must be positive")
        if abs(float(np.exp(logsumexp(log_w))) - 1.0) > 1e-12:
            raise ConfigurationError("component weights must sum to 1")
        if not np.all(np.isfinite(means)):
            raise ConfigurationError("component means must be finite")
        if not np.all(var > 0) or not np.all(np.isfinite(var)):
            raise ConfigurationError("component variances must be positive and finite")
        for name, arr in (("log_weights", log_w), ("means", means), ("variances", var)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_weights(cls, weights, means, variances):
        w = np.asarray(weights, dtype=np.float64).reshape(-1)
        if np.any(w <= 0):
            raise ConfigurationError("every component weight must be positive")
        return cls(np.log(w), means, variances)

    @classmethod
    def from_unnormalized(cls, log_weights, means, variances):
        log_w = np.asarray(log_weights, dtype=np.float64)
        return cls(log_w - logsumexp(log_w), means, variances)

    @property
    def dim(self):
        return self.means.shape[1]

    @property
    def n_components(self):
        return self.means.shape[0]

    @property
    def weights(self):
        return np.exp(self.log_weights)

    @property
    def is_isotropic(self):
        return bool(np.all(self.variances == self.variances[:, :1]))

    def mean(self):
        return self.weights @ self.means

    def logpdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.dim:
            raise ShapeError(f"points have dimension {x.shape[-1]}, mixture has {self.dim}")
        resid = x[..., None, :] - self.means
        comp = -0.5 * np.sum(_LOG_2PI + np.log(self.variances) + resid**2 / self.variances, axis=-1)
        return logsumexp(comp + self.log_weights, axis=-1)

    def sample(self, n, rng):
        comp = rng.choice(self.n_components, size=n, p=self.weights / self.weights.sum())
        z = rng.standard_normal((n, self.dim))
        return self.means[comp] + np.sqrt(self.variances[comp]) * z

    def to_dict(self):
        comps = []
        for lw, m, v in zip(self.log_weights, self.means, self.variances):
            var = float(v[0]) if np.all(v == v[0]) else [float(u) for u in v]
            comps.append({"w": float(np.exp(lw)), "mean": [float(u) for u in m], "var": var})
        return {"dim": self.dim, "components": comps}

    @classmethod
    def from_dict(cls, data):
        try:
            dim = int(data["dim"])
            comps = data["components"]
            weights = [float(c["w"]) for c in comps]
            means = [[float(u) for u in c["mean"]] for c in comps]
            variances = [
                [float(c["var"])] * dim if np.isscalar(c["var"]) else [float(u) for u in c["var"]]
                for c in comps
            ]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"malformed mixture: {exc}") from None
        if any(len(m) != dim for m in means) or any(len(v) != dim for v in variances):
            raise ShapeError(f"component lengths do not match dim={dim}")
        w = np.asarray(weights)
        if abs(w.sum() - 1.0) > 1e-12:
            raise ConfigurationError(f"component weights sum to {w.sum()!r}, not 1")
        # Keep the stored weights verbatim so that JSON round trips are lossless.
        return cls(np.log(w), means, variances)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def gaussian(mean, var):
    """Single-component mixture N(mean, var I)."""
    mean = np.atleast_1d(np.asarray(mean, dtype=np.float64))
    return GaussianMixture(np.zeros(1), mean[None, :], np.full((1, mean.size), float(var)))


# --------------------------------------------------------------------------
# Rewards
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LinearReward:
    """r(x) = a.x + b"""

    a: np.ndarray
    b: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "a", np.atleast_1d(np.asarray(self.a, dtype=np.float64)))
        object.__setattr__(self, "b", float(self.b))

    def __call__(self, x):
        return np.asarray(x, dtype=np.float64) @ self.a + self.b


@dataclass(frozen=True, eq=False)
class QuadraticReward:
    """r(x) = 0.5 * sum_i A_ii x_i**2 + a.x + b"""

    A_diag: np.ndarray
    a: np.ndarray
    b: float = 0.0

    def __post_init__(self):
        A = np.atleast_1d(np.asarray(self.A_diag, dtype=np.float64))
        a = np.atleast_1d(np.asarray(self.a, dtype=np.float64))
        if A.shape != a.shape:
            raise ShapeError("A_diag and a must have the same length")
        object.__setattr__(self, "A_diag", A)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", float(self.b))

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        return 0.5 * (x * x) @ self.A_diag + x @ self.a + self.b


@dataclass(frozen=True, eq=False)
class BlackboxReward:
    """Arbitrary vectorised callable; only usable by Monte-Carlo estimators."""

    fn: Callable

    def __call__(self, x):
        return np.asarray(self.fn(np.asarray(x, dtype=np.float64)), dtype=np.float64)


def reward_from_dict(data):
    kind = data.get("kind")
    if kind == "linear":
        return LinearReward(data["a"], data.get("b", 0.0))
    if kind == "quadratic":
        return QuadraticReward(data["A_diag"], data["a"], data.get("b", 0.0))
    raise ConfigurationError(f"unknown reward kind {kind!r}; expected 'linear' or 'quadratic'")


def reward_to_dict(reward):
    if isinstance(reward, LinearReward):
        return {"kind": "linear", "a": reward.a.tolist(), "b": reward.b}
    if isinstance(reward, QuadraticReward):
        return {"kind": "quadratic", "A_diag": reward.A_diag.tolist(), "a": reward.a.tolist(), "b": reward.b}
    raise TypeError(f"cannot serialise {type(reward).__name__}")


# --------------------------------------------------------------------------
# Operations
# --------------------------------------------------------------------------

def noised_marginal(gmm, schedule, t):
    """Law of x_t = alpha_t x_0 + sigma_t eps when x_0 ~ gmm."""
    if not 0 <= t <= schedule.num_train_steps:
        raise IndexError(f"timestep {t} outside [0, {schedule.num_train_steps}]")
    a, s = schedule.alphas[t], schedule.sigmas[t]
    return GaussianMixture(gmm.log_weights, a * gmm.means, a * a * gmm.variances + s * s)


def exact_eps_coeffs(gmm, alpha, sigma, x_t):
    """E[eps | x_t] at explicit (alpha, sigma); ``x_t`` has shape (n, D)."""
    post = kernels.posterior_mean(x_t, gmm.log_weights, gmm.means, gmm.variances, alpha, sigma)
    return (x_t - alpha * post) / sigma


def exact_eps(gmm, x_t, t, schedule):
    """Minimum-MSE noise prediction E[eps | x_t] for data drawn from ``gmm``."""
    if not 1 <= t <= schedule.num_train_steps:
        raise IndexError(f"exact_eps needs 1 <= t <= {schedule.num_train_steps}, got {t}")
    sigma = float(schedule.sigmas[t])
    if sigma == 0.0:
        raise ZeroDivisionError("sigma_t is zero")
    x = np.asarray(x_t, dtype=np.float64)
    if x.shape[-1] != gmm.dim:
        raise ShapeError(f"x_t has dimension {x.shape[-1]}, mixture has {gmm.dim}")
    flat = x.reshape(-1, gmm.dim)
    return exact_eps_coeffs(gmm, float(schedule.alphas[t]), sigma, flat).reshape(x.shape)


def tilt(gmm, reward, inv_beta):
    """Exact density proportional to ``gmm(x) * exp(inv_beta * reward(x))``.

    Linear rewards shift every mean by ``var * a * inv_beta``; quadratic
    rewards also sharpen or widen each coordinate.  Raises
    NonNormalizableTilt when a positive curvature overwhelms a component's
    precision.
    """
    inv_beta = float(inv_beta)
    if inv_beta < 0 or not np.isfinite(inv_beta):
        raise ValueError(f"inv_beta must be finite and nonnegative, got {inv_beta}")
    if isinstance(reward, BlackboxReward):
        raise TypeError("black-box rewards have no closed-form tilt")
    if inv_beta == 0.0:
        return gmm
    if reward.a.shape[0] != gmm.dim:
        raise ShapeError(f"reward has dimension {reward.a.shape[0]}, mixture has {gmm.dim}")

    m, v = gmm.means, gmm.variances
    if isinstance(reward, LinearReward):
        shift = v * reward.a * inv_beta
        log_w = gmm.log_weights + m @ reward.a * inv_beta + 0.5 * np.sum(v * reward.a**2, axis=1) * inv_beta**2
        return GaussianMixture.from_unnormalized(log_w, m + shift, v)

    prec = 1.0 / v - reward.A_diag * inv_beta
    if np.any(prec <= 0):
        k, i = np.argwhere(prec <= 0)[0]
        raise NonNormalizableTilt(
            f"component {k}, coordinate {i}: precision {1.0 / v[k, i]:g} minus curvature "
            f"{reward.A_diag[i] * inv_beta:g} is not positive; beta is too small for this reward"
        )
    new_var = 1.0 / prec
    new_mean = new_var * (m / v + reward.a * inv_beta)
    log_w = gmm.log_weights + 0.5 * np.sum(np.log(new_var / v) + new_mean**2 * prec - m**2 / v, axis=1)
    return GaussianMixture.from_unnormalized(log_w, new_mean, new_var)


def reward_expectation(gmm, reward):
    """Exact E[reward(x)] under ``gmm`` for linear and quadratic rewards."""
    w = gmm.weights
    if isinstance(reward, LinearReward):
        return float(w @ (gmm.means @ reward.a + reward.b))
    if isinstance(reward, QuadraticReward):
        second = (gmm.variances + gmm.means**2) @ reward.A_diag
        return float(w @ (gmm.means @ reward.a + reward.b + 0.5 * second))
    raise TypeError("reward_expectation needs a linear or quadratic reward; use mc_reward_mean instead")


# --------------------------------------------------------------------------
# Conditional families
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ConditionedModel:
    """A data model for one condition label; ``label=None`` is unconditional."""

    label: Optional[int]
    model: GaussianMixture


def make_conditional_family(class_models, priors) -> List[ConditionedModel]:
    """Per-class models plus their prior-weighted mixture under the null label."""
    class_models = list(class_models)
    priors = np.asarray(priors, dtype=np.float64).reshape(-1)
    if len(class_models) != priors.size or not class_models:
        raise ConfigurationError("need one prior per class model")
    if np.any(priors <= 0) or abs(priors.sum() - 1.0) > 1e-12:
        raise ConfigurationError("priors must be positive and sum to 1")
    dim = class_models[0].dim
    if any(g.dim != dim for g in class_models):
        raise ShapeError("class models have different dimensions")

    if len(class_models) == 1:
        uncond = class_models[0]
    else:
        log_w = np.concatenate([np.log(p) + g.log_weights for p, g in zip(priors, class_models)])
        uncond = GaussianMixture.from_unnormalized(
            log_w,
            np.concatenate([g.means for g in class_models]),
            np.concatenate([g.variances for g in class_models]),
        )
    family = [ConditionedModel(c, g) for c, g in enumerate(class_models)]
    family.append(ConditionedModel(None, uncond))
    return family


def as_family(obj):
    """Accept a family list or a bare mixture (unconditional only)."""
    if isinstance(obj, GaussianMixture):
        return [ConditionedModel(None, obj)]
    family = list(obj)
    if not all(isinstance(m, ConditionedModel) for m in family):
        raise TypeError("a family is a list of ConditionedModel")
    return family


def family_model(family, label):
    for entry in family:
        if entry.label == label:
            return entry.model
    raise ConfigurationError(f"label {label!r} not present in model family")


def tilt_family(family, reward, inv_beta):
    """Tilt every member of a family, the unconditional entry included."""
    return [ConditionedModel(m.label, tilt(m.model, reward, inv_beta)) for m in as_family(family)]
