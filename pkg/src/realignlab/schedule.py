"""Variance-preserving noise schedules and the DDPM/DDIM reverse-step posterior."""
import csv
import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ScheduleError, ShapeError
from .realign import PosteriorGaussian


class ScheduleKind(str, enum.Enum):
    LINEAR_BETA = "linear_beta"
    COSINE = "cosine"


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    """Discrete ladder of signal/noise coefficients, index 0 being clean data.

    ``alphas`` and ``sigmas`` have length ``num_train_steps + 1`` and satisfy
    ``alpha**2 + sigma**2 == 1``.
    """

    kind: ScheduleKind
    alphas: np.ndarray
    sigmas: np.ndarray
    params: tuple = ()

    def __post_init__(self):
        for name in ("alphas", "sigmas"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def num_train_steps(self):
        return len(self.alphas) - 1

    def step_variance(self, t, t_prev):
        """sigma_t**2 - (alpha_t / alpha_prev)**2 * sigma_prev**2."""
        a_t, s_t = self.alphas[t], self.sigmas[t]
        a_p, s_p = self.alphas[t_prev], self.sigmas[t_prev]
        return s_t * s_t - (a_t / a_p) ** 2 * s_p * s_p

    def validate(self):
        a, s = self.alphas, self.sigmas
        if a.shape != s.shape or a.ndim != 1 or len(a) < 2:
            raise ScheduleError("alphas and sigmas must be 1-D arrays of equal length >= 2")
        if not (a[0] >= 1 - 1e-6 and s[0] <= 1e-6):
            raise ScheduleError("index 0 must be clean data (alpha_0 ~ 1, sigma_0 ~ 0)")
        if np.any(a <= 0) or np.any(a > 1):
            raise ScheduleError("alphas must lie in (0, 1]")
        if np.any(np.diff(a) >= 0):
            raise ScheduleError("alphas must be strictly decreasing")
        if np.any(np.diff(s[1:]) <= 0) or s[1] <= s[0]:
            raise ScheduleError("sigmas must be strictly increasing")
        if np.max(np.abs(a * a + s * s - 1.0)) > 1e-9:
            raise ScheduleError("schedule is not variance preserving")
        t = np.arange(1, len(a))
        if np.any(self.step_variance(t, t - 1) <= 0):
            raise ScheduleError("per-step variance must be positive")
        return self

    def inference_timesteps(self, num_steps):
        """``num_steps + 1`` increasing indices from 0 to T, evenly spaced."""
        T = self.num_train_steps
        if not 1 <= num_steps <= T:
            raise ConfigurationError(f"num_inference_steps must be in [1, {T}], got {num_steps}")
        return (np.arange(num_steps + 1) * T) // num_steps

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "alpha", "sigma"])
            for t, (a, s) in enumerate(zip(self.alphas, self.sigmas)):
                writer.writerow([t, f"{a:.12g}", f"{s:.12g}"])


def _from_alpha_bar(kind, alpha_bar, params):
    alpha_bar = np.concatenate([[1.0], alpha_bar])
    alphas = np.sqrt(alpha_bar)
    sigmas = np.sqrt(1.0 - alpha_bar)
    return NoiseSchedule(kind, alphas, sigmas, params).validate()


def make_schedule(kind="linear_beta", T=1000, beta_min=1e-4, beta_max=0.02, cosine_s=0.008, max_beta=0.999):
    """Build a validated variance-preserving schedule.

    ``linear_beta`` uses betas evenly spaced from ``beta_min`` to
    ``beta_max``; ``cosine`` uses the squared-cosine cumulative signal with
    offset ``cosine_s`` and per-step betas clipped at ``max_beta``.
    """
    try:
        kind = ScheduleKind(kind)
    except ValueError:
        raise ConfigurationError(f"unknown schedule kind {kind!r}") from None
    if not isinstance(T, (int, np.integer)) or T < 1:
        raise ConfigurationError(f"T must be a positive integer, got {T!r}")
    T = int(T)

    if kind is ScheduleKind.LINEAR_BETA:
        if not (0 < beta_min <= beta_max < 1):
            raise ConfigurationError(
                f"linear_beta needs 0 < beta_min <= beta_max < 1, got ({beta_min}, {beta_max})"
            )
        betas = np.linspace(beta_min, beta_max, T)
        return _from_alpha_bar(kind, np.cumprod(1.0 - betas), (("beta_min", beta_min), ("beta_max", beta_max)))

    if not (cosine_s > 0 and 0 < max_beta < 1):
        raise ConfigurationError("cosine schedule needs cosine_s > 0 and max_beta in (0, 1)")
    f = np.cos((np.arange(T + 1) / T + cosine_s) / (1 + cosine_s) * math.pi / 2) ** 2
    betas = np.minimum(1.0 - f[1:] / f[:-1], max_beta)
    return _from_alpha_bar(kind, np.cumprod(1.0 - betas), (("cosine_s", cosine_s), ("max_beta", max_beta)))


def forward_marginal(schedule, t):
    """(alpha_t, sigma_t) of q(x_t | x_0) = N(alpha_t x_0, sigma_t**2 I)."""
    if not 0 <= t <= schedule.num_train_steps:
        raise IndexError(f"timestep {t} outside [0, {schedule.num_train_steps}]")
    return float(schedule.alphas[t]), float(schedule.sigmas[t])


@dataclass(frozen=True)
class StepPair:
    t: int
    t_prev: int
    eta: float = 1.0

    def __post_init__(self):
        if not self.t_prev < self.t:
            raise ConfigurationError(f"t_prev ({self.t_prev}) must be below t ({self.t})")
        if self.t_prev < 0:
            raise ConfigurationError("t_prev must be nonnegative")
        if not 0.0 <= self.eta <= 1.0:
            raise ConfigurationError(f"eta must be in [0, 1], got {self.eta}")


def scheduler_posterior(x_t, eps_hat, step, schedule):
    """Reverse-step Gaussian N(mu, var) from a noise prediction.

    x0 = (x_t - sigma_t eps) / alpha_t;
    var = eta**2 * step_variance * sigma_prev**2 / sigma_t**2;
    mu = alpha_prev x0 + sqrt(sigma_prev**2 - var) eps.
    ``eta=1`` is ancestral DDPM sampling, ``eta=0`` the deterministic path.
    """
    x_t = np.asarray(x_t, dtype=np.float64)
    eps_hat = np.asarray(eps_hat, dtype=np.float64)
    if x_t.shape != eps_hat.shape:
        raise ShapeError(f"x_t shape {x_t.shape} != eps_hat shape {eps_hat.shape}")
    T = schedule.num_train_steps
    if not step.t <= T:
        raise IndexError(f"timestep {step.t} outside [1, {T}]")
    a_t, s_t = schedule.alphas[step.t], schedule.sigmas[step.t]
    a_p, s_p = schedule.alphas[step.t_prev], schedule.sigmas[step.t_prev]
    if a_t <= 0:
        raise ScheduleError(f"alpha at t={step.t} is not positive")

    x0_hat = (x_t - s_t * eps_hat) / a_t
    var = step.eta**2 * schedule.step_variance(step.t, step.t_prev) * (s_p * s_p) / (s_t * s_t)
    direction = math.sqrt(max(s_p * s_p - var, 0.0))
    return PosteriorGaussian(a_p * x0_hat + direction * eps_hat, float(var))
