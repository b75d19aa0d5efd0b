"""Reverse-diffusion samplers: plain ancestral sampling and realigned sampling.

Both samplers share one loop.  Each sample owns an RNG substream keyed by
its position in the batch; the initial latent and then one noise vector per
step are drawn from it in a fixed order.  That makes the realigned sampler at
``lam=0`` (or ``lam=1``) reproduce the plain sampler on the reference (or
aligned) model bit for bit, whatever the chunking.
"""
import csv
import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import ConfigurationError, NonPositiveDefinite, NumericFailure, ShapeError
from .mixture import as_family, exact_eps_coeffs, family_model
from .realign import RealignWeights, geometric_interpolate, multi_geometric_interpolate
from .schedule import StepPair, scheduler_posterior


@dataclass(frozen=True)
class SamplerConfig:
    num_inference_steps: int = 50
    guidance_scale: float = 1.0
    lam: Union[float, RealignWeights] = 1.0
    eta: float = 1.0
    seed: int = 0
    batch_size: int = 1
    record_trajectory: bool = False
    chunk_size: int = 8192

    def __post_init__(self):
        if self.num_inference_steps < 1:
            raise ConfigurationError("num_inference_steps must be positive")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be positive")
        if self.guidance_scale < 0:
            raise ConfigurationError("guidance_scale must be nonnegative")
        if not 0.0 <= self.eta <= 1.0:
            raise ConfigurationError("eta must be in [0, 1]")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigurationError("seed must be a 64-bit unsigned integer")
        if self.chunk_size < 1:
            raise ConfigurationError("chunk_size must be positive")
        if not isinstance(self.lam, RealignWeights):
            lam = float(self.lam)
            if not np.isfinite(lam) or lam < 0:
                raise ConfigurationError(f"lambda must be finite and nonnegative, got {self.lam}")

    def to_dict(self):
        out = asdict(self)
        if isinstance(self.lam, RealignWeights):
            out["lam"] = list(self.lam.lambdas)
        return out


@dataclass
class SampleBatch:
    samples: np.ndarray
    trajectory: Optional[np.ndarray] = None
    timesteps: Optional[np.ndarray] = None
    metadata: dict = field(default_factory=dict)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"x_{d}" for d in range(self.samples.shape[1])])
            writer.writerows([[repr(float(v)) for v in row] for row in self.samples])

    def trajectory_to_csv(self, path):
        if self.trajectory is None:
            raise ValueError("trajectory was not recorded")
        dim = self.trajectory.shape[2]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "t", "sample"] + [f"x_{d}" for d in range(dim)])
            for k, frame in enumerate(self.trajectory):
                t = int(self.timesteps[len(self.timesteps) - 1 - k])
                for j, row in enumerate(frame):
                    writer.writerow([k, t, j] + [repr(float(v)) for v in row])

    def to_json(self):
        return json.dumps(
            {"metadata": self.metadata, "samples": self.samples.tolist()}, sort_keys=True
        )


def model_id(gmm):
    return hashlib.sha256(gmm.to_json().encode()).hexdigest()[:12]


def cfg_eps(family, x_t, t, label, gamma, schedule):
    """Classifier-free guided noise prediction from exact denoisers."""
    return _cfg_eps_coeffs(
        as_family(family), np.atleast_2d(np.asarray(x_t, dtype=np.float64)), label, gamma,
        float(schedule.alphas[t]), float(schedule.sigmas[t]),
    ).reshape(np.shape(x_t))


def _cfg_eps_coeffs(family, x, label, gamma, alpha, sigma):
    uncond = family_model(family, None)
    if label is None or gamma == 0.0:
        return exact_eps_coeffs(uncond, alpha, sigma, x)
    cond = family_model(family, label)
    eps_c = exact_eps_coeffs(cond, alpha, sigma, x)
    if gamma == 1.0:
        return eps_c
    eps_u = exact_eps_coeffs(uncond, alpha, sigma, x)
    return eps_u + gamma * (eps_c - eps_u)


def sample_noise(seed, start, stop, num_steps, dim):
    """Per-sample substream draws: row 0 is the initial latent, rows 1..N the step noise."""
    out = np.empty((stop - start, num_steps + 1, dim))
    for j, idx in enumerate(range(start, stop)):
        ss = np.random.SeedSequence(int(seed), spawn_key=(idx,))
        out[j] = np.random.Generator(np.random.PCG64(ss)).standard_normal((num_steps + 1, dim))
    return out


def _run(families, combine, config, schedule, label, dim):
    T = schedule.num_train_steps
    N = config.num_inference_steps
    if N > T:
        raise ConfigurationError(f"num_inference_steps {N} exceeds the schedule's {T} steps")
    for fam in families:
        family_model(fam, None)
        if label is not None:
            family_model(fam, label)
    ts = schedule.inference_timesteps(N)
    n = config.batch_size
    samples = np.empty((n, dim))
    traj = np.empty((N + 1, n, dim)) if config.record_trajectory else None

    for lo in range(0, n, config.chunk_size):
        hi = min(n, lo + config.chunk_size)
        noise = sample_noise(config.seed, lo, hi, N, dim)
        x = noise[:, 0, :].copy()
        if traj is not None:
            traj[0, lo:hi] = x
        for k, i in enumerate(range(N, 0, -1), start=1):
            step = StepPair(int(ts[i]), int(ts[i - 1]), config.eta)
            alpha, sigma = float(schedule.alphas[step.t]), float(schedule.sigmas[step.t])
            posts = [
                scheduler_posterior(x, _cfg_eps_coeffs(fam, x, label, config.guidance_scale, alpha, sigma), step, schedule)
                for fam in families
            ]
            try:
                p = combine(posts)
            except NonPositiveDefinite as exc:
                raise NonPositiveDefinite(str(exc), step=step.t) from None
            if np.all(np.asarray(p.var) == 0):
                x = p.mean
            else:
                x = p.mean + noise[:, k, :] * np.sqrt(p.var)
            if not np.all(np.isfinite(x)):
                raise NumericFailure("non-finite latent", step=step.t)
            if traj is not None:
                traj[k, lo:hi] = x
        samples[lo:hi] = x
    return samples, traj, ts


def _metadata(config, schedule, label, models):
    return {
        "config": config.to_dict(),
        "schedule": {"kind": schedule.kind.value, "T": schedule.num_train_steps, "params": dict(schedule.params)},
        "label": label,
        "models": models,
    }


def baseline_sample(family, config, schedule, label=None):
    """Ancestral (``eta=1``) or deterministic (``eta=0``) sampling of one model."""
    family = as_family(family)
    dim = family_model(family, None).dim
    samples, traj, ts = _run([family], lambda posts: posts[0], config, schedule, label, dim)
    meta = _metadata(config, schedule, label, {"model": model_id(family_model(family, None))})
    return SampleBatch(samples, traj, ts, meta)


def deradiff_sample(ref_family, aligned_families, config, schedule, label=None):
    """Sample with per-step geometric interpolation of reference and aligned posteriors.

    ``aligned_families`` is one family (scalar ``config.lam``) or a list of K
    families matched by a K-entry :class:`RealignWeights`.
    """
    ref_family = as_family(ref_family)
    if isinstance(config.lam, RealignWeights):
        aligned = [as_family(f) for f in aligned_families]
        lams = config.lam.lambdas
        if len(aligned) != len(lams):
            raise ConfigurationError(f"{len(aligned)} aligned families but {len(lams)} weights")

        def combine(posts):
            return multi_geometric_interpolate(posts[0], list(zip(posts[1:], lams)))
    else:
        aligned = [as_family(aligned_families)]
        lam = float(config.lam)

        def combine(posts):
            return geometric_interpolate(posts[0], posts[1], lam)

    dim = family_model(ref_family, None).dim
    if any(family_model(f, None).dim != dim for f in aligned):
        raise ShapeError("reference and aligned families have different dimensions")
    samples, traj, ts = _run([ref_family] + aligned, combine, config, schedule, label, dim)
    meta = _metadata(
        config, schedule, label,
        {"reference": model_id(family_model(ref_family, None)),
         "aligned": [model_id(family_model(f, None)) for f in aligned]},
    )
    return SampleBatch(samples, traj, ts, meta)
