"""Geometric interpolation of Gaussian reverse-step posteriors.

A reverse step of the reference model and one of an aligned model are both
Gaussian.  Raising them to complementary powers and renormalising gives
another Gaussian whose precision is the weighted sum of the input precisions
and whose mean is the precision-weighted mean.  This module holds that
closed form, its K-model generalisation, and a brute-force quadrature oracle
used to check both.
"""
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np

from .errors import NonPositiveDefinite, OracleCoverageError, ShapeError

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class PosteriorGaussian:
    """N(mean, var) for one reverse step.

    ``mean`` has shape (D,) or (batch, D).  ``var`` is a scalar (isotropic)
    or a length-D vector (diagonal) shared by every row of ``mean``.  A zero
    variance marks a deterministic step.
    """

    mean: np.ndarray
    var: Union[float, np.ndarray]

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        if mean.ndim == 0:
            mean = mean.reshape(1)
        var = np.asarray(self.var, dtype=np.float64)
        if var.ndim == 0:
            var = float(var)
        elif var.ndim != 1 or var.shape[0] != mean.shape[-1]:
            raise ShapeError(f"variance shape {var.shape} does not match dimension {mean.shape[-1]}")
        if np.any(np.asarray(var) < 0) or not np.all(np.isfinite(var)):
            raise ValueError("posterior variance must be finite and nonnegative")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "var", var)

    @property
    def dim(self):
        return self.mean.shape[-1]

    @property
    def is_diagonal(self):
        return not isinstance(self.var, float)


@dataclass(frozen=True)
class RealignWeights:
    """Per-model interpolation weights; the reference gets ``1 - sum``."""

    lambdas: Tuple[float, ...]

    def __post_init__(self):
        lams = tuple(float(v) for v in np.atleast_1d(self.lambdas))
        if not lams:
            raise ValueError("at least one interpolation weight is required")
        if any(not np.isfinite(v) or v < 0 for v in lams):
            raise ValueError(f"interpolation weights must be finite and nonnegative, got {lams}")
        object.__setattr__(self, "lambdas", lams)

    @property
    def ref_weight(self):
        return 1.0 - sum(self.lambdas)

    @property
    def total(self):
        return sum(self.lambdas)

    @property
    def is_convex(self):
        return self.total <= 1.0


def _check_dims(posteriors):
    dim = posteriors[0].dim
    for p in posteriors[1:]:
        if p.dim != dim:
            raise ShapeError(f"posterior dimensions differ: {dim} vs {p.dim}")
    try:
        np.broadcast_shapes(*(p.mean.shape for p in posteriors))
    except ValueError as exc:
        raise ShapeError(str(exc)) from None


def _combine(posteriors, weights):
    """Weighted product of Gaussians, reference first."""
    _check_dims(posteriors)
    variances = [np.asarray(p.var, dtype=np.float64) for p in posteriors]
    zero = [bool(np.all(v == 0)) for v in variances]
    if any(np.any(v == 0) and not z for v, z in zip(variances, zero)):
        raise NonPositiveDefinite("diagonal variance with some zero entries")

    if any(zero):
        # Infinite-precision limit: deterministic inputs dominate and are
        # averaged with their own weights.
        w_det = sum(w for w, z in zip(weights, zero) if z)
        if not w_det > 0:
            raise NonPositiveDefinite(f"deterministic inputs carry total weight {w_det}")
        mean = sum(w * p.mean for w, p, z in zip(weights, posteriors, zero) if z) / w_det
        return PosteriorGaussian(mean, 0.0)

    precision = weights[0] / variances[0]
    for w, v in zip(weights[1:], variances[1:]):
        precision = precision + w / v
    if np.any(precision <= 0) or not np.all(np.isfinite(precision)):
        raise NonPositiveDefinite(
            f"interpolated precision {precision} is not positive; "
            "the weights extrapolate beyond what these variances allow"
        )
    var_new = 1.0 / precision
    acc = weights[0] / variances[0] * posteriors[0].mean
    for w, v, p in zip(weights[1:], variances[1:], posteriors[1:]):
        acc = acc + w / v * p.mean
    var_out = float(var_new) if np.ndim(var_new) == 0 else var_new
    return PosteriorGaussian(var_new * acc, var_out)


def geometric_interpolate(p_ref, p_aligned, lam):
    """Normalised ``p_ref**(1-lam) * p_aligned**lam`` for two Gaussians.

    ``lam`` in [0, 1] interpolates; larger values extrapolate and are
    accepted only while the resulting precision stays positive.  The
    endpoints return their argument unchanged.
    """
    lam = float(lam)
    _check_dims([p_ref, p_aligned])
    if lam == 0.0:
        return p_ref
    if lam == 1.0:
        return p_aligned
    return _combine([p_ref, p_aligned], [1.0 - lam, lam])


def multi_geometric_interpolate(p_ref, aligned: Sequence[Tuple[PosteriorGaussian, float]]):
    """Product ``p_ref**(1 - sum lam_i) * prod p_i**lam_i``, normalised."""
    if not aligned:
        return p_ref
    posteriors = [p_ref] + [p for p, _ in aligned]
    lams = [float(lam) for _, lam in aligned]
    _check_dims(posteriors)
    if all(lam == 0.0 for lam in lams):
        return p_ref
    ref_weight = 1.0 - sum(lams)
    return _combine(posteriors, [ref_weight] + lams)


def gaussian_logpdf(x, mean, var):
    """Log N(x; mean, var I or diag(var)), summed over the last axis."""
    x = np.asarray(x, dtype=np.float64)
    var = np.broadcast_to(np.asarray(var, dtype=np.float64), np.shape(mean)[-1:])
    resid = x - mean
    return -0.5 * np.sum(_LOG_2PI + np.log(var) + resid**2 / var, axis=-1)


def geometric_mixture_logdensity(x, p_ref, p_aligned, lam):
    """Unnormalised log of ``p_ref**(1-lam) * p_aligned**lam`` at ``x``."""
    _check_dims([p_ref, p_aligned])
    lam = float(lam)
    return (1.0 - lam) * gaussian_logpdf(x, p_ref.mean, p_ref.var) + lam * gaussian_logpdf(
        x, p_aligned.mean, p_aligned.var
    )


def default_grid(p_ref, p_aligned, n_sd=8.0, n_points=200_000):
    """Grid spanning ``n_sd`` standard deviations either side of both inputs."""
    lows, highs = [], []
    for p in (p_ref, p_aligned):
        sd = float(np.sqrt(np.max(p.var)))
        m = float(p.mean.reshape(-1)[0])
        lows.append(m - n_sd * sd)
        highs.append(m + n_sd * sd)
    return min(lows), max(highs), int(n_points)


def grid_normalize_oracle(p_ref, p_aligned, lam, grid=None, edge_tol=1e-8):
    """Moments of the geometric mixture by trapezoid quadrature (1D only).

    Returns ``(mean, var, log_norm)`` where ``log_norm`` is the log of the
    integral of the unnormalised density.  Raises OracleCoverageError when
    more than ``edge_tol`` of the normalised mass sits in the outer 1% of
    the grid on either side.
    """
    if p_ref.dim != 1 or p_aligned.dim != 1 or p_ref.mean.size != 1 or p_aligned.mean.size != 1:
        raise ShapeError("grid oracle requires one-dimensional, unbatched posteriors")
    if grid is None:
        grid = default_grid(p_ref, p_aligned)
    lo, hi, n = grid
    xs = np.linspace(float(lo), float(hi), int(n))
    logd = geometric_mixture_logdensity(xs[:, None], p_ref, p_aligned, lam)
    top = float(np.max(logd))
    dens = np.exp(logd - top)
    z = np.trapezoid(dens, xs)
    if not z > 0 or not np.isfinite(z):
        raise OracleCoverageError("density does not integrate to a positive finite value on the grid")
    p = dens / z
    band = max(1, int(np.ceil(0.01 * n)))
    edge = max(np.trapezoid(p[:band + 1], xs[:band + 1]), np.trapezoid(p[-band - 1:], xs[-band - 1:]))
    if edge > edge_tol:
        raise OracleCoverageError(f"grid [{lo}, {hi}] leaves edge mass {edge:.3e} > {edge_tol:g}")
    mean = float(np.trapezoid(p * xs, xs))
    var = float(np.trapezoid(p * (xs - mean) ** 2, xs))
    return mean, var, top + float(np.log(z))
