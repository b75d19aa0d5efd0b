"""Hot numeric kernels, each with a numba and a pure-numpy implementation.

The public functions dispatch on :func:`realignlab._accel.backend`. Both
paths compute the same quantities; they agree to rounding, not bitwise.
"""
import numpy as np

from ._accel import backend, njit


# --------------------------------------------------------------------------
# Posterior mean E[x0 | x_t] under a noised diagonal Gaussian mixture
# --------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _posterior_mean_numba(x, log_w, means, variances, alpha, sigma):
    n, dim = x.shape
    k_count = means.shape[0]
    out = np.empty((n, dim))
    logr = np.empty(k_count)
    noised = np.empty((k_count, dim))
    lognorm = np.empty(k_count)
    for k in range(k_count):
        acc = 0.0
        for d in range(dim):
            v = alpha * alpha * variances[k, d] + sigma * sigma
            noised[k, d] = v
            acc += np.log(v)
        lognorm[k] = log_w[k] - 0.5 * acc
    for i in range(n):
        top = -np.inf
        for k in range(k_count):
            q = 0.0
            for d in range(dim):
                r = x[i, d] - alpha * means[k, d]
                q += r * r / noised[k, d]
            logr[k] = lognorm[k] - 0.5 * q
            if logr[k] > top:
                top = logr[k]
        total = 0.0
        for k in range(k_count):
            logr[k] = np.exp(logr[k] - top)
            total += logr[k]
        for d in range(dim):
            acc = 0.0
            for k in range(k_count):
                gain = alpha * variances[k, d] / noised[k, d]
                post = means[k, d] + gain * (x[i, d] - alpha * means[k, d])
                acc += logr[k] * post
            out[i, d] = acc / total
    return out


def _posterior_mean_numpy(x, log_w, means, variances, alpha, sigma):
    noised = alpha * alpha * variances + sigma * sigma  # (K, D)
    resid = x[:, None, :] - alpha * means[None, :, :]  # (n, K, D)
    logr = log_w - 0.5 * np.log(noised).sum(axis=1) - 0.5 * (resid**2 / noised).sum(axis=2)
    logr -= logr.max(axis=1, keepdims=True)
    resp = np.exp(logr)
    resp /= resp.sum(axis=1, keepdims=True)
    gain = alpha * variances / noised
    post = means[None, :, :] + gain[None, :, :] * resid
    return np.einsum("nk,nkd->nd", resp, post)


def posterior_mean(x, log_w, means, variances, alpha, sigma):
    """E[x0 | x_t = x] for a mixture with log-weights ``log_w``.

    ``means`` and ``variances`` have shape (K, D); ``x`` has shape (n, D).
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    args = (
        x,
        np.ascontiguousarray(log_w, dtype=np.float64),
        np.ascontiguousarray(means, dtype=np.float64),
        np.ascontiguousarray(variances, dtype=np.float64),
        float(alpha),
        float(sigma),
    )
    if backend() == "numba":
        return _posterior_mean_numba(*args)
    return _posterior_mean_numpy(*args)


# --------------------------------------------------------------------------
# Mean pairwise Euclidean distance between two point sets
# --------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _mean_pairwise_numba(a, b, same):
    n, dim = a.shape
    m = b.shape[0]
    total = 0.0
    for i in range(n):
        row = 0.0
        start = i + 1 if same else 0
        for j in range(start, m):
            s = 0.0
            for d in range(dim):
                r = a[i, d] - b[j, d]
                s += r * r
            row += np.sqrt(s)
        total += row
    if same:
        return 2.0 * total / (n * m)
    return total / (n * m)


def _mean_pairwise_numpy(a, b, same, chunk=2048):
    total = 0.0
    for lo in range(0, a.shape[0], chunk):
        block = a[lo:lo + chunk]
        dist = np.sqrt(((block[:, None, :] - b[None, :, :]) ** 2).sum(axis=2))
        total += float(dist.sum())
    return total / (a.shape[0] * b.shape[0])


def mean_pairwise_distance(a, b=None):
    """Average of ||a_i - b_j|| over all n*m pairs (V-statistic).

    With ``b=None`` the average is over all pairs of ``a`` with itself,
    zero-length diagonal included.
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    same = b is None
    b = a if same else np.ascontiguousarray(b, dtype=np.float64)
    if backend() == "numba":
        return float(_mean_pairwise_numba(a, b, same))
    return _mean_pairwise_numpy(a, b, same)
