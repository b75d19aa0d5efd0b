import numpy as np
import pytest

from realignlab import _accel, kernels


def _reference_posterior_mean(x, log_w, means, variances, alpha, sigma):
    # direct evaluation without the log-sum-exp shift
    out = np.empty_like(x)
    for i, xi in enumerate(x):
        noised = alpha**2 * variances + sigma**2
        dens = np.exp(log_w) * np.prod(np.exp(-0.5 * (xi - alpha * means) ** 2 / noised) / np.sqrt(noised), axis=1)
        post = means + alpha * variances / noised * (xi - alpha * means)
        out[i] = dens @ post / dens.sum()
    return out


def _case(rng, k=4, d=3, n=50):
    w = rng.dirichlet(np.ones(k))
    return (rng.normal(size=(n, d)), np.log(w), rng.normal(size=(k, d)) * 2,
            rng.uniform(0.2, 2.0, size=(k, d)), 0.7, np.sqrt(1 - 0.49))


def test_posterior_mean_against_direct(rng, backend):
    args = _case(rng)
    np.testing.assert_allclose(kernels.posterior_mean(*args), _reference_posterior_mean(*args), rtol=1e-12)


def test_posterior_mean_backends_agree(rng):
    args = _case(rng, k=6, d=2, n=500)
    prev = _accel.set_backend("numba")
    try:
        a = kernels.posterior_mean(*args)
        _accel.set_backend("numpy")
        b = kernels.posterior_mean(*args)
    finally:
        _accel.set_backend(prev)
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-14)


def test_posterior_mean_far_tail_stable(backend):
    x = np.array([[1e3]])
    out = kernels.posterior_mean(x, np.log([0.5, 0.5]), np.array([[-2.0], [2.0]]), np.ones((2, 1)), 1.0, 0.1)
    assert np.isfinite(out).all()


def test_mean_pairwise_brute(rng, backend):
    a, b = rng.normal(size=(40, 3)), rng.normal(size=(30, 3))
    brute = np.mean([[np.linalg.norm(x - y) for y in b] for x in a])
    assert kernels.mean_pairwise_distance(a, b) == pytest.approx(brute, rel=1e-13)
    brute_same = np.mean([[np.linalg.norm(x - y) for y in a] for x in a])
    assert kernels.mean_pairwise_distance(a) == pytest.approx(brute_same, rel=1e-13)


def test_mean_pairwise_backends_agree(rng):
    a, b = rng.normal(size=(3000, 2)), rng.normal(size=(2500, 2))
    prev = _accel.set_backend("numba")
    try:
        x = kernels.mean_pairwise_distance(a, b)
        _accel.set_backend("numpy")
        y = kernels.mean_pairwise_distance(a, b)
    finally:
        _accel.set_backend(prev)
    assert x == pytest.approx(y, rel=1e-12)


def test_set_backend_validation():
    with pytest.raises(ValueError):
        _accel.set_backend("cuda")


def test_env_flag_selects_numpy():
    import os
    import subprocess
    import sys

    env = dict(os.environ, REALIGNLAB_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", "from realignlab import _accel; print(_accel.backend())"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
