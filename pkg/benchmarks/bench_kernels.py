"""Time the numba and pure-numpy paths of the hot kernels against each other.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--n 100000]

The first numba call compiles (or loads from cache); it is excluded from
the timings.  Each row also reports the largest disagreement between the
two backends so a speedup never hides a wrong answer.
"""
import argparse
import time

import numpy as np

from realignlab import _accel, kernels
from realignlab.mixture import GaussianMixture
from realignlab.sampler import SamplerConfig, baseline_sample
from realignlab.schedule import make_schedule


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def run_case(name, fn, repeat):
    results = {}
    for name_backend in ("numpy", "numba"):
        _accel.set_backend(name_backend)
        fn()  # warm-up / compile
        results[name_backend] = best_of(fn, repeat)
    (t_np, out_np), (t_nb, out_nb) = results["numpy"], results["numba"]
    diff = float(np.max(np.abs(np.asarray(out_np) - np.asarray(out_nb))))
    print(f"{name:<34} numpy {t_np * 1e3:9.2f} ms   numba {t_nb * 1e3:9.2f} ms   "
          f"speedup {t_np / t_nb:6.2f}x   max|diff| {diff:.1e}")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--n", type=int, default=100_000, help="points for the posterior-mean kernel")
    parser.add_argument("--pairs", type=int, default=4000, help="points per set for the distance kernel")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    if not _accel.HAS_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")
    rng = np.random.default_rng(args.seed)
    previous = _accel.backend()

    for k, d in ((2, 1), (8, 2), (32, 4)):
        w = rng.dirichlet(np.ones(k))
        x = rng.normal(size=(args.n, d))
        means = rng.normal(size=(k, d)) * 2
        var = rng.uniform(0.2, 2.0, size=(k, d))
        run_case(f"posterior_mean n={args.n} K={k} D={d}",
                 lambda: kernels.posterior_mean(x, np.log(w), means, var, 0.8, 0.6), args.repeat)

    for d in (1, 2):
        a = rng.normal(size=(args.pairs, d))
        b = rng.normal(size=(args.pairs, d))
        run_case(f"mean_pairwise_distance {args.pairs}x{args.pairs} D={d}",
                 lambda: kernels.mean_pairwise_distance(a, b), args.repeat)

    gmm = GaussianMixture.from_weights([0.5, 0.5], [[-2.0], [2.0]], [1.0, 1.0])
    sched = make_schedule("linear_beta")
    cfg = SamplerConfig(num_inference_steps=200, batch_size=20_000, seed=args.seed)
    run_case("baseline_sample 2e4 x 200 steps", lambda: baseline_sample(gmm, cfg, sched).samples,
             max(1, args.repeat // 2))
    _accel.set_backend(previous)


if __name__ == "__main__":
    main()
