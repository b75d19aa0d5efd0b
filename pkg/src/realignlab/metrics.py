"""Agreement statistics and two-sample distances for approximation studies."""
import csv
import json
from dataclasses import asdict, dataclass
from typing import List, Tuple

import numpy as np
from scipy.stats import wasserstein_distance

from . import kernels
from .errors import InsufficientData, ShapeError


@dataclass(frozen=True)
class PairedRow:
    anchor_beta: float
    target_beta: float
    lam: float
    actual: float
    approximated: float


@dataclass(frozen=True)
class PairedMetrics:
    """(actual, approximated) pairs, each tagged with the strengths it compares."""

    rows: Tuple[PairedRow, ...]

    def __post_init__(self):
        rows = tuple(self.rows)
        for r in rows:
            if abs(r.lam - r.anchor_beta / r.target_beta) > 1e-9:
                raise ValueError(
                    f"lambda {r.lam} does not equal anchor/target = {r.anchor_beta}/{r.target_beta}"
                )
        object.__setattr__(self, "rows", rows)

    @classmethod
    def from_values(cls, actual, approximated):
        """Untagged pairs (both strengths set to 1)."""
        return cls(tuple(PairedRow(1.0, 1.0, 1.0, float(x), float(y)) for x, y in zip(actual, approximated)))

    @property
    def actual(self):
        return np.array([r.actual for r in self.rows])

    @property
    def approximated(self):
        return np.array([r.approximated for r in self.rows])

    def __len__(self):
        return len(self.rows)


@dataclass(frozen=True)
class SummaryStats:
    n: int
    mae: float
    rmse: float
    median_abs: float
    ba_mean_diff: float
    ba_sd: float
    loa_lo: float
    loa_hi: float
    mae_ci_lo: float
    mae_ci_hi: float
    mae_boot_mean: float
    mean_actual: float

    def relative(self, value):
        """``value`` as a percentage of the mean actual value."""
        return 100.0 * value / self.mean_actual

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True, indent=2)


def _diffs(pairs):
    if len(pairs) < 2:
        raise InsufficientData(f"need at least 2 pairs, got {len(pairs)}")
    return pairs.approximated - pairs.actual


def bootstrap_mae_ci(pairs, n_boot=10_000, seed=0, chunk=4096):
    """Percentile 95% interval and mean of the bootstrap MAE distribution."""
    if n_boot < 100:
        raise ValueError("need at least 100 bootstrap resamples")
    absd = np.abs(_diffs(pairs))
    n = absd.size
    rng = np.random.default_rng(seed)
    maes = np.empty(n_boot)
    for lo in range(0, n_boot, chunk):
        hi = min(n_boot, lo + chunk)
        maes[lo:hi] = absd[rng.integers(0, n, size=(hi - lo, n))].mean(axis=1)
    lo, hi = np.percentile(maes, [2.5, 97.5])
    return float(lo), float(hi), float(maes.mean())


def summarize(pairs, n_boot=10_000, seed=0):
    d = _diffs(pairs)
    absd = np.abs(d)
    mean_d = float(d.mean())
    sd = float(d.std(ddof=1))
    ci_lo, ci_hi, boot_mean = bootstrap_mae_ci(pairs, n_boot, seed)
    return SummaryStats(
        n=len(d),
        mae=float(absd.mean()),
        rmse=float(np.sqrt(np.mean(d * d))),
        median_abs=float(np.median(absd)),
        ba_mean_diff=mean_d,
        ba_sd=sd,
        loa_lo=mean_d - 1.96 * sd,
        loa_hi=mean_d + 1.96 * sd,
        mae_ci_lo=ci_lo,
        mae_ci_hi=ci_hi,
        mae_boot_mean=boot_mean,
        mean_actual=float(pairs.actual.mean()),
    )


def ecdf(values) -> List[Tuple[float, float]]:
    """Step points (x, F(x)) at each distinct value."""
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    if v.size == 0:
        raise InsufficientData("ECDF of an empty sample")
    xs, counts = np.unique(v, return_counts=True)
    fs = np.cumsum(counts) / v.size
    fs[-1] = 1.0
    return [(float(x), float(f)) for x, f in zip(xs, fs)]


def _as_points(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] == 0:
        raise InsufficientData("sample sets must be nonempty (n, D) arrays")
    return x


def energy_distance(a, b, max_points=20_000, seed=0):
    """2 E|A-B| - E|A-A'| - E|B-B'| over all pairs (V-statistic).

    Sets larger than ``max_points`` are subsampled without replacement with
    seed-pinned streams.  The arguments are put in a canonical order first,
    so the value is bitwise symmetric.
    """
    a, b = _as_points(a), _as_points(b)
    if a.shape[1] != b.shape[1]:
        raise ShapeError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    if (b.shape, b.tobytes()) < (a.shape, a.tobytes()):
        a, b = b, a
    picked = []
    for k, x in enumerate((a, b)):
        if x.shape[0] > max_points:
            rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(k,)))
            x = x[np.sort(rng.choice(x.shape[0], max_points, replace=False))]
        picked.append(x)
    a, b = picked
    cross = kernels.mean_pairwise_distance(a, b)
    return 2.0 * cross - kernels.mean_pairwise_distance(a) - kernels.mean_pairwise_distance(b)


def wasserstein_1d(a, b):
    """Order-1 transport distance between two 1-D samples."""
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.size == 0 or b.size == 0:
        raise InsufficientData("wasserstein_1d needs nonempty samples")
    if a.size == b.size:
        return float(np.mean(np.abs(np.sort(a) - np.sort(b))))
    return float(wasserstein_distance(a, b))


def mc_reward_mean(samples, reward):
    """Sample mean of ``reward`` and its Monte-Carlo standard error."""
    values = np.asarray(reward(np.asarray(samples, dtype=np.float64)), dtype=np.float64).reshape(-1)
    if values.size == 0:
        raise InsufficientData("no samples")
    se = float(values.std(ddof=1) / np.sqrt(values.size)) if values.size > 1 else 0.0
    return float(values.mean()), se


REPORT_COLUMNS = ["metric", "anchor_beta", "target_beta", "actual", "approximated", "abs_diff_pct"]


def abs_diff_pct(actual, approximated):
    if actual == approximated:
        return 0.0
    return 100.0 * abs(approximated - actual) / abs(actual)


def write_report_csv(path, metric, pairs, extra_columns=None):
    """Rows shaped like a strength-transfer table; ``extra_columns`` maps name -> per-row values."""
    extra_columns = extra_columns or {}
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS + list(extra_columns))
        for i, r in enumerate(pairs.rows):
            writer.writerow(
                [metric, repr(r.anchor_beta), repr(r.target_beta), repr(r.actual), repr(r.approximated),
                 repr(abs_diff_pct(r.actual, r.approximated))]
                + [v[i] for v in extra_columns.values()]
            )
