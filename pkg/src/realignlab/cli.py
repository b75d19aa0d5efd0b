"""Command-line entry point: ``realignlab {sweep,bo,oracle-check,sample}``."""
import argparse
import json
import os
import sys

from . import experiments
from .config import load_config
from .errors import RealignError


def _load(args):
    cfg = load_config(args.config, seed_override=args.seed)
    out = args.out or cfg["output_dir"]
    return cfg, out


def cmd_sweep(args):
    cfg, out = _load(args)
    cells = experiments.run_sweep(cfg, out, threads=args.threads)
    for c in cells:
        print(f"anchor={c.anchor_beta:g} target={c.target_beta:g} lambda={c.lam:.6g} "
              f"actual={c.actual:.6g} approx={c.approximated:.6g} status={c.status}")
    print(f"wrote {os.path.join(out, 'sweep_report.csv')} and sweep_summary.json")
    return 0


def cmd_bo(args):
    cfg, out = _load(args)
    lam_star, best, history = experiments.run_bo(cfg, out)
    print(f"lambda*={lam_star:.6g} best={best:.6g} after {len(history)} evaluations")
    return 0


def cmd_oracle_check(args):
    settings = dict(load_config(args.config)["oracle"]) if args.config else {}
    for key in ("tuples", "grid_points", "n_sd", "tol", "compose_trials"):
        if getattr(args, key) is not None:
            settings[key] = getattr(args, key)
    if args.config and args.seed is None:
        seed = load_config(args.config)["seed"]
    else:
        seed = 0 if args.seed is None else args.seed
    report = experiments.oracle_check(seed=seed, **settings)
    print(f"max mean rel err   {report['max_mean_rel_err']:.3e}")
    print(f"max var rel err    {report['max_var_rel_err']:.3e}")
    print(f"tilt composition   {report['tilt_composition_max_abs_err']:.3e}")
    if report["coverage_failures"]:
        print(f"coverage failures  {len(report['coverage_failures'])}")
        for f in report["coverage_failures"][:5]:
            print(f"  tuple {f['index']}: {f['error']}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "oracle_report.json"), "w", encoding="utf-8") as fh:
            fh.write(json.dumps(report, sort_keys=True, indent=2) + "\n")
    if report["passed"]:
        print("PASS")
        return 0
    print("FAIL; worst tuples:")
    for row in report["worst_tuples"]:
        print("  " + json.dumps(row, sort_keys=True))
    return 1


def cmd_sample(args):
    cfg, out = _load(args)
    batch = experiments.run_sample(cfg, out)
    print(f"wrote {batch.samples.shape[0]} samples to {os.path.join(out, 'samples.csv')}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="realignlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        p.add_argument("--config", required=needs_config, help="YAML experiment file")
        p.add_argument("--out", help="output directory (overrides output_dir)")
        p.add_argument("--seed", type=int, help="override the configured seed")
        p.add_argument("--threads", type=int, default=1, help="sweep cells evaluated in parallel")

    for name, fn, helptext in (
        ("sweep", cmd_sweep, "realign every anchor to every target strength"),
        ("bo", cmd_bo, "Bayesian optimisation of the interpolation weight"),
        ("sample", cmd_sample, "single sampling run"),
    ):
        p = sub.add_parser(name, help=helptext)
        common(p)
        p.set_defaults(func=fn)

    p = sub.add_parser("oracle-check", help="closed form vs quadrature and tilt composition")
    common(p, needs_config=False)
    p.add_argument("--tuples", type=int, help="random tuples (200)")
    p.add_argument("--grid-points", type=int, help="quadrature points (200000)")
    p.add_argument("--n-sd", type=float, help="grid half-width in standard deviations (8)")
    p.add_argument("--tol", type=float, help="relative tolerance (1e-4)")
    p.add_argument("--compose-trials", type=int, help="tilt composition trials (200)")
    p.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except RealignError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
