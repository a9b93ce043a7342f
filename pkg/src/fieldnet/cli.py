"""``fieldnet`` command-line entry point.

Exit codes: 0 success, 2 config error, 3 runtime error or missing input,
4 algorithm ordering failure in a sweep.
"""

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import config as cfgmod
from .analysis import check_log_fidelity, compare_report
from .engine import build_scenario, read_grid, run, sweep, write_grid, write_outputs, write_sweep_csv
from .errors import ConfigError, FieldnetError
from .field import UNIT_SQUARE, RegularGrid, reconstruct
from .rbf import KernelBasis

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_ORDER = 4


def _print_config_error(exc):
    print("config error:", file=sys.stderr)
    for path, msg in exc.problems:
        print(f"  {path}: {msg}", file=sys.stderr)


def cmd_validate(args):
    cfg = cfgmod.load(args.config)
    sys.stdout.write(cfgmod.dumps(cfg))
    return EXIT_OK


def _load_with_overrides(args):
    cfg = cfgmod.load(args.config)
    updates = {}
    if getattr(args, "seed", None) is not None:
        updates["scenario"] = dict(seed=args.seed)
    if getattr(args, "out", None) is not None:
        updates["output"] = dict(dir=args.out)
    return cfgmod.override(cfg, **updates) if updates else cfg


def cmd_run(args):
    cfg = _load_with_overrides(args)
    record = run(build_scenario(cfg))
    out = write_outputs(record, cfg["output"]["dir"])
    m = record.metrics
    print(f"{record.algorithm}: T={record.T:.3f} s  max_param_error={m['max_param_error']:.6g}  "
          f"integral_error={m['integral_error']:.6g}  steps={record.steps}  "
          f"wall={record.wall_time:.1f} s  out={out}")
    return EXIT_OK


def cmd_sweep(args):
    cfg = _load_with_overrides(args)
    rows = sweep(cfg, threads=args.threads)
    out_dir = cfg["output"]["dir"]
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "sweep.csv")
    write_sweep_csv(path, rows)
    failed = [r for r in rows if r["error"]]
    for r in rows:
        print(f"{r['algorithm']:>3} p={r['p']:<4d} sigma={r['sigma']:<6g} T={r['T_seconds']:.3f} "
              f"integral_error={r['integral_error']:.6g} max_param_error={r['max_param_error']:.6g}"
              + (f"  [{r['error']}]" if r["error"] else ""))
    print(f"wrote {path}")
    if failed:
        return EXIT_RUNTIME
    status = EXIT_OK
    groups = {}
    for r in rows:
        groups.setdefault((r["p"], r["sigma"]), []).append(r)
    for (p, sigma), group in groups.items():
        if len({r["algorithm"] for r in group} & {"s1", "s2", "s3"}) < 2:
            continue
        summary = compare_report(group, metrics=("integral_error",))
        for line in summary.lines():
            print(f"p={p} sigma={sigma:g} {line}")
        if not summary.passed:
            status = EXIT_ORDER
    return status


def cmd_metrics(args):
    rep, gaps = check_log_fidelity(args.dir)
    out = rep.as_dict()
    out["fidelity_gap"] = max(gaps.values())
    print(json.dumps(out, indent=1, default=float))
    return EXIT_OK


def cmd_reconstruct(args):
    summary_path = os.path.join(args.dir, "summary.json")
    if not os.path.exists(summary_path):
        raise FileNotFoundError(summary_path)
    with open(summary_path) as fh:
        summary = json.load(fh)
    basis = KernelBasis(np.array(summary["basis"]["centres"]), np.array(summary["basis"]["widths"]))
    grid = RegularGrid(args.resolution, args.resolution, UNIT_SQUARE)
    path = args.output or os.path.join(args.dir, f"reconstruction_{args.resolution}.txt")
    write_grid(path, reconstruct(basis, np.array(summary["composite"]), grid), grid)
    values, _ = read_grid(path)
    print(f"wrote {path} ({args.resolution}x{args.resolution}, min={values.min():.6g}, max={values.max():.6g})")
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="fieldnet", description="Distributed RBF field estimation by mobile sensors.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a config and print the resolved values")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="simulate one scenario and write its logs")
    p.add_argument("config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--threads", type=int, default=1, help="accepted for symmetry; a single run is serial")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run the config's algorithm x sigma x p grid")
    p.add_argument("config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--threads", type=int, default=1, help="worker processes")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("metrics", help="recompute run metrics from an output directory")
    p.add_argument("dir")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("reconstruct", help="render the logged estimate on a grid")
    p.add_argument("dir")
    p.add_argument("--resolution", type=int, default=101)
    p.add_argument("--output")
    p.set_defaults(func=cmd_reconstruct)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "resolution", 2) < 2:
        print("error: --resolution must be at least 2", file=sys.stderr)
        return EXIT_CONFIG
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        _print_config_error(exc)
        return EXIT_CONFIG
    except (FieldnetError, OSError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
