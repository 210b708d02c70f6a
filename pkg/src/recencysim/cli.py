"""Command-line entry point.

Subcommands:
  grid         run the main scenario grid
  sensitivity  run one of the preset sensitivity suites
  histogram    emit the infected-population composition histogram
  table1       emit the analytic bias / screening-burden table
  mdri         one-shot effective-MDRI query

A YAML config file can set any grid parameter; CLI flags override it.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import yaml

from .estimator import analytic_bias, effective_mdri_closed, effective_mdri_numeric
from .harness import (
    build_grid,
    build_sensitivity,
    default_out_dir,
    emit_histogram,
    emit_table1,
    run_grid,
    write_histogram,
    write_results,
    write_table1,
)
from .population import DEFAULT_PARAMS
from .recency_model import DEFAULT_ASSAY, LONG_ASSAY, mdri
from .testing_history import ExponentialInterTest, ObservationRule, TestingProcess


def _add_common(p):
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--out-dir", type=Path, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--config", type=Path, default=None, help="YAML config file")


def _load_config(path):
    if path is None:
        return {}
    with open(path) as fh:
        return yaml.safe_load(fh) or {}


def _resolved(args, cfg):
    """Merge config-file values and CLI overrides (CLI wins)."""
    return {
        "seed": args.seed if args.seed is not None else cfg.get("seed", 12345),
        "reps": args.reps if args.reps is not None else cfg.get("replications", 1000),
        "out_dir": args.out_dir
        if args.out_dir is not None
        else Path(cfg.get("out_dir", default_out_dir())),
        "workers": args.workers
        if args.workers is not None
        else cfg.get("workers", 1),
        "n_target": cfg.get("n_target", 5000),
    }


def _run_and_write(scenarios, opts, cfg, label):
    t0 = time.time()
    results = run_grid(scenarios, workers=opts["workers"])
    ok = write_results(
        results,
        opts["out_dir"],
        config_echo={"command": label, **cfg, **{k: str(v) for k, v in opts.items()}},
        seed=opts["seed"],
        wall_time=time.time() - t0,
    )
    print(f"{label}: {len(results)} scenarios -> {opts['out_dir']}")
    return 0 if ok else 1


def cmd_grid(args) -> int:
    cfg = _load_config(args.config)
    opts = _resolved(args, cfg)
    grid_cfg = cfg.get("grid", {})
    rules = [
        ObservationRule(r) for r in grid_cfg.get("rules", ["regular", "swp"])
    ]
    scenarios = build_grid(
        seed=opts["seed"],
        replications=opts["reps"],
        n_target=opts["n_target"],
        rules=rules,
        thetas=grid_cfg.get("theta", (0.4, 1.0, 1.5, 2.0)),
        rs=grid_cfg.get("r", (0.0, 0.3, 0.6, 1.0)),
        cs=grid_cfg.get("c", (0.0, 0.25, 1.0, 1.5, 2.0)),
        frrs=grid_cfg.get("frr", (0.0,)),
        uniform_bs=grid_cfg.get("uniform_b", ()),
        assay_name=grid_cfg.get("assay", "default"),
    )
    return _run_and_write(scenarios, opts, cfg, "grid")


def cmd_sensitivity(args) -> int:
    cfg = _load_config(args.config)
    opts = _resolved(args, cfg)
    scenarios = build_sensitivity(
        args.suite, opts["seed"], opts["reps"], opts["n_target"]
    )
    return _run_and_write(scenarios, opts, cfg, f"sensitivity:{args.suite}")


def cmd_histogram(args) -> int:
    cfg = _load_config(args.config)
    opts = _resolved(args, cfg)
    out_dir = Path(opts["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    rule = ObservationRule(args.rule)
    rows = emit_histogram(
        rule,
        ExponentialInterTest(args.theta),
        args.c,
        n_infected=args.n_infected,
        seed=opts["seed"],
    )
    out = out_dir / f"histogram_{rule.value}_theta{args.theta:g}_c{args.c:g}.csv"
    write_histogram(rows, out)
    print(f"histogram -> {out}")
    return 0


def cmd_table1(args) -> int:
    cfg = _load_config(args.config)
    opts = _resolved(args, cfg)
    out_dir = Path(opts["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = emit_table1(n_target=opts["n_target"])
    out = out_dir / "table1.csv"
    write_table1(rows, out)
    for row in rows:
        mark = "ok" if not row["unbiased"] else "unbiased"
        print(
            f"c={row['c']:<5g} theta={row['theta']:g} r={row['r']:g} "
            f"bias={row['bias_x1e3']:+.2f}e-3 screened={row['required_screened']:>7d} "
            f"[{mark}]"
        )
    print(f"table1 -> {out}")
    return 0


def cmd_mdri(args) -> int:
    assay = LONG_ASSAY if args.assay == "long" else DEFAULT_ASSAY
    rule = ObservationRule(args.rule)
    omega = mdri(assay)
    omega_eff = effective_mdri_closed(assay, args.theta, args.r, args.c, rule)
    bias = analytic_bias(assay, args.theta, args.r, args.c, rule, DEFAULT_PARAMS)
    print(f"mdri            = {omega:.6f} years ({omega * 365.25:.1f} days)")
    print(f"effective mdri  = {omega_eff:.6f} years")
    print(f"analytic bias   = {bias * 1e3:+.3f} x 1e-3 per person-year")
    if args.check_numeric:
        from .estimator import EffectiveMdriQuery

        q = EffectiveMdriQuery(
            assay=assay,
            process=TestingProcess(ExponentialInterTest(args.theta), rule),
            r=args.r,
            c=args.c,
            params=DEFAULT_PARAMS,
        )
        print(f"numeric mdri    = {effective_mdri_numeric(q):.6f} years")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="recencysim")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("grid", help="run the main scenario grid")
    _add_common(p)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("sensitivity", help="run a sensitivity suite")
    p.add_argument("suite", choices=["frr", "uniform_intertest", "long_mdri"])
    _add_common(p)
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("histogram", help="emit infected-population histogram data")
    p.add_argument("--rule", choices=["regular", "swp"], default="swp")
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--n-infected", type=int, default=50_000)
    _add_common(p)
    p.set_defaults(func=cmd_histogram)

    p = sub.add_parser("table1", help="emit the analytic bias/screening table")
    _add_common(p)
    p.set_defaults(func=cmd_table1)

    p = sub.add_parser("mdri", help="one-shot effective-MDRI query")
    p.add_argument("--rule", choices=["regular", "swp"], default="swp")
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--r", type=float, default=1.0)
    p.add_argument("--c", type=float, default=0.0)
    p.add_argument("--assay", choices=["default", "long"], default="default")
    p.add_argument("--check-numeric", action="store_true")
    p.set_defaults(func=cmd_mdri)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
