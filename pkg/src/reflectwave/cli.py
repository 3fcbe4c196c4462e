"""Command-line front end: run, sweep, optimize, metrics.

Exit codes are a stable contract: 0 success, 2 input error (bad config,
bad flags, malformed CSV), 3 runtime abort inside a simulation.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analysis import (Metrics, compute_metrics, optimize_refmodel, sweep)
from .engine import run_to_end
from .errors import SimulationError
from .params import (Config, ConfigError, default_config, load_config,
                     parse_quantity, write_config)
from .traceio import TraceFormatError, read_trace, write_trace

__all__ = ["RunManifest", "cmd_run", "cmd_sweep", "cmd_optimize",
           "cmd_metrics", "main"]

MODES = ("adaptive", "static-matched", "off")


@dataclass(frozen=True)
class RunManifest:
    """Everything one invocation needs."""

    config_path: str | None
    out_dir: str
    mode: str = "off"
    oracle: bool = False
    seed: int = 0


class UsageError(ValueError):
    pass


def _load(config_path: str | None) -> Config:
    if config_path is None:
        return default_config()
    return load_config(config_path)


def format_metrics(metrics: Metrics) -> str:
    def fmt(v):
        if v is None:
            return "absent"
        return repr(v)

    lines = [f"{key} = {fmt(value)}"
             for key, value in metrics.as_dict().items()]
    return "\n".join(lines) + "\n"


def _write_metrics(metrics: Metrics, out: Path) -> None:
    (out / "metrics.txt").write_text(format_metrics(metrics),
                                     encoding="ascii", newline="\n")
    with open(out / "metrics.json", "w", encoding="ascii") as fh:
        json.dump(metrics.as_dict(), fh, indent=2)
        fh.write("\n")


def cmd_run(manifest: RunManifest) -> int:
    """Simulate once; write trace.csv, metrics and the resolved config."""
    config = _load(manifest.config_path)
    out = Path(manifest.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    trace = run_to_end(config, mode=manifest.mode)
    write_trace(trace, out / "trace.csv")
    write_config(config, out / "config_resolved.ini")
    metrics = compute_metrics(trace, config)
    _write_metrics(metrics, out)
    print(f"wrote {out / 'trace.csv'} ({len(trace)} samples)")
    print(format_metrics(metrics), end="")

    if manifest.oracle:
        twin = run_to_end(config, mode=manifest.mode, line_model="ladder")
        write_trace(twin, out / "trace_ladder.csv")
        div = float(np.abs(trace.v_mot_V - twin.v_mot_V).max())
        (out / "oracle.txt").write_text(
            f"max_divergence_V = {div!r}\n", encoding="ascii", newline="\n")
        print(f"ladder cross-check: max divergence {div:.3f} V "
              f"({div / config.pwm.v_dc * 100:.2f}% of v_dc)")
    return 0


def _parse_sweep_flag(text: str) -> tuple[str, list[float]]:
    try:
        key, _, rng = text.partition("=")
        start_s, stop_s, steps_s = rng.split(":")
        start, stop = parse_quantity(start_s), parse_quantity(stop_s)
        steps = int(steps_s)
    except ValueError:
        raise UsageError(f"bad --sweep spec {text!r}, "
                         f"expected KEY=START:STOP:STEPS") from None
    if steps < 1:
        raise UsageError(f"--sweep {text!r}: STEPS must be >= 1")
    if steps == 1:
        values = [start]
    else:
        values = list(np.linspace(start, stop, steps))
    return key, values


def cmd_sweep(manifest: RunManifest, sweep_specs: list[str]) -> int:
    """Cartesian sweep; one metrics row per point into sweep.csv."""
    if not sweep_specs:
        raise UsageError(
            "sweep requires at least one --sweep KEY=START:STOP:STEPS")
    axes = [_parse_sweep_flag(s) for s in sweep_specs]
    config = _load(manifest.config_path)
    out = Path(manifest.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    rows = sweep(config, axes, mode=manifest.mode)
    keys = [k for k, _ in axes]
    fields = keys + ["peak_ratio", "ring_freq_hz", "branch_loss_w",
                     "settle_time_s", "clamp_count", "error"]
    with open(out / "sweep.csv", "w", encoding="ascii", newline="\n") as fh:
        fh.write(",".join(fields) + "\n")
        for row in rows:
            rendered = []
            for f in fields:
                v = row.get(f)
                rendered.append("" if v is None else
                                (repr(v) if isinstance(v, float) else str(v)))
            fh.write(",".join(rendered) + "\n")
    write_config(config, out / "config_resolved.ini")
    print(f"wrote {out / 'sweep.csv'} ({len(rows)} rows)")
    return 0


def cmd_optimize(manifest: RunManifest, space_specs: list[str],
                 budget: int) -> int:
    """Search (alpha, omega, gamma) for minimum branch loss."""
    config = _load(manifest.config_path)
    out = Path(manifest.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    space = {"alpha": (config.mrac.alpha / 4, config.mrac.alpha * 4),
             "omega": (config.mrac.omega / 4, config.mrac.omega * 4),
             "gamma": (config.mrac.gamma / 4, config.mrac.gamma * 4)}
    for spec in space_specs:
        try:
            key, _, rng = spec.partition("=")
            lo_s, hi_s = rng.split(":")
            space[key] = (parse_quantity(lo_s), parse_quantity(hi_s))
        except (ValueError, KeyError):
            raise UsageError(f"bad --space spec {spec!r}, "
                             f"expected KEY=LOW:HIGH") from None
        if key not in ("alpha", "omega", "gamma"):
            raise UsageError(f"--space key must be alpha, omega or gamma, "
                             f"got {key!r}")

    result = optimize_refmodel(config, space, budget=budget,
                               seed=manifest.seed)
    report = {
        "params": result.params,
        "feasible": result.feasible,
        "evaluations": result.evaluations,
        "metrics": result.metrics.as_dict(),
        "log": result.log,
    }
    with open(out / "optimize.json", "w", encoding="ascii") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    write_config(config, out / "config_resolved.ini")
    status = "feasible" if result.feasible else \
        "NO feasible point found; best infeasible candidate"
    print(f"{status}: {result.params}")
    print(format_metrics(result.metrics), end="")
    print(f"evaluations: {result.evaluations}")
    return 0


def cmd_metrics(trace_path: str, config_path: str | None,
                out_path: str | None) -> int:
    """Recompute metrics from a persisted trace."""
    trace_file = Path(trace_path)
    trace = read_trace(trace_file)
    if config_path is None:
        sibling = trace_file.parent / "config_resolved.ini"
        if not sibling.exists():
            raise UsageError(
                f"no config beside {trace_file}; pass --config explicitly")
        config_path = str(sibling)
    config = load_config(config_path)
    metrics = compute_metrics(trace, config)
    text = format_metrics(metrics)
    if out_path:
        Path(out_path).write_text(text, encoding="ascii", newline="\n")
    print(text, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reflectwave",
        description="Reflected-wave overvoltage simulator with an adaptive "
                    "surge-impedance branch")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", metavar="PATH", default=None,
                       help="config file (defaults to the stock scenario)")
        p.add_argument("--out", metavar="DIR", default="out",
                       help="output directory (default: ./out)")
        p.add_argument("--mode", choices=MODES, default="off",
                       help="branch gating mode (default: off)")
        p.add_argument("--seed", type=int, default=0)

    p_run = sub.add_parser("run", help="simulate once and persist the trace")
    common(p_run)
    p_run.add_argument("--oracle", action="store_true",
                       help="also run the LC-ladder twin and report the "
                            "max divergence")

    p_sweep = sub.add_parser("sweep", help="metrics over a parameter grid")
    common(p_sweep)
    p_sweep.add_argument("--sweep", action="append", default=[],
                         metavar="KEY=START:STOP:STEPS",
                         help="sweep axis, e.g. cable.length_m=20:100:5 "
                              "(repeatable)")

    p_opt = sub.add_parser("optimize",
                           help="search reference-model parameters for "
                                "minimum branch loss")
    common(p_opt)
    p_opt.add_argument("--budget", type=int, default=40,
                       help="max simulation evaluations (default 40)")
    p_opt.add_argument("--space", action="append", default=[],
                       metavar="KEY=LOW:HIGH",
                       help="override search range for alpha/omega/gamma")

    p_met = sub.add_parser("metrics", help="recompute metrics from a trace")
    p_met.add_argument("trace", metavar="TRACE_CSV")
    p_met.add_argument("--config", metavar="PATH", default=None)
    p_met.add_argument("--out", metavar="PATH", default=None,
                       help="also write metrics.txt here")

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        if args.command == "run":
            manifest = RunManifest(args.config, args.out, mode=args.mode,
                                   oracle=args.oracle, seed=args.seed)
            return cmd_run(manifest)
        if args.command == "sweep":
            manifest = RunManifest(args.config, args.out, mode=args.mode,
                                   seed=args.seed)
            return cmd_sweep(manifest, args.sweep)
        if args.command == "optimize":
            manifest = RunManifest(args.config, args.out, mode=args.mode,
                                   seed=args.seed)
            return cmd_optimize(manifest, args.space, args.budget)
        if args.command == "metrics":
            return cmd_metrics(args.trace, args.config, args.out)
        raise UsageError(f"unknown command {args.command!r}")
    except (ConfigError, TraceFormatError, UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SimulationError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
