"""Command line entry points: simulate, sweep, stability-check, report."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .figures import render_metric_rows, render_run_figures, render_sweep_figures
from .game import InvariantViolation, is_nash_stable
from .harness import (
    ConfigError,
    MetricsIOError,
    ScenarioConfig,
    aggregate_records,
    emit_metrics,
    form_partition,
    read_metrics,
    simulate_scenario,
    sweep,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INVARIANT = 2
EXIT_IO = 3


def build_parser():
    parser = argparse.ArgumentParser(
        prog="coact",
        description="Cooperative activity-distribution estimation with hedonic coalitions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run replicates of one scenario")
    sim.add_argument("--config", required=True, help="YAML or JSON scenario file")
    sim.add_argument("--seed", type=int, default=None, help="override the base seed")
    sim.add_argument("--out", default="metrics.csv", help="metrics output path")
    sim.add_argument("--format", dest="fmt", choices=["csv", "json"], default="csv")
    sim.add_argument("--figures", action="store_true",
                     help="render figures next to the metrics file")

    sw = sub.add_parser("sweep", help="replicate the scenario along one axis")
    sw.add_argument("--config", required=True)
    sw.add_argument("--axis", required=True, choices=["n_nodes", "kappa", "speed"])
    sw.add_argument("--values", required=True, help="comma-separated axis values")
    sw.add_argument("--runs", type=int, default=None, help="replicates per value")
    sw.add_argument("--out", required=True, help="metrics output path")
    sw.add_argument("--format", dest="fmt", choices=["csv", "json"], default="csv")
    sw.add_argument("--figures", action="store_true",
                    help="render figures next to the metrics file")

    st = sub.add_parser("stability-check",
                        help="form coalitions once and verify Nash stability by enumeration")
    st.add_argument("--config", required=True)
    st.add_argument("--seed", type=int, default=None)

    rep = sub.add_parser("report", help="render figures from an emitted metrics file")
    rep.add_argument("--metrics", required=True, help="CSV or JSON metrics file")
    rep.add_argument("--out-dir", default=None, help="directory for figures")
    rep.add_argument("--axis-label", default="axis value")
    return parser


def _parse_values(text, axis):
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if not parts:
        raise ConfigError("no axis values given", ["values"])
    try:
        values = [float(p) for p in parts]
    except ValueError as exc:
        raise ConfigError(f"bad axis value: {exc}", ["values"]) from exc
    if axis == "n_nodes":
        if any(v != int(v) for v in values):
            raise ConfigError("n_nodes values must be integers", ["values"])
        values = [int(v) for v in values]
    return values


def _print_aggregates(aggregates, stream):
    for agg in aggregates:
        label = "" if agg.axis_value is None else f"axis={agg.axis_value:g} "
        coop = agg.mean.get("coop_kl_mean", float("nan"))
        noncoop = agg.mean.get("noncoop_kl_mean", float("nan"))
        improvement = agg.mean.get("improvement_pct", float("nan"))
        size = agg.mean.get("coalition_size_mean", float("nan"))
        print(
            f"{label}runs={agg.n_runs} coop_kl={coop:.4g} noncoop_kl={noncoop:.4g} "
            f"improvement={improvement:.3g}% size={size:.3g}",
            file=stream,
        )


def _cmd_simulate(args):
    config = ScenarioConfig.from_file(args.config)
    records = simulate_scenario(config, seed=args.seed)
    out = emit_metrics(records, args.out, args.fmt)
    print(f"wrote {len(records)} run(s) to {out}")
    _print_aggregates(aggregate_records(records), sys.stdout)
    if args.figures:
        for path in render_run_figures(records, Path(args.out).with_suffix("")):
            print(f"wrote {path}")
    return EXIT_OK


def _cmd_sweep(args):
    config = ScenarioConfig.from_file(args.config)
    values = _parse_values(args.values, args.axis)
    result = sweep(config, args.axis, values, runs=args.runs)
    out = emit_metrics(result.records, args.out, args.fmt)
    print(f"wrote {len(result.records)} run(s) to {out}")
    _print_aggregates(result.aggregates, sys.stdout)
    if args.figures:
        for path in render_sweep_figures(result, Path(args.out).with_suffix("")):
            print(f"wrote {path}")
    return EXIT_OK


def _cmd_stability_check(args):
    config = ScenarioConfig.from_file(args.config)
    config.validate()
    if config.n_nodes > 8:
        raise ConfigError(
            "stability-check enumerates every deviation and is limited to 8 nodes",
            ["n_nodes"],
        )
    state, formation = form_partition(config, seed=args.seed)
    members = sorted(tuple(sorted(c.members)) for c in formation.partition.coalitions)
    print(f"partition: {members}")
    print(f"joins={formation.joins} scans={formation.scans} "
          f"welfare={formation.welfare_trajectory[-1]:.6g}")
    stable = is_nash_stable(formation.partition, state)
    if not stable:
        print("NOT Nash-stable: some node strictly prefers another coalition",
              file=sys.stderr)
        return EXIT_INVARIANT
    print("Nash-stable: no node prefers any other coalition or the empty set")
    return EXIT_OK


def _cmd_report(args):
    rows = read_metrics(args.metrics)
    metrics_path = Path(args.metrics)
    out_dir = Path(args.out_dir) if args.out_dir else metrics_path.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = out_dir / metrics_path.stem
    try:
        paths = render_metric_rows(rows, stem, axis_label=args.axis_label)
    except ValueError as exc:
        raise MetricsIOError(str(exc)) from exc
    for path in paths:
        print(f"wrote {path}")
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "simulate": _cmd_simulate,
        "sweep": _cmd_sweep,
        "stability-check": _cmd_stability_check,
        "report": _cmd_report,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (MetricsIOError, OSError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
