"""Figure rendering for sweep and simulate outputs. Files only, Agg backend."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def _axis_pairs(aggregates, name):
    xs, means, sems = [], [], []
    for agg in aggregates:
        if name not in agg.mean:
            continue
        xs.append(agg.axis_value)
        means.append(agg.mean[name])
        sems.append(agg.sem[name])
    return xs, means, sems


def render_sweep_figures(result, out_stem):
    """Render the standard sweep panels next to the metrics file.

    Produces <stem>_kl.png, <stem>_coalitions.png, <stem>_joins.png and
    <stem>_iterations.png; returns the written paths.
    """
    out_stem = Path(out_stem)
    aggregates = result.aggregates
    axis_label = result.axis.replace("_", " ")
    log_x = result.axis == "kappa"
    written = []

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for name, label, marker in (
        ("coop_kl_mean", "cooperative", "o"),
        ("noncoop_kl_mean", "non-cooperative", "s"),
    ):
        xs, means, sems = _axis_pairs(aggregates, name)
        ax.errorbar(xs, means, yerr=sems, marker=marker, capsize=3, label=label)
    if log_x:
        ax.set_xscale("log")
    ax.set_xlabel(axis_label)
    ax.set_ylabel("mean true KL (nats)")
    ax.grid(alpha=0.3)
    ax.legend()
    written.append(_finish(fig, out_stem.with_name(out_stem.name + "_kl.png")))

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for name, label, marker in (
        ("coalition_size_mean", "mean size", "o"),
        ("coalition_size_max", "max size", "^"),
    ):
        xs, means, sems = _axis_pairs(aggregates, name)
        ax.errorbar(xs, means, yerr=sems, marker=marker, capsize=3, label=label)
    if log_x:
        ax.set_xscale("log")
    ax.set_xlabel(axis_label)
    ax.set_ylabel("coalition size")
    ax.grid(alpha=0.3)
    ax.legend()
    written.append(_finish(fig, out_stem.with_name(out_stem.name + "_coalitions.png")))

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    join_field = "joins_per_minute" if any(
        "joins_per_minute" in agg.mean for agg in aggregates
    ) else "joins_per_node_mean"
    xs, means, sems = _axis_pairs(aggregates, join_field)
    ax.errorbar(xs, means, yerr=sems, marker="o", capsize=3, color="tab:green")
    if log_x:
        ax.set_xscale("log")
    ax.set_xlabel(axis_label)
    ax.set_ylabel(join_field.replace("_", " "))
    ax.grid(alpha=0.3)
    written.append(_finish(fig, out_stem.with_name(out_stem.name + "_joins.png")))

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    xs, means, sems = _axis_pairs(aggregates, "iterations")
    ax.errorbar(xs, means, yerr=sems, marker="o", capsize=3, color="tab:purple")
    if log_x:
        ax.set_xscale("log")
    ax.set_xlabel(axis_label)
    ax.set_ylabel("scans to convergence")
    ax.grid(alpha=0.3)
    written.append(_finish(fig, out_stem.with_name(out_stem.name + "_iterations.png")))
    return written


def render_run_figures(records, out_stem):
    """Per-replicate cooperative vs non-cooperative KL for a simulate batch."""
    out_stem = Path(out_stem)
    runs = [r.run for r in records]
    coop = [r.metrics.coop_kl_mean for r in records]
    noncoop = [r.metrics.noncoop_kl_mean for r in records]
    fig, ax = plt.subplots(figsize=(6.5, 4.0))
    ax.plot(runs, noncoop, "s--", label="non-cooperative", alpha=0.8)
    ax.plot(runs, coop, "o-", label="cooperative", alpha=0.8)
    ax.set_xlabel("replicate")
    ax.set_ylabel("mean true KL (nats)")
    ax.grid(alpha=0.3)
    ax.legend()
    return [_finish(fig, out_stem.with_name(out_stem.name + "_kl.png"))]


def render_metric_rows(rows, out_stem, axis_label="axis value"):
    """Re-render figures from a previously emitted metrics file's rows."""
    out_stem = Path(out_stem)
    if not rows:
        raise ValueError("no metric rows to render")
    if all(row["axis_value"] is None for row in rows):
        fake = [_RowRecord(row) for row in rows]
        return render_run_figures(fake, out_stem)
    groups, order = {}, []
    for row in rows:
        key = row["axis_value"]
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(row)
    aggregates = []
    for key in order:
        sub = groups[key]
        mean, sem = {}, {}
        for name in ("coop_kl_mean", "noncoop_kl_mean", "coalition_size_mean",
                     "coalition_size_max", "joins_per_node_mean", "iterations"):
            values = [float(row[name]) for row in sub]
            mu = sum(values) / len(values)
            mean[name] = mu
            if len(values) > 1:
                var = sum((v - mu) ** 2 for v in values) / (len(values) - 1)
                sem[name] = (var / len(values)) ** 0.5
            else:
                sem[name] = 0.0
        aggregates.append(_RowAggregate(key, mean, sem))
    result = _RowSweep(axis=axis_label, aggregates=aggregates)
    return render_sweep_figures(result, out_stem)


class _RowRecord:
    def __init__(self, row):
        self.run = row["run"]
        self.metrics = _RowMetrics(row)


class _RowMetrics:
    def __init__(self, row):
        self.coop_kl_mean = row["coop_kl_mean"]
        self.noncoop_kl_mean = row["noncoop_kl_mean"]


class _RowAggregate:
    def __init__(self, axis_value, mean, sem):
        self.axis_value = axis_value
        self.mean = mean
        self.sem = sem


class _RowSweep:
    def __init__(self, axis, aggregates):
        self.axis = axis
        self.aggregates = aggregates
