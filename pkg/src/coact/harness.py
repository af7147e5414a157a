"""Scenario configuration, orchestration, sweeps, and metrics emission."""

from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import yaml

from .bayes import PriorBundle, dp_posterior, fusion_weights
from .game import (
    GameParams,
    NetworkState,
    run_formation,
    singleton_partition,
)
from .seeds import derive_seed, spawn_rng
from .stats import MIN_KS_SAMPLES, ks_two_sample_test
from .world import (
    NodeSpec,
    RadioParams,
    SourceSpec,
    build_ground_truth,
    db_to_linear,
    dbm_to_watts,
    observations_from_truth,
    step_mobility,
    true_kl,
)

CSV_COLUMNS = [
    "axis_value", "run", "seed", "n_nodes", "n_sources", "kappa",
    "coop_kl_mean", "noncoop_kl_mean", "improvement_pct", "n_coalitions",
    "coalition_size_mean", "coalition_size_max", "joins_total",
    "joins_per_node_mean", "iterations", "welfare_final",
]

SWEEP_AXES = ("n_nodes", "kappa", "speed")


class ConfigError(Exception):
    """Invalid scenario configuration; `fields` names the offending entries."""

    def __init__(self, message, bad_fields=()):
        self.fields = list(bad_fields)
        if self.fields:
            message = f"{message}: {', '.join(self.fields)}"
        super().__init__(message)


class MetricsIOError(Exception):
    """Reading or writing a metrics file failed."""


@dataclass(frozen=True)
class RadioConfig:
    """Propagation settings in field units (dBm / dB); converted on use."""

    power_w: float = 0.1
    noise_dbm: float = -90.0
    pathloss_exp: float = 3.0
    snr_threshold_db: float = 10.0
    slots: int = 10

    def to_params(self):
        return RadioParams(
            noise=dbm_to_watts(self.noise_dbm),
            pathloss_exp=self.pathloss_exp,
            snr_threshold=db_to_linear(self.snr_threshold_db),
            slots=self.slots,
        )


@dataclass(frozen=True)
class MobilityConfig:
    speed_kmh: float
    dt_s: float = 60.0
    duration_s: float = 300.0

    @property
    def speed_m_s(self):
        return self.speed_kmh / 3.6


@dataclass(frozen=True)
class ScenarioConfig:
    """Full description of one experiment.

    Nodes and sources are dropped uniformly into a square arena; observation
    counts are drawn per node-source pair from [obs_min, obs_max]; duty
    cycles per source from [duty_min, duty_max]. `runs` controls how many
    replicates `simulate` and `sweep` execute.
    """

    n_nodes: int = 30
    n_sources: int = 4
    arena_m: float = 2000.0
    kappa: float = 1e-3
    delta: float = 0.5
    eta: float = 0.05
    obs_min: int = 5
    obs_max: int = 20
    duty_min: float = 0.4
    duty_max: float = 0.9
    grid_size: int = 512
    n_check: int = 100
    seed: int = 1
    join_order: str = "round_robin"
    best_improvement: bool = False
    runs: int = 50
    radio: RadioConfig = field(default_factory=RadioConfig)
    mobility: MobilityConfig | None = None

    def validate(self):
        bad = []
        if not (isinstance(self.n_nodes, int) and self.n_nodes >= 1):
            bad.append("n_nodes")
        if not (isinstance(self.n_sources, int) and self.n_sources >= 1):
            bad.append("n_sources")
        if not self.arena_m > 0.0:
            bad.append("arena_m")
        if not (0.0 < self.kappa <= 1.0):
            bad.append("kappa")
        if not (0.0 < self.delta <= 1.0):
            bad.append("delta")
        if not (0.0 < self.eta < 1.0):
            bad.append("eta")
        if not (isinstance(self.obs_min, int) and self.obs_min >= 2):
            bad.append("obs_min")
        if not (isinstance(self.obs_max, int) and self.obs_max >= self.obs_min):
            bad.append("obs_max")
        if not (0.0 < self.duty_min <= 1.0):
            bad.append("duty_min")
        if not (self.duty_min <= self.duty_max <= 1.0):
            bad.append("duty_max")
        if not (isinstance(self.grid_size, int) and self.grid_size >= 64):
            bad.append("grid_size")
        if not (isinstance(self.n_check, int) and self.n_check >= MIN_KS_SAMPLES):
            bad.append("n_check")
        if not (isinstance(self.seed, int) and 0 <= self.seed < 2 ** 63):
            bad.append("seed")
        if self.join_order not in ("round_robin", "random"):
            bad.append("join_order")
        if not (isinstance(self.runs, int) and self.runs >= 1):
            bad.append("runs")
        if not (self.radio.power_w > 0.0 and self.radio.pathloss_exp > 0.0
                and self.radio.slots >= 1):
            bad.append("radio")
        if self.mobility is not None and not (
            self.mobility.speed_kmh >= 0.0
            and self.mobility.dt_s > 0.0
            and self.mobility.duration_s > 0.0
        ):
            bad.append("mobility")
        if bad:
            raise ConfigError("invalid configuration", bad)
        return self

    def to_dict(self):
        data = asdict(self)
        if self.mobility is None:
            data.pop("mobility")
        return data

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError("unknown configuration keys", unknown)
        if "radio" in data and data["radio"] is not None:
            radio_data = dict(data["radio"])
            radio_known = {f.name for f in fields(RadioConfig)}
            bad = sorted(set(radio_data) - radio_known)
            if bad:
                raise ConfigError("unknown radio keys", bad)
            data["radio"] = RadioConfig(**radio_data)
        if data.get("mobility") is not None:
            mob_data = dict(data["mobility"])
            mob_known = {f.name for f in fields(MobilityConfig)}
            bad = sorted(set(mob_data) - mob_known)
            if bad:
                raise ConfigError("unknown mobility keys", bad)
            data["mobility"] = MobilityConfig(**mob_data)
        return cls(**data)

    @classmethod
    def from_file(cls, path):
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise MetricsIOError(f"cannot read config {path}: {exc}") from exc
        if path.suffix.lower() == ".json":
            data = json.loads(text)
        else:
            data = yaml.safe_load(text)
        if not isinstance(data, dict):
            raise ConfigError(f"config file {path} must hold a mapping")
        return cls.from_dict(data)


@dataclass(frozen=True)
class RunMetrics:
    """Per-replicate outcomes of one scenario run."""

    seed: int
    n_nodes: int
    n_sources: int
    kappa: float
    coop_kl_mean: float
    noncoop_kl_mean: float
    improvement_pct: float
    n_coalitions: int
    coalition_size_mean: float
    coalition_size_max: int
    joins_total: int
    joins_per_node_mean: float
    joins_per_node_max: int
    iterations: int
    welfare_final: float
    welfare_trajectory: tuple[float, ...]
    epochs: int = 0
    joins_per_minute: float | None = None


@dataclass(frozen=True)
class RunRecord:
    axis_value: float | None
    run: int
    metrics: RunMetrics


@dataclass(frozen=True)
class AxisAggregate:
    axis_value: float | None
    n_runs: int
    mean: dict[str, float]
    sem: dict[str, float]


@dataclass(frozen=True)
class SweepResult:
    axis: str
    records: list[RunRecord]
    aggregates: list[AxisAggregate]


def _mean(values):
    return math.fsum(values) / len(values)


def _sem(values):
    n = len(values)
    if n < 2:
        return 0.0
    mu = _mean(values)
    var = math.fsum((v - mu) ** 2 for v in values) / (n - 1)
    return math.sqrt(var / n)


def _deploy(config, scenario_seed):
    rng = spawn_rng(scenario_seed, "deploy")
    node_xy = rng.uniform(0.0, config.arena_m, size=(config.n_nodes, 2))
    source_xy = rng.uniform(0.0, config.arena_m, size=(config.n_sources, 2))
    duties = rng.uniform(config.duty_min, config.duty_max, size=config.n_sources)
    counts = rng.integers(config.obs_min, config.obs_max + 1,
                          size=(config.n_nodes, config.n_sources))
    speed = config.mobility.speed_m_s if config.mobility is not None else 0.0
    nodes = [NodeSpec(i, (float(x), float(y))) for i, (x, y) in enumerate(node_xy)]
    sources = [
        SourceSpec(k, (float(x), float(y)), config.radio.power_w, float(duties[k]), speed)
        for k, (x, y) in enumerate(source_xy)
    ]
    return nodes, sources, counts


def _draw_epoch_observations(config, scenario_seed, epoch, truth, counts):
    observations = {}
    for i in range(config.n_nodes):
        for k in range(config.n_sources):
            rng = spawn_rng(scenario_seed, "obs", epoch, i, k)
            beta, gamma = truth.betas[(i, k)]
            observations[(i, k)] = observations_from_truth(
                beta, gamma, int(counts[i, k]), config.delta, rng,
            )
    return observations


def _build_state(config, scenario_seed, epoch, observations):
    params = GameParams(kappa=config.kappa, eta=config.eta,
                        n_check=config.n_check, grid_size=config.grid_size)
    return NetworkState.build(observations, params,
                              derive_seed(scenario_seed, "state", epoch))


def _evaluate(state, partition, truth):
    """True-KL pairs (cooperative, non-cooperative) for every node-source pair."""
    coop, noncoop = [], []
    for i in state.nodes:
        coalition = partition.coalition_of(i)
        for k in state.sources:
            own = state.estimates[(i, k)]
            truth_pair = truth.betas[(i, k)]
            noncoop.append(true_kl(own, truth_pair))
            partners = state.validated_partners(i, k, coalition.members)
            if partners:
                weights = fusion_weights(
                    state.counts[(i, k)],
                    [(l, state.counts[(l, k)]) for l in partners],
                )
                bundles = [
                    PriorBundle(l, state.counts[(l, k)], state.estimates[(l, k)])
                    for l in partners
                ]
                posterior = dp_posterior(own, bundles, weights)
                coop.append(true_kl(posterior, truth_pair))
            else:
                coop.append(noncoop[-1])
    return coop, noncoop


def _detect_changes(old_observations, new_observations, eta):
    changed = set()
    for key, old in old_observations.items():
        new = new_observations[key]
        if old.working.size < MIN_KS_SAMPLES or new.working.size < MIN_KS_SAMPLES:
            continue  # not testable at this count; treat as unchanged
        if not ks_two_sample_test(old.working, new.working, eta).accepted:
            changed.add(key[0])
    return changed


def run_scenario(config, seed=None):
    """Run one scenario replicate and collect RunMetrics.

    Deterministic in (config, seed): deployment, observation draws,
    validation draws, and join order all come from seeds derived off the
    scenario seed with purpose tags.
    """
    config.validate()
    scenario_seed = config.seed if seed is None else int(seed)
    radio = config.radio.to_params()
    nodes, sources, counts = _deploy(config, scenario_seed)

    truth = build_ground_truth(nodes, sources, radio)
    observations = _draw_epoch_observations(config, scenario_seed, 0, truth, counts)
    state = _build_state(config, scenario_seed, 0, observations)

    formation = run_formation(
        singleton_partition(state.nodes), state,
        order=config.join_order, best_improvement=config.best_improvement,
    )
    partition = formation.partition
    welfare_final = formation.welfare_trajectory[-1]
    join_counter = Counter(e.node for e in formation.events)

    coop_values, noncoop_values = _evaluate(state, partition, truth)

    epochs = 0
    mobility_joins = 0
    if config.mobility is not None:
        epochs = int(config.mobility.duration_s // config.mobility.dt_s)
        for epoch in range(1, epochs + 1):
            move_rng = spawn_rng(scenario_seed, "mobility", epoch)
            sources = step_mobility(sources, config.mobility.dt_s, move_rng, config.arena_m)
            truth = build_ground_truth(nodes, sources, radio)
            fresh = _draw_epoch_observations(config, scenario_seed, epoch, truth, counts)
            changed = _detect_changes(state.observations, fresh, config.eta)
            state = _build_state(config, scenario_seed, epoch, fresh)
            if changed:
                reformed = run_formation(
                    partition, state,
                    order=config.join_order,
                    best_improvement=config.best_improvement,
                )
                partition = reformed.partition
                welfare_final = reformed.welfare_trajectory[-1]
                mobility_joins += reformed.joins
                join_counter.update(e.node for e in reformed.events)
            epoch_coop, epoch_noncoop = _evaluate(state, partition, truth)
            coop_values.extend(epoch_coop)
            noncoop_values.extend(epoch_noncoop)

    coop_mean = _mean(coop_values)
    noncoop_mean = _mean(noncoop_values)
    improvement = 100.0 * (noncoop_mean - coop_mean) / noncoop_mean if noncoop_mean > 0 else 0.0
    sizes = partition.sizes()
    joins_total = formation.joins + mobility_joins
    joins_per_minute = None
    if config.mobility is not None:
        joins_per_minute = mobility_joins / (config.mobility.duration_s / 60.0)
    return RunMetrics(
        seed=scenario_seed,
        n_nodes=config.n_nodes,
        n_sources=config.n_sources,
        kappa=config.kappa,
        coop_kl_mean=coop_mean,
        noncoop_kl_mean=noncoop_mean,
        improvement_pct=improvement,
        n_coalitions=len(sizes),
        coalition_size_mean=config.n_nodes / len(sizes),
        coalition_size_max=max(sizes),
        joins_total=joins_total,
        joins_per_node_mean=joins_total / config.n_nodes,
        joins_per_node_max=max(join_counter.values()) if join_counter else 0,
        iterations=formation.scans,
        welfare_final=welfare_final,
        welfare_trajectory=formation.welfare_trajectory,
        epochs=epochs,
        joins_per_minute=joins_per_minute,
    )


def form_partition(config, seed=None):
    """Deploy, observe, and run coalition formation; skip evaluation.

    Returns the agent-side state and the FormationResult, for callers that
    need the stable partition itself rather than run metrics.
    """
    config.validate()
    scenario_seed = config.seed if seed is None else int(seed)
    radio = config.radio.to_params()
    nodes, sources, counts = _deploy(config, scenario_seed)
    truth = build_ground_truth(nodes, sources, radio)
    observations = _draw_epoch_observations(config, scenario_seed, 0, truth, counts)
    state = _build_state(config, scenario_seed, 0, observations)
    formation = run_formation(
        singleton_partition(state.nodes), state,
        order=config.join_order, best_improvement=config.best_improvement,
    )
    return state, formation


def simulate_scenario(config, runs=None, seed=None):
    """Run `runs` replicates with seeds base, base+1, ... and collect records."""
    config.validate()
    base = config.seed if seed is None else int(seed)
    n_runs = config.runs if runs is None else int(runs)
    records = []
    for r in range(n_runs):
        metrics = run_scenario(config, seed=base + r)
        records.append(RunRecord(axis_value=None, run=r, metrics=metrics))
    return records


def _config_for_axis_value(config, axis, value):
    if axis == "n_nodes":
        return replace(config, n_nodes=int(value))
    if axis == "kappa":
        return replace(config, kappa=float(value))
    if axis == "speed":
        mobility = config.mobility if config.mobility is not None else MobilityConfig(speed_kmh=0.0)
        return replace(config, mobility=replace(mobility, speed_kmh=float(value)))
    raise ConfigError(f"unknown sweep axis {axis!r}", ["axis"])


AGGREGATE_FIELDS = [
    "coop_kl_mean", "noncoop_kl_mean", "improvement_pct", "n_coalitions",
    "coalition_size_mean", "coalition_size_max", "joins_total",
    "joins_per_node_mean", "iterations", "welfare_final", "joins_per_minute",
]


def aggregate_records(records):
    """Mean and standard error of every numeric metric, grouped by axis value."""
    groups = {}
    order = []
    for record in records:
        if record.axis_value not in groups:
            groups[record.axis_value] = []
            order.append(record.axis_value)
        groups[record.axis_value].append(record.metrics)
    aggregates = []
    for axis_value in order:
        metrics = groups[axis_value]
        mean, sem = {}, {}
        for name in AGGREGATE_FIELDS:
            values = [getattr(m, name) for m in metrics]
            if any(v is None for v in values):
                continue
            values = [float(v) for v in values]
            mean[name] = _mean(values)
            sem[name] = _sem(values)
        aggregates.append(AxisAggregate(
            axis_value=axis_value, n_runs=len(metrics), mean=mean, sem=sem,
        ))
    return aggregates


def sweep(config, axis, values, runs=None):
    """Replicate the scenario at every axis value; seeds pair across values."""
    config.validate()
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}", ["axis"])
    if not values:
        raise ConfigError("sweep needs at least one axis value", ["values"])
    n_runs = config.runs if runs is None else int(runs)
    if n_runs < 1:
        raise ConfigError("sweep needs at least one run", ["runs"])
    records = []
    for value in values:
        cfg = _config_for_axis_value(config, axis, value)
        cfg.validate()
        for r in range(n_runs):
            metrics = run_scenario(cfg, seed=config.seed + r)
            records.append(RunRecord(axis_value=float(value), run=r, metrics=metrics))
    return SweepResult(axis=axis, records=records, aggregates=aggregate_records(records))


def _fmt6(value):
    return format(float(value), ".6g")


def _record_row(record):
    m = record.metrics
    return [
        "" if record.axis_value is None else _fmt6(record.axis_value),
        str(record.run),
        str(m.seed),
        str(m.n_nodes),
        str(m.n_sources),
        _fmt6(m.kappa),
        _fmt6(m.coop_kl_mean),
        _fmt6(m.noncoop_kl_mean),
        _fmt6(m.improvement_pct),
        str(m.n_coalitions),
        _fmt6(m.coalition_size_mean),
        str(m.coalition_size_max),
        str(m.joins_total),
        _fmt6(m.joins_per_node_mean),
        str(m.iterations),
        _fmt6(m.welfare_final),
    ]


def _record_json(record):
    m = record.metrics
    out = {}
    for column, cell in zip(CSV_COLUMNS, _record_row(record)):
        if column == "axis_value" and cell == "":
            out[column] = None
        elif column in ("run", "seed", "n_nodes", "n_sources", "n_coalitions",
                        "coalition_size_max", "joins_total", "iterations"):
            out[column] = int(cell)
        else:
            out[column] = float(cell)
    return out


def emit_metrics(records, path, fmt="csv"):
    """Write records to `path` as CSV (fixed header) or JSON.

    Values are rendered at 6 significant digits; identical records always
    produce byte-identical files.
    """
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown metrics format {fmt!r}")
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            if fmt == "csv":
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(CSV_COLUMNS)
                for record in records:
                    writer.writerow(_record_row(record))
            else:
                json.dump([_record_json(r) for r in records], fh, indent=2)
                fh.write("\n")
    except OSError as exc:
        raise MetricsIOError(f"cannot write metrics to {path}: {exc}") from exc
    return path


def read_metrics(path):
    """Load an emitted metrics file back into a list of plain dicts."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise MetricsIOError(f"cannot read metrics from {path}: {exc}") from exc
    if path.suffix.lower() == ".json":
        rows = json.loads(text)
    else:
        reader = csv.DictReader(text.splitlines())
        if reader.fieldnames != CSV_COLUMNS:
            raise MetricsIOError(f"unexpected metrics header in {path}")
        rows = []
        for raw in reader:
            row = {}
            for column, cell in raw.items():
                if column == "axis_value":
                    row[column] = None if cell == "" else float(cell)
                elif column in ("run", "seed", "n_nodes", "n_sources", "n_coalitions",
                                "coalition_size_max", "joins_total", "iterations"):
                    row[column] = int(cell)
                else:
                    row[column] = float(cell)
            rows.append(row)
    return rows
