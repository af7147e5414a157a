import json

import pytest
import yaml

from coact.harness import (
    CSV_COLUMNS,
    ConfigError,
    MetricsIOError,
    MobilityConfig,
    RadioConfig,
    ScenarioConfig,
    aggregate_records,
    emit_metrics,
    read_metrics,
    run_scenario,
    simulate_scenario,
    sweep,
)

SMALL = ScenarioConfig(n_nodes=4, n_sources=2, runs=3, seed=7)


class TestConfig:
    def test_defaults_validate(self):
        cfg = ScenarioConfig()
        assert cfg.validate() is cfg
        assert cfg.n_nodes == 30 and cfg.n_sources == 4
        assert cfg.kappa == 1e-3 and cfg.delta == 0.5 and cfg.eta == 0.05
        assert (cfg.obs_min, cfg.obs_max) == (5, 20)
        assert (cfg.duty_min, cfg.duty_max) == (0.4, 0.9)
        assert cfg.radio == RadioConfig()

    def test_all_bad_fields_reported_together(self):
        cfg = ScenarioConfig(kappa=2.0, obs_min=1)
        with pytest.raises(ConfigError) as err:
            cfg.validate()
        assert err.value.fields == ["kappa", "obs_min"]
        assert "kappa" in str(err.value) and "obs_min" in str(err.value)

    def test_more_bound_checks(self):
        for kwargs in ({"eta": 0.0}, {"duty_min": 0.0}, {"duty_max": 0.2},
                       {"n_nodes": 0}, {"runs": 0}, {"grid_size": 10},
                       {"join_order": "shuffled"}, {"seed": -1},
                       {"mobility": MobilityConfig(speed_kmh=-5.0)}):
            with pytest.raises(ConfigError):
                ScenarioConfig(**kwargs).validate()

    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError, match="nodes_count"):
            ScenarioConfig.from_dict({"nodes_count": 10})
        with pytest.raises(ConfigError, match="unknown radio"):
            ScenarioConfig.from_dict({"radio": {"power_mw": 100}})
        with pytest.raises(ConfigError, match="unknown mobility"):
            ScenarioConfig.from_dict({"mobility": {"velocity": 10}})

    def test_roundtrip_through_dict(self):
        cfg = ScenarioConfig(n_nodes=7, mobility=MobilityConfig(speed_kmh=10.0))
        assert ScenarioConfig.from_dict(cfg.to_dict()) == cfg
        plain = ScenarioConfig(n_nodes=7)
        assert "mobility" not in plain.to_dict()
        assert ScenarioConfig.from_dict(plain.to_dict()) == plain

    def test_from_file_yaml_and_json(self, tmp_path):
        cfg = ScenarioConfig(n_nodes=9, kappa=0.005,
                             mobility=MobilityConfig(speed_kmh=50.0, dt_s=30.0))
        ypath = tmp_path / "scenario.yaml"
        ypath.write_text(yaml.safe_dump(cfg.to_dict()))
        assert ScenarioConfig.from_file(ypath) == cfg
        jpath = tmp_path / "scenario.json"
        jpath.write_text(json.dumps(cfg.to_dict()))
        assert ScenarioConfig.from_file(jpath) == cfg

    def test_from_file_errors(self, tmp_path):
        with pytest.raises(MetricsIOError, match="cannot read"):
            ScenarioConfig.from_file(tmp_path / "missing.yaml")
        bad = tmp_path / "list.yaml"
        bad.write_text("- 1\n- 2\n")
        with pytest.raises(ConfigError, match="mapping"):
            ScenarioConfig.from_file(bad)


class TestRunScenario:
    def test_deterministic_in_config_and_seed(self):
        a = run_scenario(SMALL, seed=11)
        b = run_scenario(SMALL, seed=11)
        assert a == b
        c = run_scenario(SMALL, seed=12)
        assert c.seed == 12 and c != a

    def test_single_node_network_cannot_cooperate(self):
        cfg = ScenarioConfig(n_nodes=1, n_sources=2, runs=1, seed=3)
        m = run_scenario(cfg)
        assert m.coop_kl_mean == m.noncoop_kl_mean
        assert m.improvement_pct == 0.0
        assert m.n_coalitions == 1 and m.coalition_size_max == 1
        assert m.joins_total == 0

    def test_static_scenario_has_no_epoch_metrics(self):
        m = run_scenario(SMALL, seed=2)
        assert m.epochs == 0
        assert m.joins_per_minute is None

    def test_mobility_scenario_counts_epochs(self):
        cfg = ScenarioConfig(n_nodes=4, n_sources=2, seed=5,
                             mobility=MobilityConfig(speed_kmh=100.0))
        m = run_scenario(cfg)
        # 300 s of motion at 60 s steps
        assert m.epochs == 5
        assert m.joins_per_minute is not None
        assert m.joins_per_minute >= 0.0


class TestSimulateAndSweep:
    def test_replicate_seeds_are_consecutive(self):
        records = simulate_scenario(SMALL)
        assert [r.run for r in records] == [0, 1, 2]
        assert [r.metrics.seed for r in records] == [7, 8, 9]
        assert all(r.axis_value is None for r in records)

    def test_sweep_replaces_the_axis_field(self):
        result = sweep(SMALL, "kappa", [1e-3, 0.5], runs=2)
        assert result.axis == "kappa"
        assert [r.axis_value for r in result.records] == [1e-3, 1e-3, 0.5, 0.5]
        assert [r.metrics.kappa for r in result.records] == [1e-3, 1e-3, 0.5, 0.5]
        # seeds pair across axis values for variance reduction
        assert [r.metrics.seed for r in result.records] == [7, 8, 7, 8]
        assert [a.axis_value for a in result.aggregates] == [1e-3, 0.5]
        assert all(a.n_runs == 2 for a in result.aggregates)

    def test_sweep_n_nodes_changes_network_size(self):
        result = sweep(SMALL, "n_nodes", [2, 3], runs=1)
        assert [r.metrics.n_nodes for r in result.records] == [2, 3]

    def test_sweep_speed_installs_mobility(self):
        result = sweep(SMALL, "speed", [10.0], runs=1)
        assert result.records[0].metrics.epochs == 5

    def test_sweep_argument_errors(self):
        with pytest.raises(ConfigError, match="axis"):
            sweep(SMALL, "delta", [0.1])
        with pytest.raises(ConfigError, match="values"):
            sweep(SMALL, "kappa", [])
        with pytest.raises(ConfigError, match="runs"):
            sweep(SMALL, "kappa", [1e-3], runs=0)
        with pytest.raises(ConfigError):
            sweep(SMALL, "kappa", [7.0], runs=1)  # out-of-range value

    def test_aggregate_means_are_order_invariant(self):
        result = sweep(SMALL, "n_nodes", [2, 3], runs=3)
        shuffled = list(reversed(result.records))
        direct = aggregate_records(result.records)
        reordered = aggregate_records(shuffled)
        by_axis = {a.axis_value: a for a in reordered}
        for agg in direct:
            twin = by_axis[agg.axis_value]
            assert agg.mean == twin.mean
            assert agg.sem == twin.sem

    def test_aggregate_skips_partially_missing_fields(self):
        static = simulate_scenario(SMALL, runs=2)
        aggs = aggregate_records(static)
        assert "joins_per_minute" not in aggs[0].mean
        mobile_cfg = ScenarioConfig(n_nodes=3, n_sources=2, runs=2, seed=5,
                                    mobility=MobilityConfig(speed_kmh=10.0))
        mobile = simulate_scenario(mobile_cfg)
        aggs = aggregate_records(mobile)
        assert "joins_per_minute" in aggs[0].mean


class TestMetricsFiles:
    def test_empty_records_write_exact_header(self, tmp_path):
        path = tmp_path / "empty.csv"
        emit_metrics([], path)
        assert path.read_bytes() == (",".join(CSV_COLUMNS) + "\n").encode()

    def test_rewrite_is_byte_identical(self, tmp_path):
        records = simulate_scenario(SMALL, runs=2)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        emit_metrics(records, p1)
        emit_metrics(records, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_csv_json_round_trip_agree(self, tmp_path):
        records = simulate_scenario(SMALL, runs=2)
        cpath = emit_metrics(records, tmp_path / "m.csv", fmt="csv")
        jpath = emit_metrics(records, tmp_path / "m.json", fmt="json")
        crows = read_metrics(cpath)
        jrows = read_metrics(jpath)
        assert crows == jrows
        assert crows[0]["seed"] == 7
        assert isinstance(crows[0]["joins_total"], int)
        assert crows[0]["axis_value"] is None

    def test_sweep_rows_carry_axis_value(self, tmp_path):
        result = sweep(SMALL, "kappa", [1e-3], runs=1)
        rows = read_metrics(emit_metrics(result.records, tmp_path / "s.csv"))
        assert rows[0]["axis_value"] == 1e-3

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("foo,bar\n1,2\n")
        with pytest.raises(MetricsIOError, match="header"):
            read_metrics(path)

    def test_unwritable_path_raises_io_error(self, tmp_path):
        with pytest.raises(MetricsIOError, match="cannot write"):
            emit_metrics([], tmp_path / "no" / "such" / "dir.csv")
        with pytest.raises(MetricsIOError, match="cannot read"):
            read_metrics(tmp_path / "missing.csv")

    def test_unknown_format_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="format"):
            emit_metrics([], tmp_path / "m.xml", fmt="xml")
