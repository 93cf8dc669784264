"""Tests for configuration, presets and scenario/experiment documents."""

import math
from pathlib import Path

import numpy as np
import pytest

from pco_sync.config import (
    Config,
    ConfigError,
    ExperimentConfig,
    ScenarioConfig,
    apply_param,
    list_presets,
    parse_angle,
    resolve_preset,
)
from pco_sync.dynamics import stable_step
from pco_sync.prf import SinePrf, TanhPrf


def _create_scenario_dict(**overrides) -> dict:
    data = {
        "name": "pair",
        "topology": {"n": 2, "edges": [[0, 1]], "g": [0.01, 0.0], "l": 0.01},
        "qg": {"family": "tanh", "epsilon": 0.4},
        "ql": {"family": "sine"},
        "initial": {"uniform": ["-pi/2", "pi/2"], "seed": 3},
        "dt": 0.01,
        "t_max": 100,
    }
    data.update(overrides)
    return data


class TestConfig:
    """Tests for environment configuration."""

    def test_defaults(self, monkeypatch, tmp_path):
        for var in ("PCO_OUTPUT_DIR", "PCO_JOBS", "PCO_GRID_POINTS", "PCO_SYNC_TOL", "PCO_DT"):
            monkeypatch.delenv(var, raising=False)
        config = Config.from_env(tmp_path / "missing.env")
        assert config.output_dir == Path("out")
        assert config.jobs == 1
        assert config.grid_points == 10_000
        assert config.validate() == []

    def test_env_file(self, monkeypatch, tmp_path):
        for var in ("PCO_OUTPUT_DIR", "PCO_JOBS"):
            monkeypatch.delenv(var, raising=False)
        env_file = tmp_path / ".env"
        env_file.write_text("PCO_JOBS=4\nPCO_OUTPUT_DIR=results\n", encoding="utf-8")
        config = Config.from_env(env_file)
        assert config.jobs == 4
        assert config.output_dir == Path("results")
        monkeypatch.delenv("PCO_JOBS")
        monkeypatch.delenv("PCO_OUTPUT_DIR")

    def test_environment_overrides(self, monkeypatch, tmp_path):
        monkeypatch.setenv("PCO_SYNC_TOL", "1e-4")
        monkeypatch.setenv("PCO_DT", "0.005")
        config = Config.from_env(tmp_path / "missing.env")
        assert config.sync_tol == 1e-4
        assert config.dt == 0.005

    def test_validate_reports_errors(self):
        errors = Config(jobs=0, grid_points=10, sync_tol=0.0, dt=-1.0).validate()
        assert len(errors) == 4
        assert any("PCO_JOBS" in e for e in errors)


class TestPresets:
    """Tests for preset discovery."""

    def test_list_presets(self):
        assert "desk18" in list_presets("topologies")
        assert "two_node" in list_presets("scenarios")
        assert {"table1", "table2", "table3", "census"} <= set(list_presets("experiments"))

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            list_presets("widgets")

    def test_missing_preset_lists_available(self):
        with pytest.raises(FileNotFoundError, match="Available topologies"):
            resolve_preset("topologies", "no_such_topology")

    def test_explicit_path(self, tmp_path):
        path = tmp_path / "mine.yaml"
        path.write_text("n: 1\n", encoding="utf-8")
        assert resolve_preset("topologies", path) == path


class TestParseAngle:
    """Tests for angle expressions."""

    def test_numbers(self):
        assert parse_angle(1.5) == 1.5
        assert parse_angle(-2) == -2.0

    def test_pi_expressions(self):
        assert parse_angle("pi") == math.pi
        assert parse_angle("-pi/2") == -math.pi / 2
        assert parse_angle("3*pi/4") == 3 * math.pi / 4
        assert parse_angle("0.5pi") == 0.5 * math.pi

    def test_garbage(self):
        with pytest.raises(ConfigError):
            parse_angle("tau")


class TestScenarioConfig:
    """Tests for scenario documents."""

    def test_from_dict(self):
        scenario = ScenarioConfig.from_dict(_create_scenario_dict())
        assert scenario.name == "pair"
        assert scenario.qg == TanhPrf(0.4)
        assert scenario.ql == SinePrf()
        assert scenario.initial == {"uniform": [-math.pi / 2, math.pi / 2], "seed": 3}

    def test_overrides_apply_to_topology(self):
        scenario = ScenarioConfig.from_dict(_create_scenario_dict(g=0.02, l=0.03, T=2.0))
        assert scenario.topology.global_gains.tolist() == [0.02, 0.02]
        assert scenario.topology.local_strength == 0.03
        assert scenario.topology.period == 2.0

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="Unknown scenario keys"):
            ScenarioConfig.from_dict(_create_scenario_dict(solver="rk45"))

    def test_missing_prf(self):
        data = _create_scenario_dict()
        del data["ql"]
        with pytest.raises(ConfigError):
            ScenarioConfig.from_dict(data)

    def test_bad_topology(self):
        with pytest.raises(ConfigError, match="Invalid topology"):
            ScenarioConfig.from_dict(_create_scenario_dict(topology={"n": 2, "edges": [[0, 0]]}))

    def test_bad_simulator(self):
        with pytest.raises(ConfigError):
            ScenarioConfig.from_dict(_create_scenario_dict(simulator="spice"))

    def test_phase_count_checked(self):
        with pytest.raises(ConfigError):
            ScenarioConfig.from_dict(_create_scenario_dict(initial={"phases": [0.1]}))

    def test_uniform_range_checked(self):
        with pytest.raises(ConfigError):
            ScenarioConfig.from_dict(_create_scenario_dict(initial={"uniform": [1.0, -1.0]}))

    def test_large_step_warns(self, caplog):
        ScenarioConfig.from_dict(_create_scenario_dict(dt=0.5))
        assert "exceeds T/100" in caplog.text

    def test_auto_step(self, caplog):
        scenario = ScenarioConfig.from_dict(_create_scenario_dict(dt="auto"))
        assert scenario.dt is None
        assert scenario.step == stable_step(scenario.topology, scenario.qg, scenario.ql)
        assert scenario.to_dict()["dt"] == "auto"
        assert ScenarioConfig.from_dict(scenario.to_dict()).dt is None
        assert "exceeds T/100" not in caplog.text

    def test_fixed_step_is_used_as_given(self):
        assert ScenarioConfig.from_dict(_create_scenario_dict(dt=0.02)).step == 0.02

    def test_desk_preset_step_is_stable(self):
        scenario = ScenarioConfig.load("desk18")
        assert scenario.dt is None
        assert 0 < scenario.step <= 0.25 * scenario.topology.period

    def test_bound_horizon_flag(self):
        assert ScenarioConfig.from_dict(_create_scenario_dict(t_max_from_bound=True)).t_max_from_bound
        assert not ScenarioConfig.from_dict(_create_scenario_dict()).t_max_from_bound
        with pytest.raises(ConfigError, match="t_max_from_bound"):
            ScenarioConfig.from_dict(_create_scenario_dict(t_max_from_bound="yes"))

    def test_malformed_values_are_config_errors(self):
        for overrides in (
            {"initial": {"uniform": 5}},
            {"initial": {"phases": 0.3}},
            {"energy": [1, 2]},
            {"dt": [0.01]},
            {"record_every": [1]},
        ):
            with pytest.raises(ConfigError):
                ScenarioConfig.from_dict(_create_scenario_dict(**overrides))

    def test_load_preset(self):
        scenario = ScenarioConfig.load("two_node")
        assert scenario.topology.n == 2
        assert scenario.draw_initial().tolist() == [0.5, -0.5]

    def test_load_desk_preset_by_reference(self):
        scenario = ScenarioConfig.load("desk18")
        assert scenario.topology.n == 18
        assert scenario.topology.attached == [0]

    def test_round_trip(self):
        scenario = ScenarioConfig.from_dict(_create_scenario_dict())
        again = ScenarioConfig.from_dict(scenario.to_dict())
        assert again.to_dict() == scenario.to_dict()
        assert np.array_equal(again.draw_initial(), scenario.draw_initial())

    def test_draw_is_seeded(self):
        scenario = ScenarioConfig.from_dict(_create_scenario_dict())
        assert np.array_equal(scenario.draw_initial(), scenario.draw_initial())
        assert not np.array_equal(scenario.draw_initial(), scenario.with_seed(4).draw_initial())
        xi = scenario.draw_initial()
        assert np.all(np.abs(xi) <= math.pi / 2)

    def test_per_run_streams(self):
        scenario = ScenarioConfig.from_dict(_create_scenario_dict())
        other = apply_param(scenario, "l", 0.02)
        assert np.array_equal(scenario.draw_initial(5, 2024), other.draw_initial(5, 2024))
        assert not np.array_equal(scenario.draw_initial(5, 2024), scenario.draw_initial(6, 2024))


class TestExperimentConfig:
    """Tests for grid experiments."""

    def test_load_table1(self):
        cfg = ExperimentConfig.load("table1")
        assert cfg.runs == 100
        assert cfg.seed == 2024
        assert cfg.row_values == (1.6, 0.8, 0.4)
        assert len(list(cfg.cells())) == 18

    def test_cells_apply_parameters(self):
        cfg = ExperimentConfig.load("table1")
        cells = list(cfg.cells())
        i, j, scenario = cells[7]
        assert (i, j) == (1, 1)
        assert scenario.qg == TanhPrf(0.8)
        assert scenario.ql == TanhPrf(0.1)

    def test_gain_axis_touches_attached_nodes_only(self):
        scenario = ScenarioConfig.from_dict(_create_scenario_dict())
        assert apply_param(scenario, "g", 0.05).topology.global_gains.tolist() == [0.05, 0.0]

    def test_table3_grid(self):
        cfg = ExperimentConfig.load("table3")
        cells = list(cfg.cells())
        assert len(cells) == 18
        _, _, last = cells[-1]
        assert np.all(last.topology.global_gains == 0.03)
        assert last.topology.local_strength == 0.06

    def test_gain_axis_without_attached_nodes(self):
        scenario = ScenarioConfig.from_dict(_create_scenario_dict(g=0.0))
        assert apply_param(scenario, "g", 0.05).topology.global_gains.tolist() == [0.05, 0.05]

    def test_same_param_twice(self):
        data = _create_scenario_dict(
            rows={"param": "g", "values": [0.01]},
            cols={"param": "g", "values": [0.02]},
        )
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(data)

    def test_unknown_grid_param(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(_create_scenario_dict(rows={"param": "T", "values": [1.0]}))

    def test_malformed_experiment_values_are_config_errors(self):
        for overrides in ({"runs": [3]}, {"rows": {"param": "g", "values": 0.01}}, {"seed": {"a": 1}}):
            with pytest.raises(ConfigError):
                ExperimentConfig.from_dict(_create_scenario_dict(**overrides))

    def test_presets_use_auto_step(self):
        for name in ("table1", "table2", "table3", "theorem1", "census"):
            assert ExperimentConfig.load(name).scenario.dt is None
        assert ExperimentConfig.load("table1").scenario.t_max_from_bound
        assert ExperimentConfig.load("theorem1").scenario.t_max_from_bound

    def test_no_axes_is_one_cell(self):
        cfg = ExperimentConfig.from_dict(_create_scenario_dict(runs=3))
        assert [(i, j) for i, j, _ in cfg.cells()] == [(0, 0)]
