"""Shipped experiment presets run on reduced grids."""

from dataclasses import replace

import numpy as np
import pytest

from pco_sync.config import ExperimentConfig, GridAxis
from pco_sync.dynamics import integrate
from pco_sync.experiments import desync_census, run_grid

pytestmark = pytest.mark.slow


def _create_reduced(name: str, runs: int, **overrides) -> ExperimentConfig:
    cfg = ExperimentConfig.load(name)
    return replace(cfg, runs=runs, **overrides)


def _column(report, col: int = 0) -> tuple[list[float], list[float]]:
    n_rows, _ = report.shape
    cells = [report.cell(i, col) for i in range(n_rows)]
    assert all(c.converged_fraction == 1.0 for c in cells)
    return [c.mean_sync_time for c in cells], [c.mean_energy for c in cells]


class TestTheorem1Preset:
    """Starts inside (-pi/2, pi/2) with one node on the cue."""

    def test_every_run_synchronizes(self):
        cell = run_grid(_create_reduced("theorem1", runs=3), show_progress=False).cell(0, 0)
        assert cell.converged_fraction == 1.0
        assert cell.guaranteed_runs == 3
        assert cell.guaranteed_unsynchronized == 0


class TestTable1Preset:
    """Cue steepness sweep with one node on the cue."""

    def test_steeper_cue_syncs_sooner_and_cheaper(self):
        cfg = _create_reduced("table1", runs=2, cols=GridAxis("eps_l", (0.2,)))
        report = run_grid(cfg, show_progress=False)
        times, energies = _column(report)
        assert times[0] > times[1] > times[2]
        assert np.argsort(times).tolist() == np.argsort(energies).tolist()
        assert sum(c.guaranteed_unsynchronized for c in report.cells) == 0

    def test_shallow_local_coupling_still_synchronizes(self):
        cfg = _create_reduced("table1", runs=1, rows=GridAxis("eps_g", (0.4,)), cols=GridAxis("eps_l", (1.6,)))
        cell = run_grid(cfg, show_progress=False).cell(0, 0)
        assert cell.converged_fraction == 1.0


class TestTable2Preset:
    """Cue steepness sweep with every node on the cue."""

    def test_steeper_cue_syncs_sooner(self):
        cfg = _create_reduced("table2", runs=2, cols=GridAxis("eps_l", (0.2,)))
        times, energies = _column(run_grid(cfg, show_progress=False))
        assert times[0] > times[1] > times[2]
        assert np.argsort(times).tolist() == np.argsort(energies).tolist()


class TestTable3Preset:
    """Cue gain against local strength."""

    def test_stronger_cue_syncs_sooner(self):
        cfg = _create_reduced("table3", runs=2, cols=GridAxis("l", (0.01,)))
        times, _ = _column(run_grid(cfg, show_progress=False))
        assert times[0] > times[1] > times[2]

    def test_strongest_cell_is_step_converged(self):
        cfg = ExperimentConfig.load("table3")
        scenario = [s for i, j, s in cfg.cells() if (i, j) == (2, 5)][0]
        assert scenario.topology.local_strength == 0.06
        xi0 = np.random.default_rng(0).uniform(-1.5, 1.5, scenario.topology.n)
        step = scenario.step
        runs = [
            integrate(scenario.topology, scenario.qg, scenario.ql, xi0, dt=dt, t_max=2000.0, record_every=50)
            for dt in (step, step / 2)
        ]
        assert all(r.converged for r in runs)
        assert runs[0].t_sync == pytest.approx(runs[1].t_sync, rel=1e-2)


class TestCensusPreset:
    """Whole-circle starts with one node on the cue."""

    def test_every_miss_is_classified(self):
        census = desync_census(_create_reduced("census", runs=4), show_progress=False)
        assert census.total_runs == 4
        diverged = sum(c.failed_count for c in census.report.cells)
        assert census.stalled + census.unsettled + diverged == census.unsynchronized
