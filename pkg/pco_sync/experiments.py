"""Monte Carlo harness: repeated seeded runs over a parameter grid.

Run r of every cell draws its initial deviations from
SeedSequence([master_seed, r]), so all cells see the same initial states
and the reduction does not depend on worker completion order.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from multiprocessing import Pool
from typing import Any, Optional

import numpy as np
from tqdm import tqdm

from .analysis import sync_time_bound
from .config import ExperimentConfig, ScenarioConfig
from .dynamics import (
    STALLED,
    SYNCHRONIZED,
    UNSETTLED,
    InsufficientDataError,
    IntegrationDivergedError,
    classify_outcome,
    fit_rate,
    integrate,
)
from .pulse_sim import EnergyConfig, PulseNetwork, run_pulse_sim
from .topology import Topology

logger = logging.getLogger(__name__)

DIVERGED = "diverged"

# Multiple of the guaranteed sync time simulated when t_max_from_bound is set
HORIZON_FACTOR = 2.0

__all__ = [
    "CellSummary",
    "DesyncCensus",
    "ExperimentConfig",
    "ExperimentReport",
    "RunRecord",
    "RunTask",
    "desync_census",
    "energy_from_sync_time",
    "execute_run",
    "run_grid",
    "run_horizon",
    "run_scenario",
]


def energy_from_sync_time(topo: Topology, elapsed: float, energy_cfg: EnergyConfig) -> float:
    """Product-form energy for the averaged model.

    Every node is charged one pulse per cue period plus idle power, so energy
    is an increasing linear function of elapsed time.
    """
    return energy_cfg.energy(topo.n * elapsed / topo.period, elapsed, topo.n)


@dataclass(frozen=True)
class RunTask:
    """One Monte Carlo run of one grid cell."""

    row: int
    col: int
    run: int
    scenario: ScenarioConfig
    master_seed: int


@dataclass
class RunRecord:
    """Result of a single run."""

    row: int
    col: int
    run: int
    converged: bool
    t_sync: Optional[float]
    energy: Optional[float]
    alpha_hat: Optional[float]
    elapsed: float
    status: str = SYNCHRONIZED
    guaranteed: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "row": self.row,
            "col": self.col,
            "run": self.run,
            "status": self.status,
            "guaranteed": self.guaranteed,
            "converged": self.converged,
            "t_sync": self.t_sync,
            "energy": self.energy,
            "alpha_hat": self.alpha_hat,
            "elapsed": self.elapsed,
        }


def run_horizon(scenario: ScenarioConfig, xi0: np.ndarray) -> tuple[float, bool]:
    """Simulated time for one run, and whether alpha1 guarantees its synchronization.

    Only averaged-model runs carry the guarantee. With t_max_from_bound a
    guaranteed run gets HORIZON_FACTOR times its sync time bound plus one
    period to hold synchrony, whenever that exceeds t_max.
    """
    if scenario.simulator != "ode":
        return scenario.t_max, False
    bound = sync_time_bound(scenario.topology, scenario.qg, scenario.ql, xi0, scenario.sync_tol)
    if bound is None:
        return scenario.t_max, False
    if not scenario.t_max_from_bound:
        return scenario.t_max, True
    return max(scenario.t_max, HORIZON_FACTOR * bound + scenario.topology.period), True


def run_scenario(scenario: ScenarioConfig, xi0: np.ndarray) -> dict[str, Any]:
    """Simulate one scenario from xi0 with its configured simulator.

    Returns:
        Dict with converged, t_sync, energy, elapsed, alpha_hat, status,
        guaranteed, t_max and the trajectory (Trajectory for both simulators)
    """
    topo = scenario.topology
    t_max, guaranteed = run_horizon(scenario, xi0)
    if scenario.simulator == "pulse":
        net = PulseNetwork.from_deviations(topo, scenario.qg, scenario.ql, xi0, scenario.energy)
        result = run_pulse_sim(net, t_max, scenario.sync_tol)
        trajectory = result.to_trajectory()
        energy = result.energy
        elapsed = result.elapsed
    else:
        trajectory = integrate(
            topo,
            scenario.qg,
            scenario.ql,
            xi0,
            dt=scenario.step,
            t_max=t_max,
            sync_tol=scenario.sync_tol,
            record_every=scenario.record_every,
        )
        elapsed = trajectory.duration
        spent = trajectory.t_sync if trajectory.converged else elapsed
        energy = energy_from_sync_time(topo, spent, scenario.energy)

    t_sync = trajectory.t_sync if trajectory.converged else None
    window_end = t_sync if t_sync else trajectory.duration
    try:
        alpha_hat = fit_rate(trajectory, window=(0.0, window_end)).alpha_hat
    except InsufficientDataError:
        alpha_hat = None

    return {
        "converged": trajectory.converged,
        "t_sync": t_sync,
        "energy": energy,
        "elapsed": elapsed,
        "alpha_hat": alpha_hat,
        "status": classify_outcome(topo, scenario.qg, scenario.ql, trajectory, scenario.sync_tol),
        "guaranteed": guaranteed,
        "t_max": t_max,
        "trajectory": trajectory,
    }


def execute_run(task: RunTask) -> RunRecord:
    """Run one task; numerical divergence is recorded, not raised."""
    scenario = task.scenario
    xi0 = scenario.draw_initial(run_index=task.run, master_seed=task.master_seed)
    try:
        outcome = run_scenario(scenario, xi0)
    except IntegrationDivergedError as e:
        logger.warning(f"Cell ({task.row}, {task.col}) run {task.run} diverged: {e}")
        return RunRecord(
            row=task.row,
            col=task.col,
            run=task.run,
            converged=False,
            t_sync=None,
            energy=None,
            alpha_hat=None,
            elapsed=math.nan,
            status=DIVERGED,
        )
    if outcome["guaranteed"] and not outcome["converged"]:
        logger.debug(
            f"Cell ({task.row}, {task.col}) run {task.run} is guaranteed to synchronize "
            f"but was still {outcome['status']} at t={outcome['elapsed']:.6g}"
        )
    return RunRecord(
        row=task.row,
        col=task.col,
        run=task.run,
        converged=outcome["converged"],
        t_sync=outcome["t_sync"],
        energy=outcome["energy"],
        alpha_hat=outcome["alpha_hat"],
        elapsed=outcome["elapsed"],
        status=outcome["status"],
        guaranteed=outcome["guaranteed"],
    )


def _mean(values: list[float]) -> Optional[float]:
    return float(np.mean(values)) if values else None


@dataclass
class CellSummary:
    """Aggregates for one grid cell; means are over converged runs only."""

    row: int
    col: int
    row_value: Optional[float]
    col_value: Optional[float]
    runs: int
    converged_count: int
    failed_count: int
    mean_sync_time: Optional[float]
    std_sync_time: Optional[float]
    mean_energy: Optional[float]
    mean_rate: Optional[float]
    stalled_count: int = 0
    unsettled_count: int = 0
    guaranteed_runs: int = 0
    guaranteed_unsynchronized: int = 0

    @property
    def converged_fraction(self) -> float:
        return self.converged_count / self.runs if self.runs else 0.0

    @classmethod
    def from_records(
        cls,
        row: int,
        col: int,
        row_value: Optional[float],
        col_value: Optional[float],
        records: list[RunRecord],
    ) -> "CellSummary":
        converged = [r for r in records if r.converged]
        times = [r.t_sync for r in converged]
        rates = [r.alpha_hat for r in converged if r.alpha_hat is not None]
        return cls(
            row=row,
            col=col,
            row_value=row_value,
            col_value=col_value,
            runs=len(records),
            converged_count=len(converged),
            failed_count=sum(1 for r in records if r.status == DIVERGED),
            mean_sync_time=_mean(times),
            std_sync_time=float(np.std(times)) if times else None,
            mean_energy=_mean([r.energy for r in converged]),
            mean_rate=_mean(rates),
            stalled_count=sum(1 for r in records if r.status == STALLED),
            unsettled_count=sum(1 for r in records if r.status == UNSETTLED),
            guaranteed_runs=sum(1 for r in records if r.guaranteed),
            guaranteed_unsynchronized=sum(1 for r in records if r.guaranteed and not r.converged),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "row": self.row,
            "col": self.col,
            "row_value": self.row_value,
            "col_value": self.col_value,
            "runs": self.runs,
            "converged_count": self.converged_count,
            "converged_fraction": self.converged_fraction,
            "failed_count": self.failed_count,
            "mean_sync_time": self.mean_sync_time,
            "std_sync_time": self.std_sync_time,
            "mean_energy": self.mean_energy,
            "mean_rate": self.mean_rate,
            "stalled_count": self.stalled_count,
            "unsettled_count": self.unsettled_count,
            "guaranteed_runs": self.guaranteed_runs,
            "guaranteed_unsynchronized": self.guaranteed_unsynchronized,
        }


@dataclass
class ExperimentReport:
    """Per-cell summaries and per-run records of a grid experiment."""

    config: dict[str, Any]
    row_param: Optional[str]
    col_param: Optional[str]
    cells: list[CellSummary] = field(default_factory=list)
    records: list[RunRecord] = field(default_factory=list)

    def cell(self, row: int, col: int) -> CellSummary:
        for summary in self.cells:
            if summary.row == row and summary.col == col:
                return summary
        raise KeyError(f"no cell ({row}, {col})")

    @property
    def shape(self) -> tuple[int, int]:
        return max(c.row for c in self.cells) + 1, max(c.col for c in self.cells) + 1

    def to_dict(self, include_runs: bool = True) -> dict[str, Any]:
        data: dict[str, Any] = {
            "config": self.config,
            "row_param": self.row_param,
            "col_param": self.col_param,
            "cells": [c.to_dict() for c in self.cells],
        }
        if include_runs:
            data["runs"] = [r.to_dict() for r in self.records]
        return data


def build_tasks(cfg: ExperimentConfig) -> tuple[list[tuple[int, int, Optional[float], Optional[float]]], list[RunTask]]:
    """Cell descriptors and run tasks in row-major, run-ascending order."""
    cells = []
    tasks = []
    for i, j, scenario in cfg.cells():
        cells.append((i, j, cfg.row_values[i], cfg.col_values[j]))
        tasks.extend(RunTask(i, j, r, scenario, cfg.seed) for r in range(cfg.runs))
    return cells, tasks


def run_grid(cfg: ExperimentConfig, jobs: int = 1, show_progress: bool = True) -> ExperimentReport:
    """Run every cell of the grid `runs` times and aggregate.

    Args:
        cfg: Experiment configuration
        jobs: Worker processes (1 runs in-process)
        show_progress: Display a tqdm progress bar

    Returns:
        ExperimentReport, identical for identical configs and seeds
    """
    cells, tasks = build_tasks(cfg)
    logger.info(f"Running {len(cells)} cells x {cfg.runs} runs with {jobs} worker(s)")

    progress = tqdm(total=len(tasks), desc=f"Sweeping {cfg.name}", unit=" run", disable=not show_progress)
    records: list[RunRecord] = []
    with progress:
        if jobs > 1:
            with Pool(processes=jobs) as pool:
                for record in pool.imap(execute_run, tasks, chunksize=max(1, len(tasks) // (jobs * 8))):
                    records.append(record)
                    progress.update(1)
        else:
            for task in tasks:
                records.append(execute_run(task))
                progress.update(1)

    by_cell: dict[tuple[int, int], list[RunRecord]] = {}
    for record in records:
        by_cell.setdefault((record.row, record.col), []).append(record)

    report = ExperimentReport(
        config=cfg.to_dict(),
        row_param=cfg.rows.param if cfg.rows else None,
        col_param=cfg.cols.param if cfg.cols else None,
        records=records,
    )
    for i, j, rv, cv in cells:
        summary = CellSummary.from_records(i, j, rv, cv, by_cell.get((i, j), []))
        report.cells.append(summary)
        logger.debug(
            f"Cell ({rv}, {cv}): {summary.converged_count}/{summary.runs} converged, "
            f"mean t_sync={summary.mean_sync_time}"
        )

    failed = sum(c.failed_count for c in report.cells)
    if failed:
        logger.warning(f"{failed} run(s) diverged and were recorded as failed")
    broken = [c for c in report.cells if c.guaranteed_unsynchronized]
    if broken:
        missed = sum(c.guaranteed_unsynchronized for c in broken)
        logger.warning(
            f"{missed} run(s) in {len(broken)} cell(s) did not synchronize although alpha1 guarantees it; "
            "t_max is too short or the step too coarse"
        )
    return report


@dataclass
class DesyncCensus:
    """Count of runs that never synchronized within t_max."""

    report: ExperimentReport

    @property
    def total_runs(self) -> int:
        return sum(c.runs for c in self.report.cells)

    @property
    def unsynchronized(self) -> int:
        return sum(c.runs - c.converged_count for c in self.report.cells)

    @property
    def stalled(self) -> int:
        """Runs resting at an equilibrium other than synchrony."""
        return sum(c.stalled_count for c in self.report.cells)

    @property
    def unsettled(self) -> int:
        """Runs still moving at t_max, so the horizon cut them short."""
        return sum(c.unsettled_count for c in self.report.cells)

    @property
    def fraction(self) -> float:
        return self.unsynchronized / self.total_runs if self.total_runs else 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "config": self.report.config,
            "total_runs": self.total_runs,
            "unsynchronized": self.unsynchronized,
            "fraction_unsynchronized": self.fraction,
            "stalled": self.stalled,
            "unsettled": self.unsettled,
            "cells": [
                {
                    "row_value": c.row_value,
                    "col_value": c.col_value,
                    "runs": c.runs,
                    "unsynchronized": c.runs - c.converged_count,
                    "stalled": c.stalled_count,
                    "unsettled": c.unsettled_count,
                }
                for c in self.report.cells
            ],
        }


def desync_census(cfg: ExperimentConfig, jobs: int = 1, show_progress: bool = True) -> DesyncCensus:
    """Fraction of runs still unsynchronized at t_max.

    Runs that did not diverge split into stalled (resting at a
    non-synchronous equilibrium) and unsettled (still decaying when the
    horizon ran out).
    """
    if not math.isfinite(cfg.scenario.t_max):
        raise ValueError("desync census needs a finite t_max")
    census = DesyncCensus(run_grid(cfg, jobs=jobs, show_progress=show_progress))
    logger.info(
        f"{census.unsynchronized} of {census.total_runs} runs did not synchronize "
        f"({census.stalled} stalled, {census.unsettled} unsettled)"
    )
    return census
