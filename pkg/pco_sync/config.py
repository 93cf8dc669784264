"""Configuration management for pco_sync."""

from __future__ import annotations

import logging
import math
import os
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterator, Optional, Union

import numpy as np
from dotenv import load_dotenv

from .dynamics import stable_step
from .prf import PhaseResponseFunction, TanhPrf, prf_from_dict
from .pulse_sim import EnergyConfig
from .topology import Topology, TopologyError
from .utils import load_document

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Raised for malformed scenario or experiment documents."""


@dataclass
class Config:
    """Application configuration loaded from environment variables."""

    # Paths
    output_dir: Path = Path("out")

    # Execution
    jobs: int = 1

    # Numerics
    grid_points: int = 10_000
    sync_tol: float = 1e-3
    dt: float = 0.01

    @classmethod
    def from_env(cls, env_file: Optional[Path] = None) -> "Config":
        """Load configuration from environment variables."""
        if env_file and env_file.exists():
            load_dotenv(env_file)
        else:
            load_dotenv()

        return cls(
            output_dir=Path(os.getenv("PCO_OUTPUT_DIR", "out")),
            jobs=int(os.getenv("PCO_JOBS", "1")),
            grid_points=int(os.getenv("PCO_GRID_POINTS", "10000")),
            sync_tol=float(os.getenv("PCO_SYNC_TOL", "1e-3")),
            dt=float(os.getenv("PCO_DT", "0.01")),
        )

    def validate(self) -> list[str]:
        """Validate configuration and return list of errors."""
        errors = []
        if self.jobs < 1:
            errors.append(f"PCO_JOBS must be at least 1, got {self.jobs}")
        if self.grid_points < 1000:
            errors.append(f"PCO_GRID_POINTS must be at least 1000, got {self.grid_points}")
        if not self.sync_tol > 0:
            errors.append(f"PCO_SYNC_TOL must be positive, got {self.sync_tol}")
        if not self.dt > 0:
            errors.append(f"PCO_DT must be positive, got {self.dt}")
        return errors


# Default presets directory
PRESETS_DIR = Path(__file__).parent.parent / "presets"

PRESET_KINDS = ("topologies", "scenarios", "experiments")
PRESET_SUFFIXES = (".yaml", ".yml", ".json")


def list_presets(kind: str, presets_dir: Optional[Path] = None) -> list[str]:
    """List available presets of one kind.

    Args:
        kind: One of topologies, scenarios, experiments
        presets_dir: Root presets directory

    Returns:
        Sorted preset names (without extension)
    """
    if kind not in PRESET_KINDS:
        raise ValueError(f"Unknown preset kind: {kind}")
    directory = (presets_dir or PRESETS_DIR) / kind
    if not directory.exists():
        return []
    return sorted(f.stem for f in directory.iterdir() if f.suffix in PRESET_SUFFIXES)


def resolve_preset(
    kind: str,
    ref: Union[str, Path],
    presets_dir: Optional[Path] = None,
    base_dir: Optional[Path] = None,
) -> Path:
    """Turn a preset name or a file path into an existing file path.

    Raises:
        FileNotFoundError: If neither a file nor a preset matches
    """
    path = Path(ref)
    candidates = [path]
    if base_dir is not None and not path.is_absolute():
        candidates.insert(0, base_dir / path)
    directory = (presets_dir or PRESETS_DIR) / kind
    candidates += [directory / f"{ref}{suffix}" for suffix in PRESET_SUFFIXES]

    for candidate in candidates:
        if candidate.is_file():
            return candidate
    raise FileNotFoundError(
        f"Preset not found in {kind}: {ref}\n"
        f"Available {kind}: {', '.join(list_presets(kind, presets_dir)) or '(none)'}"
    )


_ANGLE_RE = re.compile(r"^\s*(-)?\s*(\d+(?:\.\d*)?)?\s*\*?\s*pi\s*(?:/\s*(\d+(?:\.\d*)?))?\s*$")


def parse_angle(value: Any) -> float:
    """Parse a number or an expression like "pi", "-pi/2" or "3*pi/4"."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    match = _ANGLE_RE.match(str(value))
    if not match:
        raise ConfigError(f"Cannot parse angle: {value!r}")
    sign, factor, divisor = match.groups()
    angle = float(factor or 1.0) * math.pi / float(divisor or 1.0)
    return -angle if sign else angle


def _check_keys(data: dict[str, Any], allowed: set[str], what: str) -> None:
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"Unknown {what} keys: {', '.join(sorted(unknown))}")


SIMULATORS = ("ode", "pulse")

SCENARIO_KEYS = {
    "name",
    "description",
    "topology",
    "qg",
    "ql",
    "g",
    "l",
    "T",
    "initial",
    "energy",
    "simulator",
    "dt",
    "t_max",
    "sync_tol",
    "record_every",
    "t_max_from_bound",
}

AUTO = "auto"
MALFORMED = (TypeError, KeyError, AttributeError)


@dataclass(frozen=True)
class ScenarioConfig:
    """A network with its PRFs, initial condition and integration settings."""

    topology: Topology
    qg: PhaseResponseFunction
    ql: PhaseResponseFunction
    initial: dict[str, Any] = field(default_factory=lambda: {"uniform": [-math.pi / 2, math.pi / 2], "seed": 0})
    energy: EnergyConfig = field(default_factory=EnergyConfig)
    simulator: str = "ode"
    dt: Optional[float] = 0.01
    t_max: float = 10_000.0
    sync_tol: float = 1e-3
    record_every: int = 1
    name: str = "scenario"
    t_max_from_bound: bool = False

    def __post_init__(self) -> None:
        if self.simulator not in SIMULATORS:
            raise ConfigError(f"simulator must be one of {', '.join(SIMULATORS)}, got {self.simulator!r}")
        if (self.dt is not None and not self.dt > 0) or not self.t_max > 0 or not self.sync_tol > 0:
            raise ConfigError("dt, t_max and sync_tol must be positive")
        if self.record_every < 1:
            raise ConfigError(f"record_every must be at least 1, got {self.record_every}")
        object.__setattr__(self, "initial", _normalize_initial(self.initial, self.topology.n))

    @classmethod
    def from_dict(
        cls,
        data: dict[str, Any],
        base_dir: Optional[Path] = None,
        defaults: Optional[Config] = None,
    ) -> "ScenarioConfig":
        """Build a scenario from a document, rejecting unknown keys.

        Args:
            data: Scenario document
            base_dir: Directory relative file references are resolved against
            defaults: Environment defaults for dt and sync_tol

        Returns:
            ScenarioConfig instance
        """
        if not isinstance(data, dict):
            raise ConfigError("scenario document must be a mapping")
        _check_keys(data, SCENARIO_KEYS, "scenario")
        try:
            return cls._from_document(data, base_dir, defaults or Config())
        except MALFORMED as e:
            raise ConfigError(f"Malformed scenario document: {e}") from e

    @classmethod
    def _from_document(cls, data: dict[str, Any], base_dir: Optional[Path], defaults: Config) -> "ScenarioConfig":
        if "topology" not in data:
            raise ConfigError("scenario needs a 'topology'")
        ref = data["topology"]
        try:
            if isinstance(ref, dict):
                topology = Topology.from_dict(ref)
            else:
                topology = Topology.load(resolve_preset("topologies", ref, base_dir=base_dir))
            if "g" in data:
                topology = topology.with_gains(data["g"])
            if "l" in data:
                topology = topology.with_local_strength(float(data["l"]))
            if "T" in data:
                topology = replace(topology, period=float(data["T"]))
        except TopologyError as e:
            raise ConfigError(f"Invalid topology: {e}") from e

        for key in ("qg", "ql"):
            if key not in data:
                raise ConfigError(f"scenario needs '{key}'")
        try:
            energy = EnergyConfig.from_dict(data.get("energy"))
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Invalid energy settings: {e}") from e

        scenario = cls(
            topology=topology,
            qg=prf_from_dict(data["qg"], base_dir),
            ql=prf_from_dict(data["ql"], base_dir),
            initial=data.get("initial", {"uniform": [-math.pi / 2, math.pi / 2], "seed": 0}),
            energy=energy,
            simulator=str(data.get("simulator", "ode")),
            dt=_parse_step(data.get("dt", defaults.dt)),
            t_max=float(data.get("t_max", 10_000.0)),
            sync_tol=float(data.get("sync_tol", defaults.sync_tol)),
            record_every=int(data.get("record_every", 1)),
            name=str(data.get("name", topology.name)),
            t_max_from_bound=_parse_flag(data.get("t_max_from_bound", False), "t_max_from_bound"),
        )
        if scenario.simulator == "ode" and scenario.dt is not None and scenario.dt > topology.period / 100:
            logger.warning(f"Scenario '{scenario.name}': dt={scenario.dt} exceeds T/100={topology.period / 100}")
        return scenario

    @classmethod
    def load(cls, ref: Union[str, Path], defaults: Optional[Config] = None) -> "ScenarioConfig":
        """Load a scenario from a preset name or a YAML/JSON file."""
        path = resolve_preset("scenarios", ref)
        scenario = cls.from_dict(load_document(path), base_dir=path.parent, defaults=defaults)
        logger.info(f"Loaded scenario: {scenario.name}")
        return scenario

    @property
    def step(self) -> float:
        """Integration step: dt, or the stiffness-derived step when dt is auto."""
        if self.dt is not None:
            return self.dt
        return stable_step(self.topology, self.qg, self.ql)

    def with_seed(self, seed: int) -> "ScenarioConfig":
        if "uniform" not in self.initial:
            return self
        return replace(self, initial={**self.initial, "seed": int(seed)})

    def draw_initial(self, run_index: Optional[int] = None, master_seed: Optional[int] = None) -> np.ndarray:
        """Initial deviations: explicit phases, or a uniform draw.

        A run index switches to the per-run stream
        SeedSequence([master_seed, run_index]), shared by every grid cell.
        """
        if "phases" in self.initial:
            return np.array(self.initial["phases"], dtype=float)
        lo, hi = self.initial["uniform"]
        seed = self.initial["seed"] if master_seed is None else master_seed
        if run_index is None:
            rng = np.random.default_rng(seed)
        else:
            rng = np.random.default_rng(np.random.SeedSequence([seed, run_index]))
        return rng.uniform(lo, hi, size=self.topology.n)

    def to_dict(self) -> dict[str, Any]:
        """Fully resolved document; from_dict on it rebuilds this scenario."""
        return {
            "name": self.name,
            "topology": self.topology.to_dict(),
            "qg": self.qg.to_dict(),
            "ql": self.ql.to_dict(),
            "initial": self.initial,
            "energy": self.energy.to_dict(),
            "simulator": self.simulator,
            "dt": AUTO if self.dt is None else self.dt,
            "t_max": self.t_max,
            "t_max_from_bound": self.t_max_from_bound,
            "sync_tol": self.sync_tol,
            "record_every": self.record_every,
        }


def _parse_step(value: Any) -> Optional[float]:
    if isinstance(value, str) and value.strip().lower() == AUTO:
        return None
    return float(value)


def _parse_flag(value: Any, key: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(f"{key} must be true or false, got {value!r}")
    return value


def _normalize_initial(initial: Any, n: int) -> dict[str, Any]:
    if not isinstance(initial, dict):
        raise ConfigError("initial must be {phases: [...]} or {uniform: [lo, hi], seed: s}")
    if "phases" in initial:
        _check_keys(initial, {"phases"}, "initial")
        phases = [parse_angle(p) for p in initial["phases"]]
        if len(phases) != n:
            raise ConfigError(f"initial phases need {n} entries, got {len(phases)}")
        return {"phases": phases}
    if "uniform" in initial:
        _check_keys(initial, {"uniform", "seed"}, "initial")
        bounds = initial["uniform"]
        if len(bounds) != 2:
            raise ConfigError("initial uniform needs [lo, hi]")
        lo, hi = parse_angle(bounds[0]), parse_angle(bounds[1])
        if not -math.pi - 1e-12 <= lo < hi <= math.pi + 1e-12:
            raise ConfigError(f"initial uniform range must satisfy -pi <= lo < hi <= pi, got [{lo}, {hi}]")
        return {"uniform": [lo, hi], "seed": int(initial.get("seed", 0))}
    raise ConfigError("initial must contain 'phases' or 'uniform'")


GRID_PARAMS = ("eps_g", "eps_l", "g", "l")

EXPERIMENT_KEYS = SCENARIO_KEYS | {"runs", "seed", "rows", "cols"}


@dataclass(frozen=True)
class GridAxis:
    """One swept parameter and its values."""

    param: str
    values: tuple[float, ...]

    @classmethod
    def from_dict(cls, data: Any) -> "GridAxis":
        if not isinstance(data, dict):
            raise ConfigError("grid axis must be {param: ..., values: [...]}")
        _check_keys(data, {"param", "values"}, "grid axis")
        param = data.get("param")
        if param not in GRID_PARAMS:
            raise ConfigError(f"grid param must be one of {', '.join(GRID_PARAMS)}, got {param!r}")
        values = data.get("values") or []
        if not values:
            raise ConfigError(f"grid axis '{param}' needs at least one value")
        return cls(param=param, values=tuple(float(v) for v in values))

    def to_dict(self) -> dict[str, Any]:
        return {"param": self.param, "values": list(self.values)}


def apply_param(scenario: ScenarioConfig, param: str, value: float) -> ScenarioConfig:
    """Return a scenario with one grid parameter set.

    eps_g and eps_l switch the PRF to TanhPrf(value); g sets the gain of
    every node attached to the cue (all nodes when none is); l sets the
    local strength.
    """
    if param == "eps_g":
        return replace(scenario, qg=TanhPrf(value))
    if param == "eps_l":
        return replace(scenario, ql=TanhPrf(value))
    topo = scenario.topology
    if param == "g":
        gains = np.zeros(topo.n)
        gains[topo.attached or list(range(topo.n))] = value
        return replace(scenario, topology=topo.with_gains(gains))
    if param == "l":
        return replace(scenario, topology=topo.with_local_strength(value))
    raise ConfigError(f"Unknown grid param: {param}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Monte Carlo grid over a base scenario."""

    scenario: ScenarioConfig
    runs: int = 100
    seed: int = 0
    rows: Optional[GridAxis] = None
    cols: Optional[GridAxis] = None
    name: str = "experiment"
    description: str = ""

    def __post_init__(self) -> None:
        if self.runs < 1:
            raise ConfigError(f"runs must be at least 1, got {self.runs}")
        if self.rows is not None and self.cols is not None and self.rows.param == self.cols.param:
            raise ConfigError(f"rows and cols both sweep '{self.rows.param}'")

    @property
    def row_values(self) -> tuple[Optional[float], ...]:
        return self.rows.values if self.rows else (None,)

    @property
    def col_values(self) -> tuple[Optional[float], ...]:
        return self.cols.values if self.cols else (None,)

    def cells(self) -> Iterator[tuple[int, int, ScenarioConfig]]:
        """Yield (row index, column index, scenario) in row-major order."""
        for i, rv in enumerate(self.row_values):
            row_scenario = self.scenario if rv is None else apply_param(self.scenario, self.rows.param, rv)
            for j, cv in enumerate(self.col_values):
                cell = row_scenario if cv is None else apply_param(row_scenario, self.cols.param, cv)
                yield i, j, cell

    @classmethod
    def from_dict(
        cls,
        data: dict[str, Any],
        base_dir: Optional[Path] = None,
        defaults: Optional[Config] = None,
    ) -> "ExperimentConfig":
        """Build an experiment: scenario keys plus runs, seed, rows and cols."""
        if not isinstance(data, dict):
            raise ConfigError("experiment document must be a mapping")
        _check_keys(data, EXPERIMENT_KEYS, "experiment")
        scenario_data = {k: v for k, v in data.items() if k in SCENARIO_KEYS}
        scenario = ScenarioConfig.from_dict(scenario_data, base_dir=base_dir, defaults=defaults)
        try:
            return cls(
                scenario=scenario,
                runs=int(data.get("runs", 100)),
                seed=int(data.get("seed", 0)),
                rows=GridAxis.from_dict(data["rows"]) if data.get("rows") else None,
                cols=GridAxis.from_dict(data["cols"]) if data.get("cols") else None,
                name=scenario.name,
                description=str(data.get("description", "")),
            )
        except MALFORMED as e:
            raise ConfigError(f"Malformed experiment document: {e}") from e

    @classmethod
    def load(cls, ref: Union[str, Path], defaults: Optional[Config] = None) -> "ExperimentConfig":
        """Load an experiment from a preset name or a YAML/JSON file."""
        path = resolve_preset("experiments", ref)
        experiment = cls.from_dict(load_document(path), base_dir=path.parent, defaults=defaults)
        logger.info(f"Loaded experiment: {experiment.name} ({experiment.runs} runs per cell)")
        return experiment

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=int(seed))

    def to_dict(self) -> dict[str, Any]:
        data = self.scenario.to_dict()
        data.update(
            {
                "description": self.description,
                "runs": self.runs,
                "seed": self.seed,
                "rows": self.rows.to_dict() if self.rows else None,
                "cols": self.cols.to_dict() if self.cols else None,
            }
        )
        return data
