"""Averaged phase-deviation dynamics.

xi_i is the phase of node i minus the phase of the global cue, kept in
[-pi, pi]. Between pulses the averaged model evolves as

    dxi_i/dt = delta_i - (g_i/T) Q_g(xi_i) + (l/T) sum_j a_ij Q_l(xi_j - xi_i)

which is integrated here with fixed-step RK4.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from .prf import HALF_PI, DomainError, PhaseResponseFunction, max_slope
from .topology import Topology
from .utils import wrap_phase

logger = logging.getLogger(__name__)

MIN_FIT_SAMPLES = 10
BOUNDARY_TOL = 1e-12

# Classical RK4 is stable on the negative real axis for h*|lambda| up to about 2.785
RK4_STABILITY_LIMIT = 2.785
AUTO_DT_SAFETY = 0.25
AUTO_DT_MAX_FRACTION = 0.25

SYNCHRONIZED = "synchronized"
STALLED = "stalled"
UNSETTLED = "unsettled"


class DimensionMismatchError(ValueError):
    """Raised when a state vector does not match the topology size."""


class IntegrationDivergedError(RuntimeError):
    """Raised when the integrated state becomes non-finite."""


class InsufficientDataError(ValueError):
    """Raised when a rate fit window holds too few samples."""


@dataclass
class PhaseState:
    """Deviation vector xi and simulation time t."""

    xi: np.ndarray
    t: float = 0.0

    def __post_init__(self) -> None:
        self.xi = wrap_phase(np.array(self.xi, dtype=float))
        if not np.all(np.isfinite(self.xi)):
            raise IntegrationDivergedError(f"non-finite phase state at t={self.t}")


@dataclass
class Trajectory:
    """Recorded samples of an integration run."""

    times: np.ndarray
    xi: np.ndarray
    norm2: np.ndarray
    norm_inf: np.ndarray
    t_sync: Optional[float] = None
    converged: bool = False
    dt: Optional[float] = None

    @property
    def final_state(self) -> PhaseState:
        return PhaseState(self.xi[-1], float(self.times[-1]))

    @property
    def duration(self) -> float:
        return float(self.times[-1])

    def header(self) -> list[str]:
        return ["t"] + [f"xi_{i}" for i in range(self.xi.shape[1])] + ["norm2", "norm_inf"]

    def to_rows(self) -> list[list[float]]:
        """Rows of t, xi_0..xi_{N-1}, norm2, norm_inf."""
        return np.column_stack([self.times, self.xi, self.norm2, self.norm_inf]).tolist()

    def sample_periods(self, period: float) -> tuple[np.ndarray, np.ndarray]:
        """Recorded samples that fall on whole multiples of the period."""
        cycles = self.times / period
        mask = np.isclose(cycles, np.round(cycles), rtol=0.0, atol=1e-9)
        return self.times[mask], self.xi[mask]

    def summary(self) -> dict[str, Any]:
        return {
            "converged": self.converged,
            "t_sync": self.t_sync,
            "t_end": self.duration,
            "samples": len(self.times),
            "final_norm_inf": float(self.norm_inf[-1]),
            "final_norm2": float(self.norm2[-1]),
        }


@dataclass(frozen=True)
class RateFit:
    """Log-linear fit of ||xi(t)||_2 ~ c_hat * exp(-alpha_hat t) * ||xi(0)||_2."""

    alpha_hat: float
    c_hat: float
    r_squared: float
    samples: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "alpha_hat": self.alpha_hat,
            "c_hat": self.c_hat,
            "r_squared": self.r_squared,
            "samples": self.samples,
        }


def vector_field(
    topo: Topology,
    qg: PhaseResponseFunction,
    ql: PhaseResponseFunction,
    xi: Any,
) -> np.ndarray:
    """Time derivative of the deviation vector (rad/s).

    Raises:
        DimensionMismatchError: If xi does not have one entry per node
    """
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (topo.n,):
        raise DimensionMismatchError(f"state has shape {xi.shape}, topology has {topo.n} nodes")

    # diffs[i, j] = xi_j - xi_i
    diffs = xi[np.newaxis, :] - xi[:, np.newaxis]
    local = np.sum(topo.adjacency * ql(diffs), axis=1)
    period = topo.period
    return topo.natural_freq_offsets - (topo.global_gains / period) * qg(xi) + (topo.local_strength / period) * local


def rk4_step(
    topo: Topology,
    qg: PhaseResponseFunction,
    ql: PhaseResponseFunction,
    xi: np.ndarray,
    dt: float,
) -> np.ndarray:
    """One classical Runge-Kutta step, wrapped back into [-pi, pi]."""
    k1 = vector_field(topo, qg, ql, xi)
    k2 = vector_field(topo, qg, ql, xi + 0.5 * dt * k1)
    k3 = vector_field(topo, qg, ql, xi + 0.5 * dt * k2)
    k4 = vector_field(topo, qg, ql, xi + dt * k3)
    return wrap_phase(xi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))


def stiffness_bound(topo: Topology, qg: PhaseResponseFunction, ql: PhaseResponseFunction) -> float:
    """Gershgorin bound on the spectral radius of the vector field's Jacobian (1/s).

    Row i of the Jacobian has diagonal magnitude at most g_i |Q_g'| + l d_i |Q_l'|
    and off-diagonal mass at most l d_i |Q_l'|, all over T.
    """
    local = 2.0 * topo.local_strength * topo.degrees() * max_slope(ql)
    cue = topo.global_gains * max_slope(qg)
    return float(np.max(cue + local, initial=0.0) / topo.period)


def stable_step(
    topo: Topology,
    qg: PhaseResponseFunction,
    ql: PhaseResponseFunction,
    safety: float = AUTO_DT_SAFETY,
) -> float:
    """Largest step keeping dt * stiffness_bound at `safety` of the RK4 limit.

    Capped at AUTO_DT_MAX_FRACTION of the period.
    """
    cap = AUTO_DT_MAX_FRACTION * topo.period
    rho = stiffness_bound(topo, qg, ql)
    if rho <= 0:
        return cap
    return min(cap, safety * RK4_STABILITY_LIMIT / rho)


def integrate(
    topo: Topology,
    qg: PhaseResponseFunction,
    ql: PhaseResponseFunction,
    xi0: Any,
    dt: float,
    t_max: float,
    sync_tol: float = 1e-3,
    record_every: int = 1,
) -> Trajectory:
    """Integrate until synchronization is held for one period or t_max.

    t_sync is the time ||xi||_inf first dropped below sync_tol and then
    stayed there for a full cue period T.

    Args:
        topo: Network topology
        qg: Global-cue PRF
        ql: Local PRF
        xi0: Initial deviations
        dt: Step size in seconds
        t_max: Time limit in seconds
        sync_tol: Synchronization threshold on ||xi||_inf (radians)
        record_every: Keep every k-th step in the trajectory

    Returns:
        Trajectory; converged is False when t_max arrives first

    Raises:
        IntegrationDivergedError: If the state becomes non-finite
    """
    if dt <= 0 or not math.isfinite(dt):
        raise ValueError(f"dt must be positive, got {dt}")
    if sync_tol <= 0:
        raise ValueError(f"sync_tol must be positive, got {sync_tol}")
    if record_every < 1:
        raise ValueError(f"record_every must be at least 1, got {record_every}")
    if dt > topo.period / 100:
        logger.debug(f"dt={dt} exceeds T/100={topo.period / 100}")
    rho = stiffness_bound(topo, qg, ql)
    if dt * rho > RK4_STABILITY_LIMIT:
        logger.warning(
            f"dt={dt} may put RK4 outside its stability region on '{topo.name}' "
            f"(dt * {rho:.3g} > {RK4_STABILITY_LIMIT}); use dt <= {stable_step(topo, qg, ql):.3g}"
        )

    xi = PhaseState(np.asarray(xi0, dtype=float)).xi
    if xi.shape != (topo.n,):
        raise DimensionMismatchError(f"state has shape {xi.shape}, topology has {topo.n} nodes")

    n_steps = int(math.floor(t_max / dt + 1e-9))
    hold_steps = int(math.ceil(topo.period / dt - 1e-9))

    times, states, norms2, norms_inf = [], [], [], []

    def record(step: int, state: np.ndarray, ninf: float) -> None:
        times.append(step * dt)
        states.append(state.copy())
        norms2.append(float(np.linalg.norm(state)))
        norms_inf.append(ninf)

    norm_inf = float(np.max(np.abs(xi)))
    entered: Optional[int] = 0 if norm_inf < sync_tol else None
    record(0, xi, norm_inf)

    step = 0
    converged = False
    while True:
        if entered is not None and step - entered >= hold_steps:
            converged = True
            break
        if step >= n_steps:
            break
        xi = rk4_step(topo, qg, ql, xi, dt)
        step += 1
        if not np.all(np.isfinite(xi)):
            raise IntegrationDivergedError(f"state became non-finite at t={step * dt}")
        norm_inf = float(np.max(np.abs(xi)))
        if norm_inf < sync_tol:
            if entered is None:
                entered = step
        else:
            entered = None
        if step % record_every == 0:
            record(step, xi, norm_inf)

    if times[-1] != step * dt:
        record(step, xi, norm_inf)

    t_sync = entered * dt if converged else None
    logger.debug(f"Integration stopped at t={step * dt:.3f}: converged={converged}, t_sync={t_sync}")
    return Trajectory(
        times=np.array(times),
        xi=np.array(states),
        norm2=np.array(norms2),
        norm_inf=np.array(norms_inf),
        t_sync=t_sync,
        converged=converged,
        dt=dt,
    )


def fit_rate(trajectory: Trajectory, window: Optional[tuple[float, float]] = None) -> RateFit:
    """Least-squares line through (t, log ||xi(t)||_2) over a time window.

    Args:
        trajectory: Recorded trajectory
        window: (t_start, t_end); defaults to the whole trajectory

    Returns:
        RateFit with alpha_hat = -slope clamped at zero

    Raises:
        InsufficientDataError: If fewer than 10 usable samples lie in the window
    """
    times = trajectory.times
    norms = trajectory.norm2
    mask = norms > 0
    if window is not None:
        t_start, t_end = window
        mask &= (times >= t_start) & (times <= t_end)
    count = int(np.count_nonzero(mask))
    if count < MIN_FIT_SAMPLES:
        raise InsufficientDataError(f"rate fit needs at least {MIN_FIT_SAMPLES} samples, got {count}")

    t = times[mask]
    y = np.log(norms[mask])
    slope, intercept = np.polyfit(t, y, 1)

    residuals = y - (slope * t + intercept)
    ss_res = float(np.sum(residuals**2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r_squared = 1.0 if ss_tot == 0 else max(0.0, 1.0 - ss_res / ss_tot)

    norm0 = float(norms[0]) if norms[0] > 0 else float(norms[mask][0])
    return RateFit(
        alpha_hat=max(0.0, float(-slope)),
        c_hat=float(math.exp(intercept) / norm0),
        r_squared=r_squared,
        samples=count,
    )


def classify_outcome(
    topo: Topology,
    qg: PhaseResponseFunction,
    ql: PhaseResponseFunction,
    trajectory: Trajectory,
    sync_tol: float,
) -> str:
    """How a run ended: SYNCHRONIZED, STALLED or UNSETTLED.

    A run that did not synchronize is stalled when the drift at its final
    state, kept up for as long again as the run lasted, would still move no
    node by sync_tol: it rests at a non-synchronous equilibrium. Otherwise it
    was still moving (typically still decaying) when t_max arrived.
    """
    if trajectory.converged:
        return SYNCHRONIZED
    final = trajectory.final_state
    speed = float(np.max(np.abs(vector_field(topo, qg, ql, final.xi))))
    if speed * max(final.t, topo.period) < sync_tol:
        return STALLED
    return UNSETTLED


@dataclass
class BoundaryPoint:
    """Sign of the vector field at a node sitting on the box boundary."""

    node: int
    side: int
    derivative: float
    status: str  # inward, boundary or violation


def inspect_boundary(
    topo: Topology,
    qg: PhaseResponseFunction,
    ql: PhaseResponseFunction,
    xi: Any,
    eps_bar: float,
    tol: float = BOUNDARY_TOL,
) -> list[BoundaryPoint]:
    """Classify each node with |xi_i| = eps_bar by the direction of dxi_i/dt."""
    xi = np.asarray(xi, dtype=float)
    deriv = vector_field(topo, qg, ql, xi)
    points = []
    for i in np.flatnonzero(np.abs(np.abs(xi) - eps_bar) <= tol):
        side = 1 if xi[i] > 0 else -1
        d = float(deriv[i])
        if abs(d) <= tol:
            status = "boundary"
        elif side * d < 0:
            status = "inward"
        else:
            status = "violation"
        points.append(BoundaryPoint(node=int(i), side=side, derivative=d, status=status))
    return points


@dataclass
class InvarianceReport:
    """Boundary sampling results for the box [-eps_bar, eps_bar]^N."""

    eps_bar: float
    variant: str
    states_checked: int = 0
    boundary_points: int = 0
    boundary_cases: int = 0
    violations: list[dict[str, Any]] = field(default_factory=list)
    condition_warning: Optional[str] = None

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self, max_listed: int = 20) -> dict[str, Any]:
        return {
            "eps_bar": self.eps_bar,
            "variant": self.variant,
            "passed": self.passed,
            "states_checked": self.states_checked,
            "boundary_points": self.boundary_points,
            "boundary_cases": self.boundary_cases,
            "violation_count": len(self.violations),
            "violations": self.violations[:max_listed],
            "condition_warning": self.condition_warning,
        }


def _corner_states(n: int, eps_bar: float) -> list[np.ndarray]:
    """One node at +-eps_bar with every other node on the opposite face."""
    states = []
    for i in range(n):
        for side in (1.0, -1.0):
            xi = np.full(n, -side * eps_bar)
            xi[i] = side * eps_bar
            states.append(xi)
    return states


def check_invariance(
    topo: Topology,
    qg: PhaseResponseFunction,
    ql: PhaseResponseFunction,
    eps_bar: float,
    samples: int = 1000,
    seed: int = 0,
) -> InvarianceReport:
    """Check that the vector field points into [-eps_bar, eps_bar]^N on its boundary.

    Random states with at least one node pinned to the boundary are checked
    together with the corner states from _corner_states. For
    pi/2 <= eps_bar < pi the inward property depends on the second
    condition of check_theorem2; a warning is logged when it fails.

    Returns:
        InvarianceReport; zero-derivative points are boundary cases, not violations
    """
    if not 0 < eps_bar < math.pi:
        raise DomainError(f"eps_bar must lie in (0, pi), got {eps_bar}")

    report = InvarianceReport(
        eps_bar=eps_bar,
        variant="inside_half_pi" if eps_bar < HALF_PI else "outside_half_pi",
    )
    if eps_bar >= HALF_PI:
        from .analysis import check_theorem2

        t2 = check_theorem2(topo, qg, ql, eps_bar)
        if not t2.gain_condition.passed:
            report.condition_warning = "per-node gain condition fails; escapes are possible"
            logger.warning(f"check_invariance at eps_bar={eps_bar:.4f}: {report.condition_warning}")

    rng = np.random.default_rng(seed)
    n = topo.n
    states = _corner_states(n, eps_bar)
    for _ in range(samples):
        xi = rng.uniform(-eps_bar, eps_bar, size=n)
        pinned = rng.random(n) < 0.5
        pinned[rng.integers(n)] = True
        xi[pinned] = eps_bar * rng.choice([-1.0, 1.0], size=int(pinned.sum()))
        states.append(xi)

    for xi in states:
        report.states_checked += 1
        for point in inspect_boundary(topo, qg, ql, xi, eps_bar):
            report.boundary_points += 1
            if point.status == "boundary":
                report.boundary_cases += 1
            elif point.status == "violation":
                report.violations.append(
                    {"node": point.node, "side": point.side, "derivative": point.derivative, "xi": xi.tolist()}
                )

    logger.info(
        f"Invariance check at eps_bar={eps_bar:.4f}: {report.states_checked} states, "
        f"{len(report.violations)} violations, {report.boundary_cases} boundary cases"
    )
    return report
