"""Synchronization rate bounds and the sufficient conditions behind them."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np

from .prf import HALF_PI, DomainError, PhaseResponseFunction, PrfBounds, TanhPrf, compute_bounds
from .topology import Topology, is_connected, laplacian

logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-10
MAX_SWEEPS = 100
TINY_OFF_DIAGONAL = 1e-300

INSIDE_HALF_PI = "inside_half_pi"
OUTSIDE_HALF_PI = "outside_half_pi"


class AsymmetricMatrixError(ValueError):
    """Raised when symmetric_eigen receives a non-symmetric matrix."""


def symmetric_eigen(matrix: Any, vectors: bool = False) -> tuple[np.ndarray, Optional[np.ndarray]]:
    """Eigen-decomposition of a real symmetric matrix by cyclic Jacobi rotations.

    Args:
        matrix: Square symmetric matrix
        vectors: Also accumulate eigenvectors (as columns)

    Returns:
        (eigenvalues ascending, eigenvector matrix or None)

    Raises:
        AsymmetricMatrixError: If the matrix is not square or not symmetric within 1e-10
    """
    a = np.array(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise AsymmetricMatrixError(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if a.size and np.max(np.abs(a - a.T)) > SYMMETRY_TOL * scale:
        raise AsymmetricMatrixError("matrix is not symmetric")
    a = 0.5 * (a + a.T)
    v = np.eye(n) if vectors else None

    frob = float(np.linalg.norm(a))
    for sweep in range(MAX_SWEEPS):
        off = math.sqrt(max(0.0, float(np.sum(a**2) - np.sum(np.diag(a) ** 2))))
        if off <= 1e-15 * frob:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                # rotating out a negligible entry would overflow theta
                if abs(apq) < TINY_OFF_DIAGONAL or abs(apq) <= 1e-18 * (abs(a[p, p]) + abs(a[q, q])):
                    a[p, q] = a[q, p] = 0.0
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 1.0 / (2.0 * theta)
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c

                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0

                if v is not None:
                    vp = v[:, p].copy()
                    vq = v[:, q].copy()
                    v[:, p] = c * vp - s * vq
                    v[:, q] = s * vp + c * vq
    else:
        logger.warning(f"Jacobi iteration stopped after {MAX_SWEEPS} sweeps without converging")

    values = np.diag(a).copy()
    order = np.argsort(values, kind="stable")
    values = values[order]
    if v is not None:
        v = v[:, order]
    return values, v


@dataclass
class RateBounds:
    """Lower bound on the synchronization rate with the constants behind it."""

    regime: str
    prf_bounds: PrfBounds
    period: float
    alpha1: Optional[float] = None
    alpha2: Optional[float] = None
    lambda_max: Optional[float] = None
    matrix_eigenvalues: list[float] = field(default_factory=list)
    guarantee: bool = False
    notes: list[str] = field(default_factory=list)

    @property
    def rate(self) -> float:
        return self.alpha1 if self.regime == INSIDE_HALF_PI else self.alpha2

    def to_dict(self) -> dict[str, Any]:
        return {
            "regime": self.regime,
            "alpha1": self.alpha1,
            "alpha2": self.alpha2,
            "guarantee": self.guarantee,
            "period": self.period,
            "lambda_max": self.lambda_max,
            "matrix_eigenvalues": self.matrix_eigenvalues,
            "prf_bounds": self.prf_bounds.to_dict(),
            "notes": self.notes,
        }


@dataclass
class Theorem1Report:
    """Connectivity and cue-attachment hypotheses for the inner regime."""

    connected: bool
    cue_attached: bool

    @property
    def passed(self) -> bool:
        return self.connected and self.cue_attached

    def to_dict(self) -> dict[str, Any]:
        return {"passed": self.passed, "connected": self.connected, "cue_attached": self.cue_attached}


@dataclass
class ConditionResult:
    """One inequality with its margin (left side minus right side)."""

    name: str
    applicable: bool
    passed: bool
    margin: Optional[float]
    detail: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "applicable": self.applicable,
            "passed": self.passed,
            "margin": self.margin,
            "detail": self.detail,
        }


@dataclass
class Theorem2Report:
    """Sufficient conditions for synchronization from outside (-pi/2, pi/2)."""

    eps_bar: float
    prf_bounds: PrfBounds
    lambda_max: float
    cue_condition: ConditionResult
    gain_condition: ConditionResult

    @property
    def passed(self) -> bool:
        return self.cue_condition.passed and self.gain_condition.passed

    def to_dict(self) -> dict[str, Any]:
        return {
            "eps_bar": self.eps_bar,
            "passed": self.passed,
            "lambda_max": self.lambda_max,
            "conditions": [self.cue_condition.to_dict(), self.gain_condition.to_dict()],
            "prf_bounds": self.prf_bounds.to_dict(),
        }


def check_theorem1(topo: Topology) -> Theorem1Report:
    """Local graph connected and at least one node attached to the cue."""
    return Theorem1Report(connected=is_connected(topo), cue_attached=bool(np.max(topo.global_gains) > 0))


def lambda_max(topo: Topology) -> float:
    """Largest Laplacian eigenvalue."""
    values, _ = symmetric_eigen(laplacian(topo))
    return float(values[-1])


def alpha1(
    topo: Topology,
    qg: PhaseResponseFunction,
    ql: PhaseResponseFunction,
    eps_bar: float,
    grid_points: int = 10_000,
) -> RateBounds:
    """Rate bound lambda_min(sigma1 G + sigma2 l L) / T for eps_bar < pi/2.

    The bound is still computed when the topology is disconnected or no node
    hears the cue; guarantee is then False.

    Raises:
        DomainError: If eps_bar >= pi/2
    """
    if eps_bar >= HALF_PI:
        raise DomainError(f"alpha1 needs eps_bar < pi/2, got {eps_bar}")
    bounds = compute_bounds(qg, ql, eps_bar, grid_points)
    matrix = bounds.sigma1 * np.diag(topo.global_gains) + bounds.sigma2 * topo.local_strength * laplacian(topo)
    values, _ = symmetric_eigen(matrix)

    hypotheses = check_theorem1(topo)
    result = RateBounds(
        regime=INSIDE_HALF_PI,
        prf_bounds=bounds,
        period=topo.period,
        alpha1=float(values[0] / topo.period),
        matrix_eigenvalues=values.tolist(),
        guarantee=hypotheses.passed,
    )
    if not hypotheses.connected:
        result.notes.append("local graph is disconnected; guarantee inapplicable")
    if not hypotheses.cue_attached:
        result.notes.append("no node is attached to the global cue; guarantee inapplicable")
    for note in result.notes:
        logger.warning(f"alpha1 on '{topo.name}': {note}")
    return result


def _theorem2(topo: Topology, bounds: PrfBounds, lam_max: float) -> Theorem2Report:
    l = topo.local_strength
    g_min = topo.g_min

    if bounds.sigma3 > 0:
        rhs = bounds.sigma4 * l * lam_max / bounds.sigma3
        cue = ConditionResult(
            name="g_min > sigma4 l lambda_max / sigma3",
            applicable=True,
            passed=g_min > rhs,
            margin=g_min - rhs,
        )
    else:
        cue = ConditionResult(
            name="g_min > sigma4 l lambda_max / sigma3",
            applicable=False,
            passed=False,
            margin=None,
            detail=f"sigma3 = {bounds.sigma3} <= 0",
        )

    if bounds.gamma1 > 0:
        required = (l / bounds.gamma1) * topo.degrees() * bounds.gamma2
        slack = topo.global_gains - required
        gain = ConditionResult(
            name="g_i >= (l / gamma1) sum_j a_ij gamma2",
            applicable=True,
            passed=bool(np.all(slack >= 0)),
            margin=float(slack.min()),
        )
    else:
        gain = ConditionResult(
            name="g_i >= (l / gamma1) sum_j a_ij gamma2",
            applicable=False,
            passed=False,
            margin=None,
            detail=f"gamma1 = {bounds.gamma1} <= 0",
        )

    return Theorem2Report(
        eps_bar=bounds.eps_bar,
        prf_bounds=bounds,
        lambda_max=lam_max,
        cue_condition=cue,
        gain_condition=gain,
    )


def _check_outer(eps_bar: float) -> None:
    if not HALF_PI <= eps_bar < math.pi:
        raise DomainError(f"eps_bar must lie in [pi/2, pi), got {eps_bar}")


def check_theorem2(
    topo: Topology,
    qg: PhaseResponseFunction,
    ql: PhaseResponseFunction,
    eps_bar: float,
    grid_points: int = 10_000,
) -> Theorem2Report:
    """Evaluate both outer-regime inequalities with their numeric margins.

    Raises:
        DomainError: If eps_bar is outside [pi/2, pi)
    """
    _check_outer(eps_bar)
    bounds = compute_bounds(qg, ql, eps_bar, grid_points)
    return _theorem2(topo, bounds, lambda_max(topo))


def alpha2(
    topo: Topology,
    qg: PhaseResponseFunction,
    ql: PhaseResponseFunction,
    eps_bar: float,
    grid_points: int = 10_000,
) -> RateBounds:
    """Rate bound (sigma3 g_min - sigma4 l lambda_max) / T for eps_bar in [pi/2, pi).

    A nonpositive value is returned as is; it means no guarantee.

    Raises:
        DomainError: If eps_bar is outside [pi/2, pi)
    """
    _check_outer(eps_bar)
    bounds = compute_bounds(qg, ql, eps_bar, grid_points)
    lam_max = lambda_max(topo)
    value = (bounds.sigma3 * topo.g_min - bounds.sigma4 * topo.local_strength * lam_max) / topo.period

    conditions = _theorem2(topo, bounds, lam_max)
    result = RateBounds(
        regime=OUTSIDE_HALF_PI,
        prf_bounds=bounds,
        period=topo.period,
        alpha2=float(value),
        lambda_max=lam_max,
        guarantee=value > 0 and conditions.passed,
    )
    if value <= 0:
        result.notes.append("alpha2 <= 0: no rate guarantee")
    if not conditions.gain_condition.passed:
        result.notes.append("per-node gain condition fails")
    for note in result.notes:
        logger.info(f"alpha2 on '{topo.name}': {note}")
    return result


def rate_bounds(
    topo: Topology,
    qg: PhaseResponseFunction,
    ql: PhaseResponseFunction,
    eps_bar: float,
    grid_points: int = 10_000,
) -> RateBounds:
    """Pick alpha1 or alpha2 by the regime eps_bar falls in."""
    if eps_bar < HALF_PI:
        return alpha1(topo, qg, ql, eps_bar, grid_points)
    return alpha2(topo, qg, ql, eps_bar, grid_points)


def sync_time_bound(
    topo: Topology,
    qg: PhaseResponseFunction,
    ql: PhaseResponseFunction,
    xi0: Any,
    sync_tol: float,
    grid_points: int = 2000,
) -> Optional[float]:
    """Time for exp(-alpha1 t) ||xi0||_2 to fall below sync_tol.

    alpha1 is taken on the box ||xi||_inf <= ||xi0||_inf. Returns None when
    the start or the topology is outside the guarantee.
    """
    xi0 = np.asarray(xi0, dtype=float)
    eps_bar = float(np.max(np.abs(xi0)))
    if eps_bar < sync_tol:
        return 0.0
    if eps_bar >= HALF_PI or not check_theorem1(topo).passed:
        return None
    rate = alpha1(topo, qg, ql, eps_bar, grid_points).alpha1
    if rate <= 0:
        return None
    return math.log(float(np.linalg.norm(xi0)) / sync_tol) / rate


def alpha1_leaderless(
    topo: Topology,
    ql: PhaseResponseFunction,
    eps_bar: float,
    grid_points: int = 10_000,
) -> float:
    """Experimental: sigma2 l lambda_2(L) / T on the mean-zero subspace.

    Applies to networks without a cue, where only the spread of xi decays.
    """
    if eps_bar >= HALF_PI:
        raise DomainError(f"alpha1_leaderless needs eps_bar < pi/2, got {eps_bar}")
    if topo.n < 2:
        return 0.0
    bounds = compute_bounds(ql, ql, eps_bar, grid_points)
    values, _ = symmetric_eigen(laplacian(topo))
    return float(bounds.sigma2 * topo.local_strength * values[1] / topo.period)


@dataclass
class MonotonicityReport:
    """alpha1 along increasing cue gain and decreasing tanh epsilon."""

    eps_bar: float
    g_values: list[float]
    alpha_by_g: list[float]
    eps_values: list[float] = field(default_factory=list)
    alpha_by_eps: list[float] = field(default_factory=list)

    @staticmethod
    def _nondecreasing(values: Sequence[float]) -> bool:
        return all(b >= a - 1e-12 * max(1.0, abs(a)) for a, b in zip(values, values[1:]))

    @property
    def g_monotone(self) -> bool:
        return self._nondecreasing(self.alpha_by_g)

    @property
    def eps_monotone(self) -> bool:
        return self._nondecreasing(self.alpha_by_eps)

    @property
    def passed(self) -> bool:
        return self.g_monotone and self.eps_monotone

    def to_dict(self) -> dict[str, Any]:
        return {
            "passed": self.passed,
            "eps_bar": self.eps_bar,
            "g_values": self.g_values,
            "alpha_by_g": self.alpha_by_g,
            "g_monotone": self.g_monotone,
            "eps_values": self.eps_values,
            "alpha_by_eps": self.alpha_by_eps,
            "eps_monotone": self.eps_monotone,
        }


def theorem4_sweep(
    topo: Topology,
    qg: PhaseResponseFunction,
    ql: PhaseResponseFunction,
    eps_bar: float,
    g_values: Sequence[float],
    eps_values: Optional[Sequence[float]] = None,
    grid_points: int = 10_000,
) -> MonotonicityReport:
    """Check that alpha1 does not drop as the cue gain grows or tanh epsilon shrinks.

    Gains in g_values are assigned to the nodes attached to the cue in topo
    (every node when none is attached). Epsilons are visited in descending
    order with qg replaced by TanhPrf(epsilon).
    """
    if eps_bar >= HALF_PI:
        raise DomainError(f"theorem4_sweep needs eps_bar < pi/2, got {eps_bar}")

    attached = topo.attached or list(range(topo.n))
    g_sorted = sorted(float(g) for g in g_values)
    alpha_by_g = []
    for g in g_sorted:
        gains = np.zeros(topo.n)
        gains[attached] = g
        alpha_by_g.append(alpha1(topo.with_gains(gains), qg, ql, eps_bar, grid_points).alpha1)

    eps_sorted = sorted((float(e) for e in eps_values or []), reverse=True)
    alpha_by_eps = [alpha1(topo, TanhPrf(e), ql, eps_bar, grid_points).alpha1 for e in eps_sorted]

    report = MonotonicityReport(
        eps_bar=eps_bar,
        g_values=g_sorted,
        alpha_by_g=alpha_by_g,
        eps_values=eps_sorted,
        alpha_by_eps=alpha_by_eps,
    )
    logger.info(f"Monotonicity sweep on '{topo.name}': g_monotone={report.g_monotone}, eps_monotone={report.eps_monotone}")
    return report
