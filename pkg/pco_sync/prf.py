"""Phase response functions and the extremal constants derived from them.

A phase response function (PRF) maps the phase difference seen when a pulse
arrives to the phase shift it induces. Every PRF here is 2*pi-periodic: the
argument is reduced into [-pi, pi] before the family formula is applied.
"""

from __future__ import annotations

import csv
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from .utils import TWO_PI, wrap_phase

logger = logging.getLogger(__name__)

HALF_PI = math.pi / 2.0

# Abscissae closer to zero than this are treated as the origin
ZERO_EPS = 1e-12

FINITE_DIFF_STEP = 1e-6
RATIO_STEP = 1e-3
RATIO_TOL = 1e-12


class InvalidPrfError(ValueError):
    """Raised when a PRF definition cannot be built or evaluated."""


class DomainError(ValueError):
    """Raised when an argument lies outside the interval a formula is valid on."""


class PhaseResponseFunction(ABC):
    """Base class for 2*pi-periodic phase response functions."""

    family: str = ""
    # Tolerance used for the zero and oddness checks
    tolerance: float = 1e-9

    def __call__(self, x: Any) -> Any:
        """Evaluate Q(x) after reducing x into [-pi, pi]."""
        arr = np.asarray(x, dtype=float)
        value = self._evaluate(wrap_phase(arr))
        if arr.ndim == 0:
            return float(value)
        return value

    @abstractmethod
    def _evaluate(self, x: np.ndarray) -> np.ndarray:
        """Evaluate on arguments already reduced into [-pi, pi]."""

    @abstractmethod
    def slope_at_zero(self) -> float:
        """Return lim Q(x)/x as x -> 0."""

    @abstractmethod
    def to_dict(self) -> dict[str, Any]:
        """Serialize to a PRF document accepted by prf_from_dict."""

    def describe(self) -> str:
        params = ", ".join(f"{k}={v}" for k, v in self.to_dict().items() if k != "family")
        return f"{self.family}({params})"


@dataclass(frozen=True)
class TanhPrf(PhaseResponseFunction):
    """Advance-delay PRF Q(x) = tanh(x/eps)/tanh(pi/eps) - x/pi.

    Smaller epsilon gives a steeper response around zero.
    """

    epsilon: float
    family: str = field(default="tanh", init=False)

    def __post_init__(self) -> None:
        if not math.isfinite(self.epsilon) or self.epsilon <= 0:
            raise InvalidPrfError(f"tanh epsilon must be a positive number, got {self.epsilon}")

    def _evaluate(self, x: np.ndarray) -> np.ndarray:
        return np.tanh(x / self.epsilon) / math.tanh(math.pi / self.epsilon) - x / math.pi

    def slope_at_zero(self) -> float:
        return 1.0 / (self.epsilon * math.tanh(math.pi / self.epsilon)) - 1.0 / math.pi

    def to_dict(self) -> dict[str, Any]:
        return {"family": self.family, "epsilon": self.epsilon}


@dataclass(frozen=True)
class SinePrf(PhaseResponseFunction):
    """Sinusoidal PRF Q(x) = amplitude * sin(x)."""

    amplitude: float = 1.0
    family: str = field(default="sine", init=False)

    def __post_init__(self) -> None:
        if not math.isfinite(self.amplitude) or self.amplitude <= 0:
            raise InvalidPrfError(f"sine amplitude must be a positive number, got {self.amplitude}")

    def _evaluate(self, x: np.ndarray) -> np.ndarray:
        return self.amplitude * np.sin(x)

    def slope_at_zero(self) -> float:
        return float(self.amplitude)

    def to_dict(self) -> dict[str, Any]:
        return {"family": self.family, "amplitude": self.amplitude}


@dataclass(frozen=True, eq=False)
class CustomPrf(PhaseResponseFunction):
    """Lookup-table PRF with linear interpolation and periodic wrap.

    Angles must be strictly increasing inside [-pi, pi]. The table is not
    assumed admissible; run validate_admissibility on it.
    """

    angles: np.ndarray
    values: np.ndarray
    source: Optional[str] = None
    family: str = field(default="custom", init=False)
    tolerance: float = field(default=1e-6, init=False)

    def __post_init__(self) -> None:
        angles = np.array(self.angles, dtype=float).ravel()
        values = np.array(self.values, dtype=float).ravel()
        if angles.shape != values.shape:
            raise InvalidPrfError("custom table needs one value per angle")
        if angles.size < 3:
            raise InvalidPrfError(f"custom table needs at least 3 points, got {angles.size}")
        if not (np.all(np.isfinite(angles)) and np.all(np.isfinite(values))):
            raise InvalidPrfError("custom table contains non-finite entries")
        if np.any(np.diff(angles) <= 0):
            raise InvalidPrfError("custom table angles must be strictly increasing")
        if angles[0] < -math.pi or angles[-1] > math.pi:
            raise InvalidPrfError("custom table angles must lie within [-pi, pi]")

        # -pi and pi are the same point on the circle; keep one for the periodic fit
        xp, fp = angles, values
        if angles[0] == -math.pi and angles[-1] == math.pi:
            xp, fp = angles[:-1], values[:-1]

        angles.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "angles", angles)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_xp", xp)
        object.__setattr__(self, "_fp", fp)

    def _evaluate(self, x: np.ndarray) -> np.ndarray:
        return np.interp(x, self._xp, self._fp, period=TWO_PI)

    def slope_at_zero(self) -> float:
        h = FINITE_DIFF_STEP
        return (self(h) - self(-h)) / (2.0 * h)

    def to_dict(self) -> dict[str, Any]:
        if self.source:
            return {"family": self.family, "table": self.source}
        return {
            "family": self.family,
            "table": [[float(a), float(v)] for a, v in zip(self.angles, self.values)],
        }

    @classmethod
    def from_csv(cls, filepath: Path) -> "CustomPrf":
        """Load a two-column (angle_rad, value) table; a header row is optional.

        Raises:
            InvalidPrfError: If a row cannot be parsed or the table is invalid
        """
        angles: list[float] = []
        values: list[float] = []
        with open(filepath, "r", encoding="utf-8", newline="") as f:
            for line_no, row in enumerate(csv.reader(f), 1):
                cells = [c.strip() for c in row if c.strip()]
                if not cells or cells[0].startswith("#"):
                    continue
                try:
                    angle, value = float(cells[0]), float(cells[1])
                except (ValueError, IndexError):
                    if line_no == 1:
                        continue  # header
                    raise InvalidPrfError(f"{filepath}:{line_no}: expected two numeric columns, got {row}")
                angles.append(angle)
                values.append(value)
        logger.debug(f"Loaded {len(angles)} PRF table points from {filepath}")
        return cls(np.array(angles), np.array(values), source=str(filepath))


def prf_from_dict(data: dict[str, Any], base_dir: Optional[Path] = None) -> PhaseResponseFunction:
    """Build a PRF from a document such as {"family": "tanh", "epsilon": 0.4}.

    Args:
        data: PRF document
        base_dir: Directory relative table paths are resolved against

    Returns:
        PhaseResponseFunction instance

    Raises:
        InvalidPrfError: For unknown families, missing or unknown keys
    """
    if not isinstance(data, dict):
        raise InvalidPrfError(f"PRF definition must be a mapping, got {data!r}")
    family = str(data.get("family", "")).lower()
    allowed = {"tanh": {"epsilon"}, "sine": {"amplitude"}, "custom": {"table"}}
    if family not in allowed:
        raise InvalidPrfError(f"Unknown PRF family: {data.get('family')!r} (expected tanh, sine or custom)")
    unknown = set(data) - allowed[family] - {"family"}
    if unknown:
        raise InvalidPrfError(f"Unknown keys for {family} PRF: {', '.join(sorted(unknown))}")

    try:
        if family == "tanh":
            return TanhPrf(float(data["epsilon"]))
        if family == "sine":
            return SinePrf(float(data.get("amplitude", 1.0)))
        table = data["table"]
    except KeyError as e:
        raise InvalidPrfError(f"{family} PRF is missing {e}") from e
    except (TypeError, ValueError) as e:
        if isinstance(e, InvalidPrfError):
            raise
        raise InvalidPrfError(f"Invalid {family} PRF parameters: {e}") from e

    if isinstance(table, (str, Path)):
        path = Path(table)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return CustomPrf.from_csv(path)
    try:
        points = np.array(table, dtype=float)
    except (TypeError, ValueError) as e:
        raise InvalidPrfError(f"custom table must be a list of [angle, value] pairs: {e}") from e
    if points.ndim != 2 or points.shape[1] != 2:
        raise InvalidPrfError("custom table must be a list of [angle, value] pairs")
    return CustomPrf(points[:, 0], points[:, 1])


def evaluate(prf: PhaseResponseFunction, x: Any) -> Any:
    """Evaluate a PRF at x (radians, any real)."""
    if not np.all(np.isfinite(np.asarray(x, dtype=float))):
        raise DomainError("PRF argument must be finite")
    return prf(x)


def slope_at_zero(prf: PhaseResponseFunction) -> float:
    """Return the limit of Q(x)/x at the origin."""
    return prf.slope_at_zero()


def max_slope(prf: PhaseResponseFunction, grid_points: int = 10_000) -> float:
    """Largest |dQ/dx| over one period, by finite differences on a grid."""
    x = np.linspace(-math.pi, math.pi, grid_points + 1)
    slopes = np.abs(np.diff(prf(x))) / (x[1] - x[0])
    return float(max(np.max(slopes), abs(prf.slope_at_zero())))


def ratio(prf: PhaseResponseFunction, x: np.ndarray) -> np.ndarray:
    """Q(x)/x with the origin replaced by slope_at_zero."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    near_zero = np.abs(x) <= ZERO_EPS
    nonzero = ~near_zero
    out[nonzero] = prf(x[nonzero]) / x[nonzero]
    out[near_zero] = prf.slope_at_zero()
    return out


@dataclass
class AdmissibilityReport:
    """Outcome of the zero, oddness and sign checks on a grid."""

    prf: str
    grid_points: int
    tolerance: float
    zero_value: float
    oddness_violations: list[float] = field(default_factory=list)
    sign_violations: list[float] = field(default_factory=list)

    @property
    def zero_ok(self) -> bool:
        return abs(self.zero_value) <= self.tolerance

    @property
    def passed(self) -> bool:
        return self.zero_ok and not self.oddness_violations and not self.sign_violations

    def to_dict(self, max_listed: int = 20) -> dict[str, Any]:
        return {
            "prf": self.prf,
            "passed": self.passed,
            "grid_points": self.grid_points,
            "tolerance": self.tolerance,
            "zero_value": self.zero_value,
            "zero_ok": self.zero_ok,
            "oddness_violation_count": len(self.oddness_violations),
            "oddness_violations": self.oddness_violations[:max_listed],
            "sign_violation_count": len(self.sign_violations),
            "sign_violations": self.sign_violations[:max_listed],
        }


def admissibility_grid(grid_points: int) -> np.ndarray:
    """Uniform grid over the open interval (-pi, pi)."""
    return np.linspace(-math.pi, math.pi, grid_points + 2)[1:-1]


def validate_admissibility(prf: PhaseResponseFunction, grid_points: int = 10_000) -> AdmissibilityReport:
    """Check Q(0) = 0, oddness and x*Q(x) > 0 on a uniform grid over (-pi, pi).

    Args:
        prf: Phase response function to check
        grid_points: Number of interior grid points (at least 100)

    Returns:
        AdmissibilityReport; a failing PRF yields a failed report, not an exception
    """
    if grid_points < 100:
        raise ValueError(f"grid_points must be at least 100, got {grid_points}")

    xs = admissibility_grid(grid_points)
    q = prf(xs)
    q_neg = prf(-xs)

    odd_bad = np.abs(q + q_neg) >= prf.tolerance
    nonzero = np.abs(xs) > ZERO_EPS
    sign_bad = nonzero & (xs * q <= 0)

    report = AdmissibilityReport(
        prf=prf.describe(),
        grid_points=grid_points,
        tolerance=prf.tolerance,
        zero_value=prf(0.0),
        oddness_violations=xs[odd_bad].tolist(),
        sign_violations=xs[sign_bad].tolist(),
    )
    if report.passed:
        logger.debug(f"{report.prf} is admissible on {grid_points} points")
    else:
        logger.info(
            f"{report.prf} failed admissibility: zero_ok={report.zero_ok}, "
            f"{len(report.oddness_violations)} oddness, {len(report.sign_violations)} sign violations"
        )
    return report


@dataclass(frozen=True)
class PrfBounds:
    """Extremal constants of Q_g and Q_l over a deviation box of half-width eps_bar."""

    eps_bar: float
    sigma1: float
    sigma2: float
    sigma3: float
    sigma4: float
    gamma1: float
    gamma2: float
    grid_points: int

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def compute_bounds(
    qg: PhaseResponseFunction,
    ql: PhaseResponseFunction,
    eps_bar: float,
    grid_points: int = 10_000,
) -> PrfBounds:
    """Compute sigma1..sigma4, gamma1 and gamma2 by dense grid search.

    Q_l is searched over [-2*eps_bar, 2*eps_bar] through its periodic
    extension. The origin sample of Q(x)/x uses slope_at_zero.

    Args:
        qg: Global-cue PRF
        ql: Local PRF
        eps_bar: Half-width of the deviation box, in [0, pi)
        grid_points: Samples per interval (at least 1000)

    Returns:
        PrfBounds

    Raises:
        DomainError: If eps_bar is outside [0, pi)
    """
    if not math.isfinite(eps_bar) or eps_bar < 0 or eps_bar >= math.pi:
        raise DomainError(f"eps_bar must lie in [0, pi), got {eps_bar}")
    if grid_points < 1000:
        raise ValueError(f"grid_points must be at least 1000, got {grid_points}")

    def symmetric(width: float) -> np.ndarray:
        if width == 0:
            return np.zeros(1)
        return np.append(np.linspace(-width, width, grid_points), 0.0)

    rg = ratio(qg, symmetric(eps_bar))
    rl = ratio(ql, symmetric(2.0 * eps_bar))

    sigma1 = float(rg.min())
    sigma2 = float(rl.min())
    sigma4 = float((-rl).max())
    if eps_bar >= HALF_PI:
        # Q_l(+-pi) = 0 makes this nonnegative; rounding in Q_l(pi) can dip below
        sigma4 = max(sigma4, 0.0)

    # Q_g(0) = 0 would pin a minimum over [0, eps_bar] to zero; start at min(pi/2, eps_bar)
    lo = min(HALF_PI, eps_bar)
    gamma1 = float(np.min(qg(np.linspace(lo, eps_bar, grid_points))))
    gamma2 = float(np.max(-ql(np.linspace(0.0, 2.0 * eps_bar, grid_points))))

    bounds = PrfBounds(
        eps_bar=float(eps_bar),
        sigma1=sigma1,
        sigma2=sigma2,
        sigma3=sigma1,
        sigma4=sigma4,
        gamma1=gamma1,
        gamma2=gamma2,
        grid_points=grid_points,
    )
    logger.debug(f"Bounds for {qg.describe()} / {ql.describe()} at eps_bar={eps_bar:.4f}: {bounds}")
    return bounds


def theorem5_f(x: Any, epsilon: float) -> Any:
    """Negativity certificate for the tanh family, scaled by exp(-2*pi/epsilon).

    The unscaled value is
    [pi(e^(2x/eps) - e^(-2x/eps)) - x(e^(2pi/eps) - e^(-2pi/eps))] / x,
    which overflows for small epsilon. The positive scale factor leaves the
    sign unchanged.
    """
    x = np.asarray(x, dtype=float)
    a = 2.0 / epsilon
    num = math.pi * (np.exp(a * (x - math.pi)) - np.exp(-a * (x + math.pi))) - x * (
        1.0 - math.exp(-2.0 * a * math.pi)
    )
    return num / x


@dataclass
class EpsilonCheck:
    """Negativity and ratio-monotonicity results for one epsilon."""

    epsilon: float
    max_f: float
    f_violations: list[float] = field(default_factory=list)
    ratio_violations: list[float] = field(default_factory=list)
    unresolved: int = 0

    @property
    def passed(self) -> bool:
        return not self.f_violations and not self.ratio_violations


@dataclass
class Theorem5Report:
    """Numerical check that tanh PRFs respond more strongly as epsilon shrinks."""

    x_grid: int
    checks: list[EpsilonCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self, max_listed: int = 20) -> dict[str, Any]:
        return {
            "passed": self.passed,
            "x_grid": self.x_grid,
            "epsilons": [
                {
                    "epsilon": c.epsilon,
                    "passed": c.passed,
                    "max_f": c.max_f,
                    "f_violation_count": len(c.f_violations),
                    "f_violations": c.f_violations[:max_listed],
                    "ratio_violation_count": len(c.ratio_violations),
                    "ratio_violations": c.ratio_violations[:max_listed],
                    "ratio_unresolved": c.unresolved,
                }
                for c in self.checks
            ],
        }


def verify_theorem5_negativity(eps_values: Sequence[float], x_grid: int = 10_000) -> Theorem5Report:
    """Check f(x, eps) < 0 on (-pi, pi) minus the origin, and d(Q(x)/x)/d(eps) < 0.

    The derivative is checked by comparing Q(x)/x at eps and eps*(1 + 1e-3).
    Where both ratios agree to within 1e-12 the comparison is counted as
    unresolved rather than as a violation.

    Args:
        eps_values: Positive tanh epsilons to check
        x_grid: Number of grid points (at least 1000)

    Returns:
        Theorem5Report
    """
    if x_grid < 1000:
        raise ValueError(f"x_grid must be at least 1000, got {x_grid}")

    xs = admissibility_grid(x_grid)
    xs = xs[np.abs(xs) > ZERO_EPS]

    report = Theorem5Report(x_grid=x_grid)
    for eps in eps_values:
        if not math.isfinite(eps) or eps <= 0:
            raise DomainError(f"epsilon must be positive, got {eps}")
        f = theorem5_f(xs, eps)
        r_small = ratio(TanhPrf(eps), xs)
        r_large = ratio(TanhPrf(eps * (1.0 + RATIO_STEP)), xs)
        diff = r_large - r_small

        check = EpsilonCheck(
            epsilon=float(eps),
            max_f=float(f.max()),
            f_violations=xs[f >= 0].tolist(),
            ratio_violations=xs[diff > RATIO_TOL].tolist(),
            unresolved=int(np.count_nonzero(np.abs(diff) <= RATIO_TOL)),
        )
        logger.debug(
            f"eps={eps}: max f={check.max_f:.3e}, "
            f"{len(check.ratio_violations)} ratio violations, {check.unresolved} unresolved"
        )
        report.checks.append(check)
    return report
