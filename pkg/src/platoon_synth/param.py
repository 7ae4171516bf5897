"""
Parameterizations of the box-constrained, locally stabilizing gain set.

The constrained charts work in three layers:

* ``kappa`` in R^4 is squashed coordinate-wise to ``psi`` in [0, 1]^4 by a logistic
  function with steepness ``zeta``;
* ``psi`` selects intermediate coordinates ``(x, y, z, w)`` as convex combinations
  of lower/upper bounds that depend on the coordinates already chosen;
* ``(x, y, z, w)`` map to the gains ``k1..k4``.

``corollary1_map`` guarantees local stability and the box. ``corollary2_map`` adds
the zero-frequency curvature condition ``eta >= 0``. ``kpr_map`` is the simple
box-only chart used by the first synthesis stage. Each extraction function inverts
its chart sequentially.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from platoon_synth.exceptions import ConfigurationError, InfeasibleBox, NotInManifold
from platoon_synth.model import Gains, VehicleParams

logger = logging.getLogger(__name__)

DEFAULT_EPSILON = 1e-9
DEFAULT_ZETA = 5.0
DEFAULT_NU = 5.0

# clamp applied to unit-interval ratios before taking logarithms
EXTRACTION_CLAMP = 1e-12
# relative distance outside an interval that still counts as its endpoint
EXTRACTION_TOLERANCE = 1e-9

GAIN_NAMES = ("k1", "k2", "k3", "k4")


def _vector4(values: Sequence[float], name: str) -> np.ndarray:
    array = np.asarray(values, dtype=float)
    if array.shape != (4,):
        raise ConfigurationError(f"{name} must have 4 entries, got shape {array.shape}")
    if not np.all(np.isfinite(array)):
        raise ConfigurationError(f"{name} must be finite: {array.tolist()}")
    return array


@dataclass(frozen=True)
class BoxBounds:
    """
    Lower and upper bounds on ``[k1, k2, k3, k4]``.

    An empty ``k1`` interval is accepted here and reported as ``InfeasibleBox`` by
    ``ensure_nonempty``; inverted bounds on ``k2..k4`` are configuration errors.
    """

    lower: Tuple[float, float, float, float]
    upper: Tuple[float, float, float, float]

    def __post_init__(self) -> None:
        lower = _vector4(self.lower, "Lower bounds")
        upper = _vector4(self.upper, "Upper bounds")
        for i, (lo, hi) in enumerate(zip(lower, upper)):
            if i > 0 and lo > hi:
                raise ConfigurationError(
                    f"Bound for {GAIN_NAMES[i]}: lower {lo} exceeds upper {hi}"
                )
        object.__setattr__(self, "lower", tuple(float(v) for v in lower))
        object.__setattr__(self, "upper", tuple(float(v) for v in upper))

    @classmethod
    def symmetric(cls, radius: float) -> "BoxBounds":
        """Box ``k1 in [0, r]`` and ``k2..k4 in [-r, r]``."""
        return cls(lower=(0.0, -radius, -radius, -radius), upper=(radius,) * 4)

    def ensure_nonempty(self, epsilon: float = DEFAULT_EPSILON) -> None:
        """Raise InfeasibleBox when no positive spacing gain fits the box."""
        k1_low = max(epsilon, self.lower[0])
        if self.upper[0] < k1_low:
            raise InfeasibleBox("k1", k1_low, self.upper[0], "k1 must be positive")

    def contains(self, k: Gains, tolerance: float = 1e-12) -> bool:
        values = k.as_array()
        return bool(
            np.all(values >= np.asarray(self.lower) - tolerance)
            and np.all(values <= np.asarray(self.upper) + tolerance)
        )

    def to_dict(self) -> Dict[str, Any]:
        return {"lower": list(self.lower), "upper": list(self.upper)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "BoxBounds":
        return cls(lower=tuple(data["lower"]), upper=tuple(data["upper"]))


@dataclass(frozen=True)
class XYZW:
    """Intermediate coordinates of the stability-region parameterization."""

    x: float
    y: float
    z: float
    w: Optional[float] = None

    def intermediate_term(self, p: VehicleParams) -> float:
        """``-tau^2 x / 2 + tau y - T x / (K y)``, shared by the z and w bounds."""
        return (
            -(p.tau**2) * self.x / 2.0
            + p.tau * self.y
            - p.T * self.x / (p.K * self.y)
        )

    def to_gains(self, p: VehicleParams, k4: Optional[float] = None) -> Gains:
        """
        Map to gains. ``k4`` comes from ``w`` when present, otherwise it must be
        supplied.
        """
        k1 = self.x
        k2 = -p.tau * self.x + self.y
        k3 = (-p.T * self.x + self.y) / (p.K * self.y) - self.z
        if self.w is not None:
            k4 = -self.intermediate_term(p) + self.z + self.w
        elif k4 is None:
            raise ConfigurationError("k4 is required when w is not parameterized")
        return Gains(k1, k2, k3, k4)


class Chart(Enum):
    """Constrained parameterization used by the second synthesis stage."""

    COROLLARY1 = "corollary1"
    COROLLARY2 = "corollary2"


def sigmoid(beta: float, zeta: float = DEFAULT_ZETA) -> float:
    """Logistic squashing ``1 / (1 + exp(-zeta beta))``."""
    t = zeta * beta
    if t >= 0:
        return 1.0 / (1.0 + math.exp(-t))
    e = math.exp(t)
    return e / (1.0 + e)


def sigmoid_inverse(psi: float, zeta: float = DEFAULT_ZETA) -> float:
    """Inverse of :func:`sigmoid`; ``psi`` is clamped into ``[delta, 1 - delta]``."""
    psi = min(max(psi, EXTRACTION_CLAMP), 1.0 - EXTRACTION_CLAMP)
    return math.log(psi / (1.0 - psi)) / zeta


def rho(beta: float, nu: float = DEFAULT_NU) -> float:
    """Rational squashing ``1 / (1 + nu beta^2)`` onto ``(0, 1]``."""
    return 1.0 / (1.0 + nu * beta * beta)


def _blend(psi: float, lower: float, upper: float) -> float:
    return (1.0 - psi) * lower + psi * upper


def _check_interval(name: str, lower: float, upper: float, reason: str = "") -> None:
    if lower > upper:
        raise InfeasibleBox(name, lower, upper, reason)


def _check_psi(psi: Sequence[float], count: int) -> Tuple[float, ...]:
    if len(psi) < count:
        raise ConfigurationError(f"Expected {count} psi values, got {len(psi)}")
    values = tuple(float(v) for v in psi[:count])
    for i, v in enumerate(values, start=1):
        if not 0.0 <= v <= 1.0:
            raise ConfigurationError(f"psi{i} = {v} outside [0, 1]")
    return values


def _x_bounds(b: BoxBounds, eps: float) -> Tuple[float, float]:
    x_lower = max(eps, b.lower[0])
    x_upper = b.upper[0]
    _check_interval("x", x_lower, x_upper, "no positive k1 inside the box")
    return x_lower, x_upper


def _y_bounds(
    x: float, p: VehicleParams, b: BoxBounds, eps: float, quadratic: bool
) -> Tuple[float, float]:
    denom = -p.K * b.lower[2] + 1.0 - p.K * eps
    if denom <= 0:
        raise InfeasibleBox(
            "k3", reason=f"k3 lower bound {b.lower[2]} leaves no 1/K - k3 > 0"
        )
    candidates = [eps, p.tau * x + b.lower[1], p.T * x / denom]
    if quadratic:
        candidates.append(_quadratic_root(x, p, b, eps))
    y_lower = max(candidates)
    y_upper = p.tau * x + b.upper[1]
    _check_interval("y", y_lower, y_upper)
    return y_lower, y_upper


def _quadratic_root(x: float, p: VehicleParams, b: BoxBounds, eps: float) -> float:
    """
    Positive root of ``tau y^2 - xi y - T x / K``.

    ``xi = tau^2 x / 2 + eps - k4u``.
    """
    xi = p.tau**2 * x / 2.0 + eps - b.upper[3]
    c = p.T * x / p.K
    sqrt_delta = math.sqrt(xi * xi + 4.0 * p.tau * c)
    if xi > 0:
        if p.tau == 0:
            raise InfeasibleBox(
                "y", reason="zero time gap with xi > 0 leaves no eta >= 0 solution"
            )
        return (xi + sqrt_delta) / (2.0 * p.tau)
    if sqrt_delta - xi == 0:
        raise InfeasibleBox("y", reason="k4 upper bound leaves no eta >= 0 solution")
    return 2.0 * c / (sqrt_delta - xi)


def _z_base(x: float, y: float, p: VehicleParams) -> float:
    """``(-T x + y) / (K y)``, equal to ``1/K - T x / (K y)``."""
    return (-p.T * x + y) / (p.K * y)


def _z_bounds(
    x: float, y: float, p: VehicleParams, b: BoxBounds, eps: float, lemma: bool
) -> Tuple[float, float]:
    base = _z_base(x, y, p)
    z_lower = max(eps, base - b.upper[2])
    z_upper = base - b.lower[2]
    if lemma:
        z_upper = min(z_upper, XYZW(x, y, 0.0).intermediate_term(p) + b.upper[3])
    _check_interval("z", z_lower, z_upper)
    return z_lower, z_upper


def _w_bounds(
    x: float, y: float, z: float, p: VehicleParams, b: BoxBounds
) -> Tuple[float, float]:
    c = XYZW(x, y, z).intermediate_term(p)
    w_lower = max(0.0, c - z + b.lower[3])
    w_upper = c - z + b.upper[3]
    _check_interval("w", w_lower, w_upper)
    return w_lower, w_upper


def prop1_map(
    psi: Sequence[float], p: VehicleParams, b: BoxBounds, eps: float = DEFAULT_EPSILON
) -> XYZW:
    """
    Map ``(psi1, psi2, psi3)`` to ``(x, y, z)`` whose gains satisfy local stability
    and the k1..k3 box constraints.

    Raises:
        InfeasibleBox: If any lower bound exceeds its upper bound
    """
    psi1, psi2, psi3 = _check_psi(psi, 3)
    x = _blend(psi1, *_x_bounds(b, eps))
    y = _blend(psi2, *_y_bounds(x, p, b, eps, quadratic=False))
    z = _blend(psi3, *_z_bounds(x, y, p, b, eps, lemma=False))
    return XYZW(x=x, y=y, z=z)


def prop2_map(
    psi: Sequence[float], p: VehicleParams, b: BoxBounds, eps: float = DEFAULT_EPSILON
) -> XYZW:
    """
    Map ``psi`` to ``(x, y, z, w)`` whose gains also satisfy the k4 box and the
    necessary condition ``eta >= 0``.

    Raises:
        InfeasibleBox: If any lower bound exceeds its upper bound
    """
    psi1, psi2, psi3, psi4 = _check_psi(psi, 4)
    x = _blend(psi1, *_x_bounds(b, eps))
    y = _blend(psi2, *_y_bounds(x, p, b, eps, quadratic=True))
    z = _blend(psi3, *_z_bounds(x, y, p, b, eps, lemma=True))
    w = _blend(psi4, *_w_bounds(x, y, z, p, b))
    return XYZW(x=x, y=y, z=z, w=w)


def _psi_of(kappa: Sequence[float], zeta: float) -> Tuple[float, ...]:
    values = _vector4(kappa, "kappa")
    return tuple(sigmoid(float(v), zeta) for v in values)


def corollary1_map(
    kappa: Sequence[float],
    p: VehicleParams,
    b: BoxBounds,
    zeta: float = DEFAULT_ZETA,
    eps: float = DEFAULT_EPSILON,
) -> Gains:
    """Gains from ``kappa`` under local stability and the box; k4 spans its box."""
    psi = _psi_of(kappa, zeta)
    k4 = _blend(psi[3], b.lower[3], b.upper[3])
    return prop1_map(psi[:3], p, b, eps).to_gains(p, k4=k4)


def corollary2_map(
    kappa: Sequence[float],
    p: VehicleParams,
    b: BoxBounds,
    zeta: float = DEFAULT_ZETA,
    eps: float = DEFAULT_EPSILON,
) -> Gains:
    """Gains from ``kappa`` under local stability, the box and ``eta >= 0``."""
    return prop2_map(_psi_of(kappa, zeta), p, b, eps).to_gains(p)


def manifold_coordinates(
    k: Gains, p: VehicleParams
) -> Tuple[float, float, float, float]:
    """Values ``phi1..phi4`` of ``(x, y, z, w)`` implied by a gain vector."""
    phi1 = k.k1
    phi2 = p.tau * k.k1 + k.k2
    if phi2 == 0:
        phi3 = -math.inf
    else:
        phi3 = -p.T * k.k1 / (p.K * phi2) + 1.0 / p.K - k.k3
    phi4 = p.tau**2 / 2.0 * k.k1 + p.tau * k.k2 + k.k3 + k.k4 - 1.0 / p.K
    return phi1, phi2, phi3, phi4


def _unit_ratio(coordinate: int, phi: float, lower: float, upper: float) -> float:
    """
    Position of ``phi`` inside ``(lower, upper)`` as a clamped ratio.

    Values within ``EXTRACTION_TOLERANCE`` of an endpoint, relative to the size of
    the bounds, are clamped to ``[EXTRACTION_CLAMP, 1 - EXTRACTION_CLAMP]``.
    """
    width = upper - lower
    if width <= 1e-15 * max(1.0, abs(lower), abs(upper)):
        # collapsed interval: any interior psi reproduces the bound
        if abs(phi - lower) <= 1e-9 * max(1.0, abs(lower)):
            return 0.5
        raise NotInManifold(coordinate, math.nan, "interval collapsed to a point")
    ratio = (phi - lower) / width
    slack = EXTRACTION_TOLERANCE * max(1.0, abs(lower), abs(upper))
    if not (math.isfinite(phi) and lower - slack <= phi <= upper + slack):
        raise NotInManifold(
            coordinate, ratio, f"value {phi:.6g} not inside ({lower:.6g}, {upper:.6g})"
        )
    return min(max(ratio, EXTRACTION_CLAMP), 1.0 - EXTRACTION_CLAMP)


def _extract_xyz(
    phi: Tuple[float, float, float, float],
    p: VehicleParams,
    b: BoxBounds,
    eps: float,
    constrained: bool,
) -> Tuple[Tuple[float, float, float], Tuple[float, float, float]]:
    """Sequentially recover ``psi1..psi3`` and the reconstructed ``(x, y, z)``."""
    x_lower, x_upper = _x_bounds(b, eps)
    psi1 = _unit_ratio(1, phi[0], x_lower, x_upper)
    x = _blend(psi1, x_lower, x_upper)

    y_lower, y_upper = _y_bounds(x, p, b, eps, quadratic=constrained)
    psi2 = _unit_ratio(2, phi[1], y_lower, y_upper)
    y = _blend(psi2, y_lower, y_upper)

    z_lower, z_upper = _z_bounds(x, y, p, b, eps, lemma=constrained)
    psi3 = _unit_ratio(3, phi[2], z_lower, z_upper)
    z = _blend(psi3, z_lower, z_upper)
    return (psi1, psi2, psi3), (x, y, z)


# which psi coordinate an empty intermediate interval belongs to
_BOUND_COORDINATE = {"x": 1, "k1": 1, "y": 2, "k3": 2, "z": 3, "w": 4}


def _extract(
    k: Gains, p: VehicleParams, b: BoxBounds, eps: float, constrained: bool
) -> Tuple[float, float, float, float]:
    phi = manifold_coordinates(k, p)
    try:
        (psi1, psi2, psi3), (x, y, z) = _extract_xyz(phi, p, b, eps, constrained)
    except InfeasibleBox as e:
        coordinate = _BOUND_COORDINATE.get(e.coordinate, 1)
        raise NotInManifold(coordinate, math.nan, f"bounds undefined: {e}") from e

    if constrained:
        try:
            w_lower, w_upper = _w_bounds(x, y, z, p, b)
        except InfeasibleBox as e:
            raise NotInManifold(4, math.nan, f"bounds undefined: {e}") from e
        psi4 = _unit_ratio(4, phi[3], w_lower, w_upper)
    else:
        psi4 = _unit_ratio(4, k.k4, b.lower[3], b.upper[3])
    return psi1, psi2, psi3, psi4


def corollary3_extract(
    k: Gains,
    p: VehicleParams,
    b: BoxBounds,
    zeta: float = DEFAULT_ZETA,
    eps: float = DEFAULT_EPSILON,
) -> np.ndarray:
    """
    Recover ``kappa`` with ``corollary2_map(kappa) == k``.

    Raises:
        NotInManifold: If a coordinate is not strictly inside its interval
    """
    psi = _extract(k, p, b, eps, constrained=True)
    return np.array([sigmoid_inverse(v, zeta) for v in psi])


def corollary1_extract(
    k: Gains,
    p: VehicleParams,
    b: BoxBounds,
    zeta: float = DEFAULT_ZETA,
    eps: float = DEFAULT_EPSILON,
) -> np.ndarray:
    """
    Recover ``kappa`` with ``corollary1_map(kappa) == k``.

    Raises:
        NotInManifold: If a coordinate is not strictly inside its interval
    """
    psi = _extract(k, p, b, eps, constrained=False)
    return np.array([sigmoid_inverse(v, zeta) for v in psi])


def kpr_map(
    mu: Sequence[float],
    b: BoxBounds,
    nu: float = DEFAULT_NU,
    eps: float = DEFAULT_EPSILON,
) -> Gains:
    """Box-only chart ``k_i = (1 - rho(mu_i)) l_i + rho(mu_i) u_i``, ``l1 >= eps``."""
    values = _vector4(mu, "mu")
    lower = list(b.lower)
    lower[0] = max(eps, lower[0])
    gains = [
        _blend(rho(float(m), nu), lo, hi) for m, lo, hi in zip(values, lower, b.upper)
    ]
    return Gains.from_sequence(gains)


ChartMap = Callable[..., Gains]
ChartExtract = Callable[..., np.ndarray]


def chart_functions(chart: Chart) -> Tuple[ChartMap, ChartExtract]:
    """Map and inverse-chart functions of a constrained parameterization."""
    if chart is Chart.COROLLARY1:
        return corollary1_map, corollary1_extract
    return corollary2_map, corollary3_extract
