"""
Vehicle model, control law and analytic stability conditions.

The CAV state is ``[sigma, dv, a]``: spacing deviation, speed difference with the
preceding vehicle and realized acceleration. The control law is

    u(t) = k1*sigma + k2*dv + k3*a + k4*a_prev(t - theta)

and ``F(s) = a(s) / a_prev(s)`` is the disturbance propagation transfer function.
"""

import cmath
import logging
import math
from dataclasses import dataclass, asdict
from typing import Any, Dict, List, Sequence, Tuple, Union

import numpy as np

from platoon_synth.exceptions import ConfigurationError, PlantDomainError

logger = logging.getLogger(__name__)

# A margin counts as positive only above this value.
MARGIN_TOLERANCE = 1e-12

FloatOrArray = Union[float, np.ndarray]


@dataclass(frozen=True)
class VehicleParams:
    """Plant constants of one vehicle and its V2V communication delay."""

    tau: float  # time gap (s)
    T: float  # actuation lag (s)
    K: float  # realized-acceleration ratio
    theta: float = 0.0  # communication delay (s)

    def __post_init__(self) -> None:
        values = (self.tau, self.T, self.K, self.theta)
        if not all(math.isfinite(v) for v in values):
            raise ConfigurationError(f"Vehicle parameters must be finite: {values}")
        if self.T <= 0:
            raise ConfigurationError(f"Actuation lag T must be positive, got {self.T}")
        if self.K <= 0:
            raise ConfigurationError(f"Ratio K must be positive, got {self.K}")
        if self.tau < 0:
            raise ConfigurationError(f"Time gap tau must be >= 0, got {self.tau}")
        if self.theta < 0:
            raise ConfigurationError(f"Delay theta must be >= 0, got {self.theta}")

    def with_delay(self, theta: float) -> "VehicleParams":
        """Return a copy with a different communication delay."""
        return VehicleParams(tau=self.tau, T=self.T, K=self.K, theta=theta)

    def to_dict(self) -> Dict[str, float]:
        """Convert parameters to dictionary."""
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "VehicleParams":
        """Create VehicleParams from dictionary."""
        return cls(
            tau=float(data["tau"]),
            T=float(data["T"]),
            K=float(data["K"]),
            theta=float(data.get("theta", 0.0)),
        )


@dataclass(frozen=True)
class Gains:
    """Feedback gains ``k1..k3`` and feedforward gain ``k4``."""

    k1: float  # spacing gain (1/s^2)
    k2: float  # speed-difference gain (1/s)
    k3: float  # acceleration gain
    k4: float  # feedforward gain

    @classmethod
    def from_sequence(cls, values: Sequence[float]) -> "Gains":
        """Create gains from ``[k1, k2, k3, k4]``."""
        if len(values) != 4:
            raise ConfigurationError(f"Expected 4 gains, got {len(values)}")
        return cls(*(float(v) for v in values))

    def as_array(self) -> np.ndarray:
        """Return ``[k1, k2, k3, k4]`` as a float array."""
        return np.array([self.k1, self.k2, self.k3, self.k4], dtype=float)

    def as_list(self) -> List[float]:
        return [self.k1, self.k2, self.k3, self.k4]

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Gains":
        return cls(
            k1=float(data["k1"]),
            k2=float(data["k2"]),
            k3=float(data["k3"]),
            k4=float(data["k4"]),
        )


@dataclass(frozen=True)
class StateSpace:
    """Open-loop matrices ``x' = A x + B u + D a_prev``."""

    A: np.ndarray
    B: np.ndarray
    D: np.ndarray

    def closed_loop(self, k: Gains) -> np.ndarray:
        """Return ``A + B [k1 k2 k3]``; ``k4`` only scales the exogenous input."""
        feedback = np.array([k.k1, k.k2, k.k3], dtype=float)
        return self.A + np.outer(self.B, feedback)


@dataclass(frozen=True)
class DelayTF:
    """
    Coefficients of the exact delay transfer function

        F(s) = (K k4 s^2 e^{-theta s} + K k2 s + K k1) / (c3 s^3 + c2 s^2 + c1 s + c0)
    """

    c0: float
    c1: float
    c2: float
    c3: float
    num_static: Tuple[float, float]  # (K*k1, K*k2)
    num_delayed: float  # K*k4
    theta: float

    @classmethod
    def from_gains(cls, p: VehicleParams, k: Gains) -> "DelayTF":
        """Build the transfer function of one vehicle under the given gains."""
        return cls(
            c0=p.K * k.k1,
            c1=p.K * (p.tau * k.k1 + k.k2),
            c2=1.0 - p.K * k.k3,
            c3=p.T,
            num_static=(p.K * k.k1, p.K * k.k2),
            num_delayed=p.K * k.k4,
            theta=p.theta,
        )

    @property
    def denominator(self) -> Tuple[float, float, float, float]:
        """Denominator coefficients in ascending powers of s."""
        return (self.c0, self.c1, self.c2, self.c3)

    def magnitude_coefficients(self) -> Dict[str, float]:
        """Return the even-polynomial coefficients of ``|num|^2`` and ``|den|^2``."""
        a0, a1 = self.num_static
        return {
            "n4": self.num_delayed**2,
            "n2": a1**2,
            "n0": a0**2,
            "d6": self.c3**2,
            "d4": self.c2**2 - 2.0 * self.c3 * self.c1,
            "d2": self.c1**2 - 2.0 * self.c2 * self.c0,
            "d0": self.c0**2,
        }

    def evaluate(self, s: complex) -> complex:
        """Evaluate ``F(s)`` directly, including the exponential delay term."""
        a0, a1 = self.num_static
        num = self.num_delayed * s**2 * cmath.exp(-self.theta * s) + a1 * s + a0
        den = ((self.c3 * s + self.c2) * s + self.c1) * s + self.c0
        if den == 0:
            raise PlantDomainError(f"Transfer function has a pole at s = {s}")
        return complex(num / den)


@dataclass(frozen=True)
class StabilityReport:
    """Local stability verdict from the Hurwitz inequalities and the eigenvalues."""

    margins: Tuple[float, float, float, float]
    hurwitz: bool
    eigenvalues: Tuple[complex, complex, complex]

    @property
    def spectral_abscissa(self) -> float:
        """Largest real part among the closed-loop eigenvalues."""
        return max(ev.real for ev in self.eigenvalues)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "margins": list(self.margins),
            "hurwitz": self.hurwitz,
            "eigenvalues": [[ev.real, ev.imag] for ev in self.eigenvalues],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "StabilityReport":
        margins = tuple(float(m) for m in data["margins"])
        eigenvalues = tuple(complex(re, im) for re, im in data["eigenvalues"])
        return cls(
            margins=margins,  # type: ignore[arg-type]
            hurwitz=bool(data["hurwitz"]),
            eigenvalues=eigenvalues,  # type: ignore[arg-type]
        )


@dataclass(frozen=True)
class TaylorConditions:
    """Small-delay quartic coefficients and the two sufficient sign patterns."""

    p: float
    q: float
    r: float
    case1_ok: bool
    case2_ok: bool

    @property
    def certified(self) -> bool:
        return self.case1_ok or self.case2_ok

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["certified"] = self.certified
        return data


@dataclass(frozen=True)
class ZeroFrequencyLimits:
    """Limits of ``|F(jw)|`` and its first two derivatives as ``w -> 0+``."""

    value: float
    slope: float
    curvature: float


def build_state_space(p: VehicleParams) -> StateSpace:
    """Return the open-loop matrices of one vehicle."""
    A = np.array(
        [
            [0.0, 1.0, -p.tau],
            [0.0, 0.0, -1.0],
            [0.0, 0.0, -1.0 / p.T],
        ]
    )
    B = np.array([0.0, 0.0, p.K / p.T])
    D = np.array([0.0, 1.0, 0.0])
    return StateSpace(A=A, B=B, D=D)


def characteristic_polynomial(p: VehicleParams, k: Gains) -> Tuple[float, ...]:
    """Descending coefficients of ``(T/K)s^3 + (1/K - k3)s^2 + (tau k1 + k2)s + k1``."""
    return (p.T / p.K, 1.0 / p.K - k.k3, p.tau * k.k1 + k.k2, k.k1)


def companion_matrix(coefficients: Sequence[float]) -> np.ndarray:
    """Companion matrix of the monic normalization of a polynomial (descending)."""
    lead = coefficients[0]
    if lead == 0:
        raise ConfigurationError("Leading coefficient must be nonzero")
    monic = np.asarray(coefficients[1:], dtype=float) / lead
    n = monic.size
    C = np.zeros((n, n))
    C[0, :] = -monic
    C[1:, :-1] = np.eye(n - 1)
    return C


def _real_cubic_root(a2: float, a1: float, a0: float) -> float:
    """One real root of ``s^3 + a2 s^2 + a1 s + a0`` by bracketed Newton steps."""

    def f(s: float) -> float:
        return ((s + a2) * s + a1) * s + a0

    def df(s: float) -> float:
        return (3.0 * s + 2.0 * a2) * s + a1

    bound = 1.0 + max(abs(a2), abs(a1), abs(a0))
    lo, hi = -bound, bound
    s = 0.0
    for _ in range(200):
        fs = f(s)
        if fs == 0.0:
            return s
        if fs < 0.0:
            lo = s
        else:
            hi = s
        slope = df(s)
        step = s - fs / slope if slope != 0.0 else 0.5 * (lo + hi)
        # bisect whenever Newton leaves the bracket
        s_next = step if lo < step < hi else 0.5 * (lo + hi)
        if abs(s_next - s) <= 1e-15 * max(1.0, abs(s)):
            return s_next
        s = s_next
    return s


def cubic_roots(
    coefficients: Sequence[float], method: str = "companion"
) -> Tuple[complex, complex, complex]:
    """
    Roots of a real cubic given in descending powers.

    Args:
        coefficients: ``[c3, c2, c1, c0]`` with ``c3 != 0``
        method: ``"companion"`` (eigenvalues of the companion matrix) or
            ``"closed_form"`` (real root plus deflated quadratic)

    Returns:
        The three roots sorted by real part, then imaginary part
    """
    if len(coefficients) != 4:
        raise ConfigurationError("A cubic needs exactly four coefficients")

    roots: List[complex]
    if method == "companion":
        try:
            eigenvalues = np.linalg.eigvals(companion_matrix(coefficients))
            roots = [complex(r) for r in eigenvalues]
        except np.linalg.LinAlgError as e:
            logger.warning(
                f"Companion eigenvalue solver failed ({e}); using closed form"
            )
            return cubic_roots(coefficients, method="closed_form")
    elif method == "closed_form":
        lead = coefficients[0]
        if lead == 0:
            raise ConfigurationError("Leading coefficient must be nonzero")
        a2, a1, a0 = (c / lead for c in coefficients[1:])
        r = _real_cubic_root(a2, a1, a0)
        b1 = a2 + r
        b0 = a1 + r * b1
        disc = cmath.sqrt(b1 * b1 - 4.0 * b0)
        # avoid cancellation between -b1 and the square root
        q = -0.5 * (b1 + (disc if b1 >= 0 else -disc))
        if q == 0:
            second = third = complex(0.0)
        else:
            second, third = q, b0 / q
        roots = [complex(r), complex(second), complex(third)]
    else:
        raise ConfigurationError(f"Unknown cubic root method: {method}")

    roots.sort(key=lambda z: (z.real, z.imag))
    return (roots[0], roots[1], roots[2])


def stability_margins(p: VehicleParams, k: Gains) -> Tuple[float, float, float, float]:
    """Left-hand sides of the four local-stability inequalities."""
    m2 = p.tau * k.k1 + k.k2
    m3 = 1.0 / p.K - k.k3
    return (k.k1, m2, m3, m3 * m2 - (p.T / p.K) * k.k1)


def local_stability(p: VehicleParams, k: Gains) -> StabilityReport:
    """
    Check local stability with the Hurwitz inequalities and cross-check it against
    the roots of the closed-loop characteristic cubic.
    """
    margins = stability_margins(p, k)
    eigenvalues = cubic_roots(characteristic_polynomial(p, k))
    hurwitz = all(m > MARGIN_TOLERANCE for m in margins)

    abscissa = max(ev.real for ev in eigenvalues)
    if hurwitz != (abscissa < 0) and abs(abscissa) > 1e-9:
        logger.warning(
            f"Hurwitz margins {margins} disagree with spectral abscissa {abscissa:.3e}"
        )

    return StabilityReport(margins=margins, hurwitz=hurwitz, eigenvalues=eigenvalues)


def _magnitude(
    tf: DelayTF, omega: FloatOrArray, cos_term: np.ndarray, sin_term: np.ndarray
) -> FloatOrArray:
    w = np.asarray(omega, dtype=float)
    c = tf.magnitude_coefficients()
    a0, a1 = tf.num_static
    w2 = w * w
    g = 2.0 * tf.num_delayed * (-a0 * cos_term + a1 * w * sin_term)
    N = c["n4"] * w2 * w2 + (c["n2"] + g) * w2 + c["n0"]
    D = ((c["d6"] * w2 + c["d4"]) * w2 + c["d2"]) * w2 + c["d0"]
    if np.any(D <= 0):
        raise PlantDomainError(
            "Magnitude denominator is not positive; the plant is degenerate or unstable"
        )
    result = np.sqrt(np.maximum(N, 0.0) / D)
    if np.ndim(result) == 0:
        return float(result)
    return result


def exact_magnitude(tf: DelayTF, omega: FloatOrArray) -> FloatOrArray:
    """``|F(jw)|`` from the closed-form even polynomials, exact in the delay."""
    w = np.asarray(omega, dtype=float)
    return _magnitude(tf, omega, np.cos(tf.theta * w), np.sin(tf.theta * w))


def taylor_magnitude(tf: DelayTF, omega: FloatOrArray) -> FloatOrArray:
    """``|F(jw)|`` with the delay terms replaced by their low-order Taylor series."""
    w = np.asarray(omega, dtype=float)
    tw = tf.theta * w
    return _magnitude(tf, omega, 1.0 - tw**2 / 2.0, tw - tw**3 / 6.0)


def taylor_string_stability(p: VehicleParams, k: Gains) -> TaylorConditions:
    """
    Coefficients of the small-delay quartic ``p w^4 + q w^2 + r`` whose
    nonnegativity is sufficient for string stability, and the two accepted sign
    patterns.
    """
    K, T, tau, theta = p.K, p.T, p.tau, p.theta
    p_coef = T**2 + K**2 * k.k4 * k.k2 * theta**3 / 3.0
    q_coef = (
        -2.0 * K * T * (tau * k.k1 + k.k2)
        + (K * k.k3 - 1.0) ** 2
        - K**2 * k.k4 * (k.k1 * theta**2 + 2.0 * k.k2 * theta + k.k4)
    )
    r_coef = lemma1_eta(p, k)
    case1 = p_coef >= 0 and q_coef >= 0 and r_coef >= 0
    case2 = (
        p_coef >= 0
        and q_coef < 0
        and r_coef >= 0
        and q_coef**2 - 4 * p_coef * r_coef <= 0
    )
    return TaylorConditions(
        p=p_coef, q=q_coef, r=r_coef, case1_ok=bool(case1), case2_ok=bool(case2)
    )


def lemma1_eta(p: VehicleParams, k: Gains) -> float:
    """
    ``eta = 2 K k1 (K (k4 + k3 + tau k2 + tau^2 k1 / 2) - 1)``.

    ``eta >= 0`` is necessary for ``||F||_inf <= 1``.
    """
    inner = k.k4 + k.k3 + p.tau * k.k2 + p.tau**2 * k.k1 / 2.0
    return 2.0 * p.K * k.k1 * (p.K * inner - 1.0)


def zero_frequency_derivatives(p: VehicleParams, k: Gains) -> ZeroFrequencyLimits:
    """Analytic limits of ``|F|``, ``d|F|/dw`` and ``d2|F|/dw2`` at ``w -> 0+``."""
    if k.k1 <= 0:
        raise ConfigurationError("Zero-frequency limits require k1 > 0")
    curvature = -lemma1_eta(p, k) / (p.K**2 * k.k1**2)
    return ZeroFrequencyLimits(value=1.0, slope=0.0, curvature=curvature)
