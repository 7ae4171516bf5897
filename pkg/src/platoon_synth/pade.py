"""
Diagonal Padé approximation of the delay term and the rational surrogate of F(s).

Polynomials are coefficient tuples in ascending powers of s.
"""

from dataclasses import dataclass
from typing import Any, Dict, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import polynomial as P

from platoon_synth.exceptions import ConfigurationError, PlantDomainError
from platoon_synth.model import DelayTF

MAX_PADE_ORDER = 12
DEFAULT_PADE_ORDER = 5


def _trim(coefficients: Sequence[float]) -> Tuple[float, ...]:
    """Drop trailing (highest-power) zeros, keeping at least the constant term."""
    trimmed = P.polytrim(np.asarray(coefficients, dtype=float), tol=0)
    return tuple(float(c) for c in trimmed)


@dataclass(frozen=True)
class RationalTF:
    """Rational transfer function ``num(s) / den(s)``."""

    num: Tuple[float, ...]
    den: Tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.den or self.den[-1] == 0:
            raise ConfigurationError("Denominator leading coefficient must be nonzero")
        if len(self.num) > len(self.den):
            raise ConfigurationError(
                f"Improper transfer function: deg num {len(self.num) - 1} "
                f"> deg den {len(self.den) - 1}"
            )

    @property
    def strictly_proper(self) -> bool:
        return len(self.num) < len(self.den)

    def magnitude(self, omega: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        """``|num(jw) / den(jw)|``, vectorized over ``omega``."""
        return np.abs(freq_response(self, omega))

    def to_dict(self) -> Dict[str, Any]:
        return {"num": list(self.num), "den": list(self.den)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RationalTF":
        return cls(
            num=tuple(float(c) for c in data["num"]),
            den=tuple(float(c) for c in data["den"]),
        )


def pade_coefficients(N: int) -> np.ndarray:
    """
    Coefficients ``c_k = (2N-k)! N! / ((2N)! k! (N-k)!)`` for ``k = 0..N``.

    Uses the recurrence ``c_{k+1} = c_k (N-k) / ((2N-k)(k+1))``.
    """
    if not isinstance(N, (int, np.integer)) or isinstance(N, bool):
        raise ConfigurationError(f"Padé order must be an integer, got {N!r}")
    if not 1 <= N <= MAX_PADE_ORDER:
        raise ConfigurationError(f"Padé order must be in 1..{MAX_PADE_ORDER}, got {N}")
    c = np.empty(N + 1)
    c[0] = 1.0
    for k in range(N):
        c[k + 1] = c[k] * (N - k) / ((2 * N - k) * (k + 1))
    return c


def pade_exp(theta: float, N: int = DEFAULT_PADE_ORDER) -> RationalTF:
    """
    Diagonal Padé approximant of ``exp(-theta s)``.

    Args:
        theta: Delay in seconds, ``theta >= 0``
        N: Approximation order in ``1..12``

    Returns:
        RationalTF with ``num_k = c_k (-theta)^k`` and ``den_k = c_k theta^k``
    """
    c = pade_coefficients(N)
    if theta < 0:
        raise ConfigurationError(f"Delay must be nonnegative, got {theta}")
    powers = np.arange(N + 1)
    num = c * (-theta) ** powers
    den = c * theta**powers
    return RationalTF(num=_trim(num), den=_trim(den))


def approx_tf(tf: DelayTF, N: int = DEFAULT_PADE_ORDER) -> RationalTF:
    """
    Replace ``exp(-theta s)`` in F(s) with its order-N Padé approximant.

    ``F_hat = (K k4 s^2 P + (K k2 s + K k1) Q) / ((c3 s^3 + c2 s^2 + c1 s + c0) Q)``
    """
    delay = pade_exp(tf.theta, N)
    Pn = np.asarray(delay.num)
    Qn = np.asarray(delay.den)
    a0, a1 = tf.num_static

    delayed = P.polymul([0.0, 0.0, tf.num_delayed], Pn)
    static = P.polymul([a0, a1], Qn)
    num = P.polyadd(delayed, static)
    den = P.polymul(np.asarray(tf.denominator), Qn)
    return RationalTF(num=_trim(num), den=_trim(den))


def freq_response(
    tf: RationalTF, omega: Union[float, np.ndarray]
) -> Union[complex, np.ndarray]:
    """Evaluate ``num(jw) / den(jw)`` with Horner's scheme."""
    s = 1j * np.asarray(omega, dtype=float)
    num = P.polyval(s, np.asarray(tf.num))
    den = P.polyval(s, np.asarray(tf.den))
    if np.any(den == 0):
        raise PlantDomainError("Transfer function has a pole on the imaginary axis")
    response = num / den
    if np.ndim(response) == 0:
        return complex(response)
    return response
