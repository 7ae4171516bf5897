"""
Exception types raised by platoon-synth.

Every error carries an ``error_class`` string which the command-line interface
reports as a machine-readable code.
"""

from typing import Any, Dict, Optional


class PlatoonSynthError(Exception):
    """Base class for all platoon-synth errors."""

    error_class = "PlatoonSynthError"

    def to_dict(self) -> Dict[str, Any]:
        """Convert the error to a dictionary for result documents."""
        return {"error": self.error_class, "message": str(self)}


class ConfigurationError(PlatoonSynthError, ValueError):
    """Invalid parameters, options, scenario or approximation order."""

    error_class = "ConfigurationError"


class PlantDomainError(PlatoonSynthError, ArithmeticError):
    """Magnitude or frequency response evaluated outside its valid domain."""

    error_class = "PlantDomainError"


class InfeasibleBox(PlatoonSynthError):
    """The box constraints admit no locally stable gain at this parameter point."""

    error_class = "InfeasibleBox"

    def __init__(
        self,
        coordinate: str,
        lower: Optional[float] = None,
        upper: Optional[float] = None,
        reason: str = "",
    ):
        self.coordinate = coordinate
        self.lower = lower
        self.upper = upper
        message = f"Empty interval for {coordinate}"
        if lower is not None and upper is not None:
            message += f": lower {lower:.6g} > upper {upper:.6g}"
        if reason:
            message += f" ({reason})"
        super().__init__(message)


class NotInManifold(PlatoonSynthError):
    """Gains cannot be expressed by the parameterization being inverted."""

    error_class = "NotInManifold"

    def __init__(self, coordinate: int, ratio: float, reason: str = ""):
        self.coordinate = coordinate
        self.ratio = ratio
        message = (
            f"Coordinate {coordinate} outside the parameterization "
            f"(interval ratio {ratio:.6g})"
        )
        if reason:
            message += f": {reason}"
        super().__init__(message)


class Stage1Failed(PlatoonSynthError):
    """No initial point satisfying the string-stability constraint was found."""

    error_class = "Stage1Failed"

    def __init__(self, message: str, best_norm: Optional[float] = None):
        self.best_norm = best_norm
        if best_norm is not None:
            message = f"{message} (best surrogate norm {best_norm:.6g})"
        super().__init__(message)


class CertificationFailed(PlatoonSynthError):
    """A synthesized design did not pass the exact delay-model check."""

    error_class = "CertificationFailed"


class PeakSearchError(PlatoonSynthError, RuntimeError):
    """The high-frequency tail of a magnitude function could not be bounded."""

    error_class = "PeakSearchError"
