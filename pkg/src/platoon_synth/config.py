"""
Presets and run configuration.

The presets reproduce the published experiment settings: the plant constants,
the two box constraints and the reference gain sets. ``RunConfig`` is the flat
JSON document read by the command-line interface.
"""

import json
import logging
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional

from platoon_synth.exceptions import ConfigurationError
from platoon_synth.model import Gains, VehicleParams
from platoon_synth.norms import PeakOptions
from platoon_synth.optimize import OptimizerOptions
from platoon_synth.param import BoxBounds, Chart
from platoon_synth.synthesis import Stage1Mode, SynthesisConfig

logger = logging.getLogger(__name__)

THREADS_ENV = "PLATOON_SYNTH_THREADS"

# plant used throughout the experiments
DEFAULT_PARAMS = VehicleParams(tau=1.0, T=0.45, K=1.0, theta=0.1)
LARGE_DELAY_PARAMS = DEFAULT_PARAMS.with_delay(1.5)

CASE1_BOX = BoxBounds(
    lower=(0.0, -1.32, -1.32, -1.32),
    upper=(1.32, 1.32, 1.32, 1.32),
)
CASE2_BOX = BoxBounds(
    lower=(0.0, -2.0, -2.0, -2.0),
    upper=(2.0, 2.0, 2.0, 2.0),
)

# unconstrained design from the small-delay (Taylor) method
K_UNC = Gains(0.92, 1.32, -0.92, 0.72)

# small delay, theta = 0.1
K_STAR_CASE1 = Gains(0.4212, 0.4775, -1.0078, 1.3197)
KAPPA_STAR_CASE1 = (-0.1516, -0.0237, 1.7065, -0.7647)
KAPPA0_CASE1 = (0.0918, -0.0378, -0.2983, -0.1611)
K0_CASE1 = Gains(0.8089, 0.3191, 0.3611, 0.3492)
MU0_CASE1 = (0.3555, 0.3495, 0.3377, 0.3411)

# large delay, theta = 1.5
K_STAR_CASE2 = Gains(1.9696, 1.9953, -0.2273, 0.0234)
KAPPA_STAR_CASE2 = (0.8341, 1.3187, -0.1138, -0.0214)
KAPPA0_CASE2 = (-0.2638, 0.5087, 0.1669, -0.3410)
K0_CASE2 = Gains(0.4219, 1.8308, -1.1174, 0.3717)
MU0_CASE2 = (-0.8649, -0.0940, 0.8405, 0.3706)

NAMED_GAINS: Dict[str, Gains] = {
    "unc": K_UNC,
    "case1": K_STAR_CASE1,
    "case2": K_STAR_CASE2,
    "k0-case1": K0_CASE1,
    "k0-case2": K0_CASE2,
}


def case1_config(**overrides: Any) -> SynthesisConfig:
    """Small-delay synthesis setting."""
    return replace(
        SynthesisConfig(params=DEFAULT_PARAMS, bounds=CASE1_BOX), **overrides
    )


def case2_config(**overrides: Any) -> SynthesisConfig:
    """Large-delay synthesis setting."""
    return replace(
        SynthesisConfig(params=LARGE_DELAY_PARAMS, bounds=CASE2_BOX), **overrides
    )


def thread_count(default: Optional[int] = None) -> Optional[int]:
    """Worker-pool size from ``PLATOON_SYNTH_THREADS``; ``default`` when unset."""
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ConfigurationError(f"{THREADS_ENV} must be an integer, got {raw!r}")
    if value < 1:
        raise ConfigurationError(f"{THREADS_ENV} must be >= 1, got {value}")
    return value


@dataclass
class RunConfig:
    """Flat key-value run configuration mirroring ``SynthesisConfig``."""

    tau: float = DEFAULT_PARAMS.tau
    T: float = DEFAULT_PARAMS.T
    K: float = DEFAULT_PARAMS.K
    theta: float = DEFAULT_PARAMS.theta
    lower: List[float] = field(default_factory=lambda: list(CASE1_BOX.lower))
    upper: List[float] = field(default_factory=lambda: list(CASE1_BOX.upper))
    omega1: float = 0.5
    omega2: float = 2.5
    alpha: float = 1.05
    zeta: float = 5.0
    nu: float = 5.0
    epsilon: float = 1e-9
    pade_order: int = 5
    ss_tolerance: float = 1e-3
    stage1_mode: str = Stage1Mode.OPTIMIZE.value
    sample_count: int = 10000
    kappa_max: float = 3.0
    n_starts: int = 32
    seed: int = 0
    max_iters: int = 2000
    restarts: int = 1
    grid_points: int = 4000
    parameterization: str = Chart.COROLLARY2.value
    gains: Optional[List[float]] = None
    out: Optional[str] = None
    format: str = "json"

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigurationError(
                f"Unknown configuration keys: {', '.join(unknown)}"
            )
        return cls(**data)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @property
    def params(self) -> VehicleParams:
        return VehicleParams(tau=self.tau, T=self.T, K=self.K, theta=self.theta)

    @property
    def bounds(self) -> BoxBounds:
        return BoxBounds(
            lower=tuple(self.lower),  # type: ignore[arg-type]
            upper=tuple(self.upper),  # type: ignore[arg-type]
        )

    def gain_set(self) -> Optional[Gains]:
        return None if self.gains is None else Gains.from_sequence(self.gains)

    def to_synthesis_config(self, max_workers: Optional[int] = None) -> SynthesisConfig:
        """Validated synthesis configuration for this run."""
        if self.format not in ("json", "csv"):
            raise ConfigurationError(f"Unsupported output format: {self.format}")
        try:
            mode = Stage1Mode(self.stage1_mode)
            chart = Chart(self.parameterization)
        except ValueError as e:
            raise ConfigurationError(str(e)) from e
        return SynthesisConfig(
            params=self.params,
            bounds=self.bounds,
            omega1=self.omega1,
            omega2=self.omega2,
            alpha=self.alpha,
            zeta=self.zeta,
            nu=self.nu,
            epsilon=self.epsilon,
            pade_order=self.pade_order,
            ss_tolerance=self.ss_tolerance,
            stage1_mode=mode,
            sample_count=self.sample_count,
            kappa_max=self.kappa_max,
            n_starts=self.n_starts,
            seed=self.seed,
            optimizer=OptimizerOptions(
                max_iters=self.max_iters, restarts=self.restarts, seed=self.seed
            ),
            peak=PeakOptions(grid_points=self.grid_points),
            max_workers=max_workers,
            parameterization=chart,
        )


def load_run_config(path: Optional[Path] = None) -> RunConfig:
    """
    Read a run configuration file.

    Args:
        path: JSON file with flat keys; ``None`` returns the defaults

    Returns:
        RunConfig

    Raises:
        ConfigurationError: If the file is unreadable or has unknown keys
    """
    if path is None:
        return RunConfig()
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigurationError(f"Cannot read configuration {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigurationError(f"Configuration {path} must be a JSON object")
    logger.debug(f"Loaded run configuration from {path}: {sorted(data)}")
    return RunConfig.from_dict(data)
