"""
Two-stage controller synthesis.

Stage 1 finds a string-stable starting point, either by minimizing the global norm
of the Padé surrogate over the box-only ``mu`` chart or by sampling ``kappa``.
Stage 2 minimizes the banded norm over the constrained ``kappa`` chart with
Nelder-Mead. The final gains are certified against the exact delay magnitude.
"""

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import partial
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from platoon_synth.exceptions import (
    ConfigurationError,
    InfeasibleBox,
    NotInManifold,
    PeakSearchError,
    PlantDomainError,
    Stage1Failed,
)
from platoon_synth.model import (
    DelayTF,
    Gains,
    MARGIN_TOLERANCE,
    StabilityReport,
    VehicleParams,
    exact_magnitude,
    local_stability,
)
from platoon_synth.norms import (
    PeakOptions,
    global_band_limit,
    hinf_global,
    peak_on_band,
)
from platoon_synth.optimize import (
    NelderMeadResult,
    OptimizerOptions,
    multi_start,
    nelder_mead,
)
from platoon_synth.pade import RationalTF, approx_tf, pade_coefficients
from platoon_synth.param import BoxBounds, Chart, chart_functions, kpr_map


class Stage1Mode(Enum):
    """How the first stage looks for a string-stable starting point."""

    OPTIMIZE = "optimize"
    SAMPLE = "sample"


@dataclass(frozen=True)
class SynthesisConfig:
    """All tunables of the two-stage synthesis."""

    params: VehicleParams
    bounds: BoxBounds
    omega1: float = 0.5
    omega2: float = 2.5
    alpha: float = 1.05
    zeta: float = 5.0
    nu: float = 5.0
    epsilon: float = 1e-9
    pade_order: int = 5
    ss_tolerance: float = 1e-3
    stage1_mode: Stage1Mode = Stage1Mode.OPTIMIZE
    sample_count: int = 10000
    kappa_max: float = 3.0
    n_starts: int = 32
    seed: int = 0
    optimizer: OptimizerOptions = field(default_factory=OptimizerOptions)
    peak: PeakOptions = field(default_factory=PeakOptions)
    max_workers: Optional[int] = None
    parameterization: Chart = Chart.COROLLARY2

    def __post_init__(self) -> None:
        if not 0 < self.omega1 < self.omega2:
            raise ConfigurationError(
                "Band must satisfy 0 < omega1 < omega2, "
                f"got [{self.omega1}, {self.omega2}]"
            )
        if self.alpha <= 1:
            raise ConfigurationError(f"Penalty alpha must exceed 1, got {self.alpha}")
        if self.zeta <= 0 or self.nu <= 0:
            raise ConfigurationError("zeta and nu must be positive")
        if self.epsilon <= 0:
            raise ConfigurationError("epsilon must be positive")
        if self.ss_tolerance < 0:
            raise ConfigurationError("ss_tolerance must be nonnegative")
        if self.sample_count < 1:
            raise ConfigurationError("sample_count must be >= 1")
        if self.n_starts < 1:
            raise ConfigurationError("n_starts must be >= 1")
        if self.kappa_max < 0:
            raise ConfigurationError("kappa_max must be nonnegative")
        pade_coefficients(self.pade_order)

    @property
    def omega_max(self) -> float:
        """Upper edge of the global-norm scan."""
        return global_band_limit(self.params.T, self.params.theta, self.omega2)

    @property
    def ss_limit(self) -> float:
        """Largest admissible global norm."""
        return 1.0 + self.ss_tolerance

    def with_seed(self, seed: int) -> "SynthesisConfig":
        return replace(self, seed=seed, optimizer=replace(self.optimizer, seed=seed))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "params": self.params.to_dict(),
            "bounds": self.bounds.to_dict(),
            "omega1": self.omega1,
            "omega2": self.omega2,
            "alpha": self.alpha,
            "zeta": self.zeta,
            "nu": self.nu,
            "epsilon": self.epsilon,
            "pade_order": self.pade_order,
            "ss_tolerance": self.ss_tolerance,
            "stage1_mode": self.stage1_mode.value,
            "sample_count": self.sample_count,
            "kappa_max": self.kappa_max,
            "n_starts": self.n_starts,
            "seed": self.seed,
            "optimizer": self.optimizer.to_dict(),
            "peak": self.peak.to_dict(),
            "max_workers": self.max_workers,
            "parameterization": self.parameterization.value,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SynthesisConfig":
        fields = dict(data)
        fields["params"] = VehicleParams.from_dict(data["params"])
        fields["bounds"] = BoxBounds.from_dict(data["bounds"])
        if "stage1_mode" in data:
            fields["stage1_mode"] = Stage1Mode(data["stage1_mode"])
        if "parameterization" in data:
            fields["parameterization"] = Chart(data["parameterization"])
        if "optimizer" in data:
            fields["optimizer"] = OptimizerOptions.from_dict(data["optimizer"])
        if "peak" in data:
            fields["peak"] = PeakOptions.from_dict(data["peak"])
        return cls(**fields)


@dataclass
class Stage1Result:
    """Starting point handed to the second stage."""

    kappa0: np.ndarray
    k0: Gains
    norm: float  # surrogate global norm at k0
    mu0: Optional[np.ndarray] = None
    banded_norm: Optional[float] = None
    candidates: int = 0


@dataclass
class Certification:
    """Exact delay-model check of a gain vector."""

    banded_norm: float
    global_norm: float
    stability: StabilityReport
    in_box: bool
    feasible: bool
    message: str = ""


@dataclass
class SynthesisResult:
    """Certified output of the two-stage synthesis."""

    k_star: Gains
    kappa_star: np.ndarray
    kappa0: np.ndarray
    k0: Gains
    mu0: Optional[np.ndarray]
    banded_norm: float
    global_norm: float
    stability: StabilityReport
    feasible: bool
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        """Convert result to dictionary."""
        return {
            "feasible": self.feasible,
            "k_star": self.k_star.as_list(),
            "kappa_star": [float(v) for v in self.kappa_star],
            "k0": self.k0.as_list(),
            "kappa0": [float(v) for v in self.kappa0],
            "mu0": None if self.mu0 is None else [float(v) for v in self.mu0],
            "banded_norm": self.banded_norm,
            "global_norm": self.global_norm,
            "stability": self.stability.to_dict(),
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SynthesisResult":
        mu0 = data.get("mu0")
        return cls(
            k_star=Gains.from_sequence(data["k_star"]),
            kappa_star=np.asarray(data["kappa_star"], dtype=float),
            kappa0=np.asarray(data["kappa0"], dtype=float),
            k0=Gains.from_sequence(data["k0"]),
            mu0=None if mu0 is None else np.asarray(mu0, dtype=float),
            banded_norm=float(data["banded_norm"]),
            global_norm=float(data["global_norm"]),
            stability=StabilityReport.from_dict(data["stability"]),
            feasible=bool(data["feasible"]),
            diagnostics=dict(data.get("diagnostics", {})),
        )

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def surrogate_tf(k: Gains, cfg: SynthesisConfig) -> RationalTF:
    """Padé surrogate of the delay transfer function at gains ``k``."""
    return approx_tf(DelayTF.from_gains(cfg.params, k), cfg.pade_order)


def _surrogate_norms(
    kappa: Sequence[float], cfg: SynthesisConfig
) -> Optional[Tuple[float, float]]:
    """
    ``(global, banded)`` surrogate norms at ``kappa``; ``None`` when the chart is
    infeasible or the global norm exceeds the string-stability limit.
    """
    chart_map, _ = chart_functions(cfg.parameterization)
    try:
        k = chart_map(kappa, cfg.params, cfg.bounds, cfg.zeta, cfg.epsilon)
        mag = surrogate_tf(k, cfg).magnitude
        global_norm = hinf_global(mag, cfg.omega_max, cfg.peak).peak
        if global_norm > cfg.ss_limit:
            return None
        banded = peak_on_band(mag, cfg.omega1, cfg.omega2, cfg.peak).peak
    except (InfeasibleBox, PlantDomainError, PeakSearchError):
        return None
    return global_norm, banded


def branch_objective(kappa: Sequence[float], cfg: SynthesisConfig) -> float:
    """
    Banded surrogate norm when the surrogate is string stable, otherwise ``alpha``.

    Infeasible chart points and numerical failures also map to ``alpha``.
    """
    norms = _surrogate_norms(kappa, cfg)
    if norms is None:
        return cfg.alpha
    return norms[1]


def certify(k: Gains, cfg: SynthesisConfig) -> Certification:
    """Check gains against the exact delay magnitude, local stability and the box."""
    stability = local_stability(cfg.params, k)
    in_box = cfg.bounds.contains(k)
    if not stability.hurwitz:
        return Certification(
            banded_norm=float("nan"),
            global_norm=float("nan"),
            stability=stability,
            in_box=in_box,
            feasible=False,
            message="closed loop is not locally stable",
        )

    mag = partial(exact_magnitude, DelayTF.from_gains(cfg.params, k))
    try:
        banded = peak_on_band(mag, cfg.omega1, cfg.omega2, cfg.peak).peak
        global_norm = hinf_global(mag, cfg.omega_max, cfg.peak).peak
    except (PlantDomainError, PeakSearchError) as e:
        return Certification(
            banded_norm=float("nan"),
            global_norm=float("nan"),
            stability=stability,
            in_box=in_box,
            feasible=False,
            message=f"{e.error_class}: {e}",
        )

    messages = []
    if not in_box:
        messages.append("gains leave the box")
    if global_norm > cfg.ss_limit:
        messages.append(
            f"exact global norm {global_norm:.6f} exceeds {cfg.ss_limit:.6f}"
        )
    return Certification(
        banded_norm=banded,
        global_norm=global_norm,
        stability=stability,
        in_box=in_box,
        feasible=not messages,
        message="; ".join(messages),
    )


class ControllerSynthesizer:
    """Runs the two-stage synthesis for one configuration."""

    def __init__(
        self,
        cfg: SynthesisConfig,
        progress_callback: Optional[Callable[[str], None]] = None,
        logger: Optional[logging.Logger] = None,
    ):
        """
        Initialize the synthesizer.

        Args:
            cfg: Synthesis configuration
            progress_callback: Optional callback function for progress updates
            logger: Optional logger for debug information
        """
        self.cfg = cfg
        self.progress_callback = progress_callback
        self.logger = logger or logging.getLogger(__name__)
        self._chart_map, self._chart_extract = chart_functions(cfg.parameterization)

    def _progress(self, message: str) -> None:
        if self.progress_callback:
            self.progress_callback(message)

    def _extract(self, k: Gains) -> Optional[np.ndarray]:
        cfg = self.cfg
        try:
            return self._chart_extract(k, cfg.params, cfg.bounds, cfg.zeta, cfg.epsilon)
        except (NotInManifold, InfeasibleBox) as e:
            self.logger.debug(f"Candidate {k.as_list()} rejected: {e}")
            return None

    def _stage1_objective(self, mu: np.ndarray) -> float:
        """Global surrogate norm over the box-only chart, penalized when unstable."""
        cfg = self.cfg
        k = kpr_map(mu, cfg.bounds, cfg.nu, cfg.epsilon)
        report = local_stability(cfg.params, k)
        if not report.hurwitz:
            violation = sum(max(0.0, MARGIN_TOLERANCE - m) for m in report.margins)
            return cfg.alpha + violation
        try:
            surrogate = surrogate_tf(k, cfg)
            return hinf_global(surrogate.magnitude, cfg.omega_max, cfg.peak).peak
        except (PlantDomainError, PeakSearchError):
            return cfg.alpha

    def stage1_optimize(self) -> Stage1Result:
        """
        Multi-start Nelder-Mead on the global surrogate norm over ``mu``.

        The first start (in draw order) whose norm is within the string-stability
        limit and whose gains lie inside the constrained chart is accepted.

        Raises:
            Stage1Failed: If no start is accepted
        """
        cfg = self.cfg
        try:
            cfg.bounds.ensure_nonempty(cfg.epsilon)
        except InfeasibleBox as e:
            raise Stage1Failed(f"Box admits no stabilizing gain: {e}") from e

        self.logger.info(f"Stage 1 (optimize): up to {cfg.n_starts} starts")
        self._progress("Stage 1: searching for a string-stable starting point")

        def accept(result: NelderMeadResult) -> bool:
            if result.fun > cfg.ss_limit:
                return False
            k = kpr_map(result.x, cfg.bounds, cfg.nu, cfg.epsilon)
            return self._extract(k) is not None

        def sampler(rng: np.random.Generator) -> np.ndarray:
            return rng.uniform(0.0, 1.0, size=4)

        options = replace(cfg.optimizer, seed=cfg.seed)
        outcome = multi_start(
            self._stage1_objective,
            sampler,
            cfg.n_starts,
            options,
            max_workers=cfg.max_workers,
            accept=accept,
        )
        if not outcome.accepted:
            raise Stage1Failed(
                f"No accepted start among {outcome.runs} runs", best_norm=outcome.fun
            )

        mu0 = outcome.x
        k0 = kpr_map(mu0, cfg.bounds, cfg.nu, cfg.epsilon)
        kappa0 = self._extract(k0)
        assert kappa0 is not None
        self.logger.info(
            f"Stage 1 accepted start {outcome.start_index}: norm {outcome.fun:.6f}, "
            f"k0 = {np.round(k0.as_array(), 4).tolist()}"
        )
        return Stage1Result(
            kappa0=kappa0, k0=k0, norm=outcome.fun, mu0=mu0, candidates=outcome.runs
        )

    def stage1_sample(self, samples: Optional[np.ndarray] = None) -> Stage1Result:
        """
        Uniform sampling of ``kappa`` in ``[-kappa_max, kappa_max]^4``; the
        string-stable sample with the smallest banded norm wins.

        Args:
            samples: Optional explicit sample matrix of shape (n, 4)

        Raises:
            Stage1Failed: If no sample is string stable
        """
        cfg = self.cfg
        if samples is None:
            rng = np.random.default_rng(cfg.seed)
            draws = rng.uniform(
                -cfg.kappa_max, cfg.kappa_max, size=(cfg.sample_count, 4)
            )
        else:
            draws = np.asarray(samples, dtype=float).reshape(-1, 4)

        self.logger.info(f"Stage 1 (sample): {len(draws)} samples")
        self._progress(f"Stage 1: evaluating {len(draws)} samples")

        evaluate = partial(_surrogate_norms, cfg=cfg)
        norms: List[Optional[Tuple[float, float]]]
        if cfg.max_workers is not None and cfg.max_workers > 1 and len(draws) > 1:
            with ThreadPoolExecutor(max_workers=cfg.max_workers) as executor:
                norms = list(executor.map(evaluate, draws))
        else:
            norms = [evaluate(kappa) for kappa in draws]

        # ranked by banded norm, then lexicographically by kappa
        feasible: List[Tuple[float, Tuple[float, ...], float, int]] = []
        for index, value in enumerate(norms):
            if value is None:
                continue
            global_norm, banded = value
            feasible.append((banded, tuple(draws[index].tolist()), global_norm, index))
        if not feasible:
            raise Stage1Failed(f"None of {len(draws)} samples is string stable")

        banded, _, global_norm, index = min(feasible)
        kappa0 = draws[index].copy()
        k0 = self._chart_map(kappa0, cfg.params, cfg.bounds, cfg.zeta, cfg.epsilon)
        self.logger.info(
            f"Stage 1 kept {len(feasible)} of {len(draws)} samples; best banded norm "
            f"{banded:.6f}"
        )
        return Stage1Result(
            kappa0=kappa0,
            k0=k0,
            norm=global_norm,
            banded_norm=banded,
            candidates=len(feasible),
        )

    def run(self) -> SynthesisResult:
        """
        Run both stages and certify the result with the exact delay model.

        Returns:
            SynthesisResult; ``feasible`` is False when certification fails

        Raises:
            InfeasibleBox: If the box admits no positive spacing gain
            Stage1Failed: If no starting point is found
        """
        cfg = self.cfg
        start_time = time.time()
        cfg.bounds.ensure_nonempty(cfg.epsilon)

        if cfg.stage1_mode is Stage1Mode.SAMPLE:
            stage1 = self.stage1_sample()
        else:
            stage1 = self.stage1_optimize()

        objective = partial(branch_objective, cfg=cfg)
        h0 = objective(stage1.kappa0)
        self.logger.info(
            f"Stage 2 ({cfg.parameterization.value}): minimizing banded norm from "
            f"h(kappa0) = {h0:.6f}"
        )
        self._progress("Stage 2: minimizing the banded norm")
        nm = nelder_mead(objective, stage1.kappa0, cfg.optimizer)

        if nm.fun <= h0:
            kappa_star, h_star = nm.x, nm.fun
        else:
            kappa_star, h_star = stage1.kappa0.copy(), h0
        k_star = self._chart_map(
            kappa_star, cfg.params, cfg.bounds, cfg.zeta, cfg.epsilon
        )

        self._progress("Certifying with the exact delay model")
        cert = certify(k_star, cfg)
        if cert.feasible:
            self.logger.info(
                f"Certified: banded norm {cert.banded_norm:.6f}, global norm "
                f"{cert.global_norm:.6f}, spectral abscissa "
                f"{cert.stability.spectral_abscissa:.3e}"
            )
        else:
            self.logger.warning(f"Certification failed: {cert.message}")

        elapsed = time.time() - start_time
        self.logger.info(f"Synthesis completed in {elapsed:.2f} seconds")

        diagnostics: Dict[str, Any] = {
            "stage1_mode": cfg.stage1_mode.value,
            "stage1_candidates": stage1.candidates,
            "stage1_norm": stage1.norm,
            "parameterization": cfg.parameterization.value,
            "objective_initial": h0,
            "objective_final": h_star,
            "iterations": nm.iterations,
            "evaluations": nm.evaluations,
            "budget_exhausted": nm.budget_exhausted,
            "in_box": cert.in_box,
            "spectral_abscissa": cert.stability.spectral_abscissa,
            "certification": cert.message or "passed",
        }
        return SynthesisResult(
            k_star=k_star,
            kappa_star=np.asarray(kappa_star, dtype=float),
            kappa0=stage1.kappa0,
            k0=stage1.k0,
            mu0=stage1.mu0,
            banded_norm=cert.banded_norm,
            global_norm=cert.global_norm,
            stability=cert.stability,
            feasible=cert.feasible,
            diagnostics=diagnostics,
        )


def stage1_optimize(cfg: SynthesisConfig) -> Stage1Result:
    """Stage 1 by multi-start minimization of the surrogate global norm."""
    return ControllerSynthesizer(cfg).stage1_optimize()


def stage1_sample(
    cfg: SynthesisConfig, samples: Optional[np.ndarray] = None
) -> Stage1Result:
    """Stage 1 by uniform sampling of the constrained chart."""
    return ControllerSynthesizer(cfg).stage1_sample(samples)


def synthesize(
    cfg: SynthesisConfig,
    progress_callback: Optional[Callable[[str], None]] = None,
    logger: Optional[logging.Logger] = None,
) -> SynthesisResult:
    """Run the two-stage synthesis and certify the result."""
    return ControllerSynthesizer(cfg, progress_callback, logger).run()
