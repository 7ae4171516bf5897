"""
Time-domain simulation of a mixed platoon driven by a leader acceleration profile.

Every follower obeys the same third-order linear model as the synthesis. CAVs add
the feedforward term ``k4 * a_prev(t - theta)``; HDVs have ``k4 = 0``. The
integrator is a fixed-step classical Runge-Kutta scheme whose steps are split at
the times where an input is discontinuous or kinked, so piecewise-constant leader
profiles keep the scheme's accuracy. Delayed upstream accelerations are read from
a history buffer by cubic Hermite interpolation.
"""

import io
import logging
import math
from abc import ABC, abstractmethod
from bisect import bisect_right
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from platoon_synth.exceptions import ConfigurationError
from platoon_synth.model import Gains, VehicleParams, local_stability

logger = logging.getLogger(__name__)

# times closer than this are treated as the same instant
TIME_TOLERANCE = 1e-11

# default human-driven gains: locally stable but string unstable
DEFAULT_HDV_GAINS = Gains(0.5, 0.2, 0.0, 0.0)

ATTENUATION_TOLERANCE = 1e-2

_trapezoid = getattr(np, "trapezoid", None) or getattr(np, "trapz")


class VehicleKind(Enum):
    """Vehicle type in a mixed platoon."""

    CAV = "CAV"
    HDV = "HDV"


@dataclass(frozen=True)
class VehicleSpec:
    """One follower: its type, plant constants and gains."""

    kind: VehicleKind
    params: VehicleParams
    gains: Gains

    def __post_init__(self) -> None:
        if self.kind is VehicleKind.HDV and self.gains.k4 != 0:
            raise ConfigurationError(
                "Human-driven vehicles have no feedforward (k4 = 0)"
            )
        if not local_stability(self.params, self.gains).hurwitz:
            raise ConfigurationError(
                f"{self.kind.value} gains {self.gains.as_list()} are not locally stable"
            )

    @classmethod
    def hdv(cls, params: VehicleParams, gains: Optional[Gains] = None) -> "VehicleSpec":
        return cls(VehicleKind.HDV, params, gains or DEFAULT_HDV_GAINS)

    @classmethod
    def cav(cls, params: VehicleParams, gains: Gains) -> "VehicleSpec":
        return cls(VehicleKind.CAV, params, gains)

    @property
    def uses_delay(self) -> bool:
        return self.gains.k4 != 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "params": self.params.to_dict(),
            "gains": self.gains.as_list(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "VehicleSpec":
        return cls(
            kind=VehicleKind(data["kind"]),
            params=VehicleParams.from_dict(data["params"]),
            gains=Gains.from_sequence(data["gains"]),
        )


def _in_window(t: float, start: float, end: float, side: int) -> bool:
    """Membership in ``[start, end)`` for right limits, ``(start, end]`` for left."""
    if side < 0:
        return start + TIME_TOLERANCE < t <= end + TIME_TOLERANCE
    return start - TIME_TOLERANCE <= t < end - TIME_TOLERANCE


class LeaderProfile(ABC):
    """Exogenous leader acceleration ``a0(t)``, zero outside its support."""

    @property
    @abstractmethod
    def start_time(self) -> float:
        """First instant of nonzero excitation."""

    @property
    @abstractmethod
    def end_time(self) -> float:
        """Instant after which the profile is zero."""

    @abstractmethod
    def value(self, t: float, side: int = 1) -> float:
        """
        Acceleration at ``t``; ``side`` selects the right (+1) or left (-1) limit at
        discontinuities.
        """

    @abstractmethod
    def breakpoints(self) -> List[float]:
        """Times where the profile or its derivative is discontinuous."""

    @abstractmethod
    def to_dict(self) -> Dict[str, Any]:
        """Convert profile to dictionary."""


@dataclass(frozen=True)
class PiecewiseConstantProfile(LeaderProfile):
    """Constant accelerations on consecutive ``(start, duration, accel)`` segments."""

    segments: Tuple[Tuple[float, float, float], ...]

    @property
    def start_time(self) -> float:
        return min((s[0] for s in self.segments), default=0.0)

    @property
    def end_time(self) -> float:
        return max((s[0] + s[1] for s in self.segments), default=0.0)

    def value(self, t: float, side: int = 1) -> float:
        for start, duration, accel in self.segments:
            if _in_window(t, start, start + duration, side):
                return accel
        return 0.0

    def breakpoints(self) -> List[float]:
        points = set()
        for start, duration, _ in self.segments:
            points.update((start, start + duration))
        return sorted(points)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "type": "piecewise",
            "segments": [list(s) for s in self.segments],
        }


@dataclass(frozen=True)
class SinusoidProfile(LeaderProfile):
    """``amplitude * sin(omega (t - start))`` on ``[start, start + duration)``."""

    amplitude: float
    omega: float
    duration: float
    start: float = 0.0

    @property
    def start_time(self) -> float:
        return self.start

    @property
    def end_time(self) -> float:
        return self.start + self.duration

    def value(self, t: float, side: int = 1) -> float:
        if not _in_window(t, self.start, self.end_time, side):
            return 0.0
        return self.amplitude * math.sin(self.omega * (t - self.start))

    def breakpoints(self) -> List[float]:
        return [self.start, self.end_time]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "type": "sinusoid",
            "amplitude": self.amplitude,
            "omega": self.omega,
            "duration": self.duration,
            "start": self.start,
        }


@dataclass(frozen=True)
class ChirpProfile(LeaderProfile):
    """Linear chirp sweeping ``omega_start -> omega_end`` rad/s over ``duration``."""

    amplitude: float
    omega_start: float
    omega_end: float
    duration: float
    start: float = 0.0

    @property
    def start_time(self) -> float:
        return self.start

    @property
    def end_time(self) -> float:
        return self.start + self.duration

    def value(self, t: float, side: int = 1) -> float:
        if not _in_window(t, self.start, self.end_time, side):
            return 0.0
        s = t - self.start
        rate = (self.omega_end - self.omega_start) / self.duration
        return self.amplitude * math.sin(self.omega_start * s + 0.5 * rate * s * s)

    def breakpoints(self) -> List[float]:
        return [self.start, self.end_time]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "type": "chirp",
            "amplitude": self.amplitude,
            "omega_start": self.omega_start,
            "omega_end": self.omega_end,
            "duration": self.duration,
            "start": self.start,
        }


def profile_from_dict(data: Dict[str, Any]) -> LeaderProfile:
    """Create a leader profile from its dictionary form."""
    kind = data.get("type", "piecewise")
    if kind == "piecewise":
        segments = tuple(tuple(float(v) for v in s) for s in data["segments"])
        return PiecewiseConstantProfile(segments)  # type: ignore[arg-type]
    if kind == "stop_and_go":
        options = {k: float(v) for k, v in data.items() if k != "type"}
        return stop_and_go_profile(**options)
    if kind == "sinusoid":
        return SinusoidProfile(
            float(data["amplitude"]),
            float(data["omega"]),
            float(data["duration"]),
            float(data.get("start", 0.0)),
        )
    if kind == "chirp":
        return ChirpProfile(
            float(data["amplitude"]),
            float(data["omega_start"]),
            float(data["omega_end"]),
            float(data["duration"]),
            float(data.get("start", 0.0)),
        )
    raise ConfigurationError(f"Unknown leader profile type: {kind}")


def stop_and_go_profile(
    a_dec: float = -1.0,
    t_dec: float = 3.0,
    a_acc: float = 1.0,
    t_acc: float = 3.0,
    t_start: float = 5.0,
) -> PiecewiseConstantProfile:
    """
    One deceleration pulse followed by one acceleration pulse.

    Args:
        a_dec: Deceleration (m/s^2), nonpositive
        t_dec: Deceleration duration (s)
        a_acc: Acceleration (m/s^2), nonnegative
        t_acc: Acceleration duration (s)
        t_start: Onset of the deceleration (s)

    Returns:
        PiecewiseConstantProfile; zero-length pulses are dropped
    """
    if t_dec < 0 or t_acc < 0:
        raise ConfigurationError("Pulse durations must be nonnegative")
    if a_dec > 0 or a_acc < 0:
        raise ConfigurationError("Expected a_dec <= 0 <= a_acc")
    if t_start < 0:
        raise ConfigurationError("Disturbance onset must be nonnegative")
    segments = []
    if t_dec > 0:
        segments.append((t_start, t_dec, a_dec))
    if t_acc > 0:
        segments.append((t_start + t_dec, t_acc, a_acc))
    return PiecewiseConstantProfile(tuple(segments))


@dataclass
class PlatoonScenario:
    """Followers in platoon order, the leader profile and integration settings."""

    vehicles: List[VehicleSpec]
    leader: LeaderProfile
    dt: Optional[float] = None
    horizon: Optional[float] = None
    l2_start: float = 0.0

    def __post_init__(self) -> None:
        if not self.vehicles:
            raise ConfigurationError("A scenario needs at least one following vehicle")
        delays = [
            v.params.theta
            for v in self.vehicles
            if v.uses_delay and v.params.theta > 0
        ]
        if self.dt is None:
            self.dt = min([0.01] + [theta / 20.0 for theta in delays])
        if self.horizon is None:
            self.horizon = self.leader.end_time + 40.0
        self.validate()

    def validate(self) -> None:
        """
        Check step size and horizon against the vehicle time scales.

        A delayed channel needs ``dt <= theta / 10``. A delay shorter than one step
        (``dt > theta``) is accepted: delayed reads then interpolate between the last
        stored step and the current stage value, which approaches the zero-delay
        limit as ``theta`` shrinks. Only ``theta / 10 < dt <= theta`` is rejected.
        """
        dt = float(self.dt)  # type: ignore[arg-type]
        if not dt > 0:
            raise ConfigurationError(f"Step size must be positive, got {dt}")
        lag = min(v.params.T for v in self.vehicles)
        if dt > lag / 10.0:
            raise ConfigurationError(
                f"Step size {dt} exceeds a tenth of the smallest actuation lag {lag}"
            )
        for v in self.vehicles:
            theta = v.params.theta
            if v.uses_delay and theta / 10.0 < dt <= theta:
                raise ConfigurationError(
                    f"Step size {dt} is too coarse for delay {theta}; "
                    f"use dt <= {theta / 10}"
                )
        if self.horizon is None or self.horizon < self.leader.end_time:
            raise ConfigurationError(
                f"Horizon {self.horizon} ends before the disturbance "
                f"({self.leader.end_time})"
            )
        if not 0 <= self.l2_start < self.horizon:
            raise ConfigurationError("l2_start must lie inside the horizon")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "vehicles": [v.to_dict() for v in self.vehicles],
            "leader": self.leader.to_dict(),
            "dt": self.dt,
            "horizon": self.horizon,
            "l2_start": self.l2_start,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PlatoonScenario":
        return cls(
            vehicles=[VehicleSpec.from_dict(v) for v in data["vehicles"]],
            leader=profile_from_dict(data["leader"]),
            dt=data.get("dt"),
            horizon=data.get("horizon"),
            l2_start=float(data.get("l2_start", 0.0)),
        )


class DelayBuffer:
    """
    History of the followers' accelerations for delayed reads.

    Each stored instant keeps the value and the left/right derivative limits;
    reads between stored instants use cubic Hermite interpolation. Reads before
    the first stored instant return zero (equilibrium history). Reads past the
    latest instant interpolate linearly toward the current stage value.
    """

    def __init__(self, width: int, capacity: int = 1024):
        self.width = width
        self._times = np.empty(capacity)
        self._values = np.empty((capacity, width))
        self._left = np.empty((capacity, width))
        self._right = np.zeros((capacity, width))
        self._count = 0

    def __len__(self) -> int:
        return self._count

    @property
    def latest_time(self) -> float:
        return float(self._times[self._count - 1])

    def _grow(self) -> None:
        capacity = 2 * self._times.size
        self._times = np.resize(self._times, capacity)
        for name in ("_values", "_left", "_right"):
            old = getattr(self, name)
            new = np.zeros((capacity, self.width))
            new[: old.shape[0]] = old
            setattr(self, name, new)

    def append(self, t: float, values: np.ndarray, left_rates: np.ndarray) -> None:
        """Store values at ``t`` with their left derivative limits."""
        if self._count and t <= self.latest_time:
            raise ValueError(
                f"History times must increase: {t} after {self.latest_time}"
            )
        if self._count == self._times.size:
            self._grow()
        i = self._count
        self._times[i] = t
        self._values[i] = values
        self._left[i] = left_rates
        self._right[i] = left_rates
        self._count += 1

    def set_right_rates(self, rates: np.ndarray) -> None:
        """Right derivative limits at the latest instant."""
        self._right[self._count - 1] = rates

    def read(self, index: int, t: float, t_now: float, value_now: float) -> float:
        """Value of signal ``index`` at time ``t``."""
        if t < 0.0 or self._count == 0:
            return 0.0
        last = self._count - 1
        t_last = self._times[last]
        if t >= t_last:
            if t_now <= t_last:
                return float(self._values[last, index])
            s = (t - t_last) / (t_now - t_last)
            return float((1.0 - s) * self._values[last, index] + s * value_now)

        j = int(np.searchsorted(self._times[: self._count], t, side="right")) - 1
        t0, t1 = self._times[j], self._times[j + 1]
        h = t1 - t0
        s = (t - t0) / h
        s2, s3 = s * s, s * s * s
        return float(
            (2 * s3 - 3 * s2 + 1) * self._values[j, index]
            + (s3 - 2 * s2 + s) * h * self._right[j, index]
            + (-2 * s3 + 3 * s2) * self._values[j + 1, index]
            + (s3 - s2) * h * self._left[j + 1, index]
        )


@dataclass
class Trajectory:
    """Sampled states of every follower and summary energies."""

    times: np.ndarray
    leader_accel: np.ndarray
    sigma: np.ndarray  # (steps, vehicles)
    dv: np.ndarray
    accel: np.ndarray
    kinds: List[VehicleKind]
    l2_start: float = 0.0
    settle_time: float = 0.0
    l2_norms: List[float] = field(init=False)
    peaks: List[float] = field(init=False)

    def __post_init__(self) -> None:
        mask = self.times >= self.l2_start - TIME_TOLERANCE
        t = self.times[mask]
        signals = np.column_stack([self.leader_accel, self.accel])[mask]
        self.l2_norms = [
            float(math.sqrt(max(_trapezoid(signals[:, i] ** 2, t), 0.0)))
            for i in range(signals.shape[1])
        ]
        self.peaks = [
            float(np.max(np.abs(signals[:, i]))) for i in range(signals.shape[1])
        ]

    @property
    def vehicle_count(self) -> int:
        return self.accel.shape[1]

    @property
    def min_spacing(self) -> List[float]:
        """Smallest spacing deviation per follower (reported, not enforced)."""
        return [float(v) for v in np.min(self.sigma, axis=0)]

    @property
    def settled(self) -> bool:
        """True when every follower is at rest before the disturbance starts."""
        before = self.times < self.settle_time - TIME_TOLERANCE
        if not np.any(before):
            return True
        return bool(np.max(np.abs(self.accel[before])) <= 1e-9)

    def summary(self) -> Dict[str, Any]:
        return {
            "vehicles": [k.value for k in self.kinds],
            "l2_norms": self.l2_norms,
            "peaks": self.peaks,
            "min_spacing": self.min_spacing,
            "settled": self.settled,
        }

    def to_csv(self, path: Optional[Path] = None) -> str:
        """Write ``t`` followed by ``sigma_i, dv_i, a_i`` per follower."""
        columns = ["t"]
        data = [self.times]
        for i in range(self.vehicle_count):
            columns += [f"sigma_{i + 1}", f"dv_{i + 1}", f"a_{i + 1}"]
            data += [self.sigma[:, i], self.dv[:, i], self.accel[:, i]]
        buffer = io.StringIO()
        np.savetxt(
            buffer,
            np.column_stack(data),
            delimiter=",",
            header=",".join(columns),
            comments="",
            fmt="%.10g",
        )
        text = buffer.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


class PlatoonSimulator:
    """Fixed-step RK4 integration of a platoon scenario."""

    def __init__(
        self, scenario: PlatoonScenario, logger: Optional[logging.Logger] = None
    ):
        self.scenario = scenario
        self.logger = logger or logging.getLogger(__name__)
        vehicles = scenario.vehicles
        self.n = len(vehicles)
        self._tau = np.array([v.params.tau for v in vehicles])
        self._T = np.array([v.params.T for v in vehicles])
        self._K = np.array([v.params.K for v in vehicles])
        self._theta = [v.params.theta for v in vehicles]
        gains = np.array([v.gains.as_list() for v in vehicles])
        self._k1, self._k2, self._k3, self._k4 = gains.T
        self._feedforward = [i for i, v in enumerate(vehicles) if v.uses_delay]
        self._buffer = DelayBuffer(self.n)

    def breakpoints(self) -> List[float]:
        """
        Times where some vehicle's input loses smoothness: the leader breakpoints
        and their delayed copies propagated down the platoon.
        """
        horizon = float(self.scenario.horizon)  # type: ignore[arg-type]
        current = set(self.scenario.leader.breakpoints())
        points = set(current)
        for i in range(self.n):
            if i in self._feedforward and self._theta[i] > 0:
                theta = self._theta[i]
                shifted = {b + theta for b in current if b + theta <= horizon}
                current = current | shifted
                points |= current
        return sorted(b for b in points if 0.0 < b < horizon)

    def _rates(self, t: float, side: int, state: np.ndarray) -> np.ndarray:
        leader = self.scenario.leader
        accel = state[:, 2]
        upstream = np.empty(self.n)
        upstream[0] = leader.value(t, side)
        upstream[1:] = accel[:-1]

        delayed = np.zeros(self.n)
        for i in self._feedforward:
            tq = t - self._theta[i]
            if i == 0:
                delayed[i] = leader.value(tq, side)
            else:
                delayed[i] = self._buffer.read(i - 1, tq, t, accel[i - 1])

        u = (
            self._k1 * state[:, 0]
            + self._k2 * state[:, 1]
            + self._k3 * accel
            + self._k4 * delayed
        )
        rates = np.empty_like(state)
        rates[:, 0] = state[:, 1] - self._tau * accel
        rates[:, 1] = upstream - accel
        rates[:, 2] = (-accel + self._K * u) / self._T
        return rates

    def _step(self, t0: float, t1: float, state: np.ndarray) -> np.ndarray:
        h = t1 - t0
        mid = t0 + 0.5 * h
        k1 = self._rates(t0, 1, state)
        self._buffer.set_right_rates(k1[:, 2])
        k2 = self._rates(mid, 1, state + 0.5 * h * k1)
        k3 = self._rates(mid, 1, state + 0.5 * h * k2)
        k4 = self._rates(t1, -1, state + h * k3)
        new_state = state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        left = self._rates(t1, -1, new_state)
        self._buffer.append(t1, new_state[:, 2], left[:, 2])
        return new_state

    def run(self) -> Trajectory:
        """Integrate the scenario from equilibrium over the horizon."""
        sc = self.scenario
        dt = float(sc.dt)  # type: ignore[arg-type]
        horizon = float(sc.horizon)  # type: ignore[arg-type]
        steps = int(math.ceil(horizon / dt - 1e-9))
        breaks = self.breakpoints()
        self.logger.debug(
            f"Simulating {self.n} vehicles for {horizon} s: {steps} steps, "
            f"{len(breaks)} breakpoints"
        )

        times = np.arange(steps + 1) * dt
        leader = np.array([sc.leader.value(float(t), 1) for t in times])
        sigma = np.zeros((steps + 1, self.n))
        dv = np.zeros((steps + 1, self.n))
        accel = np.zeros((steps + 1, self.n))

        state = np.zeros((self.n, 3))
        self._buffer = DelayBuffer(self.n, capacity=steps + len(breaks) + 2)
        self._buffer.append(0.0, state[:, 2], np.zeros(self.n))

        for n in range(steps):
            t0, t1 = float(times[n]), float(times[n + 1])
            lo = bisect_right(breaks, t0 + TIME_TOLERANCE)
            hi = bisect_right(breaks, t1 - TIME_TOLERANCE)
            nodes = [t0] + breaks[lo:hi] + [t1]
            for a, b in zip(nodes[:-1], nodes[1:]):
                state = self._step(a, b, state)
            sigma[n + 1] = state[:, 0]
            dv[n + 1] = state[:, 1]
            accel[n + 1] = state[:, 2]

        return Trajectory(
            times=times,
            leader_accel=leader,
            sigma=sigma,
            dv=dv,
            accel=accel,
            kinds=[v.kind for v in sc.vehicles],
            l2_start=sc.l2_start,
            settle_time=sc.leader.start_time,
        )


def simulate(
    scenario: PlatoonScenario, logger: Optional[logging.Logger] = None
) -> Trajectory:
    """Integrate a platoon scenario and return the sampled trajectory."""
    return PlatoonSimulator(scenario, logger).run()


@dataclass(frozen=True)
class LinkRatio:
    """Energy and peak amplification from one vehicle to the next."""

    upstream: int  # 0 is the leader
    downstream: int
    kind: VehicleKind  # type of the downstream vehicle
    l2_ratio: Optional[float]  # None when the upstream signal carries no energy
    peak_ratio: Optional[float]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "upstream": self.upstream,
            "downstream": self.downstream,
            "kind": self.kind.value,
            "l2_ratio": self.l2_ratio,
            "peak_ratio": self.peak_ratio,
        }


@dataclass(frozen=True)
class AmplificationReport:
    """Per-link amplification of acceleration energy along the platoon."""

    leader_link: LinkRatio
    links: List[LinkRatio]
    attenuating: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            "leader_link": self.leader_link.to_dict(),
            "links": [link.to_dict() for link in self.links],
            "attenuating": self.attenuating,
        }


def _ratio(numerator: float, denominator: float) -> Optional[float]:
    if denominator <= 0.0 or not math.isfinite(denominator):
        return None
    return numerator / denominator


def _link(tr: Trajectory, upstream: int) -> LinkRatio:
    return LinkRatio(
        upstream=upstream,
        downstream=upstream + 1,
        kind=tr.kinds[upstream],
        l2_ratio=_ratio(tr.l2_norms[upstream + 1], tr.l2_norms[upstream]),
        peak_ratio=_ratio(tr.peaks[upstream + 1], tr.peaks[upstream]),
    )


def amplification_report(tr: Trajectory) -> AmplificationReport:
    """
    Ratios ``||a_i||_2 / ||a_{i-1}||_2`` between consecutive followers, plus the
    leader-to-first-follower link.

    ``attenuating`` holds when every link into a CAV has ratio at most
    ``1 + 1e-2``; links with an undefined ratio do not count against it.
    """
    leader_link = _link(tr, 0)
    links = [_link(tr, i) for i in range(1, tr.vehicle_count)]
    attenuating = all(
        link.l2_ratio is None or link.l2_ratio <= 1.0 + ATTENUATION_TOLERANCE
        for link in [leader_link] + links
        if link.kind is VehicleKind.CAV
    )
    return AmplificationReport(
        leader_link=leader_link, links=links, attenuating=attenuating
    )


def platoon(
    kinds: Sequence[str],
    params: VehicleParams,
    cav_gains: Gains,
    hdv_gains: Optional[Gains] = None,
) -> List[VehicleSpec]:
    """Build a follower list from type names such as ``["HDV", "CAV", "HDV"]``."""
    vehicles = []
    for name in kinds:
        kind = VehicleKind(name.upper())
        if kind is VehicleKind.CAV:
            vehicles.append(VehicleSpec.cav(params, cav_gains))
        else:
            vehicles.append(VehicleSpec.hdv(params, hdv_gains))
    return vehicles
