"""
Banded and global H-infinity norms of scalar magnitude functions.

A magnitude function maps frequencies (rad/s) to ``|F(jw)|``. It must accept a
numpy array and return an array of the same shape; scalar-returning functions are
broadcast. The peak is found by scanning a mixed linear/logarithmic grid and then
refining every local maximum with a golden-section search. The scan is repeated
on a doubled grid until the refined peak is stable.
"""

import logging
import math
from dataclasses import dataclass, asdict
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from platoon_synth.exceptions import ConfigurationError, PeakSearchError

logger = logging.getLogger(__name__)

MagnitudeFunction = Callable[[Any], Any]

INV_PHI = (math.sqrt(5) - 1) / 2  # 1 / phi
INV_PHI_SQUARE = (3 - math.sqrt(5)) / 2  # 1 / phi^2

# |F(jw)| -> 1 as w -> 0+ for every gain set with k1 != 0.
DC_LIMIT = 1.0

DEFAULT_BAND = (0.01, 5.01)


@dataclass(frozen=True)
class PeakOptions:
    """Tunables of the scan-and-refine peak search."""

    grid_points: int = 4000
    refine_width: float = 1e-10  # relative to the band width
    max_refinements: Optional[int] = None  # None refines every local maximum
    omega_min: float = 1e-6
    widen_factor: float = 100.0
    doublings: int = 1
    stable_rtol: float = 1e-8

    def __post_init__(self) -> None:
        if self.grid_points < 4:
            raise ConfigurationError("Peak search needs at least 4 grid points")
        if not 0 < self.refine_width < 1:
            raise ConfigurationError("refine_width must lie in (0, 1)")
        if self.max_refinements is not None and self.max_refinements < 1:
            raise ConfigurationError("max_refinements must be >= 1")
        if self.omega_min <= 0:
            raise ConfigurationError("omega_min must be positive")
        if self.widen_factor <= 1:
            raise ConfigurationError("widen_factor must exceed 1")
        if self.doublings < 0:
            raise ConfigurationError("doublings must be >= 0")
        if self.stable_rtol <= 0:
            raise ConfigurationError("stable_rtol must be positive")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PeakOptions":
        return cls(**data)


@dataclass(frozen=True)
class PeakResult:
    """Location and value of the largest magnitude found."""

    omega_star: float
    peak: float
    evaluations: int

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PeakResult":
        return cls(
            omega_star=float(data["omega_star"]),
            peak=float(data["peak"]),
            evaluations=int(data["evaluations"]),
        )


@dataclass
class FrequencySeries:
    """A sampled frequency-domain quantity, e.g. a magnitude or an error profile."""

    omega: np.ndarray
    values: np.ndarray

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def rows(self) -> List[Tuple[float, float]]:
        return [(float(w), float(v)) for w, v in zip(self.omega, self.values)]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "omega": self.omega.tolist(),
            "values": self.values.tolist(),
            "max_abs": self.max_abs,
        }


def _evaluate(mag: MagnitudeFunction, omega: np.ndarray) -> np.ndarray:
    values = np.asarray(mag(omega), dtype=float)
    return np.broadcast_to(values, omega.shape).astype(float)


def mixed_grid(omega1: float, omega2: float, npoints: int) -> np.ndarray:
    """Half the points uniform in w, half uniform in log w, merged and sorted."""
    n_lin = npoints // 2
    n_log = npoints - n_lin
    grid = np.concatenate(
        [np.linspace(omega1, omega2, n_lin), np.geomspace(omega1, omega2, n_log)]
    )
    grid = np.unique(grid)
    # keep the endpoints exact
    grid[0], grid[-1] = omega1, omega2
    return grid


def _golden_section_max(
    mag: MagnitudeFunction, a: np.ndarray, b: np.ndarray, tol: float
) -> Tuple[np.ndarray, np.ndarray, int]:
    """
    Golden-section search for the maxima of ``mag`` on many brackets at once.

    Each ``[a[i], b[i]]`` is searched independently, assuming ``mag`` is unimodal
    there. One vectorized call of ``mag`` advances every bracket by one step.

    Returns:
        Tuple of (argmax per bracket, max value per bracket, evaluations)
    """
    a, b = np.minimum(a, b), np.maximum(a, b)
    h = b - a
    h_max = float(np.max(h)) if h.size else 0.0
    if h_max <= tol:
        x = 0.5 * (a + b)
        return x, _evaluate(mag, x), x.size

    n = int(math.ceil(math.log(tol / h_max) / math.log(INV_PHI)))

    c = a + INV_PHI_SQUARE * h
    d = a + INV_PHI * h
    yc = _evaluate(mag, c)
    yd = _evaluate(mag, d)
    evaluations = 2 * a.size

    for _ in range(n - 1):
        left = yc > yd
        a = np.where(left, a, c)
        b = np.where(left, d, b)
        h = INV_PHI * h
        c_next = np.where(left, a + INV_PHI_SQUARE * h, d)
        d_next = np.where(left, c, a + INV_PHI * h)
        y = _evaluate(mag, np.where(left, c_next, d_next))
        yc, yd = np.where(left, y, yd), np.where(left, yc, y)
        c, d = c_next, d_next
        evaluations += a.size

    upper = yc > yd
    return np.where(upper, c, d), np.where(upper, yc, yd), evaluations


def _local_maxima(values: np.ndarray) -> np.ndarray:
    """Indices that exceed their left neighbour strictly and their right one weakly."""
    left = np.empty(values.shape, dtype=bool)
    right = np.empty(values.shape, dtype=bool)
    left[0] = True
    left[1:] = values[1:] > values[:-1]
    right[-1] = True
    right[:-1] = values[:-1] >= values[1:]
    return np.flatnonzero(left & right)


def _scan_and_refine(
    mag: MagnitudeFunction,
    omega1: float,
    omega2: float,
    grid_points: int,
    opts: PeakOptions,
) -> Tuple[PeakResult, int]:
    """One coarse scan followed by refinement of its local maxima."""
    grid = mixed_grid(omega1, omega2, grid_points)
    values = _evaluate(mag, grid)
    evaluations = grid.size

    best_idx = int(np.argmax(values))
    best = PeakResult(
        omega_star=float(grid[best_idx]), peak=float(values[best_idx]), evaluations=0
    )

    candidates = _local_maxima(values)
    if opts.max_refinements is not None:
        order = np.argsort(-values[candidates], kind="stable")
        candidates = candidates[order][: opts.max_refinements]

    lo = grid[np.maximum(candidates - 1, 0)]
    hi = grid[np.minimum(candidates + 1, grid.size - 1)]
    tol = opts.refine_width * (omega2 - omega1)
    w_star, peaks, n_evals = _golden_section_max(mag, lo, hi, tol)
    evaluations += n_evals

    if peaks.size:
        i = int(np.argmax(peaks))
        if peaks[i] > best.peak:
            best = PeakResult(
                omega_star=float(w_star[i]), peak=float(peaks[i]), evaluations=0
            )
    result = PeakResult(best.omega_star, best.peak, evaluations)
    return result, candidates.size


def peak_on_band(
    mag: MagnitudeFunction,
    omega1: float,
    omega2: float,
    options: Optional[PeakOptions] = None,
) -> PeakResult:
    """
    Banded H-infinity norm: the supremum of ``mag`` over ``[omega1, omega2]``.

    The scan is repeated on a grid of twice the size, up to ``doublings`` times,
    until two consecutive refined peaks agree to ``stable_rtol``.

    Args:
        mag: Vectorized magnitude function
        omega1: Lower band edge (rad/s), positive
        omega2: Upper band edge (rad/s)
        options: Peak-search tunables

    Returns:
        PeakResult with the refined peak location and value
    """
    opts = options or PeakOptions()
    if not (math.isfinite(omega1) and math.isfinite(omega2)):
        raise ConfigurationError(f"Band edges must be finite: [{omega1}, {omega2}]")
    if omega1 <= 0:
        raise ConfigurationError(f"Lower band edge must be positive, got {omega1}")
    if omega1 >= omega2:
        raise ConfigurationError(f"Empty band: omega1 {omega1} >= omega2 {omega2}")

    grid_points = opts.grid_points
    best, n_refined = _scan_and_refine(mag, omega1, omega2, grid_points, opts)
    evaluations = best.evaluations

    for _ in range(opts.doublings):
        grid_points *= 2
        finer, n_refined = _scan_and_refine(mag, omega1, omega2, grid_points, opts)
        evaluations += finer.evaluations
        stable = abs(finer.peak - best.peak) <= opts.stable_rtol * max(
            abs(best.peak), np.finfo(float).tiny
        )
        if finer.peak > best.peak:
            best = finer
        if stable:
            break
        logger.debug(
            f"Band [{omega1:.4g}, {omega2:.4g}]: peak moved to {finer.peak:.9f} "
            f"on {grid_points} grid points"
        )

    logger.debug(
        f"Band [{omega1:.4g}, {omega2:.4g}]: peak {best.peak:.6f} at "
        f"{best.omega_star:.6g} rad/s ({n_refined} refined maxima)"
    )
    return PeakResult(
        omega_star=best.omega_star, peak=best.peak, evaluations=evaluations
    )


def global_band_limit(T: float, theta: float, omega2: float) -> float:
    """Upper edge of the global scan: ``max(1e3, 1e3 * max(1/T, 1/theta, omega2))``."""
    scales = [1.0 / T, omega2]
    if theta > 0:
        scales.append(1.0 / theta)
    return max(1e3, 1e3 * max(scales))


def hinf_global(
    mag: MagnitudeFunction,
    omega_max: float = 1e3,
    options: Optional[PeakOptions] = None,
) -> PeakResult:
    """
    Global H-infinity norm over ``(0, inf)``.

    The analytic limit 1 at ``w -> 0+`` is combined with a band search on
    ``[omega_min, omega_max]``. Spot checks at ``2 omega_max`` and ``4 omega_max``
    must show a decreasing tail below the peak; otherwise the band is widened once.
    A result located at ``omega_star = 0`` means the zero-frequency limit dominates.
    """
    opts = options or PeakOptions()
    limit = omega_max
    evaluations = 0

    for attempt in range(2):
        band = peak_on_band(mag, opts.omega_min, limit, opts)
        evaluations += band.evaluations

        if band.peak >= DC_LIMIT:
            result = PeakResult(band.omega_star, band.peak, 0)
        else:
            result = PeakResult(0.0, DC_LIMIT, 0)

        tail = _evaluate(mag, np.array([2.0 * limit, 4.0 * limit]))
        evaluations += 2
        if tail[1] <= tail[0] <= result.peak:
            return PeakResult(result.omega_star, result.peak, evaluations)

        logger.debug(
            f"Tail check failed at {limit:.3g} rad/s (attempt {attempt + 1}): "
            f"{tail.tolist()} vs peak {result.peak:.6f}"
        )
        limit *= opts.widen_factor

    raise PeakSearchError(
        f"Magnitude tail is not bounded by the peak up to {limit:.3g} rad/s"
    )


def relative_error_profile(
    exact: MagnitudeFunction,
    approx: MagnitudeFunction,
    band: Tuple[float, float] = DEFAULT_BAND,
    npoints: int = 501,
) -> FrequencySeries:
    """Relative error ``100 (exact - approx) / exact`` on a uniform grid."""
    if npoints < 2:
        raise ConfigurationError("An error profile needs at least 2 points")
    omega = np.linspace(band[0], band[1], npoints)
    reference = _evaluate(exact, omega)
    if np.any(reference <= 0):
        raise ConfigurationError("Exact magnitude must be positive on the band")
    percent = 100.0 * (reference - _evaluate(approx, omega)) / reference
    return FrequencySeries(omega=omega, values=percent)


def magnitude_profile(
    mag: MagnitudeFunction,
    band: Tuple[float, float] = DEFAULT_BAND,
    npoints: int = 501,
) -> FrequencySeries:
    """Sample ``mag`` on a uniform grid over ``band``."""
    if npoints < 2:
        raise ConfigurationError("A magnitude profile needs at least 2 points")
    omega = np.linspace(band[0], band[1], npoints)
    return FrequencySeries(omega=omega, values=_evaluate(mag, omega))
