"""
Derivative-free minimization: Nelder-Mead simplex with restarts, and seeded
multi-start over independent initial points.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from platoon_synth.exceptions import ConfigurationError

logger = logging.getLogger(__name__)

Objective = Callable[[np.ndarray], float]
Sampler = Callable[[np.random.Generator], Sequence[float]]


@dataclass(frozen=True)
class OptimizerOptions:
    """Nelder-Mead tunables."""

    max_iters: int = 2000
    x_tol: float = 1e-10
    f_tol: float = 1e-10
    reflection: float = 1.0
    expansion: float = 2.0
    contraction: float = 0.5
    shrink: float = 0.5
    initial_step: float = 0.05
    restarts: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.reflection <= 0:
            raise ConfigurationError("Reflection coefficient must be positive")
        if self.expansion <= 1:
            raise ConfigurationError("Expansion coefficient must exceed 1")
        if not 0 < self.contraction < 1:
            raise ConfigurationError("Contraction coefficient must lie in (0, 1)")
        if not 0 < self.shrink < 1:
            raise ConfigurationError("Shrink coefficient must lie in (0, 1)")
        if self.max_iters < 1:
            raise ConfigurationError("max_iters must be >= 1")
        if self.initial_step <= 0:
            raise ConfigurationError("initial_step must be positive")
        if self.restarts < 0:
            raise ConfigurationError("restarts must be >= 0")
        if self.x_tol < 0 or self.f_tol < 0:
            raise ConfigurationError("Tolerances must be nonnegative")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "OptimizerOptions":
        return cls(**data)


@dataclass
class NelderMeadResult:
    """Outcome of one (possibly restarted) Nelder-Mead run."""

    x: np.ndarray
    fun: float
    iterations: int
    evaluations: int
    budget_exhausted: bool
    trace: List[float] = field(default_factory=list)

    def to_dict(self, include_trace: bool = False) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "x": self.x.tolist(),
            "fun": self.fun,
            "iterations": self.iterations,
            "evaluations": self.evaluations,
            "budget_exhausted": self.budget_exhausted,
        }
        if include_trace:
            data["trace"] = list(self.trace)
        return data


@dataclass
class MultiStartResult:
    """Best run of a multi-start search and whether it passed the acceptance test."""

    best: NelderMeadResult
    start_index: int
    accepted: bool
    runs: int

    @property
    def x(self) -> np.ndarray:
        return self.best.x

    @property
    def fun(self) -> float:
        return self.best.fun


def initial_simplex(x0: np.ndarray, step: float) -> np.ndarray:
    """``x0`` plus one vertex per axis offset by ``max(step, step * |x0_i|)``."""
    n = x0.size
    simplex = np.tile(x0, (n + 1, 1))
    for i in range(n):
        simplex[i + 1, i] += max(step, step * abs(x0[i]))
    return simplex


def _run_simplex(
    f: Objective,
    x0: np.ndarray,
    opts: OptimizerOptions,
    max_iters: int,
) -> NelderMeadResult:
    simplex = initial_simplex(x0, opts.initial_step)
    values = np.array([f(v) for v in simplex], dtype=float)
    evaluations = simplex.shape[0]
    trace: List[float] = []
    n = x0.size

    iterations = 0
    converged = False
    while iterations < max_iters:
        order = np.argsort(values, kind="stable")
        simplex = simplex[order]
        values = values[order]
        trace.append(float(values[0]))

        diameter = float(np.max(np.abs(simplex[1:] - simplex[0])))
        spread = float(values[-1] - values[0])
        if diameter < opts.x_tol and spread < opts.f_tol:
            converged = True
            break

        iterations += 1
        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]

        # Reflection
        xr = centroid + opts.reflection * (centroid - worst)
        fr = f(xr)
        evaluations += 1
        if values[0] <= fr < values[-2]:
            simplex[-1], values[-1] = xr, fr
            continue

        # Expansion
        if fr < values[0]:
            xe = centroid + opts.expansion * (xr - centroid)
            fe = f(xe)
            evaluations += 1
            if fe < fr:
                simplex[-1], values[-1] = xe, fe
            else:
                simplex[-1], values[-1] = xr, fr
            continue

        # Contraction, outside or inside the simplex
        if fr < values[-1]:
            xc = centroid + opts.contraction * (xr - centroid)
            fc = f(xc)
            evaluations += 1
            if fc <= fr:
                simplex[-1], values[-1] = xc, fc
                continue
        else:
            xc = centroid + opts.contraction * (worst - centroid)
            fc = f(xc)
            evaluations += 1
            if fc < values[-1]:
                simplex[-1], values[-1] = xc, fc
                continue

        # Shrink toward the best vertex
        for i in range(1, n + 1):
            simplex[i] = simplex[0] + opts.shrink * (simplex[i] - simplex[0])
            values[i] = f(simplex[i])
        evaluations += n

    order = np.argsort(values, kind="stable")
    best = order[0]
    return NelderMeadResult(
        x=simplex[best].copy(),
        fun=float(values[best]),
        iterations=iterations,
        evaluations=evaluations,
        budget_exhausted=not converged,
        trace=trace,
    )


def nelder_mead(
    f: Objective, x0: Sequence[float], options: Optional[OptimizerOptions] = None
) -> NelderMeadResult:
    """
    Minimize ``f`` from ``x0`` with the Nelder-Mead simplex method.

    The run stops when both the simplex diameter and the spread of vertex values
    fall below their tolerances, or when the iteration budget is used up. A
    converged run is restarted from its best vertex with a fresh simplex up to
    ``options.restarts`` times; a restart that improves by less than ``f_tol`` ends
    the search.

    Args:
        f: Objective, total on R^n
        x0: Initial point
        options: Optimizer tunables

    Returns:
        NelderMeadResult with the best point found
    """
    opts = options or OptimizerOptions()
    start = np.asarray(x0, dtype=float).copy()
    if start.ndim != 1 or start.size == 0:
        raise ConfigurationError(
            f"x0 must be a non-empty vector, got shape {start.shape}"
        )

    result = _run_simplex(f, start, opts, opts.max_iters)
    total_iters = result.iterations
    total_evals = result.evaluations
    trace = list(result.trace)

    for restart in range(opts.restarts):
        remaining = opts.max_iters - total_iters
        if result.budget_exhausted or remaining <= 0:
            break
        again = _run_simplex(f, result.x, opts, remaining)
        total_iters += again.iterations
        total_evals += again.evaluations
        trace.extend(again.trace)
        improvement = result.fun - again.fun
        if again.fun <= result.fun:
            result = again
        logger.debug(
            f"Restart {restart + 1}: f {again.fun:.10g} (gain {improvement:.3g})"
        )
        if improvement < opts.f_tol:
            break

    return NelderMeadResult(
        x=result.x,
        fun=result.fun,
        iterations=total_iters,
        evaluations=total_evals,
        budget_exhausted=result.budget_exhausted,
        trace=trace,
    )


def _rank_key(result: NelderMeadResult) -> tuple:
    return (result.fun, tuple(result.x.tolist()))


def multi_start(
    f: Objective,
    sampler: Sampler,
    n_starts: int,
    options: Optional[OptimizerOptions] = None,
    max_workers: Optional[int] = None,
    accept: Optional[Callable[[NelderMeadResult], bool]] = None,
) -> MultiStartResult:
    """
    Run Nelder-Mead from ``n_starts`` points drawn by ``sampler``.

    All starting points are drawn up front from one generator seeded with
    ``options.seed``, so the k-th start does not depend on ``n_starts`` or on the
    worker schedule. Without ``accept`` the run with the lowest ``(f, x)`` wins.
    With ``accept`` the first accepted run in start order wins; if none is
    accepted, the lowest run is returned with ``accepted = False``.

    Args:
        f: Objective, total on R^n
        sampler: Draws one starting point from a numpy Generator
        n_starts: Number of independent runs, at least 1
        options: Optimizer tunables
        max_workers: Thread-pool size; ``None`` or 1 runs sequentially
        accept: Optional predicate selecting admissible runs

    Returns:
        MultiStartResult describing the chosen run
    """
    opts = options or OptimizerOptions()
    if n_starts < 1:
        raise ConfigurationError(f"n_starts must be >= 1, got {n_starts}")

    rng = np.random.default_rng(opts.seed)
    starts = [np.asarray(sampler(rng), dtype=float) for _ in range(n_starts)]

    results: List[NelderMeadResult] = []
    if max_workers is not None and max_workers > 1 and n_starts > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as executor:
            # map preserves submission order
            results = list(executor.map(lambda x0: nelder_mead(f, x0, opts), starts))
    else:
        for index, x0 in enumerate(starts):
            result = nelder_mead(f, x0, opts)
            results.append(result)
            if accept is not None and accept(result):
                logger.debug(f"Start {index} accepted with f = {result.fun:.6g}")
                return MultiStartResult(result, index, True, len(results))

    if accept is not None:
        for index, result in enumerate(results):
            if accept(result):
                return MultiStartResult(result, index, True, len(results))

    best_index = min(range(len(results)), key=lambda i: _rank_key(results[i]))
    return MultiStartResult(
        results[best_index], best_index, accept is None, len(results)
    )
