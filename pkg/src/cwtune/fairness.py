"""Proportional-fair reference allocations.

:func:`solve_proportional_fair` maximises the sum of log-throughputs of the
analytic model by projected gradient ascent in the log-odds domain, the same
parameterisation the learning agents use. :func:`grid_oracle` is the brute
force cross-check; it can score grid points with the analytic model or with
any other evaluator, e.g. long simulator runs for multi-domain topologies.
"""

from __future__ import annotations

import itertools
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from cwtune import ParameterError
from cwtune.analytic import StationParams, cw_from_lambda, evaluate_transformed_model
from cwtune.kw import CW_MAX, CW_MIN, cw_to_logy, project
from cwtune.timing import DEFAULT_TIMING, MacTiming

THROUGHPUT_FLOOR = 1000.0  # bit/s
MAX_GRID_POINTS = 10**6


class ClampedThroughputWarning(RuntimeWarning):
    """A non-positive throughput was raised to the floor before taking its log."""


def utility(throughputs: Sequence[float], floor: float = THROUGHPUT_FLOOR) -> float:
    """Sum of natural-log throughputs; values at or below zero are floor-clamped with a warning."""
    s = np.asarray(throughputs, dtype=float)
    if np.any(s <= 0):
        warnings.warn(f"{int(np.sum(s <= 0))} throughput(s) clamped to {floor} bit/s",
                      ClampedThroughputWarning, stacklevel=2)
        s = np.where(s <= 0, floor, s)
    return float(np.sum(np.log(s)))


def _sigmoid(u: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-u))


@dataclass
class FairSolution:
    log_y: np.ndarray
    y_star: np.ndarray
    cw_star: np.ndarray
    utility_star: float
    airtime_star: np.ndarray
    throughput_star: np.ndarray
    stationarity_residual: float
    converged: bool
    iterations: int


class _Objective:
    def __init__(self, stations, timing):
        self.stations = stations
        self.timing = timing
        self.evaluations = 0

    def __call__(self, u: np.ndarray) -> float:
        self.evaluations += 1
        out = evaluate_transformed_model(self.stations, _sigmoid(u), self.timing)
        return float(np.sum(np.log(out.throughput)))

    def gradient(self, u: np.ndarray, h: float) -> np.ndarray:
        g = np.empty_like(u)
        for i in range(u.size):
            e = np.zeros_like(u)
            e[i] = h
            g[i] = (self(u + e) - self(u - e)) / (2 * h)
        return g


def _projected_residual(u, g, lo, hi, atol=1e-12):
    r = g.copy()
    r[(u <= lo + atol) & (g < 0)] = 0.0
    r[(u >= hi - atol) & (g > 0)] = 0.0
    return float(np.max(np.abs(r)))


def _ascend(f: _Objective, u, lo, hi, tol, max_iter, h):
    fu = f(u)
    step = 1.0
    residual = math.inf
    for it in range(1, max_iter + 1):
        g = f.gradient(u, h)
        residual = _projected_residual(u, g, lo, hi)
        if residual < tol:
            return u, fu, residual, True, it
        while True:
            cand = np.clip(u + step * g, lo, hi)
            fc = f(cand)
            # Armijo condition on the projected step
            if fc >= fu + 1e-4 * float(g @ (cand - u)) and fc >= fu:
                break
            step *= 0.5
            if step < 1e-14:
                return u, fu, residual, False, it
        u, fu = cand, fc
        step = min(step * 2.0, 1e3)
    return u, fu, residual, False, max_iter


def solve_proportional_fair(stations: Sequence[StationParams], timing: MacTiming = DEFAULT_TIMING,
                            bounds: tuple[int, int] = (CW_MIN, CW_MAX), starts: int = 5,
                            tol: float = 1e-6, max_iter: int = 10_000, fd_step: float = 1e-5,
                            seed: int = 0) -> FairSolution:
    """Maximise ``sum_i log S_i`` over the CW box, multi-start; best start wins."""
    if len(stations) == 0:
        raise ParameterError("station list is empty")
    if starts < 1:
        raise ParameterError("need at least one start")
    cw_lo, cw_hi = bounds
    lo, hi = cw_to_logy(cw_hi), cw_to_logy(cw_lo)
    n = len(stations)
    f = _Objective(list(stations), timing)
    rng = np.random.default_rng(seed)
    inits = [np.full(n, 0.5 * (lo + hi))] + [rng.uniform(lo, hi, n) for _ in range(starts - 1)]
    best = None
    total_iter = 0
    for u0 in inits:
        u, fu, res, ok, it = _ascend(f, u0, lo, hi, tol, max_iter, fd_step)
        total_iter += it
        if best is None or fu > best[1]:
            best = (u, fu, res, ok)
    u, fu, res, ok = best
    if not ok:
        warnings.warn(f"proportional-fair solver stopped with residual {res:.3g}", RuntimeWarning,
                      stacklevel=2)
    lam = _sigmoid(u)
    out = evaluate_transformed_model(stations, lam, timing)
    return FairSolution(
        log_y=u, y_star=np.exp(u), cw_star=np.array([cw_from_lambda(x) for x in lam]),
        utility_star=fu, airtime_star=out.airtime_share, throughput_star=out.throughput,
        stationarity_residual=res, converged=ok, iterations=total_iter,
    )


@dataclass
class GridResult:
    cw: tuple[int, ...]
    utility: float
    airtime: np.ndarray | None
    points: int


class AnalyticUtility:
    """Scores a CW vector with the analytic model."""

    def __init__(self, stations: Sequence[StationParams], timing: MacTiming = DEFAULT_TIMING):
        self.stations = list(stations)
        self.timing = timing

    def __call__(self, cws: tuple[int, ...]) -> tuple[float, np.ndarray]:
        lam = np.array([2.0 / (c + 1.0) for c in cws])
        out = evaluate_transformed_model(self.stations, lam, self.timing)
        return float(np.sum(np.log(out.throughput))), out.airtime_share


def grid_oracle(n: int, cw_grid: Sequence[int],
                evaluate: Callable[[tuple[int, ...]], tuple[float, np.ndarray | None]],
                workers: int = 1) -> GridResult:
    """Exhaustive argmax of ``evaluate`` over ``cw_grid ** n``.

    Ties go to the lexicographically smallest CW vector. With ``workers > 1`` the
    points are scored in separate processes (``evaluate`` must be picklable);
    results are merged in grid order, so the answer does not depend on it.
    """
    grid = sorted(set(int(c) for c in cw_grid))
    if not grid:
        raise ParameterError("empty CW grid")
    size = len(grid) ** n
    if size > MAX_GRID_POINTS:
        raise ParameterError(f"grid has {size} points, limit is {MAX_GRID_POINTS}")
    points = list(itertools.product(grid, repeat=n))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            scores = list(pool.map(evaluate, points, chunksize=max(1, len(points) // (4 * workers))))
    else:
        scores = [evaluate(p) for p in points]
    best_i = 0
    for i, (u, _) in enumerate(scores):
        if u > scores[best_i][0]:
            best_i = i
    u, air = scores[best_i]
    return GridResult(points[best_i], u, None if air is None else np.asarray(air), size)


def analytic_grid_oracle(stations: Sequence[StationParams], cw_grid: Sequence[int],
                         timing: MacTiming = DEFAULT_TIMING) -> GridResult:
    return grid_oracle(len(stations), cw_grid, AnalyticUtility(stations, timing))


def grid_cell(cw: float, cw_grid: Sequence[int]) -> tuple[int, int]:
    """Neighbouring grid values bracketing ``cw`` (clamped at the grid ends)."""
    grid = sorted(cw_grid)
    lo = max([c for c in grid if c <= cw], default=grid[0])
    hi = min([c for c in grid if c >= cw], default=grid[-1])
    return lo, hi


__all__ = [
    "THROUGHPUT_FLOOR", "AnalyticUtility", "ClampedThroughputWarning", "FairSolution", "GridResult",
    "analytic_grid_oracle", "grid_cell", "grid_oracle", "project", "solve_proportional_fair", "utility",
]
