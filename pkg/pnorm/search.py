"""Derivative-free maximization helpers used by the pairing search and the Claim oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import optimize

INV_PHI = (math.sqrt(5) - 1) / 2
INV_PHI_SQUARED = (3 - math.sqrt(5)) / 2

Objective = Callable[[np.ndarray], float]


@dataclass(frozen=True)
class AscentResult:
    x: np.ndarray
    value: float
    evaluations: int


def coordinate_ascent(
    objective: Objective,
    x0: np.ndarray,
    *,
    initial_step: float = 0.25,
    min_step: float = 1e-6,
    max_evals: int = 10_000,
) -> AscentResult:
    """Coordinate-wise quadratic line search.

    Each coordinate probes ±h, jumps to the vertex of the fitted parabola when it is
    concave, and doubles or halves its own step depending on success.
    """
    x = np.array(x0, dtype=float)
    fx = objective(x)
    evaluations = 1
    steps = np.full(x.size, initial_step)
    max_step = 4.0 * initial_step

    # a coordinate sweep step costs up to three evaluations
    while evaluations + 3 <= max_evals and steps.max() >= min_step:
        for i in range(x.size):
            if steps[i] < min_step:
                continue
            if evaluations + 3 > max_evals:
                break
            h = steps[i]
            best_x, best_f = x, fx

            forward = x.copy()
            forward[i] += h
            f_plus = objective(forward)
            backward = x.copy()
            backward[i] -= h
            f_minus = objective(backward)
            evaluations += 2
            if f_plus > best_f:
                best_x, best_f = forward, f_plus
            if f_minus > best_f:
                best_x, best_f = backward, f_minus

            curvature = f_plus - 2.0 * fx + f_minus
            if curvature < 0.0:
                offset = float(np.clip(h * (f_minus - f_plus) / (2.0 * curvature), -4 * h, 4 * h))
                if offset != 0.0 and abs(abs(offset) - h) > 1e-15:
                    vertex = x.copy()
                    vertex[i] += offset
                    f_vertex = objective(vertex)
                    evaluations += 1
                    if f_vertex > best_f:
                        best_x, best_f = vertex, f_vertex

            if best_f > fx:
                x, fx = best_x, best_f
                steps[i] = min(2.0 * h, max_step)
            else:
                steps[i] = 0.5 * h
    return AscentResult(x=x, value=float(fx), evaluations=evaluations)


def nelder_mead_polish(
    objective: Objective,
    x0: np.ndarray,
    *,
    max_evals: int = 4_000,
    rounds: int = 3,
    xatol: float = 1e-10,
    fatol: float = 1e-13,
) -> AscentResult:
    """Restarted Nelder–Mead on -objective; each round rebuilds the simplex around the incumbent."""
    x = np.array(x0, dtype=float)
    fx = objective(x)
    evaluations = 1
    for _ in range(rounds):
        result = optimize.minimize(
            lambda point: -objective(point),
            x,
            method="Nelder-Mead",
            options={"maxfev": max_evals, "xatol": xatol, "fatol": fatol, "adaptive": True},
        )
        evaluations += int(result.nfev)
        if -result.fun <= fx + fatol:
            break
        x, fx = np.asarray(result.x, dtype=float), float(-result.fun)
    return AscentResult(x=x, value=float(fx), evaluations=evaluations)


def golden_section_max(
    func: Callable[[float], float], a: float, b: float, tol: float = 1e-12
) -> tuple[float, float, tuple[float, float]]:
    """Golden-section search for the maximum of a unimodal function on [a, b].

    Returns (argmax, max, final bracket).
    """
    a, b = min(a, b), max(a, b)
    h = b - a
    if h <= tol:
        mid = 0.5 * (a + b)
        return mid, float(func(mid)), (a, b)

    steps = int(math.ceil(math.log(tol / h) / math.log(INV_PHI)))
    c = a + INV_PHI_SQUARED * h
    d = a + INV_PHI * h
    yc = func(c)
    yd = func(d)
    for _ in range(steps - 1):
        if yc > yd:
            b, d, yd = d, c, yc
            h = INV_PHI * h
            c = a + INV_PHI_SQUARED * h
            yc = func(c)
        else:
            a, c, yc = c, d, yd
            h = INV_PHI * h
            d = a + INV_PHI * h
            yd = func(d)
    if yc > yd:
        return c, float(yc), (a, d)
    return d, float(yd), (c, b)


def grid_then_golden(
    func: Callable[[np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    *,
    points: int = 10_000,
    tol: float = 1e-12,
) -> tuple[float, float, tuple[float, float]]:
    """Dense grid on [lo, hi) then golden-section refinement around the best grid cell.

    `func` must accept numpy arrays. Ties on the grid go to the smallest abscissa.
    """
    grid = lo + (hi - lo) * np.arange(points) / points
    values = np.asarray(func(grid), dtype=float)
    index = int(np.argmax(values))
    spacing = (hi - lo) / points
    left = grid[index] - spacing
    right = grid[index] + spacing
    x, fx, bracket = golden_section_max(lambda t: float(func(np.array([t]))[0]), left, right, tol)
    if values[index] >= fx:
        return float(grid[index]), float(values[index]), (left, right)
    return x, fx, bracket
