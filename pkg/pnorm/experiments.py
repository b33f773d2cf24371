"""Counterexamples to C*-likeness and the sweep over p for the SD instance."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from pnorm.block_algebra import ColumnModuleElement, ParametrizedAlgebra
from pnorm.contracts import GapReport, InputError, OptimizerConfig, RunManifest, SweepResult
from pnorm.matrix_core import ExponentLike, PExponent, op_norm_exact, rng_for
from pnorm.module_pairing import cstar_gap
from pnorm.search import grid_then_golden
from pnorm.telemetry import record_gap, start_span

logger = logging.getLogger(__name__)

SQRT10 = math.sqrt(10.0)
SD_NORM = 4.0
SD_TOLERANCE = 1e-4
SD_RESTARTS = 256
DEFAULT_SWEEP_GRID: tuple[float, ...] = (1.1, 1.25, 1.5, 1.75, 2.0, 2.5, 3.0, 4.0, 6.0)
CSV_COLUMNS = ("p", "norm", "sup", "gap", "certified", "restarts", "seed")
_CLAIM_GRID_POINTS = 10_000


class RegressionError(AssertionError):
    """Raised when a reproduced counterexample drifts from its known value."""


@lru_cache(maxsize=1)
def upper_triangular_algebra() -> ParametrizedAlgebra:
    """Strictly upper triangular 2×2 matrices; every product in it vanishes."""
    return ParametrizedAlgebra([[[0, 1], [0, 0]]], name="upper-triangular")


def upper_triangular_example(
    p: ExponentLike,
    n: int,
    cfg: OptimizerConfig | None = None,
    *,
    element: ColumnModuleElement | None = None,
) -> GapReport:
    config = cfg or OptimizerConfig()
    algebra = upper_triangular_algebra()
    if element is None:
        if n < 1:
            raise ValueError("n must be >= 1.")
        rng = rng_for(config.seed, 2)
        coords = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        element = ColumnModuleElement(algebra, [algebra.element([c]) for c in coords])
    return cstar_gap(element, algebra, p, config)


@lru_cache(maxsize=1)
def sd_algebra() -> ParametrizedAlgebra:
    """{u·diag(λ1, λ2)·u⁻¹} with u the normalized 2×2 Hadamard matrix (u⁻¹ = u)."""
    u = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2.0)
    basis = [u @ np.diag([1.0, 0.0]) @ u, u @ np.diag([0.0, 1.0]) @ u]
    return ParametrizedAlgebra(basis, name="sd")


def sd_element(p: ExponentLike | None = None) -> ColumnModuleElement:
    """𝐚 = [a_1; a_2] with eigenvalue parameters (2, 1) and (1, 2); independent of p."""
    algebra = sd_algebra()
    return ColumnModuleElement(algebra, [algebra.element([2, 1]), algebra.element([1, 2])])


def sd_counterexample(cfg: OptimizerConfig | None = None) -> GapReport:
    config = cfg or OptimizerConfig(restarts=SD_RESTARTS)
    element = sd_element()
    with start_span("experiments.sd_counterexample") as span:
        norm = op_norm_exact(element.matrix, 1, 1).value
        if abs(norm - SD_NORM) > 1e-12:
            raise RegressionError(f"SD element norm is {norm!r}, expected 4.")
        report = cstar_gap(element, sd_algebra(), 1, config)
        record_gap(span, report)
    if report.pairing_sup < SQRT10 - SD_TOLERANCE:
        raise RegressionError(
            f"SD pairing supremum {report.pairing_sup:.10f} is below √10 − {SD_TOLERANCE:g}; "
            "increase restarts or check the search."
        )
    return report


@dataclass(frozen=True)
class ClaimCase:
    label: str
    value: float
    argmax: float | None


def _case_zero(theta: np.ndarray) -> np.ndarray:
    return np.zeros_like(theta)


def _case_single(theta: np.ndarray) -> np.ndarray:
    phase = np.exp(1j * theta)
    return np.abs(3 * phase) + np.abs(-phase)


def _case_diagonal(theta: np.ndarray) -> np.ndarray:
    c = np.cos(theta)
    return np.sqrt(np.maximum(18 + 18 * c, 0.0)) + np.sqrt(np.maximum(2 - 2 * c, 0.0))


def _case_diagonal_slope(theta: float) -> float:
    c = math.cos(theta)
    return math.sin(theta) * (-9 / math.sqrt(18 + 18 * c) + 1 / math.sqrt(2 - 2 * c))


def _case_crossed(theta: np.ndarray) -> np.ndarray:
    c = np.cos(theta)
    return np.sqrt(10 - 6 * c) + np.sqrt(10 + 6 * c)


def _case_crossed_slope(theta: float) -> float:
    c = math.cos(theta)
    return math.sin(theta) * (3 / math.sqrt(10 - 6 * c) - 3 / math.sqrt(10 + 6 * c))


_CLAIM_CASES: tuple[tuple[str, Callable[[np.ndarray], np.ndarray], Callable[[float], float] | None], ...] = (
    ("(0,0,0,0)", _case_zero, None),
    ("(0,0,1,0)", _case_single, None),
    ("(1,0,1,0)", _case_diagonal, _case_diagonal_slope),
    ("(1,0,0,1)", _case_crossed, _case_crossed_slope),
)


def _maximize_case(
    func: Callable[[np.ndarray], np.ndarray], slope: Callable[[float], float] | None
) -> tuple[float, float | None]:
    theta, value, bracket = grid_then_golden(func, 0.0, 2 * math.pi, points=_CLAIM_GRID_POINTS)
    if slope is None:
        return value, None
    # The maximum is flat, so its location comes from the sign change of the slope.
    spacing = 2 * math.pi / _CLAIM_GRID_POINTS
    left, right = theta - spacing, theta + spacing
    if slope(left) > 0 > slope(right):
        theta = optimize.brentq(slope, left, right, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        value = max(value, float(func(np.array([theta]))[0]))
    return value, theta


def sd_claim_cases() -> list[ClaimCase]:
    """The four extreme-point cases of the SD supremum, values before halving."""
    cases = []
    for label, func, slope in _CLAIM_CASES:
        value, argmax = _maximize_case(func, slope)
        cases.append(ClaimCase(label=label, value=value, argmax=argmax))
    return cases


def sd_claim_oracle() -> float:
    return max(case.value for case in sd_claim_cases()) / 2.0


def _worker_count() -> int:
    raw = os.getenv("PNORM_THREADS")
    if raw and raw.strip():
        try:
            return max(1, int(raw.strip()))
        except ValueError as exc:
            raise InputError(f"PNORM_THREADS must be an integer, got {raw!r}.") from exc
    return os.cpu_count() or 1


def _sweep_point(p: PExponent, cfg: OptimizerConfig) -> GapReport:
    with start_span("experiments.sweep_point") as span:
        report = cstar_gap(sd_element(p), sd_algebra(), p, cfg)
        if span is not None:
            span.set_attribute("sweep.p", str(p))
        record_gap(span, report)
    logger.info("sweep p=%s gap=%.10g (%s)", p, report.gap, report.certified)
    return report


def sd_sweep(
    p_grid: Sequence[ExponentLike] = DEFAULT_SWEEP_GRID,
    cfg: OptimizerConfig | None = None,
    *,
    threads: int | None = None,
) -> SweepResult:
    """Gap of the SD element at each p; point i runs with seed cfg.seed + i.

    Points run in worker processes; `threads` (or PNORM_THREADS) caps their number.
    """
    config = cfg or OptimizerConfig(restarts=SD_RESTARTS)
    grid = [PExponent.of(p) for p in p_grid]
    if not grid:
        raise ValueError("Sweep grid must not be empty.")
    if any(p.is_infinite for p in grid):
        raise ValueError("Sweep exponents must be finite.")
    configs = [config.with_seed(config.seed + index) for index in range(len(grid))]

    workers = min(threads or _worker_count(), len(grid))
    if workers == 1:
        reports = [_sweep_point(p, point_cfg) for p, point_cfg in zip(grid, configs)]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_sweep_point, grid, configs))

    return SweepResult(
        p_grid=[p.to_json() for p in grid],
        norms=[report.element_norm for report in reports],
        sups=[report.pairing_sup for report in reports],
        gaps=[report.gap for report in reports],
        certified=[report.certified for report in reports],
        seeds=[config.seed + index for index in range(len(grid))],
        config=config,
    )


def write_sweep_csv(result: SweepResult, path: str | Path, manifest: RunManifest) -> Path:
    """Write the sweep CSV plus `<path>.manifest.json`; the CSV omits the run duration."""
    target = Path(path)
    header = manifest.model_dump(mode="json", exclude={"duration_seconds"})
    with target.open("w", newline="", encoding="utf-8") as handle:
        handle.write(f"# command: {header['command']}\n")
        handle.write(f"# tool_version: {header['tool_version']}\n")
        handle.write(f"# seed: {header['seed']}\n")
        handle.write(f"# arguments: {json.dumps(header['arguments'], sort_keys=True)}\n")
        writer = csv.DictWriter(handle, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in result.rows():
            writer.writerow({key: repr(value) if isinstance(value, float) else value for key, value in row.items()})
    sidecar = target.with_name(target.name + ".manifest.json")
    sidecar.write_text(
        json.dumps(manifest.model_dump(mode="json"), ensure_ascii=True, sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    return target


def self_module_gap(
    x: object,
    algebra: ParametrizedAlgebra,
    p: ExponentLike,
    cfg: OptimizerConfig | None = None,
) -> GapReport:
    """Gap report of the pair (A, A): the element x ∈ A viewed as a module element with n = 1."""
    element = x if isinstance(x, ColumnModuleElement) else ColumnModuleElement(algebra, [x])
    return cstar_gap(element, algebra, p, cfg)
