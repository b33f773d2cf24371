"""Randomized property suites with per-trial records and deterministic seeding."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Literal

import numpy as np

from pnorm.block_algebra import (
    BlockDiagAlgebra,
    ColumnModuleElement,
    Composition,
    RowModuleElement,
    column_block,
    column_slice,
    stacked_norm,
    transpose_element,
)
from pnorm.contracts import OptimizerConfig, PropertyFailure, VerifySummary
from pnorm.matrix_core import (
    INF,
    PExponent,
    double_max_residual,
    dual_norm_residual,
    has_exact_formula,
    holder_pairing,
    op_norm,
    rng_for,
    transpose_duality_residual,
    vector_p_norm,
)
from pnorm.module_pairing import (
    a_zeta,
    b_eta,
    constructive_witness_a0,
    constructive_witness_b0,
    cstar_gap,
    full_algebra_witness_eta,
    full_algebra_witness_zeta,
    pairing,
)
from pnorm.telemetry import start_span

logger = logging.getLogger(__name__)

Check = tuple[float, float]
TrialHandler = Callable[[np.random.Generator, OptimizerConfig], dict[str, Check]]

DUALITY_EXPONENTS = (PExponent(1.0), PExponent(1.5), PExponent(2.0), PExponent(2.5), INF)
MODULE_EXPONENTS = (PExponent(1.0), PExponent(1.5), PExponent(2.0), PExponent(3.0))
_COMPOSITIONS = ((1,), (2,), (3,), (1, 1), (1, 1, 1), (1, 2, 1))


@dataclass
class TrialRecord:
    trial: int
    seed: list[int]
    passed: bool
    residuals: dict[str, float] = field(default_factory=dict)
    tolerances: dict[str, float] = field(default_factory=dict)
    issues: list[str] = field(default_factory=list)


@dataclass
class SuiteOutcome:
    status: Literal["passed", "failed"]
    records: list[TrialRecord]
    summary: VerifySummary


def _tolerance(p: PExponent, exact: float, estimated: float) -> float:
    return exact if has_exact_formula(p, p) else estimated


def _complex(rng: np.random.Generator, *shape: int) -> np.ndarray:
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def _pick(rng: np.random.Generator, options: tuple):
    return options[int(rng.integers(len(options)))]


@lru_cache(maxsize=16)
def _block_algebra(parts: tuple[int, ...]) -> BlockDiagAlgebra:
    return BlockDiagAlgebra(Composition(parts))


def _random_element(rng: np.random.Generator, algebra: BlockDiagAlgebra, n: int, cls):
    blocks = [algebra.element(_complex(rng, algebra.size)) for _ in range(n)]
    return cls(algebra, blocks)


def duality_trial(rng: np.random.Generator, cfg: OptimizerConfig) -> dict[str, Check]:
    rows, cols = (int(value) for value in rng.integers(1, 6, size=2))
    p = _pick(rng, DUALITY_EXPONENTS)
    q = _pick(rng, DUALITY_EXPONENTS)
    a = _complex(rng, rows, cols)
    exact = has_exact_formula(p, q) and has_exact_formula(q.conjugate(), p.conjugate())
    return {"transpose_duality": (transpose_duality_residual(a, p, q, cfg), 1e-6 if exact else 2e-3)}


def holder_trial(rng: np.random.Generator, cfg: OptimizerConfig) -> dict[str, Check]:
    rows, cols = (int(value) for value in rng.integers(1, 5, size=2))
    p = _pick(rng, DUALITY_EXPONENTS)
    q = _pick(rng, DUALITY_EXPONENTS)
    eta = _complex(rng, cols)
    a = _complex(rng, rows, cols)
    estimate = op_norm(a, p, q, cfg)
    image = a @ estimate.primal_witness
    functional = _complex(rng, rows)
    functional_dual = vector_p_norm(functional, q.conjugate())
    bound = estimate.value * functional_dual * vector_p_norm(estimate.primal_witness, p)
    return {
        "holder_dual_norm": (dual_norm_residual(eta, p, rng), 1e-9),
        "double_max": (double_max_residual(estimate, a), 1e-9),
        "achievedness": (
            abs(vector_p_norm(image, q) - estimate.value) / max(1.0, estimate.value),
            1e-12,
        ),
        "holder_bound": (max(0.0, abs(holder_pairing(functional, image)) - bound), 1e-9),
    }


def block_lemma_trial(rng: np.random.Generator, cfg: OptimizerConfig) -> dict[str, Check]:
    algebra = _block_algebra(_pick(rng, _COMPOSITIONS))
    n = int(rng.integers(1, 4))
    p = _pick(rng, MODULE_EXPONENTS)
    tol = _tolerance(p, 1e-6, 1e-3)
    a = _random_element(rng, algebra, n, ColumnModuleElement)
    b = _random_element(rng, algebra, n, RowModuleElement)
    checks = {
        "column_lemma": (abs(op_norm(a.matrix, p, p, cfg).value - stacked_norm(a, p, cfg)), tol),
        "row_lemma": (abs(op_norm(b.matrix, p, p, cfg).value - stacked_norm(b, p, cfg)), tol),
        "row_transpose": (
            abs(op_norm(b.matrix, p, p, cfg).value - stacked_norm(transpose_element(b), p.conjugate(), cfg)),
            tol,
        ),
    }
    if has_exact_formula(p, p):
        slice_gap = max(
            abs(op_norm(column_slice(a, j), p, p).value - op_norm(column_block(a, j), p, p).value)
            for j in range(1, algebra.composition.k + 1)
        )
        checks["slice_block"] = (slice_gap, 1e-12 * max(1.0, stacked_norm(a, p)))
    return checks


def main_t1_trial(rng: np.random.Generator, cfg: OptimizerConfig) -> dict[str, Check]:
    d = int(rng.integers(1, 4))
    n = int(rng.integers(1, 4))
    p = _pick(rng, MODULE_EXPONENTS)
    tol = _tolerance(p, 1e-9, 1e-3)
    algebra = _block_algebra((d,))
    eta = _complex(rng, n * d)
    zeta = _complex(rng, n * d)
    a = _random_element(rng, algebra, n, ColumnModuleElement)
    b = _random_element(rng, algebra, n, RowModuleElement)
    eta_witness = full_algebra_witness_eta(a, p, cfg)
    zeta_witness = full_algebra_witness_zeta(b, p, cfg)
    a_norm = a.norm(p, cfg).value
    b_norm = b.norm(p, cfg).value
    checks = {
        "b_eta_isometry": (
            abs(b_eta(eta, d, n).norm(p, cfg).value - vector_p_norm(eta, p.conjugate())),
            tol * max(1.0, vector_p_norm(eta, p.conjugate())),
        ),
        "a_zeta_isometry": (
            abs(a_zeta(zeta, d, n).norm(p, cfg).value - vector_p_norm(zeta, p)),
            tol * max(1.0, vector_p_norm(zeta, p)),
        ),
        "eta_attains": (abs(a_norm - eta_witness.value), tol * max(1.0, a_norm)),
        "zeta_attains": (abs(b_norm - zeta_witness.value), tol * max(1.0, b_norm)),
    }
    if has_exact_formula(p, p) and a_norm > 0 and b_norm > 0:
        unit_a = ColumnModuleElement(algebra, [block / a_norm for block in a.blocks])
        unit_b = RowModuleElement(algebra, [block / b_norm for block in b.blocks])
        contraction = op_norm(pairing(unit_b, unit_a), p, p).value
        checks["pairing_contractive"] = (max(0.0, contraction - 1.0), 1e-9)
    return checks


def main_t2_trial(rng: np.random.Generator, cfg: OptimizerConfig) -> dict[str, Check]:
    algebra = _block_algebra(_pick(rng, _COMPOSITIONS))
    n = int(rng.integers(1, 4))
    p = _pick(rng, MODULE_EXPONENTS)
    tol = _tolerance(p, 1e-6, 1e-3)
    a = _random_element(rng, algebra, n, ColumnModuleElement)
    b = _random_element(rng, algebra, n, RowModuleElement)
    b0 = constructive_witness_b0(a, p, cfg)
    a0 = constructive_witness_a0(b, p, cfg)
    report = cstar_gap(a, algebra, p, cfg)
    return {
        "b0_contractive": (max(0.0, b0.norm(p, cfg).value - 1.0), 1e-9),
        "b0_attains": (max(0.0, a.norm(p, cfg).value - op_norm(pairing(b0, a), p, p, cfg).value), tol),
        "a0_contractive": (max(0.0, a0.norm(p, cfg).value - 1.0), 1e-9),
        "a0_attains": (max(0.0, b.norm(p, cfg).value - op_norm(pairing(b, a0), p, p, cfg).value), tol),
        "constructive_gap": (
            max(0.0, report.gap) if report.certified == "constructive" else 1.0,
            tol,
        ),
    }


SUITES: dict[str, TrialHandler] = {
    "duality": duality_trial,
    "holder": holder_trial,
    "block-lemma": block_lemma_trial,
    "mainT1": main_t1_trial,
    "mainT2": main_t2_trial,
}


class PropertySuiteExecutor:
    """Runs a property suite trial by trial; trial t draws from default_rng([seed, t])."""

    def __init__(
        self,
        handlers: dict[str, TrialHandler] | None = None,
        *,
        cfg: OptimizerConfig | None = None,
    ) -> None:
        self._handlers = handlers if handlers is not None else SUITES
        self._cfg = cfg or OptimizerConfig()

    def execute(self, suite: str, trials: int, seed: int = 0) -> SuiteOutcome:
        if suite not in self._handlers:
            raise ValueError(f"Unknown verify suite '{suite}'.")
        if trials < 1:
            raise ValueError("trials must be >= 1.")
        records: list[TrialRecord] = []
        failures: list[PropertyFailure] = []
        max_residuals: dict[str, float] = {}
        tolerances: dict[str, float] = {}

        with start_span("verify.suite") as span:
            for trial in range(trials):
                record, trial_failures = self._run_trial(suite, trial, seed)
                records.append(record)
                failures.extend(trial_failures)
                for name, residual in record.residuals.items():
                    max_residuals[name] = max(max_residuals.get(name, 0.0), residual)
                    tolerances[name] = max(tolerances.get(name, 0.0), record.tolerances[name])
            if span is not None:
                span.set_attribute("verify.suite", suite)
                span.set_attribute("verify.trials", trials)

        summary = VerifySummary(
            suite=suite,
            trials=trials,
            seed=seed,
            passed=not failures,
            max_residuals=max_residuals,
            tolerances=tolerances,
            failures=failures,
        )
        if failures:
            logger.warning("Suite %s failed %d checks; first offending seed %s.", suite, len(failures), failures[0].seed)
        return SuiteOutcome(status="failed" if failures else "passed", records=records, summary=summary)

    def _run_trial(self, suite: str, trial: int, seed: int) -> tuple[TrialRecord, list[PropertyFailure]]:
        handler = self._handlers[suite]
        trial_seed = [seed, trial]
        try:
            checks = handler(rng_for(seed, trial), self._cfg)
        except Exception as exc:  # noqa: BLE001
            failure = PropertyFailure(
                property="handler_exception",
                trial=trial,
                seed=trial_seed,
                residual=0.0,
                tolerance=0.0,
                detail=f"{type(exc).__name__}: {exc}",
            )
            return (
                TrialRecord(trial=trial, seed=trial_seed, passed=False, issues=["handler_exception"]),
                [failure],
            )

        residuals: dict[str, float] = {}
        tolerances: dict[str, float] = {}
        failures: list[PropertyFailure] = []
        for name, (residual, tolerance) in checks.items():
            residuals[name] = float(residual)
            tolerances[name] = float(tolerance)
            if not residual <= tolerance:
                failures.append(
                    PropertyFailure(
                        property=name,
                        trial=trial,
                        seed=trial_seed,
                        residual=float(residual),
                        tolerance=float(tolerance),
                    )
                )
        record = TrialRecord(
            trial=trial,
            seed=trial_seed,
            passed=not failures,
            residuals=residuals,
            tolerances=tolerances,
            issues=[failure.property for failure in failures],
        )
        return record, failures
