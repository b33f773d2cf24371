"""Vector p-norms, Hölder duality and p→q operator norms of dense complex matrices.

Three ways to get an operator norm live here:

* closed forms (`op_norm_exact`) for p = 1, q = ∞ and p = q = 2;
* a batched nonlinear power iteration (`op_norm_estimate`) for everything else;
* a deterministic grid search over the unit p-sphere (`op_norm_oracle`) used to
  cross-check and bracket the estimator on small matrices.

Every value returned is an achieved lower bound: it is ‖a·ξ‖_q for the unit
vector ξ reported as the primal witness.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import linalg

from pnorm.contracts import NormEstimate, OptimizerConfig
from pnorm.telemetry import record_estimate, start_span

logger = logging.getLogger(__name__)

DEFAULT_ORACLE_BUDGET = 64_000_000
_ORACLE_CHUNK = 1 << 18


class DimensionError(ValueError):
    """Raised when matrix or vector shapes do not fit together."""


class UnsupportedExponentError(ValueError):
    """Raised when a closed form is requested for a (p, q) pair that has none."""


class OracleBudgetError(RuntimeError):
    """Raised when the grid oracle would need more points than allowed."""


@dataclass(frozen=True)
class PExponent:
    """An exponent in [1, ∞]. `value=None` is the ∞ tag, never a float infinity."""

    value: float | None

    def __post_init__(self) -> None:
        if self.value is None:
            return
        number = float(self.value)
        if math.isnan(number) or number < 1.0:
            raise ValueError(f"Exponent must be >= 1, got {self.value!r}.")
        if math.isinf(number):
            object.__setattr__(self, "value", None)
        else:
            object.__setattr__(self, "value", number)

    @classmethod
    def of(cls, raw: "ExponentLike") -> "PExponent":
        if isinstance(raw, PExponent):
            return raw
        if isinstance(raw, str):
            text = raw.strip().lower()
            if text in {"inf", "infinity", "∞"}:
                return cls(None)
            try:
                return cls(float(text))
            except ValueError as exc:
                raise ValueError(f"Invalid exponent: '{raw}'.") from exc
        return cls(float(raw))

    @property
    def is_infinite(self) -> bool:
        return self.value is None

    @property
    def is_one(self) -> bool:
        return self.value == 1.0

    @property
    def is_two(self) -> bool:
        return self.value == 2.0

    @property
    def finite(self) -> float:
        if self.value is None:
            raise ValueError("The ∞ exponent has no finite value.")
        return self.value

    def conjugate(self) -> "PExponent":
        if self.value is None:
            return ONE
        if self.value == 1.0:
            return INF
        if self.value == 2.0:
            return TWO
        return PExponent(self.value / (self.value - 1.0))

    def to_json(self) -> float | str:
        return "inf" if self.value is None else self.value

    def __str__(self) -> str:
        return "inf" if self.value is None else f"{self.value:g}"


INF = PExponent(None)
ONE = PExponent(1.0)
TWO = PExponent(2.0)

ExponentLike = Union[PExponent, float, int, str]


def conjugate_exponent(p: ExponentLike) -> PExponent:
    return PExponent.of(p).conjugate()


def rng_for(seed: int, *counters: int) -> np.random.Generator:
    """Counter-based generator split: one independent stream per subtask."""
    return np.random.default_rng([seed, *counters])


def as_matrix(a: object) -> np.ndarray:
    matrix = np.array(a, dtype=np.complex128)
    if matrix.ndim != 2 or matrix.shape[0] < 1 or matrix.shape[1] < 1:
        raise DimensionError(f"Expected a non-empty 2-D matrix, got shape {matrix.shape}.")
    if not np.all(np.isfinite(matrix)):
        raise ValueError("Matrix entries must be finite.")
    matrix.setflags(write=False)
    return matrix


def as_vector(xi: object) -> np.ndarray:
    vector = np.array(xi, dtype=np.complex128).ravel()
    if vector.size < 1:
        raise DimensionError("Expected a non-empty vector.")
    if not np.all(np.isfinite(vector)):
        raise ValueError("Vector entries must be finite.")
    return vector


def _column_norms(x: np.ndarray, p: PExponent) -> np.ndarray:
    mags = np.abs(x)
    if p.is_infinite:
        return mags.max(axis=0)
    if p.is_one:
        return mags.sum(axis=0)
    if p.is_two:
        return np.sqrt((mags * mags).sum(axis=0))
    scale = mags.max(axis=0)
    safe = np.where(scale > 0, scale, 1.0)
    return scale * ((mags / safe) ** p.finite).sum(axis=0) ** (1.0 / p.finite)


def _conjugate_phase(y: np.ndarray) -> np.ndarray:
    mags = np.abs(y)
    phase = np.zeros_like(y)
    np.divide(np.conj(y), mags, out=phase, where=mags > 0)
    return phase


def _duality_columns(y: np.ndarray, q: PExponent) -> np.ndarray:
    """Column-wise duality map J_q; zero columns map to zero."""
    phase = _conjugate_phase(y)
    if q.is_infinite:
        rows = np.argmax(np.abs(y), axis=0)
        cols = np.arange(y.shape[1])
        out = np.zeros_like(y)
        out[rows, cols] = phase[rows, cols]
        return out
    if q.is_one:
        return phase
    mags = np.abs(y)
    scale = mags.max(axis=0)
    scaled = mags / np.where(scale > 0, scale, 1.0)
    weights = scaled ** (q.finite - 1.0)
    norms = _column_norms(scaled, q) ** (q.finite - 1.0)
    return phase * weights / np.where(norms > 0, norms, 1.0)


def vector_p_norm(xi: object, p: ExponentLike) -> float:
    vector = as_vector(xi)
    return float(_column_norms(vector[:, None], PExponent.of(p))[0])


def holder_pairing(eta: object, xi: object) -> complex:
    """Bilinear pairing Σ η_i ξ_i (no conjugation)."""
    left = as_vector(eta)
    right = as_vector(xi)
    if left.shape != right.shape:
        raise DimensionError(f"Pairing needs equal dimensions, got {left.size} and {right.size}.")
    return complex(np.sum(left * right))


def duality_map(y: object, q: ExponentLike) -> np.ndarray:
    """Unit vector η in ℓ^{q'} with ⟨η, y⟩ = ‖y‖_q (zero for y = 0)."""
    vector = as_vector(y)
    return _duality_columns(vector[:, None], PExponent.of(q))[:, 0]


def has_exact_formula(p: ExponentLike, q: ExponentLike) -> bool:
    p_exp = PExponent.of(p)
    q_exp = PExponent.of(q)
    return p_exp.is_one or q_exp.is_infinite or (p_exp.is_two and q_exp.is_two)


def _exact(
    a: np.ndarray, p: PExponent, q: PExponent
) -> tuple[float, np.ndarray, np.ndarray, str]:
    if p.is_one:
        column_norms = _column_norms(a, q)
        j = int(np.argmax(column_norms))
        primal = np.zeros(a.shape[1], dtype=np.complex128)
        primal[j] = 1.0
        image = a[:, j]
        return float(column_norms[j]), primal, _duality_columns(image[:, None], q)[:, 0], "exact_formula"
    if q.is_infinite:
        row_norms = _column_norms(a.T, p.conjugate())
        i = int(np.argmax(row_norms))
        primal = _duality_columns(a[i, :][:, None], p.conjugate())[:, 0]
        image = a @ primal
        value = float(_column_norms(image[:, None], q)[0])
        return value, primal, _duality_columns(image[:, None], q)[:, 0], "exact_formula"
    if p.is_two and q.is_two:
        _, _, vh = linalg.svd(a)
        primal = np.conj(vh[0])
        image = a @ primal
        value = float(_column_norms(image[:, None], q)[0])
        return value, primal, _duality_columns(image[:, None], q)[:, 0], "singular_value"
    raise UnsupportedExponentError(
        f"No closed form for the {p}→{q} operator norm; use op_norm_estimate."
    )


@dataclass(frozen=True)
class _IterationOutcome:
    value: float
    primal: np.ndarray
    iterations: int
    converged: bool


def _random_starts(rng: np.random.Generator, d: int, count: int) -> np.ndarray:
    return rng.standard_normal((d, count)) + 1j * rng.standard_normal((d, count))


def _iterate(
    a: np.ndarray,
    p: PExponent,
    q: PExponent,
    starts: np.ndarray,
    max_iters: int,
    tol: float,
    *,
    until_best: bool = False,
) -> _IterationOutcome:
    """Run ξ ← J_{p'}(aᵀ J_q(aξ)) on every start column; a column only moves when it improves.

    With `until_best` the loop stops as soon as the leading column has converged.
    """
    p_conj = p.conjugate()
    scale = _column_norms(starts, p)
    x = starts / np.where(scale > 0, scale, 1.0)
    at = a.T
    values = _column_norms(a @ x, q)
    converged = np.zeros(x.shape[1], dtype=bool)
    iterations = 0
    while iterations < max_iters:
        iterations += 1
        z = at @ _duality_columns(a @ x, q)
        movable = _column_norms(z, p_conj) > 0
        candidate = np.where(movable[None, :], _duality_columns(z, p_conj), x)
        new_values = _column_norms(a @ candidate, q)
        improved = new_values >= values
        x = np.where(improved[None, :], candidate, x)
        delta = np.abs(new_values - values)
        values = np.maximum(values, new_values)
        converged = delta <= tol * np.maximum(values, np.finfo(float).tiny)
        if converged[int(np.argmax(values))] if until_best else converged.all():
            break
    best = int(np.argmax(values))
    return _IterationOutcome(
        value=float(values[best]),
        primal=x[:, best].copy(),
        iterations=iterations,
        converged=bool(converged[best]),
    )


def _power_iteration(
    a: np.ndarray, p: PExponent, q: PExponent, cfg: OptimizerConfig
) -> _IterationOutcome:
    starts = _random_starts(rng_for(cfg.seed, 0), a.shape[1], cfg.restarts)
    # The leading right singular vector is a cheap deterministic extra start.
    _, _, vh = linalg.svd(a)
    starts = np.concatenate([np.conj(vh[0])[:, None], starts], axis=1)
    return _iterate(a, p, q, starts, cfg.max_iters, cfg.tol)


def _to_estimate(
    a: np.ndarray,
    p: PExponent,
    q: PExponent,
    primal: np.ndarray,
    method: str,
    *,
    iterations: int = 0,
    converged: bool = True,
) -> NormEstimate:
    image = a @ primal
    return NormEstimate(
        value=float(_column_norms(image[:, None], q)[0]),
        p=p.to_json(),
        q=q.to_json(),
        primal_witness=primal,
        dual_witness=_duality_columns(image[:, None], q)[:, 0],
        method=method,
        iterations=iterations,
        converged=converged,
    )


def op_norm_exact(a: object, p: ExponentLike, q: ExponentLike) -> NormEstimate:
    matrix = as_matrix(a)
    p_exp = PExponent.of(p)
    q_exp = PExponent.of(q)
    with start_span("norm.exact") as span:
        _, primal, _, method = _exact(matrix, p_exp, q_exp)
        estimate = _to_estimate(matrix, p_exp, q_exp, primal, method)
        record_estimate(span, estimate)
    return estimate


def op_norm_estimate(
    a: object,
    p: ExponentLike,
    q: ExponentLike,
    cfg: OptimizerConfig | None = None,
) -> NormEstimate:
    """Nonlinear power iteration ξ ← J_{p'}(aᵀ J_q(aξ)) with random restarts.

    Routes to `op_norm_exact` whenever a closed form exists.
    """
    matrix = as_matrix(a)
    p_exp = PExponent.of(p)
    q_exp = PExponent.of(q)
    if has_exact_formula(p_exp, q_exp):
        return op_norm_exact(matrix, p_exp, q_exp)
    config = cfg or OptimizerConfig()
    with start_span("norm.estimate") as span:
        outcome = _power_iteration(matrix, p_exp, q_exp, config)
        estimate = _to_estimate(
            matrix,
            p_exp,
            q_exp,
            outcome.primal,
            "power_iteration",
            iterations=outcome.iterations,
            converged=outcome.converged,
        )
        record_estimate(span, estimate)
    if not estimate.converged:
        logger.warning(
            "Power iteration for the %s→%s norm did not converge in %d iterations (value %.12g).",
            p_exp,
            q_exp,
            config.max_iters,
            estimate.value,
        )
    return estimate


def op_norm(
    a: object,
    p: ExponentLike,
    q: ExponentLike | None = None,
    cfg: OptimizerConfig | None = None,
) -> NormEstimate:
    """Best available method: closed form when one exists, estimator otherwise."""
    return op_norm_estimate(a, p, p if q is None else q, cfg)


def norm_value(
    a: np.ndarray, p: PExponent, q: PExponent, cfg: OptimizerConfig
) -> float:
    """Float-only variant of `op_norm` for hot loops; no span, no model, no validation."""
    if p.is_one:
        return float(_column_norms(a, q).max())
    if q.is_infinite:
        return float(_column_norms(a.T, p.conjugate()).max())
    if p.is_two and q.is_two:
        return float(np.linalg.norm(a, 2))
    return _power_iteration(a, p, q, cfg).value


class WarmNorm:
    """p→q norm evaluator for search loops over slowly changing matrices.

    Each call restarts the iteration from the previous maximizer next to a fixed batch
    of `cfg.restarts` random columns, skips the SVD start, and stops once the leading
    column has converged. Values are achieved lower bounds like every estimate here.
    """

    def __init__(self, p: PExponent, q: PExponent, cfg: OptimizerConfig, stream: int = 3) -> None:
        self.p = p
        self.q = q
        self.cfg = cfg
        self._stream = stream
        self._fixed: np.ndarray | None = None
        self._last: np.ndarray | None = None
        self.exact = has_exact_formula(p, q)

    def reset(self) -> None:
        self._last = None

    def __call__(self, a: np.ndarray) -> float:
        if self.exact:
            return norm_value(a, self.p, self.q, self.cfg)
        d = a.shape[1]
        if self._fixed is None or self._fixed.shape[0] != d:
            self._fixed = _random_starts(rng_for(self.cfg.seed, self._stream), d, self.cfg.restarts)
            self._last = None
        starts = self._fixed if self._last is None else np.concatenate([self._last[:, None], self._fixed], axis=1)
        outcome = _iterate(a, self.p, self.q, starts, self.cfg.max_iters, self.cfg.tol, until_best=True)
        self._last = outcome.primal
        return outcome.value


def _cube_face_counts(d: int, resolution: int) -> np.ndarray:
    """Integer vectors in {0, …, resolution}^d whose largest entry equals `resolution`."""
    counts = np.indices((resolution + 1,) * d).reshape(d, -1).T
    return counts[counts.max(axis=1) == resolution]


def _phase_count(resolution: int) -> int:
    return max(8, resolution)


def oracle_grid_size(d: int, p: ExponentLike, resolution: int) -> int:
    p_exp = PExponent.of(p)
    magnitudes = 1 if p_exp.is_infinite else (resolution + 1) ** d - resolution**d
    return magnitudes * _phase_count(resolution) ** (d - 1)


@dataclass(frozen=True)
class OracleOutcome:
    value: float
    witness: np.ndarray
    points: int


def oracle_search(
    a: object,
    p: ExponentLike,
    q: ExponentLike,
    resolution: int,
    budget: int = DEFAULT_ORACLE_BUDGET,
) -> OracleOutcome:
    """Grid maximum of ‖aξ‖_q over the unit p-sphere.

    Magnitudes are the grid points with step 1/resolution on the faces of the unit cube,
    rescaled to unit p-norm; phases take max(8, resolution) angles on every coordinate but the first.
    """
    matrix = as_matrix(a)
    p_exp = PExponent.of(p)
    q_exp = PExponent.of(q)
    if resolution < 1:
        raise ValueError("Oracle resolution must be a positive integer.")
    d = matrix.shape[1]
    points = oracle_grid_size(d, p_exp, resolution)
    if points > budget:
        raise OracleBudgetError(
            f"Grid oracle needs {points} points at resolution {resolution}, budget is {budget}."
        )

    if p_exp.is_infinite:
        magnitudes = np.ones((1, d))
    else:
        # ℓ∞ sphere points pushed radially onto the unit p-sphere
        magnitudes = _cube_face_counts(d, resolution) / resolution
        magnitudes = magnitudes / _column_norms(magnitudes.T, p_exp)[:, None]
    angles = 2.0 * np.pi * np.arange(_phase_count(resolution)) / _phase_count(resolution)
    if d == 1:
        phases = np.ones((1, 1), dtype=np.complex128)
    else:
        grids = np.meshgrid(*([angles] * (d - 1)), indexing="ij")
        tail = np.exp(1j * np.stack([grid.ravel() for grid in grids], axis=1))
        phases = np.concatenate([np.ones((tail.shape[0], 1), dtype=np.complex128), tail], axis=1)

    at = matrix.T
    best_value = -1.0
    best_witness = np.zeros(d, dtype=np.complex128)
    phase_chunk = min(phases.shape[0], _ORACLE_CHUNK)
    for phase_start in range(0, phases.shape[0], phase_chunk):
        phase_block = phases[phase_start : phase_start + phase_chunk]
        mag_chunk = max(1, _ORACLE_CHUNK // phase_block.shape[0])
        for mag_start in range(0, magnitudes.shape[0], mag_chunk):
            mag_block = magnitudes[mag_start : mag_start + mag_chunk]
            candidates = (mag_block[:, None, :] * phase_block[None, :, :]).reshape(-1, d)
            values = _column_norms((candidates @ at).T, q_exp)
            index = int(np.argmax(values))
            if values[index] > best_value:
                best_value = float(values[index])
                best_witness = candidates[index].copy()
    return OracleOutcome(value=max(best_value, 0.0), witness=best_witness, points=points)


def op_norm_oracle(
    a: object,
    p: ExponentLike,
    q: ExponentLike,
    resolution: int,
    budget: int = DEFAULT_ORACLE_BUDGET,
) -> float:
    with start_span("norm.oracle") as span:
        outcome = oracle_search(a, p, q, resolution, budget)
        if span is not None:
            span.set_attribute("norm.method", "grid_oracle")
            span.set_attribute("norm.value", outcome.value)
    return outcome.value


def op_norm_oracle_estimate(
    a: object,
    p: ExponentLike,
    q: ExponentLike,
    resolution: int,
    budget: int = DEFAULT_ORACLE_BUDGET,
) -> NormEstimate:
    matrix = as_matrix(a)
    p_exp = PExponent.of(p)
    q_exp = PExponent.of(q)
    outcome = oracle_search(matrix, p_exp, q_exp, resolution, budget)
    return _to_estimate(
        matrix, p_exp, q_exp, outcome.witness, "grid_oracle", iterations=outcome.points
    )


def oracle_discretization(d: int, p: ExponentLike, resolution: int) -> float:
    """Upper bound on the p-distance from any unit vector to the oracle grid."""
    p_exp = PExponent.of(p)
    phase_error = math.pi / _phase_count(resolution)
    if p_exp.is_infinite:
        return phase_error
    # rounding the d - 1 free cube coordinates moves v by <= 1/(2 resolution) each;
    # normalizing at most doubles that since ‖v‖_p >= 1
    return (d - 1) ** (1.0 / p_exp.finite) / resolution + phase_error


def oracle_bracket(
    a: object,
    p: ExponentLike,
    q: ExponentLike,
    resolution: int,
    budget: int = DEFAULT_ORACLE_BUDGET,
) -> tuple[float, float]:
    """(lower, upper) with lower ≤ ‖a‖_{p→q} ≤ upper."""
    matrix = as_matrix(a)
    lower = op_norm_oracle(matrix, p, q, resolution, budget)
    delta = oracle_discretization(matrix.shape[1], p, resolution)
    upper = lower / (1.0 - delta) if delta < 1.0 else math.inf
    return lower, upper


def transpose_duality_residual(
    a: object,
    p: ExponentLike,
    q: ExponentLike,
    cfg: OptimizerConfig | None = None,
) -> float:
    """| ‖a‖_{p→q} − ‖aᵀ‖_{q'→p'} |.

    Off the closed forms each side is also restarted from the other side's dual witness:
    ⟨η, aξ⟩ = ⟨aᵀη, ξ⟩, so that witness already reaches the other side's value.
    """
    matrix = as_matrix(a)
    p_exp = PExponent.of(p)
    q_exp = PExponent.of(q)
    config = cfg or OptimizerConfig()
    direct = op_norm(matrix, p_exp, q_exp, config)
    transposed = op_norm(matrix.T, q_exp.conjugate(), p_exp.conjugate(), config)
    direct_value = _restarted_value(matrix, p_exp, q_exp, transposed.dual_witness, direct.value, config)
    transposed_value = _restarted_value(
        matrix.T, q_exp.conjugate(), p_exp.conjugate(), direct.dual_witness, transposed.value, config
    )
    return abs(direct_value - transposed_value)


def _restarted_value(
    a: np.ndarray,
    p: PExponent,
    q: PExponent,
    start: np.ndarray | None,
    value: float,
    cfg: OptimizerConfig,
) -> float:
    if start is None or has_exact_formula(p, q) or not np.any(start):
        return value
    outcome = _iterate(a, p, q, start[:, None], cfg.max_iters, cfg.tol)
    return max(value, outcome.value)


def dual_norm_residual(
    eta: object,
    p: ExponentLike,
    rng: np.random.Generator,
    trials: int = 64,
) -> float:
    """Check ‖η‖_{p'} = max{|⟨η, ξ⟩| : ‖ξ‖_p ≤ 1}, attained at ξ = J_{p'}(η).

    Returns the attainment error plus any excess of random unit vectors over the bound.
    """
    vector = as_vector(eta)
    p_exp = PExponent.of(p)
    dual_norm = vector_p_norm(vector, p_exp.conjugate())
    attained = abs(holder_pairing(vector, duality_map(vector, p_exp.conjugate())))
    samples = rng.standard_normal((vector.size, trials)) + 1j * rng.standard_normal(
        (vector.size, trials)
    )
    samples = samples / _column_norms(samples, p_exp)
    excess = max(0.0, float(np.abs(vector @ samples).max()) - dual_norm)
    return abs(attained - dual_norm) + excess


def double_max_residual(estimate: NormEstimate, a: object) -> float:
    """|value − |⟨η*, aξ*⟩|| for the estimate's own witnesses."""
    matrix = as_matrix(a)
    if estimate.dual_witness is None:
        raise ValueError("Estimate carries no dual witness.")
    attained = abs(holder_pairing(estimate.dual_witness, matrix @ estimate.primal_witness))
    return abs(estimate.value - attained)
