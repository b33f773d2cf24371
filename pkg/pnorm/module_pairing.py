"""The algebra-valued pairing (𝐛|𝐚) = 𝐛𝐚, norm-attaining witnesses and the C*-likeness gap.

`pairing_sup` maximizes ‖(𝐛|𝐚)‖ over the unit ball of the opposite module. The
opposite element is parametrized by n·m complex algebra coordinates and divided
by its own norm, so the objective

    F(λ) = ‖(𝐛(λ)|𝐚)‖ / ‖𝐛(λ)‖

is scale invariant and the search is unconstrained.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from pnorm.block_algebra import (
    AlgebraError,
    BlockDiagAlgebra,
    ColumnModuleElement,
    ModuleElement,
    ParametrizedAlgebra,
    RowModuleElement,
    block_diag,
    column_block,
    require_block_algebra,
    row_block,
)
from pnorm.contracts import GapReport, NormEstimate, OptimizerConfig
from pnorm.matrix_core import (
    DimensionError,
    ExponentLike,
    OracleBudgetError,
    PExponent,
    WarmNorm,
    as_vector,
    has_exact_formula,
    norm_value,
    op_norm,
    oracle_bracket,
    rng_for,
)
from pnorm.search import coordinate_ascent, nelder_mead_polish
from pnorm.telemetry import record_gap, start_span

logger = logging.getLogger(__name__)

EXACT_TOLERANCE = 1e-9
ESTIMATE_TOLERANCE = 1e-3
EXACT_GAP_TOLERANCE = 1e-6
ESTIMATE_GAP_TOLERANCE = 1e-3
_POLISHED_STARTS = 8
_SCREEN_RATIO = 16


@lru_cache(maxsize=32)
def full_algebra(d: int) -> BlockDiagAlgebra:
    return BlockDiagAlgebra.full(d)


def attainment_tolerance(p: ExponentLike) -> float:
    return EXACT_TOLERANCE if has_exact_formula(p, p) else ESTIMATE_TOLERANCE


def gap_tolerance(p: ExponentLike) -> float:
    return EXACT_GAP_TOLERANCE if has_exact_formula(p, p) else ESTIMATE_GAP_TOLERANCE


def pairing(b: RowModuleElement, a: ColumnModuleElement) -> np.ndarray:
    """(𝐛|𝐚)_A = Σ_l b_l a_l, a d×d element of A."""
    if not isinstance(b, RowModuleElement) or not isinstance(a, ColumnModuleElement):
        raise DimensionError("pairing expects a row element and a column element.")
    if not b.algebra.is_compatible(a.algebra):
        raise AlgebraError("Row and column elements live over different algebras.")
    if b.n != a.n:
        raise DimensionError(f"Module sizes differ: row n={b.n}, column n={a.n}.")
    return b.matrix @ a.matrix


def b_eta(eta: object, d: int, n: int) -> RowModuleElement:
    """Row element over M_d whose first row is ηᵀ and whose other rows vanish."""
    vector = as_vector(eta)
    if vector.size != n * d:
        raise DimensionError(f"η must have dimension n·d = {n * d}, got {vector.size}.")
    matrix = np.zeros((d, n * d), dtype=np.complex128)
    matrix[0, :] = vector
    return RowModuleElement.from_matrix(full_algebra(d), matrix)


def a_zeta(zeta: object, d: int, n: int) -> ColumnModuleElement:
    """Column element over M_d whose first column is ζ and whose other columns vanish."""
    vector = as_vector(zeta)
    if vector.size != n * d:
        raise DimensionError(f"ζ must have dimension n·d = {n * d}, got {vector.size}.")
    matrix = np.zeros((n * d, d), dtype=np.complex128)
    matrix[:, 0] = vector
    return ColumnModuleElement.from_matrix(full_algebra(d), matrix)


@dataclass(frozen=True)
class VectorWitness:
    vector: np.ndarray
    value: float
    converged: bool


def _require_full(x: ModuleElement) -> None:
    algebra = x.algebra
    if not isinstance(algebra, BlockDiagAlgebra) or not algebra.is_full:
        raise AlgebraError(f"Operation needs the full matrix algebra, got {algebra!r}.")


def full_algebra_witness_eta(
    a: ColumnModuleElement, p: ExponentLike, cfg: OptimizerConfig | None = None
) -> VectorWitness:
    """η in the unit ball of ℓ^{p'}_{nd} with ‖(b_η|𝐚)‖ = ‖𝐚‖."""
    _require_full(a)
    estimate = a.norm(p, cfg)
    eta = estimate.dual_witness
    value = op_norm(pairing(b_eta(eta, a.d, a.n), a), p, p, cfg).value
    return VectorWitness(vector=eta, value=value, converged=estimate.converged)


def full_algebra_witness_zeta(
    b: RowModuleElement, p: ExponentLike, cfg: OptimizerConfig | None = None
) -> VectorWitness:
    """ζ in the unit ball of ℓ^p_{nd} with ‖(𝐛|a_ζ)‖ = ‖𝐛‖."""
    _require_full(b)
    estimate = b.norm(p, cfg)
    zeta = estimate.primal_witness
    value = op_norm(pairing(b, a_zeta(zeta, b.d, b.n)), p, p, cfg).value
    return VectorWitness(vector=zeta, value=value, converged=estimate.converged)


def _split_parts(vector: np.ndarray, size: int, n: int) -> list[np.ndarray]:
    return [vector[l * size : (l + 1) * size] for l in range(n)]


def _constructive_b0(
    a: ColumnModuleElement, p: ExponentLike, cfg: OptimizerConfig | None
) -> tuple[RowModuleElement, bool]:
    algebra = require_block_algebra(a.algebra)
    per_copy: list[list[np.ndarray]] = [[] for _ in range(a.n)]
    converged = True
    for j, size in enumerate(algebra.composition.parts, start=1):
        estimate = op_norm(column_block(a, j), p, p, cfg)
        converged = converged and estimate.converged
        for l, part in enumerate(_split_parts(estimate.dual_witness, size, a.n)):
            block = np.zeros((size, size), dtype=np.complex128)
            block[0, :] = part
            per_copy[l].append(block)
    return RowModuleElement(algebra, [block_diag(blocks) for blocks in per_copy]), converged


def _constructive_a0(
    b: RowModuleElement, p: ExponentLike, cfg: OptimizerConfig | None
) -> tuple[ColumnModuleElement, bool]:
    algebra = require_block_algebra(b.algebra)
    per_copy: list[list[np.ndarray]] = [[] for _ in range(b.n)]
    converged = True
    for j, size in enumerate(algebra.composition.parts, start=1):
        estimate = op_norm(row_block(b, j), p, p, cfg)
        converged = converged and estimate.converged
        for l, part in enumerate(_split_parts(estimate.primal_witness, size, b.n)):
            block = np.zeros((size, size), dtype=np.complex128)
            block[:, 0] = part
            per_copy[l].append(block)
    return ColumnModuleElement(algebra, [block_diag(blocks) for blocks in per_copy]), converged


def constructive_witness_b0(
    a: ColumnModuleElement, p: ExponentLike, cfg: OptimizerConfig | None = None
) -> RowModuleElement:
    """Interleaved block-diagonal row witness: ‖𝐛_0‖ ≤ 1 and ‖(𝐛_0|𝐚)‖ = ‖𝐚‖."""
    witness, _ = _constructive_b0(a, p, cfg)
    return witness


def constructive_witness_a0(
    b: RowModuleElement, p: ExponentLike, cfg: OptimizerConfig | None = None
) -> ColumnModuleElement:
    """Interleaved block-diagonal column witness: ‖𝐚_0‖ ≤ 1 and ‖(𝐛|𝐚_0)‖ = ‖𝐛‖."""
    witness, _ = _constructive_a0(b, p, cfg)
    return witness


def unit_witness(algebra: ParametrizedAlgebra, side: str = "column") -> ModuleElement | None:
    """The identity as an n = 1 opposite element, when the algebra is unital.

    `side` names the element being tested: a column element is paired with a row identity.
    """
    if algebra.identity_coordinates() is None:
        return None
    identity = np.eye(algebra.dim, dtype=np.complex128)
    if side == "column":
        return RowModuleElement(algebra, [identity])
    return ColumnModuleElement(algebra, [identity])


def adjoint_witness(x: ModuleElement, algebra: ParametrizedAlgebra) -> ModuleElement | None:
    """x* as an opposite element when every block adjoint stays in the algebra.

    At p = 2 the pairing (x*|x) = x*x has norm ‖x‖², so x*/‖x‖ attains the supremum.
    """
    adjoints = [np.conj(block).T for block in x.blocks]
    if not all(algebra.contains(block) for block in adjoints):
        return None
    if isinstance(x, ColumnModuleElement):
        return RowModuleElement(algebra, adjoints)
    return ColumnModuleElement(algebra, adjoints)


class _PairingObjective:
    """F(θ) with θ = (Re λ, Im λ) for the n·m complex coordinates of the opposite element.

    Calls during the search use warm-started inner norms; `value(θ, cfg)` evaluates
    from scratch with the given settings.
    """

    def __init__(
        self, x: ModuleElement, algebra: ParametrizedAlgebra, p: PExponent, cfg: OptimizerConfig
    ) -> None:
        self.column_side = isinstance(x, ColumnModuleElement)
        self.n = x.n
        self.d = algebra.dim
        self.m = algebra.size
        self.algebra = algebra
        self.x = x.matrix
        self.p = p
        self.cfg = cfg
        self.evaluations = 0
        self._denominator = WarmNorm(p, p, cfg, stream=3)
        self._numerator = WarmNorm(p, p, cfg, stream=4)

    @property
    def size(self) -> int:
        return 2 * self.n * self.m

    def reset(self) -> None:
        self._denominator.reset()
        self._numerator.reset()

    def coordinates(self, theta: np.ndarray) -> np.ndarray:
        half = self.n * self.m
        return (theta[:half] + 1j * theta[half:]).reshape(self.n, self.m)

    def theta_of(self, element: ModuleElement) -> np.ndarray:
        lam = np.stack([self.algebra.coordinates(block) for block in element.blocks])
        return np.concatenate([lam.real.ravel(), lam.imag.ravel()])

    def opposite_blocks(self, theta: np.ndarray) -> np.ndarray:
        return self.algebra.elements(self.coordinates(theta))

    def opposite(self, theta: np.ndarray) -> np.ndarray:
        blocks = self.opposite_blocks(theta)
        if self.column_side:
            return blocks.transpose(1, 0, 2).reshape(self.d, self.n * self.d)
        return blocks.reshape(self.n * self.d, self.d)

    def value(self, theta: np.ndarray, cfg: OptimizerConfig | None = None) -> float:
        self.evaluations += 1
        y = self.opposite(theta)
        if cfg is None:
            denominator_of, numerator_of = self._denominator, self._numerator
        else:
            denominator_of = numerator_of = lambda a: norm_value(a, self.p, self.p, cfg)
        denominator = denominator_of(y)
        if denominator <= 0.0:
            return 0.0
        product = y @ self.x if self.column_side else self.x @ y
        return numerator_of(product) / denominator

    def __call__(self, theta: np.ndarray) -> float:
        return self.value(theta)


@dataclass(frozen=True)
class PairingSupResult:
    value: float
    witness: ModuleElement
    element_norm: NormEstimate
    constructive: bool
    evaluations: int
    starts: int


def _normalized_witness(
    objective: _PairingObjective, theta: np.ndarray, cfg: OptimizerConfig
) -> ModuleElement:
    blocks = objective.opposite_blocks(theta)
    scale = norm_value(objective.opposite(theta), objective.p, objective.p, cfg)
    if scale > 0.0:
        blocks = blocks / scale
    cls = RowModuleElement if objective.column_side else ColumnModuleElement
    return cls(objective.algebra, list(blocks))


def _unit_scaled(theta: np.ndarray) -> np.ndarray:
    peak = float(np.abs(theta).max())
    return theta / peak if peak > 0.0 else theta


def pairing_sup(
    x: ModuleElement,
    algebra: ParametrizedAlgebra | None,
    p: ExponentLike,
    cfg: OptimizerConfig | None = None,
) -> PairingSupResult:
    """sup ‖(y|x)_A‖ over the unit ball of the opposite module.

    Explicit witnesses are tried first and the search stops when one attains ‖x‖: the
    interleaved block witness for block algebras, the identity for unital algebras with
    n = 1, and x* when the algebra is closed under adjoints. Any of these certifies
    the result as constructive.
    """
    config = cfg or OptimizerConfig()
    p_exp = PExponent.of(p)
    if p_exp.is_infinite:
        raise ValueError("Module operations accept p in [1, ∞).")
    algebra = algebra or x.algebra
    if not algebra.is_compatible(x.algebra):
        raise AlgebraError("The element does not live over the given algebra.")
    side = "column" if isinstance(x, ColumnModuleElement) else "row"

    with start_span("pairing.sup") as span:
        element_norm = x.norm(p_exp, config)
        objective = _PairingObjective(x, algebra, p_exp, config.inner())
        tolerance = attainment_tolerance(p_exp) * max(1.0, element_norm.value)

        structural: list[np.ndarray] = []
        if isinstance(algebra, BlockDiagAlgebra):
            if side == "column":
                constructive, _ = _constructive_b0(x, p_exp, config)
            else:
                constructive, _ = _constructive_a0(x, p_exp, config)
            structural.append(objective.theta_of(constructive))
        if x.n == 1:
            unit = unit_witness(algebra, side)
            if unit is not None:
                structural.append(objective.theta_of(unit))
        adjoint = adjoint_witness(x, algebra)
        if adjoint is not None:
            structural.append(objective.theta_of(adjoint))

        for theta in structural:
            candidate = objective.value(theta, config)
            if candidate >= element_norm.value - tolerance:
                result = PairingSupResult(
                    value=candidate,
                    witness=_normalized_witness(objective, theta, config),
                    element_norm=element_norm,
                    constructive=True,
                    evaluations=objective.evaluations,
                    starts=len(structural),
                )
                _annotate(span, side, result)
                return result

        result = _search(objective, structural, element_norm, config)
        _annotate(span, side, result)
    return result


def _search(
    objective: _PairingObjective,
    structural: list[np.ndarray],
    element_norm: NormEstimate,
    cfg: OptimizerConfig,
) -> PairingSupResult:
    rng = rng_for(cfg.seed, 1)
    random_starts = rng.standard_normal((cfg.restarts, objective.size))
    starts = [_unit_scaled(theta) for theta in (*structural, *random_starts)]
    screened = sorted(
        ((objective(theta), index) for index, theta in enumerate(starts)),
        key=lambda item: (-item[0], item[1]),
    )
    ascend_count = max(_POLISHED_STARTS, cfg.restarts // _SCREEN_RATIO)
    chosen = {index for _, index in screened[:ascend_count]}
    chosen.update(range(len(structural)))

    budget = objective.size * cfg.max_iters
    ascended = []
    for index in sorted(chosen):
        objective.reset()
        outcome = coordinate_ascent(objective, starts[index], max_evals=budget)
        ascended.append((outcome.value, index, _unit_scaled(outcome.x)))
    ascended.sort(key=lambda item: (-item[0], item[1]))

    finalists = []
    for _, index, theta in ascended[:_POLISHED_STARTS]:
        objective.reset()
        polished = nelder_mead_polish(objective, theta, max_evals=200 * objective.size, rounds=2)
        finalists.append((index, _unit_scaled(polished.x)))
        finalists.append((index, theta))

    # warm-started values can drift from the true norms, so finalists are ranked afresh
    best_value, best_theta = -1.0, finalists[0][1]
    for _, theta in finalists:
        value = objective.value(theta, cfg)
        if value > best_value:
            best_value, best_theta = value, theta

    return PairingSupResult(
        value=best_value,
        witness=_normalized_witness(objective, best_theta, cfg),
        element_norm=element_norm,
        constructive=False,
        evaluations=objective.evaluations,
        starts=len(starts),
    )


def _annotate(span: object, side: str, result: PairingSupResult) -> None:
    if span is None:
        return
    span.set_attribute("pairing.side", side)
    span.set_attribute("pairing.value", result.value)


def _sup_bracket(
    x: ModuleElement, witness: ModuleElement, p: PExponent, cfg: OptimizerConfig
) -> tuple[float, float] | None:
    """Oracle bracket of F at the witness: [certified lower bound on the sup, upper end for F]."""
    resolution = cfg.oracle_resolution
    if resolution is None:
        return None
    product = witness.matrix @ x.matrix if isinstance(x, ColumnModuleElement) else x.matrix @ witness.matrix
    try:
        num_low, num_high = oracle_bracket(product, p, p, resolution, cfg.oracle_budget)
        den_low, den_high = oracle_bracket(witness.matrix, p, p, resolution, cfg.oracle_budget)
    except OracleBudgetError as exc:
        logger.warning("Oracle bracket skipped: %s", exc)
        return None
    if den_low <= 0.0 or math.isinf(num_high) or math.isinf(den_high):
        return None
    return num_low / den_high, num_high / den_low


def cstar_gap(
    x: ModuleElement,
    algebra: ParametrizedAlgebra | None,
    p: ExponentLike,
    cfg: OptimizerConfig | None = None,
    *,
    tolerance: float | None = None,
) -> GapReport:
    """Gap between ‖x‖ and the pairing supremum; zero means the norm is recovered."""
    config = cfg or OptimizerConfig()
    p_exp = PExponent.of(p)
    with start_span("pairing.gap") as span:
        result = pairing_sup(x, algebra, p_exp, config)
        element_value = result.element_norm.value
        gap = element_value - result.value
        bracket = None
        if result.constructive:
            certified = "constructive"
        else:
            certified = "heuristic"
            if not has_exact_formula(p_exp, p_exp):
                bracket = _sup_bracket(x, result.witness, p_exp, config)
                if bracket is not None:
                    certified = "oracle_bracketed"
        if gap < -attainment_tolerance(p_exp) * max(1.0, element_value):
            logger.warning(
                "Pairing supremum %.12g overshoots the element norm %.12g at p=%s.",
                result.value,
                element_value,
                p_exp,
            )
        limit = gap_tolerance(p_exp) if tolerance is None else tolerance
        report = GapReport(
            side="column" if isinstance(x, ColumnModuleElement) else "row",
            p=p_exp.to_json(),
            n=x.n,
            element_norm=element_value,
            element_method=result.element_norm.method,
            element_converged=result.element_norm.converged,
            pairing_sup=result.value,
            gap=gap,
            best_witness=result.witness.matrix,
            certified=certified,
            tolerance=limit,
            cstar_like=gap <= limit,
            oracle_bracket=bracket,
            evaluations=result.evaluations,
            restarts=result.starts,
        )
        record_gap(span, report)
    return report
