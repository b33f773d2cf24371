"""Tests for vector norms, duality maps and operator norm routes."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from pnorm.contracts import OptimizerConfig
from pnorm.matrix_core import (
    INF,
    DimensionError,
    OracleBudgetError,
    PExponent,
    UnsupportedExponentError,
    WarmNorm,
    as_matrix,
    conjugate_exponent,
    double_max_residual,
    dual_norm_residual,
    duality_map,
    holder_pairing,
    op_norm,
    op_norm_estimate,
    op_norm_exact,
    op_norm_oracle,
    op_norm_oracle_estimate,
    oracle_bracket,
    oracle_grid_size,
    rng_for,
    transpose_duality_residual,
    vector_p_norm,
)


def _complex_matrix(seed: int, rows: int, cols: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))


def test_exponent_parsing_and_conjugates() -> None:
    assert PExponent.of("inf").is_infinite
    assert PExponent.of(math.inf) == INF
    assert PExponent.of(1).conjugate() == INF
    assert INF.conjugate().is_one
    assert PExponent.of(3).conjugate().finite == pytest.approx(1.5)
    assert PExponent.of("2").conjugate().is_two
    assert INF.to_json() == "inf"


def test_exponent_below_one_is_rejected() -> None:
    with pytest.raises(ValueError, match=">= 1"):
        PExponent.of(0.5)


def test_vector_p_norm_known_values() -> None:
    assert vector_p_norm([3, 4], 2) == pytest.approx(5.0)
    assert vector_p_norm([3, 4j], 1) == pytest.approx(7.0)
    assert vector_p_norm([3, -4], "inf") == pytest.approx(4.0)
    assert vector_p_norm([1e-200, 1e-200], 3) == pytest.approx(2 ** (1 / 3) * 1e-200)


@pytest.mark.parametrize("q", [1, 1.5, 2, 3, "inf"])
def test_duality_map_is_a_unit_norming_functional(q) -> None:
    y = _complex_matrix(3, 5, 1)[:, 0]
    eta = duality_map(y, q)
    q_exp = PExponent.of(q)
    assert vector_p_norm(eta, q_exp.conjugate()) == pytest.approx(1.0, rel=1e-12)
    pairing = holder_pairing(eta, y)
    assert pairing.real == pytest.approx(vector_p_norm(y, q_exp), rel=1e-12)
    assert abs(pairing.imag) < 1e-12


def test_duality_map_sends_zero_to_zero() -> None:
    assert np.all(duality_map(np.zeros(3), 2.5) == 0)


def test_holder_pairing_rejects_mismatched_dimensions() -> None:
    with pytest.raises(DimensionError):
        holder_pairing([1, 2], [1, 2, 3])


def test_as_matrix_rejects_bad_input() -> None:
    with pytest.raises(DimensionError):
        as_matrix([1.0, 2.0])
    with pytest.raises(ValueError, match="finite"):
        as_matrix([[1.0, math.nan]])


def test_exact_one_norm_is_max_column_sum() -> None:
    a = np.array([[1, -2], [3j, 4]])
    estimate = op_norm_exact(a, 1, 1)
    assert estimate.value == pytest.approx(6.0)
    assert estimate.method == "exact_formula"
    assert np.allclose(estimate.primal_witness, [0, 1])


def test_exact_infinity_codomain_is_max_dual_row_norm() -> None:
    a = np.array([[3, 4], [1, 1]])
    estimate = op_norm_exact(a, 2, "inf")
    assert estimate.value == pytest.approx(5.0)
    assert vector_p_norm(estimate.primal_witness, 2) == pytest.approx(1.0)


def test_exact_two_norm_matches_largest_singular_value() -> None:
    a = _complex_matrix(11, 4, 3)
    estimate = op_norm_exact(a, 2, 2)
    assert estimate.method == "singular_value"
    assert estimate.value == pytest.approx(np.linalg.norm(a, 2), rel=1e-12)


def test_exact_route_refuses_general_exponents() -> None:
    with pytest.raises(UnsupportedExponentError):
        op_norm_exact(np.eye(2), 3, 3)


def test_estimate_of_identity_is_one() -> None:
    estimate = op_norm_estimate(np.eye(3), 3, 3)
    assert estimate.method == "power_iteration"
    assert estimate.converged
    assert estimate.value == pytest.approx(1.0, abs=1e-12)


def test_estimate_routes_closed_forms_to_exact() -> None:
    a = _complex_matrix(5, 3, 3)
    assert op_norm_estimate(a, 2, 2).value == pytest.approx(op_norm_exact(a, 2, 2).value, rel=1e-8)
    assert op_norm(a, 1).method == "exact_formula"


def test_estimate_value_is_achieved_by_its_witness() -> None:
    a = _complex_matrix(7, 3, 4)
    estimate = op_norm_estimate(a, 3, 1.5, OptimizerConfig(restarts=16))
    assert vector_p_norm(estimate.primal_witness, 3) == pytest.approx(1.0, rel=1e-12)
    assert vector_p_norm(a @ estimate.primal_witness, 1.5) == pytest.approx(estimate.value, rel=1e-12)
    assert double_max_residual(estimate, a) < 1e-9


def test_estimate_is_deterministic_for_a_seed() -> None:
    a = _complex_matrix(8, 3, 3)
    first = op_norm_estimate(a, 3, 3, OptimizerConfig(seed=4))
    second = op_norm_estimate(a, 3, 3, OptimizerConfig(seed=4))
    assert first.value == second.value
    assert np.array_equal(first.primal_witness, second.primal_witness)


@pytest.mark.parametrize("p", [1.5, 3])
def test_estimate_agrees_with_oracle_on_random_matrices(p: float) -> None:
    rng = np.random.default_rng(123)
    for _ in range(20):
        a = rng.standard_normal((3, 3))
        estimate = op_norm_estimate(a, p, p).value
        lower, upper = oracle_bracket(a, p, p, 64)
        assert estimate >= lower - 1e-9
        assert estimate <= upper
        assert abs(estimate - lower) <= 1e-3


def test_oracle_resolves_small_optimal_coordinates() -> None:
    # the 1.5-norm maximizer is proportional to (1, 0, 0.04); 0.04 < 64^(-2/3)
    a = np.zeros((3, 3))
    a[0] = [1.0, 0.0, 0.2]
    exact = (1.0 + 0.2**3) ** (1.0 / 3.0)
    assert op_norm_estimate(a, 1.5, 1.5).value == pytest.approx(exact, abs=1e-9)
    assert op_norm_oracle(a, 1.5, 1.5, 64) == pytest.approx(exact, abs=2e-4)


def test_oracle_is_exact_at_p_one() -> None:
    a = _complex_matrix(2, 3, 3)
    assert op_norm_oracle(a, 1, 2, 4) == pytest.approx(op_norm_exact(a, 1, 2).value, rel=1e-12)


def test_oracle_is_monotone_along_refining_resolutions() -> None:
    a = _complex_matrix(9, 2, 2)
    coarse = op_norm_oracle(a, 3, 2, 8)
    fine = op_norm_oracle(a, 3, 2, 16)
    assert fine >= coarse - 1e-12


def test_oracle_estimate_reports_grid_points() -> None:
    a = np.array([[1.0, 2.0], [0.0, 1.0]])
    estimate = op_norm_oracle_estimate(a, "inf", 2, 8)
    assert estimate.method == "grid_oracle"
    assert estimate.iterations == oracle_grid_size(2, "inf", 8) == 8


def test_oracle_budget_is_enforced() -> None:
    with pytest.raises(OracleBudgetError):
        op_norm_oracle(np.eye(3), 2, 2, 32, budget=100)


def test_transpose_duality_is_exact_for_closed_forms() -> None:
    a = _complex_matrix(4, 3, 5)
    assert transpose_duality_residual(a, 1, 2) < 1e-12
    assert transpose_duality_residual(a, 2, 2) < 1e-10


def test_transpose_duality_holds_off_the_closed_forms() -> None:
    a = _complex_matrix(14, 4, 5)
    for p, q in ((2.5, 1.5), ("inf", 1.5), (1.5, 2)):
        assert transpose_duality_residual(a, p, q) < 2e-3


def test_dual_norm_residual_is_small() -> None:
    eta = _complex_matrix(6, 6, 1)[:, 0]
    for p in (1, 1.5, 2, 4, "inf"):
        assert dual_norm_residual(eta, p, rng_for(0, 1)) < 1e-12


@settings(max_examples=50, deadline=None)
@given(
    values=st.lists(st.floats(min_value=-1e3, max_value=1e3, allow_nan=False), min_size=1, max_size=6),
    p=st.floats(min_value=1.0, max_value=8.0),
    extra=st.floats(min_value=0.0, max_value=8.0),
)
def test_vector_norms_decrease_in_p(values: list[float], p: float, extra: float) -> None:
    small = vector_p_norm(values, p)
    large = vector_p_norm(values, p + extra)
    assert large <= small * (1 + 1e-12) + 1e-300


@settings(max_examples=30, deadline=None)
@given(
    entries=st.lists(st.floats(min_value=-10, max_value=10, allow_nan=False), min_size=6, max_size=6),
    q=st.sampled_from([1.0, 1.5, 2.0, 3.0, "inf"]),
)
def test_one_to_q_norm_bounds_every_column(entries: list[float], q) -> None:
    a = np.array(entries).reshape(2, 3)
    value = op_norm(a, 1, q).value
    for column in a.T:
        assert vector_p_norm(column, q) <= value * (1 + 1e-12) + 1e-300


@pytest.mark.parametrize(
    ("p", "expected"), [(3, 1.5), (1.5, 3.0), (2, 2.0), (1, "inf"), ("inf", 1.0)]
)
def test_conjugate_exponent_pairs(p, expected) -> None:
    assert conjugate_exponent(p) == PExponent.of(expected)
    assert conjugate_exponent(conjugate_exponent(p)) == PExponent.of(p)


_EXACT_PAIRS = [(1.0, 1.0), (1.0, 2.0), (2.0, 2.0), (2.0, "inf"), ("inf", "inf"), (1.0, "inf")]


@settings(max_examples=40, deadline=None)
@given(
    entries=st.lists(st.floats(min_value=-10, max_value=10, allow_nan=False), min_size=6, max_size=6),
    scale=st.floats(min_value=-20, max_value=20, allow_nan=False),
    pair=st.sampled_from(_EXACT_PAIRS),
)
def test_norm_is_absolutely_homogeneous(entries: list[float], scale: float, pair) -> None:
    a = np.array(entries).reshape(3, 2)
    p, q = pair
    expected = abs(scale) * op_norm(a, p, q).value
    assert op_norm(scale * a, p, q).value == pytest.approx(expected, rel=1e-10, abs=1e-12)


@settings(max_examples=15, deadline=None)
@given(
    entries=st.lists(st.floats(min_value=-5, max_value=5, allow_nan=False), min_size=4, max_size=4),
    scale=st.floats(min_value=0.1, max_value=10),
)
def test_estimated_norm_is_homogeneous(entries: list[float], scale: float) -> None:
    a = np.array(entries).reshape(2, 2)
    assume(np.abs(a).max() > 1e-3)
    cfg = OptimizerConfig(restarts=8)
    expected = scale * op_norm(a, 3, 3, cfg).value
    assert op_norm(scale * a, 3, 3, cfg).value == pytest.approx(expected, rel=1e-6)


@settings(max_examples=40, deadline=None)
@given(
    left=st.lists(st.floats(min_value=-10, max_value=10, allow_nan=False), min_size=9, max_size=9),
    right=st.lists(st.floats(min_value=-10, max_value=10, allow_nan=False), min_size=9, max_size=9),
    p=st.sampled_from([1.0, 2.0, "inf"]),
)
def test_norm_is_submultiplicative(left: list[float], right: list[float], p) -> None:
    a = np.array(left).reshape(3, 3)
    b = np.array(right).reshape(3, 3)
    product = op_norm(a @ b, p).value
    assert product <= op_norm(a, p).value * op_norm(b, p).value * (1 + 1e-12) + 1e-12


def test_estimated_norm_is_submultiplicative() -> None:
    rng = np.random.default_rng(21)
    for _ in range(5):
        a = rng.standard_normal((3, 3))
        b = rng.standard_normal((3, 3))
        product = op_norm(a @ b, 3).value
        assert product <= op_norm(a, 3).value * op_norm(b, 3).value * (1 + 1e-9)


def test_norm_is_continuous_in_p() -> None:
    a = np.random.default_rng(31).standard_normal((3, 3))
    a /= np.linalg.norm(a, 2)
    grid = np.round(np.arange(1.5, 3.0 + 1e-9, 0.05), 10)
    values = [op_norm(a, float(p)).value for p in grid]
    jumps = np.abs(np.diff(values))
    assert jumps.max() <= 0.1


def test_warm_norm_matches_a_known_diagonal_norm() -> None:
    evaluate = WarmNorm(PExponent.of(3), PExponent.of(3), OptimizerConfig(restarts=4))
    a = np.diag([3.0, 1.0, 0.5])
    assert evaluate(a) == pytest.approx(3.0, rel=1e-10)
    # the remembered maximizer is reused on the next, nearby matrix
    assert evaluate(np.diag([3.1, 1.0, 0.5])) == pytest.approx(3.1, rel=1e-10)
    evaluate.reset()
    assert evaluate(a) == pytest.approx(3.0, rel=1e-10)


def test_warm_norm_agrees_with_the_estimator() -> None:
    cfg = OptimizerConfig(restarts=64)
    evaluate = WarmNorm(PExponent.of(3), PExponent.of(3), cfg)
    for seed in range(3):
        a = _complex_matrix(40 + seed, 3, 3)
        assert evaluate(a) == pytest.approx(op_norm_estimate(a, 3, 3, cfg).value, rel=1e-6)


def test_warm_norm_uses_closed_forms() -> None:
    a = _complex_matrix(12, 3, 2)
    evaluate = WarmNorm(PExponent.of(2), PExponent.of(2), OptimizerConfig())
    assert evaluate.exact
    assert evaluate(a) == pytest.approx(op_norm_exact(a, 2, 2).value, rel=1e-12)
