"""Structured data contracts for norm estimates, gap reports, sweeps and run manifests."""

from __future__ import annotations

import os
from typing import Annotated, Any, Literal, Union

import numpy as np
from pydantic import (
    AllowInfNan,
    BaseModel,
    BeforeValidator,
    ConfigDict,
    Field,
    PlainSerializer,
    StrictFloat,
    StrictInt,
    model_validator,
)


class InputError(ValueError):
    """Raised when user-supplied input fails validation."""


ExponentValue = float | Literal["inf"]
NormMethod = Literal["exact_formula", "singular_value", "power_iteration", "grid_oracle"]
Certification = Literal["constructive", "heuristic", "oracle_bracketed"]
Side = Literal["column", "row"]

FiniteReal = Union[StrictInt, Annotated[StrictFloat, AllowInfNan(False)]]
MatrixEntry = Union[FiniteReal, tuple[FiniteReal, FiniteReal]]


def vector_to_json(vector: np.ndarray) -> list[list[float]]:
    return [[float(value.real), float(value.imag)] for value in np.asarray(vector).ravel()]


def matrix_to_json(matrix: np.ndarray) -> dict[str, Any]:
    array = np.asarray(matrix)
    rows, cols = array.shape
    return {"rows": int(rows), "cols": int(cols), "entries": vector_to_json(array)}


class MatrixPayload(BaseModel):
    """Matrix JSON: {"rows": r, "cols": c, "entries": [...]} in row-major order.

    Entries are finite reals or [re, im] pairs.
    """

    rows: StrictInt = Field(ge=1)
    cols: StrictInt = Field(ge=1)
    entries: list[MatrixEntry]

    @model_validator(mode="after")
    def _check_count(self) -> "MatrixPayload":
        if len(self.entries) != self.rows * self.cols:
            raise ValueError(f"needs exactly rows·cols = {self.rows * self.cols} entries")
        return self

    def to_array(self) -> np.ndarray:
        values = [complex(*entry) if isinstance(entry, tuple) else complex(entry) for entry in self.entries]
        return np.array(values, dtype=np.complex128).reshape(self.rows, self.cols)


def _coerce_vector(value: Any) -> np.ndarray:
    if isinstance(value, np.ndarray):
        return np.asarray(value, dtype=np.complex128).ravel()
    pairs = list(value)
    if pairs and isinstance(pairs[0], (list, tuple)):
        return np.array([complex(re, im) for re, im in pairs], dtype=np.complex128)
    return np.asarray(pairs, dtype=np.complex128)


def _coerce_matrix(value: Any) -> np.ndarray:
    if isinstance(value, dict):
        return MatrixPayload.model_validate(value).to_array()
    return np.asarray(value, dtype=np.complex128)


ComplexVectorField = Annotated[
    np.ndarray,
    BeforeValidator(_coerce_vector),
    PlainSerializer(vector_to_json, return_type=list),
]
ComplexMatrixField = Annotated[
    np.ndarray,
    BeforeValidator(_coerce_matrix),
    PlainSerializer(matrix_to_json, return_type=dict),
]


class OptimizerConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    restarts: int = Field(default=64, ge=1)
    max_iters: int = Field(default=500, ge=1)
    tol: float = Field(default=1e-12, gt=0)
    seed: int = Field(default=0, ge=0)
    oracle_resolution: int | None = Field(default=None, ge=1)
    oracle_budget: int = Field(default=64_000_000, ge=1)
    inner_restarts: int = Field(default=8, ge=1)

    @classmethod
    def from_env(
        cls, defaults: dict[str, Any] | None = None, **overrides: Any
    ) -> "OptimizerConfig":
        """Defaults, then PNORM_* environment overrides, then explicit overrides."""
        values: dict[str, Any] = dict(defaults or {})
        env_fields = {
            "restarts": ("PNORM_RESTARTS", int),
            "max_iters": ("PNORM_MAX_ITERS", int),
            "tol": ("PNORM_TOL", float),
            "seed": ("PNORM_SEED", int),
            "oracle_budget": ("PNORM_ORACLE_BUDGET", int),
        }
        for field_name, (env_name, cast) in env_fields.items():
            raw = os.getenv(env_name)
            if raw is not None and raw.strip():
                try:
                    values[field_name] = cast(raw.strip())
                except ValueError as exc:
                    raise InputError(f"{env_name} must be a number, got {raw!r}.") from exc
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls.model_validate(values)

    def inner(self) -> "OptimizerConfig":
        """Cheaper settings for norms evaluated inside a search loop."""
        return self.model_copy(
            update={
                "restarts": self.inner_restarts,
                "max_iters": min(self.max_iters, 50),
                "tol": max(self.tol, 1e-10),
            }
        )

    def with_seed(self, seed: int) -> "OptimizerConfig":
        return self.model_copy(update={"seed": seed})


class NormEstimate(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    value: float = Field(ge=0.0)
    p: ExponentValue
    q: ExponentValue
    primal_witness: ComplexVectorField
    dual_witness: ComplexVectorField | None = None
    method: NormMethod
    iterations: int = Field(default=0, ge=0)
    converged: bool = True


class GapReport(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    side: Side
    p: ExponentValue
    n: int = Field(ge=1)
    element_norm: float = Field(ge=0.0)
    element_method: NormMethod
    element_converged: bool = True
    pairing_sup: float = Field(ge=0.0)
    gap: float
    best_witness: ComplexMatrixField
    certified: Certification
    tolerance: float = Field(gt=0.0)
    cstar_like: bool
    oracle_bracket: tuple[float, float] | None = None
    evaluations: int = Field(default=0, ge=0)
    restarts: int = Field(default=0, ge=0)


class SweepResult(BaseModel):
    p_grid: list[ExponentValue]
    norms: list[float]
    sups: list[float]
    gaps: list[float]
    certified: list[Certification]
    seeds: list[int]
    config: OptimizerConfig

    @model_validator(mode="after")
    def _check_lengths(self) -> "SweepResult":
        size = len(self.p_grid)
        for name in ("norms", "sups", "gaps", "certified", "seeds"):
            if len(getattr(self, name)) != size:
                raise ValueError(f"Sweep column '{name}' does not match p_grid length {size}.")
        for norm, sup, gap in zip(self.norms, self.sups, self.gaps):
            if abs((norm - sup) - gap) > 1e-12 * max(1.0, abs(norm)):
                raise ValueError("Sweep gaps must equal norms minus sups.")
        return self

    def rows(self) -> list[dict[str, Any]]:
        return [
            {
                "p": p,
                "norm": norm,
                "sup": sup,
                "gap": gap,
                "certified": certified,
                "restarts": self.config.restarts,
                "seed": seed,
            }
            for p, norm, sup, gap, certified, seed in zip(
                self.p_grid, self.norms, self.sups, self.gaps, self.certified, self.seeds
            )
        ]


class PropertyFailure(BaseModel):
    property: str
    trial: int
    seed: list[int]
    residual: float
    tolerance: float
    detail: str | None = None


class VerifySummary(BaseModel):
    suite: str
    trials: int = Field(ge=1)
    seed: int
    passed: bool
    max_residuals: dict[str, float]
    tolerances: dict[str, float]
    failures: list[PropertyFailure] = Field(default_factory=list)


class RunManifest(BaseModel):
    command: str
    arguments: dict[str, Any]
    seed: int | None = None
    tool_version: str
    duration_seconds: float = Field(ge=0.0)
