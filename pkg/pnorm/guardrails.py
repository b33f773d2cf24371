"""Deterministic input guardrails: exponents, compositions, grids, matrix and algebra JSON."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import ValidationError

from pnorm.block_algebra import AlgebraError, BlockDiagAlgebra, Composition, ParametrizedAlgebra
from pnorm.contracts import InputError, MatrixPayload
from pnorm.experiments import sd_algebra, upper_triangular_algebra
from pnorm.matrix_core import PExponent


def parse_exponent(raw: object) -> PExponent:
    try:
        return PExponent.of(raw)  # type: ignore[arg-type]
    except (TypeError, ValueError) as exc:
        raise InputError(f"Invalid exponent {raw!r}: must be a number >= 1 or 'inf'.") from exc


def parse_finite_exponent(raw: object) -> PExponent:
    exponent = parse_exponent(raw)
    if exponent.is_infinite:
        raise InputError("This operation needs a finite exponent p in [1, ∞).")
    return exponent


def parse_composition(text: str) -> Composition:
    parts_text = [part.strip() for part in str(text).split(",")]
    if not parts_text or any(not part for part in parts_text):
        raise InputError(f"Invalid composition '{text}': expected comma-separated positive integers.")
    try:
        parts = tuple(int(part) for part in parts_text)
        return Composition(parts)
    except (ValueError, AlgebraError) as exc:
        raise InputError(f"Invalid composition '{text}': {exc}") from exc


def parse_grid(text: str) -> list[PExponent]:
    items = [item.strip() for item in str(text).split(",") if item.strip()]
    if not items:
        raise InputError("Sweep grid must contain at least one exponent.")
    grid = [parse_finite_exponent(item) for item in items]
    return grid


def _reject_constant(token: str) -> float:
    raise InputError(f"Non-finite JSON number '{token}' is not allowed.")


def load_json(source: str) -> Any:
    """Parse inline JSON, or the contents of a file when `source` names one."""
    text = str(source)
    stripped = text.lstrip()
    if not stripped.startswith(("{", "[")):
        path = Path(text)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise InputError(f"Cannot read JSON input '{source}': {exc}") from exc
    try:
        return json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise InputError(f"Malformed JSON in '{source}': {exc.msg}.") from exc


def parse_matrix_json(payload: object) -> np.ndarray:
    """{"rows": r, "cols": c, "entries": [[re, im], ...]} in row-major order."""
    if not isinstance(payload, dict):
        raise InputError("Matrix JSON must be an object with rows, cols and entries.")
    try:
        return MatrixPayload.model_validate(payload).to_array()
    except ValidationError as exc:
        error = exc.errors()[0]
        where = ".".join(str(part) for part in error["loc"]) or "matrix"
        raise InputError(f"Invalid matrix JSON at '{where}': {error['msg']}.") from exc


def load_matrix(source: str) -> np.ndarray:
    return parse_matrix_json(load_json(source))


def parse_algebra_spec(payload: object) -> ParametrizedAlgebra:
    """Algebra spec JSON: block, basis, or the named shortcuts sd and upper-triangular."""
    if isinstance(payload, str):
        payload = {"kind": payload}
    if not isinstance(payload, dict) or "kind" not in payload:
        raise InputError("Algebra spec must be an object with a 'kind' field.")
    kind = payload["kind"]
    try:
        if kind == "block":
            parts = payload.get("parts")
            if isinstance(parts, str):
                return BlockDiagAlgebra(parse_composition(parts))
            if not isinstance(parts, list) or not parts:
                raise InputError("Block algebra spec needs a non-empty 'parts' list.")
            return BlockDiagAlgebra(Composition(tuple(int(part) for part in parts)))
        if kind == "basis":
            basis = payload.get("basis")
            if not isinstance(basis, list) or not basis:
                raise InputError("Basis algebra spec needs a non-empty 'basis' list.")
            matrices = [parse_matrix_json(item) for item in basis]
            dim = payload.get("dim", matrices[0].shape[0])
            if any(matrix.shape != (dim, dim) for matrix in matrices):
                raise InputError(f"Every basis matrix must be {dim}x{dim}.")
            return ParametrizedAlgebra(matrices, name=str(payload.get("name", "basis")))
        if kind == "sd":
            return sd_algebra()
        if kind == "upper-triangular":
            return upper_triangular_algebra()
    except AlgebraError as exc:
        raise InputError(f"Invalid algebra spec: {exc}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"Invalid algebra spec: {exc}") from exc
    raise InputError(f"Unknown algebra kind '{kind}'.")


def load_algebra(source: str) -> ParametrizedAlgebra:
    """Accepts a JSON file, inline JSON, a named algebra, or 'block:1,2,1'."""
    text = str(source).strip()
    if text in {"sd", "upper-triangular"}:
        return parse_algebra_spec(text)
    if text.startswith("block:"):
        return BlockDiagAlgebra(parse_composition(text[len("block:") :]))
    return parse_algebra_spec(load_json(text))
