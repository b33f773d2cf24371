"""Matrix subalgebras, row/column module elements over them, and block slicing.

Block indices j are 1-based (j = 1..k) to match the block notation 𝐚_{[j]}.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg

from pnorm.contracts import NormEstimate, OptimizerConfig
from pnorm.matrix_core import DimensionError, ExponentLike, PExponent, as_matrix, op_norm

logger = logging.getLogger(__name__)

MEMBERSHIP_TOL = 1e-10
CLOSURE_TOL = 1e-10


class AlgebraError(ValueError):
    """Raised for invalid algebras, non-member blocks or block-only misuse."""


class BlockIndexError(AlgebraError, IndexError):
    """Raised when a block index falls outside 1..k."""


@dataclass(frozen=True)
class Composition:
    parts: tuple[int, ...]

    def __post_init__(self) -> None:
        parts = tuple(int(part) for part in self.parts)
        if not parts:
            raise AlgebraError("Composition needs at least one part.")
        if any(part < 1 for part in parts):
            raise AlgebraError(f"Composition parts must be positive, got {parts}.")
        object.__setattr__(self, "parts", parts)

    @property
    def k(self) -> int:
        return len(self.parts)

    @property
    def total(self) -> int:
        return sum(self.parts)

    @property
    def offsets(self) -> tuple[int, ...]:
        return (0, *itertools.accumulate(self.parts))

    def block_range(self, j: int) -> slice:
        if not 1 <= j <= self.k:
            raise BlockIndexError(f"Block index {j} outside 1..{self.k}.")
        offsets = self.offsets
        return slice(offsets[j - 1], offsets[j])

    def __str__(self) -> str:
        return ",".join(str(part) for part in self.parts)


def block_diag(blocks: Sequence[object]) -> np.ndarray:
    """diag(a_1, …, a_k) for square blocks; off-block entries are exactly 0."""
    if not blocks:
        raise DimensionError("block_diag needs at least one block.")
    squares = [as_matrix(block) for block in blocks]
    for square in squares:
        if square.shape[0] != square.shape[1]:
            raise DimensionError(f"Blocks must be square, got shape {square.shape}.")
    return np.asarray(linalg.block_diag(*squares), dtype=np.complex128)


class ParametrizedAlgebra:
    """A subalgebra of M_d spanned by a linearly independent, multiplicatively closed basis."""

    kind = "basis"

    def __init__(self, basis: Sequence[object], *, name: str = "basis") -> None:
        if not basis:
            raise AlgebraError("Algebra basis must not be empty.")
        matrices = [as_matrix(element) for element in basis]
        d = matrices[0].shape[0]
        for matrix in matrices:
            if matrix.shape != (d, d):
                raise AlgebraError(f"Basis elements must all be {d}x{d}, got {matrix.shape}.")
        self.name = name
        self._basis = np.stack(matrices)
        self._basis.setflags(write=False)
        self._vectorized = self._basis.reshape(len(matrices), d * d).T
        rank = np.linalg.matrix_rank(self._vectorized)
        if rank != len(matrices):
            raise AlgebraError(f"Basis is linearly dependent (rank {rank} < {len(matrices)}).")
        self._check_closure()

    @property
    def dim(self) -> int:
        return int(self._basis.shape[1])

    @property
    def size(self) -> int:
        return int(self._basis.shape[0])

    @property
    def basis(self) -> np.ndarray:
        return self._basis

    def _check_closure(self) -> None:
        for left, right in itertools.product(range(self.size), repeat=2):
            product = self._basis[left] @ self._basis[right]
            scale = max(1.0, float(np.linalg.norm(product)))
            if self._absolute_residual(product) > CLOSURE_TOL * scale:
                raise AlgebraError(
                    f"Basis is not closed under multiplication (B{left}·B{right} leaves the span)."
                )

    def element(self, coordinates: object) -> np.ndarray:
        """Σ_i λ_i B_i."""
        lam = np.asarray(coordinates, dtype=np.complex128).ravel()
        if lam.size != self.size:
            raise DimensionError(f"Expected {self.size} coordinates, got {lam.size}.")
        return np.einsum("i,ijk->jk", lam, self._basis)

    def elements(self, coordinates: np.ndarray) -> np.ndarray:
        """Batched `element` over the leading axes of `coordinates` (..., m) -> (..., d, d)."""
        return np.einsum("...i,ijk->...jk", coordinates, self._basis)

    def coordinates(self, matrix: object) -> np.ndarray:
        target = np.asarray(matrix, dtype=np.complex128)
        solution, *_ = linalg.lstsq(self._vectorized, target.reshape(-1))
        return solution

    def _absolute_residual(self, matrix: np.ndarray) -> float:
        projection = self._vectorized @ self.coordinates(matrix)
        return float(np.linalg.norm(matrix.reshape(-1) - projection))

    def residual(self, matrix: object) -> float:
        """Distance to the span relative to ‖m‖_F (0 for m = 0)."""
        target = np.asarray(matrix, dtype=np.complex128)
        scale = float(np.linalg.norm(target))
        if scale == 0.0:
            return 0.0
        return self._absolute_residual(target) / scale

    def contains(self, matrix: object, tol: float = MEMBERSHIP_TOL) -> bool:
        target = np.asarray(matrix, dtype=np.complex128)
        if target.shape != (self.dim, self.dim):
            raise DimensionError(
                f"Membership needs a {self.dim}x{self.dim} matrix, got shape {target.shape}."
            )
        return self.residual(target) <= tol

    def identity_coordinates(self) -> np.ndarray | None:
        identity = np.eye(self.dim, dtype=np.complex128)
        if not self.contains(identity):
            return None
        return self.coordinates(identity)

    def is_compatible(self, other: "ParametrizedAlgebra") -> bool:
        if other is self:
            return True
        return (
            other.dim == self.dim
            and other.size == self.size
            and bool(np.allclose(other.basis, self.basis, atol=1e-12))
        )

    def __repr__(self) -> str:
        return f"{type(self).__name__}(name={self.name!r}, dim={self.dim}, size={self.size})"


class BlockDiagAlgebra(ParametrizedAlgebra):
    """A_{c(d,k)}: block-diagonal matrices for a composition of d, spanned by in-block matrix units."""

    kind = "block"

    def __init__(self, composition: Composition | Sequence[int]) -> None:
        self.composition = (
            composition if isinstance(composition, Composition) else Composition(tuple(composition))
        )
        d = self.composition.total
        mask = np.zeros((d, d), dtype=bool)
        units: list[np.ndarray] = []
        for j in range(1, self.composition.k + 1):
            span = self.composition.block_range(j)
            mask[span, span] = True
            for row in range(span.start, span.stop):
                for col in range(span.start, span.stop):
                    unit = np.zeros((d, d), dtype=np.complex128)
                    unit[row, col] = 1.0
                    units.append(unit)
        self.block_mask = mask
        super().__init__(units, name=f"block({self.composition})")

    @classmethod
    def full(cls, d: int) -> "BlockDiagAlgebra":
        return cls(Composition((d,)))

    @classmethod
    def diagonal(cls, d: int) -> "BlockDiagAlgebra":
        return cls(Composition((1,) * d))

    @property
    def is_full(self) -> bool:
        return self.composition.k == 1

    def _absolute_residual(self, matrix: np.ndarray) -> float:
        return float(np.linalg.norm(matrix[~self.block_mask]))

    def coordinates(self, matrix: object) -> np.ndarray:
        target = np.asarray(matrix, dtype=np.complex128)
        return target[self.block_mask]

    def is_compatible(self, other: ParametrizedAlgebra) -> bool:
        if isinstance(other, BlockDiagAlgebra):
            return other.composition == self.composition
        return super().is_compatible(other)


def membership(matrix: object, algebra: ParametrizedAlgebra, tol: float = MEMBERSHIP_TOL) -> bool:
    return algebra.contains(matrix, tol)


def require_block_algebra(algebra: ParametrizedAlgebra) -> BlockDiagAlgebra:
    if not isinstance(algebra, BlockDiagAlgebra):
        raise AlgebraError(f"Operation needs a block-diagonal algebra, got {algebra!r}.")
    return algebra


class ModuleElement:
    """n algebra elements stacked as a column (nd×d) or side by side as a row (d×nd)."""

    side = "column"

    def __init__(
        self,
        algebra: ParametrizedAlgebra,
        blocks: Sequence[object],
        *,
        matrix: object | None = None,
        tol: float = MEMBERSHIP_TOL,
    ) -> None:
        if not blocks:
            raise AlgebraError("A module element needs n >= 1 blocks.")
        d = algebra.dim
        parts = [np.array(block, dtype=np.complex128) for block in blocks]
        for index, part in enumerate(parts):
            if part.shape != (d, d):
                raise DimensionError(f"Block {index} must be {d}x{d}, got shape {part.shape}.")
            if not algebra.contains(part, tol):
                raise AlgebraError(f"Block {index} is not an element of {algebra!r}.")
            part.setflags(write=False)
        assembled = self._assemble(parts)
        if matrix is not None:
            given = np.asarray(matrix, dtype=np.complex128)
            if given.shape != assembled.shape or not np.allclose(given, assembled, rtol=0, atol=1e-12):
                raise DimensionError("Module element matrix does not match its blocks.")
        assembled.setflags(write=False)
        self.algebra = algebra
        self.blocks = tuple(parts)
        self.matrix = assembled

    @staticmethod
    def _assemble(parts: list[np.ndarray]) -> np.ndarray:
        return np.vstack(parts)

    @staticmethod
    def _split(matrix: np.ndarray, d: int) -> list[np.ndarray]:
        return [matrix[l * d : (l + 1) * d, :] for l in range(matrix.shape[0] // d)]

    @classmethod
    def from_matrix(
        cls, algebra: ParametrizedAlgebra, matrix: object, *, tol: float = MEMBERSHIP_TOL
    ):
        array = np.asarray(matrix, dtype=np.complex128)
        d = algebra.dim
        expected = cls._expected_shape(array, d)
        if expected is None:
            raise DimensionError(
                f"A {cls.side} module element over a {d}x{d} algebra cannot have shape {array.shape}."
            )
        return cls(algebra, cls._split(array, d), matrix=array, tol=tol)

    @staticmethod
    def _expected_shape(array: np.ndarray, d: int) -> tuple[int, int] | None:
        if array.ndim == 2 and array.shape[1] == d and array.shape[0] % d == 0 and array.shape[0]:
            return array.shape
        return None

    @property
    def n(self) -> int:
        return len(self.blocks)

    @property
    def d(self) -> int:
        return self.algebra.dim

    def norm(self, p: ExponentLike, cfg: OptimizerConfig | None = None) -> NormEstimate:
        return op_norm(self.matrix, p, p, cfg)

    def __repr__(self) -> str:
        return f"{type(self).__name__}(algebra={self.algebra!r}, n={self.n})"


class ColumnModuleElement(ModuleElement):
    side = "column"


class RowModuleElement(ModuleElement):
    side = "row"

    @staticmethod
    def _assemble(parts: list[np.ndarray]) -> np.ndarray:
        return np.hstack(parts)

    @staticmethod
    def _split(matrix: np.ndarray, d: int) -> list[np.ndarray]:
        return [matrix[:, l * d : (l + 1) * d] for l in range(matrix.shape[1] // d)]

    @staticmethod
    def _expected_shape(array: np.ndarray, d: int) -> tuple[int, int] | None:
        if array.ndim == 2 and array.shape[0] == d and array.shape[1] % d == 0 and array.shape[1]:
            return array.shape
        return None


def column_slice(a: ColumnModuleElement, j: int) -> np.ndarray:
    """𝐚(:,[j]): the columns of block j, shape nd×d_j."""
    algebra = require_block_algebra(a.algebra)
    return a.matrix[:, algebra.composition.block_range(j)]


def column_block(a: ColumnModuleElement, j: int) -> np.ndarray:
    """𝐚_{[j]}: the j-th diagonal block of every stacked element, shape nd_j×d_j."""
    algebra = require_block_algebra(a.algebra)
    span = algebra.composition.block_range(j)
    return np.vstack([block[span, span] for block in a.blocks])


def row_slice(b: RowModuleElement, j: int) -> np.ndarray:
    """𝐛([j],:): the rows of block j, shape d_j×nd."""
    algebra = require_block_algebra(b.algebra)
    return b.matrix[algebra.composition.block_range(j), :]


def row_block(b: RowModuleElement, j: int) -> np.ndarray:
    """𝐛_{[j]}: the j-th diagonal block of every element side by side, shape d_j×nd_j."""
    algebra = require_block_algebra(b.algebra)
    span = algebra.composition.block_range(j)
    return np.hstack([block[span, span] for block in b.blocks])


def block_norms(
    x: ModuleElement, p: ExponentLike, cfg: OptimizerConfig | None = None
) -> list[NormEstimate]:
    algebra = require_block_algebra(x.algebra)
    extract = column_block if isinstance(x, ColumnModuleElement) else row_block
    return [op_norm(extract(x, j), p, p, cfg) for j in range(1, algebra.composition.k + 1)]


def stacked_norm(x: ModuleElement, p: ExponentLike, cfg: OptimizerConfig | None = None) -> float:
    """max_j ‖x_{[j]}‖_p, equal to the operator norm of the whole stacked matrix."""
    return max(estimate.value for estimate in block_norms(x, PExponent.of(p), cfg))


def transpose_element(b: RowModuleElement) -> ColumnModuleElement:
    """𝐛ᵀ as a column element; valid for block algebras, which are closed under transposition."""
    algebra = require_block_algebra(b.algebra)
    return ColumnModuleElement(algebra, [block.T for block in b.blocks])
