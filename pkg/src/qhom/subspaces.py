"""Subspaces of tensor spaces and of operator spaces, kept as orthonormal bases."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import TYPE_CHECKING, Callable, Iterable, Sequence

import numpy as np
from scipy.linalg import null_space

from .errors import DimensionMismatchError, LegMismatchError
from .settings import resolve_tol
from .tensors import ComplexTensor, IndexSet, Leg, barred, hermitian_eig, legs_dim, unbarred

if TYPE_CHECKING:  # pragma: no cover
    from .tro import TroReport


def orthonormal_columns(vectors: np.ndarray, tol: float | None = None) -> np.ndarray:
    """Gram-Schmidt with one re-orthogonalisation pass.

    A column is dropped when its residual after projection falls below
    ``tol`` times its original norm.
    """

    tol = resolve_tol(tol)
    vectors = np.asarray(vectors, dtype=complex)
    dim = vectors.shape[0]
    kept: list[np.ndarray] = []
    q = np.zeros((dim, 0), dtype=complex)
    for j in range(vectors.shape[1]):
        v = vectors[:, j].copy()
        norm0 = np.linalg.norm(v)
        if norm0 == 0.0:
            continue
        for _ in range(2):
            v -= q @ (q.conj().T @ v)
        norm = np.linalg.norm(v)
        if norm <= tol * norm0:
            continue
        kept.append(v / norm)
        q = np.column_stack(kept)
    return q


def _as_columns(vectors: Iterable[ComplexTensor | np.ndarray], legs: tuple[Leg, ...]) -> np.ndarray:
    cols = []
    for v in vectors:
        if isinstance(v, ComplexTensor):
            if v.legs != legs:
                raise LegMismatchError(f"vector legs {v.legs} differ from ambient legs {legs}")
            cols.append(v.vector())
        else:
            arr = np.asarray(v, dtype=complex).reshape(-1)
            if arr.size != legs_dim(legs):
                raise DimensionMismatchError(f"vector of length {arr.size} outside ambient space")
            cols.append(arr)
    if not cols:
        return np.zeros((legs_dim(legs), 0), dtype=complex)
    return np.column_stack(cols)


@dataclass(frozen=True, eq=False)
class Subspace:
    """Subspace of the tensor space over ``ambient_legs``.

    ``columns`` holds an orthonormal basis, one basis vector per column,
    flattened row-major over the ambient legs.
    """

    ambient_legs: tuple[Leg, ...]
    columns: np.ndarray

    def __post_init__(self) -> None:
        legs = tuple(self.ambient_legs)
        cols = np.array(self.columns, dtype=complex).reshape(legs_dim(legs), -1)
        cols.flags.writeable = False
        object.__setattr__(self, "ambient_legs", legs)
        object.__setattr__(self, "columns", cols)

    @classmethod
    def orthonormalize(
        cls,
        vectors: Iterable[ComplexTensor | np.ndarray],
        legs: Sequence[Leg],
        tol: float | None = None,
    ) -> "Subspace":
        legs = tuple(legs)
        return cls(legs, orthonormal_columns(_as_columns(vectors, legs), tol))

    @classmethod
    def zero(cls, legs: Sequence[Leg]) -> "Subspace":
        legs = tuple(legs)
        return cls(legs, np.zeros((legs_dim(legs), 0)))

    @classmethod
    def full(cls, legs: Sequence[Leg]) -> "Subspace":
        legs = tuple(legs)
        return cls(legs, np.eye(legs_dim(legs)))

    @classmethod
    def range_of(cls, m: ComplexTensor, tol: float | None = None) -> "Subspace":
        """Span of eigenvectors of a Hermitian matrix with ``|λ| > tol·‖M‖``."""

        tol = resolve_tol(tol)
        w, v = hermitian_eig(m.matrix(), tol)
        scale = float(np.max(np.abs(w))) if w.size else 0.0
        keep = np.abs(w) > tol * scale
        return cls(m.row_legs, v[:, keep])

    @property
    def dim(self) -> int:
        return self.columns.shape[0]

    @property
    def rank(self) -> int:
        return self.columns.shape[1]

    @property
    def basis(self) -> list[ComplexTensor]:
        return [ComplexTensor(self.ambient_legs, self.columns[:, i]) for i in range(self.rank)]

    def projector(self) -> np.ndarray:
        return self.columns @ self.columns.conj().T

    def _vec(self, v: ComplexTensor | np.ndarray) -> np.ndarray:
        if isinstance(v, ComplexTensor):
            if v.legs != self.ambient_legs:
                raise LegMismatchError(f"vector legs {v.legs} differ from {self.ambient_legs}")
            return v.vector()
        arr = np.asarray(v, dtype=complex).reshape(-1)
        if arr.size != self.dim:
            raise DimensionMismatchError(f"vector of length {arr.size} outside ambient space")
        return arr

    def residual(self, v: ComplexTensor | np.ndarray) -> float:
        vec = self._vec(v)
        return float(np.linalg.norm(vec - self.columns @ (self.columns.conj().T @ vec)))

    def contains(self, v: ComplexTensor | np.ndarray, tol: float | None = None, atol: float = 0.0) -> bool:
        """``‖v − Proj v‖ ≤ tol·‖v‖ + atol``."""

        tol = resolve_tol(tol)
        vec = self._vec(v)
        return self.residual(vec) <= tol * float(np.linalg.norm(vec)) + atol

    def _check_ambient(self, other: "Subspace") -> None:
        if self.ambient_legs != other.ambient_legs:
            raise LegMismatchError(
                f"ambient legs {self.ambient_legs} and {other.ambient_legs} differ"
            )

    def includes(self, other: "Subspace", tol: float | None = None) -> bool:
        self._check_ambient(other)
        return all(self.contains(other.columns[:, i], tol) for i in range(other.rank))

    def equals(self, other: "Subspace", tol: float | None = None) -> bool:
        return self.rank == other.rank and self.includes(other, tol)

    def complement(self) -> "Subspace":
        if self.rank == 0:
            return Subspace.full(self.ambient_legs)
        if self.rank == self.dim:
            return Subspace.zero(self.ambient_legs)
        return Subspace(self.ambient_legs, null_space(self.columns.conj().T))

    def sum(self, other: "Subspace", tol: float | None = None) -> "Subspace":
        self._check_ambient(other)
        stacked = np.hstack([self.columns, other.columns])
        return Subspace(self.ambient_legs, orthonormal_columns(stacked, tol))

    def direct_sum(self, other: "Subspace") -> "Subspace":
        """Sum of two subspaces already known to be orthogonal."""

        self._check_ambient(other)
        return Subspace(self.ambient_legs, np.hstack([self.columns, other.columns]))

    def tensor(self, other: "Subspace") -> "Subspace":
        return Subspace(self.ambient_legs + other.ambient_legs, np.kron(self.columns, other.columns))

    def image(
        self,
        linear_map: Callable[[np.ndarray], np.ndarray] | np.ndarray,
        legs: Sequence[Leg],
        tol: float | None = None,
    ) -> "Subspace":
        """Span of the images of the basis under a matrix or a vector function."""

        legs = tuple(legs)
        if callable(linear_map):
            images = [np.asarray(linear_map(self.columns[:, i])).reshape(-1) for i in range(self.rank)]
            cols = _as_columns(images, legs)
        else:
            cols = np.asarray(linear_map) @ self.columns
        return Subspace(legs, orthonormal_columns(cols, tol))

    def conjugate(self) -> "Subspace":
        return Subspace(tuple(leg.flipped() for leg in self.ambient_legs), self.columns.conj())

    def permute(self, order: Sequence[int]) -> "Subspace":
        order = list(order)
        shape = tuple(leg.size for leg in self.ambient_legs) + (self.rank,)
        cols = self.columns.reshape(shape).transpose(order + [len(order)])
        legs = tuple(self.ambient_legs[i] for i in order)
        return Subspace(legs, cols.reshape(legs_dim(legs), self.rank))

    def __repr__(self) -> str:
        legs = ", ".join(str(leg) for leg in self.ambient_legs)
        return f"Subspace(({legs}), rank={self.rank}/{self.dim})"


def _set_dim(sets: Sequence[IndexSet]) -> int:
    return int(np.prod([s.size for s in sets]))


@dataclass(frozen=True, eq=False)
class OperatorSubspace:
    """Subspace of ``L(ℂ^domain, ℂ^codomain)`` with a Hilbert-Schmidt orthonormal basis.

    ``basis`` has shape ``(rank, dim codomain, dim domain)``.
    """

    domain: tuple[IndexSet, ...]
    codomain: tuple[IndexSet, ...]
    basis: np.ndarray

    def __post_init__(self) -> None:
        dom, cod = tuple(self.domain), tuple(self.codomain)
        arr = np.array(self.basis, dtype=complex).reshape(-1, _set_dim(cod), _set_dim(dom))
        arr.flags.writeable = False
        object.__setattr__(self, "domain", dom)
        object.__setattr__(self, "codomain", cod)
        object.__setattr__(self, "basis", arr)

    @classmethod
    def from_operators(
        cls,
        ops: Iterable[np.ndarray],
        domain: Sequence[IndexSet],
        codomain: Sequence[IndexSet],
        tol: float | None = None,
    ) -> "OperatorSubspace":
        shape = (_set_dim(codomain), _set_dim(domain))
        flat = []
        for op in ops:
            op = np.asarray(op, dtype=complex)
            if op.shape != shape:
                raise DimensionMismatchError(f"operator of shape {op.shape}, expected {shape}")
            flat.append(op.reshape(-1))
        cols = np.column_stack(flat) if flat else np.zeros((shape[0] * shape[1], 0))
        q = orthonormal_columns(cols, tol)
        return cls(tuple(domain), tuple(codomain), q.T.reshape(-1, *shape))

    @classmethod
    def full(cls, domain: Sequence[IndexSet], codomain: Sequence[IndexSet]) -> "OperatorSubspace":
        n, m = _set_dim(codomain), _set_dim(domain)
        return cls(tuple(domain), tuple(codomain), np.eye(n * m).reshape(-1, n, m))

    @classmethod
    def from_subspace(cls, s: Subspace, n_domain: int = 1) -> "OperatorSubspace":
        """θ applied to every basis vector of ``s`` (legs ``(H̄, K)``)."""

        dom, cod = s.ambient_legs[:n_domain], s.ambient_legs[n_domain:]
        if not all(leg.barred for leg in dom) or any(leg.barred for leg in cod):
            raise LegMismatchError(f"expected barred domain legs then unbarred legs, got {s.ambient_legs}")
        ddom, dcod = legs_dim(dom), legs_dim(cod)
        ops = s.columns.T.reshape(-1, ddom, dcod).transpose(0, 2, 1)
        return cls(
            tuple(leg.index_set for leg in dom), tuple(leg.index_set for leg in cod), ops
        )

    @property
    def rank(self) -> int:
        return self.basis.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.basis.shape[1], self.basis.shape[2]

    @property
    def operators(self) -> list[np.ndarray]:
        return [self.basis[k] for k in range(self.rank)]

    def to_subspace(self) -> Subspace:
        """θ⁻¹ of the basis: vectors over ``(domain̄, codomain)``."""

        legs = barred(*self.domain) + unbarred(*self.codomain)
        cols = self.basis.transpose(0, 2, 1).reshape(self.rank, self.shape[0] * self.shape[1]).T
        return Subspace(legs, cols)

    def coefficients(self, op: np.ndarray) -> np.ndarray:
        return np.einsum("kij,ij->k", self.basis.conj(), np.asarray(op, dtype=complex))

    def residual(self, op: np.ndarray) -> float:
        op = np.asarray(op, dtype=complex)
        if op.shape != self.shape:
            raise DimensionMismatchError(f"operator of shape {op.shape}, expected {self.shape}")
        proj = np.einsum("k,kij->ij", self.coefficients(op), self.basis)
        return float(np.linalg.norm(op - proj))

    def contains(self, op: np.ndarray, tol: float | None = None, atol: float = 0.0) -> bool:
        tol = resolve_tol(tol)
        return self.residual(op) <= tol * float(np.linalg.norm(op)) + atol

    def includes(self, other: "OperatorSubspace", tol: float | None = None) -> bool:
        return all(self.contains(b, tol) for b in other.operators)

    def equals(self, other: "OperatorSubspace", tol: float | None = None) -> bool:
        return self.rank == other.rank and self.includes(other, tol)

    def adjoint(self) -> "OperatorSubspace":
        return OperatorSubspace(self.codomain, self.domain, self.basis.conj().transpose(0, 2, 1))

    def conjugate(self) -> "OperatorSubspace":
        return OperatorSubspace(self.domain, self.codomain, self.basis.conj())

    def common_kernel(self) -> np.ndarray:
        """Orthonormal basis (as columns) of the intersection of all kernels."""

        if self.rank == 0:
            return np.eye(self.shape[1], dtype=complex)
        return null_space(self.basis.reshape(-1, self.shape[1]))

    @cached_property
    def tro(self) -> "TroReport":
        """Cached TRO and non-degeneracy tags."""

        from .tro import tro_check

        return tro_check(self)

    def __repr__(self) -> str:
        dom = "".join(s.name for s in self.domain)
        cod = "".join(s.name for s in self.codomain)
        return f"OperatorSubspace(L({dom}, {cod}), rank={self.rank})"


def product_space(
    left: OperatorSubspace,
    middle: OperatorSubspace,
    right: OperatorSubspace,
    tol: float | None = None,
) -> OperatorSubspace:
    """``span{L S R}`` over basis triples."""

    if left.shape[1] != middle.shape[0] or middle.shape[1] != right.shape[0]:
        raise DimensionMismatchError("operator spaces cannot be multiplied")
    prods = np.einsum("aij,bjk,ckl->abcil", left.basis, middle.basis, right.basis)
    ops = prods.reshape(-1, left.shape[0], right.shape[1])
    return OperatorSubspace.from_operators(ops, right.domain, left.codomain, tol)
