"""Dense complex tensors with named, barred legs.

Vectors of a conjugate space are stored as plain coordinate arrays in the
basis ``(ē_x)``; conjugation conjugates the coordinates and flips every bar.
Under that convention ``theta`` is a transpose and ``sigma_flip`` an axis
permutation, so all bar bookkeeping lives in :class:`Leg` metadata.

Matrices are tensors with a row-leg group followed by a column-leg group;
``split`` records how many legs belong to the rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DimensionMismatchError,
    LegCollisionError,
    LegMismatchError,
    NonHermitianError,
    QhomError,
)
from .settings import resolve_tol


@dataclass(frozen=True)
class IndexSet:
    """A finite set ``{0, ..., size-1}`` with a label."""

    name: str
    size: int

    def __post_init__(self) -> None:
        if not self.name:
            raise LegMismatchError("index set needs a non-empty name")
        if int(self.size) != self.size or self.size < 1:
            raise DimensionMismatchError(
                f"index set {self.name!r} must have positive integer size, got {self.size}"
            )

    def __str__(self) -> str:
        return f"{self.name}[{self.size}]"


@dataclass(frozen=True)
class Leg:
    """One tensor axis: an index set and whether it lives in the conjugate space."""

    index_set: IndexSet
    barred: bool = False

    @property
    def name(self) -> str:
        return self.index_set.name

    @property
    def size(self) -> int:
        return self.index_set.size

    def flipped(self) -> "Leg":
        return Leg(self.index_set, not self.barred)

    def __str__(self) -> str:
        return f"bar({self.name})" if self.barred else self.name


def legs_dim(legs: Iterable[Leg]) -> int:
    return math.prod(leg.size for leg in legs)


def unbarred(*sets: IndexSet) -> tuple[Leg, ...]:
    return tuple(Leg(s, False) for s in sets)


def barred(*sets: IndexSet) -> tuple[Leg, ...]:
    return tuple(Leg(s, True) for s in sets)


def _fmt(legs: Sequence[Leg]) -> str:
    return "(" + ", ".join(str(leg) for leg in legs) + ")"


@dataclass(frozen=True, eq=False)
class ComplexTensor:
    """Immutable dense complex tensor.

    Parameters
    ----------
    legs:
        Ordered legs, one per axis.
    data:
        Coordinates; any array with ``prod(leg sizes)`` entries, read row-major.
    split:
        Number of row legs when the tensor is a matrix, ``None`` for vectors.
    """

    legs: tuple[Leg, ...]
    data: np.ndarray
    split: int | None = None

    def __post_init__(self) -> None:
        legs = tuple(self.legs)
        shape = tuple(leg.size for leg in legs)
        arr = np.array(self.data, dtype=complex)
        if arr.size != math.prod(shape):
            raise DimensionMismatchError(
                f"data has {arr.size} entries but legs {_fmt(legs)} need {math.prod(shape)}"
            )
        arr = arr.reshape(shape)
        if not np.all(np.isfinite(arr)):
            raise QhomError("tensor entries must be finite")
        if self.split is not None and not 0 <= self.split <= len(legs):
            raise LegMismatchError(f"split {self.split} out of range for {len(legs)} legs")
        arr.flags.writeable = False
        object.__setattr__(self, "legs", legs)
        object.__setattr__(self, "data", arr)

    # construction -----------------------------------------------------

    @classmethod
    def from_vector(cls, legs: Sequence[Leg], values: np.ndarray) -> "ComplexTensor":
        return cls(tuple(legs), np.asarray(values))

    @classmethod
    def from_matrix(
        cls, row_legs: Sequence[Leg], col_legs: Sequence[Leg], matrix: np.ndarray
    ) -> "ComplexTensor":
        row_legs, col_legs = tuple(row_legs), tuple(col_legs)
        mat = np.asarray(matrix)
        if mat.shape != (legs_dim(row_legs), legs_dim(col_legs)):
            raise DimensionMismatchError(
                f"matrix shape {mat.shape} does not match rows {_fmt(row_legs)} "
                f"and columns {_fmt(col_legs)}"
            )
        return cls(row_legs + col_legs, mat, split=len(row_legs))

    @classmethod
    def basis_vector(cls, legs: Sequence[Leg], index: Sequence[int]) -> "ComplexTensor":
        legs = tuple(legs)
        arr = np.zeros(tuple(leg.size for leg in legs), dtype=complex)
        arr[tuple(index)] = 1.0
        return cls(legs, arr)

    # views ------------------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dim(self) -> int:
        return self.data.size

    @property
    def is_matrix(self) -> bool:
        return self.split is not None

    @property
    def row_legs(self) -> tuple[Leg, ...]:
        self._require_matrix()
        return self.legs[: self.split]

    @property
    def col_legs(self) -> tuple[Leg, ...]:
        self._require_matrix()
        return self.legs[self.split :]

    @property
    def signature(self) -> tuple[tuple[str, int, bool], ...]:
        return tuple((leg.name, leg.size, leg.barred) for leg in self.legs)

    def vector(self) -> np.ndarray:
        return self.data.reshape(-1)

    def matrix(self) -> np.ndarray:
        self._require_matrix()
        return self.data.reshape(legs_dim(self.row_legs), legs_dim(self.col_legs))

    def _require_matrix(self) -> None:
        if self.split is None:
            raise LegMismatchError("operation needs a matrix (row and column legs)")

    # algebra ----------------------------------------------------------

    def norm(self) -> float:
        return float(np.linalg.norm(self.data))

    def inner(self, other: "ComplexTensor") -> complex:
        """Hermitian inner product, linear in ``self``."""

        self._same_legs(other)
        return complex(np.vdot(other.data, self.data))

    def allclose(self, other: "ComplexTensor", atol: float = 1e-12) -> bool:
        return (
            self.signature == other.signature
            and self.split == other.split
            and bool(np.allclose(self.data, other.data, rtol=0.0, atol=atol))
        )

    def _same_legs(self, other: "ComplexTensor") -> None:
        if self.legs != other.legs or self.split != other.split:
            raise LegMismatchError(f"legs {_fmt(self.legs)} and {_fmt(other.legs)} differ")

    def __add__(self, other: "ComplexTensor") -> "ComplexTensor":
        self._same_legs(other)
        return ComplexTensor(self.legs, self.data + other.data, self.split)

    def __sub__(self, other: "ComplexTensor") -> "ComplexTensor":
        self._same_legs(other)
        return ComplexTensor(self.legs, self.data - other.data, self.split)

    def __neg__(self) -> "ComplexTensor":
        return ComplexTensor(self.legs, -self.data, self.split)

    def __mul__(self, scalar: complex) -> "ComplexTensor":
        return ComplexTensor(self.legs, self.data * complex(scalar), self.split)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        kind = "matrix" if self.is_matrix else "vector"
        return f"ComplexTensor({kind}, legs={_fmt(self.legs)})"


def _check_collision(a: Sequence[Leg], b: Sequence[Leg]) -> None:
    seen = {(leg.name, leg.barred) for leg in a}
    clash = [str(leg) for leg in b if (leg.name, leg.barred) in seen]
    if clash:
        raise LegCollisionError(f"legs {', '.join(clash)} appear in both operands")


def tensor_product(a: ComplexTensor, b: ComplexTensor) -> ComplexTensor:
    """Outer product; matrices are regrouped so rows and columns stay together."""

    if a.is_matrix != b.is_matrix:
        raise LegMismatchError("cannot tensor a vector with a matrix")
    if not a.is_matrix:
        _check_collision(a.legs, b.legs)
        return ComplexTensor(a.legs + b.legs, np.multiply.outer(a.data, b.data))
    _check_collision(a.row_legs, b.row_legs)
    _check_collision(a.col_legs, b.col_legs)
    return ComplexTensor.from_matrix(
        a.row_legs + b.row_legs,
        a.col_legs + b.col_legs,
        np.kron(a.matrix(), b.matrix()),
    )


def conjugate(t: ComplexTensor) -> ComplexTensor:
    return ComplexTensor(tuple(leg.flipped() for leg in t.legs), np.conj(t.data), t.split)


def adjoint(m: ComplexTensor) -> ComplexTensor:
    """Hilbert adjoint: rows and columns swap, coordinates conjugate-transpose."""

    return ComplexTensor.from_matrix(m.col_legs, m.row_legs, m.matrix().conj().T)


def dual(m: ComplexTensor) -> ComplexTensor:
    """The dual operator ``K̄ → H̄`` of ``A: H → K``; its coordinates are ``A^t``."""

    return ComplexTensor.from_matrix(
        tuple(leg.flipped() for leg in m.col_legs),
        tuple(leg.flipped() for leg in m.row_legs),
        m.matrix().T,
    )


def _uniform_bar(legs: Sequence[Leg]) -> bool | None:
    bars = {leg.barred for leg in legs}
    return bars.pop() if len(bars) == 1 else None


def theta(t: ComplexTensor, n_domain: int = 1) -> ComplexTensor:
    """Map ``H̄ ⊗ K`` onto ``L(H, K)``: ``θ(ξ̄ ⊗ η) = η ξ*``.

    The first ``n_domain`` legs form ``H̄`` and the rest form ``K``; the two
    groups must carry opposite bars. In coordinates ``θ(t)[k, h] = t[h, k]``.
    """

    if t.is_matrix:
        raise LegMismatchError("theta expects a vector")
    dom, cod = t.legs[:n_domain], t.legs[n_domain:]
    bar_dom, bar_cod = _uniform_bar(dom), _uniform_bar(cod)
    if not dom or not cod or bar_dom is None or bar_cod is None or bar_dom == bar_cod:
        raise LegMismatchError(f"theta needs legs (H̄, K) with opposite bars, got {_fmt(t.legs)}")
    flat = t.vector().reshape(legs_dim(dom), legs_dim(cod))
    return ComplexTensor.from_matrix(cod, tuple(leg.flipped() for leg in dom), flat.T)


def theta_inv(m: ComplexTensor) -> ComplexTensor:
    """Inverse of :func:`theta`; ``A: H → K`` becomes a vector in ``H̄ ⊗ K``."""

    bar_rows, bar_cols = _uniform_bar(m.row_legs), _uniform_bar(m.col_legs)
    if bar_rows is None or bar_cols is None or bar_rows != bar_cols:
        raise LegMismatchError(
            f"theta_inv needs rows and columns in the same space, got {_fmt(m.legs)}"
        )
    legs = tuple(leg.flipped() for leg in m.col_legs) + m.row_legs
    return ComplexTensor(legs, m.matrix().T)


_SIGMA_IN = (False, True, True, False)
_SIGMA_OUT = (True, True, False, False)


def _sigma(t: ComplexTensor, expected: tuple[bool, ...]) -> ComplexTensor:
    if t.is_matrix or len(t.legs) != 4 or tuple(leg.barred for leg in t.legs) != expected:
        raise LegMismatchError(f"sigma expects four legs with bars {expected}, got {_fmt(t.legs)}")
    legs = (t.legs[2], t.legs[1], t.legs[0], t.legs[3])
    return ComplexTensor(legs, np.transpose(t.data, (2, 1, 0, 3)))


def sigma_flip(t: ComplexTensor) -> ComplexTensor:
    """``(X₁, Ȳ₁, X̄₂, Y₂) → (X̄₂, Ȳ₁, X₁, Y₂)`` by swapping the first and third legs."""

    return _sigma(t, _SIGMA_IN)


def sigma_unflip(t: ComplexTensor) -> ComplexTensor:
    return _sigma(t, _SIGMA_OUT)


def apply_local(t: ComplexTensor, op: ComplexTensor, leg: int) -> ComplexTensor:
    """Apply a single-leg operator to one leg of a vector."""

    if t.is_matrix or len(op.row_legs) != 1 or len(op.col_legs) != 1:
        raise LegMismatchError("apply_local needs a vector and a single-leg operator")
    if op.col_legs[0] != t.legs[leg]:
        raise LegMismatchError(f"operator domain {op.col_legs[0]} does not match leg {t.legs[leg]}")
    moved = np.tensordot(op.matrix(), t.data, axes=([1], [leg]))
    moved = np.moveaxis(moved, 0, leg)
    legs = t.legs[:leg] + op.row_legs + t.legs[leg + 1 :]
    return ComplexTensor(legs, moved)


def slice_map(
    functional: ComplexTensor, target: ComplexTensor, legs: Sequence[int]
) -> ComplexTensor:
    """Slice ``target`` by ``functional`` over the listed legs.

    For vectors the functional's legs are the contracted legs with bars
    flipped, so ``ū`` pairs against legs of signature ``u``. For matrices
    ``legs`` index row legs (the matching column legs are contracted too)
    and the pairing is ``⟨S, T⟩ = Tr(S T^t)``.
    """

    legs = list(legs)
    if len(set(legs)) != len(legs):
        raise LegMismatchError("slice legs must be distinct")
    if not target.is_matrix:
        if functional.is_matrix:
            raise LegMismatchError("a vector is sliced by a vector functional")
        want = tuple(target.legs[i].flipped() for i in legs)
        if functional.legs != want:
            raise LegMismatchError(f"functional legs {_fmt(functional.legs)} should be {_fmt(want)}")
        rest = tuple(leg for i, leg in enumerate(target.legs) if i not in legs)
        out = np.tensordot(functional.data, target.data, axes=(list(range(len(legs))), legs))
        return ComplexTensor(rest, out)

    if not functional.is_matrix:
        raise LegMismatchError("a matrix is sliced by a matrix functional")
    rows, cols = target.row_legs, target.col_legs
    if rows != cols:
        raise LegMismatchError("operator slices need a square matrix with matching legs")
    want = tuple(rows[i] for i in legs)
    if functional.row_legs != want or functional.col_legs != want:
        raise LegMismatchError(f"functional legs {_fmt(functional.legs)} should be {_fmt(want * 2)}")
    n = len(legs)
    axes = legs + [target.split + i for i in legs]
    out = np.tensordot(functional.data, target.data, axes=(list(range(2 * n)), axes))
    kept = tuple(leg for i, leg in enumerate(rows) if i not in legs)
    return ComplexTensor(kept + kept, out, split=len(kept))


def partial_trace(t: ComplexTensor, legs: Sequence[int]) -> ComplexTensor:
    """Trace out the listed row legs of a square matrix."""

    traced = [t.row_legs[i] for i in legs]
    eye = ComplexTensor.from_matrix(traced, traced, np.eye(legs_dim(traced)))
    return slice_map(eye, t, legs)


# spectral helpers ------------------------------------------------------


def hermitian_eig(mat: np.ndarray, tol: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decompose a matrix that is Hermitian within ``tol`` (relative)."""

    tol = resolve_tol(tol)
    mat = np.asarray(mat, dtype=complex)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise DimensionMismatchError(f"expected a square matrix, got shape {mat.shape}")
    scale = np.linalg.norm(mat)
    skew = np.linalg.norm(mat - mat.conj().T)
    if skew > tol * max(scale, 1.0):
        raise NonHermitianError(f"matrix is not Hermitian (skew part {skew:.3e})")
    return np.linalg.eigh((mat + mat.conj().T) / 2)


def eig_hermitian(m: ComplexTensor, tol: float | None = None) -> tuple[np.ndarray, list[ComplexTensor]]:
    """Ascending eigenvalues and eigenvectors (as tensors on the row legs)."""

    w, v = hermitian_eig(m.matrix(), tol)
    return w, [ComplexTensor.from_vector(m.row_legs, v[:, i]) for i in range(v.shape[1])]


def psd_clip(mat: np.ndarray) -> np.ndarray:
    """Nearest PSD matrix in Frobenius norm: negative eigenvalues are zeroed."""

    w, v = np.linalg.eigh((mat + mat.conj().T) / 2)
    w = np.clip(w, 0.0, None)
    return (v * w) @ v.conj().T


def psd_project(m: ComplexTensor, tol: float | None = None) -> ComplexTensor:
    hermitian_eig(m.matrix(), tol)
    return ComplexTensor(m.legs, psd_clip(m.matrix()), m.split)


def min_eigenvalue(mat: np.ndarray) -> float:
    mat = np.asarray(mat, dtype=complex)
    if mat.size == 0:
        return 0.0
    return float(np.linalg.eigvalsh((mat + mat.conj().T) / 2)[0])


def op_norm(mat: np.ndarray) -> float:
    mat = np.asarray(mat)
    if mat.size == 0:
        return 0.0
    return float(np.linalg.norm(mat, 2))


def is_psd_array(mat: np.ndarray, tol: float | None = None) -> bool:
    tol = resolve_tol(tol)
    w, _ = hermitian_eig(mat, tol)
    if w.size == 0:
        return True
    scale = max(abs(w[0]), abs(w[-1]))
    return bool(w[0] >= -tol * scale)


def is_psd(m: ComplexTensor, tol: float | None = None) -> bool:
    return is_psd_array(m.matrix(), tol)
