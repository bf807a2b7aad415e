"""Quantum channels between matrix algebras and the classical bridge.

The Choi matrix is indexed ``((x, y), (x', y'))`` with
``J[(x, y), (x', y')] = Γ(ε_{x,x'})[y, y']``. In these coordinates the twisted
Choi matrix has the same entries; it differs only in that its input legs
are barred, so that its range vectors are ``θ⁻¹`` of Kraus operators.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatchError, InvalidChannelError
from .settings import resolve_tol
from .subspaces import OperatorSubspace, orthonormal_columns
from .tensors import ComplexTensor, IndexSet, barred, hermitian_eig, min_eigenvalue, unbarred

log = logging.getLogger(__name__)


def _dim(sets: Sequence[IndexSet]) -> int:
    return int(np.prod([s.size for s in sets]))


def _kraus_to_choi(kraus: Sequence[np.ndarray]) -> np.ndarray:
    # zeta_A[(x, y)] = A[y, x]
    zetas = np.stack([np.asarray(a).T.reshape(-1) for a in kraus], axis=1)
    return zetas @ zetas.conj().T


@dataclass(frozen=True, eq=False)
class Channel:
    """Completely positive map ``M_in → M_out``.

    Build instances with :meth:`from_kraus`, :meth:`from_choi` or
    :meth:`assume_valid`; the first two validate trace preservation and
    complete positivity.
    """

    in_sets: tuple[IndexSet, ...]
    out_sets: tuple[IndexSet, ...]
    choi: np.ndarray
    kraus: tuple[np.ndarray, ...] | None = None

    def __post_init__(self) -> None:
        in_sets, out_sets = tuple(self.in_sets), tuple(self.out_sets)
        n = _dim(in_sets) * _dim(out_sets)
        choi = np.array(self.choi, dtype=complex)
        if choi.shape != (n, n):
            raise DimensionMismatchError(f"Choi matrix of shape {choi.shape}, expected {(n, n)}")
        choi.flags.writeable = False
        object.__setattr__(self, "in_sets", in_sets)
        object.__setattr__(self, "out_sets", out_sets)
        object.__setattr__(self, "choi", choi)
        if self.kraus is not None:
            ops = tuple(np.array(a, dtype=complex) for a in self.kraus)
            for a in ops:
                a.flags.writeable = False
            object.__setattr__(self, "kraus", ops)

    # construction -----------------------------------------------------

    @classmethod
    def from_kraus(
        cls,
        kraus: Iterable[np.ndarray],
        in_sets: Sequence[IndexSet],
        out_sets: Sequence[IndexSet],
        tol: float | None = None,
    ) -> "Channel":
        ch = cls.assume_valid(kraus=kraus, in_sets=in_sets, out_sets=out_sets)
        ch.validate(tol)
        return ch

    @classmethod
    def from_choi(
        cls,
        choi: np.ndarray,
        in_sets: Sequence[IndexSet],
        out_sets: Sequence[IndexSet],
        tol: float | None = None,
    ) -> "Channel":
        ch = cls.assume_valid(choi=choi, in_sets=in_sets, out_sets=out_sets)
        ch.validate(tol)
        return ch

    @classmethod
    def assume_valid(
        cls,
        in_sets: Sequence[IndexSet],
        out_sets: Sequence[IndexSet],
        kraus: Iterable[np.ndarray] | None = None,
        choi: np.ndarray | None = None,
    ) -> "Channel":
        """Build a CP map without checking trace preservation."""

        in_sets, out_sets = tuple(in_sets), tuple(out_sets)
        if kraus is not None:
            ops = [np.asarray(a, dtype=complex) for a in kraus]
            shape = (_dim(out_sets), _dim(in_sets))
            for a in ops:
                if a.shape != shape:
                    raise DimensionMismatchError(f"Kraus operator of shape {a.shape}, expected {shape}")
            if not ops:
                ops = [np.zeros(shape, dtype=complex)]
            if choi is None:
                choi = _kraus_to_choi(ops)
            return cls(in_sets, out_sets, choi, tuple(ops))
        if choi is None:
            raise InvalidChannelError("a channel needs Kraus operators or a Choi matrix")
        return cls(in_sets, out_sets, choi)

    # properties -------------------------------------------------------

    @property
    def d_in(self) -> int:
        return _dim(self.in_sets)

    @property
    def d_out(self) -> int:
        return _dim(self.out_sets)

    def choi4(self) -> np.ndarray:
        """Choi entries as ``J4[x, y, x', y']``."""

        return self.choi.reshape(self.d_in, self.d_out, self.d_in, self.d_out)

    def tp_residual(self) -> float:
        tr_out = np.einsum("ayby->ab", self.choi4())
        return float(np.max(np.abs(tr_out - np.eye(self.d_in))))

    def cp_residual(self) -> float:
        scale = max(float(np.trace(self.choi).real), 1.0)
        return max(0.0, -min_eigenvalue(self.choi)) / scale

    def is_trace_preserving(self, tol: float | None = None) -> bool:
        return self.tp_residual() <= resolve_tol(tol) * max(1.0, self.d_in)

    def validate(self, tol: float | None = None) -> None:
        """Raise :class:`InvalidChannelError` unless CPTP within ``tol``."""

        tol = resolve_tol(tol)
        hermitian_eig(self.choi, tol)
        cp = self.cp_residual()
        if cp > tol:
            raise InvalidChannelError(f"Choi matrix is not PSD (relative defect {cp:.3e})")
        tp = self.tp_residual()
        if tp > tol * max(1.0, self.d_in):
            raise InvalidChannelError(f"map is not trace preserving (defect {tp:.3e})")

    # action -----------------------------------------------------------

    def apply(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=complex)
        if t.shape != (self.d_in, self.d_in):
            raise DimensionMismatchError(f"input of shape {t.shape}, expected {(self.d_in, self.d_in)}")
        if self.kraus is not None:
            return sum(a @ t @ a.conj().T for a in self.kraus)
        return np.einsum("ab,aybz->yz", t, self.choi4())

    def __repr__(self) -> str:
        ins = "".join(s.name for s in self.in_sets)
        outs = "".join(s.name for s in self.out_sets)
        return f"Channel(M_{ins} -> M_{outs})"


@dataclass(frozen=True, eq=False)
class ClassicalChannel:
    """Column-stochastic matrix ``N[y, x] = 𝒩(y|x)``."""

    in_sets: tuple[IndexSet, ...]
    out_sets: tuple[IndexSet, ...]
    matrix: np.ndarray

    def __post_init__(self) -> None:
        in_sets, out_sets = tuple(self.in_sets), tuple(self.out_sets)
        mat = np.array(self.matrix, dtype=float)
        if mat.shape != (_dim(out_sets), _dim(in_sets)):
            raise DimensionMismatchError(
                f"stochastic matrix of shape {mat.shape}, expected {(_dim(out_sets), _dim(in_sets))}"
            )
        mat.flags.writeable = False
        object.__setattr__(self, "in_sets", in_sets)
        object.__setattr__(self, "out_sets", out_sets)
        object.__setattr__(self, "matrix", mat)

    @classmethod
    def create(
        cls,
        matrix: np.ndarray,
        in_sets: Sequence[IndexSet],
        out_sets: Sequence[IndexSet],
        tol: float | None = None,
    ) -> "ClassicalChannel":
        tol = resolve_tol(tol)
        ch = cls(tuple(in_sets), tuple(out_sets), matrix)
        if np.any(ch.matrix < -tol):
            raise InvalidChannelError("stochastic matrix has negative entries")
        sums = ch.matrix.sum(axis=0)
        if np.max(np.abs(sums - 1.0)) > tol * max(1, ch.matrix.shape[0]):
            raise InvalidChannelError("stochastic matrix columns must sum to 1")
        return ch

    def support(self) -> frozenset[tuple[int, int]]:
        """``{(x, y) : 𝒩(y|x) ≠ 0}`` over flattened indices."""

        ys, xs = np.nonzero(self.matrix)
        return frozenset(zip(xs.tolist(), ys.tolist()))


# operations ------------------------------------------------------------


def choi_of(ch: Channel) -> ComplexTensor:
    legs = unbarred(*ch.in_sets, *ch.out_sets)
    return ComplexTensor.from_matrix(legs, legs, ch.choi)


def twisted_choi(ch: Channel) -> ComplexTensor:
    """``Σ ε̄_{x',x} ⊗ Γ(ε_{x,x'})`` on legs ``(X̄..., Y...)``."""

    legs = barred(*ch.in_sets) + unbarred(*ch.out_sets)
    return ComplexTensor.from_matrix(legs, legs, ch.choi)


def kraus_of(ch: Channel, tol: float | None = None) -> list[np.ndarray]:
    """Kraus operators from the Choi spectrum, keeping ``λ > tol·Tr(J)``."""

    tol = resolve_tol(tol)
    w, v = hermitian_eig(ch.choi, tol)
    cut = tol * max(float(np.trace(ch.choi).real), 0.0)
    ops = []
    for lam, vec in zip(w[::-1], v.T[::-1]):
        if lam <= cut:
            break
        ops.append(np.sqrt(lam) * vec.reshape(ch.d_in, ch.d_out).T)
    return ops


def kraus_space(ch: Channel, tol: float | None = None) -> OperatorSubspace:
    """θ-image of the range of the twisted Choi matrix."""

    tol = resolve_tol(tol)
    w, v = hermitian_eig(ch.choi, tol)
    scale = float(np.max(np.abs(w))) if w.size else 0.0
    cols = v[:, np.abs(w) > tol * scale]
    ops = cols.T.reshape(-1, ch.d_in, ch.d_out).transpose(0, 2, 1)
    return OperatorSubspace(ch.in_sets, ch.out_sets, ops)


def kraus_span(ch: Channel, tol: float | None = None) -> OperatorSubspace:
    """Span of the supplied (or extracted) Kraus list, orthonormalised."""

    ops = ch.kraus if ch.kraus is not None else kraus_of(ch, tol)
    return OperatorSubspace.from_operators(ops, ch.in_sets, ch.out_sets, tol)


def gamma_of_classical(n: ClassicalChannel) -> Channel:
    """``Γ_𝒩 = 𝒩 ∘ Δ``: diagonal Choi matrix with entries ``𝒩(y|x)``."""

    d_out, d_in = n.matrix.shape
    choi = np.diag(n.matrix.T.reshape(-1).astype(complex))
    kraus = []
    for y, x in zip(*np.nonzero(n.matrix)):
        a = np.zeros((d_out, d_in), dtype=complex)
        a[y, x] = np.sqrt(n.matrix[y, x])
        kraus.append(a)
    return Channel(n.in_sets, n.out_sets, choi, tuple(kraus) if kraus else None)


def classical_of(ch: Channel) -> ClassicalChannel:
    """``𝒩_Γ(y|x) = Γ(ε_{x,x})[y, y]``."""

    diag = np.real(np.diagonal(ch.choi)).reshape(ch.d_in, ch.d_out)
    return ClassicalChannel(ch.in_sets, ch.out_sets, diag.T)


def fits_classical(n: ClassicalChannel, edges: Iterable[tuple[int, int]]) -> bool:
    """Whether ``supp(𝒩)`` lies inside the edge set."""

    return n.support() <= frozenset(edges)


# channel algebra ---------------------------------------------------------


def _kraus_list(ch: Channel, tol: float | None) -> Sequence[np.ndarray]:
    return ch.kraus if ch.kraus is not None else kraus_of(ch, tol)


def compose(outer: Channel, inner: Channel, tol: float | None = None) -> Channel:
    """``outer ∘ inner``."""

    if inner.out_sets != outer.in_sets:
        raise DimensionMismatchError(f"cannot compose {outer!r} after {inner!r}")
    ops = [b @ a for b in _kraus_list(outer, tol) for a in _kraus_list(inner, tol)]
    return Channel.assume_valid(inner.in_sets, outer.out_sets, kraus=ops)


def tensor(left: Channel, right: Channel, tol: float | None = None) -> Channel:
    """``Φ ⊗ Ψ`` acting on ``M_{in_Φ in_Ψ}``."""

    ops = [np.kron(a, b) for a in _kraus_list(left, tol) for b in _kraus_list(right, tol)]
    return Channel.assume_valid(left.in_sets + right.in_sets, left.out_sets + right.out_sets, kraus=ops)


def identity_channel(sets: Sequence[IndexSet]) -> Channel:
    d = _dim(sets)
    return Channel.assume_valid(sets, sets, kraus=[np.eye(d)])


def unitary_channel(u: np.ndarray, in_sets: Sequence[IndexSet], out_sets: Sequence[IndexSet]) -> Channel:
    return Channel.from_kraus([u], in_sets, out_sets)


def depolarizing_channel(in_sets: Sequence[IndexSet], out_sets: Sequence[IndexSet] | None = None) -> Channel:
    """``T ↦ Tr(T)·I/d_out``."""

    out_sets = tuple(in_sets) if out_sets is None else tuple(out_sets)
    d_in, d_out = _dim(in_sets), _dim(out_sets)
    choi = np.eye(d_in * d_out, dtype=complex) / d_out
    return Channel.assume_valid(in_sets, out_sets, choi=choi)


def kraus_rank(ch: Channel, tol: float | None = None) -> int:
    return len(kraus_of(ch, tol))


def orthonormal_kraus_count(ch: Channel, tol: float | None = None) -> int:
    """Dimension of the span of the supplied Kraus list."""

    ops = _kraus_list(ch, tol)
    cols = np.column_stack([np.asarray(a).reshape(-1) for a in ops])
    return orthonormal_columns(cols, tol).shape[1]
