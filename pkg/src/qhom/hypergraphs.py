"""Quantum and classical hypergraphs, arrow spaces and the fits relation."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .channels import Channel, kraus_of, twisted_choi
from .errors import LegMismatchError
from .settings import resolve_tol
from .subspaces import OperatorSubspace, Subspace
from .tensors import (
    ComplexTensor,
    IndexSet,
    Leg,
    barred,
    conjugate,
    hermitian_eig,
    legs_dim,
    slice_map,
    unbarred,
)


@dataclass(frozen=True, eq=False)
class QuantumHypergraph:
    """A subspace of ``ℂ̄^X ⊗ ℂ^Y`` (or of its conjugate, on the source side).

    Arrow spaces are quantum hypergraphs over four legs; they are kept in
    the pre-shuffle order ``(X₁, Ȳ₁, X̄₂, Y₂)`` and :meth:`shuffled` gives the
    ``(X̄₂, Ȳ₁, X₁, Y₂)`` view consumed by :func:`fits`.
    """

    subspace: Subspace

    @classmethod
    def from_vectors(
        cls, vectors: Iterable[ComplexTensor | np.ndarray], legs: Sequence[Leg], tol: float | None = None
    ) -> "QuantumHypergraph":
        return cls(Subspace.orthonormalize(vectors, legs, tol))

    @property
    def legs(self) -> tuple[Leg, ...]:
        return self.subspace.ambient_legs

    @property
    def signature(self) -> tuple[bool, ...]:
        return tuple(leg.barred for leg in self.legs)

    @property
    def rank(self) -> int:
        return self.subspace.rank

    def conjugate(self) -> "QuantumHypergraph":
        return QuantumHypergraph(self.subspace.conjugate())

    def complement(self) -> "QuantumHypergraph":
        return QuantumHypergraph(self.subspace.complement())

    def tilde(self) -> OperatorSubspace:
        """``Ũ = θ(U)`` for a hypergraph over ``(X̄, Y)``."""

        n_dom = next((i for i, b in enumerate(self.signature) if not b), len(self.legs))
        return OperatorSubspace.from_subspace(self.subspace, n_dom)

    def shuffled(self) -> "QuantumHypergraph":
        if self.signature != (False, True, True, False):
            raise LegMismatchError(f"shuffle needs legs (X₁, Ȳ₁, X̄₂, Y₂), got {self.legs}")
        return QuantumHypergraph(self.subspace.permute((2, 1, 0, 3)))

    def contains(self, v: ComplexTensor | np.ndarray, tol: float | None = None, atol: float = 0.0) -> bool:
        return self.subspace.contains(v, tol, atol)

    def equals(self, other: "QuantumHypergraph", tol: float | None = None) -> bool:
        return self.subspace.equals(other.subspace, tol)

    def __repr__(self) -> str:
        return f"QuantumHypergraph({self.subspace!r})"


@dataclass(frozen=True)
class ClassicalHypergraph:
    """Edge set ``E ⊆ X × Y`` over (possibly composite) index sets.

    Edges are pairs of row-major flattened indices into ``x_sets`` and ``y_sets``.
    """

    x_sets: tuple[IndexSet, ...]
    y_sets: tuple[IndexSet, ...]
    edges: frozenset[tuple[int, int]]

    def __post_init__(self) -> None:
        object.__setattr__(self, "x_sets", tuple(self.x_sets))
        object.__setattr__(self, "y_sets", tuple(self.y_sets))
        edges = frozenset((int(x), int(y)) for x, y in self.edges)
        for x, y in edges:
            if not (0 <= x < self.x_size and 0 <= y < self.y_size):
                raise LegMismatchError(f"edge {(x, y)} outside {self.x_size}x{self.y_size}")
        object.__setattr__(self, "edges", edges)

    @classmethod
    def simple(cls, x: IndexSet, y: IndexSet, edges: Iterable[tuple[int, int]]) -> "ClassicalHypergraph":
        return cls((x,), (y,), frozenset(edges))

    @classmethod
    def diagonal(cls, z: IndexSet, name: str | None = None) -> "ClassicalHypergraph":
        """``Δ_Z = {(z, z)}`` between ``Z`` and a copy named ``name``."""

        other = IndexSet(name or z.name, z.size)
        return cls.simple(z, other, ((i, i) for i in range(z.size)))

    @property
    def x_size(self) -> int:
        return legs_dim(unbarred(*self.x_sets))

    @property
    def y_size(self) -> int:
        return legs_dim(unbarred(*self.y_sets))

    @property
    def full(self) -> bool:
        """Every ``x`` lies on some edge."""

        return {x for x, _ in self.edges} == set(range(self.x_size))

    def hyperedges(self) -> dict[int, frozenset[int]]:
        """``E_y = {x : (x, y) ∈ E}``."""

        return {
            y: frozenset(x for x, yy in self.edges if yy == y) for y in range(self.y_size)
        }

    def complement(self) -> "ClassicalHypergraph":
        every = itertools.product(range(self.x_size), range(self.y_size))
        return ClassicalHypergraph(self.x_sets, self.y_sets, frozenset(every) - self.edges)


def _elementary_span(legs: tuple[Leg, ...], y_size: int, edges: Iterable[tuple[int, int]]) -> Subspace:
    cols = np.zeros((legs_dim(legs), 0))
    idx = [x * y_size + y for x, y in sorted(edges)]
    if idx:
        cols = np.eye(legs_dim(legs))[:, idx]
    return Subspace(legs, cols)


def embed_classical(e: ClassicalHypergraph) -> QuantumHypergraph:
    """``U_E = span{ē_x ⊗ e_y : (x, y) ∈ E}``."""

    legs = barred(*e.x_sets) + unbarred(*e.y_sets)
    return QuantumHypergraph(_elementary_span(legs, e.y_size, e.edges))


def is_classical(
    u: QuantumHypergraph, tol: float | None = None, n_x: int | None = None
) -> tuple[bool, ClassicalHypergraph | None]:
    """Recover the coordinate support of ``u`` and test whether it spans ``u``.

    The first ``n_x`` legs form the ``X`` side; by default these are the
    leading legs sharing the first leg's bar flag.
    """

    tol = resolve_tol(tol)
    legs = u.legs
    if n_x is None:
        n_x = next((i for i, leg in enumerate(legs) if leg.barred != legs[0].barred), 1)
    x_legs, y_legs = legs[:n_x], legs[n_x:]
    y_size = legs_dim(y_legs)
    mask = np.any(np.abs(u.subspace.columns) > tol, axis=1)
    edges = frozenset(divmod(int(i), y_size) for i in np.flatnonzero(mask))
    recovered = ClassicalHypergraph(
        tuple(leg.index_set for leg in x_legs), tuple(leg.index_set for leg in y_legs), edges
    )
    rebuilt = _elementary_span(legs, y_size, edges)
    if rebuilt.rank != u.rank:
        return False, None
    return True, recovered


# arrows -----------------------------------------------------------------


def _check_arrow_legs(u1: QuantumHypergraph, u2: QuantumHypergraph) -> None:
    if u1.signature != (False, True):
        raise LegMismatchError(f"source hypergraph must have legs (X₁, Ȳ₁), got {u1.legs}")
    if u2.signature != (True, False):
        raise LegMismatchError(f"target hypergraph must have legs (X̄₂, Y₂), got {u2.legs}")


def arrow_forward(u1: QuantumHypergraph, u2: QuantumHypergraph) -> QuantumHypergraph:
    """``U₁ ⇒ U₂ = (U₁ ⊗ U₂) + (U₁^⊥ ⊗ (ℂ̄^{X₂} ⊗ ℂ^{Y₂}))``."""

    _check_arrow_legs(u1, u2)
    s1, s2 = u1.subspace, u2.subspace
    whole = Subspace.full(s2.ambient_legs)
    return QuantumHypergraph(s1.tensor(s2).direct_sum(s1.complement().tensor(whole)))


def arrow_iff(u1: QuantumHypergraph, u2: QuantumHypergraph) -> QuantumHypergraph:
    """``U₁ ⇔ U₂ = (U₁ ⊗ U₂) + (U₁^⊥ ⊗ U₂^⊥)``."""

    _check_arrow_legs(u1, u2)
    s1, s2 = u1.subspace, u2.subspace
    return QuantumHypergraph(s1.tensor(s2).direct_sum(s1.complement().tensor(s2.complement())))


def classical_arrow(e1: ClassicalHypergraph, e2: ClassicalHypergraph, iff: bool = False) -> ClassicalHypergraph:
    """Edges ``((x₂, y₁), (x₁, y₂))`` with ``(x₁, y₁) ∈ E₁ ⇒ (x₂, y₂) ∈ E₂`` (or ``⇔``)."""

    nx1, ny1 = e1.x_size, e1.y_size
    nx2, ny2 = e2.x_size, e2.y_size
    edges = set()
    for x2, y1, x1, y2 in itertools.product(range(nx2), range(ny1), range(nx1), range(ny2)):
        src = (x1, y1) in e1.edges
        dst = (x2, y2) in e2.edges
        if (src == dst) if iff else (not src or dst):
            edges.add((x2 * ny1 + y1, x1 * ny2 + y2))
    return ClassicalHypergraph(e2.x_sets + e1.y_sets, e1.x_sets + e2.y_sets, frozenset(edges))


def classical_loc_homomorphism(
    e1: ClassicalHypergraph, e2: ClassicalHypergraph, iff: bool = False
) -> tuple[tuple[int, ...], tuple[int, ...]] | None:
    """Search deterministic maps ``f: X₂ → X₁`` and ``g: Y₁ → Y₂`` whose pair fits the classical arrow.

    Local correlations are mixtures of deterministic ones, so a fitting
    pair exists exactly when a fitting local correlation does.
    """

    nx1, ny1 = e1.x_size, e1.y_size
    nx2, ny2 = e2.x_size, e2.y_size
    for f in itertools.product(range(nx1), repeat=nx2):
        for g in itertools.product(range(ny2), repeat=ny1):
            ok = True
            for x2 in range(nx2):
                for y1 in range(ny1):
                    src = (f[x2], y1) in e1.edges
                    dst = (x2, g[y1]) in e2.edges
                    if (src != dst) if iff else (src and not dst):
                        ok = False
                        break
                if not ok:
                    break
            if ok:
                return f, g
    return None


# fits -------------------------------------------------------------------


def _weighted_range(ch: Channel, tol: float) -> tuple[np.ndarray, float]:
    w, v = hermitian_eig(ch.choi, tol)
    top = float(np.max(np.abs(w))) if w.size else 0.0
    keep = w > tol * top
    return v[:, keep] * np.sqrt(w[keep]), np.sqrt(top)


def operator_fit_residual(ch: Channel, space: OperatorSubspace, tol: float | None = None) -> float:
    """Largest distance of a Kraus operator of ``ch`` from ``space``, over ``√λ_max(J)``.

    Supplied Kraus lists are used as given; otherwise they are read off the
    Choi spectrum.
    """

    tol = resolve_tol(tol)
    if space.shape != (ch.d_out, ch.d_in):
        raise LegMismatchError(f"{space!r} does not hold Kraus operators of {ch!r}")
    ops = ch.kraus if ch.kraus is not None else kraus_of(ch, tol)
    top = np.sqrt(max(float(np.linalg.eigvalsh(ch.choi)[-1]), 0.0))
    if top == 0.0:
        return 0.0
    return float(max((space.residual(a) for a in ops), default=0.0) / top)


def fit_residual(ch: Channel, k: QuantumHypergraph, method: str = "range", tol: float | None = None) -> float:
    """Largest distance from ``K`` of a weighted range vector ``√λ v`` of ``C̃_Γ``, over ``√λ_max``.

    ``method="range"`` uses the eigenvectors of the twisted Choi matrix,
    ``method="kraus"`` the Kraus operators against ``K̃``.
    """

    tol = resolve_tol(tol)
    expected = twisted_choi(ch).row_legs
    if k.legs != expected:
        raise LegMismatchError(f"hypergraph legs {k.legs} do not match twisted Choi legs {expected}")
    if method == "range":
        zetas, top = _weighted_range(ch, tol)
        residuals = [k.subspace.residual(zetas[:, i]) for i in range(zetas.shape[1])]
    elif method == "kraus":
        return operator_fit_residual(ch, OperatorSubspace.from_subspace(k.subspace, len(ch.in_sets)), tol)
    else:
        raise ValueError(f"unknown fits method {method!r}")
    if top == 0.0:
        return 0.0
    return float(max(residuals, default=0.0) / top)


def fits(ch: Channel, k: QuantumHypergraph, tol: float | None = None, method: str = "range") -> bool:
    """Whether ``Γ`` fits ``K``: the range of ``C̃_Γ`` lies in ``K``."""

    tol = resolve_tol(tol)
    return fit_residual(ch, k, method, tol) <= tol


@dataclass(frozen=True)
class SliceReport:
    forward: bool
    iff: bool
    in_forward_arrow: bool
    in_iff_arrow: bool


def slice_membership_check(
    zeta: ComplexTensor, u1: QuantumHypergraph, u2: QuantumHypergraph, tol: float | None = None
) -> SliceReport:
    """Slice test for membership of ``ζ`` in ``U₁ ⇒ U₂`` and ``U₁ ⇔ U₂``."""

    tol = resolve_tol(tol)
    _check_arrow_legs(u1, u2)
    if zeta.legs != u1.legs + u2.legs:
        raise LegMismatchError(f"ζ legs {zeta.legs} do not match {u1.legs + u2.legs}")
    atol = tol * zeta.norm()
    forward = all(
        u2.contains(slice_map(conjugate(b), zeta, (0, 1)), tol, atol) for b in u1.subspace.basis
    )
    backward = all(
        u1.contains(slice_map(conjugate(b), zeta, (2, 3)), tol, atol) for b in u2.subspace.basis
    )
    return SliceReport(
        forward=forward,
        iff=forward and backward,
        in_forward_arrow=arrow_forward(u1, u2).contains(zeta, tol),
        in_iff_arrow=arrow_iff(u1, u2).contains(zeta, tol),
    )
