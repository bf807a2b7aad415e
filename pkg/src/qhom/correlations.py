"""Quantum no-signalling correlations, their type witnesses, composition and simulation.

Choi entries of a correlation over the quad ``(X, Y, A, B)`` are handled as an
eight-axis array ``C[x, x', y, y', a, a', b, b'] = Γ(aa', bb' | xx', yy')``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from . import channels
from .channels import Channel, ClassicalChannel, gamma_of_classical
from .errors import DimensionMismatchError, NotNoSignallingError, QuadMismatchError, WitnessError
from .settings import resolve_tol
from .tensors import IndexSet, min_eigenvalue, op_norm

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Quad:
    """Input and output sets ``(X, Y, A, B)`` of a bipartite channel ``M_XY → M_AB``."""

    x: IndexSet
    y: IndexSet
    a: IndexSet
    b: IndexSet

    @property
    def in_sets(self) -> tuple[IndexSet, IndexSet]:
        return (self.x, self.y)

    @property
    def out_sets(self) -> tuple[IndexSet, IndexSet]:
        return (self.a, self.b)

    @property
    def sizes(self) -> tuple[int, int, int, int]:
        return (self.x.size, self.y.size, self.a.size, self.b.size)

    def matches(self, ch: Channel) -> bool:
        return ch.in_sets == self.in_sets and ch.out_sets == self.out_sets

    def require(self, ch: Channel) -> None:
        if not self.matches(ch):
            raise DimensionMismatchError(f"{ch!r} does not match quad {self}")

    def __str__(self) -> str:
        return f"({self.x}, {self.y}, {self.a}, {self.b})"


def choi_entries(ch: Channel, quad: Quad) -> np.ndarray:
    quad.require(ch)
    nx, ny, na, nb = quad.sizes
    j8 = ch.choi.reshape(nx, ny, na, nb, nx, ny, na, nb)
    return j8.transpose(0, 4, 1, 5, 2, 6, 3, 7)


def choi_from_entries(c: np.ndarray) -> np.ndarray:
    nx, ny, na, nb = c.shape[0], c.shape[2], c.shape[4], c.shape[6]
    n = nx * ny * na * nb
    return c.transpose(0, 2, 4, 6, 1, 3, 5, 7).reshape(n, n)


# verification ----------------------------------------------------------


@dataclass(frozen=True)
class QnsReport:
    """Outcome of :func:`verify_qns` with one residual per condition."""

    is_qns: bool
    residuals: dict[str, float]
    checks: dict[str, bool] = field(default_factory=dict)

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values())

    @property
    def failed(self) -> tuple[str, ...]:
        return tuple(k for k, ok in self.checks.items() if not ok)


def _signalling_residuals(c: np.ndarray) -> tuple[float, float]:
    nx, ny = c.shape[0], c.shape[2]
    # Σ_a Γ(aa, bb'|xx', yy') = δ_{xx'} c(yy', bb')
    t = np.einsum("pqijaauv->pqijuv", c)
    diag_x = np.einsum("ppijuv->pijuv", t).mean(axis=0)
    expect_b = np.einsum("pq,ijuv->pqijuv", np.eye(nx), diag_x)
    # Σ_b Γ(aa', bb|xx', yy') = δ_{yy'} d(xx', aa')
    s = np.einsum("pqijrsuu->pqijrs", c)
    diag_y = np.einsum("pqiirs->ipqrs", s).mean(axis=0)
    expect_c = np.einsum("ij,pqrs->pqijrs", np.eye(ny), diag_y)
    return float(np.max(np.abs(t - expect_b))), float(np.max(np.abs(s - expect_c)))


def verify_qns(ch: Channel, quad: Quad, tol: float | None = None) -> QnsReport:
    """Check complete positivity, trace preservation and both no-signalling conditions."""

    tol = resolve_tol(tol)
    c = choi_entries(ch, quad)
    scale = max(1.0, op_norm(ch.choi))
    res_b, res_c = _signalling_residuals(c)
    residuals = {
        "cp": ch.cp_residual(),
        "tp": ch.tp_residual(),
        "b": res_b,
        "c": res_c,
    }
    checks = {
        "cp": residuals["cp"] <= tol,
        "tp": residuals["tp"] <= tol * scale,
        "b": res_b <= tol * scale,
        "c": res_c <= tol * scale,
    }
    return QnsReport(all(checks.values()), residuals, checks)


# witnesses -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LocTerm:
    weight: float
    phi: Channel
    psi: Channel


@dataclass(frozen=True, eq=False)
class LocWitness:
    """Convex combination ``Σ λᵢ Φᵢ ⊗ Ψᵢ``."""

    terms: tuple[LocTerm, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "terms", tuple(self.terms))

    @classmethod
    def single(cls, phi: Channel, psi: Channel) -> "LocWitness":
        return cls((LocTerm(1.0, phi, psi),))

    def validate(self, quad: Quad, tol: float | None = None) -> None:
        tol = resolve_tol(tol)
        if not self.terms:
            raise WitnessError("local witness needs at least one term")
        weights = np.array([t.weight for t in self.terms], dtype=float)
        if np.any(weights < -tol) or abs(weights.sum() - 1.0) > tol * len(weights):
            raise WitnessError("local witness weights must be non-negative and sum to 1")
        for t in self.terms:
            if t.phi.in_sets != (quad.x,) or t.phi.out_sets != (quad.a,):
                raise WitnessError(f"{t.phi!r} does not act M_{quad.x.name} -> M_{quad.a.name}")
            if t.psi.in_sets != (quad.y,) or t.psi.out_sets != (quad.b,):
                raise WitnessError(f"{t.psi!r} does not act M_{quad.y.name} -> M_{quad.b.name}")
            try:
                t.phi.validate(tol)
                t.psi.validate(tol)
            except Exception as exc:
                raise WitnessError(f"local witness channel invalid: {exc}") from exc

    def choi(self) -> np.ndarray:
        return sum(t.weight * channels.tensor(t.phi, t.psi).choi for t in self.terms)


@dataclass(frozen=True, eq=False)
class StochasticOperatorMatrix:
    """Positive block matrix ``E ∈ M_{XA}(B(H))`` with ``Tr_A E = I_X ⊗ I_H``.

    ``blocks`` has shape ``(X, A, H, X, A, H)``; the block
    ``E_{x,x',a,a'}`` is ``blocks[x, a, :, x', a', :]``.
    """

    in_set: IndexSet
    out_set: IndexSet
    h_dim: int
    blocks: np.ndarray

    def __post_init__(self) -> None:
        nx, na, h = self.in_set.size, self.out_set.size, self.h_dim
        arr = np.array(self.blocks, dtype=complex).reshape(nx, na, h, nx, na, h)
        arr.flags.writeable = False
        object.__setattr__(self, "blocks", arr)

    @classmethod
    def create(
        cls,
        in_set: IndexSet,
        out_set: IndexSet,
        h_dim: int,
        blocks: np.ndarray,
        tol: float | None = None,
    ) -> "StochasticOperatorMatrix":
        som = cls(in_set, out_set, h_dim, blocks)
        som.validate(tol)
        return som

    @classmethod
    def from_isometry(
        cls, v: np.ndarray, in_set: IndexSet, out_set: IndexSet, h_dim: int
    ) -> "StochasticOperatorMatrix":
        """``E_{x,x',a,a'} = V_{a,x}* V_{a',x'}`` for an isometry ``V: ℂ^X ⊗ H → ℂ^A ⊗ K``."""

        nx, na = in_set.size, out_set.size
        k = v.shape[0] // na
        v4 = np.asarray(v, dtype=complex).reshape(na, k, nx, h_dim)
        blocks = np.einsum("akxh,bkyg->xahybg", v4.conj(), v4)
        return cls(in_set, out_set, h_dim, blocks)

    @classmethod
    def classical(cls, n: np.ndarray, in_set: IndexSet, out_set: IndexSet) -> "StochasticOperatorMatrix":
        """Scalar blocks ``δ_{xx'} δ_{aa'} 𝒩(a|x)`` of a stochastic matrix ``n[a, x]``."""

        nx, na = in_set.size, out_set.size
        blocks = np.zeros((nx, na, 1, nx, na, 1), dtype=complex)
        for x in range(nx):
            for a in range(na):
                blocks[x, a, 0, x, a, 0] = n[a, x]
        return cls(in_set, out_set, 1, blocks)

    def matrix(self) -> np.ndarray:
        n = self.in_set.size * self.out_set.size * self.h_dim
        return self.blocks.reshape(n, n)

    def block(self, x: int, xp: int, a: int, ap: int) -> np.ndarray:
        return self.blocks[x, a, :, xp, ap, :]

    def indexed_blocks(self) -> np.ndarray:
        """Blocks as ``(X·X·A·A, H, H)`` ordered by ``(x, x', a, a')``."""

        nx, na, h = self.in_set.size, self.out_set.size, self.h_dim
        return self.blocks.transpose(0, 3, 1, 4, 2, 5).reshape(nx * nx * na * na, h, h)

    def trace_out(self) -> np.ndarray:
        """``Tr_A E`` as a matrix on ``X ⊗ H``."""

        nx, h = self.in_set.size, self.h_dim
        return np.einsum("xahyag->xhyg", self.blocks).reshape(nx * h, nx * h)

    def validate(self, tol: float | None = None) -> None:
        tol = resolve_tol(tol)
        mat = self.matrix()
        scale = max(1.0, op_norm(mat))
        if np.linalg.norm(mat - mat.conj().T) > tol * scale * mat.shape[0]:
            raise WitnessError("stochastic operator matrix is not Hermitian")
        if min_eigenvalue(mat) < -tol * scale:
            raise WitnessError("stochastic operator matrix is not positive")
        defect = np.max(np.abs(self.trace_out() - np.eye(self.in_set.size * self.h_dim)))
        if defect > tol * scale:
            raise WitnessError(f"Tr_A E differs from the identity by {defect:.3e}")

    def embed(self, dim: int, position: str) -> "StochasticOperatorMatrix":
        """``E ⊗ I`` (``position="left"``) or ``I ⊗ E`` (``"right"``) on a larger ancilla."""

        eye = np.eye(dim)
        if position == "left":
            big = np.einsum("xahXAg,kl->xahkXAgl", self.blocks, eye)
        elif position == "right":
            big = np.einsum("kl,xahXAg->xakhXAlg", eye, self.blocks)
        else:
            raise ValueError(f"unknown position {position!r}")
        return StochasticOperatorMatrix(self.in_set, self.out_set, self.h_dim * dim, big)


def _unit_state(xi: np.ndarray, dim: int, tol: float) -> np.ndarray:
    xi = np.asarray(xi, dtype=complex).reshape(-1)
    if xi.size != dim:
        raise WitnessError(f"state has dimension {xi.size}, expected {dim}")
    if abs(np.linalg.norm(xi) - 1.0) > tol * 10:
        raise WitnessError("state vector must have unit norm")
    return xi


@dataclass(frozen=True, eq=False)
class CommutingPairWitness:
    """Mutually commuting ``E`` (Alice) and ``F`` (Bob) on a shared ancilla with state ``ξ``."""

    e: StochasticOperatorMatrix
    f: StochasticOperatorMatrix
    xi: np.ndarray

    def validate(self, quad: Quad, tol: float | None = None) -> None:
        tol = resolve_tol(tol)
        _check_som_quad(self.e, self.f, quad)
        if self.e.h_dim != self.f.h_dim:
            raise WitnessError("commuting witness blocks must share one ancilla")
        _unit_state(self.xi, self.e.h_dim, tol)
        self.e.validate(tol)
        self.f.validate(tol)
        eb, fb = self.e.indexed_blocks(), self.f.indexed_blocks()
        scale = max(op_norm(self.e.matrix()), 1e-300) * max(op_norm(self.f.matrix()), 1e-300)
        ef = np.einsum("ihk,jkl->ijhl", eb, fb)
        fe = np.einsum("jhk,ikl->ijhl", fb, eb)
        worst = float(np.max(np.abs(ef - fe))) if ef.size else 0.0
        if worst > tol * scale:
            raise WitnessError(f"blocks of E and F do not commute (defect {worst:.3e})")

    def choi(self) -> np.ndarray:
        xi = np.asarray(self.xi, dtype=complex).reshape(-1)
        xi_e = np.einsum("h,xahXAk->xaXAk", xi.conj(), self.e.blocks)
        f_xi = np.einsum("ybgYBl,l->ybYBg", self.f.blocks, xi)
        j8 = np.einsum("iakbh,jcldh->ijacklbd", xi_e, f_xi)
        n = int(np.sqrt(j8.size))
        return j8.reshape(n, n)


@dataclass(frozen=True, eq=False)
class TensorPairWitness:
    """``E`` on ``H_A``, ``F`` on ``H_B`` and a state ``ξ ∈ H_A ⊗ H_B``."""

    e: StochasticOperatorMatrix
    f: StochasticOperatorMatrix
    xi: np.ndarray

    def validate(self, quad: Quad, tol: float | None = None) -> None:
        tol = resolve_tol(tol)
        _check_som_quad(self.e, self.f, quad)
        _unit_state(self.xi, self.e.h_dim * self.f.h_dim, tol)
        self.e.validate(tol)
        self.f.validate(tol)

    def choi(self) -> np.ndarray:
        xi = np.asarray(self.xi, dtype=complex).reshape(self.e.h_dim, self.f.h_dim)
        t1 = np.einsum("hg,xahXAk->xaXAgk", xi.conj(), self.e.blocks)
        j8 = np.einsum("iakbgm,jcgldn,mn->ijacklbd", t1, self.f.blocks, xi)
        n = int(np.sqrt(j8.size))
        return j8.reshape(n, n)

    def as_commuting(self) -> CommutingPairWitness:
        e = self.e.embed(self.f.h_dim, "left")
        f = self.f.embed(self.e.h_dim, "right")
        return CommutingPairWitness(e, f, np.asarray(self.xi, dtype=complex).reshape(-1))


Witness = Union[LocWitness, TensorPairWitness, CommutingPairWitness]


def _check_som_quad(e: StochasticOperatorMatrix, f: StochasticOperatorMatrix, quad: Quad) -> None:
    if (e.in_set, e.out_set) != (quad.x, quad.a) or (f.in_set, f.out_set) != (quad.y, quad.b):
        raise WitnessError(f"witness index sets do not match quad {quad}")


def witness_kind(w: Witness | None) -> str | None:
    if w is None:
        return None
    return {LocWitness: "loc", TensorPairWitness: "q", CommutingPairWitness: "qc"}[type(w)]


def witness_choi(w: Witness) -> np.ndarray:
    return w.choi()


# correlations ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class QnsCorrelation:
    """A verified no-signalling channel ``M_XY → M_AB`` with an optional type witness."""

    channel: Channel
    quad: Quad
    witness: Witness | None = None
    tag: str | None = None

    @classmethod
    def create(
        cls,
        channel: Channel,
        quad: Quad,
        witness: Witness | None = None,
        tol: float | None = None,
    ) -> "QnsCorrelation":
        tol = resolve_tol(tol)
        report = verify_qns(channel, quad, tol)
        if not report.is_qns:
            raise NotNoSignallingError(
                f"channel fails conditions {', '.join(report.failed)}", report.residuals
            )
        if witness is not None:
            witness.validate(quad, tol)
            defect = float(np.max(np.abs(witness.choi() - channel.choi)))
            if defect > tol * max(1.0, op_norm(channel.choi)):
                raise WitnessError(f"witness reproduces a different channel (defect {defect:.3e})")
        return cls(channel, quad, witness)

    @classmethod
    def tagged_qa(cls, sequence: Sequence["QnsCorrelation"]) -> "QnsCorrelation":
        """Record the last element of a sequence of quantum correlations as a ``qa`` limit point."""

        if not sequence:
            raise WitnessError("qa bookkeeping needs a non-empty sequence")
        last = sequence[-1]
        quads = {c.quad for c in sequence}
        if len(quads) != 1:
            raise QuadMismatchError("sequence elements act on different quads")
        return cls(last.channel, last.quad, None, "qa")

    @property
    def kind(self) -> str:
        return witness_kind(self.witness) or "ns"

    def entries(self) -> np.ndarray:
        return choi_entries(self.channel, self.quad)


def _from_witness(w: Witness, quad: Quad, tol: float | None) -> QnsCorrelation:
    tol = resolve_tol(tol)
    w.validate(quad, tol)
    ch = Channel.from_choi(w.choi(), quad.in_sets, quad.out_sets, tol)
    return QnsCorrelation.create(ch, quad, w, tol)


def from_loc(w: LocWitness, quad: Quad | None = None, tol: float | None = None) -> QnsCorrelation:
    if quad is None:
        t = w.terms[0]
        quad = Quad(t.phi.in_sets[0], t.psi.in_sets[0], t.phi.out_sets[0], t.psi.out_sets[0])
    return _from_witness(w, quad, tol)


def from_tensor_pair(w: TensorPairWitness, quad: Quad, tol: float | None = None) -> QnsCorrelation:
    return _from_witness(w, quad, tol)


def from_commuting_pair(w: CommutingPairWitness, quad: Quad, tol: float | None = None) -> QnsCorrelation:
    return _from_witness(w, quad, tol)


def from_classical(n: ClassicalChannel, quad: Quad, tol: float | None = None) -> QnsCorrelation:
    return QnsCorrelation.create(gamma_of_classical(n), quad, tol=tol)


def classical_ns(n: ClassicalChannel, quad: Quad, tol: float | None = None) -> bool:
    """Whether ``Γ_𝒩`` is a no-signalling correlation."""

    return verify_qns(gamma_of_classical(n), quad, tol).is_qns


def classical_marginals(n: ClassicalChannel, quad: Quad) -> tuple[np.ndarray, np.ndarray]:
    """Marginals ``p(a|x, y)`` and ``p(b|x, y)`` of a classical box, indexed ``[a, x, y]`` and ``[b, x, y]``."""

    nx, ny, na, nb = quad.sizes
    if n.matrix.shape != (na * nb, nx * ny):
        raise QuadMismatchError(f"box of shape {n.matrix.shape} does not match quad {quad}")
    p = n.matrix.reshape(na, nb, nx, ny)
    return p.sum(axis=1), p.sum(axis=0)


# composition -----------------------------------------------------------


def compose_som(
    e: StochasticOperatorMatrix, f: StochasticOperatorMatrix, twisted: bool = False
) -> StochasticOperatorMatrix:
    """Composition of ``E`` over ``(X, Y)`` with ``F`` over ``(Y, Z)``.

    Plain: ``G = Σ_{y,y'} F_{y,y',z,z'} ⊗ E_{x,x',y,y'}`` on ``K ⊗ H``.
    Twisted: ``Σ E ⊗ F`` on ``H ⊗ K``.
    """

    if e.out_set != f.in_set:
        raise DimensionMismatchError(
            f"cannot compose over {e.out_set} and {f.in_set}: middle sets differ"
        )
    nx, nz = e.in_set.size, f.out_set.size
    h = e.h_dim * f.h_dim
    if twisted:
        g = np.einsum("xyhuwm,yzkwvl->xzhkuvml", e.blocks, f.blocks)
    else:
        g = np.einsum("yzkwvl,xyhuwm->xzkhuvlm", f.blocks, e.blocks)
    return StochasticOperatorMatrix(e.in_set, f.out_set, h, g.reshape(nx, nz, h, nx, nz, h))


def _compose_witnesses(w2: Witness | None, w1: Witness | None, tol: float) -> Witness | None:
    if w1 is None or w2 is None:
        return None
    if isinstance(w1, LocWitness) and isinstance(w2, LocWitness):
        terms = tuple(
            LocTerm(
                t1.weight * t2.weight,
                channels.compose(t1.phi, t2.phi, tol),
                channels.compose(t2.psi, t1.psi, tol),
            )
            for t1 in w1.terms
            for t2 in w2.terms
        )
        return LocWitness(terms)
    if isinstance(w1, LocWitness) or isinstance(w2, LocWitness):
        log.info("mixed local and operator witnesses; composed correlation carries no witness")
        return None
    e = compose_som(w2.e, w1.e, twisted=False)
    f = compose_som(w1.f, w2.f, twisted=True)
    if isinstance(w1, TensorPairWitness) and isinstance(w2, TensorPairWitness):
        x1 = np.asarray(w1.xi).reshape(w1.e.h_dim, w1.f.h_dim)
        x2 = np.asarray(w2.xi).reshape(w2.e.h_dim, w2.f.h_dim)
        xi = np.einsum("ac,bd->abcd", x1, x2).reshape(-1)
        return TensorPairWitness(e, f, xi)
    c1 = w1.as_commuting() if isinstance(w1, TensorPairWitness) else w1
    c2 = w2.as_commuting() if isinstance(w2, TensorPairWitness) else w2
    e = compose_som(c2.e, c1.e, twisted=False)
    f = compose_som(c1.f, c2.f, twisted=True)
    return CommutingPairWitness(e, f, np.kron(c1.xi, c2.xi))


def star_compose(g2: QnsCorrelation, g1: QnsCorrelation, tol: float | None = None) -> QnsCorrelation:
    """``Γ₂ ∗ Γ₁`` for ``Γ₁`` over ``(X₂, Y₁, X₁, Y₂)`` and ``Γ₂`` over ``(X₃, Y₂, X₂, Y₃)``."""

    tol = resolve_tol(tol)
    q1, q2 = g1.quad, g2.quad
    if q1.x != q2.a or q1.b != q2.y:
        raise QuadMismatchError(f"interfaces of {q2} and {q1} do not meet")
    for g in (g1, g2):
        report = verify_qns(g.channel, g.quad, tol)
        if not report.is_qns:
            raise NotNoSignallingError("star composition needs no-signalling inputs", report.residuals)
    c1, c2 = g1.entries(), g2.entries()
    c = np.einsum("pqijrsuv,kluvpqmn->klijrsmn", c1, c2)
    quad = Quad(q2.x, q1.y, q1.a, q2.b)
    ch = Channel.from_choi(choi_from_entries(c), quad.in_sets, quad.out_sets, tol)
    witness = _compose_witnesses(g2.witness, g1.witness, tol)
    if witness is not None:
        defect = float(np.max(np.abs(witness.choi() - ch.choi)))
        if defect > tol * max(1.0, op_norm(ch.choi)):
            raise WitnessError(f"composed witness disagrees with the composed channel ({defect:.3e})")
    return QnsCorrelation(ch, quad, witness)


def simulate(corr: QnsCorrelation, ch: Channel, tol: float | None = None) -> Channel:
    """``Γ[ℰ]`` for ``Γ`` over ``(X₂, Y₁, X₁, Y₂)`` and ``ℰ: M_{X₁} → M_{Y₁}``."""

    tol = resolve_tol(tol)
    quad = corr.quad
    if ch.in_sets != (quad.a,) or ch.out_sets != (quad.y,):
        raise DimensionMismatchError(
            f"{ch!r} must act M_{quad.a.name} -> M_{quad.y.name} to be simulated"
        )
    c = corr.entries()
    j = np.einsum("pqijrsuv,risj->puqv", c, ch.choi4())
    n = quad.x.size * quad.b.size
    return Channel.from_choi(j.reshape(n, n), (quad.x,), (quad.b,), tol)


def phi_contract(m: np.ndarray, n: int) -> complex:
    """Linear extension of ``P ⊗ Q ↦ Tr(P Q^t)`` to a matrix on ``ℂ^n ⊗ ℂ^n``."""

    m = np.asarray(m, dtype=complex)
    if m.shape != (n * n, n * n):
        raise DimensionMismatchError(f"expected a {n * n}x{n * n} matrix, got {m.shape}")
    return complex(np.einsum("iijj->", m.reshape(n, n, n, n)))


def phi_apply(m: np.ndarray, n: int, rest: int) -> np.ndarray:
    """``φ ⊗ id`` on a matrix over ``ℂ^n ⊗ ℂ^n ⊗ ℂ^rest``."""

    m = np.asarray(m, dtype=complex)
    side = n * n * rest
    if m.shape != (side, side):
        raise DimensionMismatchError(f"expected a {side}x{side} matrix, got {m.shape}")
    return np.einsum("iiajjb->ab", m.reshape(n, n, rest, n, n, rest))
