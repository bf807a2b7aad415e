"""Verification and decision procedures for quantum hypergraph (quasi-)homomorphisms.

An instance pairs a source hypergraph ``U₁`` over ``(X₁, Ȳ₁)`` with a target
``U₂`` over ``(X̄₂, Y₂)``. Correlations realising the relation act
``M_{X₂Y₁} → M_{X₁Y₂}`` and fit the shuffled arrow space.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from .channels import Channel
from .classical_lp import decide_classical_ns
from .correlations import (
    LocWitness,
    Quad,
    QnsCorrelation,
    from_classical,
    from_loc,
    simulate,
    verify_qns,
    witness_kind,
)
from .errors import DimensionMismatchError, LegMismatchError, QuadMismatchError
from .hypergraphs import (
    QuantumHypergraph,
    arrow_forward,
    arrow_iff,
    fit_residual,
    is_classical,
    operator_fit_residual,
)
from .settings import SolverConfig, resolve_tol
from .solver import FEASIBLE, INFEASIBLE, FeasibilityProblem, solve
from .subspaces import OperatorSubspace
from .tensors import IndexSet, hermitian_eig, min_eigenvalue
from .tro import column_isometry_exists, kernel_cover, tro_check

log = logging.getLogger(__name__)


class Mode(str, enum.Enum):
    QUASI = "quasi"
    HOM = "hom"
    FULL_HOM = "full_hom"

    @property
    def iff(self) -> bool:
        return self is not Mode.QUASI


class CorrelationType(str, enum.Enum):
    LOC = "loc"
    Q = "q"
    QC = "qc"
    NS = "ns"


_TYPE_ORDER = {"loc": 0, "q": 1, "qc": 2}


@dataclass(frozen=True, eq=False)
class HomInstance:
    """Source ``U₁`` over ``(X₁, Ȳ₁)``, target ``U₂`` over ``(X̄₂, Y₂)``, relation and correlation type."""

    u1: QuantumHypergraph
    u2: QuantumHypergraph
    mode: Mode = Mode.QUASI
    ctype: CorrelationType = CorrelationType.NS

    def __post_init__(self) -> None:
        if self.u1.signature != (False, True):
            raise LegMismatchError(f"U₁ must have legs (X₁, Ȳ₁), got {self.u1.legs}")
        if self.u2.signature != (True, False):
            raise LegMismatchError(f"U₂ must have legs (X̄₂, Y₂), got {self.u2.legs}")
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "ctype", CorrelationType(self.ctype))

    @property
    def x1(self) -> IndexSet:
        return self.u1.legs[0].index_set

    @property
    def y1(self) -> IndexSet:
        return self.u1.legs[1].index_set

    @property
    def x2(self) -> IndexSet:
        return self.u2.legs[0].index_set

    @property
    def y2(self) -> IndexSet:
        return self.u2.legs[1].index_set

    @property
    def quad(self) -> Quad:
        return Quad(self.x2, self.y1, self.x1, self.y2)

    def arrow(self) -> QuantumHypergraph:
        """Shuffled ``U₁ → U₂`` (quasi) or ``U₁ ↔ U₂`` (hom, full_hom)."""

        build = arrow_iff if self.mode.iff else arrow_forward
        return build(self.u1, self.u2).shuffled()

    def with_mode(self, mode: Mode) -> "HomInstance":
        return HomInstance(self.u1, self.u2, mode, self.ctype)


# coordinate maps --------------------------------------------------------


def hat_star(u1: QuantumHypergraph) -> OperatorSubspace:
    """``Û₁* ⊆ L(ℂ^{X₁}, ℂ^{Y₁})``: matrices ``M[y₁, x₁] = conj(u[x₁, y₁])``."""

    if u1.signature != (False, True):
        raise LegMismatchError(f"hat_star needs legs (X₁, Ȳ₁), got {u1.legs}")
    x, y = u1.legs[0].index_set, u1.legs[1].index_set
    cols = u1.subspace.columns
    ops = cols.T.conj().reshape(-1, x.size, y.size).transpose(0, 2, 1)
    return OperatorSubspace((x,), (y,), ops)


def tilde(u2: QuantumHypergraph) -> OperatorSubspace:
    """``Ũ₂ = θ(U₂) ⊆ L(ℂ^{X₂}, ℂ^{Y₂})``."""

    return u2.tilde()


def _bracket_shapes(n: np.ndarray, nx1: int, ny1: int) -> tuple[int, int]:
    rows, cols = n.shape
    if rows % nx1 or cols % ny1:
        raise DimensionMismatchError(f"operator of shape {n.shape} cannot act on a {ny1}x{nx1} matrix")
    return rows // nx1, cols // ny1


def n_bracket(n: np.ndarray, m: np.ndarray) -> np.ndarray:
    """``N[M]_{y₂,x₂} = Σ N_{(x₁,y₂),(x₂,y₁)} M_{y₁,x₁}``; ``N = A ⊗ B`` gives ``B M A``."""

    n, m = np.asarray(n, dtype=complex), np.asarray(m, dtype=complex)
    ny1, nx1 = m.shape
    ny2, nx2 = _bracket_shapes(n, nx1, ny1)
    n4 = n.reshape(nx1, ny2, nx2, ny1)
    return np.einsum("auxb,ba->ux", n4, m)


def n_bracket_adjoint(n: np.ndarray, u: np.ndarray) -> np.ndarray:
    """``N*[U]_{y₁,x₁} = Σ conj(N_{(x₁,y₂),(x₂,y₁)}) U_{y₂,x₂}``; ``N = A ⊗ B`` gives ``B* U A*``."""

    n, u = np.asarray(n, dtype=complex), np.asarray(u, dtype=complex)
    ny2, nx2 = u.shape
    rows, cols = n.shape
    if rows % ny2 or cols % nx2:
        raise DimensionMismatchError(f"operator of shape {n.shape} cannot act on a {ny2}x{nx2} matrix")
    nx1, ny1 = rows // ny2, cols // nx2
    n4 = n.reshape(nx1, ny2, nx2, ny1)
    return np.einsum("auxb,ux->ba", n4.conj(), u)


def _weighted_kraus(ch: Channel, tol: float) -> tuple[list[np.ndarray], float]:
    w, v = hermitian_eig(ch.choi, tol)
    top = float(w[-1]) if w.size else 0.0
    ops = [
        np.sqrt(lam) * v[:, i].reshape(ch.d_in, ch.d_out).T
        for i, lam in enumerate(w)
        if lam > tol * top
    ]
    return ops, np.sqrt(max(top, 0.0))


@dataclass(frozen=True)
class BracketReport:
    holds: bool
    residual: float
    offender: str | None = None


def kraus_bracket_check(ch: Channel, inst: HomInstance, tol: float | None = None) -> BracketReport:
    """Kraus-wise test ``N[Û₁*] ⊆ Ũ₂`` and ``N*[Ũ₂] ⊆ Û₁*`` for every Kraus operator ``N``.

    Residuals are divided by ``√λ_max`` of the Choi matrix, as in :func:`qhom.hypergraphs.fit_residual`.
    """

    tol = resolve_tol(tol)
    inst.quad.require(ch)
    src, dst = hat_star(inst.u1), tilde(inst.u2)
    ops, top = _weighted_kraus(ch, tol)
    if top == 0.0:
        return BracketReport(True, 0.0)
    worst, offender = 0.0, None
    for k, n in enumerate(ops):
        for i, m in enumerate(src.operators):
            r = dst.residual(n_bracket(n, m)) / top
            if r > worst:
                worst = r
                offender = f"N{k}[U1 basis {i}] outside tilde(U2)"
        for j, u in enumerate(dst.operators):
            r = src.residual(n_bracket_adjoint(n, u)) / top
            if r > worst:
                worst = r
                offender = f"N{k}*[U2 basis {j}] outside hat_star(U1)"
    holds = worst <= tol
    return BracketReport(holds, worst, None if holds else offender)


# verification ----------------------------------------------------------


@dataclass
class HomReport:
    """Result of :func:`verify_hom`; ``verdict`` is ``pass``, ``fail`` or ``witness-required``."""

    verdict: str
    checks: dict[str, bool] = field(default_factory=dict)
    residuals: dict[str, float] = field(default_factory=dict)
    offender: str | None = None

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"


def _type_check(corr: QnsCorrelation, ctype: CorrelationType) -> bool | None:
    if ctype is CorrelationType.NS:
        return True
    kind = witness_kind(corr.witness)
    if kind is None:
        return None
    return _TYPE_ORDER[kind] <= _TYPE_ORDER[ctype.value]


def verify_hom(corr: QnsCorrelation, inst: HomInstance, tol: float | None = None) -> HomReport:
    """Check that ``corr`` witnesses the instance's relation at its correlation type."""

    tol = resolve_tol(tol)
    if corr.quad != inst.quad:
        raise QuadMismatchError(f"correlation over {corr.quad} does not match instance over {inst.quad}")
    ch = corr.channel
    checks: dict[str, bool] = {}
    residuals: dict[str, float] = {}
    offender = None

    qns = verify_qns(ch, corr.quad, tol)
    checks["ns"] = qns.is_qns
    residuals["ns"] = qns.max_residual
    if not qns.is_qns:
        offender = f"no-signalling conditions {', '.join(qns.failed)}"

    typed = _type_check(corr, inst.ctype)
    if typed is not None:
        checks["type"] = typed
        if not typed and offender is None:
            offender = f"{witness_kind(corr.witness)} witness does not certify type {inst.ctype.value}"

    residuals["fits"] = fit_residual(ch, inst.arrow(), "range", tol)
    checks["fits"] = residuals["fits"] <= tol
    if not checks["fits"] and offender is None:
        offender = "twisted Choi range leaves the arrow space"

    if inst.mode.iff:
        bracket = kraus_bracket_check(ch, inst, tol)
        checks["bracket"] = bracket.holds
        residuals["bracket"] = bracket.residual
        if not bracket.holds and offender is None:
            offender = bracket.offender

    if inst.mode is Mode.FULL_HOM:
        lam = min_eigenvalue(ch.apply(np.eye(ch.d_in)))
        residuals["invertible"] = lam
        checks["invertible"] = lam > tol
        if lam <= tol and offender is None:
            offender = f"Γ(I) has smallest eigenvalue {lam:.3e}"

    if not all(checks.values()):
        verdict = "fail"
    elif typed is None:
        verdict = "witness-required"
    else:
        verdict = "pass"
    log.debug("verify_hom %s/%s: %s %s", inst.mode.value, inst.ctype.value, verdict, residuals)
    return HomReport(verdict, checks, residuals, offender)


@dataclass(frozen=True)
class AffineSimulationReport:
    premise: bool
    conclusion: bool
    complement_premise: bool | None = None
    complement_conclusion: bool | None = None

    @property
    def consistent(self) -> bool:
        ok = not self.premise or self.conclusion
        if self.complement_premise is not None:
            ok = ok and (not self.complement_premise or bool(self.complement_conclusion))
        return ok


def affine_simulation_check(
    corr: QnsCorrelation, inst: HomInstance, ch: Channel, tol: float | None = None
) -> AffineSimulationReport:
    """Simulate ``ℰ: M_{X₁} → M_{Y₁}`` through ``corr`` and compare fits before and after.

    A channel fitting ``Ū₁`` is carried to one fitting ``U₂``; in hom mode a
    channel fitting ``Ū₁^⊥`` is also carried to one fitting ``U₂^⊥``.
    """

    tol = resolve_tol(tol)
    out = simulate(corr, ch, tol)
    premise = bool(operator_fit_residual(ch, hat_star(inst.u1), tol) <= tol)
    conclusion = bool(operator_fit_residual(out, tilde(inst.u2), tol) <= tol)
    if not inst.mode.iff:
        return AffineSimulationReport(premise, conclusion)
    c_premise = bool(operator_fit_residual(ch, hat_star(inst.u1.complement()), tol) <= tol)
    c_conclusion = bool(operator_fit_residual(out, tilde(inst.u2.complement()), tol) <= tol)
    return AffineSimulationReport(premise, conclusion, c_premise, c_conclusion)


# ns decision -----------------------------------------------------------


@dataclass
class NsDecision:
    """``feasible`` is ``None`` for an ``unknown`` outcome."""

    feasible: bool | None
    correlation: QnsCorrelation | None = None
    residual: float = 0.0
    certificate: str | None = None
    iterations: int = 0
    invertible: bool | None = None

    @property
    def status(self) -> str:
        return {True: "feasible", False: "infeasible", None: "unknown"}[self.feasible]


def ns_linear_map(j: np.ndarray, quad: Quad) -> np.ndarray:
    """Trace, Bob-marginal and Alice-marginal functionals of a Choi matrix, flattened.

    Equal to :func:`ns_targets` exactly when ``j`` is trace preserving and no-signalling.
    """

    nx, ny, na, nb = quad.sizes
    c = j.reshape(nx, ny, na, nb, nx, ny, na, nb).transpose(0, 4, 1, 5, 2, 6, 3, 7)
    tp = np.einsum("pqijaabb->pqij", c)
    t = np.einsum("pqijaauv->pqijuv", c)
    s = np.einsum("pqijrsuu->pqijrs", c)
    off_x = ~np.eye(nx, dtype=bool)
    off_y = ~np.eye(ny, dtype=bool)
    t_diag = np.einsum("ppijuv->pijuv", t)
    s_diag = np.einsum("pqiirs->ipqrs", s)
    return np.concatenate(
        [
            tp.reshape(-1),
            t[off_x].reshape(-1),
            (t_diag[1:] - t_diag[:1]).reshape(-1),
            s[:, :, off_y].reshape(-1),
            (s_diag[1:] - s_diag[:1]).reshape(-1),
        ]
    )


def ns_targets(quad: Quad) -> np.ndarray:
    nx, ny, _, _ = quad.sizes
    zero_j = np.zeros((np.prod(quad.sizes), np.prod(quad.sizes)), dtype=complex)
    target = np.zeros(ns_linear_map(zero_j, quad).shape, dtype=complex)
    target[: (nx * ny) ** 2] = np.einsum("pq,ij->pqij", np.eye(nx), np.eye(ny)).reshape(-1)
    return target


def _classical_decision(inst: HomInstance, tol: float) -> NsDecision | None:
    ok1, e1 = is_classical(inst.u1, tol)
    ok2, e2 = is_classical(inst.u2, tol)
    if not (ok1 and ok2):
        return None
    lp = decide_classical_ns(e1, e2, inst.mode.iff, tol)
    if lp.feasible is None:
        return None
    if not lp.feasible:
        return NsDecision(False, certificate="LP")
    corr = from_classical(lp.correlation, inst.quad, max(tol, 1e-6))
    return NsDecision(True, corr, fit_residual(corr.channel, inst.arrow(), "range", tol), "LP")


def decide_ns(inst: HomInstance, cfg: SolverConfig | None = None, tol: float | None = None) -> NsDecision:
    """Decide whether a no-signalling correlation fits the instance's arrow space.

    Classical instances go to the exact LP first. Otherwise the twisted Choi
    matrix is written ``C = V W V*`` over an orthonormal basis ``V`` of the
    arrow space and ``W ⪰ 0`` is sought under the trace-preservation and
    no-signalling constraints.
    """

    cfg = cfg or SolverConfig()
    tol = resolve_tol(tol)
    quad = inst.quad
    if cfg.classical_oracle:
        decided = _classical_decision(inst, tol)
        if decided is not None:
            log.info("decide_ns settled by the classical LP: %s", decided.status)
            return _with_rank_check(decided, inst, tol)

    v = inst.arrow().subspace.columns
    if v.shape[1] == 0:
        return NsDecision(False, certificate="rank")
    d_in, d_out = quad.x.size * quad.y.size, quad.a.size * quad.b.size
    # Tr_out C ≤ ‖W‖·Tr_out(VV*), so a singular marginal rules out trace preservation
    marginal = np.einsum("iaja->ij", (v @ v.conj().T).reshape(d_in, d_out, d_in, d_out))
    if min_eigenvalue(marginal) <= tol:
        log.info("decide_ns: arrow space has a singular input marginal")
        return NsDecision(False, certificate="rank")

    def constraints(w: np.ndarray) -> np.ndarray:
        return ns_linear_map(v @ w @ v.conj().T, quad)

    problem = FeasibilityProblem.from_linear_map(
        v.shape[1], constraints, ns_targets(quad), label=f"decide-ns[{inst.mode.value}]"
    )
    start = v.conj().T @ (np.eye(v.shape[0]) / d_out) @ v
    result = solve(problem, cfg, start=start, tol=tol)
    if result.status == INFEASIBLE:
        return NsDecision(False, residual=result.residual, certificate=result.certificate)
    if result.status != FEASIBLE:
        return NsDecision(None, residual=result.residual, iterations=result.iterations)
    choi = v @ result.point @ v.conj().T
    choi = (choi + choi.conj().T) / 2
    ch = Channel.assume_valid(quad.in_sets, quad.out_sets, choi=choi)
    decided = NsDecision(True, QnsCorrelation(ch, quad), result.residual, None, result.iterations)
    return _with_rank_check(decided, inst, tol)


def _with_rank_check(decided: NsDecision, inst: HomInstance, tol: float) -> NsDecision:
    if inst.mode is Mode.FULL_HOM and decided.correlation is not None:
        ch = decided.correlation.channel
        decided.invertible = min_eigenvalue(ch.apply(np.eye(ch.d_in))) > tol
    return decided


# loc constructions -----------------------------------------------------


@dataclass
class LocResult:
    """``holds`` is ``None`` when a column isometry search was inconclusive."""

    holds: bool | None
    correlation: QnsCorrelation | None = None
    offender: str | None = None
    report: HomReport | None = None


def _triple_offender(
    left: OperatorSubspace, middle: OperatorSubspace, right: OperatorSubspace, target: OperatorSubspace, tol: float
) -> str | None:
    for a, l_op in enumerate(left.operators):
        for b, m_op in enumerate(middle.operators):
            for c, r_op in enumerate(right.operators):
                prod = l_op @ m_op @ r_op
                if not target.contains(prod, tol, atol=tol):
                    return f"basis triple ({a}, {b}, {c})"
    return None


def _check_spaces(l_space: OperatorSubspace, r_space: OperatorSubspace, inst: HomInstance) -> None:
    if l_space.domain != (inst.y1,) or l_space.codomain != (inst.y2,):
        raise DimensionMismatchError(f"{l_space!r} must lie in L(ℂ^{inst.y1.name}, ℂ^{inst.y2.name})")
    if r_space.domain != (inst.x2,) or r_space.codomain != (inst.x1,):
        raise DimensionMismatchError(f"{r_space!r} must lie in L(ℂ^{inst.x2.name}, ℂ^{inst.x1.name})")


def _loc_correlation(
    r_ops: list[np.ndarray], l_ops: list[np.ndarray], inst: HomInstance, tol: float
) -> QnsCorrelation:
    phi = Channel.assume_valid((inst.x2,), (inst.x1,), kraus=r_ops)
    psi = Channel.assume_valid((inst.y1,), (inst.y2,), kraus=l_ops)
    return from_loc(LocWitness.single(phi, psi), inst.quad, tol)


def loc_quasi_from_spaces(
    l_space: OperatorSubspace,
    r_space: OperatorSubspace,
    inst: HomInstance,
    cfg: SolverConfig | None = None,
    tol: float | None = None,
) -> LocResult:
    """Build a local quasi-homomorphism from ``ℒ Û₁* ℛ ⊆ Ũ₂`` and column isometries in ``ℒ`` and ``ℛ``."""

    tol = resolve_tol(tol)
    _check_spaces(l_space, r_space, inst)
    src, dst = hat_star(inst.u1), tilde(inst.u2)
    bad = _triple_offender(l_space, src, r_space, dst, tol)
    if bad is not None:
        return LocResult(False, offender=f"L hat_star(U1) R leaves tilde(U2) at {bad}")
    iso_l = column_isometry_exists(l_space, cfg, tol)
    iso_r = column_isometry_exists(r_space, cfg, tol)
    for name, iso in (("L", iso_l), ("R", iso_r)):
        if iso.exists is False:
            return LocResult(False, offender=f"{name} holds no column isometry ({iso.certificate})")
        if iso.exists is None:
            return LocResult(None, offender=f"column isometry search in {name} inconclusive")
    corr = _loc_correlation(iso_r.operators, iso_l.operators, inst, max(tol, 1e-8))
    report = verify_hom(corr, inst.with_mode(Mode.QUASI), max(tol, 1e-8))
    return LocResult(report.passed, corr, report.offender, report)


def _normalised_cover(space: OperatorSubspace, full: bool, tol: float) -> tuple[list[np.ndarray] | None, str | None]:
    ops = kernel_cover(space, adjoint=False, tol=tol)
    if full:
        ops = ops + [t.conj().T for t in kernel_cover(space, adjoint=True, tol=tol)]
    k = sum(t.conj().T @ t for t in ops)
    w, v = np.linalg.eigh(k)
    if w[0] <= tol * w[-1]:
        return None, "cover Gram matrix is not invertible"
    k_inv_sqrt = (v / np.sqrt(w)) @ v.conj().T
    normalised = [t @ k_inv_sqrt for t in ops]
    for i, t in enumerate(normalised):
        if not space.contains(t, tol * 1e3):
            return None, f"normalised cover element {i} leaves the TRO"
    return normalised, None


def loc_hom_from_tros(
    l_space: OperatorSubspace,
    r_space: OperatorSubspace,
    inst: HomInstance,
    full: bool = False,
    tol: float | None = None,
) -> LocResult:
    """Build a local homomorphism from TROs ``ℒ``, ``ℛ`` intertwining ``Û₁*`` and ``Ũ₂``.

    Requires ``ℒ Û₁* ℛ ⊆ Ũ₂`` and ``ℒ* Ũ₂ ℛ* ⊆ Û₁*``, both spaces TROs with
    trivial common kernel (and, for ``full``, non-degenerate on both sides).
    """

    tol = resolve_tol(tol)
    _check_spaces(l_space, r_space, inst)
    src, dst = hat_star(inst.u1), tilde(inst.u2)
    bad = _triple_offender(l_space, src, r_space, dst, tol)
    if bad is not None:
        return LocResult(False, offender=f"L hat_star(U1) R leaves tilde(U2) at {bad}")
    bad = _triple_offender(l_space.adjoint(), dst, r_space.adjoint(), src, tol)
    if bad is not None:
        return LocResult(False, offender=f"L* tilde(U2) R* leaves hat_star(U1) at {bad}")

    covers = {}
    for name, space in (("L", l_space), ("R", r_space)):
        report = tro_check(space, tol)
        if not report.is_tro:
            return LocResult(False, offender=f"{name} is not a TRO")
        if not report.left_nondeg or (full and not report.right_nondeg):
            return LocResult(False, offender=f"{name} is degenerate")
        ops, problem = _normalised_cover(space, full, tol)
        if ops is None:
            return LocResult(False, offender=f"{name}: {problem}")
        covers[name] = ops

    mode = Mode.FULL_HOM if full else Mode.HOM
    check_tol = max(tol, 1e-8)
    corr = _loc_correlation(covers["R"], covers["L"], inst, check_tol)
    report = verify_hom(corr, inst.with_mode(mode), check_tol)
    if report.passed and full:
        term = corr.witness.terms[0]
        for name, ch in (("Phi", term.phi), ("Psi", term.psi)):
            lam = min_eigenvalue(ch.apply(np.eye(ch.d_in)))
            if lam <= 1e-8:
                return LocResult(False, corr, f"{name}(I) is singular ({lam:.3e})", report)
    return LocResult(report.passed, corr, report.offender, report)

