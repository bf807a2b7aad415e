"""Ternary rings of operators, kernel covers and column isometries in operator subspaces."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import null_space

from .errors import NoKernelCoverError, TroClosureError
from .settings import SolverConfig, resolve_tol
from .solver import FEASIBLE, INFEASIBLE, FeasibilityProblem, solve
from .subspaces import OperatorSubspace, product_space

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TroReport:
    is_tro: bool
    left_nondeg: bool
    right_nondeg: bool

    @property
    def nondegenerate(self) -> bool:
        return self.left_nondeg and self.right_nondeg


def _kernel_dim(ops: list[np.ndarray], n: int, tol: float) -> int:
    if not ops:
        return n
    return null_space(np.vstack(ops), rcond=tol).shape[1]


def tro_check(m: OperatorSubspace, tol: float | None = None) -> TroReport:
    """Closure under ``S T* R`` on basis triples, and non-degeneracy on both sides.

    Left non-degeneracy means ``span{T* η}`` fills the domain, i.e. the
    common kernel is trivial; right non-degeneracy is the same for ``{T*}``.
    """

    tol = resolve_tol(tol)
    closed = m.rank == 0 or m.includes(product_space(m, m.adjoint(), m, tol), tol)
    ops = m.operators
    left = _kernel_dim(ops, m.shape[1], tol) == 0
    right = _kernel_dim([a.conj().T for a in ops], m.shape[0], tol) == 0
    return TroReport(closed, left, right)


def tro_generate(m0: OperatorSubspace, tol: float | None = None) -> OperatorSubspace:
    """Smallest TRO containing ``m0``: iterate ``M ← span(M ∪ M M* M)``."""

    tol = resolve_tol(tol)
    cap = (m0.shape[0] * m0.shape[1]) ** 2
    m = m0
    for round_ in range(cap):
        prods = product_space(m, m.adjoint(), m, tol)
        grown = OperatorSubspace.from_operators(
            m.operators + prods.operators, m.domain, m.codomain, tol
        )
        if grown.rank == m.rank:
            log.debug("TRO closure stable at rank %d after %d rounds", m.rank, round_)
            return m
        m = grown
    raise TroClosureError(f"TRO generation did not stabilise within {cap} rounds")


def kernel_cover(m: OperatorSubspace, adjoint: bool = False, tol: float | None = None) -> list[np.ndarray]:
    """Basis elements ``T₁, …, Tₙ`` with trivial common kernel, chosen greedily.

    Each step takes the first basis element that does not vanish on the
    current common kernel. With ``adjoint`` the search runs over ``{T*}``.
    """

    tol = resolve_tol(tol)
    ops = [a.conj().T for a in m.operators] if adjoint else m.operators
    n = m.shape[0] if adjoint else m.shape[1]
    if _kernel_dim(ops, n, tol) != 0:
        side = "adjoint " if adjoint else ""
        raise NoKernelCoverError(f"{side}operator space {m!r} has a nonzero common kernel")
    chosen: list[np.ndarray] = []
    kernel = np.eye(n, dtype=complex)
    while kernel.shape[1]:
        scale = max(float(np.linalg.norm(a)) for a in ops)
        pick = next(a for a in ops if np.linalg.norm(a @ kernel) > tol * scale)
        chosen.append(pick)
        kernel = null_space(np.vstack(chosen), rcond=tol)
    return chosen


@dataclass
class IsometryResult:
    """``exists`` is ``None`` when the solver could not decide."""

    exists: bool | None
    gram: np.ndarray | None = None
    operators: list[np.ndarray] | None = None
    defect: float | None = None
    certificate: str | None = None


def column_isometry_exists(
    m: OperatorSubspace, cfg: SolverConfig | None = None, tol: float | None = None
) -> IsometryResult:
    """Look for ``A_i ∈ M`` with ``Σ A_i* A_i = I`` through a PSD Gram matrix over the basis."""

    tol = resolve_tol(tol)
    cfg = cfg or SolverConfig()
    n = m.shape[1]
    if m.rank == 0 or m.common_kernel().shape[1]:
        return IsometryResult(False, certificate="rank")
    b = m.basis
    pair = np.einsum("kai,laj->klij", b.conj(), b)

    def gram_sum(g: np.ndarray) -> np.ndarray:
        return np.einsum("kl,klij->ij", g, pair)

    problem = FeasibilityProblem.from_linear_map(m.rank, gram_sum, np.eye(n), label="column-isometry")
    result = solve(problem, cfg, tol=tol)
    if result.status == INFEASIBLE:
        return IsometryResult(False, certificate=result.certificate)
    if result.status != FEASIBLE:
        return IsometryResult(None)
    g = result.point
    w, v = np.linalg.eigh(g)
    ops = []
    for lam, vec in zip(w[::-1], v.T[::-1]):
        if lam <= tol * max(float(w[-1]), 1.0):
            break
        ops.append(np.einsum("k,kab->ab", np.sqrt(lam) * vec.conj(), b))
    total = sum(a.conj().T @ a for a in ops)
    defect = float(np.max(np.abs(total - np.eye(n))))
    return IsometryResult(True, g, ops, defect)
