"""Alternating projections with Dykstra correction for PSD feasibility problems.

A problem asks for a Hermitian ``W ⪰ 0`` satisfying real affine constraints
``A·hvec(W) = b``. ``hvec`` is the orthonormal real coordinate map on
Hermitian matrices, so Euclidean projections in those coordinates are
Frobenius projections on matrices.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from .settings import SolverConfig, resolve_tol
from .tensors import psd_clip

log = logging.getLogger(__name__)

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
UNKNOWN = "unknown"


def hvec(mat: np.ndarray) -> np.ndarray:
    """Diagonal, then ``√2·Re`` and ``√2·Im`` of the strict upper triangle."""

    n = mat.shape[0]
    iu = np.triu_indices(n, 1)
    upper = mat[iu] * np.sqrt(2.0)
    return np.concatenate([np.real(np.diagonal(mat)), upper.real, upper.imag])


def hmat(vec: np.ndarray, n: int) -> np.ndarray:
    iu = np.triu_indices(n, 1)
    m = len(iu[0])
    out = np.zeros((n, n), dtype=complex)
    out[np.diag_indices(n)] = vec[:n]
    upper = (vec[n : n + m] + 1j * vec[n + m :]) / np.sqrt(2.0)
    out[iu] = upper
    out[(iu[1], iu[0])] = upper.conj()
    return out


def hermitian_basis(n: int) -> np.ndarray:
    """Matrices ``E_k`` with ``hvec(E_k)`` the standard basis, stacked ``(n², n, n)``."""

    eye = np.eye(n * n)
    return np.stack([hmat(eye[k], n) for k in range(n * n)])


@dataclass(frozen=True)
class FeasibilityProblem:
    """``W ⪰ 0`` with ``rows · hvec(W) = targets``.

    Parameters
    ----------
    size:
        Side of the Hermitian variable ``W``.
    rows:
        Real constraint matrix with ``size²`` columns.
    targets:
        Real right-hand side.
    label:
        Name used in log lines.
    """

    size: int
    rows: np.ndarray
    targets: np.ndarray
    label: str = "problem"

    @classmethod
    def from_linear_map(
        cls,
        size: int,
        linear_map: Callable[[np.ndarray], np.ndarray],
        target: np.ndarray,
        label: str = "problem",
    ) -> "FeasibilityProblem":
        """Tabulate a complex-valued linear map on the Hermitian basis.

        Real and imaginary parts of ``linear_map(W) = target`` become separate rows.
        """

        target = np.asarray(target, dtype=complex).reshape(-1)
        cols = []
        for e in hermitian_basis(size):
            out = np.asarray(linear_map(e), dtype=complex).reshape(-1)
            cols.append(np.concatenate([out.real, out.imag]))
        rows = np.column_stack(cols) if cols else np.zeros((2 * target.size, 0))
        return cls(size, rows, np.concatenate([target.real, target.imag]), label)

    def residual(self, x: np.ndarray) -> float:
        scale = max(1.0, float(np.linalg.norm(self.targets)))
        return float(np.linalg.norm(self.rows @ x - self.targets)) / scale


@dataclass
class AffineProjector:
    """Orthogonal projection onto ``{x : A x = b}`` through a truncated SVD."""

    problem: FeasibilityProblem
    tol: float

    def __post_init__(self) -> None:
        a, b = self.problem.rows, self.problem.targets
        if a.size == 0:
            self._u = np.zeros((a.shape[0], 0))
            self._s = np.zeros(0)
            self._vt = np.zeros((0, a.shape[1]))
        else:
            u, s, vt = scipy.linalg.svd(a, full_matrices=False)
            keep = s > self.tol * (s[0] if s.size else 0.0)
            self._u, self._s, self._vt = u[:, keep], s[keep], vt[keep]
        outside = b - self._u @ (self._u.T @ b)
        self.inconsistency = float(np.linalg.norm(outside)) / max(1.0, float(np.linalg.norm(b)))

    @property
    def consistent(self) -> bool:
        return self.inconsistency <= self.tol * 1e3

    def __call__(self, x: np.ndarray) -> np.ndarray:
        err = self.problem.rows @ x - self.problem.targets
        return x - self._vt.T @ ((self._u.T @ err) / self._s)


def _psd_step(x: np.ndarray, n: int) -> np.ndarray:
    return hvec(psd_clip(hmat(x, n)))


@dataclass
class SolverResult:
    """Outcome of :func:`solve`.

    ``point`` is the final Hermitian matrix when the run is feasible.
    """

    status: str
    residual: float
    iterations: int
    point: np.ndarray | None = None
    certificate: str | None = None
    trace: list[tuple[int, float]] = field(default_factory=list)

    @property
    def feasible(self) -> bool | None:
        if self.status == FEASIBLE:
            return True
        if self.status == INFEASIBLE:
            return False
        return None


def _polish(x: np.ndarray, project: AffineProjector, n: int, eps: float) -> np.ndarray:
    snapped = project(x)
    w = np.linalg.eigvalsh(hmat(snapped, n))
    if w.size and w[0] >= -eps * max(1.0, float(abs(w[-1]))):
        return snapped
    return x


def _trace_bound(problem: FeasibilityProblem, n: int) -> float | None:
    """``Tr W`` when the affine constraints pin it down, else ``None``."""

    eye = hvec(np.eye(n))
    mu, *_ = np.linalg.lstsq(problem.rows.T, eye, rcond=None)
    if np.linalg.norm(problem.rows.T @ mu - eye) > 1e-9 * np.sqrt(n):
        return None
    return float(mu @ problem.targets)


def _separates(problem: FeasibilityProblem, gap: np.ndarray, n: int, trace: float | None) -> bool:
    """Check a separating functional ``D = Aᵗλ`` built from the gap between the two sets.

    Every feasible ``W`` has ``⟨D, W⟩ = λ·b`` and ``⟨D, W⟩ ≤ max(λ_max(D), 0)·Tr W``;
    a violation of that bound proves the problem infeasible.
    """

    lam, *_ = np.linalg.lstsq(problem.rows.T, gap, rcond=None)
    d = problem.rows.T @ lam
    norm = float(np.linalg.norm(d))
    if norm == 0.0:
        return False
    top = float(np.linalg.eigvalsh(hmat(d, n))[-1])
    value = float(lam @ problem.targets)
    if trace is None:
        return top <= 0.0 and value > 1e-9 * norm
    return value > max(top, 0.0) * trace + 1e-9 * norm


def solve(
    problem: FeasibilityProblem,
    cfg: SolverConfig | None = None,
    start: np.ndarray | None = None,
    tol: float | None = None,
) -> SolverResult:
    """Dykstra alternation between the PSD cone and the affine set.

    Feasibility is declared once the PSD iterate meets the affine
    constraints to ``cfg.eps``. Inconsistent affine constraints are reported
    infeasible with certificate ``"rank"``; a run whose affine and PSD iterates
    stay apart is reported infeasible with certificate ``"farkas"`` once their
    difference yields a separating functional. Anything else ends ``unknown``.
    """

    cfg = cfg or SolverConfig()
    tol = resolve_tol(tol)
    n = problem.size
    if n == 0:
        return SolverResult(INFEASIBLE, float("inf"), 0, certificate="rank")
    project = AffineProjector(problem, tol)
    if not project.consistent:
        log.info("%s: affine constraints inconsistent (%.3e)", problem.label, project.inconsistency)
        return SolverResult(INFEASIBLE, project.inconsistency, 0, certificate="rank")

    x = hvec(np.eye(n) / n) if start is None else hvec(np.asarray(start, dtype=complex))
    if cfg.seed is not None:
        rng = np.random.default_rng(cfg.seed)
        g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        bump = g @ g.conj().T
        x = x + 1e-3 * max(1.0, float(np.linalg.norm(x))) * hvec(bump / np.linalg.norm(bump))
    x = _psd_step(x, n)

    p = np.zeros_like(x)
    q = np.zeros_like(x)
    trace: list[tuple[int, float]] = []
    trace_bound = _trace_bound(problem, n)
    residual = problem.residual(x)
    it = 0
    gap = None
    while it < cfg.max_iters and residual >= cfg.eps:
        it += 1
        y = project(x + p)
        p = x + p - y
        x_new = _psd_step(y + q, n)
        q = y + q - x_new
        step = float(np.linalg.norm(x_new - x))
        gap = y - x_new
        x = x_new
        residual = problem.residual(x)
        if it % cfg.trace_every == 0:
            trace.append((it, residual))
            log.debug("%s: iteration %d residual %.3e", problem.label, it, residual)
            if residual >= cfg.eps and _separates(problem, gap, n, trace_bound):
                log.info("%s: separated after %d iterations", problem.label, it)
                return SolverResult(INFEASIBLE, residual, it, certificate="farkas", trace=trace)
        if step < 1e-15 and residual >= cfg.eps:
            break

    if residual >= cfg.eps:
        trace.append((it, residual))
        if gap is not None and _separates(problem, gap, n, trace_bound):
            log.info("%s: separated after %d iterations", problem.label, it)
            return SolverResult(INFEASIBLE, residual, it, certificate="farkas", trace=trace)
        log.warning(
            "%s: no convergence after %d iterations, residual trace %s",
            problem.label,
            it,
            ", ".join(f"{i}:{r:.2e}" for i, r in trace),
        )
        return SolverResult(UNKNOWN, residual, it, trace=trace)

    if cfg.polish:
        x = _polish(x, project, n, cfg.eps)
        residual = problem.residual(x)
    log.info("%s: feasible after %d iterations (residual %.3e)", problem.label, it, residual)
    return SolverResult(FEASIBLE, residual, it, point=hmat(x, n), trace=trace)
