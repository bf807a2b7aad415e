"""Exact LP oracle for classical no-signalling (quasi-)homomorphisms."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.optimize

from .channels import ClassicalChannel
from .hypergraphs import ClassicalHypergraph, classical_arrow
from .settings import resolve_tol

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LpResult:
    """``status`` is ``feasible``, ``infeasible`` or ``unknown`` (solver failure)."""

    status: str
    correlation: ClassicalChannel | None = None
    message: str = ""

    @property
    def feasible(self) -> bool | None:
        return {"feasible": True, "infeasible": False}.get(self.status)


def ns_constraints(nx2: int, ny1: int, nx1: int, ny2: int) -> tuple[np.ndarray, np.ndarray]:
    """Equality rows for a conditional distribution ``p(x₁, y₂ | x₂, y₁)``.

    Variables are ordered ``(x₂, y₁, x₁, y₂)`` row-major. The rows encode
    normalisation and both no-signalling marginals, each pinned against the
    first value of the other party's input.
    """

    shape = (nx2, ny1, nx1, ny2)
    n = int(np.prod(shape))
    idx = np.arange(n).reshape(shape)
    rows: list[np.ndarray] = []
    b: list[float] = []

    def row(plus: np.ndarray, minus: np.ndarray | None = None) -> None:
        r = np.zeros(n)
        r[plus.reshape(-1)] += 1.0
        if minus is not None:
            r[minus.reshape(-1)] -= 1.0
        rows.append(r)

    for x2 in range(nx2):
        for y1 in range(ny1):
            row(idx[x2, y1])
            b.append(1.0)
    for x2 in range(nx2):
        for x1 in range(nx1):
            for y1 in range(1, ny1):
                row(idx[x2, y1, x1, :], idx[x2, 0, x1, :])
                b.append(0.0)
    for y1 in range(ny1):
        for y2 in range(ny2):
            for x2 in range(1, nx2):
                row(idx[x2, y1, :, y2], idx[0, y1, :, y2])
                b.append(0.0)
    return np.array(rows), np.array(b)


def decide_classical_ns(
    e1: ClassicalHypergraph, e2: ClassicalHypergraph, iff: bool = False, tol: float | None = None
) -> LpResult:
    """Search a classical no-signalling correlation supported on ``E₁ → E₂`` (or ``E₁ ↔ E₂``)."""

    tol = resolve_tol(tol)
    nx1, ny1 = e1.x_size, e1.y_size
    nx2, ny2 = e2.x_size, e2.y_size
    arrow = classical_arrow(e1, e2, iff)
    a_eq, b_eq = ns_constraints(nx2, ny1, nx1, ny2)
    bounds = []
    for x2, y1, x1, y2 in np.ndindex(nx2, ny1, nx1, ny2):
        allowed = (x2 * ny1 + y1, x1 * ny2 + y2) in arrow.edges
        bounds.append((0.0, None) if allowed else (0.0, 0.0))
    res = scipy.optimize.linprog(
        np.zeros(a_eq.shape[1]), A_eq=a_eq, b_eq=b_eq, bounds=bounds, method="highs"
    )
    if res.status == 2:
        log.info("classical LP infeasible for %d arrow edges", len(arrow.edges))
        return LpResult("infeasible", message=res.message)
    if res.status != 0:
        log.warning("classical LP ended with status %d: %s", res.status, res.message)
        return LpResult("unknown", message=res.message)

    p = np.clip(res.x, 0.0, None).reshape(nx2 * ny1, nx1 * ny2)
    p = p / p.sum(axis=1, keepdims=True)
    p[p < tol] = 0.0
    p = p / p.sum(axis=1, keepdims=True)
    corr = ClassicalChannel(arrow.x_sets, arrow.y_sets, p.T)
    return LpResult("feasible", corr, res.message)
