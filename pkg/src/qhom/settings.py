"""Numerical defaults shared across the toolkit."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Any

DEFAULT_TOL = 1e-9
DEFAULT_EPS = 1e-7
DEFAULT_MAX_ITERS = 20000


def resolve_tol(tol: float | None) -> float:
    """Return ``tol`` or the library default when it is ``None``."""

    if tol is None:
        return DEFAULT_TOL
    if tol <= 0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    return float(tol)


@dataclass(frozen=True)
class SolverConfig:
    """Settings for the alternating projection engine.

    Parameters
    ----------
    eps:
        Residual below which a run is declared feasible.
    max_iters:
        Iteration budget before a run ends ``unknown``.
    seed:
        Seed for the random start perturbation; ``None`` starts deterministically.
    classical_oracle:
        Whether classical instances are first decided by the exact LP.
    polish:
        Whether a converged point is snapped onto the affine set when that keeps it PSD.
    trace_every:
        Sampling period of the residual trace kept for ``unknown`` outcomes.
    """

    eps: float = DEFAULT_EPS
    max_iters: int = DEFAULT_MAX_ITERS
    seed: int | None = None
    classical_oracle: bool = True
    polish: bool = True
    trace_every: int = 500

    def __post_init__(self) -> None:
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")

    @classmethod
    def from_mapping(cls, data: dict[str, Any] | None) -> "SolverConfig":
        """Build a config from a mapping, ignoring ``None`` values and unknown keys."""

        cfg = cls()
        if not data:
            return cfg
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__ and v is not None}
        return replace(cfg, **known)

    def as_dict(self) -> dict[str, Any]:
        return {
            "eps": self.eps,
            "max_iters": self.max_iters,
            "seed": self.seed,
            "classical_oracle": self.classical_oracle,
            "polish": self.polish,
        }


@dataclass(frozen=True)
class RunSettings:
    """Everything a command needs besides its input files."""

    tol: float = DEFAULT_TOL
    solver: SolverConfig = SolverConfig()
    jobs: int = 1

    def __post_init__(self) -> None:
        resolve_tol(self.tol)
        if self.jobs < 1:
            raise ValueError("jobs must be at least 1")

    @classmethod
    def from_mapping(cls, data: dict[str, Any] | None) -> "RunSettings":
        """Read ``tol``, ``jobs`` and the solver keys from a flat mapping."""

        data = {k: v for k, v in (data or {}).items() if v is not None}
        return cls(
            tol=float(data.get("tol", DEFAULT_TOL)),
            solver=SolverConfig.from_mapping(data),
            jobs=int(data.get("jobs", 1)),
        )

    def as_dict(self) -> dict[str, Any]:
        return {"tol": self.tol, "jobs": self.jobs, **self.solver.as_dict()}
