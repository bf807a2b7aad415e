import numpy as np
import pytest

from qhom.sampling import random_psd
from qhom.settings import SolverConfig
from qhom.solver import (
    FEASIBLE,
    INFEASIBLE,
    UNKNOWN,
    FeasibilityProblem,
    hermitian_basis,
    hmat,
    hvec,
    solve,
)


def _trace_and_corner(corner):
    return FeasibilityProblem.from_linear_map(
        2, lambda w: np.array([np.trace(w), w[0, 0]]), [1.0, corner], label="corner"
    )


def test_hvec_is_an_isometry(rng):
    a, b = random_psd(3, rng), random_psd(3, rng)
    assert np.allclose(hmat(hvec(a), 3), a)
    assert np.isclose(hvec(a) @ hvec(b), np.trace(a @ b).real)


def test_hermitian_basis_is_orthonormal():
    basis = hermitian_basis(3)
    gram = np.einsum("kij,lji->kl", basis, basis)
    assert np.allclose(gram, np.eye(9))
    assert all(np.allclose(e, e.conj().T) for e in basis)


def test_feasible_point_meets_constraints():
    result = solve(_trace_and_corner(0.25))
    assert result.status == FEASIBLE
    assert result.feasible is True
    assert result.residual < 1e-7
    assert np.allclose(result.point, np.diag([0.25, 0.75]), atol=1e-6)


def test_negative_diagonal_is_separated():
    problem = FeasibilityProblem(2, np.array([[1.0, 0.0, 0.0, 0.0]]), np.array([-1.0]))
    result = solve(problem)
    assert result.status == INFEASIBLE
    assert result.certificate == "farkas"
    assert result.point is None


def test_corner_above_trace_is_separated():
    result = solve(_trace_and_corner(2.0))
    assert result.status == INFEASIBLE
    assert result.certificate == "farkas"
    assert result.trace


def test_inconsistent_constraints_give_rank_certificate():
    rows = np.array([[1.0, 0.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0]])
    result = solve(FeasibilityProblem(2, rows, np.array([0.0, 1.0])))
    assert result.status == INFEASIBLE
    assert result.certificate == "rank"
    assert result.iterations == 0


def test_budget_exhaustion_is_unknown():
    problem = FeasibilityProblem.from_linear_map(2, lambda w: np.array([np.trace(w), w[0, 1]]), [1.0, 0.5])
    result = solve(problem, SolverConfig(max_iters=1), start=np.diag([0.9, 0.1]))
    assert result.status == UNKNOWN
    assert result.feasible is None
    assert result.iterations == 1
    assert result.trace[-1][0] == 1


def test_config_is_validated():
    with pytest.raises(ValueError):
        SolverConfig(max_iters=0)
    with pytest.raises(ValueError):
        SolverConfig(eps=0.0)
