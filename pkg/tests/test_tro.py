import numpy as np
import pytest

from qhom.errors import NoKernelCoverError
from qhom.sampling import ginibre
from qhom.subspaces import OperatorSubspace
from qhom.tensors import IndexSet
from qhom.tro import column_isometry_exists, kernel_cover, tro_check, tro_generate

H, K = IndexSet("H", 2), IndexSet("K", 2)


def _unit(a, b):
    m = np.zeros((2, 2), dtype=complex)
    m[a, b] = 1.0
    return m


@pytest.fixture
def top_row():
    """``span{|0⟩⟨0|, |0⟩⟨1|}``: a TRO degenerate on the right."""

    return OperatorSubspace.from_operators([_unit(0, 0), _unit(0, 1)], (H,), (K,))


def test_top_row_is_a_tro(top_row):
    report = tro_check(top_row)
    assert report.is_tro
    assert report.left_nondeg
    assert not report.right_nondeg
    assert not report.nondegenerate
    assert top_row.tro == report


def test_permutation_span_is_nondegenerate_tro():
    swap = np.array([[0, 1], [1, 0]], dtype=complex)
    report = tro_check(OperatorSubspace.from_operators([swap], (H,), (K,)))
    assert report.is_tro and report.nondegenerate


def test_random_plane_is_not_a_tro(rng):
    space = OperatorSubspace.from_operators([ginibre(2, 2, rng) for _ in range(2)], (H,), (K,))
    assert not tro_check(space).is_tro


def test_generated_tro_contains_seed(rng):
    seed = OperatorSubspace.from_operators([ginibre(2, 3, rng)], (IndexSet("Z", 3),), (K,))
    generated = tro_generate(seed)
    assert generated.includes(seed)
    assert generated.rank > seed.rank
    assert tro_check(generated).is_tro


def test_kernel_cover_of_top_row(top_row):
    chosen = kernel_cover(top_row)
    assert len(chosen) == 2
    assert np.linalg.matrix_rank(np.vstack(chosen)) == 2
    with pytest.raises(NoKernelCoverError):
        kernel_cover(top_row, adjoint=True)


def test_kernel_cover_on_random_spaces(rng):
    for _ in range(100):
        n = int(rng.integers(2, 5))
        m = int(rng.integers(1, 4))
        k = -(-n // m) + int(rng.integers(0, 2))
        dom, cod = IndexSet("D", n), IndexSet("C", m)
        space = OperatorSubspace.from_operators([ginibre(m, n, rng) for _ in range(k)], (dom,), (cod,))
        chosen = kernel_cover(space)
        assert np.linalg.matrix_rank(np.vstack(chosen)) == n
        assert all(space.contains(t) for t in chosen)


def test_kernel_cover_rejects_common_kernel(rng):
    for _ in range(20):
        n = int(rng.integers(2, 5))
        m = int(rng.integers(1, 4))
        v = ginibre(n, 1, rng)
        v /= np.linalg.norm(v)
        q = np.eye(n) - v @ v.conj().T
        dom, cod = IndexSet("D", n), IndexSet("C", m)
        ops = [ginibre(m, n, rng) @ q for _ in range(n + 1)]
        with pytest.raises(NoKernelCoverError):
            kernel_cover(OperatorSubspace.from_operators(ops, (dom,), (cod,)))


def test_column_isometry_in_top_row(top_row):
    found = column_isometry_exists(top_row)
    assert found.exists
    assert found.defect < 1e-8
    total = sum(a.conj().T @ a for a in found.operators)
    assert np.allclose(total, np.eye(2), atol=1e-8)
    assert all(top_row.contains(a, 1e-8) for a in found.operators)


def test_column_isometry_in_full_space():
    found = column_isometry_exists(OperatorSubspace.full((H,), (K,)))
    assert found.exists
    assert found.defect < 1e-6


def test_column_isometry_needs_trivial_kernel():
    found = column_isometry_exists(OperatorSubspace.from_operators([_unit(0, 0)], (H,), (K,)))
    assert found.exists is False
    assert found.certificate == "rank"
