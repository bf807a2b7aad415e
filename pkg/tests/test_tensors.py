import numpy as np
import pytest

from qhom.errors import DimensionMismatchError, LegCollisionError, LegMismatchError, NonHermitianError
from qhom.sampling import ginibre, random_psd
from qhom.tensors import (
    ComplexTensor,
    IndexSet,
    Leg,
    adjoint,
    apply_local,
    conjugate,
    hermitian_eig,
    is_psd_array,
    partial_trace,
    psd_clip,
    sigma_flip,
    sigma_unflip,
    slice_map,
    tensor_product,
    theta,
    theta_inv,
)


def _vector(legs, rng):
    dim = int(np.prod([leg.size for leg in legs]))
    return ComplexTensor.from_vector(legs, ginibre(dim, 1, rng).reshape(-1))


def test_index_set_needs_positive_size():
    with pytest.raises(DimensionMismatchError):
        IndexSet("X", 0)


def test_data_must_match_legs():
    with pytest.raises(DimensionMismatchError):
        ComplexTensor((Leg(IndexSet("X", 2)),), np.zeros(3))


def test_theta_identities(rng):
    for _ in range(100):
        h = IndexSet("H", int(rng.integers(1, 5)))
        k = IndexSet("K", int(rng.integers(1, 5)))
        u = _vector((Leg(h, True), Leg(k, False)), rng)
        t = theta(u)
        assert t.row_legs == (Leg(k),)
        assert t.col_legs == (Leg(h),)

        swapped = ComplexTensor((Leg(k, True), Leg(h, False)), np.conj(u.data).T)
        assert adjoint(t).allclose(theta(swapped), atol=1e-12)

        a = ginibre(h.size, h.size, rng)
        b = ginibre(k.size, k.size, rng)
        moved = apply_local(u, ComplexTensor.from_matrix((Leg(h, True),), (Leg(h, True),), np.conj(a)), 0)
        moved = apply_local(moved, ComplexTensor.from_matrix((Leg(k),), (Leg(k),), b), 1)
        expected = b @ t.matrix() @ a.conj().T
        assert np.allclose(theta(moved).matrix(), expected, atol=1e-10)

        assert theta_inv(t).allclose(u)


def test_theta_rejects_equal_bars():
    h, k = IndexSet("H", 2), IndexSet("K", 2)
    with pytest.raises(LegMismatchError):
        theta(ComplexTensor((Leg(h), Leg(k)), np.ones(4)))


def test_sigma_flip_swaps_outer_legs(rng):
    x1, y1, x2, y2 = (IndexSet(n, s) for n, s in (("X1", 2), ("Y1", 3), ("X2", 1), ("Y2", 2)))
    t = _vector((Leg(x1), Leg(y1, True), Leg(x2, True), Leg(y2)), rng)
    flipped = sigma_flip(t)
    assert flipped.legs == (Leg(x2, True), Leg(y1, True), Leg(x1), Leg(y2))
    assert flipped.data[0, 2, 1, 1] == t.data[1, 2, 0, 1]
    assert sigma_unflip(flipped).allclose(t)


def test_tensor_product_detects_collisions(rng):
    x = IndexSet("X", 2)
    a = _vector((Leg(x),), rng)
    with pytest.raises(LegCollisionError):
        tensor_product(a, a)
    # the same set with opposite bars is a different leg
    both = tensor_product(a, conjugate(a))
    assert both.legs == (Leg(x), Leg(x, True))


def test_slice_map_pairs_against_conjugate(rng):
    x, y, z = IndexSet("X", 3), IndexSet("Y", 2), IndexSet("Z", 2)
    a = _vector((Leg(x),), rng)
    bra = _vector((Leg(x),), rng)
    b = _vector((Leg(y, True), Leg(z)), rng)
    target = tensor_product(a, b)
    sliced = slice_map(conjugate(bra), target, [0])
    assert sliced.legs == b.legs
    assert np.allclose(sliced.data, np.vdot(bra.data, a.data) * b.data)


def test_slice_map_checks_functional_legs(rng):
    x, y = IndexSet("X", 2), IndexSet("Y", 2)
    target = _vector((Leg(x), Leg(y)), rng)
    with pytest.raises(LegMismatchError):
        slice_map(_vector((Leg(x),), rng), target, [0])


def test_partial_trace_of_product(rng):
    x, y = IndexSet("X", 2), IndexSet("Y", 3)
    rho, sigma = random_psd(2, rng), random_psd(3, rng)
    joint = ComplexTensor.from_matrix((Leg(x), Leg(y)), (Leg(x), Leg(y)), np.kron(rho, sigma))
    reduced = partial_trace(joint, [0])
    assert reduced.row_legs == (Leg(y),)
    assert np.allclose(reduced.matrix(), np.trace(rho) * sigma)


def test_hermitian_eig_rejects_skew():
    with pytest.raises(NonHermitianError):
        hermitian_eig(np.array([[0, 1], [0, 0]], dtype=complex))


def test_psd_clip_is_psd(rng):
    for _ in range(20):
        g = ginibre(4, 4, rng)
        clipped = psd_clip(g + g.conj().T)
        assert is_psd_array(clipped, 1e-10)
