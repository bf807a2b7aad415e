import numpy as np
import pytest

from qhom.channels import (
    Channel,
    ClassicalChannel,
    classical_of,
    compose,
    depolarizing_channel,
    fits_classical,
    gamma_of_classical,
    identity_channel,
    kraus_of,
    kraus_rank,
    orthonormal_kraus_count,
    tensor,
    twisted_choi,
)
from qhom.errors import InvalidChannelError
from qhom.hypergraphs import QuantumHypergraph, fit_residual
from qhom.sampling import random_channel, random_psd, random_subspace
from qhom.subspaces import Subspace
from qhom.tensors import IndexSet


def _sets(rng, names=("X", "Y")):
    return tuple(IndexSet(n, int(rng.integers(1, 4))) for n in names)


def test_random_channels_are_cptp(rng):
    for _ in range(20):
        x, y = _sets(rng)
        ch = random_channel((x,), (y,), rng)
        ch.validate(1e-10)
        rho = random_psd(x.size, rng)
        assert np.isclose(np.trace(ch.apply(rho)), np.trace(rho))


def test_random_channels_into_smaller_outputs(rng):
    x, y = IndexSet("X", 3), IndexSet("Y", 1)
    for _ in range(5):
        ch = random_channel((x,), (y,), rng)
        ch.validate(1e-10)
        assert kraus_rank(ch) == 3
    narrowing = random_channel((x,), (IndexSet("Y", 2),), rng, kraus_rank=2)
    narrowing.validate(1e-10)
    with pytest.raises(ValueError, match="at least 2 Kraus operators"):
        random_channel((x,), (IndexSet("Y", 2),), rng, kraus_rank=1)


def test_twisted_choi_rank_counts_kraus_operators(rng):
    for _ in range(100):
        x, y = _sets(rng)
        ch = random_channel((x,), (y,), rng)
        rank = Subspace.range_of(twisted_choi(ch)).rank
        assert rank == orthonormal_kraus_count(ch)
        assert rank == kraus_rank(ch)


def test_fits_agrees_between_range_and_kraus(rng):
    for trial in range(100):
        x, y = _sets(rng)
        ch = random_channel((x,), (y,), rng)
        legs = twisted_choi(ch).row_legs
        dim = x.size * y.size
        if trial % 2:
            u = random_subspace(legs, int(rng.integers(0, dim + 1)), rng)
        else:
            extra = random_subspace(legs, int(rng.integers(0, dim + 1)), rng)
            u = Subspace.range_of(twisted_choi(ch)).sum(extra)
        k = QuantumHypergraph(u)
        by_range = fit_residual(ch, k, "range") <= 1e-9
        by_kraus = fit_residual(ch, k, "kraus") <= 1e-9
        assert by_range == by_kraus
        if trial % 2 == 0:
            assert by_range


def test_from_kraus_rejects_non_trace_preserving():
    x = IndexSet("X", 2)
    with pytest.raises(InvalidChannelError):
        Channel.from_kraus([np.eye(2) * 1.1], (x,), (x,))


def test_kraus_of_reproduces_choi(rng):
    x, y = IndexSet("X", 2), IndexSet("Y", 3)
    ch = random_channel((x,), (y,), rng, kraus_rank=3)
    rebuilt = Channel.assume_valid((x,), (y,), kraus=kraus_of(ch))
    assert np.allclose(rebuilt.choi, ch.choi, atol=1e-10)


def test_identity_and_depolarizing():
    x = IndexSet("X", 3)
    rho = np.diag([0.5, 0.3, 0.2]).astype(complex)
    assert np.allclose(identity_channel((x,)).apply(rho), rho)
    assert np.allclose(depolarizing_channel((x,)).apply(rho), np.eye(3) / 3)


def test_compose_with_identity(rng):
    x, y = IndexSet("X", 2), IndexSet("Y", 2)
    ch = random_channel((x,), (y,), rng)
    assert np.allclose(compose(identity_channel((y,)), ch).choi, ch.choi)
    assert np.allclose(compose(ch, identity_channel((x,))).choi, ch.choi)


def test_tensor_acts_on_products(rng):
    x, y = IndexSet("X", 2), IndexSet("Y", 2)
    phi = random_channel((x,), (x,), rng)
    psi = random_channel((y,), (y,), rng)
    rho, sigma = random_psd(2, rng), random_psd(2, rng)
    both = tensor(phi, psi)
    assert np.allclose(both.apply(np.kron(rho, sigma)), np.kron(phi.apply(rho), psi.apply(sigma)))


def test_classical_bridge():
    x, y = IndexSet("X", 2), IndexSet("Y", 3)
    n = ClassicalChannel.create(np.array([[0.5, 0.0], [0.5, 0.25], [0.0, 0.75]]), (x,), (y,))
    gamma = gamma_of_classical(n)
    gamma.validate()
    assert np.allclose(classical_of(gamma).matrix, n.matrix)
    assert n.support() == {(0, 0), (0, 1), (1, 1), (1, 2)}
    assert fits_classical(n, n.support() | {(1, 0)})
    assert not fits_classical(n, {(0, 0), (1, 1)})
    assert np.allclose(gamma.apply(np.diag([1.0, 0.0])), np.diag([0.5, 0.5, 0.0]))


def test_stochastic_matrix_must_sum_to_one():
    x = IndexSet("X", 2)
    with pytest.raises(InvalidChannelError):
        ClassicalChannel.create(np.array([[0.5, 0.5], [0.4, 0.5]]), (x,), (x,))
