"""Seeded random instances for tests and benchmarks."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .channels import Channel, ClassicalChannel
from .correlations import (
    LocTerm,
    LocWitness,
    Quad,
    QnsCorrelation,
    StochasticOperatorMatrix,
    TensorPairWitness,
    from_loc,
    from_tensor_pair,
)
from .hypergraphs import QuantumHypergraph
from .subspaces import Subspace
from .tensors import IndexSet, Leg, legs_dim


def make_rng(seed: int | np.random.Generator | None) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def ginibre(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    return (rng.normal(size=(rows, cols)) + 1j * rng.normal(size=(rows, cols))) / np.sqrt(2)


def random_isometry(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-like isometry ``ℂ^cols → ℂ^rows`` from a QR factorisation."""

    q, r = np.linalg.qr(ginibre(rows, cols, rng))
    return q * (np.diagonal(r) / np.abs(np.diagonal(r)))


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    return random_isometry(n, n, rng)


def random_psd(n: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    g = ginibre(n, rank or n, rng)
    return g @ g.conj().T


def random_channel(
    in_sets: Sequence[IndexSet],
    out_sets: Sequence[IndexSet],
    rng: np.random.Generator,
    kraus_rank: int | None = None,
) -> Channel:
    """CPTP map from a random Stinespring isometry with ``kraus_rank`` Kraus operators.

    The isometry ``ℂ^{d_in} → ℂ^{d_out·k}`` needs ``k ≥ ⌈d_in / d_out⌉``;
    without ``kraus_rank`` the rank is drawn between that bound and ``d_in·d_out``.
    """

    d_in = legs_dim(Leg(s) for s in in_sets)
    d_out = legs_dim(Leg(s) for s in out_sets)
    k_min = -(-d_in // d_out)
    if kraus_rank is not None and kraus_rank < k_min:
        raise ValueError(f"a channel from dimension {d_in} to {d_out} needs at least {k_min} Kraus operators")
    k = kraus_rank or int(rng.integers(k_min, d_in * d_out + 1))
    v = random_isometry(d_out * k, d_in, rng).reshape(k, d_out, d_in)
    return Channel.from_kraus(list(v), in_sets, out_sets)


def random_subspace(legs: Sequence[Leg], rank: int, rng: np.random.Generator) -> Subspace:
    legs = tuple(legs)
    return Subspace(legs, random_isometry(legs_dim(legs), rank, rng) if rank else np.zeros((legs_dim(legs), 0)))


def random_hypergraph(legs: Sequence[Leg], rank: int, rng: np.random.Generator) -> QuantumHypergraph:
    return QuantumHypergraph(random_subspace(legs, rank, rng))


def random_som(
    in_set: IndexSet, out_set: IndexSet, h_dim: int, rng: np.random.Generator, k_dim: int | None = None
) -> StochasticOperatorMatrix:
    """Stochastic operator matrix from an isometry ``ℂ^X ⊗ H → ℂ^A ⊗ K``; ``dim K ≥ ⌈|X|·dim H / |A|⌉``."""

    k_min = -(-in_set.size * h_dim // out_set.size)
    if k_dim is not None and k_dim < k_min:
        raise ValueError(f"an isometry from dimension {in_set.size * h_dim} needs an ancilla of at least {k_min}")
    k = k_dim or max(h_dim, k_min)
    v = random_isometry(out_set.size * k, in_set.size * h_dim, rng)
    return StochasticOperatorMatrix.from_isometry(v, in_set, out_set, h_dim)


def random_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    xi = ginibre(dim, 1, rng).reshape(-1)
    return xi / np.linalg.norm(xi)


def random_loc_witness(quad: Quad, rng: np.random.Generator, terms: int = 1) -> LocWitness:
    weights = rng.dirichlet(np.ones(terms))
    return LocWitness(
        tuple(
            LocTerm(
                float(w),
                random_channel((quad.x,), (quad.a,), rng),
                random_channel((quad.y,), (quad.b,), rng),
            )
            for w in weights
        )
    )


def random_loc_correlation(quad: Quad, rng: np.random.Generator, terms: int = 1) -> QnsCorrelation:
    return from_loc(random_loc_witness(quad, rng, terms), quad, 1e-8)


def random_tensor_pair(
    quad: Quad, rng: np.random.Generator, h_dim: int = 2, k_dim: int = 2
) -> QnsCorrelation:
    e = random_som(quad.x, quad.a, h_dim, rng)
    f = random_som(quad.y, quad.b, k_dim, rng)
    witness = TensorPairWitness(e, f, random_state(h_dim * k_dim, rng))
    return from_tensor_pair(witness, quad, 1e-8)


def pr_box(quad: Quad) -> ClassicalChannel:
    """``p(a, b | x, y) = 1/2`` when ``a ⊕ b = x·y`` on binary sets."""

    if quad.sizes != (2, 2, 2, 2):
        raise ValueError("the PR box lives on binary inputs and outputs")
    mat = np.zeros((4, 4))
    for x in range(2):
        for y in range(2):
            for a in range(2):
                mat[a * 2 + (a ^ (x & y)), x * 2 + y] = 0.5
    return ClassicalChannel(quad.in_sets, quad.out_sets, mat)
