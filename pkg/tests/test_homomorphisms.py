import itertools

import numpy as np
import pytest

from qhom.channels import identity_channel, unitary_channel
from qhom.correlations import LocWitness, from_loc, star_compose
from qhom.errors import LegMismatchError, QuadMismatchError
from qhom.homomorphisms import (
    CorrelationType,
    HomInstance,
    Mode,
    affine_simulation_check,
    hat_star,
    kraus_bracket_check,
    loc_hom_from_tros,
    loc_quasi_from_spaces,
    n_bracket,
    n_bracket_adjoint,
    tilde,
    verify_hom,
)
from qhom.hypergraphs import ClassicalHypergraph, QuantumHypergraph, embed_classical, fits
from qhom.sampling import ginibre, random_channel, random_hypergraph, random_unitary
from qhom.subspaces import OperatorSubspace
from qhom.tensors import IndexSet, barred, unbarred

CELLS = list(itertools.product(range(2), range(2)))
PERMS = [(0, 1), (1, 0)]


def _sets(i):
    return IndexSet(f"X{i}", 2), IndexSet(f"Y{i}", 2)


def _conjugated(u, r, l, x, y):
    """``{Rᵗ M Lᵗ : M ∈ U}`` as a hypergraph over ``(X̄, Y)``."""

    vectors = []
    for col in u.subspace.columns.T:
        m = col.reshape(r.shape[0], l.shape[1])
        vectors.append((r.T @ m @ l.T).reshape(-1))
    return QuantumHypergraph.from_vectors(vectors, barred(x) + unbarred(y))


def _unitary_hom(u, source, target, rng):
    """A target hypergraph and the local unitary correlation carrying ``u`` onto it."""

    (x1, y1), (x2, y2) = source, target
    r, l = random_unitary(2, rng), random_unitary(2, rng)
    v = _conjugated(u, r, l, x2, y2)
    phi = unitary_channel(r, (x2,), (x1,))
    psi = unitary_channel(l, (y1,), (y2,))
    return v, phi, psi


def _permutation(p):
    m = np.zeros((2, 2), dtype=complex)
    for i, j in enumerate(p):
        m[j, i] = 1.0
    return m


def test_instance_checks_signatures(rng):
    x, y = _sets(1)
    u = random_hypergraph(barred(x) + unbarred(y), 2, rng)
    with pytest.raises(LegMismatchError):
        HomInstance(u, u)
    inst = HomInstance(u.conjugate(), u, "hom", "loc")
    assert inst.mode is Mode.HOM
    assert inst.ctype is CorrelationType.LOC
    assert inst.quad.in_sets == (x, y)


def test_pseudo_reflexivity(rng):
    x, y = _sets(1)
    ident = from_loc(LocWitness.single(identity_channel((x,)), identity_channel((y,))))
    for _ in range(50):
        u = random_hypergraph(barred(x) + unbarred(y), int(rng.integers(1, 4)), rng)
        for mode in Mode:
            inst = HomInstance(u.conjugate(), u, mode, CorrelationType.LOC)
            report = verify_hom(ident, inst)
            assert report.passed, report.offender


def test_pseudo_transitivity(rng):
    s1, s2, s3 = _sets(1), _sets(2), _sets(3)
    for _ in range(50):
        u = random_hypergraph(barred(s1[0]) + unbarred(s1[1]), int(rng.integers(1, 4)), rng)
        v, phi1, psi1 = _unitary_hom(u, s1, s2, rng)
        w, phi2, psi2 = _unitary_hom(v, s2, s3, rng)
        first = HomInstance(u.conjugate(), v, Mode.HOM, CorrelationType.LOC)
        second = HomInstance(v.conjugate(), w, Mode.HOM, CorrelationType.LOC)
        g1 = from_loc(LocWitness.single(phi1, psi1), first.quad)
        g2 = from_loc(LocWitness.single(phi2, psi2), second.quad)
        assert verify_hom(g1, first).passed
        assert verify_hom(g2, second).passed
        both = HomInstance(u.conjugate(), w, Mode.HOM, CorrelationType.LOC)
        report = verify_hom(star_compose(g2, g1), both)
        assert report.passed, report.offender


def test_verify_hom_rejects_foreign_quad(rng):
    x, y = _sets(1)
    u = random_hypergraph(barred(x) + unbarred(y), 2, rng)
    v = random_hypergraph(barred(_sets(2)[0]) + unbarred(_sets(2)[1]), 2, rng)
    ident = from_loc(LocWitness.single(identity_channel((x,)), identity_channel((y,))))
    with pytest.raises(QuadMismatchError):
        verify_hom(ident, HomInstance(u.conjugate(), v))


def test_random_correlation_fails_with_offender(rng):
    x1, y1 = _sets(1)
    x2, y2 = _sets(2)
    u = random_hypergraph(barred(x1) + unbarred(y1), 1, rng)
    v = random_hypergraph(barred(x2) + unbarred(y2), 1, rng)
    inst = HomInstance(u.conjugate(), v, Mode.QUASI, CorrelationType.LOC)
    phi = random_channel((x2,), (x1,), rng)
    psi = random_channel((y1,), (y2,), rng)
    report = verify_hom(from_loc(LocWitness.single(phi, psi), inst.quad), inst)
    assert report.verdict == "fail"
    assert not report.checks["fits"]
    assert report.offender == "twisted Choi range leaves the arrow space"


def test_fits_iff_bracket_condition(rng):
    s1, s2 = _sets(1), _sets(2)
    for trial in range(200):
        u = random_hypergraph(barred(s1[0]) + unbarred(s1[1]), int(rng.integers(1, 4)), rng)
        v, phi, psi = _unitary_hom(u, s1, s2, rng)
        if trial % 4 == 1:
            v = random_hypergraph(v.legs, int(rng.integers(1, 4)), rng)
        inst = HomInstance(u.conjugate(), v, Mode.HOM, CorrelationType.NS)
        if trial % 4 == 2:
            ch = random_channel(inst.quad.in_sets, inst.quad.out_sets, rng, kraus_rank=int(rng.integers(1, 4)))
        else:
            ch = from_loc(LocWitness.single(phi, psi), inst.quad).channel
        by_arrow = fits(ch, inst.arrow())
        by_bracket = kraus_bracket_check(ch, inst).holds
        assert by_arrow == by_bracket
        if trial % 4 in (0, 3):
            assert by_arrow


def test_n_bracket_on_products(rng):
    a, b = ginibre(2, 3, rng), ginibre(4, 2, rng)
    m = ginibre(2, 2, rng)
    assert np.allclose(n_bracket(np.kron(a, b), m), b @ m @ a)
    w = ginibre(4, 3, rng)
    assert np.allclose(n_bracket_adjoint(np.kron(a, b), w), b.conj().T @ w @ a.conj().T)


def test_hat_star_and_tilde_coordinates(rng):
    x, y = _sets(1)
    u = random_hypergraph(unbarred(x) + barred(y), 1, rng)
    coords = u.subspace.columns[:, 0].reshape(2, 2)
    assert np.allclose(hat_star(u).basis[0], coords.conj().T)
    v = random_hypergraph(barred(x) + unbarred(y), 1, rng)
    assert np.allclose(tilde(v).basis[0], v.subspace.columns[:, 0].reshape(2, 2).T)


def test_simulation_carries_fitting_channels(rng):
    s1, s2 = _sets(1), _sets(2)
    w = random_unitary(2, rng)
    # coordinates of Wᵗ, so the unitary channel W fits hat_star(U1)
    u = QuantumHypergraph.from_vectors([w.T.reshape(-1), ginibre(4, 1, rng).reshape(-1)], barred(s1[0]) + unbarred(s1[1]))
    v, phi, psi = _unitary_hom(u, s1, s2, rng)
    inst = HomInstance(u.conjugate(), v, Mode.HOM, CorrelationType.LOC)
    corr = from_loc(LocWitness.single(phi, psi), inst.quad)
    report = affine_simulation_check(corr, inst, unitary_channel(w, (s1[0],), (s1[1],)))
    assert report.premise is True
    assert report.conclusion is True
    assert report.complement_premise is False
    assert report.consistent is True


def _classical_bijection_instances():
    x1, y1 = _sets(1)
    x2, y2 = _sets(2)
    for mask in range(16):
        e1 = [c for i, c in enumerate(CELLS) if mask >> i & 1]
        for f, g in itertools.product(PERMS, PERMS):
            g_inv = {g[i]: i for i in range(2)}
            e2 = [(a, b) for a, b in CELLS if (f[a], g_inv[b]) in e1]
            u1 = embed_classical(ClassicalHypergraph.simple(x1, y1, e1)).conjugate()
            u2 = embed_classical(ClassicalHypergraph.simple(x2, y2, e2))
            inst = HomInstance(u1, u2, Mode.HOM, CorrelationType.LOC)
            r_space = OperatorSubspace.from_operators([_permutation(f)], (x2,), (x1,))
            l_space = OperatorSubspace.from_operators([_permutation(g)], (y1,), (y2,))
            yield inst, l_space, r_space


def test_tro_construction_on_classical_bijections():
    for inst, l_space, r_space in _classical_bijection_instances():
        for full in (False, True):
            result = loc_hom_from_tros(l_space, r_space, inst, full=full)
            assert result.holds, result.offender
            assert result.correlation.kind == "loc"


def test_quasi_construction_on_classical_bijections():
    for inst, l_space, r_space in itertools.islice(_classical_bijection_instances(), 0, 64, 3):
        result = loc_quasi_from_spaces(l_space, r_space, inst)
        assert result.holds, result.offender


def test_tro_construction_on_reflexive_instances(rng):
    x, y = _sets(1)
    l_space = OperatorSubspace.from_operators([np.eye(2)], (y,), (y,))
    r_space = OperatorSubspace.from_operators([np.eye(2)], (x,), (x,))
    for _ in range(10):
        u = random_hypergraph(barred(x) + unbarred(y), int(rng.integers(1, 4)), rng)
        inst = HomInstance(u.conjugate(), u, Mode.HOM, CorrelationType.LOC)
        result = loc_hom_from_tros(l_space, r_space, inst, full=True)
        assert result.holds, result.offender
        assert result.report.checks["invertible"]


def test_tro_construction_reports_offending_triple():
    x1, y1 = _sets(1)
    x2, y2 = _sets(2)
    u1 = embed_classical(ClassicalHypergraph.simple(x1, y1, [(0, 0)])).conjugate()
    u2 = embed_classical(ClassicalHypergraph.simple(x2, y2, [(1, 1)]))
    inst = HomInstance(u1, u2, Mode.HOM, CorrelationType.LOC)
    eye = np.eye(2, dtype=complex)
    result = loc_hom_from_tros(
        OperatorSubspace.from_operators([eye], (y1,), (y2,)),
        OperatorSubspace.from_operators([eye], (x2,), (x1,)),
        inst,
    )
    assert result.holds is False
    assert "leaves" in result.offender


def test_quasi_construction_needs_column_isometries():
    x1, y1 = _sets(1)
    x2, y2 = _sets(2)
    u1 = embed_classical(ClassicalHypergraph.simple(x1, y1, [(0, 0), (1, 1)])).conjugate()
    u2 = embed_classical(ClassicalHypergraph.simple(x2, y2, CELLS))
    inst = HomInstance(u1, u2, Mode.QUASI, CorrelationType.LOC)
    rank_one = np.zeros((2, 2), dtype=complex)
    rank_one[0, 0] = 1.0
    result = loc_quasi_from_spaces(
        OperatorSubspace.from_operators([rank_one], (y1,), (y2,)),
        OperatorSubspace.full((x2,), (x1,)),
        inst,
    )
    assert result.holds is False
    assert "column isometry" in result.offender
