import json

import numpy as np
import pytest

from conftest import channel_doc, classical_doc, matrix_doc, write_doc
from qhom import formats
from qhom.channels import ClassicalChannel, depolarizing_channel, identity_channel
from qhom.correlations import LocWitness, Quad, from_commuting_pair, from_loc
from qhom.errors import InputError
from qhom.homomorphisms import CorrelationType, Mode
from qhom.hypergraphs import ClassicalHypergraph, QuantumHypergraph
from qhom.sampling import pr_box, random_hypergraph, random_tensor_pair
from qhom.tensors import ComplexTensor, IndexSet, barred, unbarred


def _quad_doc(quad):
    return {k: {"set": s.name, "size": s.size} for k, s in zip("xyab", quad.in_sets + quad.out_sets)}


def test_schema_diagnostics_name_the_path(binary_quad):
    doc = {"quad": _quad_doc(binary_quad), "channel": channel_doc([("X", 2)], [("Y", 2)], [np.eye(2)])}
    doc["quad"]["b"]["size"] = 0
    doc["extra"] = True
    with pytest.raises(InputError) as err:
        formats.validate(doc, "correlation", "bad.json")
    assert "bad.json" in str(err.value)
    assert any(d.startswith("(root):") for d in err.value.diagnostics)
    assert any(d.startswith("quad/b/size:") for d in err.value.diagnostics)


def test_unknown_kind_is_a_programming_error():
    with pytest.raises(ValueError):
        formats.validate({}, "matrix")


def test_channel_needs_kraus_or_choi():
    doc = channel_doc([("X", 2)], [("X", 2)], [np.eye(2)])
    doc["choi"] = doc["kraus"][0]
    with pytest.raises(InputError):
        formats.validate(doc, "channel")
    with pytest.raises(InputError):
        formats.validate({"in": "X", "out": "Y"}, "channel")


def test_read_json_reports_position(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"in": "X",\n  "kraus": [}', encoding="utf-8")
    with pytest.raises(InputError) as err:
        formats.read_json(path)
    assert err.value.diagnostics[0].startswith("line 2 column")
    with pytest.raises(InputError):
        formats.read_json(tmp_path / "missing.json")


def test_read_json_rejects_invalid_utf8(tmp_path):
    path = tmp_path / "latin.json"
    path.write_bytes(b'{"X": 2, "Y": 2, "edges": [], "x_name": "\xe9"}')
    with pytest.raises(InputError, match="not valid JSON"):
        formats.load(path, "classical_hypergraph")


def test_tensor_documents(tmp_path):
    legs = barred(IndexSet("X", 2)) + unbarred(IndexSet("Y", 3))
    t = ComplexTensor(legs, np.arange(6) + 1j)
    doc = formats.encode_tensor(t)
    assert doc["legs"][0] == {"set": "X", "size": 2, "barred": True}
    assert doc["data"][4] == [4.0, 1.0]
    back, _ = formats.load(write_doc(tmp_path / "t.json", doc), "tensor")
    assert back.legs == legs
    assert np.allclose(back.vector(), t.vector())
    doc["data"] = doc["data"][:5]
    with pytest.raises(InputError) as err:
        formats.decode_tensor(doc)
    assert err.value.diagnostics == ["tensor/data: 5 entries, expected 6"]


def test_bare_name_kraus_channel(tmp_path):
    doc = {"in": "X", "out": "Y", "kraus": [matrix_doc(np.eye(2))]}
    ch, digest = formats.load(write_doc(tmp_path / "id.json", doc), "channel")
    assert len(digest) == 64
    ch.validate()
    assert ch.in_sets == (IndexSet("X", 2),)
    assert ch.out_sets == (IndexSet("Y", 2),)
    assert formats.encode_channel(ch) == doc


def test_choi_channel_sizes(tmp_path):
    ident = identity_channel((IndexSet("X", 2),))
    bare = {"choi": formats.encode_array(ident.choi)}
    ch, _ = formats.load(write_doc(tmp_path / "bare.json", bare), "channel")
    assert (ch.d_in, ch.d_out) == (2, 2)
    assert np.allclose(ch.choi, ident.choi)

    depol = depolarizing_channel((IndexSet("X", 3),))
    doc = formats.encode_channel(depol)
    assert doc["in"] == {"set": "X", "size": 3}
    again = formats.decode_channel(doc)
    assert again.in_sets == depol.in_sets
    assert np.allclose(again.choi, depol.choi)

    lopsided = {"choi": formats.encode_array(np.eye(6) / 2), "in": "X", "out": {"set": "Y", "size": 2}}
    ch = formats.decode_channel(lopsided)
    assert (ch.d_in, ch.d_out) == (3, 2)


def test_kraus_shape_mismatch_is_an_input_error(tmp_path):
    path = write_doc(tmp_path / "bad.json", channel_doc([("X", 3)], [("X", 2)], [np.eye(2)]))
    with pytest.raises(InputError) as err:
        formats.load(path, "channel")
    assert err.value.diagnostics[0].startswith("channel/in")


def test_stochastic_channel_documents(tmp_path):
    noisy = ClassicalChannel.create(np.array([[0.75, 0.5], [0.25, 0.5]]), (IndexSet("X", 2),), (IndexSet("Y", 2),))
    doc = formats.encode_classical_channel(noisy)
    assert doc == {"in": "X", "out": "Y", "stochastic": [[0.75, 0.5], [0.25, 0.5]]}
    back = formats.decode_classical_channel(doc)
    assert np.array_equal(back.matrix, noisy.matrix)
    ch, _ = formats.load(write_doc(tmp_path / "n.json", {"stochastic": doc["stochastic"]}), "channel")
    assert np.isclose(ch.choi[0, 0], 0.75)
    ch.validate()
    with pytest.raises(InputError, match="stochastic matrix is invalid"):
        formats.decode_classical_channel({"stochastic": [[0.5, 0.5], [0.25, 0.5]]})


def test_classical_edges_are_bounded(tmp_path):
    path = write_doc(tmp_path / "e.json", classical_doc(2, 2, [(0, 0), (2, 1)]))
    with pytest.raises(InputError) as err:
        formats.load(path, "classical_hypergraph")
    assert err.value.diagnostics == ["edges/1: (2, 1) outside 2x2"]


def test_hypergraph_documents_are_written_and_read(tmp_path, rng):
    u = random_hypergraph(barred(IndexSet("X", 2)) + unbarred(IndexSet("Y", 3)), 2, rng)
    doc = formats.encode_quantum_hypergraph(u)
    assert [t["legs"] for t in doc["basis"]] == [doc["signature"]] * 2
    formats.write_json(tmp_path / "u.json", doc)
    loaded, _ = formats.load_hypergraph(tmp_path / "u.json")
    assert isinstance(loaded, QuantumHypergraph)
    assert loaded.legs == u.legs
    assert loaded.equals(u)

    e = ClassicalHypergraph.simple(IndexSet("P", 2), IndexSet("Q", 2), [(0, 1)])
    formats.write_json(tmp_path / "e.json", formats.encode_classical_hypergraph(e))
    loaded, _ = formats.load_hypergraph(tmp_path / "e.json")
    assert loaded.edges == {(0, 1)}
    assert loaded.x_sets[0].name == "P"

    write_doc(tmp_path / "c.json", channel_doc([("X", 2)], [("X", 2)], [np.eye(2)]))
    with pytest.raises(InputError):
        formats.load_hypergraph(tmp_path / "c.json")


def test_basis_tensors_must_match_the_signature():
    sig = [{"set": "X", "size": 2, "barred": True}, {"set": "Y", "size": 2, "barred": False}]
    unflipped = [dict(leg, barred=False) for leg in sig]
    doc = {"signature": sig, "basis": [{"legs": unflipped, "data": [[1, 0], [0, 0], [0, 0], [1, 0]]}]}
    formats.validate(doc, "quantum_hypergraph")
    with pytest.raises(InputError) as err:
        formats.decode_quantum_hypergraph(doc)
    assert err.value.diagnostics[0].startswith("basis/0: legs")


def test_non_orthonormal_basis_is_orthonormalized():
    sig = [{"set": "X", "size": 2, "barred": True}, {"set": "Y", "size": 2, "barred": False}]
    vectors = [[1, 1, 0, 0], [2, 0, 0, 0], [3, 3, 0, 0]]
    doc = {"signature": sig, "basis": [{"legs": sig, "data": [[v, 0] for v in vec]} for vec in vectors]}
    u = formats.decode_quantum_hypergraph(doc)
    assert u.rank == 2
    assert np.allclose(u.subspace.columns.conj().T @ u.subspace.columns, np.eye(2))


def test_empty_quantum_hypergraph(tmp_path):
    doc = {"signature": [{"set": "X", "size": 2, "barred": True}], "basis": []}
    u, _ = formats.load(write_doc(tmp_path / "z.json", doc), "quantum_hypergraph")
    assert u.rank == 0


def test_loc_and_tensor_witness_documents(tmp_path, binary_quad, rng):
    corr = random_tensor_pair(binary_quad, rng)
    doc = formats.encode_correlation(corr)
    assert set(doc["witness"]) == {"tensor"}
    assert set(doc["witness"]["tensor"]) == {"E", "F", "xi"}
    formats.validate(doc, "correlation")
    path = tmp_path / "g.json"
    formats.write_json(path, doc)
    decoded, _ = formats.load(path, "correlation")
    again = decoded.to_correlation(1e-8)
    assert again.kind == "q"
    assert np.allclose(again.channel.choi, corr.channel.choi, atol=1e-10)

    ident = from_loc(LocWitness.single(identity_channel((binary_quad.x,)), identity_channel((binary_quad.y,))))
    ident_doc = formats.encode_correlation(ident)
    assert ident_doc["witness"]["loc"][0]["w"] == 1.0
    assert ident_doc["witness"]["loc"][0]["phi"]["in"] == "X"
    del ident_doc["channel"]
    decoded = formats.decode_correlation(ident_doc)
    assert decoded.channel is None
    assert np.allclose(decoded.resolved_channel().choi, ident.channel.choi)


def test_commuting_witness_documents(binary_quad, rng):
    pair = random_tensor_pair(binary_quad, rng)
    corr = from_commuting_pair(pair.witness.as_commuting(), binary_quad, 1e-8)
    doc = formats.encode_correlation(corr)
    assert set(doc["witness"]) == {"commuting"}
    formats.validate(doc, "correlation")
    again = formats.decode_correlation(json.loads(formats.dumps(doc))).to_correlation(1e-8)
    assert again.kind == "qc"
    assert np.allclose(again.channel.choi, pair.channel.choi, atol=1e-10)


def test_classical_box_documents(binary_quad):
    box = pr_box(binary_quad)
    doc = {"quad": _quad_doc(binary_quad), "channel": {"stochastic": box.matrix.tolist()}, "tag": "pr"}
    formats.validate(doc, "correlation")
    decoded = formats.decode_correlation(doc)
    assert decoded.channel is None
    assert np.array_equal(decoded.classical.matrix, box.matrix)
    corr = decoded.to_correlation()
    assert corr.tag == "pr"
    assert corr.kind == "ns"


def test_instances_embed_classical_sides(tmp_path):
    doc = {
        "u1": classical_doc(2, 2, [(0, 0), (1, 1)]),
        "u2": classical_doc(2, 2, [(0, 1), (1, 0)]),
        "mode": "hom",
        "type": "loc",
    }
    inst, _ = formats.load(write_doc(tmp_path / "i.json", doc), "hom_instance")
    assert inst.mode is Mode.HOM
    assert inst.ctype is CorrelationType.LOC
    assert inst.quad == Quad(IndexSet("X2", 2), IndexSet("Y1", 2), IndexSet("X1", 2), IndexSet("Y2", 2))


def test_instances_accept_quantum_sides(tmp_path, rng):
    x1, y1 = IndexSet("X1", 2), IndexSet("Y1", 2)
    u1 = random_hypergraph(unbarred(x1) + barred(y1), 2, rng)
    doc = {"u1": formats.encode_quantum_hypergraph(u1), "u2": classical_doc(2, 2, [(0, 1)])}
    inst, _ = formats.load(write_doc(tmp_path / "q.json", doc), "hom_instance")
    assert inst.mode is Mode.QUASI
    assert inst.u1.equals(u1)
    assert inst.u2.rank == 1


def test_dumps_handles_numpy_scalars():
    text = formats.dumps({"ok": np.bool_(True), "r": np.float64(0.5)})
    assert json.loads(text) == {"ok": True, "r": 0.5}
