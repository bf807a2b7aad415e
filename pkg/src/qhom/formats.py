"""JSON documents: loading, schema validation, decoding and encoding.

Numbers are complex ``[re, im]`` pairs; matrices are row-major lists of rows.
The schema lives in ``qhom/schemas/formats.schema.json``; ``docs/formats.md``
describes every document.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from importlib.resources import files
from pathlib import Path
from typing import Any, Union

import numpy as np
from jsonschema import Draft202012Validator

from .channels import Channel, ClassicalChannel, gamma_of_classical
from .correlations import (
    CommutingPairWitness,
    LocTerm,
    LocWitness,
    Quad,
    QnsCorrelation,
    StochasticOperatorMatrix,
    TensorPairWitness,
    Witness,
    from_classical,
)
from .errors import InputError, QhomError
from .homomorphisms import CorrelationType, HomInstance, Mode
from .hypergraphs import ClassicalHypergraph, QuantumHypergraph, embed_classical
from .subspaces import Subspace
from .tensors import ComplexTensor, IndexSet, Leg

log = logging.getLogger(__name__)

SCHEMA_NAME = "formats.schema.json"
KINDS = (
    "tensor",
    "channel",
    "correlation",
    "quantum_hypergraph",
    "classical_hypergraph",
    "hom_instance",
)

# a set reference inside a channel document: bare name, one index set or a list of them
SetRef = Union[str, dict, list, tuple]


def get_schema_path(schema_name: str = SCHEMA_NAME) -> Path:
    return files("qhom.schemas").joinpath(schema_name)


@lru_cache(maxsize=None)
def _schema() -> dict[str, Any]:
    return json.loads(get_schema_path().read_text(encoding="utf-8"))


@lru_cache(maxsize=None)
def _validator(kind: str) -> Draft202012Validator:
    schema = dict(_schema())
    schema["$ref"] = f"#/$defs/{kind}"
    return Draft202012Validator(schema)


def validate(data: Any, kind: str, source: str = "<input>") -> None:
    """Raise :class:`InputError` listing every schema violation as ``path: message``."""

    if kind not in KINDS:
        raise ValueError(f"unknown document kind {kind!r}")
    errs = sorted(_validator(kind).iter_errors(data), key=lambda e: list(e.path))
    if errs:
        diagnostics = [f"{'/'.join(map(str, e.path)) or '(root)'}: {e.message}" for e in errs]
        raise InputError(f"{source} is not a valid {kind} document", diagnostics)


def read_json(path: Path) -> tuple[Any, str]:
    """Parse ``path`` and return the document with the sha256 of its bytes."""

    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        data = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        where = f"line {exc.lineno} column {exc.colno}: " if isinstance(exc, json.JSONDecodeError) else ""
        raise InputError(f"{path} is not valid JSON", [f"{where}{exc}"]) from exc
    return data, hashlib.sha256(raw).hexdigest()


def _plain(obj: Any) -> Any:
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"{type(obj).__name__} is not JSON serializable")


def dumps(data: Any) -> str:
    """JSON text with numpy scalars converted to Python numbers."""

    return json.dumps(data, indent=2, default=_plain)


def write_json(path: Path, data: Any) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(data) + "\n", encoding="utf-8")
    log.info("Wrote %s", path)


# numeric encoding ------------------------------------------------------


def encode_array(arr: np.ndarray) -> Any:
    arr = np.asarray(arr, dtype=complex)
    if arr.ndim == 0:
        return [float(arr.real), float(arr.imag)]
    return [encode_array(a) for a in arr]


def decode_array(obj: Any) -> np.ndarray:
    try:
        arr = np.asarray(obj, dtype=float)
    except ValueError as exc:
        raise InputError("array rows have different lengths", [str(exc)]) from exc
    return arr[..., 0] + 1j * arr[..., 1]


def _matrix(obj: Any, field: str) -> np.ndarray:
    mat = decode_array(obj)
    if mat.ndim != 2:
        raise InputError("matrix rows have different lengths", [f"{field}: ragged matrix"])
    return mat


def _index_set(obj: dict[str, Any]) -> IndexSet:
    return IndexSet(obj["set"], obj["size"])


def _encode_set(s: IndexSet) -> dict[str, Any]:
    return {"set": s.name, "size": s.size}


def _leg(obj: dict[str, Any]) -> Leg:
    return Leg(IndexSet(obj["set"], obj["size"]), obj["barred"])


def _encode_leg(leg: Leg) -> dict[str, Any]:
    return {"set": leg.name, "size": leg.size, "barred": leg.barred}


# tensors ---------------------------------------------------------------


def decode_tensor(obj: dict[str, Any], field: str = "tensor") -> ComplexTensor:
    """Row-major ``data`` over ``legs`` in the listed order."""

    legs = tuple(_leg(leg) for leg in obj["legs"])
    data = decode_array(obj["data"])
    need = math.prod(leg.size for leg in legs)
    if data.ndim != 1 or data.size != need:
        raise InputError("tensor data does not match its legs", [f"{field}/data: {data.size} entries, expected {need}"])
    return ComplexTensor(legs, data)


def encode_tensor(t: ComplexTensor) -> dict[str, Any]:
    return {"legs": [_encode_leg(leg) for leg in t.legs], "data": encode_array(t.vector())}


# channels --------------------------------------------------------------


def _known_dim(ref: SetRef) -> int | None:
    if isinstance(ref, str):
        return None
    if isinstance(ref, tuple):
        return math.prod(s.size for s in ref)
    if isinstance(ref, dict):
        return ref["size"]
    return math.prod(s["size"] for s in ref)


def _resolve_sets(ref: SetRef, dim: int, field: str) -> tuple[IndexSet, ...]:
    """Index sets of a channel side whose total dimension ``dim`` is fixed by the payload."""

    if isinstance(ref, tuple):
        sets = ref
    elif isinstance(ref, str):
        sets = (IndexSet(ref, dim),)
    elif isinstance(ref, dict):
        sets = (_index_set(ref),)
    else:
        sets = tuple(_index_set(s) for s in ref)
    size = math.prod(s.size for s in sets)
    if size != dim:
        raise InputError("channel does not fit its index sets", [f"{field}: dimension {size}, payload needs {dim}"])
    return sets


def _choi_dims(choi: np.ndarray, in_ref: SetRef, out_ref: SetRef, field: str) -> tuple[int, int]:
    """``(d_in, d_out)`` of a Choi matrix; unsized names fall back to ``Tr J = d_in``."""

    n = choi.shape[0]
    d_in, d_out = _known_dim(in_ref), _known_dim(out_ref)
    if d_in is None and d_out is not None:
        d_in = n // d_out if d_out and n % d_out == 0 else None
    if d_in is None:
        trace = float(np.real(np.trace(choi)))
        guess = round(trace)
        if guess >= 1 and abs(trace - guess) <= 1e-6 * n and n % guess == 0:
            d_in = guess
    if d_in is None or d_in == 0 or n % d_in:
        raise InputError(
            "cannot split the Choi matrix into input and output",
            [f"{field}: give sized index sets for in and out"],
        )
    return d_in, n // d_in


def decode_channel(
    obj: dict[str, Any],
    field: str = "channel",
    in_default: SetRef = "X",
    out_default: SetRef = "Y",
) -> Channel:
    """Decode without validating complete positivity or trace preservation.

    ``{"stochastic": ...}`` documents become ``Γ_𝒩``.
    """

    if "stochastic" in obj:
        return gamma_of_classical(decode_classical_channel(obj, field, in_default, out_default))
    in_ref, out_ref = obj.get("in", in_default), obj.get("out", out_default)
    try:
        if "kraus" in obj:
            ops = [_matrix(k, f"{field}/kraus/{i}") for i, k in enumerate(obj["kraus"])]
            d_out, d_in = ops[0].shape
            ins = _resolve_sets(in_ref, d_in, f"{field}/in")
            outs = _resolve_sets(out_ref, d_out, f"{field}/out")
            return Channel.assume_valid(ins, outs, kraus=ops)
        choi = _matrix(obj["choi"], f"{field}/choi")
        if choi.shape[0] != choi.shape[1]:
            raise InputError("Choi matrix is not square", [f"{field}/choi: shape {choi.shape}"])
        d_in, d_out = _choi_dims(choi, in_ref, out_ref, field)
        ins = _resolve_sets(in_ref, d_in, f"{field}/in")
        outs = _resolve_sets(out_ref, d_out, f"{field}/out")
        return Channel.assume_valid(ins, outs, choi=choi)
    except QhomError as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError("channel does not fit its index sets", [f"{field}: {exc}"]) from exc


def decode_classical_channel(
    obj: dict[str, Any],
    field: str = "channel",
    in_default: SetRef = "X",
    out_default: SetRef = "Y",
) -> ClassicalChannel:
    """``stochastic[y][x] = 𝒩(y|x)``; columns must sum to one."""

    try:
        mat = np.asarray(obj["stochastic"], dtype=float)
    except ValueError as exc:
        raise InputError("stochastic matrix rows have different lengths", [f"{field}/stochastic: {exc}"]) from exc
    ins = _resolve_sets(obj.get("in", in_default), mat.shape[1], f"{field}/in")
    outs = _resolve_sets(obj.get("out", out_default), mat.shape[0], f"{field}/out")
    try:
        return ClassicalChannel.create(mat, ins, outs)
    except QhomError as exc:
        raise InputError("stochastic matrix is invalid", [f"{field}/stochastic: {exc}"]) from exc


def _encode_sets(sets: tuple[IndexSet, ...], bare: bool) -> Any:
    if len(sets) == 1:
        return sets[0].name if bare else _encode_set(sets[0])
    return [_encode_set(s) for s in sets]


def encode_channel(ch: Channel) -> dict[str, Any]:
    """Kraus documents name single sets bare, since the operators fix their sizes."""

    if ch.kraus is not None:
        return {
            "in": _encode_sets(ch.in_sets, True),
            "out": _encode_sets(ch.out_sets, True),
            "kraus": [encode_array(a) for a in ch.kraus],
        }
    return {
        "in": _encode_sets(ch.in_sets, False),
        "out": _encode_sets(ch.out_sets, False),
        "choi": encode_array(ch.choi),
    }


def encode_classical_channel(n: ClassicalChannel) -> dict[str, Any]:
    return {
        "in": _encode_sets(n.in_sets, True),
        "out": _encode_sets(n.out_sets, True),
        "stochastic": n.matrix.tolist(),
    }


# correlations ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CorrelationDoc:
    """A decoded correlation document that has not been checked yet.

    ``classical`` holds a ``{"stochastic": ...}`` channel payload.
    """

    quad: Quad
    channel: Channel | None
    witness: Witness | None
    classical: ClassicalChannel | None
    tag: str | None = None

    def resolved_channel(self) -> Channel:
        if self.channel is not None:
            return self.channel
        if self.classical is not None:
            return gamma_of_classical(self.classical)
        return Channel.assume_valid(self.quad.in_sets, self.quad.out_sets, choi=self.witness.choi())

    def to_correlation(self, tol: float | None = None) -> QnsCorrelation:
        if self.classical is not None and self.witness is None:
            corr = from_classical(self.classical, self.quad, tol)
        else:
            corr = QnsCorrelation.create(self.resolved_channel(), self.quad, self.witness, tol)
        if self.tag:
            corr = QnsCorrelation(corr.channel, corr.quad, corr.witness, self.tag)
        return corr


def _decode_som(obj: dict[str, Any], in_set: IndexSet, out_set: IndexSet, field: str) -> StochasticOperatorMatrix:
    blocks = _matrix(obj["blocks"], f"{field}/blocks")
    side = in_set.size * out_set.size * obj["h_dim"]
    if blocks.shape != (side, side):
        raise InputError("stochastic operator matrix has the wrong size", [f"{field}/blocks: expected {side}x{side}"])
    return StochasticOperatorMatrix(in_set, out_set, obj["h_dim"], blocks)


def _decode_witness(obj: dict[str, Any], quad: Quad) -> Witness:
    if "loc" in obj:
        return LocWitness(
            tuple(
                LocTerm(
                    float(t["w"]),
                    decode_channel(t["phi"], f"witness/loc/{i}/phi", (quad.x,), (quad.a,)),
                    decode_channel(t["psi"], f"witness/loc/{i}/psi", (quad.y,), (quad.b,)),
                )
                for i, t in enumerate(obj["loc"])
            )
        )
    kind = "tensor" if "tensor" in obj else "commuting"
    pair = obj[kind]
    e = _decode_som(pair["E"], quad.x, quad.a, f"witness/{kind}/E")
    f = _decode_som(pair["F"], quad.y, quad.b, f"witness/{kind}/F")
    xi = decode_array(pair["xi"])
    if kind == "tensor":
        return TensorPairWitness(e, f, xi)
    return CommutingPairWitness(e, f, xi)


def _encode_som(s: StochasticOperatorMatrix) -> dict[str, Any]:
    return {"h_dim": s.h_dim, "blocks": encode_array(s.matrix())}


def _encode_witness(w: Witness) -> dict[str, Any]:
    if isinstance(w, LocWitness):
        return {
            "loc": [{"w": t.weight, "phi": encode_channel(t.phi), "psi": encode_channel(t.psi)} for t in w.terms]
        }
    kind = "tensor" if isinstance(w, TensorPairWitness) else "commuting"
    return {kind: {"E": _encode_som(w.e), "F": _encode_som(w.f), "xi": encode_array(w.xi)}}


def _decode_quad(obj: dict[str, Any]) -> Quad:
    return Quad(_index_set(obj["x"]), _index_set(obj["y"]), _index_set(obj["a"]), _index_set(obj["b"]))


def decode_correlation(obj: dict[str, Any]) -> CorrelationDoc:
    quad = _decode_quad(obj["quad"])
    channel = classical = None
    if "channel" in obj:
        payload = obj["channel"]
        if "stochastic" in payload:
            classical = decode_classical_channel(payload, "channel", quad.in_sets, quad.out_sets)
        else:
            channel = decode_channel(payload, "channel", quad.in_sets, quad.out_sets)
            if not quad.matches(channel):
                raise InputError("channel and quad disagree", [f"channel: expected {quad.in_sets} -> {quad.out_sets}"])
    if classical is not None and (classical.in_sets, classical.out_sets) != (quad.in_sets, quad.out_sets):
        raise InputError("channel and quad disagree", [f"channel: expected {quad.in_sets} -> {quad.out_sets}"])
    witness = _decode_witness(obj["witness"], quad) if "witness" in obj else None
    return CorrelationDoc(quad, channel, witness, classical, obj.get("tag"))


def encode_correlation(corr: QnsCorrelation) -> dict[str, Any]:
    quad = corr.quad
    out: dict[str, Any] = {
        "quad": {k: _encode_set(getattr(quad, k)) for k in ("x", "y", "a", "b")},
        "channel": encode_channel(corr.channel),
    }
    if corr.witness is not None:
        out["witness"] = _encode_witness(corr.witness)
    if corr.tag:
        out["tag"] = corr.tag
    return out


# hypergraphs -----------------------------------------------------------


def decode_quantum_hypergraph(obj: dict[str, Any], tol: float | None = None) -> QuantumHypergraph:
    legs = tuple(_leg(leg) for leg in obj["signature"])
    vectors = [decode_tensor(t, f"basis/{i}") for i, t in enumerate(obj["basis"])]
    bad = [f"basis/{i}: legs {t.legs} differ from the signature" for i, t in enumerate(vectors) if t.legs != legs]
    if bad:
        raise InputError("basis tensors do not match the signature", bad)
    if not vectors:
        return QuantumHypergraph(Subspace.zero(legs))
    return QuantumHypergraph.from_vectors(vectors, legs, tol)


def encode_quantum_hypergraph(u: QuantumHypergraph) -> dict[str, Any]:
    return {
        "signature": [_encode_leg(leg) for leg in u.legs],
        "basis": [encode_tensor(t) for t in u.subspace.basis],
    }


def decode_classical_hypergraph(obj: dict[str, Any], x_name: str = "X", y_name: str = "Y") -> ClassicalHypergraph:
    x = IndexSet(obj.get("x_name", x_name), obj["X"])
    y = IndexSet(obj.get("y_name", y_name), obj["Y"])
    bad = [
        f"edges/{i}: {tuple(e)} outside {x.size}x{y.size}"
        for i, e in enumerate(obj["edges"])
        if e[0] >= x.size or e[1] >= y.size
    ]
    if bad:
        raise InputError("edges outside the vertex sets", bad)
    return ClassicalHypergraph.simple(x, y, (tuple(e) for e in obj["edges"]))


def encode_classical_hypergraph(e: ClassicalHypergraph) -> dict[str, Any]:
    if len(e.x_sets) != 1 or len(e.y_sets) != 1:
        raise InputError("only hypergraphs over single index sets can be written")
    return {
        "X": e.x_size,
        "Y": e.y_size,
        "x_name": e.x_sets[0].name,
        "y_name": e.y_sets[0].name,
        "edges": [list(p) for p in sorted(e.edges)],
    }


def _is_classical_doc(doc: Any) -> bool:
    return isinstance(doc, dict) and "edges" in doc


def decode_instance(obj: dict[str, Any], tol: float | None = None) -> HomInstance:
    """Classical sides are embedded: ``U₁ = Ū_{E₁}`` and ``U₂ = U_{E₂}``."""

    def side(doc: dict[str, Any], role: str) -> QuantumHypergraph:
        if _is_classical_doc(doc):
            e = decode_classical_hypergraph(doc, f"X{role}", f"Y{role}")
            u = embed_classical(e)
            return u.conjugate() if role == "1" else u
        return decode_quantum_hypergraph(doc, tol)

    u1, u2 = side(obj["u1"], "1"), side(obj["u2"], "2")
    try:
        return HomInstance(u1, u2, Mode(obj.get("mode", "quasi")), CorrelationType(obj.get("type", "ns")))
    except QhomError as exc:
        raise InputError("instance hypergraphs have the wrong signatures", [f"u1/u2: {exc}"]) from exc


def load(path: Path, kind: str) -> tuple[Any, str]:
    """Read, validate and decode ``path``; returns the decoded object and its digest."""

    data, digest = read_json(path)
    validate(data, kind, str(path))
    decoders = {
        "tensor": decode_tensor,
        "channel": decode_channel,
        "correlation": decode_correlation,
        "quantum_hypergraph": decode_quantum_hypergraph,
        "classical_hypergraph": decode_classical_hypergraph,
        "hom_instance": decode_instance,
    }
    return decoders[kind](data), digest


def load_hypergraph(path: Path, tol: float | None = None) -> tuple[QuantumHypergraph | ClassicalHypergraph, str]:
    """Classical documents carry ``edges``, quantum ones a ``signature``."""

    data, digest = read_json(path)
    if _is_classical_doc(data):
        kind = "classical_hypergraph"
    elif isinstance(data, dict) and "signature" in data:
        kind = "quantum_hypergraph"
    else:
        raise InputError(f"{path} is not a hypergraph document", ["(root): expected edges or a signature"])
    validate(data, kind, str(path))
    if kind == "classical_hypergraph":
        return decode_classical_hypergraph(data), digest
    return decode_quantum_hypergraph(data, tol), digest
