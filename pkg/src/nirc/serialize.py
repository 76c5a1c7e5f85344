"""Canonical JSON serialization of graphs (``.nir.json``).

Canonical form: UTF-8, keys sorted, no insignificant whitespace, floats in
shortest round-trip decimal, tensors as ``{"shape": [...], "data": [...]}``
with row-major nested data. Negative zero is normalised to ``0.0`` so that
structurally equal graphs always produce identical bytes.
"""

from __future__ import annotations

import dataclasses
import json

import numpy as np

from nirc import primitives as P
from nirc.errors import ParameterError, ParseError, ValidationError, VersionError
from nirc.graph import FORMAT_VERSION, Edge, Graph, validate

SUPPORTED_VERSIONS = (FORMAT_VERSION,)


def dumps_canonical(obj) -> bytes:
    return json.dumps(
        obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False
    ).encode("utf-8")


def tensor_to_json(arr: np.ndarray) -> dict:
    arr = np.asarray(arr, dtype=np.float64) + 0.0  # drops negative zero
    return {"shape": list(arr.shape), "data": arr.tolist()}


def tensor_from_json(obj, where: str) -> np.ndarray:
    if not isinstance(obj, dict) or set(obj) != {"shape", "data"}:
        raise ParseError("tensor must be an object with 'shape' and 'data'", where)
    try:
        arr = np.array(obj["data"], dtype=np.float64)
        shape = tuple(int(s) for s in obj["shape"])
    except (TypeError, ValueError) as exc:
        raise ParseError(f"bad tensor: {exc}", where) from exc
    if arr.shape != shape:
        raise ParseError(f"tensor data has shape {arr.shape}, declared {shape}", where)
    return arr


def params_to_json(params: P.Primitive) -> dict:
    out = {"kind": params.kind}
    body = {}
    for f in dataclasses.fields(params):
        value = getattr(params, f.name)
        if f.name in params.tensor_fields:
            body[f.name] = tensor_to_json(value)
        elif value is None:
            body[f.name] = None
        elif isinstance(value, tuple):
            body[f.name] = [int(v) for v in value]
        else:
            body[f.name] = int(value)
    out["params"] = body
    return out


def params_from_json(obj, where: str) -> P.Primitive:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ParseError("node must be an object with a 'kind'", where)
    cls = P.KINDS.get(obj["kind"])
    if cls is None:
        raise ParseError(f"unknown primitive kind {obj['kind']!r}", where + "/kind")
    body = obj.get("params", {})
    if not isinstance(body, dict):
        raise ParseError("'params' must be an object", where + "/params")
    names = {f.name for f in dataclasses.fields(cls)}
    extra = set(body) - names
    if extra:
        raise ParseError(f"unexpected parameters {sorted(extra)}", where + "/params")
    kwargs = {}
    for name, value in body.items():
        loc = f"{where}/params/{name}"
        if name in cls.tensor_fields:
            kwargs[name] = tensor_from_json(value, loc)
        elif value is None or isinstance(value, int):
            kwargs[name] = value
        elif isinstance(value, list) and all(isinstance(v, int) for v in value):
            kwargs[name] = tuple(value)
        else:
            raise ParseError("expected an integer or a list of integers", loc)
    try:
        return cls(**kwargs)
    except (ParameterError, TypeError, ValueError) as exc:
        raise ParseError(str(exc), where) from exc


def graph_to_json(graph: Graph) -> dict:
    return {
        "nir_version": graph.version,
        "nodes": {nid: params_to_json(p) for nid, p in graph.nodes.items()},
        "edges": [
            {"source": e.source, "source_port": e.source_port,
             "target": e.target, "target_port": e.target_port}
            for e in graph.edges
        ],
        "metadata": dict(graph.metadata),
    }


def graph_from_json(doc) -> Graph:
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object", "")
    version = doc.get("nir_version")
    if version is None:
        raise ParseError("missing 'nir_version'", "/nir_version")
    if version not in SUPPORTED_VERSIONS:
        raise VersionError(f"unsupported format version {version!r}")
    extra = set(doc) - {"nir_version", "nodes", "edges", "metadata"}
    if extra:
        raise ParseError(f"unexpected fields {sorted(extra)}", "")
    nodes_doc = doc.get("nodes")
    if not isinstance(nodes_doc, dict):
        raise ParseError("'nodes' must be an object", "/nodes")
    nodes = {nid: params_from_json(n, f"/nodes/{nid}") for nid, n in nodes_doc.items()}
    edges = []
    edges_doc = doc.get("edges", [])
    if not isinstance(edges_doc, list):
        raise ParseError("'edges' must be an array", "/edges")
    for k, e in enumerate(edges_doc):
        keys = {"source", "source_port", "target", "target_port"}
        if not isinstance(e, dict) or set(e) != keys or not all(isinstance(e[x], str) for x in keys):
            raise ParseError(f"edge needs string fields {sorted(keys)}", f"/edges/{k}")
        edges.append(Edge(e["source"], e["target"], e["source_port"], e["target_port"]))
    metadata = doc.get("metadata", {})
    if not isinstance(metadata, dict) or not all(isinstance(v, str) for v in metadata.values()):
        raise ParseError("'metadata' must map strings to strings", "/metadata")
    return Graph(nodes, tuple(edges), metadata, version)


def serialize(graph: Graph, check: bool = True) -> bytes:
    if check:
        diags = validate(graph)
        if diags:
            raise ValidationError(diags)
    return dumps_canonical(graph_to_json(graph))


def deserialize(data) -> Graph:
    if isinstance(data, (bytes, bytearray)):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"not UTF-8: {exc}", f"byte {exc.start}") from exc
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"line {exc.lineno} column {exc.colno}") from exc
    return graph_from_json(doc)


def save(graph: Graph, path) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize(graph))
        fh.write(b"\n")


def load(path) -> Graph:
    with open(path, "rb") as fh:
        return deserialize(fh.read())
