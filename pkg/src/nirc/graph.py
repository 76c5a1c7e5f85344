"""IR graph data model, structural validation and shape inference."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping, Optional

from nirc import primitives as P
from nirc.errors import ParameterError, ShapeConflict, UnknownNode

NODE_ID = re.compile(r"[A-Za-z0-9_.-]+")
FORMAT_VERSION = "1.0"


@dataclass(frozen=True, order=True)
class Edge:
    source: str
    target: str
    source_port: str = P.OUTPUT
    target_port: str = P.INPUT

    def __str__(self):
        return f"{self.source}.{self.source_port} -> {self.target}.{self.target_port}"


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    code: str
    message: str
    node: Optional[str] = None
    edge: Optional[Edge] = None

    def __str__(self):
        where = self.node if self.edge is None else str(self.edge)
        where = f" [{where}]" if where else ""
        return f"{self.severity}: {self.code}{where}: {self.message}"


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable IR graph.

    ``nodes`` maps node id to its primitive parameters; the node's ports are
    derived from those parameters and never stored. Edges are kept in sorted
    order so that iteration is deterministic.
    """

    nodes: Mapping[str, P.Primitive]
    edges: tuple = ()
    metadata: Mapping[str, str] = field(default_factory=dict)
    version: str = FORMAT_VERSION

    def __post_init__(self):
        object.__setattr__(self, "nodes", {k: self.nodes[k] for k in sorted(self.nodes)})
        object.__setattr__(self, "edges", tuple(sorted(self.edges)))
        object.__setattr__(self, "metadata", {k: str(self.metadata[k]) for k in sorted(self.metadata)})

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.version == other.version
            and list(self.nodes) == list(other.nodes)
            and all(self.nodes[k] == other.nodes[k] for k in self.nodes)
            and self.edges == other.edges
            and self.metadata == other.metadata
        )

    __hash__ = None

    def ports(self, node_id: str) -> P.PortSignature:
        return self.nodes[node_id].ports()

    def incoming(self, node_id: str, port: Optional[str] = None):
        return [e for e in self.edges
                if e.target == node_id and (port is None or e.target_port == port)]

    def outgoing(self, node_id: str, port: Optional[str] = None):
        return [e for e in self.edges
                if e.source == node_id and (port is None or e.source_port == port)]

    def of_kind(self, *kinds):
        return [n for n, p in self.nodes.items() if p.kind in kinds]

    def with_changes(self, nodes=None, edges=None, metadata=None) -> "Graph":
        return Graph(
            self.nodes if nodes is None else nodes,
            self.edges if edges is None else edges,
            self.metadata if metadata is None else metadata,
            self.version,
        )


def chain(*items, metadata=None) -> Graph:
    """Build a linear pipeline from ``(node_id, params)`` pairs."""
    nodes = dict(items)
    ids = [i for i, _ in items]
    edges = [Edge(a, b) for a, b in zip(ids, ids[1:])]
    return Graph(nodes, tuple(edges), metadata or {})


def fan_in(graph: Graph, node: str) -> int:
    if node not in graph.nodes:
        raise UnknownNode(node)
    return sum(1 for e in graph.edges if e.target == node)


def fan_out(graph: Graph, node: str) -> int:
    if node not in graph.nodes:
        raise UnknownNode(node)
    return sum(1 for e in graph.edges if e.source == node)


def _reference_diagnostics(graph: Graph):
    diags = []
    for nid in graph.nodes:
        if not NODE_ID.fullmatch(nid):
            diags.append(Diagnostic("error", "bad-node-id", f"invalid node id {nid!r}", node=nid))
    seen = set()
    for e in graph.edges:
        if e in seen:
            diags.append(Diagnostic("error", "duplicate-edge", "duplicate edge", edge=e))
            continue
        seen.add(e)
        for end, port, outs in ((e.source, e.source_port, True), (e.target, e.target_port, False)):
            if end not in graph.nodes:
                diags.append(Diagnostic("error", "unknown-node", f"unknown node {end!r}", edge=e))
                continue
            sig = graph.ports(end)
            names = [p.name for p in (sig.outputs if outs else sig.inputs)]
            if port not in names:
                kind = "output" if outs else "input"
                diags.append(Diagnostic(
                    "error", "unknown-port",
                    f"node {end!r} has no {kind} port {port!r}", edge=e))
    return diags


def _topo_order(graph: Graph):
    """Kahn order over all edges; nodes on cycles are appended lexicographically."""
    indeg = {n: 0 for n in graph.nodes}
    succ = {n: [] for n in graph.nodes}
    for e in graph.edges:
        if e.source in indeg and e.target in indeg and e.source != e.target:
            indeg[e.target] += 1
            succ[e.source].append(e.target)
    ready = sorted(n for n, d in indeg.items() if d == 0)
    order = []
    while ready:
        n = ready.pop(0)
        order.append(n)
        for m in succ[n]:
            indeg[m] -= 1
            if indeg[m] == 0:
                ready.append(m)
                ready.sort()
    order += sorted(set(graph.nodes) - set(order))
    return order


def _input_shapes(graph: Graph, known_out):
    """Shape arriving at each node's "input" port, from already-known sources."""
    shapes = {}
    for e in graph.edges:
        if e.target_port != P.INPUT:
            continue
        s = known_out.get((e.source, e.source_port))
        if s is None:
            continue
        prev = shapes.setdefault(e.target, s)
        if prev != s:
            raise ShapeConflict(
                f"node {e.target!r} receives inputs of shapes {prev} and {s}")
    return shapes


def infer_shapes(graph: Graph) -> Graph:
    """Fill unknown shapes (Conv/Flatten input shapes, Output shapes) from upstream.

    Raises ShapeConflict when a port would receive two different shapes.
    """
    nodes = dict(graph.nodes)
    for _ in range(len(nodes) + 1):
        known = {}
        for nid, params in nodes.items():
            for p in params.ports().outputs:
                if p.shape is not None:
                    known[(nid, p.name)] = tuple(p.shape)
        arriving = _input_shapes(Graph(nodes, graph.edges), known)
        changed = False
        for nid in _topo_order(graph):
            params = nodes[nid]
            s = arriving.get(nid)
            if s is None:
                continue
            try:
                if isinstance(params, (P.Conv, P.Flatten)) and params.input_shape is None:
                    nodes[nid] = params.replace(input_shape=s)
                    changed = True
                elif isinstance(params, P.Output) and params.shape is None:
                    nodes[nid] = params.replace(shape=s)
                    changed = True
            except ParameterError as exc:
                raise ShapeConflict(f"node {nid!r}: {exc}") from exc
        if not changed:
            break
    return graph.with_changes(nodes=nodes)


def validate(graph: Graph) -> list:
    """Return all diagnostics; an empty list means the graph is valid."""
    diags = _reference_diagnostics(graph)
    kinds = [p.kind for p in graph.nodes.values()]
    if "input" not in kinds:
        diags.append(Diagnostic("error", "no-input", "graph has no input node"))
    if "output" not in kinds:
        diags.append(Diagnostic("error", "no-output", "graph has no output node"))
    if any(d.code in ("unknown-node", "unknown-port") for d in diags):
        return diags
    try:
        g = infer_shapes(graph)
    except ShapeConflict as exc:
        diags.append(Diagnostic("error", "shape-conflict", str(exc)))
        return diags
    for e in sorted(set(g.edges)):
        src = g.ports(e.source).output(e.source_port).shape
        dst = g.ports(e.target).input(e.target_port).shape
        if src is None or dst is None:
            diags.append(Diagnostic("error", "unknown-shape", "shape could not be inferred", edge=e))
        elif tuple(src) != tuple(dst):
            diags.append(Diagnostic(
                "error", "shape-mismatch",
                f"shape mismatch on edge: {tuple(src)} != {tuple(dst)}", edge=e))
    return diags
