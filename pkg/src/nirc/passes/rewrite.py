"""Graph rewrites: higher-order (de)composition and algebraic simplification.

Matching is anchored at a candidate root node and walks a fixed pattern of at
most five nodes; roots are tried in lexicographic order and a node belongs
to at most one match.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from nirc import primitives as P
from nirc.graph import Edge, Graph

HIGHER_ORDER = ("cuba_lif", "lif", "if")
FEEDBACK_RTOL = 1e-9


@dataclass(frozen=True)
class RewriteRule:
    """A named graph-to-graph rewrite. ``direction`` is "lowering" or "raising"."""

    name: str
    direction: str
    apply: Callable[[Graph], Graph]

    def __call__(self, graph: Graph) -> Graph:
        return self.apply(graph)


def _fresh(base: str, taken) -> str:
    if base not in taken:
        return base
    k = 1
    while f"{base}_{k}" in taken:
        k += 1
    return f"{base}_{k}"


def _splice(graph: Graph, removed, added_nodes, internal_edges, port_map):
    """Replace ``removed`` nodes by ``added_nodes``.

    ``port_map`` maps ``(old_node, port, direction)`` to ``(new_node, port)``
    for re-attaching external edges; edges between removed nodes are dropped.
    """
    nodes = {k: v for k, v in graph.nodes.items() if k not in removed}
    nodes.update(added_nodes)
    edges = list(internal_edges)
    for e in graph.edges:
        src_gone, dst_gone = e.source in removed, e.target in removed
        if src_gone and dst_gone:
            continue
        source, sport = (e.source, e.source_port)
        target, tport = (e.target, e.target_port)
        if src_gone:
            source, sport = port_map[(e.source, e.source_port, "out")]
        if dst_gone:
            target, tport = port_map[(e.target, e.target_port, "in")]
        edges.append(Edge(source, target, sport, tport))
    return graph.with_changes(nodes=nodes, edges=tuple(edges))


# -- decomposition -----------------------------------------------------------


def _decompose_neuron(graph: Graph, nid: str) -> Graph:
    params = graph.nodes[nid]
    taken = set(graph.nodes) - {nid}
    if isinstance(params, P.CubaLIF):
        syn, w, mem = (_fresh(f"{nid}.{s}", taken) for s in ("syn", "w", "mem"))
        n = params.shape[0] if len(params.shape) == 1 else int(np.prod(params.shape))
        if len(params.shape) != 1:
            raise ValueError("CuBa-LIF decomposition supports 1-d populations only")
        added = {
            syn: P.LI(tau=params.tau_syn, r=params.w_in, v_leak=np.zeros(params.shape)),
            w: P.Linear(weight=np.eye(n)),
            mem: P.LIF(tau=params.tau_mem, r=params.r, v_leak=params.v_leak,
                       threshold=params.threshold),
        }
        internal = [Edge(syn, w), Edge(w, mem)]
        port_map = {
            (nid, P.INPUT, "in"): (syn, P.INPUT),
            (nid, P.RESET, "in"): (mem, P.RESET),
            (nid, P.OUTPUT, "out"): (mem, P.OUTPUT),
        }
        return _splice(graph, {nid}, added, internal, port_map)

    if len(params.shape) != 1:
        raise ValueError(f"{params.kind} decomposition supports 1-d populations only")
    if isinstance(params, P.LIF):
        core_name = "li"
        core = P.LI(tau=params.tau, r=params.r, v_leak=params.v_leak)
    elif isinstance(params, P.IF):
        core_name = "integrator"
        core = P.Integrator(r=params.r)
    else:
        return graph
    li, spike, fb = (_fresh(f"{nid}.{s}", taken) for s in (core_name, "spike", "reset"))
    added = {
        li: core,
        spike: P.Spike(threshold=params.threshold),
        fb: P.Linear(weight=np.diag(-params.threshold)),
    }
    internal = [Edge(li, spike), Edge(spike, fb), Edge(fb, li, P.OUTPUT, P.RESET)]
    port_map = {
        (nid, P.INPUT, "in"): (li, P.INPUT),
        (nid, P.RESET, "in"): (li, P.RESET),
        (nid, P.OUTPUT, "out"): (spike, P.OUTPUT),
    }
    return _splice(graph, {nid}, added, internal, port_map)


def decompose(graph: Graph, kinds=HIGHER_ORDER) -> Graph:
    """Expand higher-order neurons into their primitive compositions.

    LIF becomes LI -> Spike -> Linear(-theta) feeding the LI ``reset`` port;
    IF likewise with an Integrator; CuBa-LIF becomes LI -> Linear(I) -> LIF,
    and the inner LIF is expanded further when ``"lif"`` is requested.
    """
    kinds = set(kinds)
    for kind in HIGHER_ORDER:  # cuba_lif first: it produces a LIF
        if kind not in kinds:
            continue
        for nid in [n for n, p in graph.nodes.items() if p.kind == kind]:
            graph = _decompose_neuron(graph, nid)
    return graph


# -- recomposition -----------------------------------------------------------


def _only(edges):
    return edges[0] if len(edges) == 1 else None


def _common_base(ids, suffixes):
    bases = {i[: -len(s) - 1] for i, s in zip(ids, suffixes) if i.endswith("." + s)}
    if len(bases) == 1 and all(i.endswith("." + s) for i, s in zip(ids, suffixes)):
        return bases.pop()
    return None


def _feedback_matches(weight, threshold) -> bool:
    n = threshold.shape[0]
    if weight.shape != (n, n):
        return False
    off = weight - np.diag(np.diag(weight))
    if np.any(off != 0):
        return False
    return bool(np.allclose(np.diag(weight), -threshold, rtol=FEEDBACK_RTOL, atol=0.0))


def _match_spiking(graph: Graph, root: str, kinds=("lif", "if")):
    """Match ``root`` (LI/Integrator) -> Spike -> Linear -> root.reset."""
    core = graph.nodes[root]
    wanted = (P.LI,) * ("lif" in kinds) + (P.Integrator,) * ("if" in kinds)
    if not isinstance(core, wanted) or len(core.shape) != 1:
        return None
    out = _only(graph.outgoing(root))
    if out is None or out.target_port != P.INPUT:
        return None
    spike = out.target
    sp = graph.nodes[spike]
    if not isinstance(sp, P.Spike) or sp.shape != core.shape or len(graph.incoming(spike)) != 1:
        return None
    fb = None
    for e in graph.incoming(root, P.RESET):
        fbp = graph.nodes[e.source]
        fb_in = _only(graph.incoming(e.source))
        if (isinstance(fbp, P.Linear) and e.source not in (root, spike)
                and fb_in is not None and fb_in.source == spike
                and len(graph.outgoing(e.source)) == 1
                and _feedback_matches(fbp.weight, sp.threshold)):
            fb = e.source
            break
    if fb is None:
        return None
    if isinstance(core, P.LI):
        new = P.LIF(tau=core.tau, r=core.r, v_leak=core.v_leak, threshold=sp.threshold)
        suffixes = ("li", "spike", "reset")
    else:
        new = P.IF(r=core.r, threshold=sp.threshold)
        suffixes = ("integrator", "spike", "reset")
    ids = (root, spike, fb)
    base = _common_base(ids, suffixes)
    port_map = {
        (root, P.INPUT, "in"): (None, P.INPUT),
        (root, P.RESET, "in"): (None, P.RESET),
        (spike, P.OUTPUT, "out"): (None, P.OUTPUT),
    }
    return ids, base, new, port_map


def _match_cuba(graph: Graph, root: str):
    """Match ``root`` (LI, zero leak) -> Linear(identity) -> LIF."""
    syn = graph.nodes[root]
    if not isinstance(syn, P.LI) or len(syn.shape) != 1 or np.any(syn.v_leak != 0):
        return None
    if graph.incoming(root, P.RESET):
        return None
    e1 = _only(graph.outgoing(root))
    if e1 is None:
        return None
    w = e1.target
    wp = graph.nodes[w]
    n = syn.shape[0]
    if not isinstance(wp, P.Linear) or wp.weight.shape != (n, n) or not np.array_equal(wp.weight, np.eye(n)):
        return None
    if len(graph.incoming(w)) != 1:
        return None
    e2 = _only(graph.outgoing(w))
    if e2 is None or e2.target_port != P.INPUT:
        return None
    mem = e2.target
    mp = graph.nodes[mem]
    if not isinstance(mp, P.LIF) or mp.shape != syn.shape or len(graph.incoming(mem, P.INPUT)) != 1:
        return None
    if len({root, w, mem}) != 3:
        return None
    new = P.CubaLIF(tau_syn=syn.tau, tau_mem=mp.tau, r=mp.r, v_leak=mp.v_leak,
                    w_in=syn.r, threshold=mp.threshold)
    ids = (root, w, mem)
    base = _common_base(ids, ("syn", "w", "mem"))
    port_map = {
        (root, P.INPUT, "in"): (None, P.INPUT),
        (mem, P.RESET, "in"): (None, P.RESET),
        (mem, P.OUTPUT, "out"): (None, P.OUTPUT),
    }
    return ids, base, new, port_map


def _recompose_with(graph: Graph, matcher) -> Graph:
    used = set()
    for root in list(graph.nodes):
        if root not in graph.nodes or root in used:
            continue
        m = matcher(graph, root)
        if m is None:
            continue
        ids, base, new, port_map = m
        if used & set(ids):
            continue
        taken = set(graph.nodes) - set(ids)
        nid = base if base is not None and base not in taken else _fresh(ids[0], taken)
        pm = {k: (nid, port) for k, (_, port) in port_map.items()}
        # external edges leaving internal nodes through unmapped ports block the match
        ok = True
        for e in graph.edges:
            if e.source in ids and e.target not in ids and (e.source, e.source_port, "out") not in pm:
                ok = False
            if e.target in ids and e.source not in ids and (e.target, e.target_port, "in") not in pm:
                ok = False
        if not ok:
            continue
        graph = _splice(graph, set(ids), {nid: new}, [], pm)
        used |= set(ids) | {nid}
    return graph


def _annotate_recurrent(graph: Graph) -> Graph:
    meta = dict(graph.metadata)
    for nid, p in graph.nodes.items():
        if p.kind not in ("lif", "cuba_lif"):
            continue
        for e in graph.outgoing(nid):
            w = e.target
            if not isinstance(graph.nodes[w], P.Linear):
                continue
            ins, outs = graph.incoming(w), graph.outgoing(w)
            if (len(ins) == 1 and len(outs) == 1 and outs[0].target == nid
                    and outs[0].target_port == P.INPUT):
                meta[f"recurrent_block.{nid}"] = w
    return graph.with_changes(metadata=meta)


def recompose(graph: Graph, targets=HIGHER_ORDER) -> Graph:
    """Fold primitive compositions back into higher-order neurons.

    Passing ``"recurrent"`` in ``targets`` additionally annotates every
    LIF/CuBa-LIF population whose only recurrence is a private Linear loop
    (graph metadata key ``recurrent_block.<node>``).
    """
    targets = set(targets)
    spiking = {"if"} & targets
    if targets & {"lif", "cuba_lif"}:
        spiking.add("lif")
    if spiking:
        graph = _recompose_with(
            graph, lambda g, root: _match_spiking(g, root, spiking))
    if "cuba_lif" in targets:
        graph = _recompose_with(graph, _match_cuba)
    if "recurrent" in targets:
        graph = _annotate_recurrent(graph)
    return graph


# -- algebraic simplification -----------------------------------------------


def simplify_affine(graph: Graph) -> Graph:
    """Replace every Affine whose bias is exactly zero by a Linear."""
    nodes = dict(graph.nodes)
    changed = False
    for nid, p in graph.nodes.items():
        if isinstance(p, P.Affine) and np.all(p.bias == 0):
            nodes[nid] = P.Linear(weight=p.weight)
            changed = True
    return graph.with_changes(nodes=nodes) if changed else graph


RULES = (
    RewriteRule("simplify_affine", "lowering", simplify_affine),
    RewriteRule("decompose", "lowering", decompose),
    RewriteRule("recompose", "raising", recompose),
)
