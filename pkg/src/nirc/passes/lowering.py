"""Lowering a graph onto a platform profile."""

from __future__ import annotations

import numpy as np

from nirc import dialects as D
from nirc import primitives as P
from nirc.errors import UnsatisfiableConstraint
from nirc.graph import Graph
from nirc.passes.constraints import PlatformProfile, check_constraints


def lif_to_cuba(graph: Graph, dt: float) -> Graph:
    """Approximate each LIF by a CuBa-LIF with a one-step synapse (tau_syn = dt)."""
    nodes = dict(graph.nodes)
    for nid, p in graph.nodes.items():
        if isinstance(p, P.LIF):
            nodes[nid] = P.CubaLIF(tau_syn=np.full(p.shape, dt), tau_mem=p.tau, r=p.r,
                                   v_leak=p.v_leak, w_in=np.ones(p.shape),
                                   threshold=p.threshold)
    return graph.with_changes(nodes=nodes)


def translate_for_profile(graph: Graph, profile: PlatformProfile, dt: float):
    """Lower ``graph`` for ``profile``.

    Returns ``(graph, config, rescalings)`` where ``rescalings`` maps each
    neuron node to the input/threshold factors of its backend translation.
    Raises UnsatisfiableConstraint when the graph cannot be made compatible
    or a neuron violates the backend's parameter constraints.
    """
    lowered = graph
    applied = []
    if "lif" not in profile.supported_kinds and "cuba_lif" in profile.supported_kinds:
        if any(isinstance(p, P.LIF) for p in graph.nodes.values()):
            lowered = lif_to_cuba(lowered, dt)
            applied.append("lif_to_cuba")
    report = check_constraints(lowered, profile, try_rewrites=True)
    if not report.compatible:
        raise UnsatisfiableConstraint(
            "; ".join(str(v) for v in report.violations))
    lowered = report.graph
    applied += list(report.rewrites)
    name = profile.dialect or "norse"
    cfg = D.named_config(name, dt)
    rescalings = {}
    for nid, p in lowered.nodes.items():
        if isinstance(p, (P.LIF, P.CubaLIF)):
            tr = D.translate_named(p, name, dt)
            entry = {"input_scale": tr.input_scale, "threshold_scale": tr.threshold_scale}
            entry.update(tr.extras)
            rescalings[nid] = entry
    return lowered, cfg, {"rewrites": applied, "nodes": rescalings}
