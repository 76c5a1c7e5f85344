"""Symmetric per-tensor post-training weight quantization."""

from __future__ import annotations

import numpy as np

from nirc import primitives as P
from nirc.graph import Graph


def quantize_tensor(w, bits: int):
    """Return ``(integers, scale)`` with ``w ~= integers * scale``.

    ``scale = max|w| / (2**(bits-1) - 1)``; values are rounded half-to-even
    and clamped to the symmetric range. An all-zero tensor gets scale 1.
    """
    if not 2 <= bits <= 32:
        raise ValueError("weight_bits must be in [2, 32]")
    w = np.asarray(w, dtype=np.float64)
    qmax = 2 ** (bits - 1) - 1
    peak = float(np.max(np.abs(w))) if w.size else 0.0
    if peak == 0.0:
        return np.zeros_like(w), 1.0
    q = np.clip(np.rint(w * qmax / peak), -qmax, qmax)
    return q + 0.0, peak / qmax


def dequantize(q, scale):
    return np.asarray(q, dtype=np.float64) * scale


def quantize(graph: Graph, weight_bits: int = 8):
    """Quantize every weight tensor (Affine, Linear, Conv) of ``graph``.

    Returns the graph with integer-valued weights plus the per-node scales.
    Biases are expressed in units of the weight scale (inputs are event
    counts, so the input scale is 1). Scales are also recorded in the graph
    metadata under ``quant.<node>.scale``.
    """
    nodes = dict(graph.nodes)
    scales = {}
    meta = dict(graph.metadata)
    for nid, p in graph.nodes.items():
        if not isinstance(p, (P.Affine, P.Linear, P.Conv)):
            continue
        q, scale = quantize_tensor(p.weight, weight_bits)
        changes = {"weight": q}
        if isinstance(p, (P.Affine, P.Conv)):
            changes["bias"] = np.rint(p.bias / scale) + 0.0
        nodes[nid] = p.replace(**changes)
        scales[nid] = scale
        meta[f"quant.{nid}.scale"] = repr(scale)
    if scales:
        meta["quant.weight_bits"] = str(weight_bits)
    return graph.with_changes(nodes=nodes, metadata=meta), scales
