"""CSV/JSON encodings of input streams and simulation traces.

CSV layout: one header row, then one row per timestep. Columns are named
``node.port[index]`` with ``index`` the row-major flat element index.
"""

from __future__ import annotations

import csv
import io
import json
import re
from pathlib import Path

import numpy as np

from nirc.graph import Graph

_COLUMN = re.compile(r"^(?P<node>[A-Za-z0-9_.-]+?)(?:\.(?P<port>[A-Za-z_]+))?\[(?P<index>\d+)\]$")


def _fmt(x) -> str:
    return repr(float(x) + 0.0)


def parse_column(name: str):
    m = _COLUMN.match(name.strip())
    if not m:
        raise ValueError(f"bad column name {name!r}; expected node.port[index]")
    return m.group("node"), m.group("port") or "output", int(m.group("index"))


def inputs_from_csv(text: str, graph: Graph) -> dict:
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r]
    if not rows:
        raise ValueError("empty input CSV")
    header, body = rows[0], rows[1:]
    data = np.array([[float(x) for x in r] for r in body], dtype=np.float64).reshape(len(body), len(header))
    streams = {}
    for nid in graph.of_kind("input"):
        shape = tuple(graph.nodes[nid].shape)
        streams[nid] = np.zeros((len(body), int(np.prod(shape))))
    for col, name in enumerate(header):
        node, port, index = parse_column(name)
        if f"{node}.{port}" in streams and node not in streams:
            node = f"{node}.{port}"
        if node not in streams:
            raise ValueError(f"column {name!r} does not name an input node")
        if index >= streams[node].shape[1]:
            raise ValueError(f"column {name!r} indexes past the node's size")
        streams[node][:, index] = data[:, col]
    return {n: a.reshape((len(body),) + tuple(graph.nodes[n].shape)) for n, a in streams.items()}


def inputs_to_csv(streams: dict) -> str:
    cols = []
    for node in sorted(streams):
        arr = np.asarray(streams[node], dtype=np.float64)
        flat = arr.reshape(arr.shape[0], -1)
        cols += [(f"{node}.output[{k}]", flat[:, k]) for k in range(flat.shape[1])]
    return _table(cols)


def inputs_from_json(text: str, graph: Graph) -> dict:
    doc = json.loads(text)
    return {n: np.asarray(doc[n], dtype=np.float64) for n in graph.of_kind("input") if n in doc}


def _table(cols) -> str:
    buf = io.StringIO()
    buf.write(",".join(name for name, _ in cols) + "\n")
    steps = len(cols[0][1]) if cols else 0
    for t in range(steps):
        buf.write(",".join(_fmt(series[t]) for _, series in cols) + "\n")
    return buf.getvalue()


def trace_to_csv(trace) -> str:
    return _table(trace.columns())


def trace_to_json(trace) -> str:
    return json.dumps(trace.to_json(), sort_keys=True, separators=(",", ":")) + "\n"


def load_inputs(path, graph: Graph) -> dict:
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        return inputs_from_json(text, graph)
    return inputs_from_csv(text, graph)


def write_trace(trace, path) -> None:
    path = Path(path)
    path.write_text(trace_to_json(trace) if path.suffix == ".json" else trace_to_csv(trace))
