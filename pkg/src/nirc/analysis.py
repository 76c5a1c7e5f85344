"""Cross-dialect divergence: rate vectors, cosine similarity, spike alignment, reports."""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from nirc import dialects as D
from nirc import engine
from nirc.errors import LengthMismatch

DEFAULT_SHIFT_WINDOW = 5


def rate_vector(events, burn_in: int = 0) -> np.ndarray:
    """Per-element mean event count per step over ``events[burn_in:]``."""
    events = np.asarray(events, dtype=np.float64)
    window = events[burn_in:]
    if window.shape[0] == 0:
        return np.zeros(int(np.prod(events.shape[1:])))
    return window.reshape(window.shape[0], -1).mean(axis=0)


def cosine_similarity(r1, r2) -> float:
    r1 = np.asarray(r1, dtype=np.float64).ravel()
    r2 = np.asarray(r2, dtype=np.float64).ravel()
    if r1.shape != r2.shape:
        raise LengthMismatch(f"rate vectors have lengths {r1.size} and {r2.size}")
    n1, n2 = np.linalg.norm(r1), np.linalg.norm(r2)
    if n1 == 0 and n2 == 0:
        return 1.0
    if n1 == 0 or n2 == 0:
        return 0.0
    return float(np.clip(np.dot(r1, r2) / (n1 * n2), -1.0, 1.0))


@dataclass(frozen=True)
class TrainComparison:
    count_a: int
    count_b: int
    best_shift: int
    exact: bool

    def to_json(self):
        return {"count_a": self.count_a, "count_b": self.count_b,
                "best_shift": self.best_shift, "exact_match_at_shift": self.exact}


def shift(events, k: int) -> np.ndarray:
    """Delay ``events`` by ``k`` steps (negative: advance), zero-filled."""
    events = np.asarray(events)
    out = np.zeros_like(events)
    n = events.shape[0]
    if k >= 0:
        if k < n:
            out[k:] = events[: n - k]
    elif -k < n:
        out[: n + k] = events[-k:]
    return out


def spike_train_compare(a, b, window: int = DEFAULT_SHIFT_WINDOW) -> TrainComparison:
    """Find the shift ``k`` in ``[-window, window]`` that best maps ``a`` onto ``b``.

    ``best_shift = k`` means ``b`` lags ``a`` by ``k`` steps. Exact matches win,
    then the number of coincident events, then the smaller ``|k|``.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise LengthMismatch(f"event series have shapes {a.shape} and {b.shape}")
    best = None
    for k in range(-window, window + 1):
        sa = shift(a, k)
        exact = bool(np.array_equal(sa, b))
        hits = float(np.minimum(sa, b).sum())
        key = (exact, hits, -abs(k), k)
        if best is None or key > best[0]:
            best = (key, k, exact)
    _, k, exact = best
    return TrainComparison(int(a.sum()), int(b.sum()), k, exact)


@dataclass(frozen=True)
class ComparisonMatrix:
    labels: tuple
    values: np.ndarray

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("," + ",".join(self.labels) + "\n")
        for label, row in zip(self.labels, self.values):
            buf.write(label + "," + ",".join(repr(float(v)) for v in row) + "\n")
        return buf.getvalue()


def comparison_matrix(rates: dict) -> ComparisonMatrix:
    labels = tuple(rates)
    n = len(labels)
    values = np.ones((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            values[i, j] = values[j, i] = cosine_similarity(rates[labels[i]], rates[labels[j]])
    return ComparisonMatrix(labels, values)


@dataclass
class DialectComparison:
    matrix: ComparisonMatrix
    pairs: dict
    traces: dict = field(default_factory=dict)
    node: str = ""


def _as_config(d, dt):
    if isinstance(d, D.DialectConfig):
        return d
    return D.named_config(d, dt)


def compare_dialects(graph, inputs, dialects, node: str, dt: float = 1e-3,
                     burn_in: int = 0, window: int = DEFAULT_SHIFT_WINDOW) -> DialectComparison:
    """Run ``graph`` once per dialect and compare the events emitted by ``node``.

    ``dialects`` holds names or :class:`DialectConfig` objects; labels are the
    config names and must be unique. Results are ordered by label.
    """
    configs = {}
    for d in dialects:
        cfg = _as_config(d, dt)
        if cfg.name in configs:
            raise ValueError(f"duplicate dialect label {cfg.name!r}")
        configs[cfg.name] = cfg
    labels = sorted(configs)
    sched = engine.build_schedule(graph)
    traces = {
        label: engine.run(graph, configs[label], inputs, record=[node], schedule=sched)
        for label in labels
    }
    events = {label: traces[label].outputs[node] for label in labels}
    rates = {label: rate_vector(events[label], burn_in) for label in labels}
    pairs = {}
    for i, a in enumerate(labels):
        for b in labels[i + 1:]:
            pairs[(a, b)] = spike_train_compare(events[a], events[b], window)
    return DialectComparison(comparison_matrix(rates), pairs, traces, node)


# -- report ------------------------------------------------------------------

_PANEL_H = 90
_WIDTH = 640
_MARGIN = 40


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def render_svg(traces: dict, node: str) -> str:
    """Raster of events plus normalised membrane trace, one panel per label."""
    labels = list(traces)
    height = _MARGIN + _PANEL_H * len(labels) + 10
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{height}" '
        f'viewBox="0 0 {_WIDTH} {height}">',
        f'<text x="{_MARGIN}" y="20" font-family="monospace" font-size="12">node {node}</text>',
    ]
    plot_w = _WIDTH - 2 * _MARGIN
    for row, label in enumerate(labels):
        tr = traces[label]
        events = tr.outputs[node].reshape(tr.steps, -1)
        top = _MARGIN + row * _PANEL_H
        steps = max(tr.steps, 1)
        xs = lambda t: _MARGIN + plot_w * t / steps  # noqa: E731
        out.append(f'<text x="{_MARGIN}" y="{top + 10}" font-family="monospace" '
                   f'font-size="10">{label}</text>')
        states = tr.states.get(node, {})
        if "v" in states:
            v = states["v"].reshape(tr.steps, -1)[:, 0]
            lo, hi = float(v.min()), float(v.max())
            span = hi - lo if hi > lo else 1.0
            pts = " ".join(
                f"{_fmt(xs(t))},{_fmt(top + 60 - 45 * (val - lo) / span)}"
                for t, val in enumerate(v)
            )
            out.append(f'<polyline fill="none" stroke="#1f77b4" stroke-width="1" points="{pts}"/>')
        n_el = events.shape[1]
        for t, k in zip(*np.nonzero(events)):
            y = top + 65 + 20 * k / max(n_el, 1)
            out.append(f'<line x1="{_fmt(xs(t))}" y1="{_fmt(y)}" x2="{_fmt(xs(t))}" '
                       f'y2="{_fmt(y + 20 / max(n_el, 1))}" stroke="black"/>')
        out.append(f'<line x1="{_MARGIN}" y1="{top + 85}" x2="{_MARGIN + plot_w}" '
                   f'y2="{top + 85}" stroke="#999"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def summary_json(result: DialectComparison) -> dict:
    m = result.matrix
    return {
        "node": result.node,
        "labels": list(m.labels),
        "similarity": [[float(v) for v in row] for row in m.values],
        "counts": {label: int(tr.outputs[result.node].sum()) for label, tr in sorted(result.traces.items())},
        "pairs": {f"{a}|{b}": c.to_json() for (a, b), c in sorted(result.pairs.items())},
        "configs": {label: tr.config for label, tr in sorted(result.traces.items())},
    }


def emit_report(result: DialectComparison, path) -> list:
    """Write ``matrix.csv``, ``summary.json`` and ``raster.svg`` into ``path``.

    With no recorded traces only the summary is written. Returns the paths.
    """
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    written = []
    summary = path / "summary.json"
    if not result.traces:
        summary.write_text(json.dumps({"node": result.node, "labels": []}, sort_keys=True, indent=1) + "\n")
        return [summary]
    csv = path / "matrix.csv"
    csv.write_text(result.matrix.to_csv())
    written.append(csv)
    summary.write_text(json.dumps(summary_json(result), sort_keys=True, indent=1) + "\n")
    written.append(summary)
    svg = path / "raster.svg"
    svg.write_text(render_svg(result.traces, result.node))
    written.append(svg)
    return written
