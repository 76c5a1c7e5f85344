"""Deterministic discrete-time execution of graphs.

Each step visits nodes in schedule order. Forward edges deliver values of the
current step; back-edges (recurrent connections) deliver the previous step's
value, zero at ``t = 0``. Edges into a ``reset`` port deliver same-step
values and are applied after every node of the step has been evaluated.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from nirc import dialects as D
from nirc import primitives as P
from nirc.errors import CycleWithoutState, ShapeMismatch, ValidationError
from nirc.graph import Edge, Graph, infer_shapes, validate


@dataclass(frozen=True)
class Schedule:
    order: tuple
    back_edges: frozenset
    reset_edges: frozenset


def _delays_recurrence(params) -> bool:
    return params.stateful or isinstance(params, P.Delay)


def build_schedule(graph: Graph) -> Schedule:
    """Topological order plus the set of cycle-closing edges.

    Back-edges are found by depth-first search started from the Input nodes,
    then from every other node, all in lexicographic order. Every back-edge
    must end in a stateful or Delay node.
    """
    diags = validate(graph)
    if diags:
        raise ValidationError(diags)
    reset_edges = frozenset(e for e in graph.edges if e.target_port == P.RESET)
    flow = [e for e in graph.edges if e not in reset_edges]
    succ = {n: [] for n in graph.nodes}
    for e in flow:
        succ[e.source].append(e)
    for n in succ:
        succ[n].sort(key=lambda e: (e.target, e.target_port, e.source_port))

    WHITE, GRAY, BLACK = 0, 1, 2
    color = {n: WHITE for n in graph.nodes}
    back = set()
    roots = graph.of_kind("input") + [n for n in graph.nodes if graph.nodes[n].kind != "input"]
    for root in roots:
        if color[root] != WHITE:
            continue
        color[root] = GRAY
        stack = [(root, iter(succ[root]))]
        while stack:
            node, it = stack[-1]
            e = next(it, None)
            if e is None:
                color[node] = BLACK
                stack.pop()
                continue
            if color[e.target] == GRAY:
                back.add(e)
            elif color[e.target] == WHITE:
                color[e.target] = GRAY
                stack.append((e.target, iter(succ[e.target])))
    for e in sorted(back):
        if not _delays_recurrence(graph.nodes[e.target]):
            raise CycleWithoutState(
                f"cycle closed by {e} passes only through stateless nodes")

    indeg = {n: 0 for n in graph.nodes}
    for e in flow:
        if e not in back:
            indeg[e.target] += 1
    heap = [n for n, d in indeg.items() if d == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        n = heapq.heappop(heap)
        order.append(n)
        for e in succ[n]:
            if e in back:
                continue
            indeg[e.target] -= 1
            if indeg[e.target] == 0:
                heapq.heappush(heap, e.target)
    if len(order) != len(graph.nodes):  # pragma: no cover - DFS guarantees a DAG
        raise CycleWithoutState("could not order graph")
    return Schedule(tuple(order), frozenset(back), reset_edges)


@dataclass
class SimulationTrace:
    """Recorded series of one run.

    ``outputs[node]`` is ``T x shape`` (emitted values or events);
    ``states[node]`` maps a state name (``"v"``, ``"u"``) to ``T x shape``.
    """

    dt: float
    steps: int
    dialect: str
    config: dict
    outputs: dict = field(default_factory=dict)
    states: dict = field(default_factory=dict)
    overflow: dict = field(default_factory=dict)

    def columns(self):
        """Flattened ``(name, series)`` pairs in deterministic column order."""
        cols = []
        for node in sorted(set(self.outputs) | set(self.states)):
            series = []
            if node in self.outputs:
                series.append(("output", self.outputs[node]))
            for var in sorted(self.states.get(node, {})):
                series.append((var, self.states[node][var]))
            for var, arr in series:
                flat = arr.reshape(arr.shape[0], -1)
                for k in range(flat.shape[1]):
                    cols.append((f"{node}.{var}[{k}]", flat[:, k]))
        return cols

    def to_json(self) -> dict:
        return {
            "dt": self.dt,
            "steps": self.steps,
            "dialect": self.dialect,
            "config": self.config,
            "outputs": {n: (a + 0.0).tolist() for n, a in sorted(self.outputs.items())},
            "states": {
                n: {v: (a + 0.0).tolist() for v, a in sorted(s.items())}
                for n, s in sorted(self.states.items())
            },
            "overflow": dict(sorted(self.overflow.items())),
        }


def _state_vars(params, state):
    if isinstance(params, P.CubaLIF):
        return {"u": state[0], "v": state[1]}
    return {"v": state}


def _check_inputs(graph: Graph, inputs: Mapping):
    names = graph.of_kind("input")
    missing = [n for n in names if n not in inputs]
    if missing:
        raise ValueError(f"no input stream for input nodes {missing}")
    unknown = sorted(set(inputs) - set(names))
    if unknown:
        raise ValueError(f"input streams for unknown input nodes {unknown}")
    arrays = {n: np.asarray(inputs[n], dtype=np.float64) for n in names}
    lengths = {a.shape[0] for a in arrays.values() if a.ndim}
    if len(lengths) > 1:
        raise ShapeMismatch(f"input streams have different lengths {sorted(lengths)}")
    for n, a in arrays.items():
        want = tuple(graph.nodes[n].shape)
        if a.shape[1:] != want:
            raise ShapeMismatch(f"input {n!r}: expected T x {want}, got {a.shape}")
    return arrays, (lengths.pop() if lengths else 0)


def run(graph: Graph, cfg: D.DialectConfig, inputs: Mapping, record=(),
        schedule: Optional[Schedule] = None) -> SimulationTrace:
    """Simulate ``graph`` under ``cfg``.

    ``inputs`` maps each Input node id to a ``T x shape`` array. Output nodes
    are always recorded; ``record`` adds further nodes (outputs and states).
    """
    graph = infer_shapes(graph)
    schedule = schedule or build_schedule(graph)
    streams, steps = _check_inputs(graph, inputs)
    record = set(record) | set(graph.of_kind("output"))
    unknown = record - set(graph.nodes)
    if unknown:
        raise ValueError(f"cannot record unknown nodes {sorted(unknown)}")

    in_shape = {}
    for nid, params in graph.nodes.items():
        ports = params.ports()
        in_shape[nid] = {p.name: tuple(p.shape) for p in ports.inputs}
    incoming = {n: {} for n in graph.nodes}
    for e in graph.edges:
        if e not in schedule.reset_edges:
            incoming[e.target].setdefault(e.target_port, []).append(e)
    reset_in = {}
    for e in sorted(schedule.reset_edges):
        reset_in.setdefault(e.target, []).append(e)

    state = {n: D.initial_state(p, cfg) for n, p in graph.nodes.items() if p.stateful}
    counters = {n: D.OverflowCounter() for n in graph.nodes}
    delay_steps = {n: p.steps(cfg.dt) for n, p in graph.nodes.items() if isinstance(p, P.Delay)}
    delay_buf = {n: np.zeros((int(k.max()) + 1,) + k.shape) for n, k in delay_steps.items()}
    spike_k = int(cfg.spike_delay_steps)
    spike_fifo = {n: [np.zeros(p.shape)] * spike_k
                  for n, p in graph.nodes.items() if p.spiking and spike_k}
    prev = {}
    outputs = {n: [] for n in record}
    states = {n: {} for n in record if graph.nodes[n].stateful}

    def gather(nid, port, current):
        values = []
        for e in incoming[nid].get(port, ()):
            src = prev if e in schedule.back_edges else current
            value = src.get((e.source, e.source_port))
            values.append(np.zeros(in_shape[nid][port]) if value is None else value)
        return fan_in_sum(values, in_shape[nid][port])

    for t in range(steps):
        current = {}
        for nid in schedule.order:
            params = graph.nodes[nid]
            if isinstance(params, P.Input):
                out = streams[nid][t]
                if cfg.fixed:
                    out = D.saturate(np.rint(out), cfg.accumulator_bits, counters[nid])
            elif isinstance(params, P.Output):
                out = gather(nid, P.INPUT, current)
            elif isinstance(params, P.Delay):
                buf = delay_buf[nid]
                buf[1:] = buf[:-1].copy()
                buf[0] = gather(nid, P.INPUT, current)
                out = np.take_along_axis(buf, delay_steps[nid][None], axis=0)[0]
            elif params.stateful:
                x = gather(nid, P.INPUT, current)
                state[nid], out = D.step(params, cfg, state[nid], x, counters[nid])
                if nid in spike_fifo:
                    spike_fifo[nid].append(out)
                    out = spike_fifo[nid].pop(0)
            else:
                out = P.stateless_apply(params, gather(nid, P.INPUT, current))
                if cfg.fixed:
                    out = D.saturate(np.rint(out), cfg.accumulator_bits, counters[nid])
            current[(nid, P.OUTPUT)] = np.asarray(out, dtype=np.float64)
        for nid, edges in reset_in.items():
            r = gather_reset(edges, current, in_shape[nid][P.RESET])
            s = state[nid]
            if isinstance(s, tuple):
                state[nid] = (s[0], D.apply_reset_input(s[1], r, cfg).astype(s[1].dtype))
            else:
                state[nid] = D.apply_reset_input(s, r, cfg).astype(s.dtype)
        for nid in outputs:
            outputs[nid].append(current[(nid, P.OUTPUT)])
        for nid in states:
            for var, val in _state_vars(graph.nodes[nid], state[nid]).items():
                states[nid].setdefault(var, []).append(np.asarray(val, dtype=np.float64))
        prev = current

    def stack(series, nid):
        shape = graph.nodes[nid].ports()
        if series:
            return np.array(series)
        port = shape.inputs[0] if isinstance(graph.nodes[nid], P.Output) else shape.outputs[0]
        return np.zeros((0,) + tuple(port.shape))

    return SimulationTrace(
        dt=cfg.dt,
        steps=steps,
        dialect=cfg.name,
        config=cfg.to_json(),
        outputs={n: stack(s, n) for n, s in outputs.items()},
        states={n: {v: np.array(s) for v, s in d.items()} for n, d in states.items()},
        overflow={n: c.count for n, c in counters.items() if c.count},
    )


def fan_in_sum(values, shape):
    """Element-wise sum of converging edges, independent of edge order.

    One or two terms are added directly (a single rounding); longer sums
    are correctly rounded with ``math.fsum``.
    """
    if not values:
        return np.zeros(shape)
    if len(values) == 1:
        return values[0]
    if len(values) == 2:
        return values[0] + values[1]
    stacked = np.stack([np.asarray(v, dtype=np.float64) for v in values]).reshape(len(values), -1)
    return np.array([math.fsum(col) for col in stacked.T]).reshape(shape)


def gather_reset(edges, current, shape):
    return fan_in_sum([current[(e.source, e.source_port)] for e in edges], shape)


def _rk4(f, x, h):
    k1 = f(x)
    k2 = f(x + 0.5 * h * k1)
    k3 = f(x + 0.5 * h * k2)
    k4 = f(x + h * k3)
    return x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def run_reference_ode(node, inputs, dt: float, substeps: int = 100,
                      reset: D.Reset = D.Reset.SUBTRACTIVE, state=None):
    """High-resolution integration of a single stateful node.

    ``node`` is a primitive or a graph holding exactly one stateful node.
    Inputs are held constant over each coarse step of length ``dt`` and the
    ODE is integrated with classical RK4 at ``dt / substeps``; threshold and
    reset jumps (spiking kinds) are checked at every fine step.

    Returns ``(times, states)``, with ``T * substeps + 1`` samples. For
    CuBa-LIF the state axis 0 holds ``(u, v)``.
    """
    if isinstance(node, Graph):
        stateful = [p for p in node.nodes.values() if p.stateful]
        if len(stateful) != 1:
            raise ValueError("reference integration needs exactly one stateful node")
        node = stateful[0]
    if substeps < 100:
        raise ValueError("reference integration needs dt_fine <= dt / 100")
    reset = D.Reset(reset)
    inputs = np.asarray(inputs, dtype=np.float64)
    h = dt / substeps
    cuba = isinstance(node, P.CubaLIF)
    if state is None:
        v0 = node.v_leak if isinstance(node, (P.LI, P.LIF, P.CubaLIF)) else np.zeros(node.shape)
        state = np.stack([np.zeros(node.shape), v0]) if cuba else np.array(v0, dtype=np.float64)
    x = np.array(state, dtype=np.float64)
    out = [x.copy()]
    for i in inputs:
        if cuba:
            def f(s, i=i):
                return np.stack(P.continuous_rhs(node, (s[0], s[1]), i))
        else:
            def f(s, i=i):
                return P.continuous_rhs(node, s, i)
        for _ in range(substeps):
            x = _rk4(f, x, h)
            if node.spiking:
                v = x[1] if cuba else x
                fired = v >= node.threshold
                v = np.where(fired, 0.0 if reset is D.Reset.HARD else v - node.threshold, v)
                if cuba:
                    x = np.stack([x[0], v])
                else:
                    x = v
            out.append(x.copy())
    times = np.arange(len(out)) * h
    return times, np.array(out)
