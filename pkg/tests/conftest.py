import numpy as np
import pytest

from nirc import primitives as P
from nirc.graph import Edge, Graph, chain

GOLDEN = __import__("pathlib").Path(__file__).parent / "golden"


def lif(n=1, tau=0.01, r=1.0, v_leak=0.0, threshold=1.0):
    full = lambda x: np.full(n, x, dtype=float)  # noqa: E731
    return P.LIF(tau=full(tau), r=full(r), v_leak=full(v_leak), threshold=full(threshold))


def single_lif_graph(**kw):
    n = kw.get("n", 1)
    return chain(("in", P.Input(shape=(n,))), ("lif1", lif(**kw)), ("out", P.Output()))


def _positive(rng, n, lo, hi):
    return rng.uniform(lo, hi, n)


def random_neuron(rng, kind, n):
    tau = lambda: _positive(rng, n, 2e-3, 5e-2)  # noqa: E731
    th = lambda: _positive(rng, n, 0.5, 2.0)  # noqa: E731
    if kind == "lif":
        return P.LIF(tau=tau(), r=_positive(rng, n, 0.5, 2.0), v_leak=rng.uniform(-0.2, 0.2, n),
                     threshold=th())
    if kind == "if":
        return P.IF(r=_positive(rng, n, 20.0, 200.0), threshold=th())
    if kind == "cuba_lif":
        return P.CubaLIF(tau_syn=tau(), tau_mem=tau(), r=_positive(rng, n, 0.5, 2.0),
                         v_leak=rng.uniform(-0.2, 0.2, n), w_in=_positive(rng, n, 0.5, 3.0),
                         threshold=th())
    if kind == "li":
        return P.LI(tau=tau(), r=_positive(rng, n, 0.5, 2.0), v_leak=rng.uniform(0.1, 0.3, n))
    if kind == "integrator":
        return P.Integrator(r=_positive(rng, n, 1.0, 10.0))
    raise ValueError(kind)


def random_stateless(rng, kind, n):
    if kind == "linear":
        return P.Linear(weight=rng.normal(0, 1.0, (n, n)) + 0.5)
    if kind == "affine":
        return P.Affine(weight=rng.normal(0, 1.0, (n, n)) + 0.5, bias=rng.normal(0, 0.2, n))
    if kind == "scale":
        return P.Scale(scale=rng.uniform(0.5, 2.0, n))
    if kind == "delay":
        return P.Delay(delay=rng.integers(0, 4, n) * 1e-3)
    if kind == "spike":
        return P.Spike(threshold=rng.uniform(0.2, 1.0, n))
    raise ValueError(kind)


NEURON_KINDS = ("lif", "if", "cuba_lif", "li", "integrator")
STATELESS_KINDS = ("linear", "affine", "scale", "delay", "spike")


def random_graph(rng, max_nodes=12, recurrent=True) -> Graph:
    """Random valid graph over the IR kinds: a layered DAG plus optional
    Linear recurrences around neuron nodes. All populations share one size."""
    n = int(rng.integers(1, 4))
    budget = int(rng.integers(3, max_nodes + 1))
    nodes = {"in": P.Input(shape=(n,))}
    edges = []
    order = ["in"]
    while len(nodes) < budget - 1:
        nid = f"n{len(nodes):02d}"
        if rng.random() < 0.55:
            nodes[nid] = random_neuron(rng, rng.choice(NEURON_KINDS), n)
        else:
            nodes[nid] = random_stateless(rng, rng.choice(STATELESS_KINDS), n)
        srcs = rng.choice(order, size=min(len(order), int(rng.integers(1, 3))), replace=False)
        for s in sorted(srcs):
            edges.append(Edge(str(s), nid))
        order.append(nid)
        if (recurrent and nodes[nid].stateful and len(nodes) < budget - 2
                and rng.random() < 0.3):
            rec = f"n{len(nodes):02d}"
            nodes[rec] = P.Linear(weight=rng.normal(0, 0.3, (n, n)))
            edges += [Edge(nid, rec), Edge(rec, nid)]
    nodes["out"] = P.Output()
    edges.append(Edge(order[-1], "out"))
    return Graph(nodes, edges)


def random_inputs(rng, graph, steps=100, rate=0.3, amplitude=30.0):
    out = {}
    for nid in graph.of_kind("input"):
        shape = (steps,) + tuple(graph.nodes[nid].shape)
        out[nid] = (rng.random(shape) < rate) * amplitude
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# -- acceptance reporting ----------------------------------------------------

ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS):
        ok, title, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {key:>2}. {title}: {detail}")
