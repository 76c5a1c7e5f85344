"""Acceptance suite: one test per criterion, each reported as PASS/FAIL in
the terminal summary (and printed when run with ``-s``)."""

import contextlib
import json
import math
import time

import numpy as np
import pytest

from nirc import analysis as A
from nirc import dialects as D
from nirc import passes
from nirc import primitives as P
from nirc.engine import run
from nirc.graph import Edge, Graph, chain
from nirc.serialize import deserialize, load, serialize
from nirc.streams import load_inputs

from conftest import ACCEPTANCE_RESULTS, GOLDEN, random_graph, random_inputs
from test_serialize import every_kind_graph


class Criterion:
    def __init__(self, number, title):
        self.number, self.title, self.detail = number, title, ""

    def note(self, text):
        self.detail = text


@contextlib.contextmanager
def criterion(number, title):
    c = Criterion(number, title)
    try:
        yield c
    except BaseException as exc:
        ACCEPTANCE_RESULTS[number] = (False, title, f"{type(exc).__name__}: {exc}".splitlines()[0])
        print(f"FAIL {number}. {title}")
        raise
    ACCEPTANCE_RESULTS[number] = (True, title, c.detail)
    print(f"PASS {number}. {title}: {c.detail}")


def lif_graph(tau, r, v_leak=0.0, threshold=1e12):
    return chain(("in", P.Input(shape=(1,))),
                 ("lif", P.LIF(tau=[tau], r=[r], v_leak=[v_leak], threshold=[threshold])),
                 ("out", P.Output()))


def test_01_euler_convergence():
    with criterion(1, "forward-Euler convergence to the closed form") as c:
        start = time.perf_counter()
        tau, r, i0 = 0.02, 1.5, 2.0
        g = lif_graph(tau, r)
        params = g.nodes["lif"]
        errors = []
        for dt in (tau / 1000, tau / 2000):
            steps = int(round(5 * tau / dt))
            tr = run(g, D.DialectConfig(dt=dt), {"in": np.full((steps, 1), i0)}, record=["lif"])
            v = tr.states["lif"]["v"][:, 0]
            t = dt * np.arange(1, steps + 1)
            errors.append(np.max(np.abs(v - D.lif_exact(params, 0.0, i0, t))))
        elapsed = time.perf_counter() - start
        rel = errors[0] / (r * i0)
        ratio = errors[0] / errors[1]
        c.note(f"max err {rel:.2e} of R*i0, halving ratio {ratio:.3f}, {elapsed:.2f}s")
        assert rel <= 0.005
        assert ratio >= 1.8
        assert elapsed < 1.0


def test_02_exponential_exactness():
    with criterion(2, "exponential-Euler zero-input exactness") as c:
        tau, dt, v0 = 0.01, 1e-4, 1.7
        p = P.LIF(tau=[tau], r=[1.0], v_leak=[0.0], threshold=[1e12])
        steps = int(round(10 * tau / dt))
        states, _ = D.simulate(p, D.DialectConfig(dt=dt, decay="exponential_euler"),
                               np.zeros((steps, 1)), state=np.array([v0]))
        t = dt * np.arange(1, steps + 1)
        exact = D.lif_exact(p, v0, 0.0, t)
        rel = np.max(np.abs(states[:, 0] - exact) / np.abs(exact))
        c.note(f"max relative error {rel:.2e} over {steps} steps")
        assert rel <= 1e-12


def test_03_single_lif_dialects():
    with criterion(3, "single-LIF dialect comparison on the golden spike train") as c:
        start = time.perf_counter()
        g = load(GOLDEN / "single_lif.nir.json")
        x = load_inputs(GOLDEN / "single_lif_input.csv", g)
        assert x["in"].shape == (100, 1)
        ev = {n: run(g, D.named_config(n), x).outputs["out"][:, 0]
              for n in ("norse", "rockpool_sinabs", "lava_dl")}
        counts = {n: int(e.sum()) for n, e in ev.items()}
        t_post = np.flatnonzero(ev["norse"])
        t_pre = np.flatnonzero(ev["rockpool_sinabs"])
        cmp = A.spike_train_compare(ev["norse"], ev["lava_dl"])
        elapsed = time.perf_counter() - start
        c.note(f"counts {counts}, pre-leak earlier at {int(np.sum(t_pre < t_post))} events, "
               f"lava shift {cmp.best_shift}, {elapsed:.2f}s")
        assert len(set(counts.values())) == 1 and counts["norse"] > 0
        assert np.all(t_pre <= t_post)
        assert cmp.best_shift == 1 and cmp.exact
        assert np.array_equal(ev["lava_dl"], A.shift(ev["norse"], 1))
        assert elapsed < 1.0


FIDELITY_DIALECTS = ("norse", "snntorch", "spinnaker2_exp_euler", "spinnaker2_fwd_euler", "nengo")


def test_04_decomposition_fidelity():
    with criterion(4, "decomposition fidelity over random graphs") as c:
        rng = np.random.default_rng(4)
        mismatched, structural, higher = 0, 0, 0
        for _ in range(200):
            g = random_graph(rng, max_nodes=12)
            assert len(g.nodes) <= 12
            higher += any(p.kind in P.HIGHER_ORDER_KINDS for p in g.nodes.values())
            x = random_inputs(rng, g, steps=100)
            d = passes.decompose(g)
            for name in FIDELITY_DIALECTS:
                cfg = D.named_config(name)
                if not np.array_equal(run(g, cfg, x).outputs["out"], run(d, cfg, x).outputs["out"]):
                    mismatched += 1
            structural += passes.recompose(d) != g
        c.note(f"200 graphs ({higher} with higher-order neurons) x {len(FIDELITY_DIALECTS)} dialects: "
               f"{mismatched} event mismatches, {structural} round-trip mismatches")
        assert mismatched == 0 and structural == 0


def test_05_spinnaker2_translation():
    with criterion(5, "SpiNNaker2 parameter translation soundness") as c:
        rng = np.random.default_rng(5)
        dt = 1e-3
        bad = {"fwd_euler": 0, "exp_euler": 0}
        spikes = {"fwd_euler": 0, "exp_euler": 0}
        for _ in range(1000):
            tau = rng.uniform(2e-3, 0.1)
            r = rng.uniform(0.1, 10.0)
            theta = rng.uniform(0.1, 5.0)
            v_leak = rng.uniform(-1.0, 1.0)
            p = P.LIF(tau=[tau], r=[r], v_leak=[v_leak], threshold=[theta])
            x = (rng.random((200, 1)) < 0.3) * rng.uniform(0, 5 * theta * tau / (r * dt), (200, 1))
            for mode, decay in (("fwd_euler", "forward_euler"), ("exp_euler", "exponential_euler")):
                _, want = D.simulate(p, D.DialectConfig(dt=dt, decay=decay), x, state=np.zeros(1))
                _, got = D.simulate_translated(D.translate_spinnaker2_lif(p, dt, mode), x)
                spikes[mode] += int(want.sum())
                bad[mode] += not np.array_equal(got, want)
        c.note(f"1000 draws, mismatching trains {bad}, reference spikes {spikes}")
        assert bad == {"fwd_euler": 0, "exp_euler": 0}
        assert min(spikes.values()) > 1000


def test_06_bitshift_dynamics():
    with criterion(6, "integer bit-shift CuBa-LIF") as c:
        cases = json.loads((GOLDEN / "xylo_bitshift.json").read_text())
        for case in cases:
            cfg = D.named_config("xylo", 1e-3, d_mem=case["d_mem"], d_syn=case["d_syn"])
            p = P.CubaLIF(tau_syn=[1e-3], tau_mem=[1e-3], r=[1.0], v_leak=[0.0], w_in=[1.0],
                          threshold=[float(case["theta"])])
            state = (np.array([case.get("syn0", 0)]), np.array([case.get("v0", 0)]))
            got = {"syn": [], "v": [], "spikes": []}
            for ev in case["events"]:
                state, s = D.step_bitshift(p, cfg, state, np.array([ev]))
                got["syn"].append(int(state[0][0]))
                got["v"].append(int(state[1][0]))
                got["spikes"].append(int(s[0]))
            assert len(case["events"]) == 50
            assert got == {k: case[k] for k in got}, case["name"]
        assert int(D.bitshift_decay(1, 4)) == 0
        worst = max(abs((1 - 2.0 ** -d) - math.exp(-(2.0 ** -d))) / math.exp(-(2.0 ** -d))
                    for d in range(4, 32))
        c.note(f"{len(cases)} golden 50-step vectors match; worst decay-factor gap {worst:.2e} for d>=4")
        assert worst <= 0.032


def _layer(n, fan):
    nodes = {"in": P.Input(shape=(1,)), "out": P.Output(),
             "c": P.CubaLIF(tau_syn=np.full(n, 2e-3), tau_mem=np.full(n, 1e-2), r=np.ones(n),
                            v_leak=np.zeros(n), w_in=np.ones(n), threshold=np.ones(n))}
    edges = [Edge("c", "out")]
    for k in range(fan):
        nodes[f"w{k:02d}"] = P.Linear(weight=np.ones((n, 1)))
        edges += [Edge("in", f"w{k:02d}"), Edge(f"w{k:02d}", "c")]
    return Graph(nodes, edges)


def test_07_constraint_checking():
    with criterion(7, "platform constraint checking") as c:
        xylo = passes.load_profile("xylo")
        over = passes.check_constraints(_layer(1001, 1), xylo)
        wide = passes.check_constraints(_layer(10, 64), xylo)
        ok = passes.check_constraints(_layer(1000, 63), xylo)
        assert not over.compatible and over.violations[0].constraint == "neuron-budget"
        assert not wide.compatible and wide.violations[0].constraint == "fan-in"
        assert ok.compatible
        linear_only = passes.PlatformProfile("linear-only", {"input", "output", "linear"})
        g = chain(("in", P.Input(shape=(3,))),
                  ("a", P.Affine(weight=np.ones((3, 3)), bias=np.zeros(3))), ("out", P.Output()))
        plain = passes.check_constraints(g, linear_only)
        rewritten = passes.check_constraints(g, linear_only, try_rewrites=True)
        assert not plain.compatible and rewritten.compatible
        c.note(f"1001 neurons -> {over.verdict}, fan-in 64 -> {wide.verdict}, "
               f"1000 x fan-in 63 -> {ok.verdict}; zero-bias affine -> {plain.verdict}, "
               f"with rewrites {list(rewritten.rewrites)} -> {rewritten.verdict}")


def test_08_quantization():
    with criterion(8, "symmetric quantization error bound") as c:
        rng = np.random.default_rng(8)
        worst = 0.0
        for _ in range(1000):
            bits = int(rng.integers(2, 33))
            shape = tuple(rng.integers(1, 9, size=int(rng.integers(1, 4))))
            w = rng.normal(0, 10 ** rng.uniform(-4, 4), shape)
            q, scale = passes.quantize_tensor(w, bits)
            err = np.max(np.abs(passes.dequantize(q, scale) - w))
            assert err <= scale / 2
            worst = max(worst, err / scale)
        q, scale = passes.quantize_tensor([0.5, -1.0, 1.0], 8)
        assert q.tolist() == [64, -127, 127] and scale == 1 / 127
        c.note(f"1000 tensors, worst error {worst:.6f} x scale; golden [0.5,-1,1] -> {q.astype(int).tolist()}")


def test_09_metrics():
    with criterion(9, "similarity metric and comparison matrix") as c:
        assert abs(A.cosine_similarity([0.3, 0.1], [0.3, 0.1]) - 1) <= 1e-9
        assert abs(A.cosine_similarity([1, 0], [0, 1])) <= 1e-9
        assert abs(A.cosine_similarity([1, 0], [1, 1]) - 1 / math.sqrt(2)) <= 1e-9
        start = time.perf_counter()
        g = load(GOLDEN / "single_lif.nir.json")
        x = load_inputs(GOLDEN / "single_lif_input.csv", g)
        res = A.compare_dialects(g, x, ["norse", "snntorch", "rockpool_sinabs", "lava_dl"], "lif1")
        elapsed = time.perf_counter() - start
        m = res.matrix.values
        assert m.shape == (4, 4)
        assert np.array_equal(m, m.T) and np.all(np.diag(m) == 1.0)
        assert elapsed < 5.0
        c.note(f"golden cosines ok; 4x4 matrix symmetric, unit diagonal, min {m.min():.4f}, {elapsed:.2f}s")


def test_10_serialization():
    with criterion(10, "canonical serialization corpus") as c:
        rng = np.random.default_rng(10)
        corpus = [every_kind_graph()] + [random_graph(rng) for _ in range(99)]
        for g in corpus:
            data = serialize(g)
            back = deserialize(data)
            assert back == g
            assert serialize(back) == data
            assert serialize(deserialize(serialize(back))) == data
        c.note(f"{len(corpus)} graphs round-trip byte-identically; canonical form is a fixpoint")
