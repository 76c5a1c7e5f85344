import numpy as np
import pytest

from nirc import dialects as D
from nirc import primitives as P
from nirc.engine import build_schedule, run, run_reference_ode
from nirc.errors import CycleWithoutState, ShapeMismatch, ValidationError
from nirc.graph import Edge, Graph, chain
from nirc.streams import trace_to_json

from conftest import lif, random_graph, random_inputs, single_lif_graph

NORSE = D.named_config("norse")


def test_feedforward_schedule():
    g = single_lif_graph()
    s = build_schedule(g)
    assert s.order == ("in", "lif1", "out") and not s.back_edges


def test_recurrent_schedule():
    g = Graph({"in": P.Input(shape=(2,)), "lif": lif(2), "w": P.Linear(weight=np.eye(2)),
               "out": P.Output()},
              (Edge("in", "lif"), Edge("lif", "w"), Edge("w", "lif"), Edge("lif", "out")))
    s = build_schedule(g)
    assert s.back_edges == frozenset({Edge("w", "lif")})
    assert s.order.index("lif") < s.order.index("w")


def test_stateless_cycle_rejected():
    a = P.Affine(weight=np.eye(1), bias=np.zeros(1))
    g = Graph({"in": P.Input(shape=(1,)), "a": a, "out": P.Output()},
              (Edge("in", "a"), Edge("a", "a"), Edge("a", "out")))
    with pytest.raises(CycleWithoutState):
        build_schedule(g)


def test_invalid_graph_rejected():
    g = Graph({"in": P.Input(shape=(1,))}, ())
    with pytest.raises(ValidationError):
        build_schedule(g)


def test_quiescence():
    g = single_lif_graph(n=3)
    tr = run(g, NORSE, {"in": np.zeros((50, 3))}, record=["lif1"])
    assert not tr.outputs["out"].any() and not tr.states["lif1"]["v"].any()


def test_recurrence_is_one_step_late():
    # Integrator with unit self-feedback through a Linear: x[t] = x[t-1] + in + fb[t-1]
    g = Graph({"in": P.Input(shape=(1,)), "acc": P.Integrator(r=[1000.0]),
               "fb": P.Linear(weight=[[1.0]]), "out": P.Output()},
              (Edge("in", "acc"), Edge("acc", "fb"), Edge("fb", "acc"), Edge("acc", "out")))
    x = np.zeros((4, 1))
    x[0] = 1.0
    tr = run(g, NORSE, {"in": x})
    # 1, 1 + 1, 2 + 2, 4 + 4
    assert tr.outputs["out"][:, 0].tolist() == [1.0, 2.0, 4.0, 8.0]


def test_fan_in_sum_two_scales(rng):
    two = Graph({"in": P.Input(shape=(2,)), "a": P.Scale(scale=[1.0, 1.0]),
                 "b": P.Scale(scale=[1.0, 1.0]), "lif": lif(2), "out": P.Output()},
                (Edge("in", "a"), Edge("in", "b"), Edge("a", "lif"), Edge("b", "lif"),
                 Edge("lif", "out")))
    one = chain(("in", P.Input(shape=(2,))), ("lif", lif(2)), ("out", P.Output()))
    x = rng.uniform(0, 20, (60, 2))
    a = run(two, NORSE, {"in": x}, record=["lif"])
    b = run(one, NORSE, {"in": x + x}, record=["lif"])
    assert np.array_equal(a.states["lif"]["v"], b.states["lif"]["v"])


def test_delay_node():
    g = chain(("in", P.Input(shape=(2,))), ("d", P.Delay(delay=[0.0, 3e-3])), ("out", P.Output()))
    x = np.arange(12.0).reshape(6, 2)
    got = run(g, NORSE, {"in": x}).outputs["out"]
    assert got[:, 0].tolist() == x[:, 0].tolist()
    assert got[:, 1].tolist() == [0, 0, 0, 1, 3, 5]


def test_unconnected_input_is_zero():
    g = Graph({"in": P.Input(shape=(1,)), "li": P.LI(tau=[0.01], r=[1.0], v_leak=[0.5]),
               "out": P.Output()}, (Edge("li", "out"),))
    tr = run(g, NORSE, {"in": np.ones((5, 1))})
    assert np.all(tr.outputs["out"] == 0.5)


def test_input_checks():
    g = single_lif_graph()
    with pytest.raises(ShapeMismatch):
        run(g, NORSE, {"in": np.zeros((5, 2))})
    with pytest.raises(ValueError):
        run(g, NORSE, {})
    with pytest.raises(ValueError):
        run(g, NORSE, {"in": np.zeros((5, 1))}, record=["ghost"])


def test_determinism(rng):
    g = random_graph(rng)
    x = random_inputs(rng, g)
    a = run(g, NORSE, x, record=list(g.nodes))
    b = run(g, NORSE, x, record=list(g.nodes))
    assert trace_to_json(a) == trace_to_json(b)


def test_lava_delay_in_graph(rng):
    g = single_lif_graph(n=2)
    x = rng.uniform(0, 60, (80, 2))
    a = run(g, NORSE, {"in": x}).outputs["out"]
    b = run(g, D.named_config("lava_dl"), {"in": x}).outputs["out"]
    assert np.array_equal(b[1:], a[:-1]) and not b[0].any()


def test_reset_port_feedback_same_step():
    # LI -> Spike -> Linear(-theta) -> LI.reset behaves like a subtractive LIF
    g = Graph({"in": P.Input(shape=(1,)), "li": P.LI(tau=[0.01], r=[1.0], v_leak=[0.0]),
               "sp": P.Spike(threshold=[1.0]), "fb": P.Linear(weight=[[-1.0]]),
               "out": P.Output()},
              (Edge("in", "li"), Edge("li", "sp"), Edge("sp", "fb"),
               Edge("fb", "li", "output", "reset"), Edge("sp", "out")))
    ref = single_lif_graph(tau=0.01)
    x = np.full((40, 1), 15.0)
    cfg = D.named_config("snntorch")
    assert np.array_equal(run(g, cfg, {"in": x}).outputs["out"],
                          run(ref, cfg, {"in": x}).outputs["out"])


def test_fixed_mode_rounds_stateless():
    g = chain(("in", P.Input(shape=(1,))), ("s", P.Scale(scale=[0.4])), ("out", P.Output()))
    cfg = D.named_config("xylo")
    out = run(g, cfg, {"in": np.array([[1.0], [2.0], [4.0]])}).outputs["out"][:, 0]
    assert out.tolist() == [0.0, 1.0, 2.0]


def test_cuba_in_graph_matches_simulate(rng):
    p = P.CubaLIF(tau_syn=[5e-3], tau_mem=[1e-2], r=[1.0], v_leak=[0.1], w_in=[2.0], threshold=[1.0])
    g = chain(("in", P.Input(shape=(1,))), ("c", p), ("out", P.Output()))
    x = rng.uniform(0, 10, (100, 1))
    cfg = D.named_config("spinnaker2_exp_euler")
    tr = run(g, cfg, {"in": x}, record=["c"])
    states, events = D.simulate(p, cfg, x)
    assert np.array_equal(tr.outputs["out"], events)
    assert np.array_equal(tr.states["c"]["v"], states)


# -- reference ODE -------------------------------------------------------------


def test_reference_constant_input():
    p = lif(tau=0.02, threshold=1e9)
    t, v = run_reference_ode(p, np.full((50, 1), 0.8), dt=1e-3)
    exact = D.lif_exact(p, 0.0, 0.8, t[:, None])
    assert np.max(np.abs(v - exact)) < 1e-12


def test_reference_zero_input_decay():
    p = P.LI(tau=[0.01], r=[1.0], v_leak=[0.0])
    t, v = run_reference_ode(p, np.zeros((30, 1)), dt=1e-3, state=np.array([2.0]))
    np.testing.assert_allclose(v[:, 0], 2.0 * np.exp(-t / 0.01), rtol=1e-10)


def test_reference_piecewise_constant():
    p = lif(tau=0.01, r=2.0, v_leak=0.1, threshold=1e9)
    levels = [0.5, 0.0, 1.5, -0.3]
    x = np.repeat(levels, 5)[:, None]
    t, v = run_reference_ode(p, x, dt=1e-3)
    v0 = 0.1
    for k, level in enumerate(levels):
        seg = v[k * 500:(k + 1) * 500 + 1, 0]
        tt = np.arange(seg.size) * 1e-5
        np.testing.assert_allclose(seg, D.lif_exact(p, v0, level, tt), rtol=0, atol=1e-11)
        v0 = seg[-1]


def test_reference_needs_fine_step():
    with pytest.raises(ValueError):
        run_reference_ode(lif(), np.zeros((2, 1)), 1e-3, substeps=10)
