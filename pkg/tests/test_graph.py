import numpy as np
import pytest

from nirc import primitives as P
from nirc.errors import ShapeConflict, UnknownNode
from nirc.graph import Edge, Graph, chain, fan_in, fan_out, infer_shapes, validate

from conftest import lif


def codes(graph):
    return [d.code for d in validate(graph)]


def test_valid_affine_chain():
    g = chain(("in", P.Input(shape=(2,))),
              ("aff", P.Affine(weight=np.ones((3, 2)), bias=np.zeros(3))),
              ("out", P.Output(shape=(3,))))
    assert validate(g) == []


def test_shape_mismatch():
    g = chain(("in", P.Input(shape=(2,))),
              ("aff", P.Affine(weight=np.ones((3, 4)), bias=np.zeros(3))),
              ("out", P.Output()))
    diags = validate(g)
    assert [d.code for d in diags] == ["shape-mismatch"]
    assert "shape mismatch on edge" in diags[0].message
    assert diags[0].edge == Edge("in", "aff")


def test_unknown_node_and_port():
    g = Graph({"in": P.Input(shape=(1,)), "out": P.Output()},
              (Edge("in", "out"), Edge("x", "out"), Edge("in", "out", "output", "reset")))
    diags = validate(g)
    assert "unknown-node" in [d.code for d in diags]
    assert "unknown-port" in [d.code for d in diags]
    assert any("unknown node 'x'" in d.message for d in diags)


def test_missing_io_and_duplicates():
    g = Graph({"a": P.Scale(scale=[1.0])}, ())
    assert codes(g) == ["no-input", "no-output"]
    g = Graph({"in": P.Input(shape=(1,)), "out": P.Output()}, (Edge("in", "out"), Edge("in", "out")))
    assert codes(g) == ["duplicate-edge"]


def test_bad_node_id():
    g = Graph({"in put": P.Input(shape=(1,)), "out": P.Output()}, (Edge("in put", "out"),))
    assert "bad-node-id" in codes(g)


def test_infer_flatten_and_conv():
    g = chain(("in", P.Input(shape=(2, 3, 4))), ("fl", P.Flatten(start_dim=1, end_dim=2)),
              ("out", P.Output()))
    g2 = infer_shapes(g)
    assert tuple(g2.nodes["out"].shape) == (2, 12)
    g = chain(("in", P.Input(shape=(1, 8, 8))),
              ("cv", P.Conv(weight=np.zeros((4, 1, 3, 3)), padding=1)), ("out", P.Output()))
    assert tuple(infer_shapes(g).nodes["out"].shape) == (4, 8, 8)


def test_infer_identity_chain():
    g = chain(("in", P.Input(shape=(5,))), ("d", P.Delay(delay=np.zeros(5))), ("out", P.Output()))
    g2 = infer_shapes(g)
    for nid in g2.nodes:
        for port in g2.ports(nid).inputs + g2.ports(nid).outputs:
            assert tuple(port.shape) == (5,)
    assert infer_shapes(g2) == g2


def test_shape_conflict():
    g = Graph({"a": P.Input(shape=(2,)), "b": P.Input(shape=(3,)), "out": P.Output()},
              (Edge("a", "out"), Edge("b", "out")))
    with pytest.raises(ShapeConflict):
        infer_shapes(g)
    assert codes(g) == ["shape-conflict"]


def test_fan_counts():
    g = Graph({"a": P.Input(shape=(1,)), "b": P.Scale(scale=[1.0]), "c": P.Scale(scale=[2.0]),
               "out": P.Output(), "iso": P.Scale(scale=[1.0])},
              (Edge("a", "b"), Edge("a", "c"), Edge("b", "out"), Edge("c", "out")))
    assert fan_in(g, "out") == 2 and fan_out(g, "a") == 2
    assert fan_in(g, "iso") == 0 and fan_out(g, "iso") == 0
    with pytest.raises(UnknownNode):
        fan_in(g, "nope")


def test_fan_in_counts_recurrence():
    g = Graph({"in": P.Input(shape=(2,)), "lif": lif(2), "rec": P.Linear(weight=np.eye(2)),
               "out": P.Output()},
              (Edge("in", "lif"), Edge("lif", "rec"), Edge("rec", "lif"), Edge("lif", "out")))
    assert fan_in(g, "lif") == 2


def test_structural_equality_is_order_free():
    a = Graph({"x": P.Input(shape=(1,)), "y": P.Output()}, (Edge("x", "y"),), {"k": "v"})
    b = Graph({"y": P.Output(), "x": P.Input(shape=(1,))}, [Edge("x", "y")], {"k": "v"})
    assert a == b
    assert a != b.with_changes(metadata={"k": "w"})
