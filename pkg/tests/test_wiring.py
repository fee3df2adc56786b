import math

import numpy as np
import pytest

from freeoperad.errors import (
    CyclicWiring,
    DanglingSlot,
    DeadEnd,
    SchemaError,
    SlotTypeMismatch,
    TypeMismatch,
    UnsupportedWiring,
    ValidationError,
)
from freeoperad.prior import Hyperparams, log_pdf_beta, log_pdf_weights
from freeoperad.signature import Ty
from freeoperad.streams import stream
from freeoperad.tasks import FIXTURES, arith_interpreter
from freeoperad.terms import Gen, Id, Par, Seq, canonicalize, evaluate
from freeoperad.wiring import WiringDiagram, compose_diagram, load_diagram, parse_diagram, sample_diagram

R, RR = Ty("R"), Ty("R", "R")


@pytest.fixture(scope="module")
def g(arith_sig):
    return {x.name: Gen.of(x) for x in arith_sig.generators}


def dataflow(d, fs, interp, xs):
    """Evaluate a diagram by pushing values along wires, box by box."""
    produced = {None: list(xs)}
    pending = set(range(len(d.boxes)))
    while pending:
        for b in sorted(pending):
            feeds = [w for w in d.wires if w.target.box == b]
            if all(w.source.box in produced for w in feeds):
                args = [None] * len(d.boxes[b][0])
                for w in feeds:
                    args[w.target.start:w.target.stop] = produced[w.source.box][w.source.start:w.source.stop]
                produced[b] = list(evaluate(fs[b], interp, args))
                pending.discard(b)
                break
        else:
            raise AssertionError("no progress")
    out = [None] * len(d.outer[1])
    for w in d.wires:
        if w.target.box is None:
            out[w.target.start:w.target.stop] = produced[w.source.box][w.source.start:w.source.stop]
    return tuple(out)


FEED_THROUGH = """
outer: {dom: [R, R], cod: [R]}
boxes:
  - {dom: [R], cod: [R]}
  - {dom: [R, R], cod: [R]}
wires:
  - {from: outer, to: 0, slots: {from: [0, 1], to: [0, 1]}}
  - {from: 0, to: 1, slots: {from: [0, 1], to: [0, 1]}}
  - {from: outer, to: 1, slots: {from: [1, 2], to: [1, 2]}}
  - {from: 1, to: outer}
"""

PARALLEL = """
outer: {dom: [R, R], cod: [R, R]}
boxes:
  - {dom: [R], cod: [R]}
  - {dom: [R], cod: [R]}
wires:
  - {from: outer, to: 0, slots: {from: [0, 1]}}
  - {from: outer, to: 1, slots: {from: [1, 2]}}
  - {from: 0, to: outer, slots: {to: [0, 1]}}
  - {from: 1, to: outer, slots: {to: [1, 2]}}
"""


def test_one_box(g):
    d = WiringDiagram.one_box(R, RR)
    assert compose_diagram(d, [g["dup"]]) == g["dup"]


def test_series(g):
    d = load_diagram(FIXTURES / "arith_pair_reduce.yaml")
    t = compose_diagram(d, [g["dup"], g["add"]])
    assert t == Seq(g["dup"], g["add"])
    assert evaluate(t, arith_interpreter(), (3.0,)) == (6.0,)


def test_parallel(g):
    d = parse_diagram(PARALLEL)
    t = compose_diagram(d, [g["inc"], g["dbl"]])
    assert canonicalize(t) == Par((g["inc"], g["dbl"]))
    assert evaluate(t, arith_interpreter(), (1.0, 5.0)) == (2.0, 10.0)


def test_feed_through_matches_dataflow(g):
    d = parse_diagram(FEED_THROUGH)
    interp = arith_interpreter()
    rng = np.random.default_rng(0)
    for f0 in (g["inc"], g["dbl"], Seq(g["inc"], g["dbl"])):
        for f1 in (g["add"], Seq(g["add"], g["inc"])):
            t = compose_diagram(d, [f0, f1])
            assert (t.dom, t.cod) == d.outer
            for _ in range(5):
                xs = tuple(rng.normal(size=2))
                assert evaluate(t, interp, xs) == dataflow(d, [f0, f1], interp, xs)


def test_cycle_rejected():
    with pytest.raises(CyclicWiring):
        parse_diagram("""
outer: {dom: [R], cod: [R]}
boxes: [{dom: [R], cod: [R]}, {dom: [R], cod: [R]}]
wires:
  - {from: 0, to: 1}
  - {from: 1, to: 0}
  - {from: outer, to: outer}
""")


def test_dangling_box_input():
    with pytest.raises(DanglingSlot):
        parse_diagram("""
outer: {dom: [R], cod: [R]}
boxes: [{dom: [R, R], cod: [R]}]
wires:
  - {from: outer, to: 0, slots: {to: [0, 1]}}
  - {from: 0, to: outer}
""")


def test_unused_source_rejected():
    with pytest.raises(DanglingSlot):
        parse_diagram("""
outer: {dom: [R, R], cod: [R]}
boxes: [{dom: [R], cod: [R]}]
wires:
  - {from: outer, to: 0, slots: {from: [0, 1]}}
  - {from: 0, to: outer}
""")


def test_slot_type_mismatch():
    with pytest.raises(SlotTypeMismatch):
        parse_diagram("""
outer: {dom: [R], cod: [S]}
boxes: [{dom: [R], cod: [R]}]
wires:
  - {from: outer, to: 0}
  - {from: 0, to: outer}
""")
    with pytest.raises(SlotTypeMismatch):
        parse_diagram("""
outer: {dom: [R], cod: [R]}
boxes: [{dom: [R], cod: [R]}]
wires:
  - {from: outer, to: 0, slots: {from: [0, 2], to: [0, 2]}}
  - {from: 0, to: outer}
""")


def test_fan_out_rejected():
    with pytest.raises(ValidationError):
        parse_diagram("""
outer: {dom: [R], cod: [R, R]}
boxes: [{dom: [R], cod: [R]}]
wires:
  - {from: outer, to: 0}
  - {from: 0, to: outer, slots: {to: [0, 1]}}
  - {from: 0, to: outer, slots: {to: [1, 2]}}
""")


def test_crossing_rejected():
    with pytest.raises(UnsupportedWiring):
        parse_diagram("""
outer: {dom: [R, R], cod: [R, R]}
boxes: [{dom: [R], cod: [R]}, {dom: [R], cod: [R]}]
wires:
  - {from: outer, to: 0, slots: {from: [0, 1]}}
  - {from: outer, to: 1, slots: {from: [1, 2]}}
  - {from: 0, to: outer, slots: {to: [1, 2]}}
  - {from: 1, to: outer, slots: {to: [0, 1]}}
""")


@pytest.mark.parametrize("text", [
    "outer: {dom: [R], cod: [R]}\nboxes: []",
    "outer: {dom: [R]}\nboxes: []\nwires: []",
    "outer: {dom: [R], cod: [R]}\nboxes: []\nwires: [{from: 3, to: outer}]",
    "outer: {dom: [R], cod: [R]}\nboxes: []\nwires: [{from: outer, to: outer, slots: {from: 1}}]",
    "[1, 2",
])
def test_schema_errors(text):
    with pytest.raises(SchemaError):
        parse_diagram(text)


def test_compose_type_mismatch_names_box(g):
    d = load_diagram(FIXTURES / "arith_pair_reduce.yaml")
    with pytest.raises(TypeMismatch, match="box 1"):
        compose_diagram(d, [g["dup"], g["inc"]])
    with pytest.raises(ValidationError):
        compose_diagram(d, [g["dup"]])


def test_sample_diagram_additivity(arith_prior):
    d = load_diagram(FIXTURES / "arith_pair_reduce.yaml")
    for i in range(50):
        h = Hyperparams.sample(arith_prior.graph.n_weights, stream(3, i, 0))
        h = Hyperparams(max(h.beta, 0.5), h.weights)
        s = sample_diagram(arith_prior, d, h, [stream(3, i, 1), stream(3, i, 2)])
        assert len(s.traces) == 2 and all(t.beta == h.beta for t in s.traces)
        joint = log_pdf_beta(h.beta) + log_pdf_weights(h.weights) + sum(t.log_prior for t in s.traces)
        assert math.isclose(s.log_prior, joint, abs_tol=1e-12)
        t = compose_diagram(d, [tr.term for tr in s.traces])
        assert (t.dom, t.cod) == (R, R)


def test_one_box_joint_is_single_path_joint(staged_prior, staged_diagram):
    h = Hyperparams.uniform(staged_prior.graph.n_weights, 0.8)
    s = sample_diagram(staged_prior, staged_diagram, h, stream(5))
    t = staged_prior.sample_path(Ty("X"), Ty("Y"), 0.8, h.weights, stream(5))
    assert s.traces[0].key() == t.key()
    assert s.log_prior == log_pdf_beta(0.8) + log_pdf_weights(h.weights) + t.log_prior


def test_unreachable_box_is_named(chain_prior):
    d = parse_diagram("""
outer: {dom: [X], cod: [X]}
boxes: [{dom: [X], cod: [Y]}, {dom: [Y], cod: [X]}]
wires:
  - {from: outer, to: 0}
  - {from: 0, to: 1}
  - {from: 1, to: outer}
""")
    with pytest.raises(DeadEnd, match="box 1") as info:
        sample_diagram(chain_prior, d, Hyperparams.uniform(2), stream(0))
    assert info.value.box == 1


def test_identity_box(g):
    d = WiringDiagram.one_box(R, R)
    assert compose_diagram(d, [Id(R)]) == Id(R)
