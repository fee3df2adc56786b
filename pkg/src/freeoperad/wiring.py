"""Acyclic wiring diagrams: boxes to fill with sampled morphisms, and how to
plug the results together into one morphism of the outer box."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import yaml

from .errors import (
    CyclicWiring,
    DanglingSlot,
    DataIOError,
    SchemaError,
    SlotTypeMismatch,
    TypeMismatch,
    UnsupportedWiring,
    ValidationError,
)
from .prior import FreeOperadPrior, Hyperparams, PathTrace, log_pdf_beta, log_pdf_weights
from .signature import Ty, parse_ty
from .terms import Id, Term, compose_seq, par

OUTER = None


@dataclass(frozen=True)
class Port:
    box: int | None  # None is the outer box
    start: int
    stop: int

    def __len__(self) -> int:
        return self.stop - self.start


@dataclass(frozen=True)
class Wire:
    source: Port  # outer domain or a box codomain
    target: Port  # a box domain or the outer codomain


@dataclass(frozen=True)
class WiringDiagram:
    outer: tuple[Ty, Ty]
    boxes: tuple[tuple[Ty, Ty], ...]
    wires: tuple[Wire, ...]

    @classmethod
    def one_box(cls, dom: Ty, cod: Ty) -> WiringDiagram:
        wires = []
        if dom:
            wires.append(Wire(Port(OUTER, 0, len(dom)), Port(0, 0, len(dom))))
        if cod:
            wires.append(Wire(Port(0, 0, len(cod)), Port(OUTER, 0, len(cod))))
        return cls((dom, cod), ((dom, cod),), tuple(wires))

    def source_ty(self, port: Port) -> Ty:
        ty = self.outer[0] if port.box is OUTER else self.boxes[port.box][1]
        return ty[port.start:port.stop]

    def target_ty(self, port: Port) -> Ty:
        ty = self.outer[1] if port.box is OUTER else self.boxes[port.box][0]
        return ty[port.start:port.stop]


# -- loading --------------------------------------------------------------------

def _ty(value, what: str) -> Ty:
    if isinstance(value, str):
        return parse_ty(value)
    if isinstance(value, list) and all(isinstance(v, str) for v in value):
        return Ty(*value)
    raise SchemaError(f"{what} must be a type string or a list of base type names")


def _box_ref(value, n_boxes: int, what: str):
    if value == "outer":
        return OUTER
    if isinstance(value, int) and not isinstance(value, bool) and 0 <= value < n_boxes:
        return value
    raise SchemaError(f"{what} must be 'outer' or a box index in 0..{n_boxes - 1}, got {value!r}")


def diagram_from_document(doc) -> WiringDiagram:
    if not isinstance(doc, dict) or set(doc) != {"outer", "boxes", "wires"}:
        raise SchemaError("diagram document needs exactly the keys outer, boxes, wires")
    outer = doc["outer"]
    if not isinstance(outer, dict) or set(outer) != {"dom", "cod"}:
        raise SchemaError("`outer` must have keys dom and cod")
    outer_t = (_ty(outer["dom"], "outer.dom"), _ty(outer["cod"], "outer.cod"))
    if not isinstance(doc["boxes"], list):
        raise SchemaError("`boxes` must be a list")
    boxes = []
    for i, b in enumerate(doc["boxes"]):
        if not isinstance(b, dict) or set(b) != {"dom", "cod"}:
            raise SchemaError(f"boxes[{i}] must have keys dom and cod")
        boxes.append((_ty(b["dom"], f"boxes[{i}].dom"), _ty(b["cod"], f"boxes[{i}].cod")))
    if not isinstance(doc["wires"], list):
        raise SchemaError("`wires` must be a list")
    wires = []
    for i, w in enumerate(doc["wires"]):
        if not isinstance(w, dict) or not {"from", "to"} <= set(w) <= {"from", "to", "slots"}:
            raise SchemaError(f"wires[{i}] must have keys from, to and optionally slots")
        src = _box_ref(w["from"], len(boxes), f"wires[{i}].from")
        dst = _box_ref(w["to"], len(boxes), f"wires[{i}].to")
        src_len = len(outer_t[0] if src is OUTER else boxes[src][1])
        dst_len = len(outer_t[1] if dst is OUTER else boxes[dst][0])
        slots = w.get("slots", {})
        if not isinstance(slots, dict) or not set(slots) <= {"from", "to"}:
            raise SchemaError(f"wires[{i}].slots must map from/to to [start, stop] ranges")
        ranges = []
        for end, default in (("from", src_len), ("to", dst_len)):
            r = slots.get(end, [0, default])
            if (not isinstance(r, list) or len(r) != 2
                    or not all(isinstance(x, int) and not isinstance(x, bool) for x in r)):
                raise SchemaError(f"wires[{i}].slots.{end} must be [start, stop]")
            ranges.append(r)
        wires.append(Wire(Port(src, *ranges[0]), Port(dst, *ranges[1])))
    return WiringDiagram(outer_t, tuple(boxes), tuple(wires))


def parse_diagram(text: str) -> WiringDiagram:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise SchemaError(f"malformed diagram document: {exc}") from exc
    return validate_wiring(diagram_from_document(doc))


def load_diagram(path) -> WiringDiagram:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataIOError(f"cannot read diagram {path}: {exc}") from exc
    return parse_diagram(text)


# -- validation -----------------------------------------------------------------

def _topological_order(d: WiringDiagram) -> list[int]:
    n = len(d.boxes)
    deps = [set() for _ in range(n)]
    for w in d.wires:
        if w.source.box is not OUTER and w.target.box is not OUTER:
            if w.source.box == w.target.box:
                raise CyclicWiring(f"box {w.source.box} is wired into itself")
            deps[w.target.box].add(w.source.box)
    order: list[int] = []
    done: set[int] = set()
    while len(order) < n:
        ready = [i for i in range(n) if i not in done and deps[i] <= done]
        if not ready:
            stuck = sorted(set(range(n)) - done)
            raise CyclicWiring(f"boxes {stuck} are wired in a cycle")
        order.append(ready[0])
        done.add(ready[0])
    return order


def validate_wiring(d: WiringDiagram) -> WiringDiagram:
    """Check slot typing, exact coverage, acyclicity and crossing-freeness."""
    targets: dict[tuple, int] = {}
    sources: dict[tuple, int] = {}
    for n, w in enumerate(d.wires):
        for port, full, what in (
            (w.source, d.outer[0] if w.source.box is OUTER else d.boxes[w.source.box][1], "source"),
            (w.target, d.outer[1] if w.target.box is OUTER else d.boxes[w.target.box][0], "target"),
        ):
            if not 0 <= port.start <= port.stop <= len(full):
                raise SlotTypeMismatch(f"wire {n}: {what} slots {port.start}:{port.stop} "
                                       f"outside {full}")
        if len(w.source) != len(w.target):
            raise SlotTypeMismatch(f"wire {n} joins {len(w.source)} slot(s) to {len(w.target)}")
        if d.source_ty(w.source) != d.target_ty(w.target):
            raise SlotTypeMismatch(f"wire {n}: {d.source_ty(w.source)} != {d.target_ty(w.target)}")
        for k in range(len(w.source)):
            s = (w.source.box, w.source.start + k)
            t = (w.target.box, w.target.start + k)
            if s in sources:
                raise ValidationError(f"wire {n} fans out source slot {s} (already used by wire "
                                      f"{sources[s]})")
            if t in targets:
                raise ValidationError(f"wire {n} doubles target slot {t} (already fed by wire "
                                      f"{targets[t]})")
            sources[s], targets[t] = n, n

    def name(box):
        return "outer" if box is OUTER else f"box {box}"

    for box, ty in [(OUTER, d.outer[1])] + [(i, b[0]) for i, b in enumerate(d.boxes)]:
        for k in range(len(ty)):
            if (box, k) not in targets:
                side = "codomain" if box is OUTER else "domain"
                raise DanglingSlot(f"{name(box)} {side} slot {k} is not wired")
    for box, ty in [(OUTER, d.outer[0])] + [(i, b[1]) for i, b in enumerate(d.boxes)]:
        for k in range(len(ty)):
            if (box, k) not in sources:
                side = "domain" if box is OUTER else "codomain"
                raise DanglingSlot(f"{name(box)} {side} slot {k} is never used")
    _topological_order(d)
    _assemble(d, [_Placeholder(dom, cod) for dom, cod in d.boxes])
    return d


class _Placeholder(Term):
    """Stand-in box used when checking that a diagram can be assembled."""

    __slots__ = ("dom", "cod")

    def __init__(self, dom: Ty, cod: Ty):
        self.dom, self.cod = dom, cod


# -- composition ----------------------------------------------------------------

def _assemble(d: WiringDiagram, fs: Sequence[Term]) -> Term:
    feed: dict[tuple, tuple] = {}
    for w in d.wires:
        for k in range(len(w.source)):
            feed[(w.target.box, w.target.start + k)] = (w.source.box, w.source.start + k)

    def label_ty(label) -> Ty:
        box, k = label
        ty = d.outer[0] if box is OUTER else d.boxes[box][1]
        return ty[k:k + 1]

    bundle: list[tuple] = [(OUTER, k) for k in range(len(d.outer[0]))]
    term: Term = Id(d.outer[0])
    order = _topological_order(d)
    done: set[int] = set()
    while len(done) < len(d.boxes):
        ready = [i for i in order if i not in done
                 and all(feed[(i, k)][0] is OUTER or feed[(i, k)][0] in done
                         for k in range(len(d.boxes[i][0])))]
        runs = []
        for i in ready:
            wanted = [feed[(i, k)] for k in range(len(d.boxes[i][0]))]
            if not wanted:
                runs.append((len(bundle), len(bundle), i))
                continue
            start = bundle.index(wanted[0])
            if bundle[start:start + len(wanted)] != wanted:
                raise UnsupportedWiring(f"inputs of box {i} are not adjacent and in order; "
                                        "crossing wires are not supported")
            runs.append((start, start + len(wanted), i))
        runs.sort()
        factors: list[Term] = []
        new_bundle: list[tuple] = []
        pos = 0
        for start, stop, i in runs:
            if start > pos:
                gap = bundle[pos:start]
                factors.append(Id(Ty(*(f for lab in gap for f in label_ty(lab)))))
                new_bundle.extend(gap)
            factors.append(fs[i])
            new_bundle.extend((i, k) for k in range(len(d.boxes[i][1])))
            pos = stop
        if pos < len(bundle):
            gap = bundle[pos:]
            factors.append(Id(Ty(*(f for lab in gap for f in label_ty(lab)))))
            new_bundle.extend(gap)
        factors = [f for f in factors if not (isinstance(f, Id) and not f.ty)]
        if all(isinstance(f, Id) for f in factors):
            layer: Term = Id(Ty(*(x for f in factors for x in f.ty)))
        else:
            layer = par(factors) if factors else Id(Ty())
        term = compose_seq(term, layer)
        bundle = new_bundle
        done.update(ready)
    wanted_out = [feed[(OUTER, k)] for k in range(len(d.outer[1]))]
    if bundle != wanted_out:
        raise UnsupportedWiring("outer codomain wires cross; crossing wires are not supported")
    return term


def compose_diagram(d: WiringDiagram, fs: Sequence[Term]) -> Term:
    """Plug one morphism per box into the diagram, giving an outer-box morphism."""
    if len(fs) != len(d.boxes):
        raise ValidationError(f"diagram has {len(d.boxes)} box(es) but {len(fs)} term(s) given")
    for i, (f, (dom, cod)) in enumerate(zip(fs, d.boxes)):
        if (f.dom, f.cod) != (dom, cod):
            raise TypeMismatch((dom, cod), (f.dom, f.cod), f"box {i}")
    return _assemble(d, fs)


# -- sampling -------------------------------------------------------------------

@dataclass(frozen=True)
class DiagramSample:
    hyper: Hyperparams
    traces: tuple[PathTrace, ...]
    log_prior: float  # log p(beta) + log p(w) + sum of per-box log p(f_i | beta, w)

    @property
    def log_prior_structure(self) -> float:
        return math.fsum(t.log_prior for t in self.traces)


def sample_diagram(prior: FreeOperadPrior, d: WiringDiagram, hyper: Hyperparams, rngs) -> DiagramSample:
    """One path per box, independent given the shared ``(beta, w)``.

    ``rngs`` is either one generator used for every box in turn or one
    generator per box.
    """
    if not isinstance(rngs, (list, tuple)):
        rngs = [rngs] * len(d.boxes)
    traces = []
    for i, ((dom, cod), rng) in enumerate(zip(d.boxes, rngs)):
        try:
            traces.append(prior.sample_path(dom, cod, hyper.beta, hyper.weights, rng))
        except Exception as exc:
            exc.box = i
            if exc.args:
                exc.args = (f"box {i}: {exc.args[0]}",) + exc.args[1:]
            raise
    joint = (log_pdf_beta(hyper.beta) + log_pdf_weights(hyper.weights)
             + math.fsum(t.log_prior for t in traces))
    return DiagramSample(hyper, tuple(traces), joint)
