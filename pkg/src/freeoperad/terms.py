"""Morphisms of the free operad as Id / Gen / Seq / Par syntax trees."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Mapping, Sequence

from .errors import (
    ArityError,
    EmptyProduct,
    EvaluationError,
    IndexOutOfRange,
    ParseError,
    TypeMismatch,
    UnboundGenerator,
)
from .signature import Generator, Signature, Ty, parse_ty, tensor


class Term:
    __slots__ = ()

    dom: Ty
    cod: Ty

    def __rshift__(self, other: Term) -> Term:
        return compose_seq(self, other)

    def __matmul__(self, other: Term) -> Term:
        return par([self, other])

    def __str__(self) -> str:
        return print_term(self)


@dataclass(frozen=True)
class Id(Term):
    ty: Ty

    @property
    def dom(self) -> Ty:
        return self.ty

    @property
    def cod(self) -> Ty:
        return self.ty


@dataclass(frozen=True)
class Gen(Term):
    name: str
    dom: Ty
    cod: Ty

    @classmethod
    def of(cls, g: Generator) -> Gen:
        return cls(g.name, g.dom, g.cod)


@dataclass(frozen=True)
class Seq(Term):
    first: Term
    second: Term

    def __post_init__(self):
        if self.first.cod != self.second.dom:
            raise TypeMismatch(self.first.cod, self.second.dom, "sequential composition")

    @property
    def dom(self) -> Ty:
        return self.first.dom

    @property
    def cod(self) -> Ty:
        return self.second.cod


@dataclass(frozen=True)
class Par(Term):
    factors: tuple[Term, ...]

    def __post_init__(self):
        if len(self.factors) < 2:
            raise EmptyProduct("Par needs at least two factors; use par()")
        object.__setattr__(self, "factors", tuple(self.factors))

    @cached_property
    def dom(self) -> Ty:
        return tensor(*(t.dom for t in self.factors))

    @cached_property
    def cod(self) -> Ty:
        return tensor(*(t.cod for t in self.factors))


def dom(t: Term) -> Ty:
    return t.dom


def cod(t: Term) -> Ty:
    return t.cod


def compose_seq(f: Term, g: Term) -> Term:
    """``f`` then ``g``; identities are absorbed."""
    if f.cod != g.dom:
        raise TypeMismatch(f.cod, g.dom, "sequential composition")
    if isinstance(f, Id):
        return g
    if isinstance(g, Id):
        return f
    return Seq(f, g)


def par(ts: Sequence[Term]) -> Term:
    ts = list(ts)
    if not ts:
        raise EmptyProduct("cannot take the product of no terms")
    if len(ts) == 1:
        return ts[0]
    return Par(tuple(ts))


def whisker(left: Ty, t: Term, right: Ty) -> Term:
    """``id_left ⊗ t ⊗ id_right`` without unit or identity clutter."""
    parts: list[Term] = []
    if left:
        parts.append(Id(left))
    parts.append(t)
    if right:
        parts.append(Id(right))
    if all(isinstance(p, Id) for p in parts):
        return Id(tensor(*(p.dom for p in parts)))
    return par(parts)


def compose_indexed(g: Term, i: int, f: Term) -> Term:
    """Nest ``f`` into input slot ``i`` (1-based) of ``g``.

    Slots are the base factors of ``dom(g)``; ``cod(f)`` must be that factor.
    The result has ``dom(g)`` with slot ``i`` replaced by ``dom(f)``.
    """
    n = len(g.dom)
    if not 1 <= i <= n:
        raise IndexOutOfRange(f"slot {i} outside 1..{n} of {g.dom}")
    slot = g.dom[i - 1:i]
    if f.cod != slot:
        raise TypeMismatch(slot, f.cod, f"input slot {i}")
    if isinstance(f, Id):
        return g
    return compose_seq(whisker(g.dom[:i - 1], f, g.dom[i:]), g)


# -- evaluation ---------------------------------------------------------------

@dataclass(frozen=True)
class Interpreter:
    """Generator name -> function from |dom| values to |cod| values.

    A function for a generator with a single output may return a bare value.
    """

    bindings: Mapping[str, Callable]

    def check(self, sig: Signature) -> None:
        missing = [g.name for g in sig.generators if g.name not in self.bindings]
        if missing:
            raise UnboundGenerator(f"no binding for generator(s) {missing}")


def evaluate(t: Term, interp: Interpreter, inputs: Sequence) -> tuple:
    inputs = tuple(inputs)
    if len(inputs) != len(t.dom):
        raise ArityError(f"expected {len(t.dom)} input(s) for {t.dom}, got {len(inputs)}")
    return _eval(t, interp.bindings, inputs)


def _eval(t: Term, bindings: Mapping[str, Callable], xs: tuple) -> tuple:
    if isinstance(t, Id):
        return xs
    if isinstance(t, Gen):
        try:
            fn = bindings[t.name]
        except KeyError:
            raise UnboundGenerator(f"generator {t.name!r} has no binding") from None
        try:
            out = fn(*xs)
        except (ArithmeticError, ValueError) as exc:
            raise EvaluationError(f"{t.name}{xs}: {exc}") from exc
        if not isinstance(out, tuple):
            out = (out,)
        if len(out) != len(t.cod):
            raise ArityError(f"{t.name} returned {len(out)} value(s), expected {len(t.cod)}")
        return out
    if isinstance(t, Seq):
        return _eval(t.second, bindings, _eval(t.first, bindings, xs))
    if isinstance(t, Par):
        out: list = []
        k = 0
        for f in t.factors:
            n = len(f.dom)
            out.extend(_eval(f, bindings, xs[k:k + n]))
            k += n
        return tuple(out)
    raise TypeError(f"not a term: {t!r}")


# -- canonical form -----------------------------------------------------------

def canonicalize(t: Term) -> Term:
    """Left-nested Seq, flattened Par, identities merged or dropped.

    Two terms with the same canonical form evaluate identically; the
    converse does not hold (no interchange law is applied).
    """
    if isinstance(t, (Id, Gen)):
        return t
    if isinstance(t, Seq):
        parts = [p for p in _seq_parts(canonicalize(t.first)) + _seq_parts(canonicalize(t.second))
                 if not isinstance(p, Id)]
        if not parts:
            return Id(t.dom)
        out = parts[0]
        for p in parts[1:]:
            out = Seq(out, p)
        return out
    if isinstance(t, Par):
        flat: list[Term] = []
        for f in t.factors:
            f = canonicalize(f)
            flat.extend(f.factors if isinstance(f, Par) else [f])
        merged: list[Term] = []
        for f in flat:
            if isinstance(f, Id):
                if not f.ty:
                    continue
                if merged and isinstance(merged[-1], Id):
                    merged[-1] = Id(merged[-1].ty @ f.ty)
                    continue
            merged.append(f)
        if not merged:
            return Id(t.dom)
        return merged[0] if len(merged) == 1 else Par(tuple(merged))
    raise TypeError(f"not a term: {t!r}")


def _seq_parts(t: Term) -> list[Term]:
    if isinstance(t, Seq):
        return _seq_parts(t.first) + _seq_parts(t.second)
    return [t]


# -- text form ----------------------------------------------------------------

def print_term(t: Term) -> str:
    if isinstance(t, Id):
        return f"(id {t.ty})"
    if isinstance(t, Gen):
        return f"(gen {t.name})"
    if isinstance(t, Seq):
        return f"(seq {print_term(t.first)} {print_term(t.second)})"
    if isinstance(t, Par):
        return "(par " + " ".join(print_term(f) for f in t.factors) + ")"
    raise TypeError(f"not a term: {t!r}")


def _tokenize(text: str) -> list[str]:
    return text.replace("(", " ( ").replace(")", " ) ").split()


def parse_term(text: str, sig: Signature) -> Term:
    """Inverse of :func:`print_term`; generator names resolve against ``sig``."""
    tokens = _tokenize(text)
    if not tokens:
        raise ParseError("empty term")
    pos = 0

    def node() -> Term:
        nonlocal pos
        if pos >= len(tokens):
            raise ParseError("unexpected end of input (unbalanced parentheses)")
        if tokens[pos] != "(":
            raise ParseError(f"expected '(' at token {pos}, got {tokens[pos]!r}")
        pos += 1
        if pos >= len(tokens):
            raise ParseError("unexpected end of input (unbalanced parentheses)")
        head = tokens[pos]
        pos += 1
        if head in ("id", "gen"):
            if pos >= len(tokens) or tokens[pos] in "()":
                raise ParseError(f"`{head}` needs an argument")
            arg = tokens[pos]
            pos += 1
            if head == "id":
                out: Term = Id(parse_ty(arg))
            else:
                try:
                    out = Gen.of(sig.generator(arg))
                except KeyError:
                    raise ParseError(f"unknown generator {arg!r}") from None
        elif head in ("seq", "par"):
            kids = []
            while pos < len(tokens) and tokens[pos] != ")":
                kids.append(node())
            if head == "seq":
                if len(kids) != 2:
                    raise ParseError("`seq` takes exactly two terms")
                try:
                    out = Seq(kids[0], kids[1])
                except TypeMismatch as exc:
                    raise ParseError(str(exc)) from exc
            else:
                if len(kids) < 2:
                    raise ParseError("`par` takes at least two terms")
                out = Par(tuple(kids))
        else:
            raise ParseError(f"unknown term constructor {head!r}")
        if pos >= len(tokens) or tokens[pos] != ")":
            raise ParseError("unbalanced parentheses")
        pos += 1
        return out

    t = node()
    if pos != len(tokens):
        raise ParseError(f"trailing input after term: {' '.join(tokens[pos:])!r}")
    return t
