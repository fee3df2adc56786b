"""Hypergraph representation of the free operad over a signature.

Vertices are types, edges are typed (dom, cod) pairs labelled either by a
generator or by a recursion site. A recursion site records a way to realise a
product-typed edge as a parallel composition of smaller paths.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ChunkingError, ValidationError
from .signature import Signature, Ty, is_sublist, tensor

DEFAULT_MAX_PRODUCT_LEN = 4


@dataclass(frozen=True)
class Edge:
    dom: Ty
    cod: Ty
    kind: str  # "gen" or "site"
    ref: int  # generator index or recursion-site index

    def label(self, sig: Signature) -> str:
        if self.kind == "gen":
            return sig.generators[self.ref].name
        return f"⊗site#{self.ref}"


@dataclass(frozen=True)
class RecursionSite:
    pairs: tuple[tuple[Ty, Ty], ...]

    @property
    def dom(self) -> Ty:
        return tensor(*(d for d, _ in self.pairs))

    @property
    def cod(self) -> Ty:
        return tensor(*(c for _, c in self.pairs))

    def __str__(self) -> str:
        return "⊗[" + ", ".join(f"({d}, {c})" for d, c in self.pairs) + "]"


@dataclass(frozen=True)
class Truncation:
    processed: Ty
    dom: Ty
    cod: Ty


@dataclass(frozen=True)
class OperadGraph:
    signature: Signature
    vertices: tuple[Ty, ...]
    edges: tuple[Edge, ...]
    sites: tuple[RecursionSite, ...]
    max_product_len: int
    truncations: tuple[Truncation, ...] = field(default=(), compare=False)

    @cached_property
    def index(self) -> dict[Ty, int]:
        return {v: i for i, v in enumerate(self.vertices)}

    @cached_property
    def out_edges(self) -> tuple[tuple[int, ...], ...]:
        out: list[list[int]] = [[] for _ in self.vertices]
        for k, e in enumerate(self.edges):
            out[self.index[e.dom]].append(k)
        return tuple(tuple(o) for o in out)

    @cached_property
    def candidates(self) -> dict[tuple[Ty, Ty], tuple[tuple[str, int], ...]]:
        """(dom, cod) -> matching generators and recursion sites, in weight order."""
        out: dict[tuple[Ty, Ty], list[tuple[str, int]]] = {}
        for i, g in enumerate(self.signature.generators):
            out.setdefault((g.dom, g.cod), []).append(("gen", i))
        for k, s in enumerate(self.sites):
            out.setdefault((s.dom, s.cod), []).append(("site", k))
        return {key: tuple(v) for key, v in out.items()}

    @cached_property
    def adjacency(self) -> np.ndarray:
        return adjacency_matrix(self)

    @cached_property
    def distances(self):
        from .distance import distance_matrix

        return distance_matrix(self)

    @property
    def n_weights(self) -> int:
        return len(self.signature.generators) + len(self.sites)

    def vertex(self, ty: Ty) -> int:
        try:
            return self.index[ty]
        except KeyError:
            raise ValidationError(f"type {ty} is not a vertex of the operad graph") from None

    def report(self) -> dict:
        sig = self.signature
        return {
            "max_product_len": self.max_product_len,
            "vertices": [str(v) for v in self.vertices],
            "edges": [
                {"dom": str(e.dom), "cod": str(e.cod), "label": e.label(sig)} for e in self.edges
            ],
            "recursion_sites": [str(s) for s in self.sites],
            "truncated": [
                {"while_processing": str(t.processed), "dom": str(t.dom), "cod": str(t.cod)}
                for t in self.truncations
            ],
        }


def chunks(ty: Ty, vertices) -> list[Ty]:
    """Partition ``ty`` into contiguous sublists that are all vertices.

    Uses length-1 pieces when every factor is a vertex; otherwise the
    leftmost-longest partition found by backtracking.
    """
    vs = set(vertices)
    if all(Ty(f) in vs for f in ty):
        return [Ty(f) for f in ty]

    def search(start: int) -> list[Ty] | None:
        if start == len(ty):
            return []
        for stop in range(len(ty), start, -1):
            piece = ty[start:stop]
            if piece in vs and piece != ty:
                rest = search(stop)
                if rest is not None:
                    return [piece] + rest
        return None

    found = search(0)
    if found is None:
        raise ChunkingError(f"{ty} cannot be split into vertices")
    return found


def build_hypergraph(sig: Signature, max_product_len: int = DEFAULT_MAX_PRODUCT_LEN) -> OperadGraph:
    if max_product_len < sig.longest_object:
        raise ValidationError(
            f"max_product_len={max_product_len} is shorter than the longest object "
            f"({sig.longest_object})"
        )
    vertices: list[Ty] = list(sig.objects)
    vset = set(vertices)
    edges: list[Edge] = [Edge(g.dom, g.cod, "gen", i) for i, g in enumerate(sig.generators)]
    sites: list[RecursionSite] = []
    truncations: list[Truncation] = []
    stack = [v for v in vertices if len(v) > 1]

    while stack:
        ty = stack.pop()
        inhabitants = []
        for c in chunks(ty, vset):
            # dict keeps first-seen order and drops duplicate (dom, cod) pairs
            found = {(e.dom, c): None for e in edges if e.cod == c}
            inhabitants.append(list(found))
        for combo in itertools.product(*inhabitants):
            d = tensor(*(p[0] for p in combo))
            c = tensor(*(p[1] for p in combo))
            if is_sublist(d, ty):
                continue
            if len(d) > max_product_len:
                truncations.append(Truncation(ty, d, c))
                continue
            sites.append(RecursionSite(tuple(combo)))
            edges.append(Edge(d, c, "site", len(sites) - 1))
            if d not in vset:
                stack.append(d)
                vertices.append(d)
                vset.add(d)

    return OperadGraph(sig, tuple(vertices), tuple(edges), tuple(sites), max_product_len,
                       tuple(truncations))


def adjacency_matrix(g: OperadGraph) -> np.ndarray:
    """A[i, j] = number of edges from vertex i to vertex j."""
    n = len(g.vertices)
    a = np.zeros((n, n), dtype=np.int64)
    for e in g.edges:
        a[g.index[e.dom], g.index[e.cod]] += 1
    return a


def _dot_quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(g: OperadGraph) -> str:
    lines = ["digraph {"]
    for i, v in enumerate(g.vertices):
        lines.append(f"  v{i} [label={_dot_quote(str(v))}];")
    for e in g.edges:
        lines.append(
            f"  v{g.index[e.dom]} -> v{g.index[e.cod]} [label={_dot_quote(e.label(g.signature))}];"
        )
    lines.append("}")
    return "\n".join(lines) + "\n"
