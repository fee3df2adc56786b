"""The free operad prior over morphisms.

A draw first samples a precision ``beta ~ Gamma(1, 1)`` and generator weights
``w ~ Dirichlet(1, ..., 1)`` (one entry per generator, then one per recursion
site). A morphism from ``dom`` to ``cod`` is then grown by an absorbing Markov
chain over the operad graph: from the current type, an outgoing edge ``e`` is
picked with probability proportional to ``exp(-d(cod(e), cod) / beta)``, and
the edge is filled either by a generator or, through a recursion site, by a
parallel product of sub-paths sampled at ``beta + 1``.

Every stochastic choice is recorded in a :class:`PathTrace`, whose
``log_prior`` is the exact log-probability of that trace given
``(beta, w)``.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import DeadEnd, DomainError, InconsistentTrace, NoCandidates, StepCapExceeded
from .hypergraph import OperadGraph
from .signature import Ty
from .terms import Gen, Id, Term, compose_seq, par

DEFAULT_STEP_CAP = 256
DEFAULT_MAX_DEPTH = 64


# -- hyperparameters ----------------------------------------------------------

@dataclass(frozen=True)
class Hyperparams:
    beta: float
    weights: tuple[float, ...]

    def __post_init__(self):
        if not self.beta > 0 or not math.isfinite(self.beta):
            raise DomainError(f"beta must be positive and finite, got {self.beta}")
        w = tuple(float(x) for x in self.weights)
        if not w or min(w) < 0 or abs(sum(w) - 1.0) > 1e-12:
            raise DomainError("weights must be a non-negative vector summing to 1")
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, n: int, beta: float = 1.0) -> Hyperparams:
        return cls(beta, tuple([1.0 / n] * n))

    @classmethod
    def sample(cls, n: int, rng: np.random.Generator) -> Hyperparams:
        return cls(sample_beta(rng), tuple(sample_weights(rng, n)))


def sample_beta(rng: np.random.Generator) -> float:
    return float(rng.standard_gamma(1.0))


def log_pdf_beta(beta: float) -> float:
    """Log density of Gamma(shape=1, rate=1), i.e. ``-beta``."""
    if not beta > 0:
        raise DomainError(f"beta must be positive, got {beta}")
    return -float(beta)


def sample_weights(rng: np.random.Generator, n: int) -> np.ndarray:
    if n < 1:
        raise DomainError("weight vector needs at least one entry")
    if n == 1:
        return np.ones(1)
    w = rng.dirichlet(np.ones(n))
    return w / w.sum()


def _check_simplex(w) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 1 or w.size < 1 or np.any(w < -1e-9) or abs(w.sum() - 1.0) > 1e-9:
        raise DomainError("weights are not on the probability simplex")
    return w


def log_pdf_weights(w) -> float:
    """Uniform Dirichlet density: ``log Gamma(n)`` anywhere on the simplex."""
    w = _check_simplex(w)
    return float(gammaln(w.size))


def gamma_log_pdf(x: float, shape: float, rate: float) -> float:
    if not x > 0:
        return -math.inf
    return float(shape * math.log(rate) - gammaln(shape) + (shape - 1) * math.log(x) - rate * x)


def dirichlet_log_pdf(w, alpha) -> float:
    w = _check_simplex(w)
    alpha = np.asarray(alpha, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(alpha == 1.0, 0.0, (alpha - 1.0) * np.log(w))
    return float(gammaln(alpha.sum()) - gammaln(alpha).sum() + terms.sum())


# -- traces -------------------------------------------------------------------

@dataclass(frozen=True)
class Choice:
    """Which generator or recursion site filled an edge."""

    candidates: tuple[tuple[str, int], ...]
    weights: tuple[float, ...]  # unnormalised, site entries already divided by beta
    index: int
    log_prob: float
    sub_traces: tuple[PathTrace, ...] = ()

    @property
    def chosen(self) -> tuple[str, int]:
        return self.candidates[self.index]


@dataclass(frozen=True)
class Step:
    edge: int
    log_pi: float
    choice: Choice


@dataclass(frozen=True)
class PathTrace:
    dom: Ty
    cod: Ty
    beta: float
    term: Term
    steps: tuple[Step, ...]
    log_prior: float

    @property
    def edges(self) -> list[int]:
        return [s.edge for s in self.steps]

    @property
    def choices(self) -> list[Choice]:
        return [s.choice for s in self.steps]

    @property
    def sub_traces(self) -> list[PathTrace]:
        return [t for s in self.steps for t in s.choice.sub_traces]

    def key(self) -> tuple:
        """Hashable identity of the sequence of stochastic choices."""
        return tuple(
            (s.edge, s.choice.chosen, tuple(t.key() for t in s.choice.sub_traces))
            for s in self.steps
        )


def trace_record(trace: PathTrace, hyper: Hyperparams) -> dict:
    from .terms import print_term

    return {
        "term": print_term(trace.term),
        "log_prior": trace.log_prior,
        "beta": hyper.beta,
        "weights": list(hyper.weights),
        "steps": trace.edges,
    }


# -- the sampler ----------------------------------------------------------------

@dataclass(frozen=True)
class PolicyTable:
    edges: tuple[int, ...]
    probs: tuple[float, ...]
    log_probs: tuple[float, ...]
    cumulative: tuple[float, ...]


class FreeOperadPrior:
    """Path sampler and trace density over one operad graph."""

    def __init__(self, graph: OperadGraph, dist=None, step_cap: int = DEFAULT_STEP_CAP,
                 max_depth: int = DEFAULT_MAX_DEPTH):
        if step_cap < 1:
            raise DomainError("step_cap must be at least 1")
        self.graph = graph
        self.dist = graph.distances if dist is None else dist
        self.step_cap = step_cap
        self.max_depth = max_depth
        self._n_gens = len(graph.signature.generators)
        self._policies: dict[tuple[int, int, float], PolicyTable] = {}

    # policy -------------------------------------------------------------------
    def policy_table(self, src: int, dst: int, beta: float) -> PolicyTable:
        key = (src, dst, beta)
        table = self._policies.get(key)
        if table is None:
            table = self._policies[key] = self._make_policy(src, dst, beta)
        return table

    def _make_policy(self, src: int, dst: int, beta: float) -> PolicyTable:
        g = self.graph
        d = self.dist.entries
        edges, logits = [], []
        for k in g.out_edges[src]:
            dk = d[g.index[g.edges[k].cod], dst]
            if math.isfinite(dk):
                edges.append(k)
                logits.append(-dk / beta)
        if not edges:
            raise DeadEnd(f"no edge out of {g.vertices[src]} can reach {g.vertices[dst]}")
        top = max(logits)
        lse = top + math.log(math.fsum(math.exp(x - top) for x in logits))
        log_probs = [x - lse for x in logits]
        probs = [math.exp(x) for x in log_probs]
        if not all(p > 0 for p in probs):
            keep = [i for i, p in enumerate(probs) if p > 0]
            edges = [edges[i] for i in keep]
            log_probs = [log_probs[i] for i in keep]
            probs = [probs[i] for i in keep]
        cum = list(np.cumsum(probs))
        return PolicyTable(tuple(edges), tuple(probs), tuple(log_probs), tuple(cum))

    def policy(self, ty1: Ty, ty2: Ty, beta: float) -> dict[int, float]:
        """Edge index -> probability of taking that edge from ``ty1`` toward ``ty2``."""
        t = self.policy_table(self.graph.vertex(ty1), self.graph.vertex(ty2), float(beta))
        return dict(zip(t.edges, t.probs))

    # filling edges ------------------------------------------------------------
    def choice_weights(self, edge: int, beta: float, weights) -> tuple[tuple, list[float]]:
        e = self.graph.edges[edge]
        cands = self.graph.candidates.get((e.dom, e.cod), ())
        ws = []
        for kind, i in cands:
            if kind == "gen":
                ws.append(float(weights[i]))
            else:
                ws.append(float(weights[self._n_gens + i]) / beta)
        if not cands or not sum(ws) > 0:
            raise NoCandidates(f"edge #{edge} ({e.dom} -> {e.cod}) has no fillable candidate")
        return cands, ws

    def fill_generator(self, edge: int, beta: float, weights, rng, _depth: int = 0) -> tuple[Term, Choice]:
        cands, ws = self.choice_weights(edge, beta, weights)
        total = math.fsum(ws)
        if len(cands) == 1:
            j = 0
        else:
            u = rng.random() * total
            j = min(bisect.bisect_right(list(np.cumsum(ws)), u), len(ws) - 1)
            while ws[j] == 0:
                j -= 1
        log_prob = math.log(ws[j] / total)
        kind, i = cands[j]
        if kind == "gen":
            term: Term = Gen.of(self.graph.signature.generators[i])
            return term, Choice(cands, tuple(ws), j, log_prob)
        if _depth + 1 > self.max_depth:
            raise StepCapExceeded(f"recursion deeper than {self.max_depth}")
        subs = tuple(
            self._sample_path(d, c, beta + 1.0, weights, rng, _depth + 1)
            for d, c in self.graph.sites[i].pairs
        )
        term = par([s.term for s in subs])
        return term, Choice(cands, tuple(ws), j, log_prob, subs)

    # paths --------------------------------------------------------------------
    def sample_path(self, dom: Ty, cod: Ty, beta: float, weights, rng) -> PathTrace:
        return self._sample_path(dom, cod, float(beta), weights, rng, 0)

    def _sample_path(self, dom: Ty, cod: Ty, beta: float, weights, rng, depth: int) -> PathTrace:
        if dom == cod:
            return PathTrace(dom, cod, beta, Id(dom), (), 0.0)
        g = self.graph
        src, dst = g.vertex(dom), g.vertex(cod)
        if not math.isfinite(self.dist.entries[src, dst]):
            raise DeadEnd(f"{cod} is unreachable from {dom}")
        term: Term = Id(dom)
        steps: list[Step] = []
        total = 0.0
        cur = src
        while cur != dst:
            if len(steps) >= self.step_cap:
                raise StepCapExceeded(f"path {dom} -> {cod} exceeded {self.step_cap} steps")
            table = self.policy_table(cur, dst, beta)
            if len(table.edges) == 1:
                k = 0
            else:
                k = bisect.bisect_right(table.cumulative, rng.random() * table.cumulative[-1])
                k = min(k, len(table.edges) - 1)
            edge = table.edges[k]
            filled, choice = self.fill_generator(edge, beta, weights, rng, depth)
            term = compose_seq(term, filled)
            step_lp = table.log_probs[k] + choice.log_prob + sum(t.log_prior for t in choice.sub_traces)
            steps.append(Step(edge, table.log_probs[k], choice))
            total += step_lp
            cur = g.index[g.edges[edge].cod]
        return PathTrace(dom, cod, beta, term, tuple(steps), total)

    # density ------------------------------------------------------------------
    def log_prior(self, trace: PathTrace, beta: float, weights) -> float:
        """Recompute log p(trace | beta, w) from the graph and the recorded choices."""
        return self._log_prior(trace, float(beta), weights)

    def _log_prior(self, trace: PathTrace, beta: float, weights) -> float:
        g = self.graph
        if trace.dom == trace.cod:
            if trace.steps:
                raise InconsistentTrace("a path between equal types must be empty")
            return 0.0
        cur, dst = g.vertex(trace.dom), g.vertex(trace.cod)
        total = 0.0
        for n, step in enumerate(trace.steps):
            if cur == dst:
                raise InconsistentTrace(f"step {n} continues past the target")
            if not 0 <= step.edge < len(g.edges) or g.index[g.edges[step.edge].dom] != cur:
                raise InconsistentTrace(f"step {n}: edge #{step.edge} does not leave {g.vertices[cur]}")
            table = self.policy_table(cur, dst, beta)
            try:
                k = table.edges.index(step.edge)
            except ValueError:
                raise InconsistentTrace(f"step {n}: edge #{step.edge} has zero probability") from None
            total += table.log_probs[k]
            cands, ws = self.choice_weights(step.edge, beta, weights)
            ch = step.choice
            if tuple(cands) != tuple(ch.candidates) or not 0 <= ch.index < len(cands):
                raise InconsistentTrace(f"step {n}: recorded candidates do not match the graph")
            if ws[ch.index] <= 0:
                raise InconsistentTrace(f"step {n}: chosen candidate has zero weight")
            total += math.log(ws[ch.index] / math.fsum(ws))
            kind, i = ch.chosen
            if kind == "site":
                pairs = g.sites[i].pairs
                if len(pairs) != len(ch.sub_traces):
                    raise InconsistentTrace(f"step {n}: wrong number of sub-paths")
                for (d, c), sub in zip(pairs, ch.sub_traces):
                    if (sub.dom, sub.cod) != (d, c):
                        raise InconsistentTrace(f"step {n}: sub-path typed {sub.dom}->{sub.cod}, "
                                                f"expected {d}->{c}")
                    total += self._log_prior(sub, beta + 1.0, weights)
            elif ch.sub_traces:
                raise InconsistentTrace(f"step {n}: generator choice with sub-paths")
            cur = g.index[g.edges[step.edge].cod]
        if cur != dst:
            raise InconsistentTrace("trace stops before reaching its codomain")
        return total
