"""Independent reference computations for the prior and posterior.

Nothing here calls the package's distance, policy or enumeration code:
distances come from an mpmath exponential, the softmin and the candidate
matching are recomputed from the signature and the site list, and the
beta integral is done by adaptive quadrature and the w integral by exact
Dirichlet moments.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy.integrate import quad
from scipy.special import gammaln, logsumexp

from freeoperad.terms import Gen, Id, Seq, canonicalize, par, print_term


def mp_distances(adjacency) -> np.ndarray:
    a = np.asarray(adjacency)
    n = a.shape[0]
    with mpmath.workdps(40):
        e = mpmath.expm(mpmath.matrix(a.tolist()))
        out = np.empty((n, n))
        for i in range(n):
            for j in range(n):
                v = e[i, j]
                out[i, j] = math.inf if v < mpmath.mpf("1e-300") else float(-mpmath.log(v))
    return out


@dataclass(frozen=True)
class Structure:
    """One complete trace with its beta- and w-dependence kept symbolic."""

    term: object
    key: tuple
    steps: tuple  # (src vertex, dst vertex, edge index, depth)
    choices: tuple  # (candidates, chosen position, depth)


class BruteForce:
    def __init__(self, graph):
        self.graph = graph
        self.sig = graph.signature
        self.vindex = {v: i for i, v in enumerate(graph.vertices)}
        self.dist = mp_distances(graph.adjacency)
        self.out = defaultdict(list)
        for k, e in enumerate(graph.edges):
            self.out[self.vindex[e.dom]].append(k)

    def candidates(self, dom, cod):
        gens = [("gen", i) for i, g in enumerate(self.sig.generators) if (g.dom, g.cod) == (dom, cod)]
        sites = [("site", k) for k, s in enumerate(self.graph.sites) if (s.dom, s.cod) == (dom, cod)]
        return tuple(gens + sites)

    def support(self, src, dst):
        return [k for k in self.out[src] if math.isfinite(self.dist[self.vindex[self.graph.edges[k].cod], dst])]

    # -- structure enumeration -------------------------------------------------------
    def structures(self, dom, cod, max_steps, max_depth, depth=0):
        """All complete traces within the caps."""
        if dom == cod:
            return [Structure(Id(dom), (), (), ())]
        dst = self.vindex[cod]
        if not math.isfinite(self.dist[self.vindex[dom], dst]):
            return []
        results = []

        def walk(cur, term, key, steps, choices, n):
            if cur == dst:
                results.append(Structure(term, key, steps, choices))
                return
            if n >= max_steps:
                return
            for k in self.support(cur, dst):
                e = self.graph.edges[k]
                cands = self.candidates(e.dom, e.cod)
                nxt = self.vindex[e.cod]
                for pos, (kind, i) in enumerate(cands):
                    st = steps + ((cur, dst, k, depth),)
                    ch = choices + ((cands, pos, depth),)
                    if kind == "gen":
                        t = _then(term, Gen.of(self.sig.generators[i]))
                        walk(nxt, t, key + ((k, (kind, i), ()),), st, ch, n + 1)
                        continue
                    if depth + 1 > max_depth:
                        continue
                    subs = [self.structures(d, c, max_steps, max_depth, depth + 1)
                            for d, c in self.graph.sites[i].pairs]
                    for combo in _product(subs):
                        t = _then(term, par([s.term for s in combo]))
                        sk = (k, (kind, i), tuple(s.key for s in combo))
                        walk(nxt, t, key + (sk,), st + tuple(x for s in combo for x in s.steps),
                             ch + tuple(x for s in combo for x in s.choices), n + 1)

        walk(self.vindex[dom], Id(dom), (), (), (), 0)
        return results

    # -- densities -----------------------------------------------------------------------
    def log_policy(self, src, dst, edge, beta):
        logits = {k: -self.dist[self.vindex[self.graph.edges[k].cod], dst] / beta for k in self.support(src, dst)}
        return logits[edge] - logsumexp(list(logits.values()))

    def log_choice(self, cands, pos, beta, w):
        n_gens = len(self.sig.generators)
        ws = [w[i] if kind == "gen" else w[n_gens + i] / beta for kind, i in cands]
        return math.log(ws[pos] / math.fsum(ws))

    def log_prob(self, s: Structure, beta, w):
        lp = sum(self.log_policy(a, b, k, beta + dep) for a, b, k, dep in s.steps)
        return lp + sum(self.log_choice(c, p, beta + dep, w) for c, p, dep in s.choices)

    def log_policy_part(self, s: Structure, beta):
        return sum(self.log_policy(a, b, k, beta + dep) for a, b, k, dep in s.steps)

    def log_dirichlet_choice_moment(self, s: Structure):
        """log E_w[prod of choice probabilities] under w ~ Dirichlet(1, ..., 1).

        Valid when each candidate set is all generators or a single entry:
        then the per-set normalised weights are independent Dirichlet(1..1).
        """
        counts: dict[tuple, Counter] = defaultdict(Counter)
        for cands, pos, _ in s.choices:
            if len(cands) > 1 and any(kind != "gen" for kind, _ in cands):
                raise NotImplementedError("mixed generator/site candidate set")
            counts[cands][pos] += 1
        total = 0.0
        for cands, c in counts.items():
            k, n = len(cands), sum(c.values())
            total += gammaln(k) - gammaln(k + n) + sum(gammaln(1 + m) for m in c.values())
        return total


def _then(term, t):
    return t if isinstance(term, Id) else Seq(term, t)


def _product(lists):
    if not lists:
        yield ()
        return
    for head in lists[0]:
        for rest in _product(lists[1:]):
            yield (head,) + rest


# -- marginal quantities -------------------------------------------------------------------

def marginal_log_prior(bf: BruteForce, structures):
    """log p(trace) with beta ~ Gamma(1, 1) and w ~ Dirichlet(1) integrated out."""
    out = []
    for s in structures:
        val, _ = quad(lambda b: math.exp(-b + bf.log_policy_part(s, b)), 0, math.inf,
                      epsabs=0, epsrel=1e-10, limit=200)
        out.append(math.log(val) + bf.log_dirichlet_choice_moment(s))
    return np.array(out)


def oracle_posterior(bf, structures, loglik):
    """(log evidence, {canonical term text: posterior probability}) for a one-box task."""
    lp = marginal_log_prior(bf, structures)
    ll = np.array([loglik(s.term) for s in structures])
    joint = lp + ll
    log_z = float(logsumexp(joint))
    post: dict[str, float] = defaultdict(float)
    for s, j in zip(structures, joint):
        post[print_term(canonicalize(s.term))] += math.exp(j - log_z)
    return log_z, dict(post)


def conditional_log_evidence(bf, structures, loglik, beta, w):
    return float(logsumexp([bf.log_prob(s, beta, w) + loglik(s.term) for s in structures]))
