"""Evidence estimation and structure posteriors.

The proposal for structures is always the prior conditional p(f | beta, w);
only the distribution of ``(beta, w)`` changes between plain importance
sampling (prior), the ELBO and the posterior (a Gamma x Dirichlet family).
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import digamma, gammaln, logsumexp

from .errors import (
    AllParticlesFailed,
    DomainError,
    EvaluationError,
    NonFiniteGradient,
    StepCapExceeded,
    TypeMismatch,
    ValidationError,
)
from .prior import (
    FreeOperadPrior,
    Hyperparams,
    dirichlet_log_pdf,
    gamma_log_pdf,
    log_pdf_beta,
    log_pdf_weights,
)
from .signature import Ty
from .streams import stream
from .tasks import Task
from .terms import Gen, Id, Term, canonicalize, compose_seq, evaluate, par, print_term
from .wiring import WiringDiagram, compose_diagram, sample_diagram

_LOG_2PI = math.log(2.0 * math.pi)


# -- likelihood -----------------------------------------------------------------

def log_likelihood(task: Task, f: Term) -> float:
    """Sum over records of log N(y; f(x), sigma^2) (or 0 for a flat likelihood)."""
    data = task.dataset
    if f.dom != data.input_ty or f.cod != data.output_ty:
        raise TypeMismatch((data.input_ty, data.output_ty), (f.dom, f.cod), "task vs morphism")
    if task.likelihood.kind == "flat":
        return 0.0
    cols = tuple(data.inputs[:, k] for k in range(data.inputs.shape[1]))
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            out = evaluate(f, task.interpreter, cols)
            pred = np.column_stack([np.broadcast_to(np.asarray(o, dtype=np.float64), (len(data),))
                                    for o in out]) if out else np.zeros((len(data), 0))
    except (TypeError, ValueError):
        pred = np.asarray([evaluate(f, task.interpreter, x) for x, _ in data.records], dtype=np.float64)
    if not np.all(np.isfinite(pred)):
        return -math.inf
    sigma = task.likelihood.sigma
    resid = (data.outputs - pred) / sigma
    n = resid.size
    return float(-0.5 * np.sum(resid * resid) - n * (math.log(sigma) + 0.5 * _LOG_2PI))


# -- exhaustive enumeration -------------------------------------------------------

@dataclass(frozen=True)
class EnumeratedTrace:
    term: Term
    log_prob: float
    key: tuple


@dataclass(frozen=True)
class Enumeration:
    entries: tuple[EnumeratedTrace, ...]
    truncated_mass: float

    @property
    def mass(self) -> float:
        return math.fsum(math.exp(e.log_prob) for e in self.entries)

    def terms(self) -> list[tuple[Term, float]]:
        return [(e.term, e.log_prob) for e in self.entries]


def enumerate_morphisms(prior: FreeOperadPrior, dom: Ty, cod: Ty, beta: float, weights,
                        max_steps: int, max_recursion_depth: int) -> Enumeration:
    """Every trace from ``dom`` to ``cod`` within the caps, with exact log p(trace | beta, w).

    Paths longer than ``max_steps`` and recursion deeper than
    ``max_recursion_depth`` are cut; their total probability is reported as
    ``truncated_mass``.
    """
    memo: dict = {}
    entries, trunc = _enum_path(prior, dom, cod, float(beta), weights, max_steps,
                                max_recursion_depth, 0, memo)
    return Enumeration(tuple(entries), trunc)


def _enum_path(prior, dom, cod, beta, weights, max_steps, max_depth, depth, memo):
    key = (dom, cod, beta, depth)
    if key in memo:
        return memo[key]
    if dom == cod:
        memo[key] = ([EnumeratedTrace(Id(dom), 0.0, ())], 0.0)
        return memo[key]
    g = prior.graph
    src, dst = g.vertex(dom), g.vertex(cod)
    out: list[EnumeratedTrace] = []
    trunc = 0.0
    if not math.isfinite(prior.dist.entries[src, dst]):
        memo[key] = (out, 0.0)
        return memo[key]
    # depth-first over (vertex, term, log p, choices so far, steps)
    stack = [(src, Id(dom), 0.0, (), 0)]
    while stack:
        cur, term, lp, steps, n = stack.pop()
        if cur == dst:
            out.append(EnumeratedTrace(term, lp, steps))
            continue
        if n >= max_steps:
            trunc += math.exp(lp)
            continue
        table = prior.policy_table(cur, dst, beta)
        nxt = []
        for edge, lp_e in zip(table.edges, table.log_probs):
            cands, ws = prior.choice_weights(edge, beta, weights)
            total = math.fsum(ws)
            cod_v = g.index[g.edges[edge].cod]
            for j, (kind, i) in enumerate(cands):
                if ws[j] <= 0:
                    continue
                lp_c = lp + lp_e + math.log(ws[j] / total)
                if kind == "gen":
                    t = compose_seq(term, Gen.of(g.signature.generators[i]))
                    nxt.append((cod_v, t, lp_c, steps + ((edge, (kind, i), ()),), n + 1))
                    continue
                if depth + 1 > max_depth:
                    trunc += math.exp(lp_c)
                    continue
                subs = [_enum_path(prior, d, c, beta + 1.0, weights, max_steps, max_depth,
                                   depth + 1, memo) for d, c in g.sites[i].pairs]
                kept = 1.0
                for entries, _ in subs:
                    kept *= math.fsum(math.exp(e.log_prob) for e in entries)
                trunc += math.exp(lp_c) * max(0.0, 1.0 - kept)
                for combo in itertools.product(*(entries for entries, _ in subs)):
                    t = compose_seq(term, par([e.term for e in combo]))
                    lp_s = lp_c + math.fsum(e.log_prob for e in combo)
                    sk = (edge, (kind, i), tuple(e.key for e in combo))
                    nxt.append((cod_v, t, lp_s, steps + (sk,), n + 1))
        stack.extend(reversed(nxt))
    memo[key] = (out, trunc)
    return memo[key]


@dataclass(frozen=True)
class DiagramEnumeration:
    entries: tuple[tuple[Term, float, tuple], ...]  # composite term, log p, per-box keys
    truncated_mass: float


def enumerate_diagram(prior: FreeOperadPrior, d: WiringDiagram, beta: float, weights,
                      max_steps: int, max_recursion_depth: int) -> DiagramEnumeration:
    per_box = [enumerate_morphisms(prior, dom, cod, beta, weights, max_steps, max_recursion_depth)
               for dom, cod in d.boxes]
    kept = 1.0
    for e in per_box:
        kept *= e.mass
    entries = []
    for combo in itertools.product(*(e.entries for e in per_box)):
        term = compose_diagram(d, [c.term for c in combo])
        entries.append((term, math.fsum(c.log_prob for c in combo), tuple(c.key for c in combo)))
    return DiagramEnumeration(tuple(entries), max(0.0, 1.0 - kept))


# -- variational family -----------------------------------------------------------

@dataclass(frozen=True)
class VariationalParams:
    gamma_shape: float
    gamma_rate: float
    dirichlet_conc: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "dirichlet_conc", tuple(float(a) for a in self.dirichlet_conc))
        vals = (self.gamma_shape, self.gamma_rate) + self.dirichlet_conc
        if not self.dirichlet_conc or not all(v > 0 and math.isfinite(v) for v in vals):
            raise DomainError("variational parameters must be positive and finite")

    @classmethod
    def prior(cls, n_weights: int) -> VariationalParams:
        return cls(1.0, 1.0, tuple([1.0] * n_weights))

    @classmethod
    def from_log(cls, phi: np.ndarray) -> VariationalParams:
        e = np.exp(phi)
        return cls(float(e[0]), float(e[1]), tuple(float(x) for x in e[2:]))

    def to_log(self) -> np.ndarray:
        return np.log(np.array((self.gamma_shape, self.gamma_rate) + self.dirichlet_conc))

    def sample(self, rng: np.random.Generator) -> Hyperparams:
        beta = float(rng.gamma(self.gamma_shape, 1.0 / self.gamma_rate))
        beta = max(beta, np.finfo(float).tiny)
        alpha = np.asarray(self.dirichlet_conc)
        w = rng.dirichlet(alpha) if alpha.size > 1 else np.ones(1)
        w = np.maximum(w, np.finfo(float).tiny)
        return Hyperparams(beta, tuple(w / w.sum()))

    def log_q(self, h: Hyperparams) -> float:
        return (gamma_log_pdf(h.beta, self.gamma_shape, self.gamma_rate)
                + dirichlet_log_pdf(h.weights, self.dirichlet_conc))

    def score(self, h: Hyperparams) -> np.ndarray:
        """Gradient of log q(beta, w) with respect to the log-parameters."""
        a, b = self.gamma_shape, self.gamma_rate
        alpha = np.asarray(self.dirichlet_conc)
        w = np.asarray(h.weights)
        d_a = math.log(b) - digamma(a) + math.log(h.beta)
        d_b = a / b - h.beta
        d_alpha = digamma(alpha.sum()) - digamma(alpha) + np.log(w)
        return np.concatenate(([a * d_a, b * d_b], alpha * d_alpha))

    def to_dict(self) -> dict:
        return {"gamma_shape": self.gamma_shape, "gamma_rate": self.gamma_rate,
                "dirichlet_conc": list(self.dirichlet_conc)}


def kl_gamma(a: float, b: float, a0: float = 1.0, b0: float = 1.0) -> float:
    """KL(Gamma(a, rate b) || Gamma(a0, rate b0))."""
    return float((a - a0) * digamma(a) - gammaln(a) + gammaln(a0)
                 + a0 * (math.log(b) - math.log(b0)) + a * (b0 - b) / b)


def kl_dirichlet(alpha, alpha0) -> float:
    alpha, alpha0 = np.asarray(alpha, float), np.asarray(alpha0, float)
    s = alpha.sum()
    return float(gammaln(s) - gammaln(alpha).sum() - gammaln(alpha0.sum()) + gammaln(alpha0).sum()
                 + np.sum((alpha - alpha0) * (digamma(alpha) - digamma(s))))


# -- particles ----------------------------------------------------------------------

@dataclass(frozen=True)
class Particle:
    hyper: Hyperparams
    term: Term | None  # None when the particle failed
    log_lik: float
    log_prior_hyper: float  # log p(beta) + log p(w)
    log_q_hyper: float  # log q(beta, w) under the proposal actually used


def _draw(prior, d, task, seed, key, hyper, q, cache) -> Particle:
    if hyper is not None:
        h = hyper
    elif q is not None:
        h = q.sample(stream(seed, *key, 0))
    else:
        h = Hyperparams.sample(prior.graph.n_weights, stream(seed, *key, 0))
    lp_h = log_pdf_beta(h.beta) + log_pdf_weights(h.weights)
    lq_h = lp_h if q is None else q.log_q(h)
    rngs = [stream(seed, *key, 1 + b) for b in range(len(d.boxes))]
    try:
        sample = sample_diagram(prior, d, h, rngs)
        term = compose_diagram(d, [t.term for t in sample.traces])
    except StepCapExceeded:
        return Particle(h, None, -math.inf, lp_h, lq_h)
    ll = cache.get(term)
    if ll is None:
        try:
            ll = log_likelihood(task, term)
        except EvaluationError:
            ll = -math.inf
        cache[term] = ll
    return Particle(h, term, ll, lp_h, lq_h)


def _draw_chunk(args) -> list[Particle]:
    prior, d, task, seed, keys, hyper, q = args
    cache: dict = {}
    return [_draw(prior, d, task, seed, k, hyper, q, cache) for k in keys]


def draw_particles(prior: FreeOperadPrior, d: WiringDiagram, task: Task, n: int, seed: int,
                   hyper: Hyperparams | None = None, q: VariationalParams | None = None,
                   workers: int = 1, prefix: tuple = ()) -> list[Particle]:
    """Particles ``i = 0..n-1``, each from its own stream ``(seed, *prefix, i)``.

    ``hyper`` fixes (beta, w); otherwise they come from ``q`` or, if ``q`` is
    None, from the prior. The result does not depend on ``workers``.
    """
    keys = [prefix + (i,) for i in range(n)]
    if workers <= 1 or n < 2 * workers:
        return _draw_chunk((prior, d, task, seed, keys, hyper, q))
    size = math.ceil(n / workers)
    chunks = [keys[i:i + size] for i in range(0, n, size)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(_draw_chunk, [(prior, d, task, seed, c, hyper, q) for c in chunks])
        return [p for part in parts for p in part]


# -- importance sampling ------------------------------------------------------------

@dataclass(frozen=True)
class EvidenceReport:
    log_z_hat: float
    ess: float
    n_particles: int
    seed: int

    def to_dict(self) -> dict:
        return asdict(self)


def ess_from_log_weights(logw: np.ndarray) -> float:
    finite = logw[np.isfinite(logw)]
    if finite.size == 0:
        return 0.0
    w = np.exp(finite - finite.max())
    return float(w.sum() ** 2 / np.sum(w * w))


def importance_log_weights(prior: FreeOperadPrior, d: WiringDiagram, task: Task, n_particles: int,
                           seed: int, hyper: Hyperparams | None = None, workers: int = 1) -> np.ndarray:
    """log p(x | f) for prior particles: the prior terms cancel against the proposal."""
    particles = draw_particles(prior, d, task, n_particles, seed, hyper=hyper, workers=workers)
    return np.array([p.log_lik for p in particles])


def snis_evidence(prior: FreeOperadPrior, d: WiringDiagram, task: Task, n_particles: int,
                  seed: int, hyper: Hyperparams | None = None, workers: int = 1) -> EvidenceReport:
    """Importance-sampling estimate of log p(x) (or of log p(x | beta, w) when ``hyper`` is given)."""
    if n_particles < 2:
        raise ValidationError("snis_evidence needs at least two particles")
    logw = importance_log_weights(prior, d, task, n_particles, seed, hyper, workers)
    if not np.any(np.isfinite(logw)):
        raise AllParticlesFailed(f"all {n_particles} particles have zero weight")
    log_z = float(logsumexp(logw) - math.log(n_particles))
    return EvidenceReport(log_z, ess_from_log_weights(logw), n_particles, seed)


# -- ELBO -------------------------------------------------------------------------------

def elbo_terms(prior: FreeOperadPrior, d: WiringDiagram, task: Task, q: VariationalParams,
               n_samples: int, seed: int, workers: int = 1, prefix: tuple = ()) -> tuple[np.ndarray, list]:
    """Per-sample log p(x|f) + log p(beta) + log p(w) - log q(beta) - log q(w)."""
    particles = draw_particles(prior, d, task, n_samples, seed, q=q, workers=workers, prefix=prefix)
    for p in particles:
        if p.term is None:
            raise StepCapExceeded("a structure sample exceeded the step cap during ELBO estimation")
    vals = np.array([p.log_lik + p.log_prior_hyper - p.log_q_hyper for p in particles])
    return vals, particles


def elbo(prior: FreeOperadPrior, d: WiringDiagram, task: Task, q: VariationalParams,
         n_samples: int, seed: int, workers: int = 1) -> float:
    vals, _ = elbo_terms(prior, d, task, q, n_samples, seed, workers)
    return float(vals.mean())


@dataclass
class FitResult:
    params: VariationalParams
    trajectory: list[tuple[int, float, float]] = field(default_factory=list)  # step, elbo, stderr

    def trajectory_csv(self) -> str:
        lines = ["step,elbo,stderr"]
        lines += [f"{s},{e!r},{se!r}" for s, e, se in self.trajectory]
        return "\n".join(lines) + "\n"


def fit_variational(prior: FreeOperadPrior, d: WiringDiagram, task: Task, steps: int,
                    step_size: float, n_samples: int, seed: int,
                    init: VariationalParams | None = None, workers: int = 1,
                    log_bounds: tuple[float, float] = (-4.0, 6.0)) -> FitResult:
    """Score-function gradient ascent on the ELBO in log-parameter space.

    Each step draws ``n_samples`` from q, uses the leave-one-out mean of the
    other samples as a baseline, and applies an Adam update of size
    ``step_size``.
    """
    if steps < 0 or n_samples < 2 or not step_size > 0:
        raise ValidationError("need steps >= 0, n_samples >= 2 and step_size > 0")
    q = init if init is not None else VariationalParams.prior(prior.graph.n_weights)
    phi = q.to_log()
    m = np.zeros_like(phi)
    v = np.zeros_like(phi)
    b1, b2, eps = 0.9, 0.999, 1e-8
    result = FitResult(q)
    for s in range(steps):
        vals, particles = elbo_terms(prior, d, task, q, n_samples, seed, workers, prefix=(s,))
        if not np.all(np.isfinite(vals)):
            raise NonFiniteGradient(f"step {s}: non-finite ELBO sample(s) under {q.to_dict()}")
        scores = np.array([q.score(p.hyper) for p in particles])
        baseline = (vals.sum() - vals) / (n_samples - 1)
        grad = ((vals - baseline)[:, None] * scores).mean(axis=0)
        if not np.all(np.isfinite(grad)):
            raise NonFiniteGradient(f"step {s}: gradient {grad} under {q.to_dict()}")
        result.trajectory.append((s, float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n_samples))))
        m = b1 * m + (1 - b1) * grad
        v = b2 * v + (1 - b2) * grad * grad
        mhat = m / (1 - b1 ** (s + 1))
        vhat = v / (1 - b2 ** (s + 1))
        phi = np.clip(phi + step_size * mhat / (np.sqrt(vhat) + eps), *log_bounds)
        q = VariationalParams.from_log(phi)
    result.params = q
    return result


# -- posterior --------------------------------------------------------------------------

@dataclass(frozen=True)
class PosteriorEntry:
    term: Term
    weight: float

    def to_dict(self) -> dict:
        return {"term": print_term(self.term), "weight": self.weight}


def posterior_samples(prior: FreeOperadPrior, d: WiringDiagram, task: Task, q: VariationalParams,
                      n: int, seed: int, workers: int = 1) -> list[PosteriorEntry]:
    """Self-normalised posterior over canonical terms, proposals from q(beta, w) p(f | beta, w)."""
    if n < 1:
        raise ValidationError("posterior_samples needs n >= 1")
    particles = draw_particles(prior, d, task, n, seed, q=q, workers=workers)
    logw = np.array([p.log_lik + p.log_prior_hyper - p.log_q_hyper for p in particles])
    if not np.any(np.isfinite(logw)):
        raise AllParticlesFailed(f"all {n} posterior particles have zero weight")
    w = np.exp(logw - logsumexp(logw))
    totals: dict[str, float] = {}
    terms: dict[str, Term] = {}
    for p, wi in zip(particles, w):
        if p.term is None or wi == 0.0:
            continue
        c = canonicalize(p.term)
        k = print_term(c)
        terms[k] = c
        totals[k] = totals.get(k, 0.0) + float(wi)
    s = math.fsum(totals.values())
    ordered = sorted(totals.items(), key=lambda kv: (-kv[1], kv[0]))
    return [PosteriorEntry(terms[k], v / s) for k, v in ordered]
