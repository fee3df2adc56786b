"""Command-line interface: ``freeoperad {graph,sample,enumerate,evidence,infer}``.

Exit codes: 0 success, 2 bad input (including unreadable or unwritable
files), 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from .errors import (
    AllParticlesFailed,
    DataIOError,
    FreeOperadError,
    InputError,
    StepCapExceeded,
    ValidationError,
)
from .hypergraph import DEFAULT_MAX_PRODUCT_LEN, build_hypergraph, to_dot
from .inference import enumerate_morphisms, fit_variational, posterior_samples, snis_evidence
from .prior import DEFAULT_MAX_DEPTH, DEFAULT_STEP_CAP, FreeOperadPrior, Hyperparams, trace_record
from .signature import load_signature, parse_ty
from .streams import stream
from .tasks import load_task
from .terms import print_term
from .wiring import WiringDiagram, load_diagram

log = logging.getLogger("freeoperad")


def _write(path, text: str) -> None:
    try:
        p = Path(path)
        p.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise DataIOError(f"cannot write {path}: {exc}") from exc


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=False, allow_nan=True)


def _prior(args, sig) -> FreeOperadPrior:
    graph = build_hypergraph(sig, args.max_product_len)
    return FreeOperadPrior(graph, step_cap=getattr(args, "step_cap", DEFAULT_STEP_CAP),
                           max_depth=getattr(args, "max_depth", DEFAULT_MAX_DEPTH))


def _fixed_hyper(args, n_weights: int) -> Hyperparams | None:
    """Hyperparameters from --beta/--weights, or None to draw them from the prior."""
    if args.beta is None and args.weights is None:
        return None
    beta = 1.0 if args.beta is None else args.beta
    if args.weights in (None, "uniform"):
        return Hyperparams.uniform(n_weights, beta)
    try:
        w = [float(x) for x in args.weights.split(",")]
    except ValueError:
        raise ValidationError(f"--weights must be 'uniform' or a comma-separated list, got {args.weights!r}")
    if len(w) != n_weights:
        raise ValidationError(f"--weights has {len(w)} entries, the graph needs {n_weights}")
    return Hyperparams(beta, tuple(w))


def _diagram_and_task(args, sig):
    d = load_diagram(args.diagram) if args.diagram else None
    task = load_task(args.task, sig, *(d.outer if d else (None, None)))
    if d is None:
        d = WiringDiagram.one_box(task.dataset.input_ty, task.dataset.output_ty)
    return d, task


# -- commands -----------------------------------------------------------------------

def cmd_graph(args) -> int:
    sig = load_signature(args.signature)
    g = build_hypergraph(sig, args.max_product_len)
    _write(args.out, to_dot(g))
    if args.dump_distances:
        _write(args.dump_distances, g.distances.to_csv())
    report = g.report()
    if args.report:
        _write(args.report, _json(report) + "\n")
    else:
        print(_json(report))
    return 0


def cmd_sample(args) -> int:
    sig = load_signature(args.signature)
    prior = _prior(args, sig)
    dom, cod = parse_ty(args.dom), parse_ty(args.cod)
    if args.n < 0:
        raise ValidationError("--n must be non-negative")
    # Fail early on unreachable targets even when n == 0.
    g = prior.graph
    if dom != cod and not math.isfinite(prior.dist.entries[g.vertex(dom), g.vertex(cod)]):
        raise ValidationError(f"{cod} is unreachable from {dom}")
    fixed = _fixed_hyper(args, g.n_weights)
    lines = []
    for i in range(args.n):
        h = fixed or Hyperparams.sample(g.n_weights, stream(args.seed, i, 0))
        trace = prior.sample_path(dom, cod, h.beta, h.weights, stream(args.seed, i, 1))
        lines.append(_json(trace_record(trace, h)))
    _write(args.out, "".join(line + "\n" for line in lines))
    return 0


def cmd_enumerate(args) -> int:
    sig = load_signature(args.signature)
    prior = _prior(args, sig)
    dom, cod = parse_ty(args.dom), parse_ty(args.cod)
    h = _fixed_hyper(args, prior.graph.n_weights) or Hyperparams.uniform(prior.graph.n_weights)
    res = enumerate_morphisms(prior, dom, cod, h.beta, h.weights, args.max_steps, args.max_depth)
    out = [_json({"term": print_term(e.term), "log_prob": e.log_prob}) for e in res.entries]
    out.append(_json({"n_terms": len(res.entries), "enumerated_mass": res.mass,
                      "truncated_mass": res.truncated_mass}))
    text = "\n".join(out) + "\n"
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_evidence(args) -> int:
    sig = load_signature(args.signature)
    prior = _prior(args, sig)
    d, task = _diagram_and_task(args, sig)
    hyper = _fixed_hyper(args, prior.graph.n_weights)
    rep = snis_evidence(prior, d, task, args.particles, args.seed, hyper=hyper, workers=args.workers)
    _write(args.out, _json(rep.to_dict()) + "\n")
    return 0


def cmd_infer(args) -> int:
    sig = load_signature(args.signature)
    prior = _prior(args, sig)
    d, task = _diagram_and_task(args, sig)
    if args.particles < 1:
        raise ValidationError("--particles must be at least 1")
    fit = fit_variational(prior, d, task, args.steps, args.lr, args.samples, args.seed,
                          workers=args.workers)
    for step, value, se in fit.trajectory:
        log.info("step %d elbo %.6f stderr %.6f", step, value, se)
    post = posterior_samples(prior, d, task, fit.params, args.particles, args.seed + 1,
                             workers=args.workers)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataIOError(f"cannot create {out}: {exc}") from exc
    _write(out / "params.json", _json(fit.params.to_dict()) + "\n")
    _write(out / "elbo.csv", fit.trajectory_csv())
    _write(out / "posterior.jsonl", "".join(_json(e.to_dict()) + "\n" for e in post))
    return 0


# -- parser ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    p = argparse.ArgumentParser(prog="freeoperad", formatter_class=fmt,
                                description="Structure priors over typed programs from a free operad.")
    verbose = dict(action="store_true", default=argparse.SUPPRESS, help="log one line per optimisation step")
    p.add_argument("-v", "--verbose", **verbose)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, sampling=True):
        sp.add_argument("--signature", required=True, help="signature YAML")
        sp.add_argument("-v", "--verbose", **verbose)
        sp.add_argument("--max-product-len", type=int, default=DEFAULT_MAX_PRODUCT_LEN,
                        help="longest product type added to the hypergraph")
        if sampling:
            sp.add_argument("--step-cap", type=int, default=DEFAULT_STEP_CAP, help="steps allowed per path")
            sp.add_argument("--max-depth", type=int, default=DEFAULT_MAX_DEPTH, help="recursion depth limit")

    def hyper(sp, what):
        sp.add_argument("--beta", type=float, default=None, help=f"fix beta ({what})")
        sp.add_argument("--weights", default=None,
                        help="fix w: 'uniform' or a comma-separated probability vector")

    sp = sub.add_parser("graph", formatter_class=fmt, help="build the hypergraph and write DOT")
    common(sp, sampling=False)
    sp.add_argument("--out", required=True, help="DOT output path")
    sp.add_argument("--dump-distances", default=None, metavar="PATH", help="write the distance matrix as CSV")
    sp.add_argument("--report", default=None, metavar="PATH", help="write the build report here instead of stdout")
    sp.set_defaults(func=cmd_graph)

    sp = sub.add_parser("sample", formatter_class=fmt, help="sample morphisms dom -> cod from the prior")
    common(sp)
    sp.add_argument("--dom", required=True, help="domain type, e.g. '[R]'")
    sp.add_argument("--cod", required=True, help="codomain type, e.g. '[R*R]'")
    sp.add_argument("--n", type=int, default=1, help="number of samples")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True, help="JSONL output path")
    hyper(sp, "default: drawn from the prior per sample")
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("enumerate", formatter_class=fmt, help="list all traces within caps with exact priors")
    common(sp, sampling=False)
    sp.add_argument("--dom", required=True)
    sp.add_argument("--cod", required=True)
    sp.add_argument("--max-steps", type=int, default=8, help="path length cap")
    sp.add_argument("--max-depth", type=int, default=3, help="recursion depth cap")
    sp.add_argument("--out", default=None, help="JSONL output path (default stdout)")
    hyper(sp, "default 1.0")
    sp.set_defaults(func=cmd_enumerate)

    for name, func, helptext in (("evidence", cmd_evidence, "importance-sampling log-evidence"),
                                 ("infer", cmd_infer, "fit q(beta, w) and report the posterior over terms")):
        sp = sub.add_parser(name, formatter_class=fmt, help=helptext)
        common(sp)
        sp.add_argument("--task", required=True, help="task YAML")
        sp.add_argument("--diagram", default=None, help="wiring diagram YAML (default: one box)")
        sp.add_argument("--particles", type=int, default=1000)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--workers", type=int, default=1, help="worker processes; results do not depend on it")
        sp.set_defaults(func=func)
    sub.choices["evidence"].add_argument("--out", required=True, help="JSON output path")
    hyper(sub.choices["evidence"], "default: integrate over the prior")
    inf = sub.choices["infer"]
    inf.add_argument("--steps", type=int, default=100, help="optimisation steps")
    inf.add_argument("--lr", type=float, default=0.05, help="Adam step size on log-parameters")
    inf.add_argument("--samples", type=int, default=32, help="Monte Carlo samples per gradient step")
    inf.add_argument("--out", required=True, help="output directory")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (InputError, StepCapExceeded, AllParticlesFailed) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FreeOperadError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # noqa: BLE001 - last-resort mapping to the exit-code contract
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
