"""Structure priors over typed programs generated by a free operad.

A signature of typed generators is turned into a hypergraph over product
types. Random walks on that graph, biased toward short routes to the target
type, sample well-typed morphisms with exact log-densities. Those densities
feed importance-sampling evidence estimates and a variational posterior over
program structure.
"""

from .distance import DistanceMatrix, distance_matrix, matrix_exponential, transition_distance
from .hypergraph import OperadGraph, build_hypergraph, to_dot
from .inference import (
    EvidenceReport,
    VariationalParams,
    elbo,
    enumerate_diagram,
    enumerate_morphisms,
    fit_variational,
    log_likelihood,
    posterior_samples,
    snis_evidence,
)
from .prior import FreeOperadPrior, Hyperparams, PathTrace
from .signature import Generator, I, Signature, Ty, load_signature, parse_signature, parse_ty
from .tasks import Dataset, LikelihoodSpec, Task, arith_interpreter, load_dataset, load_task, make_task
from .terms import Gen, Id, Interpreter, Par, Seq, Term, canonicalize, evaluate, parse_term, print_term
from .wiring import WiringDiagram, compose_diagram, load_diagram, sample_diagram, validate_wiring

__version__ = "0.1.0"

__all__ = [
    "Dataset", "DistanceMatrix", "EvidenceReport", "FreeOperadPrior", "Gen", "Generator", "Hyperparams",
    "I", "Id", "Interpreter", "LikelihoodSpec", "OperadGraph", "Par", "PathTrace", "Seq", "Signature",
    "Task", "Term", "Ty", "VariationalParams", "WiringDiagram", "arith_interpreter", "build_hypergraph",
    "canonicalize", "compose_diagram", "distance_matrix", "elbo", "enumerate_diagram",
    "enumerate_morphisms", "evaluate", "fit_variational", "load_dataset", "load_diagram",
    "load_signature", "load_task", "log_likelihood", "make_task", "matrix_exponential",
    "parse_signature", "parse_term", "parse_ty", "posterior_samples", "print_term", "sample_diagram",
    "snis_evidence", "to_dot", "transition_distance", "validate_wiring",
]
