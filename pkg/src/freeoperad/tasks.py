"""Reference DSL interpreters, CSV datasets and likelihoods."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .errors import (
    DataIOError,
    NonFiniteValue,
    SchemaError,
    ShapeError,
    TypeMismatch,
    ValidationError,
)
from .signature import Signature, Ty, parse_ty
from .terms import Interpreter

FIXTURES = Path(__file__).parent / "fixtures"


# Named functions (not lambdas) so interpreters pickle into worker processes.
def _inc(x):
    return x + 1.0


def _dbl(x):
    return 2.0 * x


def _add(a, b):
    return a + b


def _dup(x):
    return (x, x)


def _succ(x):
    return x + 1.0


REFERENCE_BINDINGS = {
    # arith-small and the staged DSL
    "inc": _inc,
    "dbl": _dbl,
    "add": _add,
    "dup": _dup,
    "twice": _dbl,
    "succ": _succ,
    # chain fixture
    "g": _inc,
    "h": _dbl,
    # single-morphism fixture
    "f": _inc,
}

INTERPRETERS = {"reference": REFERENCE_BINDINGS}


def arith_interpreter() -> Interpreter:
    return Interpreter({k: REFERENCE_BINDINGS[k] for k in ("inc", "dbl", "add", "dup")})


def interpreter_for(sig: Signature, name: str = "reference") -> Interpreter:
    try:
        table = INTERPRETERS[name]
    except KeyError:
        raise ValidationError(f"unknown interpreter {name!r}; known: {sorted(INTERPRETERS)}") from None
    interp = Interpreter({g.name: table[g.name] for g in sig.generators if g.name in table})
    interp.check(sig)
    return interp


@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray  # (records, |input_ty|)
    outputs: np.ndarray  # (records, |output_ty|)
    input_ty: Ty
    output_ty: Ty

    def __post_init__(self):
        if self.inputs.shape[0] == 0:
            raise ShapeError("dataset has no records")
        if self.inputs.shape != (self.inputs.shape[0], len(self.input_ty)):
            raise ShapeError(f"inputs have shape {self.inputs.shape}, expected {len(self.input_ty)} column(s)")
        if self.outputs.shape != (self.inputs.shape[0], len(self.output_ty)):
            raise ShapeError(f"outputs have shape {self.outputs.shape}, expected "
                             f"{len(self.output_ty)} column(s)")
        if not (np.all(np.isfinite(self.inputs)) and np.all(np.isfinite(self.outputs))):
            raise NonFiniteValue("dataset contains non-finite values")
        self.inputs.setflags(write=False)
        self.outputs.setflags(write=False)

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def records(self) -> list[tuple[tuple, tuple]]:
        return [(tuple(x), tuple(y)) for x, y in zip(self.inputs.tolist(), self.outputs.tolist())]


def load_dataset(path, input_ty: Ty, output_ty: Ty) -> Dataset:
    """Read a CSV with header ``x1..xm,y1..yn``."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataIOError(f"cannot read dataset {path}: {exc}") from exc
    rows = [r for r in rows if r]
    if not rows:
        raise ShapeError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    m, n = len(input_ty), len(output_ty)
    expected = [f"x{i + 1}" for i in range(m)] + [f"y{j + 1}" for j in range(n)]
    if header != expected:
        raise ShapeError(f"{path}: header {header} does not match {expected}")
    if len(rows) == 1:
        raise ShapeError(f"{path}: no data rows")
    values = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != m + n:
            raise ShapeError(f"{path}:{lineno}: expected {m + n} fields, got {len(row)}")
        try:
            vals = [float(v) for v in row]
        except ValueError as exc:
            raise ShapeError(f"{path}:{lineno}: {exc}") from exc
        if not all(math.isfinite(v) for v in vals):
            raise NonFiniteValue(f"{path}:{lineno}: non-finite value")
        values.append(vals)
    arr = np.asarray(values, dtype=np.float64)
    return Dataset(arr[:, :m].copy(), arr[:, m:].copy(), input_ty, output_ty)


@dataclass(frozen=True)
class LikelihoodSpec:
    kind: str = "gaussian"
    sigma: float = 1.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "flat"):
            raise ValidationError(f"unknown likelihood kind {self.kind!r}")
        if self.kind == "gaussian" and not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValidationError(f"sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class Task:
    signature: Signature
    dataset: Dataset
    likelihood: LikelihoodSpec
    interpreter: Interpreter


def make_task(sig: Signature, dataset: Dataset, likelihood: LikelihoodSpec,
              interpreter: Interpreter | None = None, dom: Ty | None = None,
              cod: Ty | None = None) -> Task:
    """Bundle data, likelihood and interpreter; ``dom``/``cod`` are the outer box types."""
    if dom is not None and dataset.input_ty != dom:
        raise TypeMismatch(dom, dataset.input_ty, "dataset inputs vs outer domain")
    if cod is not None and dataset.output_ty != cod:
        raise TypeMismatch(cod, dataset.output_ty, "dataset outputs vs outer codomain")
    for ty in (dataset.input_ty, dataset.output_ty):
        for f in ty:
            if f not in sig.base_types:
                raise ValidationError(f"dataset type {ty} uses unknown base type {f!r}")
    if interpreter is None:
        interpreter = interpreter_for(sig)
    interpreter.check(sig)
    return Task(sig, dataset, likelihood, interpreter)


def load_task(path, sig: Signature, dom: Ty | None = None, cod: Ty | None = None) -> Task:
    """Task file: YAML with dataset (CSV path relative to the file), input,
    output, likelihood and interpreter."""
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataIOError(f"cannot read task {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise SchemaError(f"malformed task document: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("task document must be a mapping")
    missing = {"dataset", "input", "output", "likelihood"} - set(doc)
    if missing:
        raise SchemaError(f"task document is missing {sorted(missing)}")

    def ty(v, what):
        if isinstance(v, str):
            return parse_ty(v)
        if isinstance(v, list) and all(isinstance(x, str) for x in v):
            return Ty(*v)
        raise SchemaError(f"task `{what}` must be a type")

    lik = doc["likelihood"]
    if not isinstance(lik, dict):
        raise SchemaError("task `likelihood` must be a mapping")
    try:
        spec = LikelihoodSpec(**lik)
    except TypeError as exc:
        raise SchemaError(f"task `likelihood`: {exc}") from exc
    data = load_dataset(path.parent / doc["dataset"], ty(doc["input"], "input"), ty(doc["output"], "output"))
    interp = interpreter_for(sig, doc.get("interpreter", "reference"))
    return make_task(sig, data, spec, interp, dom, cod)
