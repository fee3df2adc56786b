import numpy as np
import pytest

from freeoperad.errors import (
    DataIOError,
    NonFiniteValue,
    SchemaError,
    ShapeError,
    TypeMismatch,
    UnboundGenerator,
    ValidationError,
)
from freeoperad.signature import Ty, load_signature, parse_signature
from freeoperad.tasks import (
    FIXTURES,
    Dataset,
    LikelihoodSpec,
    arith_interpreter,
    interpreter_for,
    load_dataset,
    load_task,
    make_task,
)
from freeoperad.terms import Gen, Seq, evaluate, parse_term

R, RR = Ty("R"), Ty("R", "R")


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_y_2x_plus_2(tmp_path):
    p = write(tmp_path, "d.csv", "x1,y1\n" + "".join(f"{x},{2 * x + 2}\n" for x in range(5)))
    d = load_dataset(p, R, R)
    assert len(d) == 5 and (d.input_ty, d.output_ty) == (R, R)
    assert d.records[3] == ((3.0,), (8.0,))


@pytest.mark.parametrize("text, err", [
    ("", ShapeError),
    ("x1,y1\n", ShapeError),
    ("x1,y1\n1,nan\n", NonFiniteValue),
    ("x1,y1\n1,inf\n", NonFiniteValue),
    ("a,b\n1,2\n", ShapeError),
    ("x1,y1\n1,2,3\n", ShapeError),
    ("x1,y1\n1,two\n", ShapeError),
])
def test_bad_datasets(tmp_path, text, err):
    with pytest.raises(err):
        load_dataset(write(tmp_path, "d.csv", text), R, R)


def test_missing_dataset(tmp_path):
    with pytest.raises(DataIOError):
        load_dataset(tmp_path / "nope.csv", R, R)


def test_dataset_shapes():
    with pytest.raises(ShapeError):
        Dataset(np.zeros((2, 1)), np.zeros((2, 2)), R, R)
    with pytest.raises(NonFiniteValue):
        Dataset(np.array([[np.nan]]), np.zeros((1, 1)), R, R)
    d = Dataset(np.zeros((2, 2)), np.zeros((2, 1)), RR, R)
    with pytest.raises(ValueError):
        d.inputs[0, 0] = 1.0


def test_arith_interpreter(arith_sig):
    interp = arith_interpreter()
    gen = {g.name: Gen.of(g) for g in arith_sig.generators}
    assert evaluate(gen["inc"], interp, (3,)) == (4,)
    assert evaluate(Seq(gen["dup"], gen["add"]), interp, (3,)) == (6,)
    assert evaluate(Seq(gen["inc"], gen["dbl"]), interp, (3,)) == (8,)


def test_make_task(arith_sig, tmp_path):
    p = write(tmp_path, "d.csv", "x1,y1\n0,2\n1,4\n")
    data = load_dataset(p, R, R)
    task = make_task(arith_sig, data, LikelihoodSpec("gaussian", 0.1))
    assert task.likelihood.sigma == 0.1
    with pytest.raises(TypeMismatch):
        make_task(arith_sig, data, LikelihoodSpec(), dom=R, cod=RR)
    with pytest.raises(ValidationError):
        LikelihoodSpec("gaussian", 0.0)
    with pytest.raises(ValidationError):
        LikelihoodSpec("cauchy", 1.0)


def test_unknown_interpreter(arith_sig):
    with pytest.raises(ValidationError):
        interpreter_for(arith_sig, "nope")


def test_unbound_generator():
    sig = parse_signature("base_types: [R]\nobjects: [[R]]\ngenerators: [{name: zap, dom: [R], cod: [R]}]")
    with pytest.raises(UnboundGenerator):
        interpreter_for(sig)


def test_load_task(staged_sig):
    task = load_task(FIXTURES / "y_2x_plus_2.task.yaml", staged_sig)
    assert len(task.dataset) == 5
    assert task.likelihood == LikelihoodSpec("gaussian", 0.1)


@pytest.mark.parametrize("text", [
    "dataset: y_2x_plus_2.csv\ninput: [X]\noutput: [Y]",
    "dataset: y_2x_plus_2.csv\ninput: [X]\noutput: [Y]\nlikelihood: {kind: gaussian, scale: 1}",
    "dataset: y_2x_plus_2.csv\ninput: 3\noutput: [Y]\nlikelihood: {sigma: 1}",
    "- not a mapping",
])
def test_bad_task_files(staged_sig, tmp_path, text):
    (tmp_path / "y_2x_plus_2.csv").write_text((FIXTURES / "y_2x_plus_2.csv").read_text())
    with pytest.raises(SchemaError):
        load_task(write(tmp_path, "t.yaml", text), staged_sig)


def test_fixture_datasets_are_recoverable(staged_sig, chain_sig):
    """Every bundled dataset is fit exactly by some enumerable term."""
    single_sig = load_signature(FIXTURES / "single.yaml")
    cases = [("y_2x_plus_2.task.yaml", staged_sig, "(seq (gen inc) (gen twice))"),
             ("single.task.yaml", single_sig, "(gen f)"),
             ("chain_affine.task.yaml", chain_sig, "(gen g)")]
    for task_file, sig, term in cases:
        task = load_task(FIXTURES / task_file, sig)
        t = parse_term(term, sig)
        pred = np.array([evaluate(t, task.interpreter, x) for x, _ in task.dataset.records])
        np.testing.assert_array_equal(pred, task.dataset.outputs)
