import sys

import pytest

from freeoperad.hypergraph import build_hypergraph
from freeoperad.prior import FreeOperadPrior
from freeoperad.signature import load_signature
from freeoperad.tasks import FIXTURES, load_task
from freeoperad.wiring import WiringDiagram, load_diagram


def fixture_path(name):
    return FIXTURES / name


def load_prior(name, **kw):
    return FreeOperadPrior(build_hypergraph(load_signature(FIXTURES / name)), **kw)


@pytest.fixture(scope="session")
def arith_sig():
    return load_signature(FIXTURES / "arith_small.yaml")


@pytest.fixture(scope="session")
def chain_sig():
    return load_signature(FIXTURES / "chain.yaml")


@pytest.fixture(scope="session")
def staged_sig():
    return load_signature(FIXTURES / "staged.yaml")


@pytest.fixture(scope="session")
def arith_graph(arith_sig):
    return build_hypergraph(arith_sig)


@pytest.fixture(scope="session")
def arith_prior(arith_graph):
    return FreeOperadPrior(arith_graph)


@pytest.fixture(scope="session")
def chain_prior(chain_sig):
    return FreeOperadPrior(build_hypergraph(chain_sig))


@pytest.fixture(scope="session")
def staged_prior(staged_sig):
    return FreeOperadPrior(build_hypergraph(staged_sig))


@pytest.fixture(scope="session")
def staged_task(staged_sig):
    return load_task(FIXTURES / "y_2x_plus_2.task.yaml", staged_sig)


@pytest.fixture(scope="session")
def staged_diagram():
    return load_diagram(FIXTURES / "staged_onebox.yaml")


@pytest.fixture(scope="session")
def single():
    sig = load_signature(FIXTURES / "single.yaml")
    prior = FreeOperadPrior(build_hypergraph(sig))
    task = load_task(FIXTURES / "single.task.yaml", sig)
    return prior, WiringDiagram.one_box(task.dataset.input_ty, task.dataset.output_ty), task


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
