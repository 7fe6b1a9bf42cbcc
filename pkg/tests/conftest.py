import numpy as np
import pytest

from kberel.kg import KnowledgeBase, Triple, Vocab
from kberel.models import ModelKind, ModelParams

_criteria = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")
    config.addinivalue_line("markers", "slow: long-running test")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    marks = getattr(report, "criterion", None)
    if marks:
        _criteria.append((marks, report.outcome))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        rep.criterion = (mark.args[0], mark.args[1], item.name)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for (number, title, name), outcome in sorted(_criteria, key=lambda x: (x[0][0], x[0][2])):
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[outcome]
        terminalreporter.write_line(f"[{status}] criterion {number}: {title} ({name})")


def random_params(kind, n, m, K, rng, norm="L1", integer=False):
    kind = ModelKind.parse(kind)
    width = 2 * K if kind is ModelKind.COMPLEX else K
    if integer:
        ent = rng.integers(-2, 3, size=(n, width)).astype(float)
        rel = rng.integers(-2, 3, size=(m, width)).astype(float)
    else:
        ent = rng.uniform(-1, 1, size=(n, width))
        rel = rng.uniform(-1, 1, size=(m, width))
    return ModelParams(kind, K, ent, rel, norm)


def random_kb(rng, n, m, n_train, n_valid=0, n_test=0):
    """Random KB with distinct triples spread over the three splits."""
    total = n_train + n_valid + n_test
    universe = n * n * m
    assert total <= universe
    flat = rng.choice(universe, size=total, replace=False)
    triples = [Triple(int(x // (n * m)), int(x // n % m), int(x % n)) for x in flat]
    vocab = Vocab([f"e{i}" for i in range(n)], [f"r{j}" for j in range(m)])
    return KnowledgeBase(vocab, triples[:n_train], triples[n_train:n_train + n_valid],
                         triples[n_train + n_valid:])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def tiny_kb():
    vocab = Vocab(["a", "b", "c"], ["likes", "knows"])
    return KnowledgeBase(vocab, train=[(0, 0, 1), (1, 1, 2)], valid=[(0, 1, 2)], test=[(0, 1, 1)])
