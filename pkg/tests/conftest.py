import pytest

from specfuse.backend import NGramBackend, ScriptedBackend, ngram_train
from specfuse.types import ModelId

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def toy_corpus():
    return [
        "the cat sat on the mat",
        "the dog sat on the log",
        "a cat ran to the dog",
        "the dog ran to a cat",
    ]


@pytest.fixture
def toy_backends(toy_corpus):
    specs = [(3, 0.5), (2, 0.1), (3, 2.0)]
    return [
        NGramBackend(ngram_train(toy_corpus, order, k), ModelId(i, f"toy{i}"))
        for i, (order, k) in enumerate(specs)
    ]


def scripted(index, segments, **kw):
    return ScriptedBackend(ModelId(index, f"s{index}"), segments, **kw)
