import numpy as np
import pytest

from kgembed.data import add_reciprocals, build_store
from kgembed.synthetic import planted_hierarchy


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def toy_raw():
    train = [
        ("a", "likes", "b"),
        ("b", "likes", "c"),
        ("c", "part_of", "a"),
        ("d", "part_of", "a"),
        ("a", "likes", "d"),
        ("e", "likes", "a"),
    ]
    valid = [("b", "part_of", "a")]
    test = [("d", "likes", "b"), ("c", "likes", "e")]
    return train, valid, test


@pytest.fixture
def toy_store(toy_raw):
    return build_store(*toy_raw)


@pytest.fixture(scope="session")
def hierarchy_store():
    return add_reciprocals(planted_hierarchy())


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one acceptance verdict; printed in the terminal summary."""

    def record(name, ok, detail=""):
        verdict = "PASS" if ok is True else ("SKIP" if ok is None else "FAIL")
        ACCEPTANCE_LINES.append(f"[{verdict}] {name}: {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
