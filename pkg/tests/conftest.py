import sys

import pytest

from dhtmetric import Algorithm, params_for
from oracles import EXAMPLE_IDS

ALGORITHMS = [a.value for a in Algorithm]


@pytest.fixture
def example_ids():
    return list(EXAMPLE_IDS)


@pytest.fixture(params=ALGORITHMS)
def algorithm(request):
    return request.param


@pytest.fixture
def tapestry():
    return params_for("tapestry")


@pytest.fixture
def kademlia():
    return params_for("kademlia")


@pytest.fixture
def chord():
    return params_for("chord")


@pytest.fixture
def pastry():
    return params_for("pastry")


def pytest_terminal_summary(terminalreporter):
    results = getattr(sys.modules.get("test_acceptance"), "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
