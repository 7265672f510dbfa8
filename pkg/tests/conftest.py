import sys

import pytest

from tmdpsc.chains import square_corpus
from tmdpsc.si_catalog import aprime_for
from tmdpsc.tm_core import machine

HALT1 = machine(2, (1, 0, 1, "R", 0))
LOOP = machine(2, (1, 0, 0, "R", 1))
HALT2 = machine(2, (1, 0, 1, "R", 0), (1, 1, 1, "R", 1))


@pytest.fixture(scope="session")
def A():
    return aprime_for(HALT1)


@pytest.fixture(scope="session")
def corpus(A):
    return square_corpus(A, 10)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
