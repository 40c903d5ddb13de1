import pytest

from mrsde.config import case_config

FIG1 = dict(beta=2.0, sigma=1.0, x0=1.0, p=0.5, T=1.0)
OU = dict(beta=2.0, a=1.0, sigma=1.0, x0=1.0, p=0.5, T=1.0)


@pytest.fixture
def fig1_config():
    def make(**kw):
        return case_config("i", **{**FIG1, "N": 1000, "n": 100, **kw})

    return make


def pytest_terminal_summary(terminalreporter):
    from tests.test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[number])
