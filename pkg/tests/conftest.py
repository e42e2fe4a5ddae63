import pytest
from hypothesis import HealthCheck, settings

from charttable.synth.corpus import SpecGenConfig, make_sample
from charttable.table import TableGenConfig

settings.register_profile("ci", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")


@pytest.fixture(scope="session")
def samples():
    """A small fixed corpus shared by many tests."""
    tc, sc = TableGenConfig(), SpecGenConfig()
    return [make_sample(i, 1234, tc, sc)[0] for i in range(120)]


@pytest.fixture(scope="session")
def samples_with_layout():
    tc, sc = TableGenConfig(), SpecGenConfig()
    return [make_sample(i, 99, tc, sc) for i in range(40)]


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance") or __import__("sys").modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
