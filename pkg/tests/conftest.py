import os

import pytest
from hypothesis import HealthCheck, settings

from owlink import LinkConfig, prbs15, run_chain

settings.register_profile("default", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(autouse=True)
def _no_seed_override(monkeypatch):
    monkeypatch.delenv("OWL_SEED", raising=False)


@pytest.fixture(scope="session")
def default_trace():
    """Default link, 10^5 PRBS15 bits at 2.97 Gb/s."""
    return run_chain(prbs15(100_000, 2.97e9), LinkConfig())


@pytest.fixture(scope="session")
def default_trace_6g():
    return run_chain(prbs15(100_000, 5.94e9), LinkConfig())


# --- acceptance reporting -------------------------------------------------------------

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when == "teardown":
        return
    n, title = mark.args
    ok = rep.passed and _CRITERIA.get(n, (title, True))[1]
    if rep.when == "call" or not rep.passed:
        _CRITERIA[n] = (title, ok)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, ok = _CRITERIA[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {n}: {title}")
