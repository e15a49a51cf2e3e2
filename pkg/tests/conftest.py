import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_CRITERIA_KEY = pytest.StashKey[dict]()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")
    config.stash[_CRITERIA_KEY] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or rep.failed or rep.skipped:
        num, title = mark.args
        status = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
        item.config.stash[_CRITERIA_KEY].setdefault(num, (title, []))[1].append(status)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    table = config.stash.get(_CRITERIA_KEY, {})
    if not table:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(table):
        title, seen = table[num]
        status = "FAIL" if "FAIL" in seen else ("PASS" if "PASS" in seen else "SKIP")
        terminalreporter.write_line(f"criterion {num:2d}: {status}  {title}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
