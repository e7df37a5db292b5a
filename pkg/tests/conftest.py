import numpy as np
import pytest

from it2mlc.synthetic import clustered

_ACCEPTANCE = {}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def separable():
    return clustered(200, 10, 3, seed=1)


def write(path, text):
    path.write_text(text)
    return path


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("acceptance")
    if marker is None or call.when == "teardown":
        return
    if call.when == "setup" and call.excinfo is None:
        return
    crit = marker.args[0]
    ok = call.excinfo is None
    skipped = call.excinfo is not None and call.excinfo.errisinstance(pytest.skip.Exception)
    status = "SKIP" if skipped else ("PASS" if ok else "FAIL")
    prev = _ACCEPTANCE.get(crit, "PASS")
    order = {"FAIL": 2, "SKIP": 1, "PASS": 0}
    _ACCEPTANCE[crit] = status if order[status] >= order[prev] else prev


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"{_ACCEPTANCE[crit]:<4} {crit}")
