import functools

import pytest

from cbho import scenarios

_CRITERIA: dict[str, tuple[bool, str]] = {}
ALL_CRITERIA = tuple(str(i) for i in range(1, 9))
SLOW_CRITERIA = {"7"}


def pytest_addoption(parser):
    parser.addoption("--run-slow", action="store_true", default=False, help="run slow reproductions")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-slow"):
        return
    skip = pytest.mark.skip(reason="slow; enable with --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in ALL_CRITERIA:
        if key not in _CRITERIA:
            hint = " (slow; enable with --run-slow)" if key in SLOW_CRITERIA else ""
            terminalreporter.write_line(f"SKIP  criterion {key}: not run{hint}")
            continue
        ok, detail = _CRITERIA[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {key}: {detail}")


@pytest.fixture
def criterion():
    """record(key, passed, detail) for the end-of-session summary; returns ``passed``.

    Several records under one key are merged: the key passes only if all do.
    """

    def record(key, passed, detail):
        passed = bool(passed)
        merged, text = passed, detail
        prev = _CRITERIA.get(key)
        if prev is not None:
            merged = passed and prev[0]
            text = f"{prev[1]}; {detail}"
        _CRITERIA[key] = (merged, text)
        return passed

    return record


@functools.lru_cache(maxsize=None)
def preset_run(name, dt=None):
    kwargs = {} if dt is None else {"dt": dt}
    s = scenarios.preset(name, **kwargs)
    return s, scenarios.simulate(s)


@pytest.fixture(scope="session")
def run_preset():
    return preset_run
