import pytest

_RESULTS: dict = {}


def pytest_runtest_logreport(report):
    marker = _MARKS.get(report.nodeid)
    if marker is None:
        return
    # a criterion fails if any phase fails; setup errors count too
    if report.failed:
        _RESULTS[marker] = "FAIL"
    elif report.when == "call" and marker not in _RESULTS:
        _RESULTS[marker] = "PASS"


_MARKS: dict = {}


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("acceptance")
        if m is not None:
            _MARKS[item.nodeid] = (m.args[0], m.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _MARKS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(set(_MARKS.values())):
        number, label = key
        terminalreporter.write_line(f"{_RESULTS.get(key, 'NOT RUN')} criterion {number}: {label}")


@pytest.fixture(scope="session")
def prims():
    from qqm.prims import default_table

    return default_table()
