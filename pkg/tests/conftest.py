import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call":
        return
    n = mark.args[0]
    prev = _CRITERIA.get(n, (True, 0.0, []))
    notes = prev[2] + [s for name, s in rep.user_properties if name == "note"]
    _CRITERIA[n] = (prev[0] and rep.passed, prev[1] + rep.duration, notes)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        ok, dur, notes = _CRITERIA[n]
        extra = f"  [{'; '.join(notes)}]" if notes else ""
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} ({dur:.2f} s){extra}")
