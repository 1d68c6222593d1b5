import time

import numpy as np
import pytest

_RESULTS: dict[int, dict] = {}
_DETAILS: dict[str, str] = {}
_START = time.perf_counter()
SUITE_BUDGET_S = 180.0


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by this test")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def detail(request):
    """Record a one-line measurement shown next to the test's acceptance verdict."""

    def record(text: str) -> None:
        _DETAILS[request.node.nodeid] = text

    return record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call" and not (rep.when == "setup" and rep.failed):
        return
    number, title = marker.args
    entry = _RESULTS.setdefault(number, {"title": title, "ok": True, "details": []})
    entry["ok"] = entry["ok"] and rep.passed
    text = _DETAILS.get(item.nodeid)
    if text:
        entry["details"].append(text)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_RESULTS):
        e = _RESULTS[number]
        verdict = "PASS" if e["ok"] else "FAIL"
        info = "; ".join(e["details"])
        tr.write_line(f"[{verdict}] criterion {number:2d}: {e['title']}" + (f" -- {info}" if info else ""))
    elapsed = time.perf_counter() - _START
    verdict = "PASS" if elapsed < SUITE_BUDGET_S else "FAIL"
    tr.write_line(f"[{verdict}] suite runtime {elapsed:.1f} s (budget {SUITE_BUDGET_S:.0f} s)")
