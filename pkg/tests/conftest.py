import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from upcos import SynthConfig, generate_corpus  # noqa: E402

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(num, title): acceptance criterion")
    config.addinivalue_line("markers", "slow: takes more than a few seconds")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    num, title = mark.args
    entry = _CRITERIA.setdefault(num, {"title": title, "ok": True, "ran": False})
    if rep.when == "call":
        entry["ran"] = True
    if rep.failed:
        entry["ok"] = False


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        e = _CRITERIA[num]
        status = "PASS" if e["ok"] and e["ran"] else ("FAIL" if not e["ok"] else "SKIP")
        terminalreporter.write_line(f"AC{num:02d} {status}  {e['title']}")


@pytest.fixture(scope="session")
def default_corpus():
    return generate_corpus(SynthConfig())


@pytest.fixture(scope="session")
def small_corpus():
    return generate_corpus(SynthConfig(n_speakers=8, utts_per_speaker=4, duration_range_s=(2, 10)))
