import re

import pytest

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(id): acceptance criterion checked by this test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or not (rep.when == "call" or rep.failed):
        return
    entry = _criteria.setdefault(marker.args[0], {"ok": True, "notes": []})
    entry["ok"] = entry["ok"] and rep.passed
    entry["notes"].extend(f"{k}={v}" for k, v in item.user_properties)


def _order(cid):
    num, rest = re.match(r"(\d+)(.*)", cid).groups()
    return int(num), rest


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for cid in sorted(_criteria, key=_order):
        entry = _criteria[cid]
        status = "PASS" if entry["ok"] else "FAIL"
        notes = ", ".join(dict.fromkeys(entry["notes"]))
        terminalreporter.write_line(f"criterion {cid:<4} {status}  {notes}".rstrip())
