"""Collects acceptance-criterion outcomes and prints one line per criterion."""

import pytest

_CRITERIA = {}


class CriterionLog:
    def __init__(self, store):
        self._store = store

    def check(self, criterion, title, name, ok, detail=""):
        """Record one sub-check of ``criterion`` and print it immediately."""
        entry = self._store.setdefault(criterion, {"title": title, "checks": []})
        entry["checks"].append((name, bool(ok), detail))
        print(f"[{'PASS' if ok else 'FAIL'}] criterion {criterion} / {name}: {detail}")
        return bool(ok)


@pytest.fixture(scope="session")
def criteria():
    return CriterionLog(_CRITERIA)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_CRITERIA):
        entry = _CRITERIA[key]
        failed = [c for c in entry["checks"] if not c[1]]
        status = "PASS" if not failed else "FAIL"
        line = f"{status} criterion {key}: {entry['title']} ({len(entry['checks']) - len(failed)}/{len(entry['checks'])} checks)"
        if failed:
            line += "; failing: " + "; ".join(f"{n} [{d}]" for n, _, d in failed)
        terminalreporter.write_line(line)
