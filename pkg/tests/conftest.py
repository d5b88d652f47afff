from __future__ import annotations

from hypothesis import settings

settings.register_profile("swarm", deadline=None)
settings.load_profile("swarm")

# criterion number -> [title, all passed so far, detail lines]
_CRITERIA: dict[int, list] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion a test belongs to")


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None or call.when != "call":
        return
    num, title = mark.args
    entry = _CRITERIA.setdefault(num, [title, True, []])
    if call.excinfo is not None:
        entry[1] = False
        entry[2].append(f"{item.name}: {call.excinfo.typename}: {str(call.excinfo.value).splitlines()[0][:160]}")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        title, ok, notes = _CRITERIA[num]
        terminalreporter.write_line(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {title}")
        for note in notes:
            terminalreporter.write_line(f"    {note}")
