import time
from contextlib import contextmanager

import pytest


class Recorder:
    """Collects one PASS/FAIL line per acceptance criterion."""

    def __init__(self):
        self.lines = []

    @contextmanager
    def criterion(self, num, title):
        notes = []
        t0 = time.perf_counter()
        try:
            yield notes
        except BaseException as e:
            msg = str(e).strip().splitlines()
            self._emit("FAIL", num, title, notes + msg[:1], t0)
            raise
        self._emit("PASS", num, title, notes, t0)

    def _emit(self, status, num, title, notes, t0):
        line = f"{status} criterion {num:>2}: {title} [{time.perf_counter() - t0:.1f} s]"
        if notes:
            line += " -- " + "; ".join(notes)
        self.lines.append(line)
        print(line, flush=True)


_RECORDER = Recorder()


@pytest.fixture(scope="session")
def acceptance():
    return _RECORDER


def pytest_terminal_summary(terminalreporter):
    if _RECORDER.lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_RECORDER.lines, key=lambda l: int(l.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
