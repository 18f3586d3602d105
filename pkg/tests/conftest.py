from __future__ import annotations

import pytest

_VERDICTS: list[tuple[int, bool, str]] = []


class Criterion:
    """Collects sub-check outcomes for one acceptance criterion."""

    def __init__(self, number: int, title: str):
        self.number = number
        self.title = title
        self.checks: list[tuple[str, bool]] = []

    def check(self, label: str, ok: bool) -> bool:
        self.checks.append((label, bool(ok)))
        return bool(ok)

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(ok for _, ok in self.checks)

    def line(self) -> str:
        detail = "; ".join(f"{label} [{'ok' if ok else 'FAILED'}]" for label, ok in self.checks)
        return f"{'PASS' if self.passed else 'FAIL'} criterion {self.number} ({self.title}): {detail}"


@pytest.fixture
def criterion(request):
    made: list[Criterion] = []

    def make(number: int, title: str) -> Criterion:
        c = Criterion(number, title)
        made.append(c)
        return c

    yield make
    call = getattr(request.node, "rep_call", None)
    for c in made:
        if call is not None and call.failed and c.passed:
            c.check("test raised before finishing", False)
        line = c.line()
        print(line)
        _VERDICTS.append((c.number, c.passed, line))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, _, line in sorted(_VERDICTS):
        terminalreporter.write_line(line)
