import pytest

_RESULTS: dict[int, str] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number n")


class Criterion:
    """Collects named checks for one acceptance criterion and renders a summary line."""

    def __init__(self, number: int):
        self.number = number
        self.checks: list[tuple[str, bool]] = []

    def check(self, text: str, ok: bool) -> bool:
        self.checks.append((text, bool(ok)))
        return ok

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(ok for _, ok in self.checks)

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        detail = "; ".join(f"{t} [{'ok' if ok else 'FAIL'}]" for t, ok in self.checks)
        return f"CRITERION {self.number}: {verdict}  {detail}"

    def finish(self) -> None:
        _RESULTS[self.number] = self.line()
        failed = [t for t, ok in self.checks if not ok]
        assert not failed, f"criterion {self.number} failed: {failed}"


@pytest.fixture
def criterion(request):
    marker = request.node.get_closest_marker("criterion")
    c = Criterion(marker.args[0])
    yield c
    if c.number not in _RESULTS:
        _RESULTS[c.number] = f"CRITERION {c.number}: FAIL  (errored before finishing) " + c.line().split("  ", 1)[-1]


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_RESULTS):
        terminalreporter.write_line(_RESULTS[n])
