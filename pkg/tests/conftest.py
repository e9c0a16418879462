import pytest
from hypothesis import HealthCheck, settings

from nonlocal_layers.verification import FixtureRun

settings.register_profile(
    "repo", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repo")

ACCEPTANCE_LINES: list[str] = []


class _Runs:
    def __init__(self):
        self._cache = {}

    def __getitem__(self, name) -> FixtureRun:
        if name not in self._cache:
            self._cache[name] = FixtureRun.from_fixture(name)
        return self._cache[name]


_RUNS = _Runs()


@pytest.fixture(scope="session")
def runs():
    return _RUNS


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
