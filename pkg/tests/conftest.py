import math

import pytest

from oran_dsa.radio import RuConfig

ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


@pytest.fixture
def table1_rus():
    return [
        RuConfig(0, "macro", (0.0, 0.0), 300.0, 0.1, 10.0, 0.001, 1.0, 2.7),
        RuConfig(1, "micro", (-200.0, 0.0), 50.0, 0.01, 1.0, 0.001, 1.0, 2.8),
        RuConfig(2, "micro", (200.0, 0.0), 50.0, 0.01, 1.0, 0.001, 1.0, 2.8),
    ]


def close(a, b, rel=1e-9):
    return math.isclose(a, b, rel_tol=rel, abs_tol=0.0)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
