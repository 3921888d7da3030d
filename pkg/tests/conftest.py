from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

from predeval.expr import tree_from_spec

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# A /\ (B \/ (C /\ D)); ids A=1, B=2, C=3, D=4
EXAMPLE_SEL = (0.820, 0.313, 0.469, 0.984)
A, B, C, D = 1, 2, 3, 4


def example_tree():
    return tree_from_spec(("AND", EXAMPLE_SEL[0], ("OR", EXAMPLE_SEL[1], ("AND", EXAMPLE_SEL[2], EXAMPLE_SEL[3]))))


@pytest.fixture
def example():
    return example_tree()


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, name: str, ok: bool, detail: str = "") -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {name}" + (f" ({detail})" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
