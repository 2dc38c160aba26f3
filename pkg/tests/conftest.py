from __future__ import annotations

import pytest

from bifurcurve.polymap import parse_map
from bifurcurve.tracer import TraceConfig

# plane-curve fixtures: expression -> variables
F1 = "x + x^2*y"
G = "y*(x^2+1)"
F3 = "y*(2*x^2*y^2-9*x*y+12)"
VANISH = "(x*y-1)^2+y^2"
DISK = "x^2+y^2"
LINES = "x"
SPACE = "z; x + x^2*y"

PLANE_FIXTURES = [F1, G, F3, VANISH, DISK, LINES]

# acceptance results, filled in by test_acceptance.py and echoed at the end of the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def plane(expr: str):
    return parse_map(expr, ["x", "y"])


def space(expr: str = SPACE):
    return parse_map(expr, ["x", "y", "z"])


@pytest.fixture(scope="session")
def cfg() -> TraceConfig:
    return TraceConfig()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, msg = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {msg}")
