import os
from pathlib import Path

import numpy as np
import pytest

from detgrasp import _fallback

FIXTURES = Path(__file__).parent / "fixtures"

try:
    from detgrasp import _core
except ImportError:  # extension not built
    _core = None

BACKENDS = [("python", _fallback)] + ([("cython", _core)] if _core is not None else [])


@pytest.fixture
def fixtures():
    return FIXTURES


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(params=[b[0] for b in BACKENDS])
def backend(request, monkeypatch):
    """Run a test once per available kernel backend."""
    from detgrasp import _backend

    impl = dict(BACKENDS)[request.param]
    for name in ("conv2d_forward", "conv2d_backward", "convex_intersection_area"):
        monkeypatch.setattr(_backend, name, getattr(impl, name))
    return request.param


_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" in report.nodeid and report.when == "call":
        _ACCEPTANCE[report.nodeid.split("::")[-1]] = report.outcome
    elif "test_acceptance.py" in report.nodeid and report.when == "setup" and report.outcome != "passed":
        _ACCEPTANCE[report.nodeid.split("::")[-1]] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in sorted(_ACCEPTANCE.items()):
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}")
