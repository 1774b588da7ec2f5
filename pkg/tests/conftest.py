import contextlib
import time

import numpy as np
import pytest

from gkm.basis import build_gcm_basis
from gkm.synth import testcard

# (number, PASS/FAIL, line) for each acceptance criterion run in this session
ACCEPTANCE_LINES: list[tuple[int, str]] = []


@pytest.fixture(scope="session")
def basis():
    return build_gcm_basis(21)


@pytest.fixture(scope="session")
def card():
    return testcard(128, 128)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def criterion():
    """Context manager timing one acceptance criterion and logging its verdict.

    The body records measured details in the yielded dict (``detail`` key) and
    raises AssertionError on failure; the runtime budget is asserted on exit.
    """

    @contextlib.contextmanager
    def run(number: int, title: str, budget: float):
        info = {"detail": ""}
        t0 = time.perf_counter()
        status = "FAIL"
        try:
            yield info
            elapsed = time.perf_counter() - t0
            info["detail"] = (info["detail"] + "; " if info["detail"] else "") + f"{elapsed:.2f}s < {budget:g}s"
            assert elapsed < budget, f"criterion {number} took {elapsed:.2f}s, budget {budget:g}s"
            status = "PASS"
        finally:
            if status == "FAIL" and "s < " not in info["detail"]:
                info["detail"] += f"; {time.perf_counter() - t0:.2f}s"
            line = f"[{status}] criterion {number:2d}: {title} ({info['detail'].lstrip('; ')})"
            print(line)
            ACCEPTANCE_LINES.append((number, line))

    return run


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
