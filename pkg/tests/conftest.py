import numpy as np
import pytest

from qrouter import ChainSpec, ratchet_protocol

# criterion number -> list of (label, passed, detail), filled by test_acceptance.py
CRITERIA: dict[int, list[tuple[str, bool, str]]] = {}


@pytest.fixture
def chain13():
    return ChainSpec.uniform(13, 3.0, 1.5, node_index=7)


@pytest.fixture
def drive13(chain13):
    return ratchet_protocol(chain13, 10.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(CRITERIA):
        parts = CRITERIA[k]
        ok = all(p for _, p, _ in parts)
        detail = "; ".join(f"{label}: {d}" for label, _, d in parts)
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")

