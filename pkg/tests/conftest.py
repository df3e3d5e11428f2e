import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from rydramp.model import ChainConfig, DEFAULT_SPACING_FRACTION


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance: end-to-end acceptance criteria (slow)")


#: (criterion id, passed, detail) tuples filled by the acceptance tests.
ACCEPTANCE_LOG = []


def record_criterion(cid: str, passed: bool, detail: str) -> None:
    ACCEPTANCE_LOG.append((cid, passed, detail))
    status = "PASS" if passed else "FAIL"
    print(f"[{status}] {cid}: {detail}")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LOG:
        return
    terminalreporter.section("acceptance criteria")
    for cid, passed, detail in ACCEPTANCE_LOG:
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {cid}: {detail}")


def chain_for(n_atoms: int, order: int = 2, fraction: float = None,
              omega: float = 1.0) -> ChainConfig:
    """Chain with spacing given as a fraction of the blockade radius."""
    if fraction is None:
        fraction = DEFAULT_SPACING_FRACTION[order]
    rb = (862690.0 / omega) ** (1.0 / 6.0)
    return ChainConfig(n_atoms=n_atoms, spacing=fraction * rb, order=order,
                       omega=omega)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def worker_count() -> int:
    return int(os.environ.get("RYDRAMP_TEST_WORKERS",
                              min(2, os.cpu_count() or 1)))
