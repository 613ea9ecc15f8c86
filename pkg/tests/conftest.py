import numpy as np
import pytest

from rilqr.hankel import SignalRecord
from rilqr.plant import ACTUAL_A, ACTUAL_B, actual_plant, generate_similar_record
from rilqr.subspace import LqrWeights

# filled by tests/test_acceptance.py, printed at the end of the session
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def weights():
    return LqrWeights(np.eye(2), np.eye(2), np.eye(1), 4)


@pytest.fixture(scope="session")
def clean_record() -> SignalRecord:
    """Noiseless open-loop record of the 2-state plant, 600 samples."""
    rec, _ = generate_similar_record(actual_plant(0.0), 600, 1.0, np.random.default_rng(7))
    return rec


@pytest.fixture(scope="session")
def plant_ab():
    return ACTUAL_A.copy(), ACTUAL_B.copy()
