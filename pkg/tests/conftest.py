import json
from pathlib import Path

import numpy as np
import pytest

from sksos.ensembles import RngStream, sample_goe
from sksos.witness import montanari_sen_witness

HERE = Path(__file__).parent


@pytest.fixture(scope="session")
def expectations():
    """Calibrated desk-scale thresholds; see the ``_about`` entry in the file."""
    return json.loads((HERE / "expectations.json").read_text())


def goe_bundle(N, delta=0.5, seed=0, trial=0):
    W = sample_goe(N, RngStream(seed, trial))
    return W, montanari_sen_witness(W, delta)


@pytest.fixture
def small_bundle():
    return goe_bundle(12, 0.5, seed=3)[1]


def random_unit_diag_psd(N, rank, rng):
    """Correlation matrix of ``rank`` random directions."""
    G = rng.standard_normal((rank, N))
    G /= np.linalg.norm(G, axis=0)
    return G.T @ G


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        ok, detail = RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
