import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lipband import ArmEmbedding, BanditInstance  # noqa: E402

RISK_MEANS = (0.1, 0.0005, 0.0005, 0.2005, 0.0005, 0.0005)
RISK_X = (0.0, 0.995, 0.996, 0.997, 0.998, 0.999)
CHAIN_X = (0.0, 0.8, 0.85, 0.9, 0.95, 1.0)


@pytest.fixture
def risk():
    return BanditInstance(RISK_MEANS), ArmEmbedding.line(RISK_X)


@pytest.fixture
def chain_emb():
    return ArmEmbedding.line(CHAIN_X)


def random_instance(rng, K=None, D=1, n_sub=None):
    """Random embedding and means with a unique best arm."""
    K = K or int(rng.integers(2, 7))
    pts = rng.uniform(0, 1, size=(K, D))
    mu = rng.uniform(0.05, 0.95, size=K)
    if n_sub is not None:
        # n_sub suboptimal arms, the rest tied at the top
        order = rng.permutation(K)
        top = mu.max() + 0.01
        mu[order[: K - n_sub]] = min(top, 0.97)
    return BanditInstance(mu), ArmEmbedding(pts)


# One line per acceptance criterion, printed after the run whatever the capture mode.
ACCEPTANCE_LINES = {}


def record(criterion: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES[criterion] = f"criterion {criterion}: {'PASS' if passed else 'FAIL'} - {detail}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
