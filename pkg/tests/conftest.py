import json
import os
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("quick", max_examples=15, deadline=None)
settings.register_profile(
    "thorough", max_examples=500, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def frozen():
    """Monte Carlo references produced by scripts/make_oracles.py."""
    return json.loads((DATA / "oracles.json").read_text(encoding="utf-8"))


@pytest.fixture
def rng(request):
    # one stream per test, stable across runs and test selection
    key = sum(map(ord, request.node.nodeid)) % (2**32)
    return np.random.default_rng(key)


@pytest.fixture(scope="session")
def table1_basket():
    from gooddeal.closedform import BasketModel

    return BasketModel(
        sigmaS=[[0.5, 0.2], [0.0, 0.4]],
        beta=[[0.3, 0.4, 0.2, 0.5], [0.5, 0.7, 0.3, 0.4]],
        gamma=[0.1, 0.3],
        S0=[1.0, 1.0],
        H0=[1.0, 1.0],
    )


TABLE1_A = (0.5, 0.65, 0.8, 0.95)
TABLE1_H = 0.3


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(results):
        terminalreporter.write_line(results[k])
