import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, max_examples=200, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

from msc.operators import ArmaOperator  # noqa: E402

B_DEFAULT = [1.0, 0.8]
A_DEFAULT = [1.0, -1.047, 0.81]


@pytest.fixture(scope="session")
def arma1000():
    return ArmaOperator(B_DEFAULT, A_DEFAULT, 1000)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        import test_acceptance
    except ImportError:
        return
    lines = test_acceptance.summary_lines()
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def deconv():
    """Trial 0 of the default benchmark with its l1 solution."""
    from msc.bench import ExperimentConfig, gen_observation, gen_sparse_spikes
    from msc.solvers import select_lambda, solve_weighted_l1

    cfg = ExperimentConfig()
    H = cfg.operator()
    x = gen_sparse_spikes(cfg, 0)
    y = gen_observation(x, cfg, 0, H)
    lam = select_lambda(H, cfg.sigma)
    return {"cfg": cfg, "H": H, "x": x, "y": y, "lam": lam, "l1": solve_weighted_l1(H, y, lam).x}
