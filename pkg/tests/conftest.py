import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from percwalk.environment import ConductanceLaw, build_cluster_index, environment_from_weights, sample_environment
from percwalk.lattice import DomainSpec
from percwalk.spectral import DisconnectedWarning

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE_LINES: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: int(k[2:])):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture(autouse=True)
def _quiet_disconnected():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DisconnectedWarning)
        yield


def grid_weights(shape, value=1.0):
    """Weights for a box window with every internal edge set to ``value``."""
    d = len(shape)
    w = np.full((d,) + tuple(shape), float(value))
    for i in range(d):
        idx = [slice(None)] * d
        idx[i] = -1
        w[i][tuple(idx)] = 0.0
    return w


def hand_env(lo, hi, weights, K=2.0, domain=None):
    d = len(lo)
    return environment_from_weights(domain or DomainSpec.full(d), lo, hi, weights, K=K)


@pytest.fixture
def hole_env():
    """Constant weights on [-3, 3]^2 except an irregular edge (0,0)-(1,0) of weight 10.

    With K = 2 every edge at (0,0) or (1,0) touches the irregular edge, so exactly
    these two vertices form a hole of size 2 and l-inf diameter 1.
    """
    w = grid_weights((7, 7))
    w[0][3, 3] = 10.0          # direction 0, base (0, 0) -> (1, 0)
    env = hand_env((-3, -3), (3, 3), w, K=2.0)
    return env, build_cluster_index(env)


@pytest.fixture(scope="session")
def bern07():
    env = sample_environment(DomainSpec.full(2), 16, ConductanceLaw.bernoulli(0.7), 7)
    return env, build_cluster_index(env)
