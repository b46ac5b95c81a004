import numpy as np
import pytest

from quadfbsde.model import PRESETS, ModelParams


@pytest.fixture
def eg1():
    return PRESETS["eg1"]


@pytest.fixture
def eg6():
    return PRESETS["eg6"]


def _log_uniform(rng, lo, hi):
    return float(np.exp(rng.uniform(np.log(lo), np.log(hi))))


def random_cases(n=100, seed=20120203):
    """Parameter sets drawn from the ranges used by the property suites.

    Returns tuples (params, horizon, x_t).
    """
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        params = ModelParams(
            mu=_log_uniform(rng, 0.05, 0.3),
            k=_log_uniform(rng, 0.05, 0.5),
            m=_log_uniform(rng, 0.01, 0.2),
            c=_log_uniform(rng, 0.005, 0.1),
            rho=float(rng.uniform(-0.9, 0.9)),
            gamma=_log_uniform(rng, 0.5, 5.0),
        )
        tau = _log_uniform(rng, 0.1, 10.0)
        x_t = _log_uniform(rng, params.m / 2, 2 * params.m)
        out.append((params, tau, x_t))
    return out
