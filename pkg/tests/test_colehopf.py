import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from quadfbsde.colehopf import (
    BLOCK_PAIRS,
    McConfig,
    SchemeError,
    mc_value,
    mc_value_curve,
    mc_z,
    mc_z_curve,
    milstein_step,
    normal_block,
    path_integral,
    simulate_pair_payoffs,
)
from quadfbsde.expansion import expand
from quadfbsde.model import AdjustedParams, MarketState, adjusted_mean

M = 0.0625


def printed_milstein(x, xi, dt, k, n, c):
    return (x + k * n * dt + c * math.sqrt(x) * xi * math.sqrt(dt) + 0.25 * c * c * dt * (xi * xi - 1)) / (1 + k * dt)


# --- config ------------------------------------------------------------------

def test_config_rejects_bad_values():
    with pytest.raises(ValueError, match="n_pairs"):
        McConfig(n_pairs=0)
    with pytest.raises(ValueError, match="chunk_size"):
        McConfig(chunk_size=1000)
    with pytest.raises(ValueError, match="bump_scheme"):
        McConfig(bump_scheme="sideways")
    with pytest.raises(ValueError, match="dt"):
        McConfig(dt=0.0)


def test_steps_must_divide_horizon():
    cfg = McConfig(dt=0.005)
    assert cfg.n_steps(1.0) == 200
    assert cfg.n_steps(10.0) == 2000
    with pytest.raises(ValueError):
        cfg.n_steps(1.0025)


# --- scheme ------------------------------------------------------------------

def test_milstein_step_example():
    adj = AdjustedParams(n=0.0795, k=0.15, c=0.05)
    expected = (0.0625 + 5.9625e-5 - 3.125e-6) / 1.00075
    assert milstein_step(0.0625, 0.0, 0.005, adj) == pytest.approx(expected, rel=1e-14)
    assert expected == pytest.approx(0.0625096, abs=1e-7)


def test_milstein_step_without_noise():
    adj = AdjustedParams(n=0.08, k=0.2, c=0.0)
    for xi in (-3.0, 0.0, 1.7):
        assert milstein_step(0.05, xi, 0.01, adj) == pytest.approx((0.05 + 0.2 * 0.08 * 0.01) / 1.002, rel=1e-15)
    assert milstein_step(0.08, 0.0, 0.01, adj) == pytest.approx(0.08, rel=1e-15)


@given(
    x=st.floats(1e-8, 1.0),
    xi=st.floats(-8.0, 8.0),
    dt=st.floats(1e-4, 0.1),
    c=st.floats(0.0, 0.5),
    k=st.floats(0.05, 2.0),
)
def test_milstein_step_matches_printed_form_and_stays_positive(x, xi, dt, c, k):
    n = 0.25 * c * c / k * 1.0001 + 1e-6  # just inside the positivity condition
    adj = AdjustedParams(n=n, k=k, c=c)
    got = milstein_step(x, xi, dt, adj)
    assert got > 0
    assert got == pytest.approx(printed_milstein(x, xi, dt, k, n, c), rel=1e-9, abs=1e-15)


def test_path_integral():
    assert path_integral(np.full(101, M), 0.01) == pytest.approx(16.0, rel=1e-14)
    assert path_integral(np.full(201, 0.125), 0.01) == pytest.approx(16.0, rel=1e-14)
    assert path_integral([0.05, 0.10], 1.0) == pytest.approx(15.0, rel=1e-15)


@pytest.mark.filterwarnings("ignore:Feller")
def test_refuses_when_scheme_not_positive(eg1):
    bad = eg1.with_(rho=0.9, c=0.1, k=0.05)
    assert not adjusted_mean(bad).scheme_positive
    with pytest.raises(SchemeError):
        mc_value(bad, 1.0, M, McConfig(n_pairs=10, dt=0.01))


# --- random numbers ----------------------------------------------------------

def test_normals_are_standard():
    xi = normal_block(seed=5, stream=0, block=0, n_steps=200)
    assert abs(xi.mean()) < 4 / math.sqrt(xi.size)
    assert xi.std() == pytest.approx(1.0, abs=0.01)
    assert np.isfinite(xi).all()


def test_blocks_and_streams_differ():
    a = normal_block(1, 0, 0, 4)
    assert not np.array_equal(a, normal_block(1, 0, 1, 4))
    assert not np.array_equal(a, normal_block(1, 1, 0, 4))
    assert not np.array_equal(a, normal_block(2, 0, 0, 4))
    np.testing.assert_array_equal(a, normal_block(1, 0, 0, 4))


# --- simulator against a path-by-path oracle ---------------------------------

def test_simulator_matches_scalar_reference(eg1):
    cfg = McConfig(n_pairs=5, dt=0.01, seed=3)
    n_steps = 150  # spans two step batches
    got = simulate_pair_payoffs(eg1, [M, 0.05], [100, n_steps], cfg)
    xi = normal_block(cfg.seed, 0, 0, n_steps, width=5)
    adj = adjusted_mean(eg1)
    scale = 0.5 * eg1.mu ** 2 * (1 - eg1.rho ** 2)
    for a, x0 in enumerate([M, 0.05]):
        for p in range(5):
            pays = []
            for sign in (1.0, -1.0):
                path = [x0]
                for i in range(n_steps):
                    path.append(milstein_step(path[-1], sign * xi[i, p], cfg.dt, adj))
                pays.append([math.exp(-scale * path_integral(path[: s + 1], cfg.dt)) for s in (100, n_steps)])
            expected = 0.5 * (np.array(pays[0]) + np.array(pays[1]))
            np.testing.assert_allclose(got[a, :, p], expected, rtol=1e-12)


def test_payoffs_in_unit_interval(eg6):
    pay = simulate_pair_payoffs(eg6, [M], [400], McConfig(n_pairs=2000, dt=0.005))
    assert ((pay > 0) & (pay < 1)).all()


def test_deterministic_collapse_without_vol_of_vol(eg1):
    flat = eg1.with_(c=0.0)
    est = mc_value(flat, 1.0, M, McConfig(n_pairs=50, dt=0.005))
    assert est.mean == pytest.approx(eg1.mu ** 2 / (2 * eg1.gamma * M), rel=1e-12)
    assert est.mean == pytest.approx(0.23120, abs=1e-10)
    assert est.std_err < 1e-12
    assert mc_z(flat, 1.0, M, McConfig(n_pairs=50, dt=0.005)).mean == 0


# --- reproducibility ---------------------------------------------------------

def test_same_seed_same_estimate(eg1):
    cfg = McConfig(n_pairs=3000, dt=0.01, seed=42)
    assert mc_value(eg1, 1.0, M, cfg) == mc_value(eg1, 1.0, M, cfg)


def test_chunking_and_threads_do_not_change_results(eg1):
    base = McConfig(n_pairs=5 * BLOCK_PAIRS + 17, dt=0.01, seed=9, chunk_size=BLOCK_PAIRS)
    ref = simulate_pair_payoffs(eg1, [M], [50, 100], base)
    for chunk, workers in [(2 * BLOCK_PAIRS, 1), (8 * BLOCK_PAIRS, 1), (2 * BLOCK_PAIRS, 3)]:
        other = McConfig(n_pairs=base.n_pairs, dt=0.01, seed=9, chunk_size=chunk, workers=workers)
        np.testing.assert_array_equal(simulate_pair_payoffs(eg1, [M], [50, 100], other), ref)


def test_single_maturity_equals_curve_readout(eg1):
    cfg = McConfig(n_pairs=1500, dt=0.01, seed=4)
    curve = mc_value_curve(eg1, [0.5, 1.0, 2.0], M, cfg)
    assert mc_value(eg1, 1.0, M, cfg) == curve[1]


# --- statistical behaviour ---------------------------------------------------

def test_value_close_to_expansion(eg1):
    est = mc_value(eg1, 1.0, M, McConfig(n_pairs=10_000, dt=0.005, seed=1))
    closed = expand(MarketState(0, 1, M), eg1).v
    assert abs(est.mean - closed) < 4 * est.std_err + 5e-4
    assert 0 < est.std_err < 1e-4


def test_bump_schemes_bracket_each_other(eg1):
    kw = dict(n_pairs=4000, dt=0.005, seed=8)
    back, fwd, cen = (mc_z(eg1, 2.0, M, McConfig(bump_scheme=s, **kw)) for s in ("backward", "forward", "central"))
    # shared normals: the central difference is the average of the one-sided ones
    assert cen.mean == pytest.approx(0.5 * (back.mean + fwd.mean), rel=1e-6)
    # V is convex in x0 here, so the backward slope is the steeper one
    assert back.mean < cen.mean < fwd.mean


def test_common_random_numbers_reduce_error(eg1):
    kw = dict(n_pairs=4000, dt=0.01, seed=8)
    crn = mc_z(eg1, 1.0, M, McConfig(**kw))
    ind = mc_z(eg1, 1.0, M, McConfig(common_random_numbers=False, **kw))
    assert crn.std_err < ind.std_err / 10
    assert abs(crn.mean - ind.mean) < 4 * ind.std_err


def test_z_close_to_expansion(eg1):
    est = mc_z_curve(eg1, [1.0], M, McConfig(n_pairs=10_000, dt=0.005, seed=2, bump_scheme="central"))[0]
    closed = expand(MarketState(0, 1, M), eg1).z
    assert abs(est.mean - closed) < 4 * est.std_err + 2e-4


def test_bump_larger_than_variance_rejected(eg1):
    with pytest.raises(ValueError, match="bump"):
        mc_z(eg1, 1.0, 1e-4, McConfig(n_pairs=10, dt=0.01, bump=2e-4))
