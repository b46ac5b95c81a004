"""Monte Carlo "exact" solution of the FBSDE through the Cole-Hopf transform.

With K = exp(-gamma (1 - rho^2) V) the quadratic driver disappears and

    V_0 = -1 / (gamma (1 - rho^2)) * ln E*[exp(-mu^2 (1 - rho^2) / 2 * int_0^T ds / X_s)]

where under the changed measure the variance reverts to the adjusted mean
``n = m - rho mu c / k``. The variance is simulated with the drift-implicit
Milstein scheme, the time integral with the trapezoidal rule, and every
path is paired with its antithetic partner.

Random numbers come from counter-based Philox streams, one per block of
:data:`BLOCK_PAIRS` consecutive pairs, keyed by (seed, stream, block). A
path therefore sees the same normals no matter how the pairs are grouped
into work chunks, and estimates are reduced over the full per-pair array
in pair order, so results do not depend on ``chunk_size`` or ``workers``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .model import AdjustedParams, ModelParams, adjusted_mean, validate

__all__ = [
    "BLOCK_PAIRS",
    "McConfig",
    "McEstimate",
    "SchemeError",
    "milstein_step",
    "path_integral",
    "normal_block",
    "simulate_pair_payoffs",
    "mc_value",
    "mc_value_curve",
    "mc_z",
    "mc_z_curve",
]

BLOCK_PAIRS = 1024
_STEP_BATCH = 128
_BUMP_SCHEMES = ("backward", "forward", "central")


class SchemeError(ValueError):
    """The implicit Milstein step is not guaranteed to stay positive."""


@dataclass(frozen=True)
class McConfig:
    """Monte Carlo settings.

    ``bump_scheme`` selects how dV/dx0 is estimated for Z: ``"backward"``
    uses V(x0) - V(x0 - bump), ``"forward"`` V(x0 + bump) - V(x0), and
    ``"central"`` the symmetric difference. ``chunk_size`` counts pairs per
    work unit and must be a multiple of :data:`BLOCK_PAIRS`.
    """

    n_pairs: int = 200_000
    dt: float = 0.005
    bump: float = 5e-4
    seed: int = 0
    common_random_numbers: bool = True
    chunk_size: int = 16 * BLOCK_PAIRS
    bump_scheme: str = "backward"
    workers: int = 1

    def __post_init__(self):
        errors = []
        if self.n_pairs < 1:
            errors.append("n_pairs must be at least 1")
        if not self.dt > 0:
            errors.append("dt must be positive")
        if not self.bump > 0:
            errors.append("bump must be positive")
        if not 0 <= self.seed < 2 ** 64:
            errors.append("seed must fit in 64 unsigned bits")
        if self.chunk_size < BLOCK_PAIRS or self.chunk_size % BLOCK_PAIRS:
            errors.append(f"chunk_size must be a positive multiple of {BLOCK_PAIRS}")
        if self.bump_scheme not in _BUMP_SCHEMES:
            errors.append(f"bump_scheme must be one of {_BUMP_SCHEMES}")
        if self.workers < 1:
            errors.append("workers must be at least 1")
        if errors:
            raise ValueError("; ".join(errors))

    def n_steps(self, horizon: float) -> int:
        """Number of grid steps to reach ``horizon``; it must be a multiple of dt."""
        steps = round(horizon / self.dt)
        if steps < 1 or not math.isclose(steps * self.dt, horizon, rel_tol=1e-9, abs_tol=1e-12):
            raise ValueError(f"horizon {horizon} is not a positive integer multiple of dt={self.dt}")
        return steps


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_err: float
    n_samples: int


def _check_positive(adj: AdjustedParams):
    if not adj.scheme_positive:
        raise SchemeError(
            f"k*n = {adj.k * adj.n:g} < c^2/4 = {0.25 * adj.c ** 2:g}: "
            "implicit Milstein scheme may produce negative variance"
        )


def milstein_step(x_prev, xi, dt, adj: AdjustedParams):
    """One drift-implicit Milstein step of dX = k (n - X) dt + c sqrt(X) dB.

    The numerator ``x + k n dt + c sqrt(x) xi sqrt(dt) + c^2 dt (xi^2 - 1) / 4``
    is evaluated as ``(sqrt(x) + c xi sqrt(dt) / 2)^2 + (k n - c^2 / 4) dt``,
    which is the same quantity written so that it is visibly positive.
    """
    root = np.sqrt(x_prev) + 0.5 * adj.c * xi * np.sqrt(dt)
    return (root * root + (adj.k * adj.n - 0.25 * adj.c * adj.c) * dt) / (1 + adj.k * dt)


def path_integral(x_path, dt):
    """Trapezoidal approximation of int ds / X_s along axis 0 of ``x_path``."""
    inv = 1.0 / np.asarray(x_path, dtype=float)
    return dt * (inv.sum(axis=0) - 0.5 * (inv[0] + inv[-1]))


def _uniforms(raw):
    # top 53 bits, centred in their cell: strictly inside (0, 1)
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53


def _block_generator(seed, stream, block):
    return np.random.Philox(key=seed | (block << 64) | (stream << 96))


def normal_block(seed: int, stream: int, block: int, n_steps: int, width: int = BLOCK_PAIRS):
    """Standard normals of shape (n_steps, width) for one RNG block.

    Generated by inverse-CDF transform so that the antithetic partner of a
    draw is exactly its negation. Mainly exposed for testing: the simulator
    draws the same numbers in step batches.
    """
    gen = _block_generator(seed, stream, block)
    return ndtri(_uniforms(gen.random_raw(n_steps * width))).reshape(n_steps, width)


def _simulate_chunk(adj, payoff_scale, x0s, checkpoints, dt, seed, stream, blocks, widths):
    """Pair-averaged payoffs for one chunk of RNG blocks.

    Returns an array of shape (len(x0s), len(checkpoints), sum(widths)).
    """
    gens = [_block_generator(seed, stream, b) for b in blocks]
    n_pairs = sum(widths)
    n_x0 = len(x0s)
    n_steps = checkpoints[-1]
    # layout along the path axis: [x0 index][original | antithetic][pair]
    x = np.repeat(np.asarray(x0s, dtype=float), 2 * n_pairs)
    inv_prev = 1.0 / x
    integral = np.zeros_like(x)
    out = np.empty((n_x0, len(checkpoints), n_pairs))
    sdt = math.sqrt(dt)
    drift = (adj.k * adj.n - 0.25 * adj.c * adj.c) * dt
    denom = 1.0 + adj.k * dt
    half_c_sdt = 0.5 * adj.c * sdt

    step = 0
    next_cp = 0
    while step < n_steps:
        batch = min(_STEP_BATCH, n_steps - step)
        xi = np.concatenate(
            [ndtri(_uniforms(g.random_raw(batch * w))).reshape(batch, w) for g, w in zip(gens, widths)],
            axis=1,
        )
        xi = np.tile(np.concatenate([xi, -xi], axis=1), (1, n_x0))
        for row in xi:
            root = np.sqrt(x) + half_c_sdt * row
            x = (root * root + drift) / denom
            inv = 1.0 / x
            integral += 0.5 * dt * (inv_prev + inv)
            inv_prev = inv
            step += 1
            if step == checkpoints[next_cp]:
                payoff = np.exp(-payoff_scale * integral).reshape(n_x0, 2, n_pairs)
                out[:, next_cp, :] = 0.5 * (payoff[:, 0, :] + payoff[:, 1, :])
                next_cp += 1
    return out


def simulate_pair_payoffs(params: ModelParams, x0s, steps, cfg: McConfig, stream: int = 0):
    """Antithetic pair-averaged payoffs exp(-mu^2 (1-rho^2)/2 int ds/X).

    ``x0s`` are initial variances simulated with common normals; ``steps``
    are increasing grid indices at which the running integral is read out.
    Returns shape (len(x0s), len(steps), cfg.n_pairs).
    """
    validate(params)
    adj = adjusted_mean(params)
    _check_positive(adj)
    steps = [int(s) for s in steps]
    if not steps or steps[0] < 1 or any(b <= a for a, b in zip(steps, steps[1:])):
        raise ValueError("checkpoints must be strictly increasing positive step counts")
    if any(not x0 > 0 for x0 in x0s):
        raise ValueError("initial variance must be positive")
    payoff_scale = 0.5 * params.mu ** 2 * (1 - params.rho ** 2)

    n_blocks = -(-cfg.n_pairs // BLOCK_PAIRS)
    per_chunk = cfg.chunk_size // BLOCK_PAIRS
    chunks = []
    for first in range(0, n_blocks, per_chunk):
        blocks = list(range(first, min(first + per_chunk, n_blocks)))
        widths = [min(BLOCK_PAIRS, cfg.n_pairs - b * BLOCK_PAIRS) for b in blocks]
        chunks.append((blocks, widths))

    def work(chunk):
        blocks, widths = chunk
        return _simulate_chunk(adj, payoff_scale, x0s, steps, cfg.dt, cfg.seed, stream, blocks, widths)

    if cfg.workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]
    return np.concatenate(parts, axis=2)


def _value_estimate(pair_payoffs, params: ModelParams) -> McEstimate:
    scale = params.gamma * (1 - params.rho ** 2)
    mean_payoff = pair_payoffs.mean()
    if not mean_payoff > 0:
        raise FloatingPointError("mean payoff is not positive; simulation is broken")
    n = pair_payoffs.size
    se_payoff = pair_payoffs.std(ddof=1) / math.sqrt(n) if n > 1 else 0.0
    return McEstimate(
        mean=float(-math.log(mean_payoff) / scale),
        std_err=float(se_payoff / (scale * mean_payoff)),
        n_samples=n,
    )


def mc_value_curve(params: ModelParams, maturities, x0: float, cfg: McConfig, stream: int = 0):
    """V_0 for several maturities read off the same set of simulated paths."""
    steps = [cfg.n_steps(T) for T in maturities]
    payoffs = simulate_pair_payoffs(params, [x0], steps, cfg, stream)[0]
    return [_value_estimate(p, params) for p in payoffs]


def mc_value(params: ModelParams, T: float, x0: float, cfg: McConfig, stream: int = 0) -> McEstimate:
    """Monte Carlo estimate of V_0 for horizon ``T`` and initial variance ``x0``.

    ``std_err`` propagates the payoff standard error through the log
    transform to first order.

    >>> from quadfbsde.model import PRESETS
    >>> est = mc_value(PRESETS["eg1"].with_(c=0.0), 1.0, 0.0625, McConfig(n_pairs=10, dt=0.01))
    >>> round(est.mean, 6)
    0.2312
    """
    return mc_value_curve(params, [T], x0, cfg, stream)[0]


def _bump_points(x0, cfg: McConfig):
    h = cfg.bump
    lo, hi, width = {
        "forward": (x0, x0 + h, h),
        "backward": (x0 - h, x0, h),
        "central": (x0 - h, x0 + h, 2 * h),
    }[cfg.bump_scheme]
    if not lo > 0:
        raise ValueError(f"bump {h} is too large for initial variance {x0}")
    return lo, hi, width


def mc_z_curve(params: ModelParams, maturities, x0: float, cfg: McConfig):
    """Z_0 = c sqrt(x0) dV/dx0 by bump-and-revalue, for several maturities."""
    steps = [cfg.n_steps(T) for T in maturities]
    lo, hi, width = _bump_points(x0, cfg)
    scale = params.gamma * (1 - params.rho ** 2)
    lever = params.c * math.sqrt(x0) / width

    if cfg.common_random_numbers:
        payoffs = simulate_pair_payoffs(params, [lo, hi], steps, cfg)
        p_lo, p_hi = payoffs[0], payoffs[1]
    else:
        p_lo = simulate_pair_payoffs(params, [lo], steps, cfg, stream=0)[0]
        p_hi = simulate_pair_payoffs(params, [hi], steps, cfg, stream=1)[0]

    out = []
    for a, b in zip(p_lo, p_hi):
        v_lo = _value_estimate(a, params)
        v_hi = _value_estimate(b, params)
        if cfg.common_random_numbers:
            # linearised per-pair contribution to V(hi) - V(lo)
            diff = -(b / b.mean() - a / a.mean()) / scale
            se = diff.std(ddof=1) / math.sqrt(diff.size) if diff.size > 1 else 0.0
        else:
            se = math.hypot(v_lo.std_err, v_hi.std_err)
        out.append(McEstimate(
            mean=float(lever * (v_hi.mean - v_lo.mean)),
            std_err=float(lever * se),
            n_samples=v_lo.n_samples,
        ))
    return out


def mc_z(params: ModelParams, T: float, x0: float, cfg: McConfig) -> McEstimate:
    """Monte Carlo estimate of Z_0 from a bumped initial variance."""
    return mc_z_curve(params, [T], x0, cfg)[0]
