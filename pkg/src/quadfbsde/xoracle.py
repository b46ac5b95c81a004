"""Monte Carlo check of the small-noise expansion of the variance process.

Writing the variance with a scaled vol-of-vol as X0 + D + E/2 + F/6 + ...,
the correction processes solve linear SDEs driven by one Brownian motion:

    dD = -k D du + c sqrt(X0) dB
    dE = -k E du + c X0^(-1/2) D dB
    dF = -k F du + (3/2) c (X0^(-1/2) E - X0^(-3/2) D^2 / 2) dB

all started at zero. The closed-form expansion relies on their conditional
moments (E[D] = E[E] = E[F] = E[D^3] = E[D E] = 0 and a closed form for
E[D^2]); this module simulates the processes by Euler-Maruyama so those
identities can be checked without reference to the expansion code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .colehopf import BLOCK_PAIRS, normal_block
from .model import ModelParams, validate

__all__ = ["ExpansionPathBundle", "MomentEstimate", "simulate_def", "moment_estimates"]


@dataclass(frozen=True)
class ExpansionPathBundle:
    """Simulated correction processes at the recorded grid times.

    ``d_path``, ``e_path`` and ``f_path`` have shape (len(grid), n_paths).
    """

    grid: np.ndarray
    x0_path: np.ndarray
    d_path: np.ndarray
    e_path: np.ndarray
    f_path: np.ndarray

    @property
    def n_paths(self) -> int:
        return self.d_path.shape[1]


@dataclass(frozen=True)
class MomentEstimate:
    mean: float
    std_err: float


def _normals(seed, n_steps, n_paths, antithetic):
    width = n_paths // 2 if antithetic else n_paths
    blocks = []
    for b, start in enumerate(range(0, width, BLOCK_PAIRS)):
        blocks.append(normal_block(seed, 2, b, n_steps, min(BLOCK_PAIRS, width - start)))
    xi = np.concatenate(blocks, axis=1) if blocks else np.empty((n_steps, 0))
    return np.concatenate([xi, -xi], axis=1) if antithetic else xi


def simulate_def(
    params: ModelParams,
    x_t: float,
    horizon: float,
    dt: float,
    seed: int,
    n_paths: int = 10_000,
    record_all: bool = False,
    antithetic: bool = False,
) -> ExpansionPathBundle:
    """Euler-Maruyama paths of D, E, F from time 0 to ``horizon``.

    Only the start and end of the grid are kept unless ``record_all``.
    With ``antithetic`` the second half of the paths uses negated draws;
    ``n_paths`` must then be even.
    """
    validate(params)
    if not x_t > 0:
        raise ValueError("x_t must be positive")
    n_steps = round(horizon / dt) if horizon > 0 else 0
    if not math.isclose(n_steps * dt, horizon, rel_tol=1e-9, abs_tol=1e-12):
        raise ValueError(f"dt={dt} does not divide horizon {horizon}")
    if antithetic and n_paths % 2:
        raise ValueError("antithetic sampling needs an even number of paths")

    k, m, c = params.k, params.m, params.c
    times = np.arange(n_steps + 1) * dt
    x0 = x_t * np.exp(-k * times) + m * (1 - np.exp(-k * times))
    xi = _normals(seed, n_steps, n_paths, antithetic) if n_steps else None

    d = np.zeros(n_paths)
    e = np.zeros(n_paths)
    f = np.zeros(n_paths)
    rec = [(d, e, f)] if record_all else None
    sdt = math.sqrt(dt)
    for i in range(n_steps):
        db = xi[i] * sdt
        s = math.sqrt(x0[i])
        dd = -k * d * dt + c * s * db
        de = -k * e * dt + c / s * d * db
        df = -k * f * dt + 1.5 * c * (e / s - 0.5 * d * d / s ** 3) * db
        d, e, f = d + dd, e + de, f + df
        if record_all:
            rec.append((d, e, f))

    if record_all:
        grid, x_rec = times, x0
        d_path, e_path, f_path = (np.stack(col) for col in zip(*rec))
    else:
        keep = [0, n_steps] if n_steps else [0]
        grid, x_rec = times[keep], x0[keep]
        zero = np.zeros(n_paths)
        ends = [(zero, zero, zero)] + ([(d, e, f)] if n_steps else [])
        d_path, e_path, f_path = (np.stack(col) for col in zip(*ends))
    return ExpansionPathBundle(grid=grid, x0_path=x_rec, d_path=d_path, e_path=e_path, f_path=f_path)


def moment_estimates(bundles) -> dict:
    """Sample moments of D, E, F at the final recorded time, pooled over bundles.

    Keys are ``"D"``, ``"E"``, ``"F"``, ``"D2"``, ``"D3"``, ``"DE"``. Standard
    errors treat every path as an independent sample, so antithetic bundles
    overstate them.
    """
    if not isinstance(bundles, (list, tuple)):
        bundles = [bundles]
    d = np.concatenate([b.d_path[-1] for b in bundles])
    e = np.concatenate([b.e_path[-1] for b in bundles])
    f = np.concatenate([b.f_path[-1] for b in bundles])
    samples = {"D": d, "E": e, "F": f, "D2": d * d, "D3": d ** 3, "DE": d * e}
    n = d.size
    return {
        name: MomentEstimate(
            mean=float(v.mean()),
            std_err=float(v.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0,
        )
        for name, v in samples.items()
    }
