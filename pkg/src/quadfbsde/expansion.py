"""Closed-form asymptotic expansion of the quadratic FBSDE solution (V, Z).

The level component V is expanded to third order in the vol-of-vol ``c`` and
the diffusion component Z to fourth order. Each term carries a pair of
indices ``(i, j)``: ``i`` is the order of the perturbation in the quadratic
driver, ``j`` the power of ``c``. With both expansion parameters set to one,

    V = sum over (i, j) of V[i, j] / j!
    Z = sum over (i, j) of Z[i, j] / j!

Every function accepts plain floats, numpy arrays (vectorised over ``x_t``,
``t`` or ``T``), or ``mpmath.mpf`` values. The last option exists because
several V-terms are small differences of large rational and logarithmic
pieces at short horizons, which limits what double precision can resolve
under numerical differentiation.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import mpmath
import numpy as np

from .model import MarketState, ModelParams, validate

__all__ = [
    "V_LABELS",
    "Z_LABELS",
    "MIN_VARIANCE",
    "TermTable",
    "ExpansionResult",
    "y_factor",
    "x_mean",
    "d2_moment",
    "v_terms",
    "z_terms",
    "term_table",
    "sum_v",
    "sum_z",
    "expand",
    "optimal_weight",
    "mean_variance_weight",
]

V_LABELS = ((0, 0), (0, 2), (1, 1), (1, 2), (1, 3), (2, 2), (2, 3), (3, 3))
Z_LABELS = ((0, 1), (0, 3), (1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4))

# the closed forms carry 1/sqrt(x_t) and a log of x_t
MIN_VARIANCE = 1e-12

MAX_ORDER = 3


def _backend(*values):
    if any(isinstance(v, mpmath.mpf) for v in values):
        return mpmath
    return np


def _check_order(order):
    if order not in range(MAX_ORDER + 1):
        raise ValueError(f"expansion order must be one of 0..{MAX_ORDER}, got {order!r}")
    return int(order)


def y_factor(t, u, k):
    """Decay factor exp(-k (u - t)) of the mean-reverting variance."""
    if np.any(np.asarray(u < t)):
        raise ValueError("y_factor requires u >= t")
    xp = _backend(t, u, k)
    return xp.exp(-k * (u - t))


def x_mean(state: MarketState, u, params: ModelParams):
    """Zeroth-order (deterministic, c = 0) variance at time ``u``."""
    y = y_factor(state.t, u, params.k)
    return y * state.x_t + params.m * (1 - y)


def d2_moment(state: MarketState, u, params: ModelParams):
    """Conditional second moment of the first-order variance correction D.

    D solves dD = -k D du + c sqrt(X0_u) dB with D = 0 at ``state.t``.
    """
    y = y_factor(state.t, u, params.k)
    one_y = 1 - y
    return params.c ** 2 / (2 * params.k) * one_y * (one_y * params.m + 2 * y * state.x_t)


class _Shared:
    """Subexpressions common to all sixteen terms, computed once."""

    def __init__(self, state: MarketState, params: ModelParams):
        x = state.x_t
        if np.any(np.asarray(x < MIN_VARIANCE)):
            raise ValueError(f"x_t must be at least {MIN_VARIANCE:g}; the expansion is singular at 0")
        if np.any(np.asarray(state.T < state.t)):
            raise ValueError("evaluation time t must not exceed the horizon T")
        xp = _backend(x, state.t, state.T, params.k, params.c, params.mu)
        k, m = params.k, params.m
        self.y = xp.exp(-k * (state.T - state.t))
        self.a = -xp.expm1(-k * (state.T - state.t))  # 1 - Y_tT
        self.yx = self.y * x
        self.xT = self.yx + m * self.a  # X_T^(0)
        # ln(Y x / X_T^(0)), which lies in (-inf, 0]
        self.log = -xp.log1p(m * self.a / self.yx)
        self.sqrt_x = xp.sqrt(x)


def v_terms(state: MarketState, params: ModelParams) -> dict:
    """The eight V-terms keyed by ``(i, j)``; see :data:`V_LABELS`."""
    s = _Shared(state, params)
    mu, k, m, c, rho, g = params.mu, params.k, params.m, params.c, params.rho, params.gamma
    a, yx, X, L = s.a, s.yx, s.xT, s.log
    r2 = 1 - rho * rho

    # bracket shared by (1,2) and (2,2), and by (2,3) and (3,3)
    quad = a * (3 * m * a + 2 * yx) / (2 * m ** 2 * X ** 2) + L / m ** 3
    cubic = (
        a * (11 * m ** 2 * a ** 2 + 15 * m * a * yx + 6 * yx ** 2) / (6 * m ** 3 * X ** 3)
        + L / m ** 4
    )

    return {
        (0, 0): -mu ** 2 / (2 * g) / (k * m) * L,
        (0, 2): -mu ** 2 / (2 * g) * c ** 2 / k ** 2
        * (a * (m * a + 2 * yx) / (2 * m * X ** 2) + L / m ** 2),
        (1, 1): -rho * mu ** 3 * c / (2 * g * k ** 2) * (a / (m * X) + L / m ** 2),
        (1, 2): r2 * mu ** 4 * c ** 2 / (4 * g * k ** 3) * quad,
        (1, 3): 3 * rho * mu ** 3 * c ** 3 / (2 * g * k ** 3) * (
            a / (2 * m ** 2 * X ** 2) * (m * a - 2 * yx)
            - 2 / m ** 3 * L
            - a / (2 * m ** 2 * X ** 3) * (5 * m ** 2 * a ** 2 + 9 * m * a * yx + 2 * yx ** 2)
        ),
        (2, 2): -rho ** 2 * mu ** 4 * c ** 2 / (g * k ** 3) * quad,
        (2, 3): rho * r2 * 9 * mu ** 5 * c ** 3 / (4 * g * k ** 4) * cubic,
        (3, 3): -3 * rho ** 3 * mu ** 5 * c ** 3 / (g * k ** 4) * cubic,
    }


def z_terms(state: MarketState, params: ModelParams) -> dict:
    """The eight Z-terms keyed by ``(i, j)``; see :data:`Z_LABELS`.

    Each equals ``j c sqrt(x) dV[i, j-1]/dx``.
    """
    s = _Shared(state, params)
    mu, k, m, c, rho, g = params.mu, params.k, params.m, params.c, params.rho, params.gamma
    a, yx, X, sx = s.a, s.yx, s.xT, s.sqrt_x
    r2 = 1 - rho * rho

    return {
        (0, 1): -mu ** 2 * c / (2 * g * k) * a / (sx * X),
        (0, 3): -3 * mu ** 2 * c ** 3 / (2 * g * k ** 2) * a ** 2 / (sx * X ** 3) * (m * a + 2 * yx),
        (1, 2): -rho * mu ** 3 * c ** 2 / (g * k ** 2) * a ** 2 / (sx * X ** 2),
        (1, 3): r2 * 3 * mu ** 4 * c ** 3 / (4 * g * k ** 3) * a ** 3 / (sx * X ** 3),
        (1, 4): -6 * rho * mu ** 3 * c ** 4 / (g * k ** 3) * a ** 3 * (2 * m * a + 5 * yx) / (sx * X ** 4),
        (2, 3): -3 * rho ** 2 * mu ** 4 * c ** 3 / (g * k ** 3) * a ** 3 / (sx * X ** 3),
        (2, 4): rho * r2 * 9 * mu ** 5 * c ** 4 / (g * k ** 4) * a ** 4 / (sx * X ** 4),
        (3, 4): -12 * rho ** 3 * mu ** 5 * c ** 4 / (g * k ** 4) * a ** 4 / (sx * X ** 4),
    }


@dataclass(frozen=True)
class TermTable:
    v: dict
    z: dict


@dataclass(frozen=True)
class ExpansionResult:
    v: float
    z: float
    terms: TermTable
    order: int


def term_table(state: MarketState, params: ModelParams) -> TermTable:
    return TermTable(v=v_terms(state, params), z=z_terms(state, params))


def _partial_sum(terms, order):
    order = _check_order(order)
    total = 0
    for (i, j), value in terms.items():
        if i <= order:
            total = total + value / factorial(j)
    return total


def sum_v(terms, order=MAX_ORDER):
    """Partial sum of V-terms over perturbation orders ``i <= order``.

    ``terms`` is either the dict from :func:`v_terms` or a :class:`TermTable`.
    """
    if isinstance(terms, TermTable):
        terms = terms.v
    return _partial_sum(terms, order)


def sum_z(terms, order=MAX_ORDER):
    """Partial sum of Z-terms over perturbation orders ``i <= order``."""
    if isinstance(terms, TermTable):
        terms = terms.z
    return _partial_sum(terms, order)


def expand(state: MarketState, params: ModelParams, order=MAX_ORDER) -> ExpansionResult:
    """Evaluate (V, Z) at ``state`` truncated at perturbation order ``order``."""
    validate(params)
    order = _check_order(order)
    table = term_table(state, params)
    return ExpansionResult(v=sum_v(table, order), z=sum_z(table, order), terms=table, order=order)


def optimal_weight(x_t, z, params: ModelParams):
    """Amount invested in the risky asset under the optimal strategy."""
    xp = _backend(x_t, z)
    return (params.mu - params.gamma * params.rho * xp.sqrt(x_t) * z) / (params.gamma * x_t)


def mean_variance_weight(x_t, params: ModelParams):
    """Myopic weight mu / (gamma x), i.e. the strategy with no hedging demand."""
    return params.mu / (params.gamma * x_t)
