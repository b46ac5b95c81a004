"""Market and model parameters shared by the expansion and Monte Carlo code.

All quantities are decimals (a 25% volatility is ``x = 0.0625``); percent
conversion happens only when results are written out.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

__all__ = [
    "ParamError",
    "ModelParams",
    "MarketState",
    "AdjustedParams",
    "validate",
    "adjusted_mean",
    "PRESETS",
]


class ParamError(ValueError):
    """Raised when parameters violate a model invariant.

    ``violations`` lists one message per failed check.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class ModelParams:
    """Asset drift, variance dynamics and risk aversion.

    dX = k (m - X) dt + c sqrt(X) dB, dS/S = mu dt + sqrt(X) dW,
    with corr(dB, dW) = rho and exponential utility of absolute risk
    aversion ``gamma``.
    """

    mu: float
    k: float
    m: float
    c: float
    rho: float
    gamma: float = 1.0

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class MarketState:
    """Evaluation time ``t``, horizon ``T`` and current variance ``x_t``."""

    t: float
    T: float
    x_t: float

    @property
    def tau(self):
        return self.T - self.t


@dataclass(frozen=True)
class AdjustedParams:
    """Variance dynamics after the Girsanov shift of the Cole-Hopf representation.

    ``n`` is the long-run mean the variance reverts to under the changed
    measure. ``scheme_positive`` records whether ``k n >= c^2 / 4``, the
    condition under which the implicit Milstein step cannot go negative.
    """

    n: float
    k: float
    c: float

    @property
    def scheme_positive(self) -> bool:
        return self.k * self.n >= 0.25 * self.c * self.c


def validate(params: ModelParams) -> ModelParams:
    """Check every invariant of ``params`` and return it unchanged.

    All failures are collected and reported together in a single
    :class:`ParamError`. A violated Feller condition ``2 k m > c^2`` only
    triggers a warning since none of the closed forms depend on it.
    """
    errors = []
    if not params.mu > 0:
        errors.append(f"mu must be positive (got {params.mu})")
    if not params.k > 0:
        errors.append(f"k must be positive (got {params.k})")
    if not params.m > 0:
        errors.append(f"m must be positive (got {params.m})")
    if not params.c >= 0:
        errors.append(f"c must be non-negative (got {params.c})")
    if not -1 < params.rho < 1:
        errors.append(f"rho must lie in the open interval (-1, 1) (got {params.rho})")
    if not params.gamma > 0:
        errors.append(f"gamma must be positive (got {params.gamma})")
    if errors:
        raise ParamError(errors)
    if not 2 * params.k * params.m > params.c ** 2:
        warnings.warn(
            f"Feller condition 2km > c^2 violated (2km={2 * params.k * params.m:g}, "
            f"c^2={params.c ** 2:g})",
            stacklevel=2,
        )
    return params


def adjusted_mean(params: ModelParams) -> AdjustedParams:
    """Long-run variance under the measure that absorbs the linear z-term."""
    n = params.m - params.rho * params.mu * params.c / params.k
    return AdjustedParams(n=n, k=params.k, c=params.c)


# published parameter sets; eg1 has small vol-of-vol, eg6 a large one
PRESETS = {
    "eg1": ModelParams(mu=0.17, k=0.15, m=0.0625, c=0.05, rho=-0.3, gamma=1.0),
    "eg6": ModelParams(mu=0.17, k=0.20, m=0.0625, c=0.12, rho=-0.3, gamma=1.0),
    "fig1": ModelParams(mu=0.17, k=0.15, m=0.0625, c=0.05, rho=-0.35, gamma=1.0),
}
