"""Asymptotic expansion and Cole-Hopf Monte Carlo for the exponential-utility
portfolio FBSDE under unhedgeable stochastic volatility."""

from .colehopf import McConfig, McEstimate, mc_value, mc_value_curve, mc_z, mc_z_curve
from .expansion import (
    ExpansionResult,
    TermTable,
    expand,
    mean_variance_weight,
    optimal_weight,
    sum_v,
    sum_z,
    v_terms,
    z_terms,
)
from .model import PRESETS, MarketState, ModelParams, ParamError, adjusted_mean, validate

__version__ = "0.1.0"
