"""Simulated moments of the variance correction processes D, E, F."""

from quadfbsde import PRESETS, MarketState
from quadfbsde.expansion import d2_moment
from quadfbsde.xoracle import moment_estimates, simulate_def

params = PRESETS["eg1"]
m = params.m

bundles = [simulate_def(params, m, 1.0, 0.005, seed=s, n_paths=10_000) for s in range(5)]
mom = moment_estimates(bundles)
for name, est in mom.items():
    print(f"E[{name}] = {est.mean:+.4e} +/- {est.std_err:.1e}")

print("closed-form E[D^2]:", d2_moment(MarketState(0.0, 1.0, m), 1.0, params))
