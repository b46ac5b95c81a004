"""Closed-form value and hedging coefficient, order by order."""

import numpy as np

from quadfbsde import PRESETS, MarketState, expand, v_terms, sum_v

params = PRESETS["eg1"]
m = params.m

# value at T = 5 for each truncation order
for order in range(4):
    r = expand(MarketState(0.0, 5.0, m), params, order)
    print(f"order {order}: V = {100 * r.v:8.3f}%  Z = {100 * r.z:8.3f}%")

# individual terms, already multiplied out (divide by j! to sum them)
for key, val in v_terms(MarketState(0.0, 5.0, m), params).items():
    print(key, f"{val:+.6e}")

# the functions broadcast over arrays of start times
t = np.linspace(0.0, 10.0, 11)
curve = sum_v(v_terms(MarketState(t, 10.0, m), params))
print(np.round(100 * curve, 3))  # falls to 0 at maturity

# the same table as CSV, with no Monte Carlo column
from quadfbsde.harness import reproduce_table, table_csv  # noqa: E402

print(table_csv(reproduce_table("eg1", with_mc=False), "eg1"))
