"""Facility location with a budget on each scenario's opening and assignment cost.

A pre-check first asks whether the budget is hopeless: if even the cheapest
possible assignment of a scenario's clients exceeds it too often, no first
stage can help.  Otherwise the multiplier search runs on facility scenario
LPs, and the result is rounded with filtering and clustering.
"""

import numpy as np

from riskaverse.exact_oracle import exact_integer_enum, exact_lp
from riskaverse.facility import fl_feasibility_check, fl_recourse, fl_risk_solve, round_fl
from riskaverse.generators import grid_fl
from riskaverse.model import RiskParams

np.set_printoptions(precision=3, suppress=True)
inst, dist = grid_fl(rows=2, cols=2, seed=1, budget=3.0)
params = RiskParams(rho=0.3, full_support=True)
print(f"{inst.m} facilities, {len(inst.clients)} clients, budget {inst.budget}")

check = fl_feasibility_check(inst, dist, params)
print(f"pre-check: {type(check).__name__}, mass that cannot fit {check.estimate:.3f}")

rep = fl_risk_solve(inst, dist, params)
print(f"opened fractionally in stage one: {rep.x}")
print(f"cost estimate {rep.cost_estimate:.4f}, LP optimum {exact_lp(inst, dist, 0.3).value:.4f}")
for scen, p in dist:
    rec = fl_recourse(rep, inst, scen)
    print(f"  {sorted(scen.active)!s:22} p={p:.3f}  late openings {rec.open_y + rec.open_v}  r={rec.r:.3f}")

sol = round_fl(inst, rep.x, dist, eps_r=0.3)
print(f"\nrounded: open {[inst.facilities[i] for i in sol.stage1]} now, "
      f"expected cost {sol.expected_cost(dist):.4f}")
print(f"integer optimum by enumeration: {exact_integer_enum(inst, dist, 0.3)[0]:.4f}")
