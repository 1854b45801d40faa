"""
Energy and delay of two dependent devices
=========================================

WD1 produces an output that task k of WD2 needs. Raising WD2's time weight
buys a shorter schedule with more energy; this script walks the weight and
prints the optimal schedule at each step.
"""

import numpy as np

from mecoffload import builtin_scenario, optimize

# the bundled two-user scenario: 3 tasks on WD1, 5 on WD2, joint task k = 4
sc = builtin_scenario("fig6")
print(f"scenario {sc.name}: chains of {[len(c.workloads_mcycles) for c in sc.chains]} tasks")

print(f"{'beta2_t':>8} {'decision':>12} {'T1 (s)':>8} {'E1 (J)':>9} {'T2 (s)':>8} {'E2 (J)':>9} {'eta':>8}")
for b in np.arange(0.1, 1.0, 0.2):
    rep = optimize(sc.with_beta(1, round(b, 1)).instance())
    r = rep.best_solution.result
    dec = "|".join("".join(map(str, v)) for v in rep.best_decision.per_wd)
    print(f"{b:8.1f} {dec:>12} {r.delay[0]:8.3f} {r.energy[0]:9.4f} {r.delay[1]:8.3f} {r.energy[1]:9.4f} "
          f"{r.eta_total:8.4f}")

# moving the joint task later gives WD1 more slack, so it can slow down
print()
print(f"{'k':>3} {'T1 (s)':>8} {'T2 (s)':>8}")
for k in range(1, 6):
    r = optimize(sc.with_joint_task(k).instance()).best_solution.result
    print(f"{k:3d} {r.delay[0]:8.3f} {r.delay[1]:8.3f}")
