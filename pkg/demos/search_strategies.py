"""
Three ways to search the offloading decisions
=============================================

Brute force visits every binary decision, the one-climb enumeration only
those where each device moves to the edge at most once, and Gibbs sampling
walks through one-climb decisions with a cooling temperature.
"""

import time

import numpy as np

from mecoffload import GibbsConfig, brute_force, builtin_scenario, enumerate_one_climb, gibbs_sample
from mecoffload.channel import parse_scenario
from mecoffload.offload import search_sizes

# how much smaller the one-climb space is
for sizes in [(5, 10), (10, 10), (10, 20)]:
    s = search_sizes(sizes)
    print(f"M={sizes[0]:2d} N={sizes[1]:2d}: one-climb {s['one_climb']:6d}  brute force {s['brute_force']:>10d}")

# the bundled two-user scenario has 8 tasks, so brute force needs 2**8 solves;
# its workloads are redrawn uniformly in [10, 200] Mcycles
sc = builtin_scenario("fig6")
doc = sc.to_dict()
doc["randomize"] = {"workloads_mcycles": [10, 200]}
inst = parse_scenario(doc).instance(np.random.default_rng(0))

for name, run in [("brute force", lambda: brute_force(inst)),
                  ("one-climb", lambda: enumerate_one_climb(inst)),
                  ("gibbs", lambda: gibbs_sample(inst, GibbsConfig(rng_seed=1)))]:
    t0 = time.perf_counter()
    rep = run()
    dt = time.perf_counter() - t0
    print(f"{name:12s} eta={rep.best_eta:.6f}  solves={rep.evaluations:4d}  {dt:.2f} s  "
          f"decision={rep.best_decision.per_wd}")

# slower cooling explores longer before settling
for alpha in (0.5, 0.8, 0.95):
    rep = gibbs_sample(inst, GibbsConfig(cooling_rate=alpha, rng_seed=1))
    print(f"alpha={alpha:4.2f}: best {rep.best_eta:.6f} settled after sweep {rep.converged_sweep}")
