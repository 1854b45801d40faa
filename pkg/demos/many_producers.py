"""
Several producers feeding one task
==================================

WD2's fourth task waits for the final outputs of every other device. Joint
optimisation coordinates the producers; the independent scheme lets each
device optimise alone. The gap between the two is printed as devices are added.
"""

import numpy as np

from mecoffload import builtin_scenario, independent, optimize

sc = builtin_scenario("multiuser")
draws = 3

print(f"{'J':>2} {'joint':>8} {'independent':>12} {'gap':>7}")
for J in range(2, sc.num_wds + 1):
    joint, alone = [], []
    for rep in range(draws):
        # distances drawn per repetition, shared across J
        inst = sc.truncate(J).instance(np.random.default_rng([0, rep]))
        joint.append(optimize(inst, "gibbs").best_eta)
        alone.append(independent(inst).eta_total)
    print(f"{J:2d} {np.mean(joint):8.4f} {np.mean(alone):12.4f} {np.mean(alone) - np.mean(joint):7.4f}")
