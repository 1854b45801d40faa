"""Several producers feeding one joint task of the consumer.

Every producer ``j`` gets its own dual ``lambda_j`` on its waiting-time
constraint; the consumer's pre-joint part gets ``mu = beta_c_t - sum(lambda)``.
Each producer's dual solves its own waiting-time residual against the
consumer's binding wait; an outer bisection on ``mu`` closes the budget.
"""

from __future__ import annotations

import math

from dataclasses import dataclass

from .model import Allocation, EtcResult, Instance, ModelError, OffloadDecision, evaluate_schedule, producer_wait
from .offload import GibbsConfig, SearchReport, gibbs_sample
from .resource import BisectionConfig, ConvergenceError, WaitPlan, allocate, solve_inner

__all__ = [
    "MultiInnerSolution",
    "producer_wait",
    "solve_inner_multi",
    "gibbs_sample_multi",
    "check_admission",
]


def check_admission(inst: Instance) -> None:
    if inst.graph.num_wds > inst.params.edge_cores:
        raise ModelError(f"{inst.graph.num_wds} WDs exceed the {inst.params.edge_cores} edge cores")


@dataclass
class MultiInnerSolution:
    decision: OffloadDecision
    allocation: Allocation
    lams: dict
    mu: float
    result: EtcResult
    iterations: int

    @property
    def objective(self) -> float:
        return self.result.eta_total


_INNER_STEPS = 60
_WAIT_TOL = 1e-7  # seconds; far below any useful epsilon


def _dual_for_level(plan: WaitPlan, j: int, level: float, cap: float, lo: float = 0.0,
                    hi: float | None = None) -> float:
    """Smallest lambda_j in [lo, hi] (default [0, cap]) whose producer wait is at most ``level``.

    Bisection on the per-producer residual ``T_j_wait(lambda) - level``;
    returns ``hi`` when even ``hi`` leaves the producer above the level.
    Callers narrow ``[lo, hi]`` with duals already known for nearby levels.
    """
    hi = cap if hi is None else hi
    f_lo = plan.producer_wait(j, lo) - level
    if f_lo <= 0.0:
        return lo
    f_hi = plan.producer_wait(j, hi) - level
    if lo == hi or f_hi > 0.0:
        return hi
    # Illinois regula falsi; the bracket keeps f(lo) > 0 >= f(hi) throughout
    side = 0
    for _ in range(_INNER_STEPS):
        if math.isfinite(f_lo):
            mid = hi - f_hi * (hi - lo) / (f_hi - f_lo)
            if not lo < mid < hi:
                mid = 0.5 * (lo + hi)
        else:
            mid = 0.5 * (lo + hi)
        f_mid = plan.producer_wait(j, mid) - level
        if f_mid > 0.0:
            lo, f_lo = mid, f_mid
            if side == 1:
                f_hi *= 0.5
            side = 1
        else:
            hi, f_hi = mid, f_mid
            if -f_mid < _WAIT_TOL:
                break
            if side == -1 and math.isfinite(f_lo):
                f_lo *= 0.5
            side = -1
        if hi - lo <= 1e-15 * hi:
            break
    return hi


def _level_duals(plan: WaitPlan, level: float, budget: float, below: dict | None = None,
                 above: dict | None = None) -> dict:
    """Duals at ``level``; ``below``/``above`` are duals at a higher/lower level that bracket them."""
    return {j: _dual_for_level(plan, j, level, budget,
                               below[j] if below else 0.0, above[j] if above else None)
            for j in plan.inst.graph.producers}


def _residuals(plan: WaitPlan, lams: dict, mu: float) -> dict:
    t_c = plan.consumer_wait(mu)
    return {j: plan.producer_wait(j, v) - t_c for j, v in lams.items()}


def _settled(plan: WaitPlan, lams: dict, mu: float, eps: float) -> bool:
    res = _residuals(plan, lams, mu)
    return all(r < eps and (lams[j] == 0.0 or r > -eps) for j, r in res.items())


def _blend(lo: dict, hi: dict, target: float) -> dict:
    """Point on the segment lo -> hi whose duals sum to ``target``."""
    s_lo, s_hi = sum(lo.values()), sum(hi.values())
    theta = 0.0 if s_hi <= s_lo else min(max((target - s_lo) / (s_hi - s_lo), 0.0), 1.0)
    return {j: lo[j] + theta * (hi[j] - lo[j]) for j in lo}


def _solve_duals(plan: WaitPlan, budget: float, cfg: BisectionConfig) -> tuple:
    """Producer duals and consumer dual with ``sum(lams) + mu = budget``.

    Outer bisection on a scalar that sets the common waiting level: mu when
    the consumer's pre-joint wait reacts to it, otherwise the level itself.
    At each trial every producer's dual solves its own residual against that
    level.  Clamped frequencies and powers make a producer's wait flat in its
    dual, so the duals can jump across the crossing; the final duals are
    blended between the two sides of the bracket so the budget holds exactly.
    """
    c = plan.inst.graph.consumer
    constant = not plan.own[c].up_bits and plan.own[c].local_cycles == 0

    if constant:
        floor = plan.consumer_wait(0.0)
        lams = _level_duals(plan, floor, budget)
        if sum(lams.values()) <= budget:
            return lams, budget - sum(lams.values()), 0
        lo, d_lo = floor, lams
        hi = max(max(plan.producer_wait(j, budget) for j in lams), floor + 1.0)
        d_hi = _level_duals(plan, hi, budget)
        while sum(d_hi.values()) > budget:
            hi = floor + 2.0 * (hi - floor)
            if not math.isfinite(hi):
                raise ConvergenceError("no finite waiting level fits the time-weight budget")
            d_hi = _level_duals(plan, hi, budget)
        # the consumer is not binding: producers with a positive dual finish together
        for it in range(1, cfg.max_iters + 1):
            mid = 0.5 * (lo + hi)
            d_mid = _level_duals(plan, mid, budget, below=d_hi, above=d_lo)
            if sum(d_mid.values()) > budget:
                lo, d_lo = mid, d_mid
            else:
                hi, d_hi = mid, d_mid
            lams = _blend(d_hi, d_lo, budget)
            waits = {j: plan.producer_wait(j, v) for j, v in lams.items()}
            top = max(waits.values())
            if all(top - w < cfg.epsilon for j, w in waits.items() if lams[j] > 0):
                return lams, 0.0, it
        raise ConvergenceError(f"dual search did not settle after {cfg.max_iters} iterations")

    lams = _level_duals(plan, plan.consumer_wait(budget), budget)
    if sum(lams.values()) == 0.0:
        return lams, budget, 0
    lo, hi = 0.0, budget
    d_lo, d_hi = {j: 0.0 for j in lams}, lams
    for it in range(1, cfg.max_iters + 1):
        mid = 0.5 * (lo + hi)
        # a larger mu lowers the consumer's wait, which raises every producer dual
        d_mid = _level_duals(plan, plan.consumer_wait(mid), budget, below=d_lo, above=d_hi)
        if sum(d_mid.values()) + mid > budget:
            hi, d_hi = mid, d_mid
        else:
            lo, d_lo = mid, d_mid
        mu = 0.5 * (lo + hi)
        lams = _blend(d_lo, d_hi, budget - mu)
        if mu > 0.0 and abs(sum(lams.values()) + mu - budget) <= 1e-12 * budget \
                and _settled(plan, lams, mu, cfg.epsilon):
            return lams, mu, it
    raise ConvergenceError(f"dual search did not settle after {cfg.max_iters} iterations")


def solve_inner_multi(inst: Instance, decision: OffloadDecision,
                      cfg: BisectionConfig = BisectionConfig()) -> MultiInnerSolution:
    """Optimal allocation under a fixed decision for any number of producers.

    With a single producer this is the two-user bisection on nu itself.
    """
    check_admission(inst)
    producers = inst.graph.producers
    if len(producers) == 1:
        sol = solve_inner(inst, decision, cfg)
        j = producers[0]
        return MultiInnerSolution(decision, sol.allocation, {j: sol.dual.lam}, sol.dual.mu,
                                  sol.result, sol.iterations)
    plan = WaitPlan.build(inst, decision)
    budget = float(inst.weights.beta_t[inst.graph.consumer])
    lams, mu, iters = _solve_duals(plan, budget, cfg)
    mu = budget - sum(lams.values())
    alloc = allocate(inst, decision, lams, mu)
    res = evaluate_schedule(inst, decision, alloc)
    return MultiInnerSolution(decision, alloc, dict(lams), mu, res, iters)


def gibbs_sample_multi(inst: Instance, gcfg: GibbsConfig = GibbsConfig(),
                       cfg: BisectionConfig = BisectionConfig()) -> SearchReport:
    """One-climb Gibbs sampling with per-WD sequential updates over all J devices."""
    check_admission(inst)
    return gibbs_sample(inst, gcfg, cfg, solver=lambda i, d: solve_inner_multi(i, d, cfg))
