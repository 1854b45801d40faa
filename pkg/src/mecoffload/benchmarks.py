"""Reference schemes the joint optimum is compared against.

``all_local`` and ``all_offload`` fix the decision and still optimise the
allocation.  ``independent`` lets every WD minimise its own cost as if no
other device existed, then evaluates the coupled timeline with the choices
it made; a producer's relay upload is then sized with its own time weight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (EtcResult, Instance, OffloadDecision, evaluate_schedule,
                    standalone_cost)
from .multiuser import solve_inner_multi
from .offload import (GibbsConfig, SearchReport, brute_force, enumerate_one_climb,
                      gibbs_sample, one_climb_vectors)
from .resource import BisectionConfig, allocate_weighted, solve_inner

SCHEMES = ("optimal", "all-offload", "all-local", "independent")
METHODS = ("oneclimb", "gibbs", "bruteforce")


@dataclass
class SchemeResult:
    scheme: str
    decision: OffloadDecision
    result: EtcResult
    duals: dict
    evaluations: int = 1

    @property
    def eta_total(self) -> float:
        return self.result.eta_total


def inner_solver(inst: Instance, cfg: BisectionConfig = BisectionConfig()):
    """Fixed-decision solver matching the number of producers."""
    if len(inst.graph.producers) == 1:
        return lambda i, d: solve_inner(i, d, cfg)
    return lambda i, d: solve_inner_multi(i, d, cfg)


def duals_of(inst: Instance, sol) -> dict:
    """``{"lambda": {producer: value}, "mu": value}`` for either solver."""
    if hasattr(sol, "lams"):
        return {"lambda": dict(sol.lams), "mu": sol.mu}
    (j,) = inst.graph.producers
    return {"lambda": {j: sol.dual.lam}, "mu": sol.dual.mu}


def optimize(inst: Instance, method: str = "oneclimb", cfg: BisectionConfig = BisectionConfig(),
             gcfg: GibbsConfig = GibbsConfig()) -> SearchReport:
    solver = inner_solver(inst, cfg)
    if method == "oneclimb":
        return enumerate_one_climb(inst, cfg, solver=solver)
    if method == "bruteforce":
        return brute_force(inst, cfg, solver=solver)
    if method == "gibbs":
        return gibbs_sample(inst, gcfg, cfg, solver=solver)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def fixed_decision(inst: Instance, decision: OffloadDecision, name: str,
                   cfg: BisectionConfig = BisectionConfig()) -> SchemeResult:
    sol = inner_solver(inst, cfg)(inst, decision)
    return SchemeResult(name, decision, sol.result, duals_of(inst, sol))


def all_local(inst: Instance, cfg: BisectionConfig = BisectionConfig()) -> SchemeResult:
    return fixed_decision(inst, OffloadDecision.all_local(inst.graph), "all-local", cfg)


def all_offload(inst: Instance, cfg: BisectionConfig = BisectionConfig()) -> SchemeResult:
    return fixed_decision(inst, OffloadDecision.all_edge(inst.graph), "all-offload", cfg)


def independent(inst: Instance) -> SchemeResult:
    """Each WD picks decision and allocation for its own chain alone."""
    graph = inst.graph
    bt = inst.weights.beta_t
    be = inst.weights.beta_e
    own_weights = {j: (float(bt[j]), float(bt[j])) for j in range(graph.num_wds)}
    base = OffloadDecision.all_local(graph)
    choice = []
    evals = 0
    for j, n in enumerate(graph.sizes):
        best, best_vec = math.inf, None
        for vec in one_climb_vectors(n):
            d = base.replace(j, vec)
            alloc = allocate_weighted(inst, d, own_weights)
            e, t = standalone_cost(inst, j, vec, alloc)
            evals += 1
            eta = be[j] * e + bt[j] * t
            if best_vec is None or eta < best:
                best, best_vec = eta, vec
        choice.append(best_vec)
    decision = OffloadDecision(tuple(choice))
    with np.errstate(invalid="ignore"):
        result = evaluate_schedule(inst, decision, allocate_weighted(inst, decision, own_weights))
    return SchemeResult("independent", decision, result, {}, evals)


def compare(inst: Instance, method: str = "oneclimb", cfg: BisectionConfig = BisectionConfig(),
            gcfg: GibbsConfig = GibbsConfig()) -> list:
    """Rows for the optimum and the three reference schemes, in ``SCHEMES`` order."""
    rep = optimize(inst, method, cfg, gcfg)
    opt = SchemeResult("optimal", rep.best_decision, rep.best_solution.result,
                       duals_of(inst, rep.best_solution), rep.evaluations)
    return [opt, all_offload(inst, cfg), all_local(inst, cfg), independent(inst)]
