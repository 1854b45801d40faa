"""Search over binary offloading decisions.

Three searches share one objective, the optimal ETC for a fixed decision:

* ``brute_force`` visits all ``2**(sum n_j)`` decisions (test oracle);
* ``enumerate_one_climb`` visits only decisions where every WD moves to the
  edge at most once, which contains the optimum when ``f_edge > f_peak``;
* ``gibbs_sample`` runs an annealed Gibbs sampler whose proposals are
  single-bit flips that keep the one-climb shape.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .model import Instance, OffloadDecision
from .resource import BisectionConfig, ConvergenceError, InnerSolution, solve_inner

log = logging.getLogger(__name__)

BRUTE_FORCE_GUARD = 22


@dataclass(frozen=True)
class GibbsConfig:
    initial_temperature: float = 1.0
    cooling_rate: float = 0.95
    max_sweeps: int = 500
    convergence_window: int = 20
    rng_seed: int = 0

    def __post_init__(self):
        if not self.initial_temperature > 0:
            raise ValueError("initial_temperature must be positive")
        if not 0 < self.cooling_rate < 1:
            raise ValueError("cooling_rate must lie in (0, 1)")
        if self.max_sweeps < 1 or self.convergence_window < 1:
            raise ValueError("max_sweeps and convergence_window must be >= 1")


@dataclass
class SearchReport:
    best_decision: OffloadDecision
    best_eta: float
    evaluations: int
    trace: list = field(default_factory=list)
    best_solution: InnerSolution | None = None
    sweeps: int = 0
    converged_sweep: int = 0
    failures: list = field(default_factory=list)


# ------------------------------------------------------------ one-climb shape

def is_one_climb(a) -> bool:
    """At most one maximal block of ones (entry and exit are implicitly local)."""
    blocks = 0
    prev = 0
    for x in a:
        if x and not prev:
            blocks += 1
        prev = x
    return blocks <= 1


def one_climb_count(n: int) -> int:
    if n < 0:
        raise ValueError("chain length must be nonnegative")
    return n * (n + 1) // 2 + 1


def one_climb_vectors(n: int) -> list:
    """All one-climb decisions of an ``n``-task chain, all-local first."""
    out = [(0,) * n]
    for start in range(n):
        for stop in range(start + 1, n + 1):
            out.append(tuple(1 if start <= i < stop else 0 for i in range(n)))
    return out


def search_sizes(sizes) -> dict:
    """Number of inner solves for one-climb enumeration versus brute force."""
    oc = math.prod(one_climb_count(n) for n in sizes)
    bf = 2 ** sum(sizes)
    return {"one_climb": oc, "brute_force": bf, "ratio": oc / bf}


def gibbs_neighborhood(a) -> list:
    """``a`` itself plus every single-bit flip that stays one-climb."""
    a = tuple(int(x) for x in a)
    out = [a]
    for i in range(len(a)):
        b = a[:i] + (1 - a[i],) + a[i + 1:]
        if is_one_climb(b):
            out.append(b)
    return out


def boltzmann_probabilities(values, temperature: float) -> np.ndarray:
    """exp(-v / T) normalised; shifted by the minimum so low temperatures do not underflow."""
    v = np.asarray(values, dtype=float)
    w = np.exp(-(v - v.min()) / temperature)
    return w / w.sum()


# ---------------------------------------------------------------- searches

Solver = Callable[[Instance, OffloadDecision], InnerSolution]


def _default_solver(cfg: BisectionConfig) -> Solver:
    return lambda inst, d: solve_inner(inst, d, cfg)


def _exhaustive(inst: Instance, candidates, solver: Solver, count: int) -> SearchReport:
    best = None
    trace = []
    failures = []
    for idx, vecs in enumerate(candidates, 1):
        d = OffloadDecision(vecs)
        try:
            sol = solver(inst, d)
        except ConvergenceError as exc:
            log.warning("inner solve failed for %s: %s", vecs, exc)
            failures.append((d, str(exc)))
            continue
        if best is None or sol.objective < best.objective:
            best = sol
        trace.append((idx, best.objective))
    if best is None:
        raise ConvergenceError("every candidate decision failed")
    return SearchReport(best.decision, best.objective, count, trace, best, failures=failures)


def enumerate_one_climb(inst: Instance, cfg: BisectionConfig = BisectionConfig(),
                        *, dry_run: bool = False, solver: Solver | None = None) -> SearchReport | int:
    """Exhaustive search over per-WD one-climb decisions.

    With ``dry_run`` only the number of decisions that would be solved is returned.
    """
    sizes = inst.graph.sizes
    count = math.prod(one_climb_count(n) for n in sizes)
    if dry_run:
        return count
    cands = itertools.product(*(one_climb_vectors(n) for n in sizes))
    return _exhaustive(inst, cands, solver or _default_solver(cfg), count)


def brute_force(inst: Instance, cfg: BisectionConfig = BisectionConfig(), *,
                force: bool = False, guard: int = BRUTE_FORCE_GUARD,
                solver: Solver | None = None) -> SearchReport:
    sizes = inst.graph.sizes
    total = sum(sizes)
    if total > guard and not force:
        raise ValueError(f"brute force over 2^{total} decisions refused (guard {guard}); pass force=True")
    cands = itertools.product(*(list(itertools.product((0, 1), repeat=n)) for n in sizes))
    return _exhaustive(inst, cands, solver or _default_solver(cfg), 2 ** total)


def gibbs_sample(inst: Instance, gcfg: GibbsConfig = GibbsConfig(),
                 cfg: BisectionConfig = BisectionConfig(), *,
                 solver: Solver | None = None, initial: OffloadDecision | None = None) -> SearchReport:
    """Annealed Gibbs sampling over one-climb decisions.

    Each sweep resamples the decision of every WD in turn from the Boltzmann
    distribution over its one-climb neighbourhood (other WDs fixed), then
    cools the temperature geometrically.  Inner solves are memoised per
    decision.  The run stops once the current and the best objective have
    both been unchanged for ``convergence_window`` sweeps.
    """
    solver = solver or _default_solver(cfg)
    rng = np.random.default_rng(gcfg.rng_seed)
    cache: dict = {}

    def phi(d: OffloadDecision) -> float:
        if d not in cache:
            try:
                cache[d] = solver(inst, d)
            except ConvergenceError as exc:
                log.warning("inner solve failed for %s: %s", d.per_wd, exc)
                cache[d] = None
        sol = cache[d]
        return math.inf if sol is None else sol.objective

    state = initial or OffloadDecision.all_local(inst.graph)
    current = phi(state)
    best_d, best = state, current
    temp = gcfg.initial_temperature
    trace = []
    last_change = 0
    sweep = 0
    for sweep in range(1, gcfg.max_sweeps + 1):
        before = (current, best)
        for j in range(inst.graph.num_wds):
            cands = [state.replace(j, v) for v in gibbs_neighborhood(state[j])]
            vals = np.array([phi(d) for d in cands])
            for d, v in zip(cands, vals):
                if v < best:
                    best_d, best = d, v
            finite = np.isfinite(vals)
            probs = np.zeros(len(cands))
            if finite.any():
                probs[finite] = boltzmann_probabilities(vals[finite], temp)
            else:
                probs[0] = 1.0
            pick = rng.choice(len(cands), p=probs)
            state, current = cands[pick], vals[pick]
        temp *= gcfg.cooling_rate
        trace.append((sweep, best))
        if abs(current - before[0]) > 1e-9 or abs(best - before[1]) > 1e-9:
            last_change = sweep
        if sweep - last_change >= gcfg.convergence_window:
            break
    return SearchReport(best_d, best, len(cache), trace, cache[best_d],
                        sweeps=sweep, converged_sweep=last_change)
