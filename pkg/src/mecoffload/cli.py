"""Command-line harness: single solves, scheme comparisons, sweeps and Gibbs traces.

Every command reads a scenario file (or a builtin name such as ``fig6``) and
is deterministic given the file and ``--seed``.  Tables are CSV with a fixed
column set; per-WD quantities are ``;``-joined lists in WD order.

Exit codes: 0 success, 2 invalid scenario or arguments, 3 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .benchmarks import METHODS, SchemeResult, compare, duals_of, inner_solver, optimize
from .channel import Scenario, ScenarioError, load_scenario
from .model import ModelError
from .offload import GibbsConfig, gibbs_sample
from .resource import BisectionConfig, ConvergenceError

EXIT_OK, EXIT_SCHEMA, EXIT_SOLVER = 0, 2, 3

COLUMNS = ("scenario_hash", "seed", "command", "scheme", "method", "variable", "value",
           "repetition", "eta_total", "energy_j", "delay_j", "wait_j", "eta_j",
           "decision", "lambda", "mu", "evaluations", "error")

SWEEP_VARIABLES = ("d1", "d2", "beta1_t", "beta2_t", "k", "J", "alpha")

log = logging.getLogger("mecoffload")


def fmt(x) -> str:
    """Nine significant digits, locale independent."""
    return format(float(x), ".9g")


def _join(values) -> str:
    return ";".join(fmt(v) for v in values)


def _decision_str(decision) -> str:
    return "|".join("".join(str(b) for b in vec) for vec in decision.per_wd)


def scheme_row(res: SchemeResult, **extra) -> dict:
    r = res.result
    lam = res.duals.get("lambda", {})
    row = {
        "scheme": res.scheme,
        "eta_total": fmt(r.eta_total),
        "energy_j": _join(r.energy),
        "delay_j": _join(r.delay),
        "wait_j": _join(r.wait),
        "eta_j": _join(r.eta),
        "decision": _decision_str(res.decision),
        "lambda": ";".join(f"{j}:{fmt(v)}" for j, v in sorted(lam.items())),
        "mu": fmt(res.duals["mu"]) if "mu" in res.duals else "",
        "evaluations": str(res.evaluations),
        "error": "",
    }
    row.update({k: str(v) for k, v in extra.items()})
    return row


def write_csv(rows, stream) -> None:
    w = csv.DictWriter(stream, fieldnames=COLUMNS, lineterminator="\n", restval="")
    w.writeheader()
    for r in rows:
        w.writerow(r)


# ------------------------------------------------------------------ helpers

def _instance(sc: Scenario, seed: int | None):
    if not sc.randomize:
        return sc.instance()
    s = sc.randomize.get("seed", 0) if seed is None else seed
    return sc.instance(np.random.default_rng(s))


def _configs(args, alpha: float | None = None):
    cfg = BisectionConfig(epsilon=args.epsilon)
    gcfg = GibbsConfig(cooling_rate=alpha if alpha is not None else args.alpha,
                       rng_seed=args.seed if args.seed is not None else 0)
    return cfg, gcfg


def _emit(args, rows) -> None:
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            write_csv(rows, fh)
    if args.format == "csv" or not args.out:
        buf = io.StringIO()
        write_csv(rows, buf)
        sys.stdout.write(buf.getvalue())


def _common(sc: Scenario, args, command: str) -> dict:
    return {"scenario_hash": sc.digest(), "seed": "" if args.seed is None else args.seed, "command": command}


# ----------------------------------------------------------------- commands

def cmd_validate(args) -> int:
    sc = load_scenario(args.scenario)
    print(f"ok {sc.name or args.scenario} hash={sc.digest()} wds={sc.num_wds} "
          f"tasks={[len(c.workloads_mcycles) for c in sc.chains]} k={sc.joint_task}")
    return EXIT_OK


def cmd_solve(args) -> int:
    sc = load_scenario(args.scenario)
    inst = _instance(sc, args.seed)
    cfg, gcfg = _configs(args)
    rep = optimize(inst, args.method, cfg, gcfg)
    sol = rep.best_solution
    res = SchemeResult("optimal", rep.best_decision, sol.result, duals_of(inst, sol), rep.evaluations)
    row = scheme_row(res, method=args.method, **_common(sc, args, "solve"))
    if args.format != "csv":
        r = sol.result
        print(f"scenario {sc.name or args.scenario} ({sc.digest()})  method={args.method}")
        for j, vec in enumerate(rep.best_decision.per_wd):
            role = "consumer" if j == inst.graph.consumer else "producer"
            print(f"  WD{j + 1} ({role}) a={''.join(map(str, vec))}  E={fmt(r.energy[j])} J  "
                  f"T={fmt(r.delay[j])} s  wait={fmt(r.wait[j])} s  eta={fmt(r.eta[j])}")
        print(f"  duals lambda={row['lambda']} mu={row['mu']}")
        print(f"  eta_total={fmt(r.eta_total)}  evaluations={rep.evaluations}")
    if args.out or args.format == "csv":
        _emit(args, [row])
    return EXIT_OK


def cmd_benchmarks(args) -> int:
    sc = load_scenario(args.scenario)
    inst = _instance(sc, args.seed)
    cfg, gcfg = _configs(args)
    rows = [scheme_row(r, method=args.method, **_common(sc, args, "benchmarks"))
            for r in compare(inst, args.method, cfg, gcfg)]
    _emit(args, rows)
    return EXIT_OK


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    grid: tuple
    repetitions: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ValueError(f"unknown sweep variable {self.variable!r}; expected one of {SWEEP_VARIABLES}")
        if not self.grid:
            raise ValueError("sweep grid must not be empty")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")


def apply_variable(sc: Scenario, variable: str, value: float) -> Scenario:
    c = sc.consumer
    producer = 0 if c != 0 else 1
    if variable == "d1":
        return sc.with_distance(producer, value)
    if variable == "d2":
        return sc.with_distance(c, value)
    if variable == "beta1_t":
        return sc.with_beta(producer, value)
    if variable == "beta2_t":
        return sc.with_beta(c, value)
    if variable == "k":
        return sc.with_joint_task(int(value))
    if variable == "J":
        return sc.truncate(int(value))
    if variable == "alpha":
        return sc
    raise ValueError(f"unknown sweep variable {variable!r}")


def _sweep_point(task) -> list:
    """One grid point and repetition; runs in a worker process."""
    sc, spec, idx, value, rep, method, epsilon = task
    common = {"scenario_hash": sc.digest(), "seed": spec.seed, "command": "sweep",
              "variable": spec.variable, "value": fmt(value), "repetition": rep, "method": method}
    # draws depend on (seed, repetition) only, so every grid point sees the same random instances
    rng = np.random.default_rng([spec.seed, rep])
    try:
        point = apply_variable(sc, spec.variable, value)
        inst = point.instance(rng) if point.randomize else point.instance()
        cfg = BisectionConfig(epsilon=epsilon)
        alpha = float(value) if spec.variable == "alpha" else GibbsConfig().cooling_rate
        gcfg = GibbsConfig(cooling_rate=alpha, rng_seed=spec.seed + rep)
        return [scheme_row(r, **common) for r in compare(inst, method, cfg, gcfg)]
    except (ConvergenceError, ModelError, ScenarioError, ValueError) as exc:
        return [{**{k: str(v) for k, v in common.items()}, "error": f"{type(exc).__name__}: {exc}"}]


def run_sweep(sc: Scenario, spec: SweepSpec, method: str = "oneclimb", epsilon: float = 1e-3,
              workers: int = 1) -> list:
    """Rows ordered by (grid point, repetition) whatever the completion order."""
    tasks = [(sc, spec, i, v, r, method, epsilon)
             for i, v in enumerate(spec.grid) for r in range(spec.repetitions)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_sweep_point, tasks))
    else:
        chunks = [_sweep_point(t) for t in tasks]
    return [row for chunk in chunks for row in chunk]


def cmd_sweep(args) -> int:
    sc = load_scenario(args.scenario)
    method = "gibbs" if args.variable == "alpha" else args.method
    spec = SweepSpec(args.variable, tuple(args.grid), args.repetitions,
                     args.seed if args.seed is not None else 0)
    rows = run_sweep(sc, spec, method, args.epsilon, args.workers)
    _emit(args, rows)
    failed = [r for r in rows if r.get("error")]
    for r in failed:
        log.error("sweep point %s=%s rep %s failed: %s", r["variable"], r["value"], r["repetition"], r["error"])
    return EXIT_SOLVER if failed else EXIT_OK


def gibbs_trace_rows(sc: Scenario, alphas, seed: int, epsilon: float, inst=None) -> list:
    inst = inst if inst is not None else _instance(sc, seed)
    cfg = BisectionConfig(epsilon=epsilon)
    rows = []
    for alpha in alphas:
        gcfg = GibbsConfig(cooling_rate=alpha, rng_seed=seed)
        rep = gibbs_sample(inst, gcfg, cfg, solver=inner_solver(inst, cfg))
        for sweep, best in rep.trace:
            rows.append({"alpha": fmt(alpha), "iteration": sweep, "eta": fmt(best),
                         "converged_sweep": rep.converged_sweep,
                         "scenario_hash": sc.digest(), "seed": seed})
    return rows


TRACE_COLUMNS = ("scenario_hash", "seed", "alpha", "iteration", "eta", "converged_sweep")


def cmd_gibbs_trace(args) -> int:
    sc = load_scenario(args.scenario)
    seed = args.seed if args.seed is not None else 0
    rows = gibbs_trace_rows(sc, args.alphas, seed, args.epsilon)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=TRACE_COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            fh.write(buf.getvalue())
    if args.format == "csv" or not args.out:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


# --------------------------------------------------------------------- main

def _floats(text: str) -> list:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", required=True, help="scenario file, or a builtin name (fig6, multiuser)")
    common.add_argument("--method", choices=METHODS, default="oneclimb", help="decision search")
    common.add_argument("--seed", type=int, default=None, help="seed for Gibbs and randomised scenarios")
    common.add_argument("--epsilon", type=float, default=1e-3, help="bisection tolerance on the wait gap (s)")
    common.add_argument("--alpha", type=float, default=GibbsConfig().cooling_rate, help="Gibbs cooling rate")
    common.add_argument("--out", default=None, help="write CSV here")
    common.add_argument("--format", choices=("text", "csv"), default="text",
                        help="stdout format (tables are always CSV)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="mecoffload", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="check a scenario file").set_defaults(func=cmd_validate)
    sub.add_parser("solve", parents=[common], help="optimal decision and allocation").set_defaults(func=cmd_solve)
    sub.add_parser("benchmarks", parents=[common],
                   help="optimum against all-offload, all-local and independent").set_defaults(func=cmd_benchmarks)
    sw = sub.add_parser("sweep", parents=[common], help="benchmarks over a parameter grid")
    sw.add_argument("--variable", required=True, choices=SWEEP_VARIABLES)
    sw.add_argument("--grid", required=True, type=_floats, help="comma-separated values")
    sw.add_argument("--repetitions", type=int, default=1)
    sw.add_argument("--workers", type=int, default=1)
    sw.set_defaults(func=cmd_sweep)
    gt = sub.add_parser("gibbs-trace", parents=[common], help="best-so-far ETC per sweep for several cooling rates")
    gt.add_argument("--alphas", type=_floats, default=[0.5, 0.8, 0.95])
    gt.set_defaults(func=cmd_gibbs_trace)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_SCHEMA if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "sweep":
            SweepSpec(args.variable, tuple(args.grid), args.repetitions)
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: invalid scenario: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except ConvergenceError as exc:
        print(f"error: solver did not converge: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ModelError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())
