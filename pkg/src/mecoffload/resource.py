"""Optimal CPU frequencies and transmit powers for a fixed offloading decision.

Given the duals of the waiting-time constraints, every local task's frequency
and every upload's power follow in closed form (cube root and Lambert W).  The
dual of the two-user problem reduces to one scalar ``nu`` found by bisection
on the waiting-time gap ``psi(nu) = T1_wait - T2_wait``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import (
    Allocation,
    EtcResult,
    Instance,
    ModelError,
    OffloadDecision,
    check_decision,
    download_time,
    evaluate_schedule,
    rate_uplink,
    relay_download_time,
)

_INV_E = math.exp(-1.0)


class ConvergenceError(RuntimeError):
    """The dual search did not meet its tolerance within the iteration budget."""


# ------------------------------------------------------------------ Lambert W

def _w0_scalar(x: float) -> float:
    if x == 0.0:
        return 0.0
    if x <= -_INV_E:
        return -1.0
    if x < -0.32:
        # series around the branch point
        p = math.sqrt(2.0 * (math.e * x + 1.0))
        w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p ** 3
    elif x < 3.0:
        w = math.log1p(x) * (1.0 - math.log1p(math.log1p(x)) / (2.0 + math.log1p(x)))
    else:
        l1 = math.log(x)
        l2 = math.log(l1)
        w = l1 - l2 + l2 / l1
    for _ in range(64):
        ew = math.exp(w)
        r = w * ew - x
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        denom = ew * wp1 - (w + 2.0) * r / (2.0 * wp1)
        step = r / denom
        w -= step
        if abs(step) <= 1e-15 * (1.0 + abs(w)):
            break
    return w


def lambert_w0(x):
    """Principal branch of the Lambert W function (real argument >= -1/e).

    Halley iteration from a branch-point series, a ``log1p`` start, or the
    large-argument asymptotic, depending on the region.  Accepts scalars or
    arrays.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(arr)):
        raise ValueError("lambert_w0 of NaN")
    if np.any(arr < -_INV_E * (1.0 + 1e-15)):
        raise ValueError(f"lambert_w0 domain is x >= -1/e, got {arr.min()!r}")
    if arr.ndim == 0:
        return _w0_scalar(float(arr))
    out = np.empty_like(arr)
    flat = arr.reshape(-1)
    res = out.reshape(-1)
    for i, v in enumerate(flat):
        res[i] = _w0_scalar(float(v))
    return out


# -------------------------------------------------------------- closed forms

def optimal_frequency(weight: float, beta_e: float, params) -> float:
    """min(cbrt(weight / (2 kappa beta_e)), f_peak); ``weight`` is the effective time weight."""
    if weight <= 0.0:
        return 0.0
    return min(((weight / (2.0 * params.kappa * beta_e)) ** (1.0 / 3.0)), params.f_peak_hz)


def optimal_power(weight: float, beta_e: float, h: float, params) -> float:
    """Stationary uplink power clamped to the peak; independent of the payload size."""
    if weight <= 0.0:
        return 0.0
    s2 = params.noise_power_w
    b = h * weight / (beta_e * s2) - 1.0
    w = _w0_scalar(max(b * _INV_E, -_INV_E))
    # sigma^2/h * (B / W(B/e) - 1), written as expm1(1 + W) to stay exact near B = 0 and B = -1
    p = s2 / h * math.expm1(1.0 + w)
    return min(p, params.p_peak_w)


def power_threshold_gain(weight: float, beta_e: float, params) -> float:
    """Gain below which the optimal power sits at the peak (first branch of the power law)."""
    a = 1.0 + weight / (beta_e * params.p_peak_w)
    w = _w0_scalar(-a * math.exp(-a))
    return params.noise_power_w / params.p_peak_w * (a / -w - 1.0)


@dataclass(frozen=True)
class DualState:
    lam: float
    mu: float
    nu: float


@dataclass(frozen=True)
class BisectionConfig:
    epsilon: float = 1e-3
    max_iters: int = 100

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


# ----------------------------------------------------------- group weights

def _group_weights(inst: Instance, j: int, lam: float, mu: float) -> tuple:
    """(weight for tasks/uploads of the first part, weight for the second part).

    Producer: (beta_t + lam, lam) where the second is the relay upload.
    Consumer: (mu, beta_t) for the pre-joint and post-joint parts.
    """
    bt = float(inst.weights.beta_t[j])
    if j == inst.graph.consumer:
        return mu, bt
    return bt + lam, lam


def allocate(inst: Instance, decision: OffloadDecision, lams: dict, mu: float) -> Allocation:
    """Closed-form allocation for given producer duals ``lams`` (WD index -> lambda) and ``mu``."""
    weights = {j: _group_weights(inst, j, lams.get(j, 0.0), mu) for j in range(inst.graph.num_wds)}
    return allocate_weighted(inst, decision, weights)


def allocate_weighted(inst: Instance, decision: OffloadDecision, group_weights: dict) -> Allocation:
    """Closed-form allocation from explicit effective time weights per WD.

    ``group_weights[j] = (first, second)``: for a producer ``first`` drives its
    own tasks and uploads and ``second`` the relay upload of its final output;
    for the consumer ``first`` drives everything up to the joint task and
    ``second`` the rest.
    """
    graph = inst.graph
    params = inst.params
    c, k = graph.consumer, graph.joint_task
    tau_l, tau_u, freq, power = [], [], [], []
    for j, ch in enumerate(graph.chains):
        n = ch.n
        a = decision.ext(j)
        L = ch.ext_workloads()
        O = ch.ext_outputs()
        h = inst.gains.ext_uplink(j)
        be = float(inst.weights.beta_e[j])
        w_first, w_second = group_weights[j]
        tl = np.full(n + 2, np.nan)
        tu = np.full(n + 2, np.nan)
        fj = np.full(n + 2, np.nan)
        pj = np.full(n + 2, np.nan)
        for i in range(1, n + 2):
            if j == c:
                w = w_first if i < k else w_second
            else:
                w = w_first
            if i <= n and a[i] == 0:
                f = optimal_frequency(w, be, params)
                fj[i] = f
                tl[i] = L[i] / f if L[i] > 0 else 0.0
            if j == c:
                w = w_first if i <= k else w_second
            elif i == n + 1:
                w = w_second
            is_upload = a[i] == 1 and a[i - 1] == 0
            is_relay = j != c and i == n + 1 and a[n] == 0
            if is_upload or is_relay:
                bits = O[i - 1]
                if bits == 0:
                    pj[i] = 0.0
                    tu[i] = 0.0
                    continue
                p = optimal_power(w, be, h[i], params)
                pj[i] = p
                tu[i] = bits / float(rate_uplink(p, h[i], params)) if p > 0 else math.inf
        tau_l.append(tl)
        tau_u.append(tu)
        freq.append(fj)
        power.append(pj)
    return Allocation(tau_l, tau_u, freq, power)


# ------------------------------------------------------- waiting-time plan

@dataclass
class _GroupTimes:
    """Waiting-time contribution that scales with one effective weight."""

    local_cycles: float = 0.0
    up_bits: list = field(default_factory=list)
    up_gain: list = field(default_factory=list)

    def add_upload(self, bits: float, gain: float) -> None:
        # the optimal power does not depend on the payload, so equal gains share one term
        for idx, h in enumerate(self.up_gain):
            if h == gain:
                self.up_bits[idx] += bits
                return
        self.up_bits.append(bits)
        self.up_gain.append(gain)

    def time(self, inst: Instance, weight: float, beta_e: float) -> float:
        params = inst.params
        t = 0.0
        if self.local_cycles > 0:
            f = optimal_frequency(weight, beta_e, params)
            if f <= 0:
                return math.inf
            t += self.local_cycles / f
        for bits, h in zip(self.up_bits, self.up_gain):
            p = optimal_power(weight, beta_e, h, params)
            if p <= 0:
                return math.inf
            t += bits / (params.bandwidth_hz * math.log2(1.0 + p * h / params.noise_power_w))
        return t


@dataclass
class WaitPlan:
    """Waiting times as functions of the duals for one fixed decision."""

    inst: Instance
    fixed: dict
    own: dict
    relay: dict

    @classmethod
    def build(cls, inst: Instance, decision: OffloadDecision) -> "WaitPlan":
        check_decision(inst.graph, decision)
        graph = inst.graph
        params = inst.params
        c, k = graph.consumer, graph.joint_task
        a_k = decision[c][k - 1]
        fixed, own, relay = {}, {}, {}
        for j, ch in enumerate(graph.chains):
            n = ch.n
            last = n if j != c else k
            a = decision.ext(j)
            L = ch.ext_workloads()
            O = ch.ext_outputs()
            h = inst.gains.ext_uplink(j)
            g = inst.gains.ext_downlink(j)
            fx = 0.0
            grp = _GroupTimes()
            for i in range(1, last + 1):
                compute = i <= n if j != c else i < k
                if compute:
                    if a[i] == 1:
                        fx += L[i] / params.f_edge_hz
                    else:
                        grp.local_cycles += L[i]
                if a[i] == 1 and a[i - 1] == 0 and O[i - 1] > 0:
                    grp.add_upload(float(O[i - 1]), float(h[i]))
                elif a[i] == 0 and a[i - 1] == 1:
                    fx += float(download_time(O[i - 1], g[i], params))
            if j != c:
                rg = _GroupTimes()
                if a[n] == 0 and O[n] > 0:
                    rg.add_upload(float(O[n]), float(h[n + 1]))
                relay[j] = rg
                if a_k == 0:
                    fx += relay_download_time(inst, j)
            fixed[j] = fx
            own[j] = grp
        return cls(inst, fixed, own, relay)

    def producer_wait(self, j: int, lam: float) -> float:
        inst = self.inst
        bt = float(inst.weights.beta_t[j])
        be = float(inst.weights.beta_e[j])
        return (self.fixed[j] + self.own[j].time(inst, bt + lam, be)
                + self.relay[j].time(inst, lam, be))

    def consumer_wait(self, mu: float) -> float:
        inst = self.inst
        c = inst.graph.consumer
        be = float(inst.weights.beta_e[c])
        return self.fixed[c] + self.own[c].time(inst, mu, be)


def _single_producer(inst: Instance) -> int:
    prods = inst.graph.producers
    if len(prods) != 1:
        raise ModelError("the two-user solver needs exactly one producer; use multiuser.solve_inner_multi")
    return prods[0]


def psi(nu: float, inst: Instance, decision: OffloadDecision, plan: WaitPlan | None = None) -> float:
    """Waiting-time gap T1_wait - T2_wait at lambda = nu, mu = beta2_t - nu."""
    j = _single_producer(inst)
    b2 = float(inst.weights.beta_t[inst.graph.consumer])
    if not 0.0 <= nu <= b2:
        raise ValueError(f"nu must lie in [0, {b2}]")
    plan = plan or WaitPlan.build(inst, decision)
    t1 = plan.producer_wait(j, nu)
    t2 = plan.consumer_wait(b2 - nu)
    if math.isinf(t1) and math.isinf(t2):
        return math.nan
    return t1 - t2


@dataclass
class InnerSolution:
    decision: OffloadDecision
    allocation: Allocation
    dual: DualState
    result: EtcResult
    iterations: int
    gap: float

    @property
    def objective(self) -> float:
        return self.result.eta_total


def solve_inner(inst: Instance, decision: OffloadDecision,
                cfg: BisectionConfig = BisectionConfig()) -> InnerSolution:
    """Optimal allocation of the two-user problem under a fixed decision.

    Bisection on ``nu`` over ``[0, beta2_t)``.  If the gap is already
    nonpositive at ``nu = 0`` the waiting times decouple and ``nu = 0``.
    If the consumer's pre-joint waiting time does not depend on its dual at
    all (e.g. the joint task is its first task and runs locally), no root
    exists and the whole time weight moves to the producer (``nu = beta2_t``).
    """
    j = _single_producer(inst)
    b2 = float(inst.weights.beta_t[inst.graph.consumer])
    plan = WaitPlan.build(inst, decision)

    def gap(nu):
        return plan.producer_wait(j, nu) - plan.consumer_wait(b2 - nu)

    iters = 0
    g0 = gap(0.0)
    if g0 <= 0.0:
        nu = 0.0
        g = g0
    elif not math.isinf(plan.consumer_wait(0.0)) and gap(b2) >= 0.0:
        nu = b2
        g = gap(b2)
    else:
        lo, hi = 0.0, b2
        while True:
            iters += 1
            nu = 0.5 * (lo + hi)
            g = gap(nu)
            if g < 0.0:
                hi = nu
            else:
                lo = nu
            if abs(g) < cfg.epsilon:
                break
            if iters >= cfg.max_iters:
                raise ConvergenceError(
                    f"bisection stalled after {iters} iterations (|psi|={abs(g):.3g} s)")
    dual = DualState(lam=nu, mu=b2 - nu, nu=nu)
    alloc = allocate(inst, decision, {j: nu}, b2 - nu)
    res = evaluate_schedule(inst, decision, alloc)
    return InnerSolution(decision, alloc, dual, res, iters, g)
