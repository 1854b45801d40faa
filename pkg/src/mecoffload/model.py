"""Domain types and cost semantics of the dependent-task MEC system.

Every wireless device (WD) runs a sequential chain of tasks.  One WD is the
*consumer*: its task ``k`` (the joint task) needs the final output of every
other WD (the *producers*).  In the two-user system the producer is WD1
(index 0) and the consumer is WD2 (index 1).

Indexing convention used throughout the package: task ``i`` of a chain with
``n`` actual tasks runs over ``1..n``; task ``0`` is the auxiliary entry and
task ``n + 1`` the auxiliary exit, both always local.  Internally arrays are
"extended" to length ``n + 2`` and indexed directly by task number.

All quantities are SI: bits, cycles, Hz, seconds, joules, watts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

KBYTE_BITS = 8 * 1024
MCYCLES = 1e6


class ModelError(ValueError):
    """Raised for structurally invalid graphs, decisions or allocations."""


@dataclass(frozen=True)
class TaskSpec:
    workload_cycles: float
    input_bits: float
    output_bits: float


@dataclass(frozen=True)
class Chain:
    """Sequential task chain of one WD.

    ``workloads[i - 1]`` is the cycle count of actual task ``i`` and
    ``outputs[i]`` the output size of task ``i`` for ``i = 0..n`` (so
    ``outputs[0]`` is the raw input produced by the entry task and
    ``outputs[n]`` the final result).
    """

    workloads: np.ndarray
    outputs: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.workloads, dtype=float).reshape(-1)
        o = np.asarray(self.outputs, dtype=float).reshape(-1)
        if w.size < 1:
            raise ModelError("a chain needs at least one actual task")
        if o.size != w.size + 1:
            raise ModelError(
                f"outputs must have n + 1 = {w.size + 1} entries (task 0..n), got {o.size}"
            )
        if np.any(w < 0) or np.any(o < 0) or not np.all(np.isfinite(w)) or not np.all(np.isfinite(o)):
            raise ModelError("workloads and outputs must be finite and nonnegative")
        w.setflags(write=False)
        o.setflags(write=False)
        object.__setattr__(self, "workloads", w)
        object.__setattr__(self, "outputs", o)

    @property
    def n(self) -> int:
        return int(self.workloads.size)

    @classmethod
    def from_tasks(cls, tasks: Sequence[TaskSpec]) -> "Chain":
        """Build from tuples of *actual* tasks; the first task's input is the entry output."""
        tasks = list(tasks)
        if not tasks:
            raise ModelError("empty chain")
        outputs = [tasks[0].input_bits] + [t.output_bits for t in tasks]
        return cls(np.array([t.workload_cycles for t in tasks]), np.array(outputs))

    def ext_workloads(self) -> np.ndarray:
        return np.concatenate(([0.0], self.workloads, [0.0]))

    def ext_outputs(self) -> np.ndarray:
        return np.concatenate((self.outputs, [0.0]))


@dataclass(frozen=True)
class CallGraph:
    chains: tuple
    consumer: int = 1
    joint_task: int = 1

    def __post_init__(self):
        chains = tuple(self.chains)
        object.__setattr__(self, "chains", chains)
        if len(chains) < 2:
            raise ModelError("at least two WDs are required")
        if not 0 <= self.consumer < len(chains):
            raise ModelError(f"consumer index {self.consumer} out of range")
        n_c = chains[self.consumer].n
        if not 1 <= self.joint_task <= n_c:
            raise ModelError(f"joint task k={self.joint_task} must lie in 1..{n_c}")

    @property
    def num_wds(self) -> int:
        return len(self.chains)

    @property
    def producers(self) -> tuple:
        return tuple(j for j in range(self.num_wds) if j != self.consumer)

    @property
    def sizes(self) -> tuple:
        return tuple(c.n for c in self.chains)

    def tasks(self, j: int) -> list:
        """Task tuples of WD ``j`` including the entry and exit auxiliaries."""
        ch = self.chains[j]
        L = ch.ext_workloads()
        O = ch.ext_outputs()
        out = []
        for i in range(ch.n + 2):
            inp = O[i - 1] if i > 0 else 0.0
            if j == self.consumer and i == self.joint_task:
                inp += sum(self.chains[p].outputs[-1] for p in self.producers)
            out.append(TaskSpec(L[i], inp, O[i]))
        return out


@dataclass(frozen=True)
class SystemParams:
    """Physical constants; defaults are the reference simulation values."""

    bandwidth_hz: float = 2e6
    noise_power_w: float = 1e-10
    kappa: float = 1e-26
    p_peak_w: float = 0.1
    f_peak_hz: float = 1e8
    f_edge_hz: float = 1e10
    ap_power_w: float = 1.0
    edge_cores: int = 8

    def __post_init__(self):
        for name in ("bandwidth_hz", "noise_power_w", "kappa", "p_peak_w",
                     "f_peak_hz", "f_edge_hz", "ap_power_w", "edge_cores"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ModelError(f"{name} must be strictly positive and finite, got {v!r}")
        if self.f_edge_hz <= self.f_peak_hz:
            raise ModelError("f_edge_hz must exceed f_peak_hz")


@dataclass(frozen=True)
class ChannelGains:
    """Per-transfer power gains.

    ``uplink[j][i - 1]`` is h for the transfer that feeds task ``i`` of WD ``j``
    (``i = 1..n_j + 1``; the last entry serves the relay upload of the final
    output).  ``downlink`` is laid out the same way for g.
    """

    uplink: tuple
    downlink: tuple

    def __post_init__(self):
        up = tuple(np.asarray(u, dtype=float).reshape(-1) for u in self.uplink)
        dn = tuple(np.asarray(d, dtype=float).reshape(-1) for d in self.downlink)
        if len(up) != len(dn):
            raise ModelError("uplink and downlink must cover the same WDs")
        for arr in up + dn:
            if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
                raise ModelError("channel gains must be strictly positive and finite")
            arr.setflags(write=False)
        object.__setattr__(self, "uplink", up)
        object.__setattr__(self, "downlink", dn)

    @classmethod
    def uniform(cls, graph: CallGraph, per_wd_gain: Sequence[float]) -> "ChannelGains":
        """Same gain for every transfer of a WD (h = g), as under path loss."""
        up = tuple(np.full(c.n + 1, float(g)) for c, g in zip(graph.chains, per_wd_gain))
        return cls(up, up)

    def ext_uplink(self, j: int) -> np.ndarray:
        u = self.uplink[j]
        return np.concatenate(([u[0]], u))

    def ext_downlink(self, j: int) -> np.ndarray:
        d = self.downlink[j]
        return np.concatenate(([d[0]], d))


@dataclass(frozen=True)
class Weights:
    beta_t: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.beta_t, dtype=float).reshape(-1)
        if np.any(b < 0) or np.any(b >= 1):
            raise ModelError("time weights must lie in [0, 1)")
        b.setflags(write=False)
        object.__setattr__(self, "beta_t", b)

    @property
    def beta_e(self) -> np.ndarray:
        return 1.0 - self.beta_t


@dataclass(frozen=True)
class OffloadDecision:
    """Binary decision per WD over its actual tasks (1 = edge, 0 = local)."""

    per_wd: tuple

    def __post_init__(self):
        vecs = tuple(tuple(int(x) for x in v) for v in self.per_wd)
        for v in vecs:
            if any(x not in (0, 1) for x in v):
                raise ModelError(f"decision entries must be binary, got {v}")
        object.__setattr__(self, "per_wd", vecs)

    def __getitem__(self, j: int) -> tuple:
        return self.per_wd[j]

    def __len__(self) -> int:
        return len(self.per_wd)

    def ext(self, j: int) -> np.ndarray:
        return np.array((0,) + self.per_wd[j] + (0,), dtype=float)

    @classmethod
    def all_local(cls, graph: CallGraph) -> "OffloadDecision":
        return cls(tuple((0,) * n for n in graph.sizes))

    @classmethod
    def all_edge(cls, graph: CallGraph) -> "OffloadDecision":
        return cls(tuple((1,) * n for n in graph.sizes))

    def replace(self, j: int, vec) -> "OffloadDecision":
        vecs = list(self.per_wd)
        vecs[j] = tuple(vec)
        return OffloadDecision(tuple(vecs))


@dataclass(frozen=True)
class Instance:
    """Everything needed to evaluate a schedule: call graph, channel, weights, constants."""

    graph: CallGraph
    params: SystemParams
    gains: ChannelGains
    weights: Weights

    def __post_init__(self):
        J = self.graph.num_wds
        if len(self.gains.uplink) != J:
            raise ModelError(f"gains cover {len(self.gains.uplink)} WDs, graph has {J}")
        for j, ch in enumerate(self.graph.chains):
            if self.gains.uplink[j].size != ch.n + 1 or self.gains.downlink[j].size != ch.n + 1:
                raise ModelError(f"WD {j}: expected {ch.n + 1} gains per direction")
        if self.weights.beta_t.size != J:
            raise ModelError(f"expected {J} time weights, got {self.weights.beta_t.size}")
        if self.weights.beta_t[self.graph.consumer] <= 0:
            raise ModelError("the consumer's time weight must be positive (zero weight is degenerate)")
        if J > self.params.edge_cores:
            raise ModelError(f"{J} WDs exceed the {self.params.edge_cores} edge cores")


@dataclass
class Allocation:
    """Per-task time allocation, task-indexed (length n + 2 per WD).

    ``tau_local[j][i]`` is the local execution time of task ``i``;
    ``tau_up[j][i]`` the uplink time of the transfer feeding task ``i``
    (``i = n + 1`` is the relay upload of the final output).  Entries that
    are not used by the decision are NaN.
    """

    tau_local: list
    tau_up: list
    freq: list = field(default_factory=list)
    power: list = field(default_factory=list)


@dataclass
class EtcResult:
    energy: np.ndarray
    delay: np.ndarray
    wait: np.ndarray
    eta: np.ndarray
    eta_total: float

    @property
    def wait_max(self) -> float:
        return float(np.max(self.wait))


# ---------------------------------------------------------------- primitives

def rate_uplink(p, h, params: SystemParams):
    return params.bandwidth_hz * np.log2(1.0 + np.asarray(p) * h / params.noise_power_w)


def rate_function_f(x, params: SystemParams):
    """sigma^2 (2^(x/W) - 1): the p*h product needed to carry rate x."""
    with np.errstate(over="ignore"):
        return params.noise_power_w * np.expm1(np.asarray(x, dtype=float) / params.bandwidth_hz * math.log(2))


def rate_downlink(g, params: SystemParams):
    return params.bandwidth_hz * np.log2(1.0 + params.ap_power_w * np.asarray(g) / params.noise_power_w)


def min_local_time(workload, params: SystemParams):
    return np.asarray(workload, dtype=float) / params.f_peak_hz


def min_upload_time(bits, h, params: SystemParams):
    return np.asarray(bits, dtype=float) / rate_uplink(params.p_peak_w, h, params)


def local_cost(task: TaskSpec, tau_l: float, params: SystemParams) -> tuple:
    L = task.workload_cycles
    if L == 0:
        return tau_l, 0.0
    if tau_l < L / params.f_peak_hz * (1 - 1e-12):
        raise ModelError(f"tau_l={tau_l} is below the peak-frequency bound {L / params.f_peak_hz}")
    return tau_l, local_energy(L, tau_l, params)


def local_energy(workload, tau_l, params: SystemParams):
    L = np.asarray(workload, dtype=float)
    tau = np.asarray(tau_l, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        e = params.kappa * L**3 / tau**2
    return np.where(L == 0, 0.0, e)


def upload_energy(bits, tau_u, h, params: SystemParams):
    """(tau/h) f(bits/tau); the tau -> inf limit is sigma^2 bits ln2 / (W h)."""
    bits = np.asarray(bits, dtype=float)
    tau = np.asarray(tau_u, dtype=float)
    h = np.asarray(h, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        x = bits / tau
        e = tau / h * rate_function_f(x, params)
    limit = params.noise_power_w * bits * math.log(2) / (params.bandwidth_hz * h)
    e = np.where(np.isinf(tau), limit, e)
    return np.where(bits == 0, 0.0, e)


def upload_cost(bits: float, tau_u: float, h: float, params: SystemParams) -> tuple:
    if bits == 0:
        return 0.0, 0.0
    if tau_u < float(min_upload_time(bits, h, params)) * (1 - 1e-12):
        raise ModelError(f"tau_u={tau_u} violates the peak transmit power")
    return tau_u, float(upload_energy(bits, tau_u, h, params))


def edge_time(task: TaskSpec, params: SystemParams) -> float:
    return task.workload_cycles / params.f_edge_hz


def download_time(bits, g, params: SystemParams):
    bits = np.asarray(bits, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = bits / rate_downlink(g, params)
    return np.where(bits == 0, 0.0, t)


# ------------------------------------------------------------------ schedule

def _gated(gate: np.ndarray, values: np.ndarray, what: str) -> np.ndarray:
    # unused entries may hold NaN or inf; 0 * inf must not leak
    on = gate != 0
    if np.any(np.isnan(values[on])):
        raise ModelError(f"allocation is missing a {what} time required by the decision")
    return np.where(on, values, 0.0)


@dataclass
class _WdTimes:
    comp: np.ndarray      # per task: local or edge execution time
    tran: np.ndarray      # per task: transfer into task i
    energy: np.ndarray    # per task: local energy or upload energy into i


def _wd_terms(inst: Instance, j: int, a: np.ndarray, alloc: Allocation) -> _WdTimes:
    ch = inst.graph.chains[j]
    p = inst.params
    n = ch.n
    L = ch.ext_workloads()
    O = ch.ext_outputs()
    h = inst.gains.ext_uplink(j)
    g = inst.gains.ext_downlink(j)
    tl = np.asarray(alloc.tau_local[j], dtype=float)
    tu = np.asarray(alloc.tau_up[j], dtype=float)
    if tl.size != n + 2 or tu.size != n + 2:
        raise ModelError(f"WD {j}: allocation arrays must have length n + 2 = {n + 2}")

    prev = np.concatenate(([0.0], a[:-1]))
    local = 1.0 - a
    local[0] = local[-1] = 0.0
    up_gate = a * (1.0 - prev)
    down_gate = prev * (1.0 - a)

    bits_in = np.concatenate(([0.0], O[:-1]))   # O_{i-1}
    tau_c = L / p.f_edge_hz
    tau_d = download_time(bits_in, g, p)

    comp = _gated(local, tl, "local") + a * tau_c
    tran = _gated(up_gate, tu, "upload") + down_gate * tau_d
    e_loc = local_energy(L, np.where(local != 0, tl, 1.0), p)
    e_up = upload_energy(bits_in, np.where(up_gate != 0, tu, 1.0), h, p)
    energy = local * e_loc + up_gate * e_up
    return _WdTimes(comp, tran, energy)


def check_decision(graph: CallGraph, decision: OffloadDecision) -> None:
    if len(decision) != graph.num_wds:
        raise ModelError(f"decision covers {len(decision)} WDs, graph has {graph.num_wds}")
    for j, (vec, ch) in enumerate(zip(decision.per_wd, graph.chains)):
        if len(vec) != ch.n:
            raise ModelError(f"WD {j}: decision length {len(vec)} != chain length {ch.n}")


def relay_upload_time(inst: Instance, j: int, alloc: Allocation) -> float:
    t = float(alloc.tau_up[j][inst.graph.chains[j].n + 1])
    if math.isnan(t):
        raise ModelError(f"allocation is missing the relay upload time of WD {j}")
    return t


def relay_download_time(inst: Instance, j: int) -> float:
    """Time for the AP to forward producer j's final output to the consumer (keyed at task k)."""
    c, k = inst.graph.consumer, inst.graph.joint_task
    g = inst.gains.downlink[c][k - 1]
    return float(download_time(inst.graph.chains[j].outputs[-1], g, inst.params))


def producer_wait(inst: Instance, j: int, decision: OffloadDecision, alloc: Allocation) -> float:
    """Time until producer j's final output is available to the consumer's joint task."""
    graph = inst.graph
    if j == graph.consumer:
        raise ModelError("producer_wait is undefined for the consumer")
    n = graph.chains[j].n
    a = decision.ext(j)
    t = _wd_terms(inst, j, a, alloc)
    wait = float(np.sum(t.comp[1:n + 1]) + np.sum(t.tran[1:n + 1]))
    if a[n] == 0 and graph.chains[j].outputs[-1] > 0:
        wait += relay_upload_time(inst, j, alloc)
    if decision[graph.consumer][graph.joint_task - 1] == 0:
        wait += relay_download_time(inst, j)
    return wait


def evaluate_schedule(inst: Instance, decision: OffloadDecision, alloc: Allocation) -> EtcResult:
    """Energy, delay, waiting time and ETC of every WD for a decision and allocation."""
    graph = inst.graph
    check_decision(graph, decision)
    J = graph.num_wds
    c, k = graph.consumer, graph.joint_task
    bt = inst.weights.beta_t
    be = inst.weights.beta_e

    energy = np.zeros(J)
    delay = np.zeros(J)
    wait = np.zeros(J)

    for j in graph.producers:
        n = graph.chains[j].n
        a = decision.ext(j)
        t = _wd_terms(inst, j, a, alloc)
        delay[j] = np.sum(t.comp[1:n + 1]) + np.sum(t.tran[1:n + 2])
        energy[j] = np.sum(t.energy[1:n + 1])
        if a[n] == 0 and graph.chains[j].outputs[-1] > 0:
            h_relay = inst.gains.uplink[j][n]
            energy[j] += float(upload_energy(graph.chains[j].outputs[-1],
                                             relay_upload_time(inst, j, alloc), h_relay, inst.params))
        wait[j] = producer_wait(inst, j, decision, alloc)

    n = graph.chains[c].n
    a = decision.ext(c)
    t = _wd_terms(inst, c, a, alloc)
    wait[c] = np.sum(t.comp[1:k]) + np.sum(t.tran[1:k + 1])
    t_wait = float(np.max(wait))
    delay[c] = t_wait + np.sum(t.comp[k:n + 1]) + np.sum(t.tran[k + 1:n + 2])
    energy[c] = np.sum(t.energy[1:n + 1])

    eta = be * energy + bt * delay
    return EtcResult(energy, delay, wait, eta, float(np.sum(eta)))


def standalone_cost(inst: Instance, j: int, vec, alloc: Allocation) -> tuple:
    """(energy, delay) of WD ``j``'s own chain with the inter-user dependency dropped.

    The chain starts and ends at the WD; there is no relay transfer and no
    waiting for other devices.
    """
    n = inst.graph.chains[j].n
    if len(vec) != n:
        raise ModelError(f"WD {j}: decision length {len(vec)} != chain length {n}")
    a = np.array((0,) + tuple(vec) + (0,), dtype=float)
    t = _wd_terms(inst, j, a, alloc)
    delay = float(np.sum(t.comp[1:n + 1]) + np.sum(t.tran[1:n + 2]))
    return float(np.sum(t.energy[1:n + 1])), delay
