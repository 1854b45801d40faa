"""Scenario files and channel gains.

A scenario is a JSON document with a ``format_version`` key and the sections
``system``, ``weights``, ``channel``, ``chains`` and ``dependency`` (plus an
optional ``randomize``).  Physical units are part of the key names, e.g.
``bandwidth_hz`` or ``workloads_mcycles``.  See ``docs/scenario-schema.md``.
"""

from __future__ import annotations

import copy
import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .model import (KBYTE_BITS, MCYCLES, CallGraph, Chain, ChannelGains, Instance,
                    ModelError, SystemParams, Weights)

FORMAT_VERSION = 1
SPEED_OF_LIGHT = 3e8
BUILTIN = ("fig6", "multiuser")

SYSTEM_KEYS = {
    "bandwidth_hz": float,
    "noise_power_w": float,
    "kappa": float,
    "p_peak_w": float,
    "f_peak_hz": float,
    "f_edge_hz": float,
    "ap_power_w": float,
    "edge_cores": int,
}


class ScenarioError(ValueError):
    """Schema or validation failure; ``field`` is the dotted path of the offending key."""

    def __init__(self, field_path: str, message: str):
        super().__init__(f"{field_path}: {message}")
        self.field = field_path


# ----------------------------------------------------------------- path loss

@dataclass(frozen=True)
class PathLossModel:
    antenna_gain: float = 4.11
    carrier_hz: float = 915e6
    path_loss_exponent: float = 3.0
    distances_m: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "distances_m", tuple(float(d) for d in self.distances_m))
        if not (self.antenna_gain > 0 and self.carrier_hz > 0 and self.path_loss_exponent >= 0):
            raise ModelError("antenna gain and carrier must be positive, exponent nonnegative")
        for d in self.distances_m:
            if not (d > 0 and math.isfinite(d)):
                raise ModelError(f"distance must be positive, got {d!r}")

    def gain(self, d: float) -> float:
        return path_loss_gain(self, d)


def path_loss_gain(model: PathLossModel, d: float) -> float:
    """Free-space gain ``G * (c / (4 pi F_c d)) ** PL``, same for uplink and downlink."""
    if not d > 0:
        raise ValueError(f"distance must be positive, got {d!r}")
    base = SPEED_OF_LIGHT / (4.0 * math.pi * model.carrier_hz * d)
    return model.antenna_gain * base ** model.path_loss_exponent


# ------------------------------------------------------------------ scenario

@dataclass(frozen=True)
class ChainSpec:
    workloads_mcycles: tuple
    outputs_kbyte: tuple
    provenance: str = ""


@dataclass(frozen=True)
class Scenario:
    """Validated scenario in file units; ``instance()`` converts to SI."""

    params: SystemParams
    beta_t: tuple
    chains: tuple
    consumer: int
    joint_task: int
    path_loss: PathLossModel | None = None
    explicit_gains: dict | None = None
    randomize: dict = field(default_factory=dict)
    name: str = ""

    @property
    def num_wds(self) -> int:
        return len(self.chains)

    def graph(self, rng: np.random.Generator | None = None) -> CallGraph:
        lo_hi = self.randomize.get("workloads_mcycles")
        chains = []
        for spec in self.chains:
            w = np.asarray(spec.workloads_mcycles, dtype=float)
            if lo_hi is not None and rng is not None:
                w = rng.uniform(lo_hi[0], lo_hi[1], size=w.size)
            chains.append(Chain(w * MCYCLES, np.asarray(spec.outputs_kbyte, dtype=float) * KBYTE_BITS))
        return CallGraph(tuple(chains), self.consumer, self.joint_task)

    def distances(self, rng: np.random.Generator | None = None) -> tuple:
        if self.path_loss is None:
            raise ScenarioError("channel", "explicit gains have no distances")
        span = self.randomize.get("distances_m")
        if span is not None and rng is not None:
            return tuple(rng.uniform(span[0], span[1], size=self.num_wds))
        return self.path_loss.distances_m

    def instance(self, rng: np.random.Generator | None = None) -> Instance:
        """Materialise; with ``rng`` the ``randomize`` ranges are drawn (workloads first)."""
        graph = self.graph(rng)
        if self.path_loss is not None:
            gains = ChannelGains.uniform(graph, [path_loss_gain(self.path_loss, d)
                                                for d in self.distances(rng)])
        else:
            gains = ChannelGains(tuple(np.asarray(u, dtype=float) for u in self.explicit_gains["uplink"]),
                                 tuple(np.asarray(d, dtype=float) for d in self.explicit_gains["downlink"]))
        try:
            return Instance(graph, self.params, gains, Weights(np.asarray(self.beta_t)))
        except ModelError as exc:
            raise ScenarioError("scenario", str(exc)) from exc

    def seeded_instance(self, seed: int | None = None) -> Instance:
        """Instance drawn with the stored ``randomize.seed`` (or ``seed``); fixed if nothing is randomised."""
        if not self.randomize:
            return self.instance()
        s = self.randomize.get("seed", 0) if seed is None else seed
        return self.instance(np.random.default_rng(s))

    # variations used by sweeps

    def with_distance(self, j: int, d: float) -> "Scenario":
        if self.path_loss is None:
            raise ScenarioError("channel", "distance sweeps need a path_loss channel")
        ds = list(self.path_loss.distances_m)
        ds[j] = float(d)
        rnd = {k: v for k, v in self.randomize.items() if k != "distances_m"}
        return dataclasses.replace(self, path_loss=dataclasses.replace(self.path_loss, distances_m=tuple(ds)),
                                   randomize=rnd)

    def with_beta(self, j: int, value: float) -> "Scenario":
        b = list(self.beta_t)
        b[j] = float(value)
        return validate(dataclasses.replace(self, beta_t=tuple(b)))

    def with_joint_task(self, k: int) -> "Scenario":
        return validate(dataclasses.replace(self, joint_task=int(k)))

    def truncate(self, num_wds: int) -> "Scenario":
        """Keep the first ``num_wds`` devices (the consumer must be among them)."""
        if not self.consumer < num_wds <= self.num_wds:
            raise ScenarioError("chains", f"cannot keep {num_wds} of {self.num_wds} WDs")
        pl = self.path_loss
        if pl is not None:
            pl = dataclasses.replace(pl, distances_m=pl.distances_m[:num_wds])
        gains = self.explicit_gains
        if gains is not None:
            gains = {k: v[:num_wds] for k, v in gains.items()}
        return validate(dataclasses.replace(self, beta_t=self.beta_t[:num_wds], chains=self.chains[:num_wds],
                                            path_loss=pl, explicit_gains=gains))

    # serialisation

    def to_dict(self) -> dict:
        doc = {
            "format_version": FORMAT_VERSION,
            "name": self.name,
            "system": {k: getattr(self.params, k) for k in SYSTEM_KEYS},
            "weights": {"beta_t": list(self.beta_t)},
            "chains": [{"workloads_mcycles": list(c.workloads_mcycles),
                        "outputs_kbyte": list(c.outputs_kbyte),
                        **({"provenance": c.provenance} if c.provenance else {})} for c in self.chains],
            "dependency": {"consumer": self.consumer, "joint_task": self.joint_task},
        }
        if self.path_loss is not None:
            pl = self.path_loss
            doc["channel"] = {"model": "path_loss", "antenna_gain": pl.antenna_gain,
                              "carrier_hz": pl.carrier_hz, "path_loss_exponent": pl.path_loss_exponent,
                              "distances_m": list(pl.distances_m)}
        else:
            doc["channel"] = {"model": "explicit",
                              "uplink": [list(map(float, u)) for u in self.explicit_gains["uplink"]],
                              "downlink": [list(map(float, d)) for d in self.explicit_gains["downlink"]]}
        if self.randomize:
            doc["randomize"] = copy.deepcopy(self.randomize)
        return doc

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def save(self, path) -> None:
        Path(path).write_text(self.dumps() + "\n", encoding="utf-8")

    def digest(self) -> str:
        """Short content hash, stable across key order and whitespace."""
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:12]


# ----------------------------------------------------------------- parsing

def _require(doc: dict, key: str, where: str):
    if not isinstance(doc, dict):
        raise ScenarioError(where, "expected an object")
    if key not in doc:
        raise ScenarioError(f"{where}.{key}" if where else key, "missing required key")
    return doc[key]


def _number(value, where: str, *, kind=float, positive=True, allow_zero=False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(where, f"expected a number, got {value!r}")
    if kind is int and not float(value).is_integer():
        raise ScenarioError(where, f"expected an integer, got {value!r}")
    v = kind(value)
    if not math.isfinite(v):
        raise ScenarioError(where, "must be finite")
    if positive and (v < 0 or (v == 0 and not allow_zero)):
        raise ScenarioError(where, f"must be {'nonnegative' if allow_zero else 'positive'}, got {v!r}")
    return v


def _numbers(value, where: str, *, allow_zero=True, length=None) -> tuple:
    if not isinstance(value, list):
        raise ScenarioError(where, "expected a list of numbers")
    if length is not None and len(value) != length:
        raise ScenarioError(where, f"expected {length} entries, got {len(value)}")
    return tuple(_number(v, f"{where}[{i}]", allow_zero=allow_zero) for i, v in enumerate(value))


def _range(value, where: str) -> tuple:
    lo, hi = _numbers(value, where, allow_zero=False, length=2)
    if lo > hi:
        raise ScenarioError(where, "lower bound exceeds upper bound")
    return lo, hi


def parse_scenario(doc: dict) -> Scenario:
    """Validate a decoded document and build a ``Scenario``."""
    version = _require(doc, "format_version", "")
    if version != FORMAT_VERSION:
        raise ScenarioError("format_version", f"unsupported version {version!r} (expected {FORMAT_VERSION})")

    system = _require(doc, "system", "")
    kw = {}
    for key, kind in SYSTEM_KEYS.items():
        kw[key] = _number(_require(system, key, "system"), f"system.{key}", kind=kind)
    unknown = set(system) - set(SYSTEM_KEYS)
    if unknown:
        raise ScenarioError(f"system.{sorted(unknown)[0]}", "unknown key")
    try:
        params = SystemParams(**kw)
    except ModelError as exc:
        raise ScenarioError("system", str(exc)) from exc

    raw_chains = _require(doc, "chains", "")
    if not isinstance(raw_chains, list) or len(raw_chains) < 2:
        raise ScenarioError("chains", "expected a list of at least two chains")
    chains = []
    for j, ch in enumerate(raw_chains):
        where = f"chains[{j}]"
        w = _numbers(_require(ch, "workloads_mcycles", where), f"{where}.workloads_mcycles")
        if not w:
            raise ScenarioError(f"{where}.workloads_mcycles", "a chain needs at least one task")
        o = _numbers(_require(ch, "outputs_kbyte", where), f"{where}.outputs_kbyte", length=len(w) + 1)
        prov = ch.get("provenance", "")
        if not isinstance(prov, str):
            raise ScenarioError(f"{where}.provenance", "expected a string")
        chains.append(ChainSpec(w, o, prov))

    weights = _require(doc, "weights", "")
    beta = _numbers(_require(weights, "beta_t", "weights"), "weights.beta_t", length=len(chains))

    dep = _require(doc, "dependency", "")
    consumer = int(_number(_require(dep, "consumer", "dependency"), "dependency.consumer",
                           kind=int, allow_zero=True))
    k = int(_number(_require(dep, "joint_task", "dependency"), "dependency.joint_task", kind=int))

    chan = _require(doc, "channel", "")
    model = _require(chan, "model", "channel")
    path_loss = explicit = None
    if model == "path_loss":
        ds = _numbers(_require(chan, "distances_m", "channel"), "channel.distances_m",
                      allow_zero=False, length=len(chains))
        path_loss = PathLossModel(
            _number(chan.get("antenna_gain", 4.11), "channel.antenna_gain"),
            _number(chan.get("carrier_hz", 915e6), "channel.carrier_hz"),
            _number(chan.get("path_loss_exponent", 3.0), "channel.path_loss_exponent", allow_zero=True),
            ds)
    elif model == "explicit":
        explicit = {}
        for key in ("uplink", "downlink"):
            rows = _require(chan, key, "channel")
            if not isinstance(rows, list) or len(rows) != len(chains):
                raise ScenarioError(f"channel.{key}", f"expected {len(chains)} rows")
            explicit[key] = [
                _numbers(r, f"channel.{key}[{j}]", allow_zero=False, length=len(chains[j].workloads_mcycles) + 1)
                for j, r in enumerate(rows)]
    else:
        raise ScenarioError("channel.model", f"expected 'path_loss' or 'explicit', got {model!r}")

    randomize = {}
    if "randomize" in doc:
        rnd = doc["randomize"]
        if not isinstance(rnd, dict):
            raise ScenarioError("randomize", "expected an object")
        for key in rnd:
            if key == "seed":
                randomize["seed"] = int(_number(rnd["seed"], "randomize.seed", kind=int, allow_zero=True))
            elif key in ("workloads_mcycles", "distances_m"):
                randomize[key] = list(_range(rnd[key], f"randomize.{key}"))
            else:
                raise ScenarioError(f"randomize.{key}", "unknown key")
        if "distances_m" in randomize and path_loss is None:
            raise ScenarioError("randomize.distances_m", "needs a path_loss channel")

    name = doc.get("name", "")
    return validate(Scenario(params, beta, tuple(chains), consumer, k, path_loss, explicit, randomize,
                             str(name)))


def validate(sc: Scenario) -> Scenario:
    J = sc.num_wds
    if not 0 <= sc.consumer < J:
        raise ScenarioError("dependency.consumer", f"index {sc.consumer} out of range 0..{J - 1}")
    n_c = len(sc.chains[sc.consumer].workloads_mcycles)
    if not 1 <= sc.joint_task <= n_c:
        raise ScenarioError("dependency.joint_task", f"must lie in 1..{n_c}, got {sc.joint_task}")
    for j, b in enumerate(sc.beta_t):
        if not 0 <= b < 1:
            raise ScenarioError(f"weights.beta_t[{j}]", f"must lie in [0, 1), got {b!r}")
    if sc.beta_t[sc.consumer] == 0:
        raise ScenarioError(f"weights.beta_t[{sc.consumer}]",
                            "the consumer's time weight is zero, which makes the joint problem trivial "
                            "(its waiting time would carry no cost); use a positive value")
    if J > sc.params.edge_cores:
        raise ScenarioError("chains", f"{J} WDs exceed the {sc.params.edge_cores} edge cores (system.edge_cores)")
    return sc


def loads_scenario(text: str) -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError("document", f"not valid JSON: {exc}") from exc
    return parse_scenario(doc)


def load_scenario(path) -> Scenario:
    """Load a scenario file; a bare builtin name (``fig6``, ``multiuser``) loads the bundled copy."""
    p = Path(path)
    if not p.exists() and str(path) in BUILTIN:
        return builtin_scenario(str(path))
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError("document", f"cannot read {path}: {exc}") from exc
    return loads_scenario(text)


def builtin_scenario(name: str) -> Scenario:
    if name not in BUILTIN:
        raise ScenarioError("document", f"no builtin scenario {name!r}; choose from {BUILTIN}")
    text = resources.files("mecoffload").joinpath("scenarios").joinpath(f"{name}.scenario").read_text(encoding="utf-8")
    return loads_scenario(text)
