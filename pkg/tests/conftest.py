import math
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from mecoffload.channel import PathLossModel, path_loss_gain  # noqa: E402
from mecoffload.model import (KBYTE_BITS, MCYCLES, CallGraph, Chain, ChannelGains,  # noqa: E402
                              Instance, OffloadDecision, SystemParams, Weights)

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

PL = PathLossModel()


def make_instance(workloads, outputs, k, beta_t, distances=None, gains=None, consumer=1,
                  params=None) -> Instance:
    """Instance from Mcycle workloads, KByte outputs and per-WD distances (m) or gains."""
    chains = tuple(Chain(np.asarray(w, float) * MCYCLES, np.asarray(o, float) * KBYTE_BITS)
                   for w, o in zip(workloads, outputs))
    graph = CallGraph(chains, consumer=consumer, joint_task=k)
    if gains is None:
        gains = [path_loss_gain(PL, d) for d in distances]
    return Instance(graph, params or SystemParams(), ChannelGains.uniform(graph, gains), Weights(beta_t))


def random_instance(rng, sizes, k=None, beta_t=None, dist=(5.0, 30.0), wl=(10.0, 200.0),
                    out=(500.0, 1700.0), consumer=1) -> Instance:
    workloads = [rng.uniform(*wl, n) for n in sizes]
    outputs = [rng.uniform(*out, n + 1) for n in sizes]
    if k is None:
        k = int(rng.integers(1, sizes[consumer] + 1))
    if beta_t is None:
        beta_t = rng.uniform(0.0, 0.9, len(sizes))
        beta_t[consumer] = rng.uniform(0.05, 0.9)
    distances = rng.uniform(*dist, len(sizes))
    return make_instance(workloads, outputs, k, beta_t, distances=distances, consumer=consumer)


def random_decision(rng, inst) -> OffloadDecision:
    return OffloadDecision(tuple(tuple(int(b) for b in rng.integers(0, 2, n)) for n in inst.graph.sizes))


@st.composite
def instances(draw, max_tasks=4, num_wds=2, min_k=1):
    seed = draw(st.integers(0, 2 ** 32 - 1))
    rng = np.random.default_rng(seed)
    sizes = [draw(st.integers(1, max_tasks)) for _ in range(num_wds)]
    sizes[1] = max(sizes[1], min_k)
    k = draw(st.integers(min_k, sizes[1]))
    return random_instance(rng, sizes, k=k)


@st.composite
def instance_and_decision(draw, max_tasks=4, num_wds=2, min_k=1):
    inst = draw(instances(max_tasks=max_tasks, num_wds=num_wds, min_k=min_k))
    vecs = tuple(tuple(draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))) for n in inst.graph.sizes)
    return inst, OffloadDecision(vecs)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300) if math.isfinite(b) else (0.0 if a == b else math.inf)


def pytest_terminal_summary(terminalreporter):
    """One line per acceptance criterion, in criterion order."""
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(lines):
        terminalreporter.write_line(lines[n])
