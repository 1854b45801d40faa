"""Joint offloading and resource allocation for wireless devices with inter-user task dependency."""

from .benchmarks import SchemeResult, all_local, all_offload, compare, independent, inner_solver, optimize
from .channel import (PathLossModel, Scenario, ScenarioError, builtin_scenario, load_scenario,
                      path_loss_gain)
from .model import (Allocation, CallGraph, Chain, ChannelGains, EtcResult, Instance, ModelError,
                    OffloadDecision, SystemParams, TaskSpec, Weights, evaluate_schedule)
from .multiuser import gibbs_sample_multi, solve_inner_multi
from .offload import (GibbsConfig, SearchReport, brute_force, enumerate_one_climb, gibbs_sample,
                      is_one_climb, one_climb_count)
from .resource import BisectionConfig, ConvergenceError, lambert_w0, psi, solve_inner

__version__ = "0.1.0"
