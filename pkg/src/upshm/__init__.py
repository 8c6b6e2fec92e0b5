"""Proactive overload prediction and task offloading for a single edge node."""
from .fuzzy import FuzzyConfig, default_config, overload_indicator
from .policy import Action, Decision, NodeState, PolicyParams, Reason, decide_baseline, decide_upshm
from .queueing import QueueParams, overload_probability, queue_length_pmf, traffic_intensity
from .sim import SimParams, SimReport, run_comparison, run_simulation, run_sweep
from .trend import kendall_score, kendall_tau, normalize_tau, trend_of_window
from .workload import Task, TaskTrace, WorkloadConfig, generate_trace, load_trace, save_trace

__version__ = "0.1.0"
