"""Tabular TD learning with optimal-transport uncertainty scores for safer exploration."""

from .agents import AgentConfig, AgentKind, AgentState, run_episode
from .envs import make_env
from .harness import ExperimentConfig, run_experiment, summarize
from .ot_core import SinkhornConfig, exact_ot, sinkhorn, wasserstein_distance
from .uncertainty import UncertaintyEstimator, uncertainty_scores

__all__ = [
    "AgentConfig",
    "AgentKind",
    "AgentState",
    "ExperimentConfig",
    "SinkhornConfig",
    "UncertaintyEstimator",
    "exact_ot",
    "make_env",
    "run_episode",
    "run_experiment",
    "sinkhorn",
    "summarize",
    "uncertainty_scores",
    "wasserstein_distance",
]
