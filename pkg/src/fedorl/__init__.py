"""Tabular federated offline RL: exact MDP tools, offline data, dual-regularized
local updates, federated rounds, bound checks and an experiment CLI."""
from .data import (EmpiricalModel, TransitionDataset, behavioral_policy, build_empirical_model,
                   empirical_mdp, generate_dataset, make_behavior_tier)
from .envs import Gridworld, random_mdp
from .federation import FederationConfig, RoundReport, aggregate, run_federation
from .local import LocalConfig, conservative_evaluate, drpo_local_round, improve_policy
from .mdp import Mdp, TabularPolicy, occupancy, policy_return, q_function, state_values

__version__ = "0.1.0"

__all__ = [
    "EmpiricalModel", "FederationConfig", "Gridworld", "LocalConfig", "Mdp", "RoundReport",
    "TabularPolicy", "TransitionDataset", "aggregate", "behavioral_policy",
    "build_empirical_model", "conservative_evaluate", "drpo_local_round", "empirical_mdp",
    "generate_dataset", "improve_policy", "make_behavior_tier", "occupancy", "policy_return",
    "q_function", "random_mdp", "run_federation", "state_values",
]
