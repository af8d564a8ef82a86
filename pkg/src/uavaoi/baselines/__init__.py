"""Comparison policies: random (RSTD), max-AoI (NAMAS) and multi-agent DQN."""
from .heuristics import namas_policy, namas_velocity, rstd_policy, run_namas, run_rstd
from .madqn import DqnAgent, DqnConfig, ReplayBuffer, circle_layout, madqn_train, select_action

__all__ = [
    "DqnAgent", "DqnConfig", "ReplayBuffer", "circle_layout", "madqn_train", "namas_policy",
    "namas_velocity", "rstd_policy", "run_namas", "run_rstd", "select_action",
]
