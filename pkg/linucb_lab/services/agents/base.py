"""
Episodic agent contract shared by every learner and baseline
"""

from abc import ABC, abstractmethod
from typing import Any, Dict, Optional

import numpy as np

from linucb_lab.models.linear_mdp import LinearMdp, Trajectory, ValueTables
from linucb_lab.schemas.experiment import AgentSpec


class Agent(ABC):
    """
    Learner driven by the benchmark loop

    Per episode the harness calls start_episode(), reads policy_table() for exact
    evaluation, plays act(h, s) for H steps and hands the trajectory to end_episode().
    """

    name: str = "agent"

    def __init__(self, mdp: LinearMdp):
        # agents see features and rewards; transitions stay hidden behind sampling
        self.horizon = mdp.horizon
        self.num_states = mdp.num_states
        self.num_actions = mdp.num_actions
        self.dim = mdp.dim
        self.features = np.array(mdp.feature_matrix)
        self.rewards = np.array(mdp.rewards)
        self.episode = 0

    @classmethod
    @abstractmethod
    def from_spec(cls, spec: AgentSpec, mdp: LinearMdp, K: int, rng: np.random.Generator,
                  optimal: Optional[ValueTables] = None) -> "Agent":
        """Build the agent from its config entry; rng is the agent's own stream"""

    def start_episode(self) -> None:
        """Plan for the next episode"""
        self.episode += 1

    @abstractmethod
    def act(self, h: int, state: int) -> int:
        """Action at stage h in state"""

    def end_episode(self, trajectory: Trajectory) -> "Agent":
        """Absorb the finished episode"""
        return self

    @abstractmethod
    def policy_table(self) -> np.ndarray:
        """Current policy as (H, S) actions or (H, S, A) action distributions"""

    def episode_info(self) -> Dict[str, Any]:
        """Per-episode telemetry for the benchmark records"""
        return {"switched": False, "mean_sigma_hat": float("nan")}

    def metadata(self) -> Dict[str, Any]:
        return {"name": self.name}

    def __repr__(self):
        return f"<{self.__class__.__name__}(episode={self.episode})>"
