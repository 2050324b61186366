"""
Reference agents: uniform-random play and the optimal policy
"""

from typing import Any, Dict, Optional

import numpy as np

from linucb_lab.models.linear_mdp import LinearMdp, ValueTables
from linucb_lab.services.agents.base import Agent
from linucb_lab.services.linmdp import optimal_values


class RandomAgent(Agent):
    """Uniform over actions; regret uses the uniform stochastic policy"""

    name = "random"

    def __init__(self, mdp: LinearMdp, rng: np.random.Generator):
        super().__init__(mdp)
        self.rng = rng
        self._policy = np.full((self.horizon, self.num_states, self.num_actions), 1.0 / self.num_actions)

    @classmethod
    def from_spec(cls, spec, mdp, K, rng, optimal=None) -> "RandomAgent":
        return cls(mdp, rng)

    def act(self, h: int, state: int) -> int:
        return int(self.rng.integers(self.num_actions))

    def policy_table(self) -> np.ndarray:
        return self._policy


class OracleAgent(Agent):
    """Greedy on Q*, computed from the true model"""

    name = "oracle"

    def __init__(self, mdp: LinearMdp, values: Optional[ValueTables] = None):
        super().__init__(mdp)
        self.values = values if values is not None else optimal_values(mdp)
        self._policy = self.values.greedy_policy()

    @classmethod
    def from_spec(cls, spec, mdp, K, rng, optimal=None) -> "OracleAgent":
        return cls(mdp, optimal)

    def act(self, h: int, state: int) -> int:
        return int(self._policy[h, state])

    def policy_table(self) -> np.ndarray:
        return self._policy

    def metadata(self) -> Dict[str, Any]:
        return {"name": self.name, "v_star_max": float(self.values.v[0].max())}
