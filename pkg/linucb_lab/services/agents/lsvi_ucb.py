"""
LSVI-UCB: unweighted ridge regression with a Hoeffding-style bonus
"""

import logging
from typing import Any, Dict, List, Optional

import numpy as np

from linucb_lab.models.linear_mdp import LinearMdp, Trajectory
from linucb_lab.services.agents.base import Agent
from linucb_lab.services.radii import lsvi_ucb_radius
from linucb_lab.utils.linalg import GramState, elliptical_potentials, gram_init, gram_rank1_update, gram_solve

logger = logging.getLogger(__name__)


class LsviUcbAgent(Agent):
    """
    Least-squares value iteration with an upper-confidence bonus

    Q_h(s, a) = r_h(s, a) + ⟨ω_h, φ(s, a)⟩ + β‖φ(s, a)‖_{Λ_h⁻¹}, clamped to [0, H],
    with ω_h = Λ_h⁻¹ Σ_i φ_i V_{h+1}(s'_i) recomputed every episode.
    """

    name = "ucb"

    def __init__(self, mdp: LinearMdp, K: int, delta: float = 0.01, lam: float = 1.0,
                 bonus_scale: float = 1.0, beta: Optional[float] = None):
        super().__init__(mdp)
        self.K = K
        self.delta = delta
        self.lam = lam
        self.bonus_scale = bonus_scale
        self.beta = beta if beta is not None else lsvi_ucb_radius(self.dim, self.horizon, K, lam, delta)
        self.bonus = bonus_scale * self.beta

        H, S, A, d = self.horizon, self.num_states, self.num_actions, self.dim
        self.grams: List[GramState] = [gram_init(d, lam) for _ in range(H)]
        self.next_state_acc = np.zeros((H, d, S))
        self.q = np.full((H, S, A), float(H))
        self.weights = np.zeros((H, d))
        logger.info(f"LSVI-UCB ready: β={self.beta:.4g}, bonus_scale={bonus_scale:g}, λ={lam:g}")

    @classmethod
    def from_spec(cls, spec, mdp, K, rng, optimal=None) -> "LsviUcbAgent":
        return cls(mdp, K, delta=spec.delta, lam=spec.lam or 1.0, bonus_scale=spec.bonus_scale)

    def regression_weights(self, h: int, next_values) -> np.ndarray:
        """ω = Λ_h⁻¹ Σ_i φ_i V(s'_i), evaluated through the next-state accumulators"""
        return gram_solve(self.grams[h], self.next_state_acc[h] @ np.asarray(next_values, dtype=np.float64))

    def start_episode(self) -> None:
        super().start_episode()
        H, S, A = self.horizon, self.num_states, self.num_actions
        v_next = np.zeros(S)
        for h in range(H - 1, -1, -1):
            w = self.regression_weights(h, v_next)
            bonus = self.bonus * elliptical_potentials(self.grams[h], self.features)
            q = self.rewards[h] + (self.features @ w + bonus).reshape(S, A)
            self.q[h] = np.clip(q, 0.0, H)
            self.weights[h] = w
            v_next = self.q[h].max(axis=-1)

    def act(self, h: int, state: int) -> int:
        return int(np.argmax(self.q[h, state]))

    def end_episode(self, trajectory: Trajectory) -> "LsviUcbAgent":
        A = self.num_actions
        for h, step in enumerate(trajectory):
            phi = self.features[step.state * A + step.action]
            self.grams[h] = gram_rank1_update(self.grams[h], phi, 1.0)
            self.next_state_acc[h][:, step.next_state] += phi
        return self

    def policy_table(self) -> np.ndarray:
        return np.argmax(self.q, axis=-1)

    def metadata(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "bonus_scale": self.bonus_scale,
            "beta": self.beta,
            "lambda": self.lam,
            "delta": self.delta,
        }
