"""
LSVI-UCB+: variance-weighted ridge regression, Bernstein bonuses and
rare-switching optimistic value iteration

The learning state lives in PlusAgentState; the module-level functions are the
algorithm's steps and LsviPlusAgent wires them into the episodic agent contract.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Tuple

import numpy as np

from linucb_lab.models.linear_mdp import LinearMdp, Trajectory
from linucb_lab.services.agents.base import Agent
from linucb_lab.services.radii import RadiusConfig, RadiusSet, compute_radius_set
from linucb_lab.utils.linalg import (
    GramState,
    elliptical_potential,
    elliptical_potentials,
    gram_from_samples,
    gram_init,
    gram_rank1_update,
)

logger = logging.getLogger(__name__)

LOG_TWO = math.log(2.0)


@dataclass(eq=False)
class PlusAgentState:
    """Per-stage learning state; stage indices are 0-based"""
    horizon: int
    num_states: int
    num_actions: int
    dim: int
    features: np.ndarray          # (S·A, d)
    rewards: np.ndarray           # (H, S, A)
    radii: RadiusSet
    lam: float
    num_episodes: int = 1
    scale_variance_radii: bool = False
    gram_hat: List[GramState] = field(default_factory=list)
    gram_tilde: List[GramState] = field(default_factory=list)
    next_state_acc: np.ndarray = None   # (H, d, S): c_h(s') = Σ σ̂⁻² φ_i over s'_i = s'
    history: List[List[Tuple[int, int, int, float]]] = field(default_factory=list)
    q_hat: np.ndarray = None            # (H, S, A)
    v_hat: np.ndarray = None            # (H+1, S)
    v_hat_sq: np.ndarray = None         # (H+1, S)
    v_check: np.ndarray = None          # (H+1, S)
    w_hat: np.ndarray = None            # (H, d): μ̂_h V̂_{h+1}
    w_hat_sq: np.ndarray = None         # (H, d): μ̂_h V̂²_{h+1}
    w_check: np.ndarray = None          # (H, d): μ̂_h V̌_{h+1}
    k0: int = 0
    log_det_at_k0: np.ndarray = None
    episode_counter: int = 0
    switch_episodes: List[int] = field(default_factory=list)
    last_switched: bool = False
    last_sigma_hat: List[float] = field(default_factory=list)

    def feature(self, s: int, a: int) -> np.ndarray:
        return self.features[s * self.num_actions + a]


def init_plus_state(mdp: LinearMdp, radii: RadiusSet, num_episodes: int,
                    scale_variance_radii: bool = False) -> PlusAgentState:
    """Empty learning state: Λ̂ = Λ̃ = λI, no data, Q̂ = H"""
    H, S, A, d = mdp.horizon, mdp.num_states, mdp.num_actions, mdp.dim
    lam = radii.lam
    return PlusAgentState(
        horizon=H,
        num_states=S,
        num_actions=A,
        dim=d,
        features=np.array(mdp.feature_matrix),
        rewards=np.array(mdp.rewards),
        radii=radii,
        lam=lam,
        num_episodes=int(num_episodes),
        scale_variance_radii=scale_variance_radii,
        gram_hat=[gram_init(d, lam) for _ in range(H)],
        gram_tilde=[gram_init(d, lam) for _ in range(H)],
        next_state_acc=np.zeros((H, d, S)),
        history=[[] for _ in range(H)],
        q_hat=np.full((H, S, A), float(H)),
        v_hat=np.zeros((H + 1, S)),
        v_hat_sq=np.zeros((H + 1, S)),
        v_check=np.zeros((H + 1, S)),
        w_hat=np.zeros((H, d)),
        w_hat_sq=np.zeros((H, d)),
        w_check=np.zeros((H, d)),
        log_det_at_k0=np.full(H, d * math.log(lam)),
    )


def switch_condition(state: PlusAgentState) -> bool:
    """True when some stage's Gram determinant has doubled since the last update (or none happened yet)"""
    if state.k0 == 0:
        return True
    return any(g.log_det >= LOG_TWO + snap for g, snap in zip(state.gram_hat, state.log_det_at_k0))


def regression_weights(state: PlusAgentState, h: int, next_values) -> np.ndarray:
    """Weighted ridge solution Λ̂_h⁻¹ Σ_i σ̂_i⁻² φ_i V(s'_i), through the accumulators"""
    v = np.asarray(next_values, dtype=np.float64)
    return state.gram_hat[h].inverse @ (state.next_state_acc[h] @ v)


def replay_gram(state: PlusAgentState, h: int) -> GramState:
    """Rebuild Λ̂_h directly from the stored history"""
    xs = [state.feature(s, a) for s, a, _, _ in state.history[h]]
    ws = [sigma ** -2 for _, _, _, sigma in state.history[h]]
    return gram_from_samples(state.dim, state.lam, xs, ws)


def lsvi_plus_backward_pass(state: PlusAgentState) -> PlusAgentState:
    """
    Plan episode k

    Recomputes the optimistic Q̂ for every stage when the switch condition holds,
    and the pessimistic V̌ plus the regression vectors used by the variance
    estimator in every episode.
    """
    H, S, A = state.horizon, state.num_states, state.num_actions
    k = state.episode_counter + 1
    switched = switch_condition(state)
    bonus_hat = state.radii.bonus_hat
    bonus_check = state.radii.bonus_check

    for h in range(H - 1, -1, -1):
        gram = state.gram_hat[h]
        acc = state.next_state_acc[h]
        v_next = state.v_hat[h + 1]
        state.w_hat[h] = gram.inverse @ (acc @ v_next)
        state.w_hat_sq[h] = gram.inverse @ (acc @ state.v_hat_sq[h + 1])
        state.w_check[h] = gram.inverse @ (acc @ state.v_check[h + 1])
        norms = elliptical_potentials(gram, state.features)

        if switched:
            q_new = state.rewards[h] + (state.features @ state.w_hat[h] + bonus_hat * norms).reshape(S, A)
            q = np.minimum(np.minimum(q_new, state.q_hat[h]), float(H))
            state.q_hat[h] = np.maximum(q, 0.0)

        q_check = state.rewards[h] + (state.features @ state.w_check[h] - bonus_check * norms).reshape(S, A)
        state.v_check[h] = np.clip(q_check.max(axis=-1), 0.0, float(H))
        state.v_hat[h] = state.q_hat[h].max(axis=-1)
        state.v_hat_sq[h] = state.v_hat[h] ** 2

    if switched:
        state.k0 = k
        state.log_det_at_k0 = np.array([g.log_det for g in state.gram_hat])
        state.switch_episodes.append(k)
        logger.debug(f"Optimistic update at episode {k} (switch #{len(state.switch_episodes)})")

    state.episode_counter = k
    state.last_switched = switched
    return state


def lsvi_plus_act(state: PlusAgentState, h: int, s: int) -> int:
    """Greedy action on Q̂, ties broken by the lowest index"""
    return int(np.argmax(state.q_hat[h, s]))


def _variance_radii(state: PlusAgentState) -> Tuple[float, float, float]:
    r = state.radii
    scale = r.bonus_scale if state.scale_variance_radii else 1.0
    return scale * r.beta_bar, scale * r.beta_tilde, scale * r.beta_check


def estimate_variance(state: PlusAgentState, h: int, s: int, a: int) -> float:
    """Plug-in variance [P̂V̂²]_{[0,H²]} − ([P̂V̂]_{[0,H]})², clamped to [0, H²]"""
    H = float(state.horizon)
    phi = state.feature(s, a)
    first = min(max(float(state.w_hat[h] @ phi), 0.0), H)
    second = min(max(float(state.w_hat_sq[h] @ phi), 0.0), H * H)
    return min(max(second - first * first, 0.0), H * H)


def offset_U(state: PlusAgentState, h: int, s: int, a: int) -> float:
    """U = min{β̃‖φ‖ + 4H(|⟨μ̂(V̂ − V̌), φ⟩| + β̄‖φ‖ + β̌‖φ‖), 2H²} with ‖φ‖ = ‖φ‖_{Λ̂⁻¹}"""
    H = float(state.horizon)
    phi = state.feature(s, a)
    norm = elliptical_potential(state.gram_hat[h], phi)
    beta_bar, beta_tilde, beta_check = _variance_radii(state)
    gap = abs(float((state.w_hat[h] - state.w_check[h]) @ phi))
    value = beta_tilde * norm + 4.0 * H * (gap + beta_bar * norm + beta_check * norm)
    return min(value, 2.0 * H * H)


def gap_bound_E(state: PlusAgentState, h: int, s: int, a: int) -> float:
    """E = min{H·max(0, ⟨μ̂V̂, φ⟩ − ⟨μ̂V̌, φ⟩ + β̄‖φ‖ + β̌‖φ‖ + H√λ/K), H²}"""
    H = float(state.horizon)
    phi = state.feature(s, a)
    norm = elliptical_potential(state.gram_hat[h], phi)
    beta_bar, _, beta_check = _variance_radii(state)
    bracket = (float(state.w_hat[h] @ phi) - float(state.w_check[h] @ phi)
               + beta_bar * norm + beta_check * norm + H * math.sqrt(state.lam) / state.num_episodes)
    return min(H * max(bracket, 0.0), H * H)


def plus_weights(horizon: int, dim: int, variance: float, offset: float, gap: float,
                 tilde_norm: float) -> Tuple[float, float, float]:
    """
    Regression weights from the variance estimate and its corrections

    Args:
        horizon: H
        dim: d
        variance: Plug-in variance estimate
        offset: U
        gap: E
        tilde_norm: ‖φ‖_{Λ̃⁻¹} under the σ̃-weighted Gram matrix

    Returns:
        (σ̃, ς, σ̂)
    """
    H, d = float(horizon), float(dim)
    sigma_tilde = math.sqrt(max(H, H * d ** 3 * gap, variance + offset))
    if tilde_norm / sigma_tilde <= 1.0 / (H ** 3 * d ** 5):
        varsigma = math.sqrt(H)
    else:
        varsigma = H ** 2 * math.sqrt(d ** 5)
    sigma_hat = math.sqrt(max(varsigma ** 2, d ** 3 * H * gap, variance + offset))
    return sigma_tilde, varsigma, sigma_hat


def compute_weights(state: PlusAgentState, h: int, s: int, a: int) -> Tuple[float, float, float]:
    """(σ̃, ς, σ̂) at the visited (s, a) of stage h"""
    variance = estimate_variance(state, h, s, a)
    offset = offset_U(state, h, s, a)
    gap = gap_bound_E(state, h, s, a)
    tilde_norm = elliptical_potential(state.gram_tilde[h], state.feature(s, a))
    return plus_weights(state.horizon, state.dim, variance, offset, gap, tilde_norm)


def lsvi_plus_update(state: PlusAgentState, trajectory: Trajectory) -> PlusAgentState:
    """Weight every visited (s, a) and add it to both Gram matrices and the accumulators"""
    sigmas = []
    for h, step in enumerate(trajectory):
        phi = state.feature(step.state, step.action)
        sigma_tilde, _, sigma_hat = compute_weights(state, h, step.state, step.action)
        state.gram_tilde[h] = gram_rank1_update(state.gram_tilde[h], phi, sigma_tilde ** -2)
        state.gram_hat[h] = gram_rank1_update(state.gram_hat[h], phi, sigma_hat ** -2)
        state.next_state_acc[h][:, step.next_state] += phi / sigma_hat ** 2
        state.history[h].append((step.state, step.action, step.next_state, sigma_hat))
        sigmas.append(sigma_hat)
    state.last_sigma_hat = sigmas
    return state


class LsviPlusAgent(Agent):
    """Agent wrapper around PlusAgentState"""

    name = "plus"

    def __init__(self, mdp: LinearMdp, radii: RadiusSet, K: int, scale_variance_radii: bool = False):
        super().__init__(mdp)
        self.K = K
        self.radii = radii
        self.state = init_plus_state(mdp, radii, K, scale_variance_radii)
        logger.info(
            f"LSVI-UCB+ ready: β̂={radii.beta_hat:.4g}, β̌={radii.beta_check:.4g}, "
            f"bonus_scale={radii.bonus_scale:g}, λ={radii.lam:g}"
        )

    @classmethod
    def from_spec(cls, spec, mdp, K, rng, optimal=None) -> "LsviPlusAgent":
        radii = compute_radius_set(RadiusConfig(
            d=mdp.dim, H=mdp.horizon, K=K, W=mdp.w_bound, delta=spec.delta,
            lam=spec.lam, bonus_scale=spec.bonus_scale,
        ))
        return cls(mdp, radii, K, scale_variance_radii=spec.scale_variance_radii)

    def start_episode(self) -> None:
        super().start_episode()
        lsvi_plus_backward_pass(self.state)

    def act(self, h: int, state: int) -> int:
        return lsvi_plus_act(self.state, h, state)

    def end_episode(self, trajectory: Trajectory) -> "LsviPlusAgent":
        lsvi_plus_update(self.state, trajectory)
        return self

    def policy_table(self) -> np.ndarray:
        return np.argmax(self.state.q_hat, axis=-1)

    def regression_weights(self, h: int, next_values) -> np.ndarray:
        return regression_weights(self.state, h, next_values)

    def replay_gram(self, h: int) -> GramState:
        return replay_gram(self.state, h)

    @property
    def switch_count(self) -> int:
        return len(self.state.switch_episodes)

    def episode_info(self) -> Dict[str, Any]:
        sigmas = self.state.last_sigma_hat
        return {
            "switched": self.state.last_switched,
            "mean_sigma_hat": float(np.mean(sigmas)) if sigmas else float("nan"),
        }

    def metadata(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "bonus_scale": self.radii.bonus_scale,
            "lambda": self.radii.lam,
            "delta": self.radii.delta,
            "scale_variance_radii": self.state.scale_variance_radii,
            "radii": self.radii.to_dict(),
            "switch_count": self.switch_count,
        }
