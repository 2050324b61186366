"""
Finite-state linear MDP model and the value/trajectory types built on it
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Dict, List, Literal, NamedTuple, Optional, Tuple

import numpy as np

from linucb_lab.core.exceptions import InvalidArgumentError, ModelInvalidError
from linucb_lab.models.base import RecordMixin

# Transition rows: entries may dip below zero by NEG_SLACK, sums may miss 1 by SUM_TOL
NEG_SLACK = 1e-12
SUM_TOL = 1e-9

InitialStateRule = Literal["fixed", "uniform"]


def _readonly(a, shape_name: str, ndim: int) -> np.ndarray:
    arr = np.array(a, dtype=np.float64, copy=True)
    if arr.ndim != ndim:
        raise InvalidArgumentError(f"{shape_name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{shape_name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LinearMdp:
    """
    Episodic linear MDP over finite states and actions

    phi has shape (S, A, d), mu has shape (H, d, S) with columns μ_h(s'),
    theta has shape (H, d). Stages are 0-based: h = 0 .. H-1.

    States listed in absorbing_states loop to themselves under every action,
    overriding their linear transition rows. Rewards stay linear.
    """
    horizon: int
    phi: np.ndarray
    mu: np.ndarray
    theta: np.ndarray
    w_bound: float
    initial_state_rule: InitialStateRule = "fixed"
    initial_state: int = 0
    meta: Dict[str, Any] = field(default_factory=dict)
    absorbing_states: Tuple[int, ...] = ()

    def __post_init__(self):
        phi = _readonly(self.phi, "phi", 3)
        mu = _readonly(self.mu, "mu", 3)
        theta = _readonly(self.theta, "theta", 2)
        S, A, d = phi.shape
        H = int(self.horizon)

        if H < 1 or S < 1 or A < 1 or d < 1:
            raise InvalidArgumentError(f"Model sizes must be positive (H={H}, S={S}, A={A}, d={d})")
        if mu.shape != (H, d, S):
            raise InvalidArgumentError(f"mu must have shape {(H, d, S)}, got {mu.shape}")
        if theta.shape != (H, d):
            raise InvalidArgumentError(f"theta must have shape {(H, d)}, got {theta.shape}")
        if self.initial_state_rule not in ("fixed", "uniform"):
            raise InvalidArgumentError(f"Unknown initial state rule: {self.initial_state_rule}")
        if not 0 <= int(self.initial_state) < S:
            raise InvalidArgumentError(f"Initial state {self.initial_state} outside [0, {S})")
        absorbing = tuple(sorted({int(s) for s in self.absorbing_states}))
        if any(not 0 <= s < S for s in absorbing):
            raise InvalidArgumentError(f"Absorbing states {absorbing} outside [0, {S})")

        object.__setattr__(self, "absorbing_states", absorbing)
        object.__setattr__(self, "horizon", H)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "w_bound", float(self.w_bound))
        object.__setattr__(self, "initial_state", int(self.initial_state))

    @property
    def num_states(self) -> int:
        return self.phi.shape[0]

    @property
    def num_actions(self) -> int:
        return self.phi.shape[1]

    @property
    def dim(self) -> int:
        return self.phi.shape[2]

    @cached_property
    def feature_matrix(self) -> np.ndarray:
        """φ table flattened to shape (S·A, d), row index s·A + a"""
        table = self.phi.reshape(self.num_states * self.num_actions, self.dim)
        table.setflags(write=False)
        return table

    @cached_property
    def rewards(self) -> np.ndarray:
        """r_h(s, a) = ⟨φ(s, a), θ_h⟩ with shape (H, S, A)"""
        r = np.einsum('sad,hd->hsa', self.phi, self.theta)
        r.setflags(write=False)
        return r

    @cached_property
    def raw_kernel(self) -> np.ndarray:
        """Unclamped ⟨φ(s, a), μ_h(s')⟩ with shape (H, S, A, S)"""
        p = np.einsum('sad,hdt->hsat', self.phi, self.mu)
        p.setflags(write=False)
        return p

    @cached_property
    def kernel(self) -> np.ndarray:
        """Transition probabilities clamped to [0, 1] and renormalized, shape (H, S, A, S)"""
        raw = self.raw_kernel
        worst_neg = float(raw.min())
        sums = raw.sum(axis=-1)
        worst_sum = float(np.max(np.abs(sums - 1.0)))
        if worst_neg < -NEG_SLACK or worst_sum > SUM_TOL:
            raise ModelInvalidError(
                f"Transition rows are not distributions (min entry {worst_neg:.3e}, "
                f"max |sum - 1| {worst_sum:.3e})"
            )
        p = np.clip(raw, 0.0, 1.0)
        p = p / p.sum(axis=-1, keepdims=True)
        for s in self.absorbing_states:
            p[:, s, :, :] = 0.0
            p[:, s, :, s] = 1.0
        p.setflags(write=False)
        return p

    def initial_distribution(self) -> np.ndarray:
        """Distribution of s_1 under the initial state rule"""
        if self.initial_state_rule == "uniform":
            return np.full(self.num_states, 1.0 / self.num_states)
        dist = np.zeros(self.num_states)
        dist[self.initial_state] = 1.0
        return dist

    def __repr__(self):
        return (f"<LinearMdp(H={self.horizon}, S={self.num_states}, A={self.num_actions}, "
                f"d={self.dim}, W={self.w_bound:g})>")


@dataclass(frozen=True, eq=False)
class ValueTables:
    """Value tables: v has shape (H+1, S) with v[H] = 0, q has shape (H, S, A)"""
    v: np.ndarray
    q: np.ndarray

    @property
    def horizon(self) -> int:
        return self.q.shape[0]

    def greedy_policy(self) -> np.ndarray:
        """Deterministic policy (H, S), ties broken by the lowest action index"""
        return np.argmax(self.q, axis=-1)


class Step(NamedTuple):
    state: int
    action: int
    reward: float
    next_state: int


@dataclass
class Trajectory(RecordMixin):
    """One episode: exactly H steps"""
    steps: List[Step] = field(default_factory=list)

    def __len__(self):
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    @property
    def episode_return(self) -> float:
        return float(sum(step.reward for step in self.steps))

    @property
    def initial_state(self) -> Optional[int]:
        return self.steps[0].state if self.steps else None


@dataclass
class Violation(RecordMixin):
    """One failed model assumption with its worst magnitude"""
    assumption: str
    magnitude: float
    detail: str = ""


@dataclass
class ValidationReport(RecordMixin):
    """List of violated assumptions; empty means the model is valid"""
    violations: List[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def names(self) -> List[str]:
        return [v.assumption for v in self.violations]

    def summary(self) -> str:
        if self.ok:
            return "model valid: all assumptions hold"
        lines = [f"{v.assumption}: max violation {v.magnitude:.6g}" + (f" ({v.detail})" if v.detail else "")
                 for v in self.violations]
        return "\n".join(lines)
