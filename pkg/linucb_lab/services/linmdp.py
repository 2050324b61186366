"""
Linear MDP service: assumption checks, instance generators, exact sampling,
dynamic-programming solvers and the versioned JSON model document
"""

import logging
import math
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Union

import numpy as np
import orjson

from linucb_lab.core.exceptions import InvalidArgumentError, SchemaError
from linucb_lab.models.linear_mdp import (
    NEG_SLACK,
    SUM_TOL,
    LinearMdp,
    Step,
    Trajectory,
    ValidationReport,
    ValueTables,
    Violation,
)

logger = logging.getLogger(__name__)

ASSUMPTION_FEATURE = "(i) feature norm"
ASSUMPTION_MEASURE = "(ii) measure norm"
ASSUMPTION_THETA = "(iii) theta norm"
ASSUMPTION_REWARD = "(iv) reward range"
ASSUMPTION_KERNEL = "transition distribution"

NORM_TOL = 1e-9
EXACT_SIGN_STATES = 16
MEASURE_SAMPLES = 1000
MODEL_DOCUMENT_VERSION = 1


def _sign_vectors(n: int, count: Optional[int] = None) -> np.ndarray:
    """All 2^n sign vectors (bit j = 1 -> +1), or the first `count` of them"""
    idx = np.arange(2 ** n if count is None else count)
    return (((idx[:, None] >> np.arange(n)) & 1) * 2 - 1).astype(np.float64)


# === VALIDATION ===

def _measure_norm_excess(mu_h: np.ndarray, rng: np.random.Generator) -> float:
    """Largest ‖μ_h v‖₂ − √d found over ‖v‖∞ ≤ 1 (≤ 0 means the check passes)"""
    d, S = mu_h.shape
    cap = math.sqrt(d)
    if S <= EXACT_SIGN_STATES:
        # the maximum of a convex function over the box sits at a vertex
        values = _sign_vectors(S) @ mu_h.T
        return float(np.max(np.linalg.norm(values, axis=1))) - cap

    certificate = float(np.sqrt(np.sum(np.sum(np.abs(mu_h), axis=1) ** 2)))
    if certificate <= cap + NORM_TOL:
        return certificate - cap
    signs = rng.choice([-1.0, 1.0], size=(MEASURE_SAMPLES, S))
    worst = float(np.max(np.linalg.norm(signs @ mu_h.T, axis=1)))
    logger.debug(f"Measure certificate {certificate:.4g} inconclusive, sampled max {worst:.4g}")
    return worst - cap


def validate(mdp: LinearMdp) -> ValidationReport:
    """
    Check a model against the linear MDP assumptions

    Args:
        mdp: Structurally well-formed model

    Returns:
        ValidationReport listing every violated assumption with its worst magnitude
    """
    report = ValidationReport()

    feat_excess = float(np.max(np.linalg.norm(mdp.phi, axis=-1))) - 1.0
    if feat_excess > NORM_TOL:
        report.violations.append(Violation(ASSUMPTION_FEATURE, feat_excess, "max ‖φ(s,a)‖₂ - 1"))

    rng = np.random.default_rng(0)
    measure_excess = max(_measure_norm_excess(mdp.mu[h], rng) for h in range(mdp.horizon))
    if measure_excess > NORM_TOL:
        report.violations.append(Violation(ASSUMPTION_MEASURE, measure_excess, "max ‖μ_h v‖₂ - √d"))

    theta_excess = float(np.max(np.linalg.norm(mdp.theta, axis=-1))) - mdp.w_bound
    if theta_excess > NORM_TOL:
        report.violations.append(Violation(ASSUMPTION_THETA, theta_excess, "max ‖θ_h‖₂ - W"))

    r = mdp.rewards
    reward_excess = max(float(-r.min()), float(r.max()) - 1.0)
    if reward_excess > NORM_TOL:
        report.violations.append(Violation(ASSUMPTION_REWARD, reward_excess, "distance of r_h(s,a) outside [0,1]"))

    raw = mdp.raw_kernel
    neg = float(-raw.min())
    off = float(np.max(np.abs(raw.sum(axis=-1) - 1.0)))
    if neg > NEG_SLACK or off > SUM_TOL:
        report.violations.append(Violation(ASSUMPTION_KERNEL, max(neg, off),
                                           f"min entry {-neg:.3e}, max |row sum - 1| {off:.3e}"))

    if report.ok:
        logger.debug(f"Model {mdp!r} passed validation")
    else:
        logger.info(f"Model {mdp!r} failed validation: {report.names()}")
    return report


# === TRANSITIONS AND SAMPLING ===

def _check_index(mdp: LinearMdp, h: int, s: int, a: Optional[int] = None) -> None:
    if not 0 <= h < mdp.horizon:
        raise InvalidArgumentError(f"Stage {h} outside [0, {mdp.horizon})")
    if not 0 <= s < mdp.num_states:
        raise InvalidArgumentError(f"State {s} outside [0, {mdp.num_states})")
    if a is not None and not 0 <= a < mdp.num_actions:
        raise InvalidArgumentError(f"Action {a} outside [0, {mdp.num_actions})")


def transition_probs(mdp: LinearMdp, h: int, s: int, a: int) -> np.ndarray:
    """P_h(·|s, a) clamped and renormalized; raises ModelInvalidError beyond tolerance"""
    _check_index(mdp, h, s, a)
    return mdp.kernel[h, s, a].copy()


def sample_step(mdp: LinearMdp, h: int, s: int, a: int, rng: np.random.Generator):
    """
    Draw one transition

    Returns:
        (reward, next_state) with next_state drawn by inverse CDF
    """
    _check_index(mdp, h, s, a)
    p = mdp.kernel[h, s, a]
    u = rng.random()
    next_state = int(np.searchsorted(np.cumsum(p), u, side='right'))
    return float(mdp.rewards[h, s, a]), min(next_state, mdp.num_states - 1)


def sample_initial_state(mdp: LinearMdp, rng: np.random.Generator) -> int:
    if mdp.initial_state_rule == "uniform":
        return int(rng.integers(mdp.num_states))
    return mdp.initial_state


def rollout(mdp: LinearMdp, act: Callable[[int, int], int], rng: np.random.Generator,
            initial_state: Optional[int] = None) -> Trajectory:
    """
    Play one episode of exactly H steps

    Args:
        mdp: Environment
        act: Policy callback (h, s) -> action
        rng: Generator that drives the environment
        initial_state: Override for s_1, drawn from the initial state rule when omitted

    Returns:
        Trajectory of H steps
    """
    s = sample_initial_state(mdp, rng) if initial_state is None else int(initial_state)
    steps = []
    for h in range(mdp.horizon):
        a = int(act(h, s))
        reward, s_next = sample_step(mdp, h, s, a, rng)
        steps.append(Step(s, a, reward, s_next))
        s = s_next
    return Trajectory(steps=steps)


# === DYNAMIC PROGRAMMING ===

def optimal_values(mdp: LinearMdp) -> ValueTables:
    """V* and Q* by backward induction with V_H = 0"""
    H, S, A = mdp.horizon, mdp.num_states, mdp.num_actions
    P, R = mdp.kernel, mdp.rewards
    v = np.zeros((H + 1, S))
    q = np.zeros((H, S, A))
    for h in range(H - 1, -1, -1):
        q[h] = R[h] + P[h] @ v[h + 1]
        v[h] = q[h].max(axis=-1)
    return ValueTables(v=v, q=q)


def evaluate_policy(mdp: LinearMdp, policy) -> ValueTables:
    """
    Exact V^π and Q^π

    Args:
        mdp: Environment
        policy: Deterministic actions with shape (H, S), or action
            distributions with shape (H, S, A)

    Returns:
        ValueTables for the policy
    """
    H, S, A = mdp.horizon, mdp.num_states, mdp.num_actions
    pi = np.asarray(policy)
    if pi.shape == (H, S):
        if not np.issubdtype(pi.dtype, np.integer) or pi.min() < 0 or pi.max() >= A:
            raise InvalidArgumentError("Deterministic policy must hold action indices in [0, A)")
        stochastic = False
    elif pi.shape == (H, S, A):
        pi = pi.astype(np.float64)
        if pi.min() < 0 or np.max(np.abs(pi.sum(axis=-1) - 1.0)) > SUM_TOL:
            raise InvalidArgumentError("Stochastic policy rows must be distributions over actions")
        stochastic = True
    else:
        raise InvalidArgumentError(f"Policy must have shape {(H, S)} or {(H, S, A)}, got {pi.shape}")

    P, R = mdp.kernel, mdp.rewards
    v = np.zeros((H + 1, S))
    q = np.zeros((H, S, A))
    states = np.arange(S)
    for h in range(H - 1, -1, -1):
        q[h] = R[h] + P[h] @ v[h + 1]
        if stochastic:
            v[h] = np.sum(q[h] * pi[h], axis=-1)
        else:
            v[h] = q[h][states, pi[h]]
    return ValueTables(v=v, q=q)


def uniform_policy(mdp: LinearMdp) -> np.ndarray:
    return np.full((mdp.horizon, mdp.num_states, mdp.num_actions), 1.0 / mdp.num_actions)


def conditional_variance(mdp: LinearMdp, h: int, next_values) -> np.ndarray:
    """[V_h V](s, a) = P_h V² − (P_h V)² for every (s, a)"""
    v = np.asarray(next_values, dtype=np.float64)
    P = mdp.kernel[h]
    first = P @ v
    second = P @ (v * v)
    return np.maximum(second - first * first, 0.0)


# === GENERATORS ===

def hard_instance_min_episodes(d_minus: int, H: int) -> float:
    """Smallest K for which the hard instance is well defined"""
    d = d_minus + 2
    return max((d - 1) ** 2 * H / 2.0, (d - 1) / (32.0 * H * (math.sqrt(d) - 1.0)))


def make_hard_instance(d_minus: int, H: int, K: int, rng: Optional[np.random.Generator] = None,
                       mu_mode: str = "random") -> LinearMdp:
    """
    Hard-to-learn linear MDP

    States 0 .. H are the non-rewarding states s_1 .. s_{H+1} and state H+1 is the
    rewarding state s_{H+2}. An episode starts in state 0; at stage h state h moves to
    state H+1 with probability ι + ⟨μ̄_h, a⟩ and to state h+1 otherwise. States H and
    H+1 are absorbing. Action i maps to the sign vector whose j-th entry is +1 when
    bit j of i is set, -1 otherwise.

    The non-rewarding states share one feature vector, so the chain step is carried
    by the stage-h measure column of state h+1. Rows of states off the chain at
    stage h follow the same linear step; no episode from state 0 visits them.

    Args:
        d_minus: Number of sign coordinates (feature dimension is d_minus + 2)
        H: Horizon
        K: Number of episodes the instance is tuned for
        rng: Generator used to draw the per-stage signs of μ̄
        mu_mode: "random" (uniform over {±Δ}) or "all_plus"

    Returns:
        LinearMdp with ι = 1/H and Δ = √(ι/K)/(4√2)
    """
    if d_minus < 1 or H < 1 or K < 1:
        raise InvalidArgumentError(f"Hard instance needs d_minus, H, K ≥ 1 (got {d_minus}, {H}, {K})")
    k_min = hard_instance_min_episodes(d_minus, H)
    if K < k_min:
        raise InvalidArgumentError(
            f"Hard instance with d_minus={d_minus}, H={H} requires K >= {math.ceil(k_min)}, got K={K}"
        )
    if mu_mode not in ("random", "all_plus"):
        raise InvalidArgumentError(f"Unknown mu_mode: {mu_mode}")
    if mu_mode == "random" and rng is None:
        raise InvalidArgumentError("A generator is required to draw the random μ̄ signs")

    d = d_minus + 2
    S, A = H + 2, 2 ** d_minus
    iota = 1.0 / H
    gap = math.sqrt(iota / K) / (4.0 * math.sqrt(2.0))
    alpha = math.sqrt(1.0 / (1.0 + gap * d_minus))
    beta = math.sqrt(gap / (1.0 + gap * d_minus))

    signs = _sign_vectors(d_minus, A)
    phi = np.zeros((S, A, d))
    phi[:H + 1, :, 0] = alpha
    phi[:H + 1, :, 1:1 + d_minus] = beta * signs
    phi[H + 1, :, d - 1] = 1.0

    if mu_mode == "all_plus":
        mu_bar = np.full((H, d_minus), gap)
    else:
        mu_bar = rng.choice([-gap, gap], size=(H, d_minus))

    mu = np.zeros((H, d, S))
    stages = np.arange(H)
    # stage h moves the non-rewarding mass one step along the chain, to index h + 1
    mu[stages, 0, stages + 1] = (1.0 - iota) / alpha
    mu[stages, 1:1 + d_minus, stages + 1] = -mu_bar / beta
    mu[:, 0, H + 1] = iota / alpha
    mu[:, 1:1 + d_minus, H + 1] = mu_bar / beta
    mu[:, d - 1, H + 1] = 1.0

    theta = np.zeros((H, d))
    theta[:, d - 1] = 1.0

    meta = {
        "kind": "hard",
        "d_minus": d_minus,
        "K": K,
        "iota": iota,
        "gap": gap,
        "alpha": alpha,
        "beta": beta,
        "mu_mode": mu_mode,
        "mu_bar": mu_bar.tolist(),
    }
    logger.info(f"Built hard instance d_minus={d_minus}, H={H}, K={K}, Δ={gap:.6g}")
    return LinearMdp(horizon=H, phi=phi, mu=mu, theta=theta, w_bound=math.sqrt(d),
                     initial_state_rule="fixed", initial_state=0, meta=meta,
                     absorbing_states=(H, H + 1))


def make_random_linear_mdp(d: int, H: int, num_states: int, num_actions: int,
                           rng: np.random.Generator) -> LinearMdp:
    """
    Random linear MDP built from d anchor distributions

    Each φ(s, a) lies in the probability simplex over the anchors, so every
    transition row is a mixture of anchor distributions. The first d state-action
    pairs sit on the simplex vertices, which keeps the feature table full rank.
    """
    if min(d, H, num_states, num_actions) < 1:
        raise InvalidArgumentError("Random model sizes must be positive")
    if d > num_states * num_actions:
        raise InvalidArgumentError(
            f"Feature dimension d={d} exceeds the number of state-action pairs {num_states * num_actions}"
        )

    n_pairs = num_states * num_actions
    if d == 1:
        features = np.ones((n_pairs, 1))
    else:
        features = rng.dirichlet(np.ones(d), size=n_pairs)
        features[:d] = np.eye(d)
    phi = features.reshape(num_states, num_actions, d)

    mu = np.stack([rng.dirichlet(np.ones(num_states), size=d) for _ in range(H)])
    theta = rng.uniform(0.0, 1.0, size=(H, d))

    meta = {"kind": "random", "num_states": num_states, "num_actions": num_actions}
    return LinearMdp(horizon=H, phi=phi, mu=mu, theta=theta, w_bound=math.sqrt(d), meta=meta)


def make_tabular_embedding(p, r, initial_state: int = 0, initial_state_rule: str = "fixed") -> LinearMdp:
    """
    Embed a tabular MDP with one-hot features

    Args:
        p: Transitions with shape (H, S, A, S)
        r: Rewards in [0, 1] with shape (H, S, A)

    Returns:
        LinearMdp with d = S·A and W = √(S·A)
    """
    p = np.asarray(p, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    if p.ndim != 4 or p.shape[1] != p.shape[3]:
        raise InvalidArgumentError(f"Transitions must have shape (H, S, A, S), got {p.shape}")
    H, S, A, _ = p.shape
    if r.shape != (H, S, A):
        raise InvalidArgumentError(f"Rewards must have shape {(H, S, A)}, got {r.shape}")
    if p.min() < -NEG_SLACK or np.max(np.abs(p.sum(axis=-1) - 1.0)) > SUM_TOL:
        raise InvalidArgumentError("Every transition row must be a probability distribution")
    if r.min() < 0.0 or r.max() > 1.0:
        raise InvalidArgumentError("Rewards must lie in [0, 1]")

    d = S * A
    phi = np.eye(d).reshape(S, A, d)
    mu = p.reshape(H, d, S)
    theta = r.reshape(H, d)
    return LinearMdp(horizon=H, phi=phi, mu=mu, theta=theta, w_bound=math.sqrt(d),
                     initial_state_rule=initial_state_rule, initial_state=initial_state,
                     meta={"kind": "tabular"})


# === SERIALIZATION ===

def model_to_document(mdp: LinearMdp) -> Dict[str, Any]:
    """Versioned JSON-ready document of a model"""
    return {
        "version": MODEL_DOCUMENT_VERSION,
        "H": mdp.horizon,
        "S": mdp.num_states,
        "A": mdp.num_actions,
        "d": mdp.dim,
        "phi": mdp.feature_matrix.tolist(),
        "mu": mdp.mu.tolist(),
        "theta": mdp.theta.tolist(),
        "W": mdp.w_bound,
        "initial_state_rule": {"rule": mdp.initial_state_rule, "state": mdp.initial_state},
        "absorbing": list(mdp.absorbing_states),
        "meta": mdp.meta,
    }


def model_from_document(doc: Dict[str, Any]) -> LinearMdp:
    """Rebuild a model from its document; schema problems raise SchemaError"""
    if not isinstance(doc, dict):
        raise SchemaError("Model document must be a JSON object")
    version = doc.get("version")
    if version != MODEL_DOCUMENT_VERSION:
        raise SchemaError(f"Unsupported model document version: {version!r}", field="version")
    for key in ("H", "S", "A", "d", "phi", "mu", "theta", "W", "initial_state_rule"):
        if key not in doc:
            raise SchemaError(f"Model document is missing field '{key}'", field=key)

    H, S, A, d = (int(doc[k]) for k in ("H", "S", "A", "d"))
    try:
        phi = np.asarray(doc["phi"], dtype=np.float64).reshape(S, A, d)
        mu = np.asarray(doc["mu"], dtype=np.float64).reshape(H, d, S)
        theta = np.asarray(doc["theta"], dtype=np.float64).reshape(H, d)
    except ValueError as e:
        raise SchemaError(f"Model tables do not match the declared sizes: {e}") from e

    rule = doc["initial_state_rule"]
    if isinstance(rule, str):
        rule = {"rule": rule, "state": 0}
    return LinearMdp(horizon=H, phi=phi, mu=mu, theta=theta, w_bound=float(doc["W"]),
                     initial_state_rule=rule.get("rule", "fixed"), initial_state=int(rule.get("state", 0)),
                     meta=doc.get("meta") or {}, absorbing_states=tuple(doc.get("absorbing") or ()))


def dumps_model(mdp: LinearMdp) -> bytes:
    return orjson.dumps(model_to_document(mdp))


def loads_model(data: Union[bytes, str]) -> LinearMdp:
    try:
        doc = orjson.loads(data)
    except orjson.JSONDecodeError as e:
        raise SchemaError(f"Model document is not valid JSON: {e}") from e
    return model_from_document(doc)


def save_model(mdp: LinearMdp, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(dumps_model(mdp))
    logger.info(f"Saved model {mdp!r} to {path}")
    return path


def load_model(path: Union[str, Path]) -> LinearMdp:
    path = Path(path)
    if not path.is_file():
        raise SchemaError(f"Model file not found: {path}", field="path")
    return loads_model(path.read_bytes())
