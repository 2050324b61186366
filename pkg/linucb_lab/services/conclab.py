"""
Monte Carlo checks of the concentration inequalities used by the agents

Self-normalized trials are simulated in batches: every trial draws its own
randomness from the (seed, trial) substream, then the martingale recursion
runs over the whole batch with batched Sherman-Morrison inverses.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np

from linucb_lab.core.exceptions import InvalidArgumentError, LemmaViolationError
from linucb_lab.models.records import CheckSummary, TrialOutcome
from linucb_lab.services.radii import (
    azuma_bound,
    bernstein_radius,
    elliptical_count_bound,
    elliptical_sum_bound,
    freedman_bound,
    hoeffding_radius,
    uniform_bernstein_bound,
)
from linucb_lab.utils.hash_generator import seed_stream
from linucb_lab.utils.linalg import REFRESH_INTERVAL

logger = logging.getLogger(__name__)

NOISE_MODELS = ("uniform", "rademacher", "truncated_gaussian")
FEATURE_MODELS = ("iid_sphere", "adversarial_repeat", "decaying")
STEP_MODELS = ("rademacher", "variance_starved", "zero")
BOUNDS = ("bernstein", "hoeffding")

GAUSSIAN_TRUNCATION = 3.0
DEFAULT_CHUNK = 500
PATH_TOL = 1e-9


@dataclass(frozen=True)
class MartingaleSpec:
    """
    Generator of (x_t, η_t) sequences for the self-normalized bound

    Features have norm exactly l2_cap (or zero when l2_cap is 0). Noise is
    symmetric with E[η²] ≤ sigma², and η_t is clipped so that
    |η_t| · min{1, ‖x_t‖_{Z_{t-1}⁻¹}} ≤ r_cap on every path.
    """
    d: int
    T: int
    lam: float = 1.0
    l2_cap: float = 1.0
    sigma: float = 1.0
    r_cap: float = 1.0
    noise_model: str = "uniform"
    feature_model: str = "iid_sphere"

    def __post_init__(self):
        if self.d < 1 or self.T < 1:
            raise InvalidArgumentError(f"need d ≥ 1 and T ≥ 1, got d={self.d}, T={self.T}")
        if self.lam <= 0:
            raise InvalidArgumentError(f"lambda must be positive, got {self.lam}")
        if self.l2_cap < 0 or self.sigma < 0 or self.r_cap < 0:
            raise InvalidArgumentError("l2_cap, sigma and r_cap must be nonnegative")
        if self.noise_model not in NOISE_MODELS:
            raise InvalidArgumentError(f"Unknown noise model {self.noise_model!r}; expected one of {NOISE_MODELS}")
        if self.feature_model not in FEATURE_MODELS:
            raise InvalidArgumentError(
                f"Unknown feature model {self.feature_model!r}; expected one of {FEATURE_MODELS}")

    @property
    def raw_noise_cap(self) -> float:
        """Almost-sure bound on |η_t| before the scaled clip"""
        if self.noise_model == "uniform":
            return self.sigma * math.sqrt(3.0)
        if self.noise_model == "truncated_gaussian":
            return self.sigma * GAUSSIAN_TRUNCATION
        return self.sigma


# === GENERATORS ===

def _draw_noise(spec: MartingaleSpec, rng: np.random.Generator) -> np.ndarray:
    if spec.sigma == 0:
        return np.zeros(spec.T)
    if spec.noise_model == "uniform":
        cap = spec.raw_noise_cap
        return rng.uniform(-cap, cap, spec.T)
    if spec.noise_model == "rademacher":
        return spec.sigma * (2.0 * rng.integers(0, 2, spec.T) - 1.0)
    # symmetric rejection keeps the mean at zero and the variance below sigma²
    z = rng.standard_normal(spec.T)
    outside = np.abs(z) > GAUSSIAN_TRUNCATION
    while outside.any():
        z[outside] = rng.standard_normal(int(outside.sum()))
        outside = np.abs(z) > GAUSSIAN_TRUNCATION
    return spec.sigma * z


def _draw_features(spec: MartingaleSpec, rng: np.random.Generator) -> np.ndarray:
    if spec.feature_model == "adversarial_repeat":
        x = np.zeros((spec.T, spec.d))
        x[:, 0] = spec.l2_cap
        return x

    g = rng.standard_normal((spec.T, spec.d))
    if spec.feature_model == "decaying":
        g = g / np.sqrt(np.arange(1, spec.T + 1, dtype=np.float64))[:, None]
        g[:, 0] += 1.0
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    return spec.l2_cap * g / np.maximum(norms, np.finfo(np.float64).tiny)


def draw_trial(spec: MartingaleSpec, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Features (T, d) and raw noise (T,) of one trial"""
    features = _draw_features(spec, rng)
    noise = _draw_noise(spec, rng)
    return features, noise


class _BatchedGram:
    """λI + Σ x xᵀ for a batch of independent paths"""

    def __init__(self, n: int, d: int, lam: float):
        eye = np.eye(d)
        self.matrix = np.repeat((lam * eye)[None], n, axis=0)
        self.inverse = np.repeat((eye / lam)[None], n, axis=0)
        self.updates = 0

    def potentials_sq(self, x: np.ndarray) -> np.ndarray:
        return np.maximum(np.einsum("ni,nij,nj->n", x, self.inverse, x), 0.0)

    def quad(self, v: np.ndarray) -> np.ndarray:
        return np.maximum(np.einsum("ni,nij,nj->n", v, self.inverse, v), 0.0)

    def update(self, x: np.ndarray) -> None:
        self.matrix += np.einsum("ni,nj->nij", x, x)
        u = np.einsum("nij,nj->ni", self.inverse, x)
        denom = 1.0 + np.einsum("ni,ni->n", x, u)
        self.inverse -= np.einsum("ni,nj->nij", u, u) / denom[:, None, None]
        self.updates += 1
        if self.updates % REFRESH_INTERVAL == 0:
            self.inverse = np.linalg.inv(self.matrix)
        self.inverse = 0.5 * (self.inverse + np.swapaxes(self.inverse, 1, 2))


# === SELF-NORMALIZED BOUND ===

def radius_path(spec: MartingaleSpec, delta: float, bound: str = "bernstein") -> np.ndarray:
    """Radius β_t for t = 1..T under the chosen bound"""
    if bound == "bernstein":
        return np.array([bernstein_radius(spec.sigma, spec.r_cap, spec.d, spec.l2_cap, spec.lam, t, delta)
                         for t in range(1, spec.T + 1)])
    if bound == "hoeffding":
        return np.array([hoeffding_radius(spec.raw_noise_cap, spec.d, spec.l2_cap, spec.lam, t, delta)
                         for t in range(1, spec.T + 1)])
    raise InvalidArgumentError(f"Unknown bound {bound!r}; expected one of {BOUNDS}")


def _simulate_batch(spec: MartingaleSpec, features: np.ndarray, noise: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Norms ‖Σ x_i η_i‖_{Z_t⁻¹} (n, T) and the max scaled noise per path"""
    n = features.shape[0]
    gram = _BatchedGram(n, spec.d, spec.lam)
    total = np.zeros((n, spec.d))
    norms = np.empty((n, spec.T))
    max_scaled = np.zeros(n)

    for t in range(spec.T):
        x = features[:, t]
        m = np.minimum(1.0, np.sqrt(gram.potentials_sq(x)))
        eta = noise[:, t]
        scaled = np.abs(eta) * m
        clip = np.divide(spec.r_cap, scaled, out=np.ones_like(scaled), where=scaled > spec.r_cap)
        eta = eta * clip
        max_scaled = np.maximum(max_scaled, np.abs(eta) * m)

        total += x * eta[:, None]
        gram.update(x)
        norms[:, t] = np.sqrt(gram.quad(total))
    return norms, max_scaled


def _tightness(norms: np.ndarray, radii: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(radii > 0, norms / np.where(radii > 0, radii, 1.0), np.where(norms > 0, np.inf, 0.0))


def _outcomes(trial_ids: Sequence[int], norms: np.ndarray, radii: np.ndarray,
              max_scaled: np.ndarray, keep_paths: bool) -> List[TrialOutcome]:
    ratio = _tightness(norms, radii[None, :])
    argmax = np.argmax(ratio, axis=1)
    outcomes = []
    for row, trial_id in enumerate(trial_ids):
        tightness = float(ratio[row, argmax[row]])
        outcomes.append(TrialOutcome(
            trial_id=int(trial_id),
            norms=norms[row].tolist() if keep_paths else [],
            radii=radii.tolist() if keep_paths else [],
            violated=tightness > 1.0,
            tightness=tightness,
            argmax_t=int(argmax[row]) + 1,
            max_scaled_noise=float(max_scaled[row]),
        ))
    return outcomes


def run_self_normalized_trial(spec: MartingaleSpec, rng: np.random.Generator, delta: float = 0.05,
                              bound: str = "bernstein", trial_id: int = 0) -> TrialOutcome:
    """
    Simulate one path and compare its self-normalized norm with the radius

    Args:
        spec: Sequence generator
        rng: Randomness of this trial
        delta: Confidence level of the radius
        bound: "bernstein" or "hoeffding"
        trial_id: Identifier copied into the outcome

    Returns:
        TrialOutcome with the per-t norms and radii
    """
    radii = radius_path(spec, delta, bound)
    features, noise = draw_trial(spec, rng)
    norms, max_scaled = _simulate_batch(spec, features[None], noise[None])
    return _outcomes([trial_id], norms, radii, max_scaled, keep_paths=True)[0]


def _self_normalized_chunk(spec: MartingaleSpec, delta: float, bound: str, seed: int,
                           trial_ids: Sequence[int]) -> List[TrialOutcome]:
    radii = radius_path(spec, delta, bound)
    draws = [draw_trial(spec, seed_stream(seed, trial_id)) for trial_id in trial_ids]
    features = np.stack([f for f, _ in draws])
    noise = np.stack([e for _, e in draws])
    norms, max_scaled = _simulate_batch(spec, features, noise)
    return _outcomes(trial_ids, norms, radii, max_scaled, keep_paths=False)


def _chunks(n_trials: int, chunk_size: int) -> List[List[int]]:
    return [list(range(start, min(start + chunk_size, n_trials))) for start in range(0, n_trials, chunk_size)]


def _fan_out(job: Callable, chunks: List[List[int]], workers: int, *args) -> list:
    results = []
    if workers <= 1 or len(chunks) <= 1:
        for chunk in chunks:
            results.extend(job(*args, chunk))
        return results
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for part in pool.map(job, *[[a] * len(chunks) for a in args], chunks):
            results.extend(part)
    return results


def binomial_allowance(delta: float, n_trials: int) -> float:
    """δ plus three binomial standard deviations at n_trials"""
    return delta + 3.0 * math.sqrt(delta * (1.0 - delta) / n_trials)


def _summarize(check: str, outcomes: Sequence[TrialOutcome], delta: float, **extra) -> CheckSummary:
    tightness = np.array([o.tightness for o in outcomes], dtype=np.float64)
    violations = int(sum(1 for o in outcomes if o.violated))
    n = len(outcomes)
    return CheckSummary(
        check=check,
        n_trials=n,
        violations=violations,
        rate=violations / n,
        delta=delta,
        mean_tightness=float(np.mean(tightness)),
        max_tightness=float(np.max(tightness)),
        extra=dict(extra),
    )


def violation_rate(spec: MartingaleSpec, delta: float, n_trials: int, seed: int = 0, bound: str = "bernstein",
                   workers: int = 1, chunk_size: int = DEFAULT_CHUNK) -> Tuple[CheckSummary, List[TrialOutcome]]:
    """
    Violation rate of the self-normalized bound over independent trials

    Trial i draws from the (seed, i) substream, so the result does not depend
    on chunking or on the worker count.
    """
    if n_trials < 1:
        raise InvalidArgumentError(f"n_trials must be ≥ 1, got {n_trials}")
    if bound not in BOUNDS:
        raise InvalidArgumentError(f"Unknown bound {bound!r}; expected one of {BOUNDS}")

    outcomes = _fan_out(_self_normalized_chunk, _chunks(n_trials, chunk_size), workers, spec, delta, bound, seed)
    outcomes.sort(key=lambda o: o.trial_id)
    allowance = binomial_allowance(delta, n_trials)
    summary = _summarize(
        bound, outcomes, delta,
        allowance=allowance,
        max_scaled_noise=max(o.max_scaled_noise for o in outcomes),
        sharpness_ratio=sharpness_ratio(spec, delta),
    )
    summary.extra["within_allowance"] = summary.rate <= allowance
    logger.info(f"Self-normalized check: {summary.summary_line()}")
    return summary, outcomes


def sharpness_ratio(spec: MartingaleSpec, delta: float) -> float:
    """
    Radius at t = T with the scaled cap R over the radius with the raw noise cap

    Below 1 whenever clipping the scaled noise makes R smaller than the raw cap.
    """
    raw = bernstein_radius(spec.sigma, spec.raw_noise_cap, spec.d, spec.l2_cap, spec.lam, spec.T, delta)
    scaled = bernstein_radius(spec.sigma, spec.r_cap, spec.d, spec.l2_cap, spec.lam, spec.T, delta)
    if raw == 0:
        return 1.0
    return scaled / raw


def sharpness_spec(d: int = 2, T: int = 200, sigma: float = 1.0) -> MartingaleSpec:
    """Decaying potentials, heavy raw noise and a small scaled cap"""
    return MartingaleSpec(d=d, T=T, lam=1.0, l2_cap=1.0, sigma=sigma, r_cap=0.5 * sigma,
                          noise_model="truncated_gaussian", feature_model="decaying")


# === ELLIPTICAL POTENTIALS ===

def _elliptical_batch(features: np.ndarray, lam: float, c: float) -> Tuple[np.ndarray, np.ndarray]:
    n, T, d = features.shape
    gram = _BatchedGram(n, d, lam)
    counts = np.zeros(n, dtype=np.int64)
    sums = np.zeros(n)
    for t in range(T):
        x = features[:, t]
        pot_sq = gram.potentials_sq(x)
        counts += np.sqrt(pot_sq) >= c
        sums += np.minimum(1.0, pot_sq)
        gram.update(x)
    return counts, sums


def elliptical_count_experiment(d: int, T: int, L: float, lam: float, c: float, feature_model: str,
                                rng: np.random.Generator) -> Tuple[int, float]:
    """
    Count the steps with ‖x_t‖_{Z_{t-1}⁻¹} ≥ c along one generated path

    Returns:
        (observed count, counting bound)

    Raises:
        LemmaViolationError: if the count exceeds the bound
    """
    spec = MartingaleSpec(d=d, T=T, lam=lam, l2_cap=L, sigma=0.0, r_cap=0.0, feature_model=feature_model)
    bound = elliptical_count_bound(d, L, lam, c)
    counts, _ = _elliptical_batch(_draw_features(spec, rng)[None], lam, c)
    count = int(counts[0])
    if count > bound + PATH_TOL:
        raise LemmaViolationError(f"Elliptical count {count} exceeds the bound {bound:.4f}")
    return count, bound


def _elliptical_chunk(spec: MartingaleSpec, c: float, seed: int, trial_ids: Sequence[int]) -> List[Tuple[int, int, float]]:
    features = np.stack([_draw_features(spec, seed_stream(seed, trial_id)) for trial_id in trial_ids])
    counts, sums = _elliptical_batch(features, spec.lam, c)
    return [(int(i), int(k), float(s)) for i, k, s in zip(trial_ids, counts, sums)]


def elliptical_sweep(d: int, T: int, L: float, lam: float, c: float, feature_model: str, n_trials: int,
                     seed: int = 0, workers: int = 1, raise_on_violation: bool = True,
                     chunk_size: int = DEFAULT_CHUNK) -> Tuple[CheckSummary, List[TrialOutcome]]:
    """
    Check the counting bound and the summed-potential bound on many paths

    Both bounds hold on every path, so any violation is an error.
    """
    if n_trials < 1:
        raise InvalidArgumentError(f"n_trials must be ≥ 1, got {n_trials}")
    spec = MartingaleSpec(d=d, T=T, lam=lam, l2_cap=L, sigma=0.0, r_cap=0.0, feature_model=feature_model)
    count_bound = elliptical_count_bound(d, L, lam, c)
    sum_bound = elliptical_sum_bound(d, T, L, lam)

    rows = _fan_out(_elliptical_chunk, _chunks(n_trials, chunk_size), workers, spec, c, seed)
    rows.sort()
    outcomes = []
    for trial_id, count, potential_sum in rows:
        count_ok = count <= count_bound + PATH_TOL
        sum_ok = potential_sum <= sum_bound * (1.0 + PATH_TOL) + PATH_TOL
        tightness = count / count_bound if count_bound > 0 else (math.inf if count else 0.0)
        outcomes.append(TrialOutcome(trial_id=trial_id, norms=[], radii=[], violated=not (count_ok and sum_ok),
                                     tightness=tightness, argmax_t=0))

    summary = _summarize(
        "elliptical", outcomes, 0.0,
        count_bound=count_bound,
        sum_bound=sum_bound,
        max_count=max(count for _, count, _ in rows),
        max_potential_sum=max(s for _, _, s in rows),
    )
    logger.info(f"Elliptical check: {summary.summary_line()}")
    if raise_on_violation and summary.violations:
        raise LemmaViolationError(f"Elliptical potential bounds violated on {summary.violations} paths")
    return summary, outcomes


# === SCALAR MARTINGALES ===

def step_variance(step_model: str, c_cap: float, p: float) -> float:
    """Conditional variance of one martingale increment"""
    if step_model == "zero":
        return 0.0
    if step_model == "rademacher":
        return c_cap * c_cap
    return c_cap * c_cap * p / (1.0 - p)


def _draw_steps(step_model: str, n: int, c_cap: float, p: float, rng: np.random.Generator) -> np.ndarray:
    if step_model == "zero":
        return np.zeros(n)
    if step_model == "rademacher":
        return c_cap * (2.0 * rng.integers(0, 2, n) - 1.0)
    hits = rng.random(n) < p
    return np.where(hits, c_cap, -c_cap * p / (1.0 - p))


def _check_step_model(step_model: str, p: float) -> None:
    if step_model not in STEP_MODELS:
        raise InvalidArgumentError(f"Unknown step model {step_model!r}; expected one of {STEP_MODELS}")
    if step_model == "variance_starved" and not 0.0 < p <= 0.5:
        raise InvalidArgumentError(f"variance-starved steps need 0 < p ≤ 1/2, got {p}")


def _scalar_chunk(step_model: str, n: int, c_cap: float, p: float, seed: int,
                  trial_ids: Sequence[int]) -> List[Tuple[int, np.ndarray]]:
    return [(int(i), np.cumsum(_draw_steps(step_model, n, c_cap, p, seed_stream(seed, i)))) for i in trial_ids]


def _scalar_check(check: str, bounds: np.ndarray, n: int, c_cap: float, delta: float, n_trials: int,
                  seed: int, step_model: str, p: float, workers: int, anytime: bool) -> Tuple[CheckSummary, List[TrialOutcome]]:
    if n < 1 or n_trials < 1:
        raise InvalidArgumentError(f"need n ≥ 1 and n_trials ≥ 1, got n={n}, n_trials={n_trials}")
    _check_step_model(step_model, p)
    paths = _fan_out(_scalar_chunk, _chunks(n_trials, DEFAULT_CHUNK), workers, step_model, n, c_cap, p, seed)
    paths.sort(key=lambda item: item[0])

    outcomes = []
    for trial_id, partial in paths:
        ratio = _tightness(np.maximum(partial, 0.0), bounds)
        t = int(np.argmax(ratio)) if anytime else n - 1
        tightness = float(ratio[t])
        outcomes.append(TrialOutcome(trial_id=trial_id, norms=[], radii=[], violated=tightness > 1.0,
                                     tightness=tightness, argmax_t=t + 1))

    allowance = binomial_allowance(delta, n_trials)
    summary = _summarize(check, outcomes, delta, step_model=step_model, bound=float(bounds[-1]),
                         allowance=allowance)
    summary.extra["within_allowance"] = summary.rate <= allowance
    logger.info(f"Martingale check: {summary.summary_line()}")
    return summary, outcomes


def azuma_check(n: int, c_cap: float, delta: float, n_trials: int, seed: int = 0, step_model: str = "rademacher",
                p: float = 0.01, workers: int = 1) -> Tuple[CheckSummary, List[TrialOutcome]]:
    """P(S_n > c√(2n log(1/δ))) for increments bounded by c"""
    bounds = np.full(n, azuma_bound(c_cap, n, delta))
    return _scalar_check("azuma", bounds, n, c_cap, delta, n_trials, seed, step_model, p, workers, anytime=False)


def freedman_check(n: int, c_cap: float, delta: float, n_trials: int, seed: int = 0,
                   step_model: str = "rademacher", p: float = 0.01, workers: int = 1) -> Tuple[CheckSummary, List[TrialOutcome]]:
    """P(S_n > √(2V² log(1/δ)) + (2/3)c log(1/δ)) with V² the summed conditional variance"""
    variance_sum = n * step_variance(step_model, c_cap, p)
    bounds = np.full(n, freedman_bound(variance_sum, c_cap, delta))
    return _scalar_check("freedman", bounds, n, c_cap, delta, n_trials, seed, step_model, p, workers, anytime=False)


def uniform_bernstein_check(n: int, c_cap: float, delta: float, n_trials: int, seed: int = 0,
                            step_model: str = "rademacher", p: float = 0.01, workers: int = 1) -> Tuple[CheckSummary, List[TrialOutcome]]:
    """Anytime version: a trial violates if S_t exceeds its bound at any t ≤ n"""
    variance = step_variance(step_model, c_cap, p)
    bounds = np.array([uniform_bernstein_bound(t * variance, c_cap, t, delta) for t in range(1, n + 1)])
    return _scalar_check("uniform_bernstein", bounds, n, c_cap, delta, n_trials, seed, step_model, p, workers,
                         anytime=True)

