"""
Closed-form confidence radii and counting bounds
All formulas use the already-substituted covering resolution ε = H√λ/K
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, Any, Optional, Tuple

from linucb_lab.core.exceptions import InvalidArgumentError, NumericFailureError
from linucb_lab.models.base import RecordMixin

logger = logging.getLogger(__name__)

FIXED_POINT_MAX_ITER = 100
FIXED_POINT_RTOL = 1e-12


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise InvalidArgumentError(message)


def _check_delta(delta: float) -> None:
    _require(0.0 < delta < 1.0, f"delta must lie in (0, 1), got {delta}")


# === SELF-NORMALIZED AND COUNTING BOUNDS ===

def bernstein_radius(sigma: float, r_cap: float, d: int, l2_cap: float, lam: float, t: int, delta: float) -> float:
    """
    Bernstein self-normalized radius

    β_t = 8σ√(d log(1 + tL²/(dλ)) log(4t²/δ)) + 4R log(4t²/δ)
    """
    _require(sigma >= 0 and r_cap >= 0 and l2_cap >= 0, "sigma, r_cap and l2_cap must be nonnegative")
    _require(d >= 1 and lam > 0 and t >= 1, f"need d ≥ 1, lambda > 0, t ≥ 1 (got d={d}, lambda={lam}, t={t})")
    _check_delta(delta)
    log_t = math.log(4.0 * t * t / delta)
    log_det = d * math.log1p(t * l2_cap ** 2 / (d * lam))
    return 8.0 * sigma * math.sqrt(log_det * log_t) + 4.0 * r_cap * log_t


def hoeffding_radius(r_cap: float, d: int, l2_cap: float, lam: float, t: int, delta: float) -> float:
    """Hoeffding self-normalized radius R√(d log(1 + tL²/(dλ)) + log(1/δ))"""
    _require(r_cap >= 0 and l2_cap >= 0, "r_cap and l2_cap must be nonnegative")
    _require(d >= 1 and lam > 0 and t >= 1, f"need d ≥ 1, lambda > 0, t ≥ 1 (got d={d}, lambda={lam}, t={t})")
    _check_delta(delta)
    return r_cap * math.sqrt(d * math.log1p(t * l2_cap ** 2 / (d * lam)) + math.log(1.0 / delta))


def elliptical_count_bound(d: int, l2_cap: float, lam: float, c: float) -> float:
    """Maximum number of steps whose elliptical potential reaches c"""
    _require(c > 0, f"threshold c must be positive, got {c}")
    _require(d >= 1 and lam > 0 and l2_cap >= 0, "need d ≥ 1, lambda > 0, l2_cap ≥ 0")
    log_c = math.log1p(c * c)
    return 3.0 * d / log_c * math.log1p(l2_cap ** 2 / (lam * log_c))


def elliptical_sum_bound(d: int, T: int, l2_cap: float, lam: float) -> float:
    """Bound 2d log(1 + TL²/(dλ)) on Σ_t min{1, ‖x_t‖²_{Z_{t-1}⁻¹}}"""
    _require(d >= 1 and lam > 0 and T >= 0 and l2_cap >= 0, "need d ≥ 1, lambda > 0, T ≥ 0, l2_cap ≥ 0")
    return 2.0 * d * math.log1p(T * l2_cap ** 2 / (d * lam))


def switch_count_bound(d: int, H: int, K: int) -> float:
    """Maximum number of optimistic-update episodes: dH log(1 + K)"""
    return d * H * math.log1p(K)


def azuma_bound(m_cap: float, n: int, delta: float) -> float:
    _check_delta(delta)
    return m_cap * math.sqrt(2.0 * n * math.log(1.0 / delta))


def freedman_bound(variance_sum: float, c_cap: float, delta: float) -> float:
    _check_delta(delta)
    log_term = math.log(1.0 / delta)
    return math.sqrt(2.0 * variance_sum * log_term) + 2.0 / 3.0 * c_cap * log_term


def uniform_bernstein_bound(variance_sum: float, c_cap: float, t: int, delta: float) -> float:
    """Anytime Freedman-type bound, valid simultaneously for all t"""
    _check_delta(delta)
    log_term = math.log(2.0 * t * t / delta)
    return math.sqrt(2.0 * variance_sum * log_term) + 2.0 * c_cap * log_term / 3.0


# === ALGORITHM RADII ===

@dataclass(frozen=True)
class RadiusConfig:
    """Inputs of every algorithm radius; lam defaults to 1/(H²√d)"""
    d: int
    H: int
    K: int
    W: float
    delta: float = 0.01
    lam: Optional[float] = None
    bonus_scale: float = 1.0

    def __post_init__(self):
        _require(self.d >= 1 and self.H >= 1 and self.K >= 1, f"d, H, K must be ≥ 1 (got {self.d}, {self.H}, {self.K})")
        _require(self.W > 0, f"W must be positive, got {self.W}")
        _check_delta(self.delta)
        _require(self.bonus_scale > 0, f"bonus_scale must be positive, got {self.bonus_scale}")
        if self.lam is None:
            object.__setattr__(self, "lam", 1.0 / (self.H ** 2 * math.sqrt(self.d)))
        _require(self.lam > 0, f"lambda must be positive, got {self.lam}")


@dataclass(frozen=True)
class RadiusSet(RecordMixin):
    """Every radius of the variance-aware algorithm for one configuration"""
    beta_hat1: float
    beta_hat2: float
    beta_hat: float
    beta_bar: float
    beta_tilde: float
    beta_check: float
    b_hat: float
    b_check: float
    j_cap: float
    l_cap: float
    lam: float
    delta: float
    bonus_scale: float = 1.0

    @property
    def bonus_hat(self) -> float:
        """β̂ as used in the optimistic bonus"""
        return self.bonus_scale * self.beta_hat

    @property
    def bonus_check(self) -> float:
        """β̌ as used in the pessimistic bonus"""
        return self.bonus_scale * self.beta_check

    @property
    def correction_dominates(self) -> bool:
        return self.beta_hat2 >= self.beta_hat1


class _RadiusTerms:
    """Shared log-terms of the radius formulas for one config"""

    def __init__(self, cfg: RadiusConfig):
        d, H, K, lam, delta = cfg.d, cfg.H, cfg.K, cfg.lam, cfg.delta
        self.cfg = cfg
        self.J = d * H * math.log1p(K)
        self.L = cfg.W + K / lam
        self.log_gram = math.log1p(K / (H * d * lam))
        self.log_h = math.log(H / delta)
        self.log_union = math.log(4.0 * K * K * H / delta)
        self.root_lam = H * math.sqrt(lam * d)
        self.cover_w = math.log1p(4.0 * K * self.L / (H * math.sqrt(lam)))
        self.cover_w_tilde = math.log1p(8.0 * K * self.L / math.sqrt(lam))

    def cover_b(self, b: float) -> float:
        cfg = self.cfg
        return math.log1p(8.0 * cfg.K ** 2 * b * b * math.sqrt(cfg.d) / (cfg.H ** 2 * cfg.lam ** 2))

    def cover_b_tilde(self, b: float) -> float:
        cfg = self.cfg
        return math.log1p(32.0 * cfg.K ** 2 * b * b * math.sqrt(cfg.d) / cfg.lam ** 2)

    def beta_hat1(self) -> float:
        d = self.cfg.d
        return (8.0 * math.sqrt(d * self.log_gram * self.log_union)
                + 4.0 * self.log_union + self.root_lam)

    def beta_hat2(self, b_hat: float) -> float:
        d, H = self.cfg.d, self.cfg.H
        inner = self.log_union + d * self.J * self.cover_w + d * d * self.J * self.cover_b(b_hat)
        return (8.0 * math.sqrt(2.0 / (H * d * d) * self.log_gram * inner)
                + 4.0 / (H * math.sqrt(d ** 5)) * inner + self.root_lam + 2.0)

    def beta_hat(self, b_hat: float) -> float:
        return self.beta_hat1() + self.beta_hat2(b_hat)

    def beta_bar(self, b_hat: float) -> float:
        d, H = self.cfg.d, self.cfg.H
        inner = (d * self.log_gram + self.log_h + d * self.J * self.cover_w
                 + d * d * self.J * self.cover_b(b_hat))
        return math.sqrt(H) * math.sqrt(inner) + self.root_lam + 2.0

    def beta_tilde(self, b_hat: float) -> float:
        d, H = self.cfg.d, self.cfg.H
        inner = (d * self.log_gram + self.log_h + d * self.J * self.cover_w_tilde
                 + d * d * self.J * self.cover_b_tilde(b_hat))
        return math.sqrt(H ** 3) * math.sqrt(inner) + H * self.root_lam + 2.0

    def beta_check(self, b_check: float) -> float:
        d, H = self.cfg.d, self.cfg.H
        inner = d * self.log_gram + self.log_h + d * self.cover_w + d * d * self.cover_b(b_check)
        return math.sqrt(H) * math.sqrt(inner) + self.root_lam + 2.0


def resolve_fixed_point(radius: Callable[[float], float], name: str = "B") -> float:
    """
    Find B with radius(B) ≤ B

    Doubling from B = 1 (B ← 2·radius(B)) until the inequality holds, then
    tightening with B ← radius(B), which keeps radius(B) ≤ B at every step.
    """
    b = 1.0
    for _ in range(FIXED_POINT_MAX_ITER):
        value = radius(b)
        if not math.isfinite(value):
            raise NumericFailureError(f"{name} radius became non-finite at {name}={b:g}")
        if value <= b:
            break
        b = 2.0 * value
    else:
        raise NumericFailureError(f"{name} fixed point did not close within {FIXED_POINT_MAX_ITER} iterations")

    for _ in range(FIXED_POINT_MAX_ITER):
        value = radius(b)
        if value >= b * (1.0 - FIXED_POINT_RTOL):
            break
        b = value
    return b


def compute_radius_set(cfg: RadiusConfig) -> RadiusSet:
    """
    Evaluate every radius for a configuration

    Args:
        cfg: RadiusConfig

    Returns:
        RadiusSet with β̂ = β̂⁽¹⁾ + β̂⁽²⁾, β̂ ≤ B̂ and β̌ ≤ B̌
    """
    terms = _RadiusTerms(cfg)
    b_hat = resolve_fixed_point(terms.beta_hat, "B_hat")
    b_check = resolve_fixed_point(terms.beta_check, "B_check")

    beta_hat1 = terms.beta_hat1()
    beta_hat2 = terms.beta_hat2(b_hat)
    beta_hat = beta_hat1 + beta_hat2
    beta_check = terms.beta_check(b_check)
    if beta_hat > b_hat or beta_check > b_check:
        raise NumericFailureError(
            f"Radius fixed point inconsistent: β̂={beta_hat:g} > B̂={b_hat:g} or β̌={beta_check:g} > B̌={b_check:g}"
        )

    radii = RadiusSet(
        beta_hat1=beta_hat1,
        beta_hat2=beta_hat2,
        beta_hat=beta_hat,
        beta_bar=terms.beta_bar(b_hat),
        beta_tilde=terms.beta_tilde(b_hat),
        beta_check=beta_check,
        b_hat=b_hat,
        b_check=b_check,
        j_cap=terms.J,
        l_cap=terms.L,
        lam=cfg.lam,
        delta=cfg.delta,
        bonus_scale=cfg.bonus_scale,
    )
    if radii.correction_dominates:
        logger.warning(
            f"β̂ correction term dominates at d={cfg.d}, H={cfg.H}, K={cfg.K}: "
            f"β̂⁽²⁾={beta_hat2:.4g} ≥ β̂⁽¹⁾={beta_hat1:.4g}"
        )
    logger.debug(f"Radii for d={cfg.d}, H={cfg.H}, K={cfg.K}: β̂={beta_hat:.4g}, β̌={beta_check:.4g}")
    return radii


def lsvi_ucb_radius(d: int, H: int, K: int, lam: float, delta: float) -> float:
    """
    Hoeffding-style radius of the unweighted baseline

    √d times the Hoeffding radius of H-bounded targets over K samples at level δ/H,
    plus the regularization bias H√(λd).
    """
    return math.sqrt(d) * hoeffding_radius(H, d, 1.0, lam, K, delta / H) + H * math.sqrt(lam * d)


def radius_grid_report(ds, Hs, Ks, deltas, W: Optional[float] = None) -> Dict[Tuple[int, int, int, float], Dict[str, Any]]:
    """Radius sets over a grid of configurations, keyed by (d, H, K, δ)"""
    out = {}
    for d in ds:
        for H in Hs:
            for K in Ks:
                for delta in deltas:
                    cfg = RadiusConfig(d=d, H=H, K=K, W=W or math.sqrt(d), delta=delta)
                    out[(d, H, K, delta)] = compute_radius_set(cfg).to_dict()
    return out
