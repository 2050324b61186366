import math

import pytest

from linucb_lab.core.exceptions import InvalidArgumentError, NumericFailureError
from linucb_lab.services.radii import (
    RadiusConfig,
    azuma_bound,
    bernstein_radius,
    compute_radius_set,
    elliptical_count_bound,
    elliptical_sum_bound,
    freedman_bound,
    hoeffding_radius,
    lsvi_ucb_radius,
    radius_grid_report,
    resolve_fixed_point,
    switch_count_bound,
    uniform_bernstein_bound,
)


class TestSelfNormalizedRadii:

    def test_bernstein_formula(self):
        sigma, r, d, L, lam, t, delta = 0.5, 1.0, 3, 1.0, 1.0, 100, 0.05
        log_t = math.log(4 * t * t / delta)
        expected = 8 * sigma * math.sqrt(d * math.log(1 + t * L * L / (d * lam)) * log_t) + 4 * r * log_t
        assert bernstein_radius(sigma, r, d, L, lam, t, delta) == pytest.approx(expected)

    def test_bernstein_without_variance_keeps_range_term(self):
        value = bernstein_radius(0.0, 2.0, 2, 1.0, 1.0, 10, 0.1)
        assert value == pytest.approx(8.0 * math.log(4 * 100 / 0.1))

    def test_hoeffding_formula(self):
        expected = 2.0 * math.sqrt(3 * math.log(1 + 50 / 3) + math.log(20))
        assert hoeffding_radius(2.0, 3, 1.0, 1.0, 50, 0.05) == pytest.approx(expected)

    def test_radii_grow_with_time(self):
        assert bernstein_radius(1, 1, 2, 1, 1, 200, 0.05) > bernstein_radius(1, 1, 2, 1, 1, 20, 0.05)
        assert hoeffding_radius(1, 2, 1, 1, 200, 0.05) > hoeffding_radius(1, 2, 1, 1, 20, 0.05)

    @pytest.mark.parametrize("delta", [0.0, 1.0, -0.2, 1.5])
    def test_invalid_delta(self, delta):
        with pytest.raises(InvalidArgumentError):
            bernstein_radius(1, 1, 2, 1, 1, 10, delta)
        with pytest.raises(InvalidArgumentError):
            hoeffding_radius(1, 2, 1, 1, 10, delta)
        with pytest.raises(InvalidArgumentError):
            azuma_bound(1.0, 10, delta)

    def test_invalid_shape_arguments(self):
        with pytest.raises(InvalidArgumentError):
            bernstein_radius(1, 1, 0, 1, 1, 10, 0.1)
        with pytest.raises(InvalidArgumentError):
            hoeffding_radius(1, 2, 1, 0.0, 10, 0.1)
        with pytest.raises(InvalidArgumentError):
            bernstein_radius(-1, 1, 2, 1, 1, 10, 0.1)


class TestCountingBounds:

    def test_elliptical_count_unit_case(self):
        assert elliptical_count_bound(1, 1.0, 1.0, 1.0) == pytest.approx(3.0 / math.log(2) * math.log(1 + 1 / math.log(2)))
        assert elliptical_count_bound(1, 1.0, 1.0, 1.0) == pytest.approx(3.865, abs=1e-3)

    def test_elliptical_count_requires_positive_threshold(self):
        with pytest.raises(InvalidArgumentError):
            elliptical_count_bound(2, 1.0, 1.0, 0.0)

    def test_elliptical_sum(self):
        assert elliptical_sum_bound(2, 100, 1.0, 1.0) == pytest.approx(4 * math.log(51))
        assert elliptical_sum_bound(2, 0, 1.0, 1.0) == 0.0

    def test_switch_bound(self):
        assert switch_count_bound(5, 6, 100) == pytest.approx(30 * math.log(101))

    def test_scalar_martingale_bounds(self):
        assert azuma_bound(1.0, 100, 0.05) == pytest.approx(math.sqrt(200 * math.log(20)))
        log_term = math.log(20)
        assert freedman_bound(4.0, 1.0, 0.05) == pytest.approx(math.sqrt(8 * log_term) + 2 / 3 * log_term)
        log_t = math.log(2 * 100 / 0.05)
        assert uniform_bernstein_bound(4.0, 1.0, 10, 0.05) == pytest.approx(math.sqrt(8 * log_t) + 2 * log_t / 3)

    def test_freedman_beats_azuma_for_small_variance(self):
        n, c = 1000, 1.0
        assert freedman_bound(n * 0.01, c, 0.05) < azuma_bound(c, n, 0.05)


class TestFixedPoint:

    def test_contraction_converges_to_fixed_point(self):
        assert resolve_fixed_point(lambda b: 1.0 + b / 2.0) == pytest.approx(2.0, rel=1e-9)

    def test_result_satisfies_inequality(self):
        radius = lambda b: 3.0 + math.sqrt(b)
        b = resolve_fixed_point(radius)
        assert radius(b) <= b * (1 + 1e-9)

    def test_already_satisfied_at_one(self):
        assert resolve_fixed_point(lambda b: 0.5) == pytest.approx(0.5)

    def test_divergent_radius_raises(self):
        with pytest.raises(NumericFailureError):
            resolve_fixed_point(lambda b: 2.0 * b + 1.0)

    def test_non_finite_radius_raises(self):
        with pytest.raises(NumericFailureError):
            resolve_fixed_point(lambda b: float("nan"))


class TestRadiusSet:

    @pytest.fixture
    def cfg(self):
        return RadiusConfig(d=5, H=6, K=1000, W=math.sqrt(5), delta=0.01)

    def test_default_lambda(self, cfg):
        assert cfg.lam == pytest.approx(1.0 / (36 * math.sqrt(5)))

    def test_explicit_lambda_is_kept(self):
        assert RadiusConfig(d=2, H=3, K=10, W=1.0, lam=0.3).lam == 0.3

    def test_radii_respect_their_caps(self, cfg):
        radii = compute_radius_set(cfg)
        assert radii.beta_hat <= radii.b_hat
        assert radii.beta_check <= radii.b_check
        assert radii.beta_hat == pytest.approx(radii.beta_hat1 + radii.beta_hat2)
        assert radii.j_cap == pytest.approx(5 * 6 * math.log(1001))
        assert radii.l_cap == pytest.approx(math.sqrt(5) + 1000 / cfg.lam)

    def test_all_radii_positive_and_finite(self, cfg):
        for name, value in compute_radius_set(cfg).to_dict().items():
            assert math.isfinite(value), name
            assert value > 0, name

    def test_bonus_scale(self):
        base = compute_radius_set(RadiusConfig(d=3, H=3, K=50, W=math.sqrt(3)))
        scaled = compute_radius_set(RadiusConfig(d=3, H=3, K=50, W=math.sqrt(3), bonus_scale=0.02))
        assert scaled.beta_hat == pytest.approx(base.beta_hat)
        assert scaled.bonus_hat == pytest.approx(0.02 * base.beta_hat)
        assert scaled.bonus_check == pytest.approx(0.02 * base.beta_check)

    def test_radii_grow_with_episodes(self):
        small = compute_radius_set(RadiusConfig(d=3, H=3, K=50, W=math.sqrt(3)))
        large = compute_radius_set(RadiusConfig(d=3, H=3, K=5000, W=math.sqrt(3)))
        assert large.beta_hat > small.beta_hat
        assert large.beta_check > small.beta_check

    @pytest.mark.parametrize("kwargs", [
        {"d": 0, "H": 2, "K": 10, "W": 1.0},
        {"d": 2, "H": 2, "K": 10, "W": 0.0},
        {"d": 2, "H": 2, "K": 10, "W": 1.0, "delta": 1.0},
        {"d": 2, "H": 2, "K": 10, "W": 1.0, "lam": -1.0},
        {"d": 2, "H": 2, "K": 10, "W": 1.0, "bonus_scale": 0.0},
    ])
    def test_invalid_config(self, kwargs):
        with pytest.raises(InvalidArgumentError):
            RadiusConfig(**kwargs)

    def test_grid_report_keys(self):
        report = radius_grid_report([2], [2, 3], [20], [0.1])
        assert set(report) == {(2, 2, 20, 0.1), (2, 3, 20, 0.1)}
        assert "beta_hat" in report[(2, 2, 20, 0.1)]


def test_baseline_radius():
    d, H, K, lam, delta = 4, 5, 100, 1.0, 0.05
    expected = math.sqrt(d) * hoeffding_radius(H, d, 1.0, lam, K, delta / H) + H * math.sqrt(lam * d)
    assert lsvi_ucb_radius(d, H, K, lam, delta) == pytest.approx(expected)
