import math

import numpy as np
import pytest

from linucb_lab.core.exceptions import InvalidArgumentError, LemmaViolationError
from linucb_lab.services.conclab import (
    MartingaleSpec,
    azuma_check,
    binomial_allowance,
    draw_trial,
    elliptical_count_experiment,
    elliptical_sweep,
    freedman_check,
    radius_path,
    run_self_normalized_trial,
    sharpness_ratio,
    sharpness_spec,
    step_variance,
    uniform_bernstein_check,
    violation_rate,
)


class TestMartingaleSpec:

    @pytest.mark.parametrize("kwargs", [
        {"d": 0, "T": 10},
        {"d": 2, "T": 0},
        {"d": 2, "T": 10, "lam": 0.0},
        {"d": 2, "T": 10, "sigma": -1.0},
        {"d": 2, "T": 10, "noise_model": "cauchy"},
        {"d": 2, "T": 10, "feature_model": "spiral"},
    ])
    def test_invalid_spec(self, kwargs):
        with pytest.raises(InvalidArgumentError):
            MartingaleSpec(**kwargs)

    @pytest.mark.parametrize("model, cap", [("uniform", math.sqrt(3.0)), ("rademacher", 1.0),
                                            ("truncated_gaussian", 3.0)])
    def test_noise_respects_raw_cap(self, model, cap):
        spec = MartingaleSpec(d=2, T=2000, sigma=1.0, noise_model=model)
        _, noise = draw_trial(spec, np.random.default_rng(0))
        assert spec.raw_noise_cap == pytest.approx(cap)
        assert np.max(np.abs(noise)) <= cap + 1e-12
        assert np.mean(noise ** 2) <= 1.1

    @pytest.mark.parametrize("model", ["iid_sphere", "adversarial_repeat", "decaying"])
    def test_features_have_the_requested_norm(self, model):
        spec = MartingaleSpec(d=3, T=50, l2_cap=0.7, feature_model=model)
        features, _ = draw_trial(spec, np.random.default_rng(1))
        np.testing.assert_allclose(np.linalg.norm(features, axis=1), 0.7)


class TestSelfNormalized:

    def test_zero_noise_gives_zero_norms(self):
        spec = MartingaleSpec(d=2, T=30, sigma=0.0)
        outcome = run_self_normalized_trial(spec, np.random.default_rng(0))
        np.testing.assert_allclose(outcome.norms, 0.0)
        assert outcome.tightness == 0.0
        assert not outcome.violated

    def test_zero_features_give_zero_norms(self):
        spec = MartingaleSpec(d=2, T=30, l2_cap=0.0)
        outcome = run_self_normalized_trial(spec, np.random.default_rng(0))
        np.testing.assert_allclose(outcome.norms, 0.0)

    def test_trial_keeps_full_paths(self):
        spec = MartingaleSpec(d=2, T=25)
        outcome = run_self_normalized_trial(spec, np.random.default_rng(2), trial_id=7)
        assert outcome.trial_id == 7
        assert len(outcome.norms) == len(outcome.radii) == 25
        np.testing.assert_allclose(outcome.radii, radius_path(spec, 0.05))
        assert 1 <= outcome.argmax_t <= 25

    def test_scaled_noise_is_clipped(self):
        spec = MartingaleSpec(d=2, T=40, sigma=1.0, r_cap=0.2)
        summary, outcomes = violation_rate(spec, 0.05, 50, seed=3)
        assert summary.extra["max_scaled_noise"] <= 0.2 + 1e-12
        assert all(o.max_scaled_noise <= 0.2 + 1e-12 for o in outcomes)

    def test_bernstein_rate_within_delta(self):
        spec = MartingaleSpec(d=2, T=50)
        summary, outcomes = violation_rate(spec, 0.05, 200, seed=0)
        assert summary.n_trials == len(outcomes) == 200
        assert summary.rate <= 0.05
        assert summary.extra["within_allowance"]
        assert "<= delta=0.05" in summary.summary_line()

    def test_hoeffding_uses_raw_cap(self):
        spec = MartingaleSpec(d=2, T=10, sigma=1.0, noise_model="uniform")
        radii = radius_path(spec, 0.1, "hoeffding")
        expected = math.sqrt(3.0) * math.sqrt(2 * math.log(1 + 10 / 2) + math.log(10))
        assert radii[-1] == pytest.approx(expected)

    def test_results_are_deterministic(self):
        spec = MartingaleSpec(d=2, T=30)
        a, _ = violation_rate(spec, 0.05, 40, seed=11)
        b, _ = violation_rate(spec, 0.05, 40, seed=11)
        assert a.to_dict() == b.to_dict()

    def test_chunking_does_not_change_trials(self):
        spec = MartingaleSpec(d=3, T=70, feature_model="decaying", noise_model="rademacher")
        _, whole = violation_rate(spec, 0.05, 30, seed=5)
        _, split = violation_rate(spec, 0.05, 30, seed=5, chunk_size=7)
        assert [o.trial_id for o in split] == list(range(30))
        np.testing.assert_allclose([o.tightness for o in split], [o.tightness for o in whole], rtol=1e-9)

    def test_unknown_bound(self):
        with pytest.raises(InvalidArgumentError):
            violation_rate(MartingaleSpec(d=2, T=5), 0.05, 3, bound="chernoff")

    def test_sharpness_ratio_below_one(self):
        spec = sharpness_spec()
        assert spec.r_cap < spec.raw_noise_cap
        assert sharpness_ratio(spec, 0.05) < 1.0


class TestElliptical:

    def test_single_direction_counts_once(self):
        count, bound = elliptical_count_experiment(1, 2, 1.0, 1.0, 1.0, "adversarial_repeat",
                                                   np.random.default_rng(0))
        assert count == 1
        assert bound == pytest.approx(3.865, abs=1e-3)

    def test_zero_features_never_count(self):
        count, _ = elliptical_count_experiment(2, 50, 0.0, 1.0, 0.5, "iid_sphere", np.random.default_rng(0))
        assert count == 0

    def test_count_above_bound_raises(self, mocker):
        mocker.patch("linucb_lab.services.conclab.elliptical_count_bound", return_value=0.5)
        with pytest.raises(LemmaViolationError):
            elliptical_count_experiment(1, 2, 1.0, 1.0, 1.0, "adversarial_repeat", np.random.default_rng(0))

    @pytest.mark.parametrize("model", ["iid_sphere", "adversarial_repeat", "decaying"])
    def test_sweep_has_no_violations(self, model):
        summary, outcomes = elliptical_sweep(3, 100, 1.0, 1.0, 0.5, model, 20, seed=2)
        assert summary.violations == 0
        assert summary.extra["max_count"] <= summary.extra["count_bound"]
        assert summary.extra["max_potential_sum"] <= summary.extra["sum_bound"]
        assert all(0.0 <= o.tightness <= 1.0 for o in outcomes)
        assert "violations=0" in summary.summary_line()


class TestScalarMartingales:

    def test_zero_steps_never_violate(self):
        summary, outcomes = azuma_check(50, 1.0, 0.05, 100, step_model="zero")
        assert summary.rate == 0.0
        assert summary.max_tightness == 0.0
        assert all(o.argmax_t == 50 for o in outcomes)

    def test_azuma_rademacher_within_allowance(self):
        summary, _ = azuma_check(100, 1.0, 0.05, 2000, seed=1)
        assert summary.rate <= binomial_allowance(0.05, 2000)
        assert summary.extra["within_allowance"]

    def test_freedman_is_tighter_on_variance_starved_steps(self):
        kwargs = dict(n=200, c_cap=1.0, delta=0.05, n_trials=200, seed=4, step_model="variance_starved", p=0.01)
        azuma, _ = azuma_check(**kwargs)
        freedman, _ = freedman_check(**kwargs)
        assert freedman.extra["bound"] < azuma.extra["bound"]
        assert freedman.mean_tightness > azuma.mean_tightness

    def test_uniform_bernstein_within_delta(self):
        summary, outcomes = uniform_bernstein_check(100, 1.0, 0.05, 500, seed=7)
        assert summary.rate <= 0.05
        assert all(1 <= o.argmax_t <= 100 for o in outcomes)

    def test_step_variance(self):
        assert step_variance("zero", 2.0, 0.1) == 0.0
        assert step_variance("rademacher", 2.0, 0.1) == pytest.approx(4.0)
        assert step_variance("variance_starved", 1.0, 0.2) == pytest.approx(0.25)

    def test_variance_starved_accepts_half(self):
        summary, _ = freedman_check(1, 1.0, 0.05, 1, step_model="variance_starved", p=0.5)
        assert summary.n_trials == 1

    @pytest.mark.parametrize("kwargs", [
        {"step_model": "gaussian"},
        {"step_model": "variance_starved", "p": 0.7},
        {"step_model": "variance_starved", "p": 0.0},
    ])
    def test_invalid_step_model(self, kwargs):
        with pytest.raises(InvalidArgumentError):
            azuma_check(10, 1.0, 0.05, 5, **kwargs)

    def test_binomial_allowance(self):
        assert binomial_allowance(0.05, 100) == pytest.approx(0.05 + 3 * math.sqrt(0.05 * 0.95 / 100))
