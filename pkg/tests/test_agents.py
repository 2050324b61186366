import math

import numpy as np
import pytest

from linucb_lab.core.exceptions import InvalidArgumentError
from linucb_lab.schemas.experiment import AgentSpec
from linucb_lab.services.agents import (
    AGENT_REGISTRY,
    LsviPlusAgent,
    LsviUcbAgent,
    OracleAgent,
    RandomAgent,
    get_agent_by_name,
)
from linucb_lab.services.agents.lsvi_plus import plus_weights, switch_condition
from linucb_lab.services.linmdp import optimal_values, rollout
from linucb_lab.services.radii import RadiusConfig, compute_radius_set, switch_count_bound


def _play(agent, mdp, episodes, seed=0):
    rng = np.random.default_rng(seed)
    infos = []
    for _ in range(episodes):
        agent.start_episode()
        traj = rollout(mdp, agent.act, rng)
        agent.end_episode(traj)
        infos.append(agent.episode_info())
    return infos


@pytest.fixture
def plus_agent(hard_mdp):
    radii = compute_radius_set(RadiusConfig(d=hard_mdp.dim, H=hard_mdp.horizon, K=200, W=hard_mdp.w_bound))
    return LsviPlusAgent(hard_mdp, radii, K=200)


def test_registry_names():
    assert set(AGENT_REGISTRY) == {"plus", "ucb", "random", "oracle"}


@pytest.mark.parametrize("name", ["plus", "ucb", "random", "oracle"])
def test_registry_builds_agents_from_spec(hard_mdp, name):
    spec = AgentSpec(name=name, bonus_scale=0.1)
    agent = get_agent_by_name(name).from_spec(spec, hard_mdp, 200, np.random.default_rng(0))
    assert isinstance(agent, AGENT_REGISTRY[name])
    assert agent.metadata()["name"] == name


def test_unknown_agent_name():
    with pytest.raises(InvalidArgumentError):
        get_agent_by_name("greedy")


class TestBaselines:

    def test_oracle_plays_greedy_on_q_star(self, random_mdp):
        agent = OracleAgent(random_mdp)
        greedy = optimal_values(random_mdp).greedy_policy()
        np.testing.assert_array_equal(agent.policy_table(), greedy)
        for h in range(random_mdp.horizon):
            for s in range(random_mdp.num_states):
                assert agent.act(h, s) == greedy[h, s]

    def test_random_agent_is_seeded(self, random_mdp):
        a = RandomAgent(random_mdp, np.random.default_rng(3))
        b = RandomAgent(random_mdp, np.random.default_rng(3))
        assert [a.act(0, 0) for _ in range(20)] == [b.act(0, 0) for _ in range(20)]

    def test_random_agent_policy_is_uniform(self, random_mdp):
        table = RandomAgent(random_mdp, np.random.default_rng(0)).policy_table()
        np.testing.assert_allclose(table, 1.0 / random_mdp.num_actions)

    def test_baselines_report_no_variance(self, random_mdp):
        info = OracleAgent(random_mdp).episode_info()
        assert info["switched"] is False
        assert math.isnan(info["mean_sigma_hat"])


class TestLsviUcb:

    def test_q_stays_in_range(self, hard_mdp):
        agent = LsviUcbAgent(hard_mdp, K=50)
        _play(agent, hard_mdp, 15)
        H = hard_mdp.horizon
        assert agent.q.min() >= 0.0
        assert agent.q.max() <= H

    def test_untrained_agent_is_fully_optimistic(self, hard_mdp):
        agent = LsviUcbAgent(hard_mdp, K=50)
        agent.start_episode()
        # with no data the bonus alone exceeds H
        np.testing.assert_allclose(agent.q, hard_mdp.horizon)

    def test_regression_weights_match_normal_equations(self, random_mdp):
        agent = LsviUcbAgent(random_mdp, K=50, lam=0.5)
        rng = np.random.default_rng(2)
        h = 1
        steps = []
        for _ in range(8):
            agent.start_episode()
            trajectory = rollout(random_mdp, agent.act, rng)
            agent.end_episode(trajectory)
            steps.append(trajectory.steps[h])
        v = np.linspace(0.0, 1.0, random_mdp.num_states)
        A = random_mdp.num_actions
        X = np.array([agent.features[step.state * A + step.action] for step in steps])
        y = np.array([v[step.next_state] for step in steps])
        expected = np.linalg.solve(X.T @ X + 0.5 * np.eye(random_mdp.dim), X.T @ y)
        np.testing.assert_allclose(agent.regression_weights(h, v), expected, rtol=1e-7, atol=1e-10)

    def test_metadata_and_info(self, hard_mdp):
        agent = LsviUcbAgent(hard_mdp, K=50, bonus_scale=0.1)
        assert agent.bonus == pytest.approx(0.1 * agent.beta)
        assert agent.metadata()["bonus_scale"] == 0.1
        assert math.isnan(agent.episode_info()["mean_sigma_hat"])


class TestLsviPlus:

    def test_first_episode_switches(self, plus_agent):
        assert switch_condition(plus_agent.state)
        plus_agent.start_episode()
        assert plus_agent.state.switch_episodes == [1]
        assert plus_agent.state.k0 == 1

    def test_value_estimates_bracket_and_never_increase(self, plus_agent, hard_mdp):
        rng = np.random.default_rng(1)
        v_star = optimal_values(hard_mdp).v
        previous = plus_agent.state.q_hat.copy()
        for _ in range(12):
            plus_agent.start_episode()
            assert np.all(plus_agent.state.q_hat <= previous + 1e-12)
            assert plus_agent.state.q_hat.min() >= 0.0
            assert np.all(plus_agent.state.v_check <= plus_agent.state.v_hat + 1e-9)
            assert np.all(v_star <= plus_agent.state.v_hat + 1e-9)
            previous = plus_agent.state.q_hat.copy()
            plus_agent.end_episode(rollout(hard_mdp, plus_agent.act, rng))

    def test_replayed_gram_matches_incremental(self, plus_agent, hard_mdp):
        _play(plus_agent, hard_mdp, 10, seed=4)
        for h in range(hard_mdp.horizon):
            replay = plus_agent.replay_gram(h)
            np.testing.assert_allclose(replay.matrix, plus_agent.state.gram_hat[h].matrix, rtol=1e-10, atol=1e-12)

    def test_regression_weights_match_weighted_ridge(self, plus_agent, hard_mdp):
        _play(plus_agent, hard_mdp, 10, seed=5)
        h = 0
        state = plus_agent.state
        v = np.arange(hard_mdp.num_states, dtype=float)
        target = np.zeros(hard_mdp.dim)
        for s, a, s_next, sigma in state.history[h]:
            target += state.feature(s, a) * v[s_next] / sigma ** 2
        expected = np.linalg.solve(plus_agent.replay_gram(h).matrix, target)
        np.testing.assert_allclose(plus_agent.regression_weights(h, v), expected, rtol=1e-6, atol=1e-9)

    def test_weights_are_at_least_root_horizon(self, plus_agent, hard_mdp):
        infos = _play(plus_agent, hard_mdp, 5)
        for info in infos:
            assert info["mean_sigma_hat"] >= math.sqrt(hard_mdp.horizon) - 1e-12
        for h in range(hard_mdp.horizon):
            assert all(sigma >= math.sqrt(hard_mdp.horizon) - 1e-12 for *_, sigma in plus_agent.state.history[h])

    def test_switch_count_within_bound(self, plus_agent, hard_mdp):
        infos = _play(plus_agent, hard_mdp, 40)
        assert plus_agent.switch_count == sum(info["switched"] for info in infos)
        assert plus_agent.switch_count <= switch_count_bound(hard_mdp.dim, hard_mdp.horizon, 40)

    def test_metadata_lists_radii(self, plus_agent):
        meta = plus_agent.metadata()
        assert meta["name"] == "plus"
        assert meta["radii"]["beta_hat"] == pytest.approx(plus_agent.radii.beta_hat)


class TestPlusWeights:

    def test_small_tilde_norm_gives_root_horizon(self):
        sigma_tilde, varsigma, sigma_hat = plus_weights(4, 5, variance=1.0, offset=0.0, gap=0.0, tilde_norm=0.0)
        assert sigma_tilde == pytest.approx(2.0)
        assert varsigma == pytest.approx(2.0)
        assert sigma_hat == pytest.approx(2.0)

    def test_large_tilde_norm_gives_inflated_floor(self):
        _, varsigma, sigma_hat = plus_weights(4, 5, variance=1.0, offset=0.0, gap=0.0, tilde_norm=1.0)
        assert varsigma == pytest.approx(16.0 * math.sqrt(5 ** 5))
        assert sigma_hat == pytest.approx(varsigma)

    def test_variance_term_can_dominate(self):
        sigma_tilde, _, sigma_hat = plus_weights(4, 2, variance=10.0, offset=6.0, gap=0.0, tilde_norm=0.0)
        assert sigma_tilde == pytest.approx(4.0)
        assert sigma_hat == pytest.approx(4.0)

    def test_gap_term(self):
        _, _, sigma_hat = plus_weights(2, 2, variance=0.0, offset=0.0, gap=1.0, tilde_norm=0.0)
        assert sigma_hat == pytest.approx(math.sqrt(8 * 2))
