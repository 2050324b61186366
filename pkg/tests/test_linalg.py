import math

import numpy as np
import pytest

from linucb_lab.core.exceptions import InvalidArgumentError
from linucb_lab.utils import linalg
from linucb_lab.utils.linalg import (
    REFRESH_INTERVAL,
    det_ratio_norm_bound,
    elliptical_potential,
    elliptical_potentials,
    gram_from_samples,
    gram_init,
    gram_rank1_update,
    gram_solve,
    weighted_norm,
)


def test_gram_init_is_scaled_identity():
    g = gram_init(3, 0.5)
    np.testing.assert_allclose(g.matrix, 0.5 * np.eye(3))
    np.testing.assert_allclose(g.inverse, 2.0 * np.eye(3))
    assert g.log_det == pytest.approx(3 * math.log(0.5))
    assert g.num_updates == 0


@pytest.mark.parametrize("d, lam", [(0, 1.0), (2, 0.0), (2, -1.0), (2, float("inf"))])
def test_gram_init_rejects_bad_arguments(d, lam):
    with pytest.raises(InvalidArgumentError):
        gram_init(d, lam)


def test_rank1_update_tracks_direct_inverse_and_log_det():
    rng = np.random.default_rng(3)
    d = 4
    g = gram_init(d, 1.0)
    direct = np.eye(d)
    for _ in range(3 * REFRESH_INTERVAL + 5):
        x = rng.normal(size=d)
        w = rng.uniform(0.1, 2.0)
        g = gram_rank1_update(g, x, w)
        direct += w * np.outer(x, x)

    np.testing.assert_allclose(g.matrix, direct, rtol=1e-12)
    np.testing.assert_allclose(g.inverse, np.linalg.inv(direct), rtol=1e-7, atol=1e-10)
    assert g.log_det == pytest.approx(np.linalg.slogdet(direct)[1], rel=1e-9)
    assert g.residual() < 1e-8
    assert g.num_updates == 3 * REFRESH_INTERVAL + 5


def test_full_residual_is_checked_only_at_refresh(mocker):
    residual = mocker.spy(linalg, "_residual")
    rng = np.random.default_rng(8)
    g = gram_init(3, 1.0)
    for _ in range(REFRESH_INTERVAL - 1):
        g = gram_rank1_update(g, rng.normal(size=3), 1.0)
    assert residual.call_count == 0
    assert g.updates_since_refresh == REFRESH_INTERVAL - 1

    g = gram_rank1_update(g, rng.normal(size=3), 1.0)
    assert residual.call_count == 1
    assert g.updates_since_refresh == 0


def test_update_returns_new_state():
    g = gram_init(2, 1.0)
    g2 = gram_rank1_update(g, [1.0, 0.0], 1.0)
    np.testing.assert_allclose(g.matrix, np.eye(2))
    assert g2.matrix[0, 0] == pytest.approx(2.0)
    with pytest.raises(ValueError):
        g2.matrix[0, 0] = 5.0


def test_determinant_doubles_exactly_at_unit_weighted_norm():
    # det(I + w x xᵀ) = 1 + w‖x‖² with λ = 1
    g = gram_init(3, 1.0)
    doubled = gram_rank1_update(g, [1.0, 0.0, 0.0], 1.0)
    assert doubled.log_det - g.log_det == pytest.approx(math.log(2.0))

    short = gram_rank1_update(g, [0.5, 0.0, 0.0], 1.0)
    assert short.log_det - g.log_det < math.log(2.0)


@pytest.mark.parametrize("x, w", [([1.0, 2.0], 1.0), ([1.0, 0.0, 0.0], 0.0), ([1.0, 0.0, 0.0], -1.0),
                                  ([float("nan"), 0.0, 0.0], 1.0)])
def test_rank1_update_rejects_bad_input(x, w):
    with pytest.raises(InvalidArgumentError):
        gram_rank1_update(gram_init(3, 1.0), x, w)


def test_gram_from_samples_matches_sequential_updates():
    rng = np.random.default_rng(11)
    xs = rng.normal(size=(30, 3))
    ws = rng.uniform(0.5, 1.5, size=30)
    g = gram_init(3, 0.2)
    for x, w in zip(xs, ws):
        g = gram_rank1_update(g, x, w)

    replay = gram_from_samples(3, 0.2, xs, ws)
    np.testing.assert_allclose(replay.matrix, g.matrix, rtol=1e-12)
    np.testing.assert_allclose(replay.inverse, g.inverse, rtol=1e-8, atol=1e-12)
    assert replay.log_det == pytest.approx(g.log_det, rel=1e-10)
    assert replay.num_updates == 30


def test_gram_from_samples_without_data_is_regularizer():
    g = gram_from_samples(2, 3.0, [])
    np.testing.assert_allclose(g.matrix, 3.0 * np.eye(2))


def test_batched_potentials_match_single_potentials():
    rng = np.random.default_rng(5)
    g = gram_init(3, 1.0)
    for x in rng.normal(size=(10, 3)):
        g = gram_rank1_update(g, x, 1.0)
    X = rng.normal(size=(7, 3))
    batched = elliptical_potentials(g, X)
    singles = [elliptical_potential(g, x) for x in X]
    np.testing.assert_allclose(batched, singles, rtol=1e-12)


def test_potential_of_fresh_state():
    g = gram_init(2, 4.0)
    assert elliptical_potential(g, [2.0, 0.0]) == pytest.approx(1.0)
    np.testing.assert_allclose(gram_solve(g, [4.0, 8.0]), [1.0, 2.0])


def test_det_ratio_bound_dominates_larger_norm():
    rng = np.random.default_rng(2)
    for _ in range(20):
        M = rng.normal(size=(3, 3))
        B = M @ M.T + np.eye(3)
        N = rng.normal(size=(3, 2))
        A = B + N @ N.T
        x = rng.normal(size=3)
        assert weighted_norm(A, x) <= det_ratio_norm_bound(A, B, x) + 1e-12


def test_det_ratio_bound_rejects_indefinite_matrices():
    with pytest.raises(InvalidArgumentError):
        det_ratio_norm_bound(-np.eye(3), np.eye(3), [1.0, 0.0, 0.0])
