"""Isolation forest: path-length normalization, outlier ranking, round trip."""

import numpy as np
import pytest

from provsentry.iforest import IsolationForest, average_path_length


def test_average_path_length_exact_values():
    assert average_path_length(0) == 0.0
    assert average_path_length(1) == 0.0
    assert average_path_length(2) == pytest.approx(1.0, abs=1e-15)
    # 2 H(2) - 2*2/3 = 3 - 4/3
    assert average_path_length(3) == pytest.approx(3.0 - 4.0 / 3.0, abs=1e-12)


def test_scores_strictly_inside_unit_interval():
    rng = np.random.default_rng(0)
    data = rng.normal(size=(120, 4))
    forest = IsolationForest(n_trees=30, subsample=64).fit(data, seed=0)
    scores = forest.score(data)
    assert (scores > 0.0).all()
    assert (scores < 1.0).all()


def test_far_outlier_gets_max_score():
    rng = np.random.default_rng(1)
    data = np.vstack([rng.normal(size=(256, 3)), [[10.0, 10.0, 10.0]]])
    forest = IsolationForest(n_trees=50, subsample=128).fit(data, seed=1)
    scores = forest.score(data)
    assert scores.argmax() == 256
    assert scores[256] > 0.6


def test_scores_invariant_to_dimension_rescaling():
    rng = np.random.default_rng(2)
    data = rng.normal(size=(100, 3))
    scaled = data * np.array([1.0, 1000.0, 0.001]) + np.array([0.0, -5.0, 40.0])
    a = IsolationForest(n_trees=25, subsample=64).fit(data, seed=3).score(data)
    b = IsolationForest(n_trees=25, subsample=64).fit(scaled, seed=3).score(scaled)
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_constant_dimension_does_not_blow_up():
    rng = np.random.default_rng(4)
    data = rng.normal(size=(50, 2))
    data = np.hstack([data, np.full((50, 1), 7.0)])
    scores = IsolationForest(n_trees=10, subsample=32).fit(data, seed=0).score(data)
    assert np.isfinite(scores).all()


def test_blob_round_trip_reproduces_scores():
    rng = np.random.default_rng(5)
    data = rng.normal(size=(80, 4))
    forest = IsolationForest(n_trees=20, subsample=40).fit(data, seed=7)
    clone = IsolationForest.from_blob(forest.to_blob())
    np.testing.assert_array_equal(clone.score(data), forest.score(data))


def test_fit_and_score_guardrails():
    forest = IsolationForest()
    with pytest.raises(RuntimeError):
        forest.score(np.zeros((3, 2)))
    with pytest.raises(ValueError):
        forest.fit(np.zeros((1, 2)))
