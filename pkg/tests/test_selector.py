"""Bandit threshold selector: rewards, actions, termination, top-p."""

import numpy as np
import pytest

from provsentry.selector import (SelectorSlot, average_selected_distance,
                                 is_terminal, keep_count, reward, top_p_select)


def make_slot(p=0.5, tau=0.02, p_min=0.02, **kw):
    return SelectorSlot(rel_id=0, layer=1, tau=tau, p_min=p_min, p=p, **kw)


def test_reward_sign_convention():
    assert reward(2.0, 1.0) == 1
    assert reward(3.5, 3.5) == 1   # "did not increase" includes equality
    assert reward(1.0, 2.0) == -1


def test_apply_action_repeats_direction_on_reward():
    slot = make_slot(p=0.5)
    slot.apply_action(1)
    assert slot.p == pytest.approx(0.48)
    assert slot.direction == -1


def test_apply_action_flips_direction_on_penalty():
    slot = make_slot(p=0.48)
    slot.apply_action(-1)
    assert slot.p == pytest.approx(0.50)
    assert slot.direction == 1


def test_apply_action_clamps_at_p_min_and_one():
    slot = make_slot(p=0.02)
    slot.apply_action(1)
    assert slot.p == pytest.approx(0.02)
    hi = make_slot(p=1.0)
    hi.direction = 1
    hi.apply_action(1)
    assert hi.p == pytest.approx(1.0)


def test_apply_action_on_frozen_slot_raises():
    slot = make_slot(frozen=True)
    with pytest.raises(RuntimeError):
        slot.apply_action(1)


def test_is_terminal_requires_ten_epochs():
    assert not is_terminal([1, -1] * 5, epochs=9)
    assert is_terminal([1, -1] * 5, epochs=10)


def test_is_terminal_band():
    assert not is_terminal([1] * 10, epochs=10)          # sum 10
    assert is_terminal([1] * 6 + [-1] * 4, epochs=10)    # sum 2
    assert not is_terminal([1] * 7 + [-1] * 3, epochs=12)  # sum 4


def test_step_first_observation_moves_without_reward():
    slot = make_slot(p=0.5)
    slot.step(1.0)
    assert slot.p == pytest.approx(0.48)
    assert slot.rewards == []
    assert slot.epochs == 0


def test_step_freezes_on_terminal_and_stays_put():
    slot = make_slot(p=0.5)
    # strictly alternating states produce alternating rewards; the band
    # rule fires as soon as ten rewards exist
    for e in range(60):
        slot.step(1.0 if e % 2 == 0 else 2.0)
        if slot.frozen:
            break
    assert slot.frozen
    assert slot.epochs == 10
    p_at_freeze = slot.p
    for _ in range(100):
        slot.step(123.0)
    assert slot.p == p_at_freeze


def test_monotone_environment_drives_p_to_floor():
    # the state strictly falls when p fell and strictly rises otherwise;
    # p walks straight to the floor, then churns until the window cancels
    slot = make_slot(p=0.5, tau=0.02, p_min=0.02)
    state, prev_p = 100.0, slot.p
    min_p = slot.p
    for _ in range(int(1 / slot.tau) + 20):
        state = state - 1.0 if slot.p < prev_p else state + 1.0
        prev_p = slot.p
        slot.step(state)
        min_p = min(min_p, slot.p)
        if slot.frozen:
            break
    assert min_p == pytest.approx(slot.p_min)
    assert slot.frozen


def test_keep_count_rule():
    assert keep_count(0.3, 10) == 3
    assert keep_count(0.01, 1) == 1
    assert keep_count(0.01, 99) == 1
    assert keep_count(1.0, 5) == 5
    assert keep_count(0.5, 5) == 3
    assert keep_count(0.5, 0) == 0


def test_top_p_select_matches_sort_then_slice():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = int(rng.integers(1, 30))
        dist = rng.integers(0, 5, size=n).astype(float)   # force ties
        ids = rng.permutation(1000)[:n]
        p = float(rng.uniform(0.01, 1.0))
        got = top_p_select(dist, ids, p)
        order = sorted(range(n), key=lambda i: (dist[i], ids[i]))
        want = [ids[i] for i in order[: max(1, int(np.ceil(p * n - 1e-12)))]]
        assert list(got) == want


def test_top_p_select_empty_and_mismatch():
    out = top_p_select(np.zeros(0), np.zeros(0, dtype=int), 0.5)
    assert len(out) == 0
    with pytest.raises(ValueError):
        top_p_select(np.zeros(2), np.zeros(3, dtype=int), 0.5)


def test_average_selected_distance_by_definition():
    # two train nodes with selected distances {1.0} and {2.0, 4.0}
    centers = np.array([0, 1, 1, 2])
    dists = np.array([1.0, 2.0, 4.0, 9.0])
    selected = np.array([True, True, True, True])
    train = np.array([True, True, False])
    got = average_selected_distance(centers, dists, selected, train)
    assert got == pytest.approx((1.0 + 6.0) / 2)


def test_average_selected_distance_vs_scalar_loop():
    rng = np.random.default_rng(11)
    n_nodes, n_edges = 10, 40
    centers = rng.integers(0, n_nodes, size=n_edges)
    dists = rng.uniform(0, 3, size=n_edges)
    selected = rng.random(n_edges) < 0.6
    train = rng.random(n_nodes) < 0.5
    train[0] = True
    got = average_selected_distance(centers, dists, selected, train)
    total = 0.0
    for v in range(n_nodes):
        if not train[v]:
            continue
        for e in range(n_edges):
            if centers[e] == v and selected[e]:
                total += dists[e]
    assert got == pytest.approx(total / train.sum(), abs=1e-9)


def test_average_selected_distance_empty_train_raises():
    with pytest.raises(ValueError):
        average_selected_distance(np.zeros(0, dtype=int), np.zeros(0),
                                  np.zeros(0, dtype=bool), np.zeros(3, dtype=bool))
