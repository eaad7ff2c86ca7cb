"""Fused node representations, scored L1 distances, and the similarity loss."""

import numpy as np

from provsentry.nn import Params, cross_entropy, zero_grads
from provsentry.similarity import (
    init_similarity_params,
    pair_distance,
    scorer_backward,
    scorer_forward,
    similarity_backward,
    similarity_forward,
    similarity_loss,
    topo_rows_matmul,
)


def make_params(seed=0, feat_dim=6, hidden=8, topo_dim=10, n_layers=1):
    return init_similarity_params(np.random.default_rng(seed), feat_dim, hidden,
                                  topo_dim, n_layers)


def dense_to_csr(dense):
    indptr = [0]
    cols, counts = [], []
    for row in dense:
        nz = np.flatnonzero(row)
        cols.extend(nz.tolist())
        counts.extend(row[nz].tolist())
        indptr.append(len(cols))
    return (np.array(indptr, dtype=np.int64), np.array(cols, dtype=np.int32),
            np.array(counts, dtype=np.float64))


# -- branches -----------------------------------------------------------------


def test_topology_branch_matches_a_dense_matmul_oracle():
    rng = np.random.default_rng(1)
    dense = np.zeros((5, 10))
    dense[0, 3] = 2.0
    dense[1, 3] = 2.0
    dense[2, 7] = 1.0
    dense[4, [1, 8]] = [3.0, 1.0]
    weight = rng.normal(size=(10, 8))
    indptr, cols, counts = dense_to_csr(dense)
    got = topo_rows_matmul(indptr, cols, counts, weight, 5)
    assert np.allclose(got, dense @ weight, atol=1e-12)


def test_identical_neighbor_sets_give_identical_topology_rows():
    params = make_params()
    feats = np.zeros((3, 6))
    dense = np.zeros((3, 10))
    dense[0, [2, 5]] = [1.0, 4.0]
    dense[1, [2, 5]] = [1.0, 4.0]  # same sparse row as node 0
    dense[2, 9] = 1.0
    h0, _ = similarity_forward(params, feats, *dense_to_csr(dense))
    assert np.allclose(h0[0], h0[1])
    assert not np.allclose(h0[0], h0[2])


def test_isolated_node_flows_through_the_bias_path():
    params = make_params()
    feats = np.zeros((2, 6))
    dense = np.zeros((2, 10))
    dense[1, 4] = 1.0
    h0, _ = similarity_forward(params, feats, *dense_to_csr(dense))
    # isolated node's topology hidden layer is just the bias; still finite
    assert np.all(np.isfinite(h0))
    assert not np.allclose(h0[0], h0[1])


def test_large_graphs_fold_topology_columns_by_modulo():
    rng = np.random.default_rng(2)
    weight = rng.normal(size=(4, 3))
    indptr = np.array([0, 1], dtype=np.int64)
    cols = np.array([6], dtype=np.int32)  # 6 % 4 == 2
    counts = np.array([2.0])
    got = topo_rows_matmul(indptr, cols, counts, weight, 1)
    assert np.allclose(got[0], 2.0 * weight[2])


def test_zero_everything_with_zero_bias_gives_zero_embedding():
    params = make_params()
    for key in list(params):
        if key.endswith(".b"):
            params[key] = np.zeros_like(params[key])
    feats = np.zeros((2, 6))
    dense = np.zeros((2, 10))
    h0, _ = similarity_forward(params, feats, *dense_to_csr(dense))
    assert np.allclose(h0, 0.0)


def test_swapping_fusion_inputs_changes_the_output():
    params = make_params(seed=3)
    rng = np.random.default_rng(4)
    feats = rng.normal(size=(3, 6))
    dense = np.abs(rng.normal(size=(3, 10)))
    h_normal, _ = similarity_forward(params, feats, *dense_to_csr(dense))

    # swap the branch parameter blocks: equivalent to concatenating in the
    # other order; the fusion matrix is not symmetric so outputs move
    swapped = dict(params)
    for k in list(params):
        if k.startswith("feat."):
            swapped["topo." + k[5:]] = params[k]
        if k.startswith("topo."):
            swapped["feat." + k[5:]] = params[k]
    feats10 = np.pad(feats, ((0, 0), (0, 4)))  # widths differ; pad to topo width
    dense6 = dense[:, :6]
    h_swapped, _ = similarity_forward(swapped, feats10, *dense_to_csr(dense6))
    assert h_normal.shape == h_swapped.shape
    assert not np.allclose(h_normal, h_swapped)


# -- scored distances ------------------------------------------------------------


def test_distance_is_zero_on_identity_and_symmetric():
    params = make_params(seed=5)
    rng = np.random.default_rng(6)
    h = rng.normal(size=(4, 8))
    scored, _, _ = scorer_forward(params, 1, h)
    left = np.array([0, 1, 2])
    right = np.array([0, 2, 1])
    d = pair_distance(scored, left, right)
    assert d[0] == 0.0
    assert np.isclose(d[1], d[2])
    assert np.all(d >= 0.0)


def test_distance_matches_a_scalar_loop_oracle():
    params = make_params(seed=7)
    rng = np.random.default_rng(8)
    h = rng.normal(size=(3, 8))
    scored, _, _ = scorer_forward(params, 1, h)
    got = pair_distance(scored, np.array([0, 1]), np.array([2, 0]))
    for k, (a, b) in enumerate([(0, 2), (1, 0)]):
        want = sum(abs(float(scored[a, i]) - float(scored[b, i]))
                   for i in range(scored.shape[1]))
        assert abs(got[k] - want) < 1e-6


def test_distance_satisfies_the_triangle_inequality():
    params = make_params(seed=9)
    rng = np.random.default_rng(10)
    h = rng.normal(size=(30, 8))
    scored, _, _ = scorer_forward(params, 1, h)
    for _ in range(200):
        a, b, c = rng.integers(0, 30, size=3)
        ab = pair_distance(scored, np.array([a]), np.array([b]))[0]
        bc = pair_distance(scored, np.array([b]), np.array([c]))[0]
        ac = pair_distance(scored, np.array([a]), np.array([c]))[0]
        assert ac <= ab + bc + 1e-6


def test_scored_representations_are_bounded_by_tanh():
    params = make_params(seed=11)
    h = np.random.default_rng(12).normal(size=(5, 8)) * 100
    scored, _, _ = scorer_forward(params, 1, h)
    assert np.all(np.abs(scored) <= 1.0)
    # distances over d tanh coordinates can never exceed 2d
    d = pair_distance(scored, np.array([0]), np.array([1]))
    assert d[0] <= 2 * scored.shape[1]


# -- similarity loss ----------------------------------------------------------------


def test_uniform_predictions_cost_ln2_per_node():
    logits = np.zeros((4, 2))
    labels = np.array([0, 1, 0, 1])
    loss, _ = similarity_loss(logits, labels)
    assert abs(loss - np.log(2.0)) < 1e-12


def test_confident_correct_predictions_cost_almost_nothing():
    logits = np.array([[20.0, -20.0], [-20.0, 20.0]])
    labels = np.array([0, 1])
    loss, _ = similarity_loss(logits, labels)
    assert loss < 1e-3


def test_loss_decreases_on_a_separable_toy():
    rng = np.random.default_rng(13)
    params = make_params(seed=14, feat_dim=4, hidden=8, topo_dim=6)
    n = 20
    labels = np.array([0] * 10 + [1] * 10)
    feats = rng.normal(size=(n, 4)) + labels[:, None] * 3.0
    dense = np.zeros((n, 6))
    indptr, cols, counts = dense_to_csr(dense)

    losses = []
    lr = 0.05
    for step in range(50):
        grads: Params = zero_grads(params)
        h0, cache = similarity_forward(params, feats, indptr, cols, counts)
        scored, logits, scache = scorer_forward(params, 1, h0)
        loss, dlogits = cross_entropy(logits, labels)
        losses.append(loss)
        dh = scorer_backward(np.zeros_like(scored), dlogits, scache, params, grads, 1)
        similarity_backward(dh, cache, params, grads)
        for key in params:
            params[key] -= lr * grads[key]
    assert losses[-1] < losses[0]
    assert all(b <= a + 1e-9 for a, b in zip(losses[5:], losses[6:]))


def test_branch_gradients_match_central_differences():
    rng = np.random.default_rng(15)
    params = make_params(seed=16, feat_dim=4, hidden=6, topo_dim=5)
    feats = rng.normal(size=(3, 4))
    dense = np.abs(rng.normal(size=(3, 5)))
    dense[dense < 0.8] = 0.0
    indptr, cols, counts = dense_to_csr(dense)
    probe = rng.normal(size=(3, 6))

    def objective():
        h0, _ = similarity_forward(params, feats, indptr, cols, counts)
        return float((h0 * probe).sum())

    grads = zero_grads(params)
    h0, cache = similarity_forward(params, feats, indptr, cols, counts)
    similarity_backward(probe, cache, params, grads)

    eps = 1e-5
    for key in ("feat.l1.W", "topo.l1.W", "fuse.W", "fusef.l2.b"):
        flat = params[key].reshape(-1)
        gflat = grads[key].reshape(-1)
        for idx in rng.choice(flat.size, size=min(6, flat.size), replace=False):
            keep = flat[idx]
            flat[idx] = keep + eps
            up = objective()
            flat[idx] = keep - eps
            down = objective()
            flat[idx] = keep
            fd = (up - down) / (2 * eps)
            denom = max(abs(fd), abs(gflat[idx]), 1e-8)
            assert abs(fd - gflat[idx]) / denom < 1e-4
