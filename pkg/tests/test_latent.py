"""Attention hops, path composition, and lazy latent-edge scoring."""

import numpy as np

from provsentry.ingest import RelationGroup, RelationRegistry, build_graphs, parse_jsonl
from provsentry.latent import (
    attention_hop,
    compose_path,
    fit_latent_miner,
    fit_projection,
    fit_relation_embedding,
    latent_adjacency,
    multi_hop_candidates,
)


def rng_of(seed):
    return np.random.default_rng(seed)


# -- attention over relations ----------------------------------------------------


def test_single_relation_gets_all_the_attention():
    rels = np.array([[0.3, -0.2, 0.5]])
    alpha, blended = attention_hop(rels[0], rels, np.eye(3), np.zeros(3))
    assert np.allclose(alpha, [1.0])
    assert np.allclose(blended, rels[0])


def test_identical_relations_split_attention_evenly():
    rels = np.array([[0.3, -0.2, 0.5], [0.3, -0.2, 0.5]])
    alpha, blended = attention_hop(rels[0], rels, np.eye(3), np.zeros(3))
    assert np.allclose(alpha, [0.5, 0.5])
    assert np.allclose(blended, rels[0])


def test_attention_matches_scalar_softmax_oracle():
    rng = rng_of(0)
    rels = rng.normal(size=(4, 6))
    weight = rng.normal(size=(6, 6))
    bias = rng.normal(size=6)
    alpha, blended = attention_hop(rels[2], rels, weight, bias)

    # independent scalar-loop computation
    q = np.tanh(rels[2] @ weight + bias)
    raw = [float(np.dot(rels[j], q)) for j in range(4)]
    mx = max(raw)
    exp = [np.exp(s - mx) for s in raw]
    z = sum(exp)
    want_alpha = [e / z for e in exp]
    want_blend = sum(a * rels[j] for j, a in enumerate(want_alpha))

    assert np.allclose(alpha, want_alpha, atol=1e-6)
    assert np.allclose(blended, want_blend, atol=1e-6)
    assert abs(alpha.sum() - 1.0) < 1e-6
    assert np.all(alpha >= 0)


def test_single_hop_composition_is_the_hop_itself():
    rng = rng_of(1)
    rels = rng.normal(size=(3, 4))
    heads = [(rng.normal(size=(4, 4)), rng.normal(size=4))]
    hops, composed, alphas = compose_path(rels[0], rels, heads)
    assert len(hops) == 1 and len(alphas) == 1
    assert np.array_equal(composed, hops[0])


def test_composition_is_an_elementwise_product_and_stays_bounded():
    rng = rng_of(2)
    rels = rng.random((5, 4))  # entries in [0, 1]
    heads = [(rng.normal(size=(4, 4)), rng.normal(size=4)) for _ in range(3)]
    hops, composed, _ = compose_path(rels[1], rels, heads)
    assert np.allclose(composed, hops[0] * hops[1] * hops[2])
    assert np.all(composed >= 0.0) and np.all(composed <= 1.0)


def test_hop_products_associate():
    rng = rng_of(3)
    a, b, c = rng.normal(size=(3, 8))
    left = (a * b) * c
    right = a * (b * c)
    assert np.allclose(left, right, atol=1e-7)


# -- the diagonal collapse ---------------------------------------------------------


def random_orthonormal(n, seed):
    q, _ = np.linalg.qr(rng_of(seed).normal(size=(n, n)))
    return q


def test_orthonormal_embeddings_collapse_the_relation_product():
    for n in (4, 16, 32):
        e = random_orthonormal(n, n)
        r1 = rng_of(n + 1).normal(size=n)
        r2 = rng_of(n + 2).normal(size=n)
        lhs = (e @ np.diag(r1) @ e.T) @ (e @ np.diag(r2) @ e.T)
        rhs = e @ np.diag(r1 * r2) @ e.T
        assert np.max(np.abs(lhs - rhs)) < 1e-6


def test_identity_embedding_scores_only_the_diagonal():
    n = 6
    e = np.eye(n)
    composed = rng_of(4).random(n) + 0.1
    # candidates: all off-diagonal pairs
    src, dst = np.nonzero(~np.eye(n, dtype=bool))
    s, d, scores = latent_adjacency(e, composed,
                                    src.astype(np.int32), dst.astype(np.int32), top_m=3)
    assert len(s) == 0  # off-diagonal scores are exactly zero


def test_zero_path_vector_yields_no_edges():
    e = rng_of(5).normal(size=(5, 4))
    src = np.array([0, 1, 2], dtype=np.int32)
    dst = np.array([1, 2, 3], dtype=np.int32)
    s, d, scores = latent_adjacency(e, np.zeros(4), src, dst, top_m=2)
    assert len(s) == 0


def test_latent_adjacency_keeps_topm_positive_scores_per_source():
    rng = rng_of(6)
    e = rng.normal(size=(8, 4))
    composed = rng.normal(size=4)
    src = np.repeat(np.arange(8, dtype=np.int32), 7)
    dst = np.concatenate([[j for j in range(8) if j != i] for i in range(8)]).astype(np.int32)
    s, d, scores = latent_adjacency(e, composed, src, dst, top_m=3)

    # oracle: per source, sort candidates by score descending, keep positive top 3
    want = []
    for u in range(8):
        cand = [(float(e[u] @ (composed * e[v])), v) for v in range(8) if v != u]
        cand = [(sc, v) for sc, v in cand if sc > 0.0]
        cand.sort(key=lambda t: (-t[0], t[1]))
        want.extend((u, v, sc) for sc, v in cand[:3])
    got = list(zip(s.tolist(), d.tolist(), scores.tolist()))
    assert len(got) == len(want)
    for (gu, gv, gs), (wu, wv, ws) in zip(got, want):
        assert (gu, gv) == (wu, wv)
        assert abs(gs - ws) < 1e-9


# -- candidate enumeration -----------------------------------------------------------


def chain_graph(n):
    lines = []
    for i in range(n - 1):
        lines.append(
            '{"ts": %d, "subject": {"id": "p%d", "type": "Process", "name": "p%d"},'
            ' "object": {"id": "p%d", "type": "Process", "name": "p%d"}, "action": "fork"}'
            % (i, i, i, i + 1, i + 1))
    events, errors = parse_jsonl(lines)
    assert not errors
    graphs, _ = build_graphs(events)
    return graphs[0]


def test_candidates_cover_2_to_l_hop_reachability_only():
    g = chain_graph(6)  # p0 -> p1 -> ... -> p5
    src, dst = multi_hop_candidates(g, max_hops=3)
    pairs = set(zip(src.tolist(), dst.tolist()))
    want = set()
    for u in range(6):
        for hop in (2, 3):
            if u + hop < 6:
                want.add((g.index_of(f"p{u}"), g.index_of(f"p{u + hop}")))
    assert pairs == want  # no 1-hop neighbors, no self pairs


def test_candidate_fanout_respects_the_cap():
    lines = []
    for i in range(8):
        lines.append(
            '{"ts": %d, "subject": {"id": "hub", "type": "Process", "name": "hub"},'
            ' "object": {"id": "m%d", "type": "Process", "name": "m%d"}, "action": "fork"}'
            % (i, i, i))
        lines.append(
            '{"ts": %d, "subject": {"id": "m%d", "type": "Process", "name": "m%d"},'
            ' "object": {"id": "leaf%d", "type": "File", "name": "/x/%d"}, "action": "write"}'
            % (100 + i, i, i, i, i))
    events, _ = parse_jsonl(lines)
    graphs, _ = build_graphs(events)
    g = graphs[0]
    src, dst = multi_hop_candidates(g, max_hops=2, cap=3)
    hub = g.index_of("hub")
    hub_dsts = dst[src == hub]
    assert len(hub_dsts) == 3
    # deterministic: the smallest destination indices win
    all_leaves = sorted(g.index_of(f"leaf{i}") for i in range(8))
    assert sorted(hub_dsts.tolist()) == all_leaves[:3]


# -- the fitted miner ----------------------------------------------------------------


def test_relation_embedding_fit_is_exact_under_orthogonal_columns():
    # E with orthogonal columns: the least-squares diagonal recovers r exactly
    e = np.array([[1.0, 0.0], [0.0, 2.0], [0.0, 0.0]])
    r_true = np.array([0.7, -0.3])
    adj = e @ np.diag(r_true) @ e.T
    src, dst = np.nonzero(adj)
    counts = adj[src, dst]
    num, den = fit_relation_embedding(e, src, dst, counts)
    r_fit = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    assert np.allclose(r_fit, r_true, atol=1e-12)


def test_fit_projection_gives_orthonormal_columns():
    feats = rng_of(7).normal(size=(40, 12))
    proj = fit_projection(feats, 8)
    gram = proj.T @ proj
    assert np.allclose(gram, np.eye(8), atol=1e-10)


def test_miner_augments_graphs_with_registered_latent_relations():
    g = chain_graph(10)
    feats = rng_of(8).normal(size=(g.n_nodes, 12))
    miner = fit_latent_miner([g], [feats], g.registry, rel_dim=6, hops=2,
                             path_budget=2, top_m=4, candidate_cap=64, seed=0)
    before_nodes = g.n_nodes
    before_base = {rel: g.n_edges(rel) for rel in g.registry.base_ids()}
    miner.augment(g, feats)
    latent_ids = g.registry.latent_ids()
    assert len(latent_ids) == len(miner.paths) > 0
    assert g.n_nodes == before_nodes
    for rel, n in before_base.items():
        assert g.n_edges(rel) == n
    for rel in latent_ids:
        assert g.registry.spec(rel).group is RelationGroup.LATENT
    # augment is idempotent per relation name
    edge_counts = [g.n_edges(rel) for rel in latent_ids]
    miner.augment(g, feats)
    assert [g.n_edges(rel) for rel in g.registry.latent_ids()] == edge_counts


def test_empty_graph_augmentation_adds_empty_relations():
    reg = RelationRegistry()
    reg.register("fork", RelationGroup.PROCESS)
    g = chain_graph(4)
    feats = rng_of(9).normal(size=(g.n_nodes, 8))
    miner = fit_latent_miner([g], [feats], g.registry, rel_dim=4, hops=2,
                             path_budget=1, top_m=2, candidate_cap=16, seed=1)
    graphs, _ = build_graphs([], g.registry)
    assert graphs == []  # nothing to augment on an empty stream
