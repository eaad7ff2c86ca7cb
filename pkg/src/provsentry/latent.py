"""Latent relation mining: composing base relations into indirect links.

Every base relation gets an embedding fitted so its adjacency is
approximated by E diag(r) E^T over entity embeddings E. A composed path of
L attention hops then yields a single vector whose elementwise product
approximates the matrix product of the hopped relations (exact collapse
when E is orthonormal), so scoring candidate pairs as E_u . diag(p) . E_v
never materializes an n x n matrix. Top-scoring destinations reachable by
2..L-hop directed base paths become new latent edges, registered as their
own relations so the aggregator and selector treat them first-class.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ingest import ProvenanceGraph, RelationRegistry

# -- attention over relation embeddings ---------------------------------------


def attention_hop(query_emb: np.ndarray, rel_embs: np.ndarray, weight: np.ndarray,
                  bias: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One soft hop: attend over all relation embeddings with the query.

    Returns (attention weights over relations, blended relation vector).
    """
    q = np.tanh(query_emb @ weight + bias)
    scores = rel_embs @ q
    shifted = scores - scores.max()
    alpha = np.exp(shifted)
    alpha /= alpha.sum()
    return alpha, alpha @ rel_embs


@dataclass
class LatentPath:
    """A composed multi-hop relation: anchor id, per-hop vectors, their product."""

    anchor_rel_id: int
    index: int
    name: str
    hops: list[np.ndarray]
    composed: np.ndarray


def compose_path(anchor_emb: np.ndarray, rel_embs: np.ndarray,
                 head_params: list[tuple[np.ndarray, np.ndarray]],
                 ) -> tuple[list[np.ndarray], np.ndarray, list[np.ndarray]]:
    """Run L sequential attention hops seeded by the anchor embedding.

    Returns (hop vectors, elementwise-product composition, attention weights
    per hop). Composition order is associative by construction.
    """
    query = anchor_emb
    hops: list[np.ndarray] = []
    alphas: list[np.ndarray] = []
    for weight, bias in head_params:
        alpha, query = attention_hop(query, rel_embs, weight, bias)
        hops.append(query)
        alphas.append(alpha)
    composed = hops[0].copy()
    for hop in hops[1:]:
        composed = composed * hop
    return hops, composed, alphas


# -- fitting -------------------------------------------------------------------


def fit_projection(features: np.ndarray, dim: int) -> np.ndarray:
    """Linear map features -> entity embeddings via the top right-singular vectors.

    Projecting a graph's feature rows through it yields near-orthogonal
    entity embedding columns, which is what makes the diagonal collapse a
    good approximation.
    """
    n_feat = features.shape[1]
    dim = min(dim, n_feat)
    # SVD of the (centered-free) feature matrix; V spans the feature space
    _, _, vt = np.linalg.svd(features, full_matrices=False)
    proj = np.zeros((n_feat, dim))
    avail = min(dim, vt.shape[0])
    proj[:, :avail] = vt[:avail].T
    return proj


def fit_relation_embedding(entity_embs: np.ndarray, src: np.ndarray, dst: np.ndarray,
                           counts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares diagonal fit of one relation: A ~ E diag(r) E^T.

    Componentwise solution r_m = (e_m^T A e_m) / (e_m^T e_m)^2, exact when
    E has orthogonal columns. Returns (numerator, denominator) so callers
    can pool the fit across graphs before dividing.
    """
    if len(src) == 0:
        d = entity_embs.shape[1]
        return np.zeros(d), np.zeros(d)
    num = np.einsum("em,e,em->m", entity_embs[src], counts, entity_embs[dst])
    col_sq = np.sum(entity_embs * entity_embs, axis=0)
    return num, col_sq ** 2


# -- lazy scoring ---------------------------------------------------------------


def multi_hop_candidates(graph: ProvenanceGraph, max_hops: int,
                         cap: int = 1024) -> tuple[np.ndarray, np.ndarray]:
    """Directed 2..max_hops reachability over base relations.

    Returns flat (source, destination) index arrays. Direct 1-hop neighbors
    are excluded: latent relations exist to link nodes that interact only
    indirectly. Candidate fan-out per source is capped deterministically by
    smallest destination index.
    """
    n = graph.n_nodes
    base = graph.registry.base_ids()
    succ: list[set[int]] = [set() for _ in range(n)]
    for rel_id in base:
        e = graph.edges_of(rel_id)
        for s, d in zip(e["src"], e["dst"]):
            succ[s].add(int(d))
    src_out: list[int] = []
    dst_out: list[int] = []
    for u in range(n):
        frontier = succ[u]
        seen = {u} | frontier
        found: set[int] = set()
        for _ in range(max_hops - 1):
            nxt: set[int] = set()
            for w in frontier:
                nxt.update(succ[w])
            nxt -= seen
            found.update(nxt)
            seen.update(nxt)
            frontier = nxt
            if not frontier:
                break
        if not found:
            continue
        ordered = sorted(found)[:cap]
        src_out.extend([u] * len(ordered))
        dst_out.extend(ordered)
    return np.array(src_out, dtype=np.int32), np.array(dst_out, dtype=np.int32)


def latent_adjacency(entity_embs: np.ndarray, composed: np.ndarray,
                     cand_src: np.ndarray, cand_dst: np.ndarray, top_m: int,
                     ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Score candidate pairs as E_u . diag(composed) . E_v and keep, per
    source, the top_m with strictly positive score.

    Returns (src, dst, score) arrays sorted by (src, -score, dst).
    """
    if len(cand_src) == 0:
        return (np.zeros(0, np.int32), np.zeros(0, np.int32), np.zeros(0, np.float64))
    scores = np.einsum("em,m,em->e", entity_embs[cand_src], composed, entity_embs[cand_dst])
    keep = scores > 0.0
    src, dst, scores = cand_src[keep], cand_dst[keep], scores[keep]
    if len(src) == 0:
        return (np.zeros(0, np.int32), np.zeros(0, np.int32), np.zeros(0, np.float64))
    order = np.lexsort((dst, -scores, src))
    src, dst, scores = src[order], dst[order], scores[order]
    boundaries = np.flatnonzero(np.diff(src, prepend=src[0] - 1))
    seg_start = np.zeros(len(src), dtype=np.int64)
    seg_start[boundaries] = boundaries
    np.maximum.accumulate(seg_start, out=seg_start)
    rank = np.arange(len(src)) - seg_start
    kept = rank < top_m
    return src[kept], dst[kept], scores[kept]


# -- miner ----------------------------------------------------------------------


@dataclass
class LatentMiner:
    """Fitted latent relation machinery, persisted inside the model file."""

    projection: np.ndarray                 # (feat_dim, rel_dim)
    rel_embs: np.ndarray                   # (n_base_relations, rel_dim)
    base_rel_ids: list[int]
    paths: list[LatentPath]
    head_params: list[list[tuple[np.ndarray, np.ndarray]]]
    hops: int
    top_m: int
    candidate_cap: int

    def entity_embeddings(self, features: np.ndarray) -> np.ndarray:
        return features @ self.projection

    def augment(self, graph: ProvenanceGraph, features: np.ndarray) -> None:
        """Add this miner's latent relations to a graph (idempotent per name)."""
        entity = self.entity_embeddings(features)
        cand_src, cand_dst = multi_hop_candidates(graph, self.hops, self.candidate_cap)
        for path in self.paths:
            rel_id = graph.registry.register_latent(path.name)
            src, dst, score = latent_adjacency(entity, path.composed,
                                               cand_src, cand_dst, self.top_m)
            graph.set_edges(rel_id, src, dst, score, np.zeros(len(src), np.int64))


def fit_latent_miner(graphs: list[ProvenanceGraph], features: list[np.ndarray],
                     registry: RelationRegistry, *, rel_dim: int, hops: int,
                     path_budget: int, top_m: int, candidate_cap: int,
                     seed: int) -> LatentMiner:
    """Fit projection, relation embeddings, and composed paths on training graphs.

    Anchors are the most frequent base relations; the path budget caps the
    number of latent relations below the base relation count.
    """
    stacked = np.concatenate([f for f in features], axis=0)
    projection = fit_projection(stacked, rel_dim)
    rel_dim = projection.shape[1]

    base_ids = registry.base_ids()
    num = np.zeros((len(base_ids), rel_dim))
    den = np.zeros((len(base_ids), rel_dim))
    edge_totals = np.zeros(len(base_ids))
    for graph, feats in zip(graphs, features):
        entity = feats @ projection
        for row, rel_id in enumerate(base_ids):
            e = graph.edges_of(rel_id)
            n_add, d_add = fit_relation_embedding(entity, e["src"], e["dst"], e["count"])
            num[row] += n_add
            den[row] += d_add
            edge_totals[row] += e["count"].sum()
    rel_embs = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    norms = np.linalg.norm(rel_embs, axis=1, keepdims=True)
    rel_embs = np.divide(rel_embs, norms, out=rel_embs, where=norms > 0)

    n_paths = min(path_budget, len(base_ids))
    anchor_rows = np.lexsort((np.arange(len(base_ids)), -edge_totals))[:n_paths]

    rng = np.random.default_rng(seed)
    paths: list[LatentPath] = []
    head_params: list[list[tuple[np.ndarray, np.ndarray]]] = []
    for k, row in enumerate(anchor_rows):
        anchor_id = base_ids[int(row)]
        heads = [(rng.normal(0.0, 1.0 / np.sqrt(rel_dim), size=(rel_dim, rel_dim)),
                  rng.normal(0.0, 0.1, size=rel_dim)) for _ in range(hops)]
        hops_vecs, composed, _ = compose_path(rel_embs[int(row)], rel_embs, heads)
        anchor_name = registry.spec(anchor_id).name
        paths.append(LatentPath(anchor_rel_id=anchor_id, index=k,
                                name=f"latent_{anchor_name}_{k}",
                                hops=hops_vecs, composed=composed))
        head_params.append(heads)
    return LatentMiner(projection=projection, rel_embs=rel_embs,
                       base_rel_ids=list(base_ids), paths=paths,
                       head_params=head_params, hops=hops, top_m=top_m,
                       candidate_cap=candidate_cap)
