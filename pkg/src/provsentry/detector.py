"""Three-way detector: relation-filtered GNN, classifier head, anomaly forest.

Each GNN layer scores every incident edge with that layer's distance
perceptron, keeps the closest fraction p of each node's neighbors per
relation (p owned by the bandit selector), mean-aggregates the survivors
through a per-relation linear map, and fuses the relation blocks with a
threshold-weighted concat layer. Training couples the classifier
cross-entropy with the fused-embedding similarity loss and a global
parameter-norm penalty. After the weights settle, an isolation forest is
fitted on benign training embeddings so low-confidence predictions can
still be flagged as anomalous instead of silently passed through.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .binio import (pack_json, pack_section, read_sections, unpack_json,
                    unpack_section, write_sections)
from .config import PipelineConfig
from .iforest import IsolationForest
from .ingest import Label, ProvenanceGraph, RelationRegistry
from .latent import LatentMiner, LatentPath, fit_latent_miner
from .nn import (Adam, Params, add_linear, cross_entropy, l2_norm,
                 l2_norm_backward, linear_backward, linear_forward, softmax,
                 zero_grads)
from .selector import SelectorSlot
from .similarity import (init_similarity_params, pair_distance,
                         scorer_backward, scorer_forward, similarity_backward,
                         similarity_forward)


class Verdict(str, Enum):
    BENIGN = "Benign"
    MALICIOUS = "Malicious"
    ANOMALOUS = "Anomalous"


# -- graph bundling -------------------------------------------------------------


@dataclass
class _RelAdjacency:
    """Flattened undirected adjacency of one relation, ready for selection."""

    indptr: np.ndarray    # (n+1,) int64
    centers: np.ndarray   # int32, row index per incident edge
    neighbors: np.ndarray  # int32
    deg: np.ndarray       # (n,) int64


@dataclass
class GraphBundle:
    graph: ProvenanceGraph
    features: np.ndarray
    adjacency: list[_RelAdjacency]  # aligned with the model's relation order
    topo_indptr: np.ndarray
    topo_cols: np.ndarray
    topo_counts: np.ndarray


def bundle_graph(graph: ProvenanceGraph, features: np.ndarray,
                 relation_names: list[str]) -> GraphBundle:
    """Precompute per-relation incident adjacency in the model's order.

    Relations the graph has never seen contribute empty adjacency (their
    aggregation block is the zero vector for every node).
    """
    n = graph.n_nodes
    adjacency = []
    for name in relation_names:
        if name in graph.registry and graph.n_edges(graph.registry.id_of(name)) > 0:
            csr = graph.csr(graph.registry.id_of(name), "incident")
            deg = np.diff(csr.indptr)
            centers = np.repeat(np.arange(n, dtype=np.int32), deg)
            adjacency.append(_RelAdjacency(csr.indptr, centers, csr.cols, deg))
        else:
            adjacency.append(_RelAdjacency(np.zeros(n + 1, np.int64),
                                           np.zeros(0, np.int32),
                                           np.zeros(0, np.int32),
                                           np.zeros(n, np.int64)))
    topo = graph.topology_rows()
    return GraphBundle(graph, np.asarray(features, dtype=np.float64),
                       adjacency, topo.indptr, topo.cols, topo.counts)


# -- parameters / selector slots ------------------------------------------------


def init_detector_params(rng: np.random.Generator, feat_dim: int, hidden_dim: int,
                         topo_dim: int, n_relations: int, n_layers: int) -> Params:
    params = init_similarity_params(rng, feat_dim, hidden_dim, topo_dim, n_layers)
    for layer in range(1, n_layers + 1):
        for j in range(n_relations):
            add_linear(params, rng, f"gnn{layer}.rel{j}", hidden_dim, hidden_dim)
        add_linear(params, rng, f"gnn{layer}.all", hidden_dim * (n_relations + 1), hidden_dim)
    add_linear(params, rng, "cls", hidden_dim, 2)
    return params


def make_slots(n_relations: int, n_layers: int, cfg: PipelineConfig,
               active_relations: list[bool] | None = None) -> list[SelectorSlot]:
    """One bandit slot per (relation, layer).

    Relations with no edges at any training node observe a constant zero
    distance, which never terminates the bandit; those slots are frozen at
    p=1 up front. With the selector disabled every slot is frozen at 1.
    """
    slots = []
    for layer in range(1, n_layers + 1):
        for j in range(n_relations):
            slot = SelectorSlot(rel_id=j, layer=layer, tau=cfg.rl_tau,
                                p_min=cfg.effective_p_min(), p=cfg.rl_p_init)
            dead = active_relations is not None and not active_relations[j]
            if not cfg.rl_enabled or dead:
                slot.p = 1.0
                slot.frozen = True
            slots.append(slot)
    return slots


# -- forward / backward ----------------------------------------------------------


def _topp_mask(adj: _RelAdjacency, dist: np.ndarray, p: float,
               ) -> tuple[np.ndarray, np.ndarray]:
    """Boolean keep-mask over flat edges plus kept-count per center node.

    Keeps the max(1, ceil(p * deg)) closest neighbors of every node;
    distance ties break toward the smaller neighbor index.
    """
    n_edges = len(dist)
    k = np.minimum(np.maximum(1, np.ceil(p * adj.deg - 1e-12).astype(np.int64)), adj.deg)
    if n_edges == 0:
        return np.zeros(0, dtype=bool), k
    order = np.lexsort((adj.neighbors, dist, adj.centers))
    rank = np.arange(n_edges, dtype=np.int64) - np.repeat(adj.indptr[:-1], adj.deg)
    mask = np.zeros(n_edges, dtype=bool)
    mask[order[rank < np.repeat(k, adj.deg)]] = True
    return mask, k


def gnn_layer_forward(params: Params, layer: int, h_prev: np.ndarray,
                      bundle: GraphBundle, p_table: dict[tuple[int, int], float],
                      ) -> tuple[np.ndarray, dict]:
    n, d = h_prev.shape
    scored, logits, scorer_cache = scorer_forward(params, layer, h_prev)
    blocks = [h_prev]
    rels = []
    for j, adj in enumerate(bundle.adjacency):
        p = p_table[(j, layer)]
        if len(adj.neighbors) == 0:
            rels.append({"empty": True, "adj": adj,
                         "dist": np.zeros(0), "mask": np.zeros(0, dtype=bool)})
            blocks.append(np.zeros((n, d)))
            continue
        dist = pair_distance(scored, adj.centers, adj.neighbors)
        mask, kept = _topp_mask(adj, dist, p)
        sel_c = adj.centers[mask]
        sel_n = adj.neighbors[mask]
        agg = np.zeros((n, d))
        np.add.at(agg, sel_c, h_prev[sel_n])
        denom = np.maximum(kept, 1).astype(np.float64)
        agg /= denom[:, None]
        pre = linear_forward(agg, params, f"gnn{layer}.rel{j}")
        active = (adj.deg > 0)[:, None]
        hr = np.maximum(pre, 0.0) * active
        rels.append({"empty": False, "adj": adj, "dist": dist, "mask": mask,
                     "sel_c": sel_c, "sel_n": sel_n, "denom": denom,
                     "agg": agg, "pre": pre, "active": active})
        blocks.append(p * hr)
    concat = np.concatenate(blocks, axis=1)
    pre_all = linear_forward(concat, params, f"gnn{layer}.all")
    h = np.maximum(pre_all, 0.0)
    cache = {"h_prev": h_prev, "logits": logits, "scorer_cache": scorer_cache,
             "rels": rels, "concat": concat, "pre_all": pre_all}
    return h, cache


def gnn_layer_backward(dh: np.ndarray, cache: dict, params: Params, grads: Params,
                       layer: int, p_table: dict[tuple[int, int], float]) -> np.ndarray:
    """Backprop one layer; neighbor selection is treated as fixed."""
    dpre_all = dh * (cache["pre_all"] > 0.0)
    dconcat = linear_backward(dpre_all, cache["concat"], params, grads, f"gnn{layer}.all")
    d = cache["h_prev"].shape[1]
    dh_prev = dconcat[:, :d].copy()
    for j, rc in enumerate(cache["rels"]):
        if rc["empty"]:
            continue
        dhr = p_table[(j, layer)] * dconcat[:, d * (j + 1): d * (j + 2)]
        dpre = dhr * ((rc["pre"] > 0.0) & rc["active"])
        dagg = linear_backward(dpre, rc["agg"], params, grads, f"gnn{layer}.rel{j}")
        np.add.at(dh_prev, rc["sel_n"], dagg[rc["sel_c"]] / rc["denom"][rc["sel_c"], None])
    return dh_prev


def detector_forward(params: Params, bundle: GraphBundle,
                     p_table: dict[tuple[int, int], float], n_layers: int) -> dict:
    h0, sim_cache = similarity_forward(params, bundle.features, bundle.topo_indptr,
                                       bundle.topo_cols, bundle.topo_counts)
    layers = []
    h = h0
    for layer in range(1, n_layers + 1):
        h, cache = gnn_layer_forward(params, layer, h, bundle, p_table)
        layers.append(cache)
    return {"h0": h0, "sim_cache": sim_cache, "layers": layers, "z": h}


def detector_loss_and_grads(params: Params, forwards: list[dict],
                            batches: list[tuple[np.ndarray, np.ndarray]], *,
                            lambda_similarity: float, lambda_reg: float,
                            p_table: dict[tuple[int, int], float], n_layers: int,
                            compute_grads: bool = True,
                            ) -> tuple[dict[str, float], Params | None]:
    """Pooled training loss over (rows, labels) batches, one per graph.

    Rows may repeat (oversampling); each occurrence contributes its own
    cross-entropy term and gradient. The similarity term reads the first
    layer's class head evaluated on the fused embeddings.
    """
    z_rows = [fw["z"][rows] for fw, (rows, _) in zip(forwards, batches)]
    labels = np.concatenate([lab for _, lab in batches])
    logits_gnn = np.concatenate([linear_forward(zr, params, "cls") for zr in z_rows])
    loss_gnn, dlogits_gnn = cross_entropy(logits_gnn, labels)
    logits_sim = np.concatenate(
        [fw["layers"][0]["logits"][rows] for fw, (rows, _) in zip(forwards, batches)])
    loss_sim, dlogits_sim = cross_entropy(logits_sim, labels)
    reg = l2_norm(params)
    parts = {"total": loss_gnn + lambda_similarity * loss_sim + lambda_reg * reg,
             "gnn": loss_gnn, "similarity": loss_sim, "reg": reg}
    if not compute_grads:
        return parts, None

    grads = zero_grads(params)
    offset = 0
    for fw, (rows, _), zr in zip(forwards, batches, z_rows):
        m = len(rows)
        dz_rows = linear_backward(dlogits_gnn[offset:offset + m], zr, params, grads, "cls")
        dsim_rows = lambda_similarity * dlogits_sim[offset:offset + m]
        offset += m

        dh = np.zeros_like(fw["z"])
        np.add.at(dh, rows, dz_rows)
        for layer in range(n_layers, 0, -1):
            dh = gnn_layer_backward(dh, fw["layers"][layer - 1], params, grads,
                                    layer, p_table)
        cache1 = fw["layers"][0]
        dlogits_full = np.zeros_like(cache1["logits"])
        np.add.at(dlogits_full, rows, dsim_rows)
        dh += scorer_backward(np.zeros_like(fw["h0"]), dlogits_full,
                              cache1["scorer_cache"], params, grads, 1)
        similarity_backward(dh, fw["sim_cache"], params, grads)
    l2_norm_backward(params, grads, lambda_reg)
    return parts, grads


def selector_states(forwards: list[dict], train_masks: list[np.ndarray],
                    n_relations: int, n_layers: int) -> dict[tuple[int, int], float]:
    """Average selected-neighbor distance per (relation, layer), pooled
    over all graphs: summed selected distances at training-node centers
    divided by the total training-node count."""
    total_train = sum(int(m.sum()) for m in train_masks)
    if total_train == 0:
        raise ValueError("selector state needs at least one training node")
    states = {}
    for layer in range(1, n_layers + 1):
        for j in range(n_relations):
            num = 0.0
            for fw, train_mask in zip(forwards, train_masks):
                rc = fw["layers"][layer - 1]["rels"][j]
                if rc["empty"]:
                    continue
                keep = rc["mask"] & train_mask[rc["adj"].centers]
                num += float(rc["dist"][keep].sum())
            states[(j, layer)] = num / total_train
    return states


# -- training ---------------------------------------------------------------------


@dataclass
class SplitPlan:
    """Node index sets per graph driving one training run."""

    train_rows: list[np.ndarray]
    train_labels: list[np.ndarray]
    batch_rows: list[np.ndarray]      # oversampled to 1:1 classes
    batch_labels: list[np.ndarray]
    fit_benign_rows: list[np.ndarray]   # forest fitting set
    val_benign_rows: list[np.ndarray]   # anomaly threshold calibration set


def plan_split(graphs: list[ProvenanceGraph], labels_by_id: dict[str, Label],
               cfg: PipelineConfig, rng: np.random.Generator) -> SplitPlan:
    """Sample the label budget and benign splits, then oversample to 1:1.

    Only a malicious_budget fraction of the malicious nodes keeps its label
    for training; benign nodes split into a training slice and a held-out
    calibration slice. The minority class is tiled (then truncated) until
    both classes contribute equally many batch rows.
    """
    benign: list[tuple[int, int]] = []
    malicious: list[tuple[int, int]] = []
    for gi, graph in enumerate(graphs):
        for ni, node in enumerate(graph.nodes):
            lab = labels_by_id.get(node.id)
            if lab == Label.MALICIOUS:
                malicious.append((gi, ni))
            elif lab == Label.BENIGN:
                benign.append((gi, ni))
    if not malicious or not benign:
        raise ValueError("training needs labeled nodes of both classes")

    mal_take = max(1, round(cfg.malicious_budget * len(malicious)))
    mal_sel = [malicious[i] for i in rng.permutation(len(malicious))[:mal_take]]
    ben_perm = [benign[i] for i in rng.permutation(len(benign))]
    n_ben_train = max(1, round(cfg.benign_train_frac * len(benign)))
    n_ben_val = round(cfg.benign_val_frac * len(benign))
    ben_train = ben_perm[:n_ben_train]
    ben_val = ben_perm[n_ben_train:n_ben_train + n_ben_val]

    if len(mal_sel) < len(ben_train):
        reps = -(-len(ben_train) // len(mal_sel))
        mal_rows = (mal_sel * reps)[:len(ben_train)]
        ben_rows = list(ben_train)
    else:
        reps = -(-len(mal_sel) // len(ben_train))
        ben_rows = (ben_train * reps)[:len(mal_sel)]
        mal_rows = list(mal_sel)

    def group(pairs: list[tuple[int, int]], labels: list[int],
              ) -> tuple[list[np.ndarray], list[np.ndarray]]:
        rows = [[] for _ in graphs]
        labs = [[] for _ in graphs]
        for (gi, ni), lab in zip(pairs, labels):
            rows[gi].append(ni)
            labs[gi].append(lab)
        return ([np.asarray(r, dtype=np.int64) for r in rows],
                [np.asarray(l, dtype=np.int64) for l in labs])

    train_pairs = ben_train + mal_sel
    train_labs = [0] * len(ben_train) + [1] * len(mal_sel)
    batch_pairs = ben_rows + mal_rows
    batch_labs = [0] * len(ben_rows) + [1] * len(mal_rows)

    train_rows, train_labels = group(train_pairs, train_labs)
    batch_rows, batch_labels = group(batch_pairs, batch_labs)
    fit_rows, _ = group(ben_train, [0] * len(ben_train))
    val_rows, _ = group(ben_val, [0] * len(ben_val))
    return SplitPlan(train_rows, train_labels, batch_rows, batch_labels,
                     fit_rows, val_rows)


@dataclass
class TrainHistory:
    losses: list[float] = field(default_factory=list)
    gnn_losses: list[float] = field(default_factory=list)
    similarity_losses: list[float] = field(default_factory=list)
    epochs: int = 0
    all_frozen_epoch: int | None = None


@dataclass
class DetectionModel:
    config: PipelineConfig
    registry: RelationRegistry
    relation_names: list[str]
    params: Params
    miner: LatentMiner | None
    slots: list[SelectorSlot]
    forest: IsolationForest
    anomaly_threshold: float

    def p_table(self) -> dict[tuple[int, int], float]:
        return {(s.rel_id, s.layer): s.p for s in self.slots}

    def save(self, path: str | Path) -> None:
        write_sections(path, [
            _pack_similarity(self.params),
            _pack_relations(self.registry, self.relation_names, self.miner),
            _pack_gnn(self.params),
            _pack_selector(self.slots, self.relation_names, self.anomaly_threshold),
            self.forest.to_blob(),
            pack_json(self.config.to_dict()),
        ])

    @classmethod
    def load(cls, path: str | Path) -> "DetectionModel":
        sim, rel, gnn, sel, forest_blob, cfg_blob = read_sections(path)
        params: Params = {}
        params.update(unpack_section(sim)[1])
        registry, relation_names, miner = _unpack_relations(rel)
        params.update(unpack_section(gnn)[1])
        slots, threshold = _unpack_selector(sel, relation_names)
        return cls(config=PipelineConfig.from_dict(unpack_json(cfg_blob)),
                   registry=registry, relation_names=relation_names,
                   params=params, miner=miner, slots=slots,
                   forest=IsolationForest.from_blob(forest_blob),
                   anomaly_threshold=threshold)


def train_detector(graphs: list[ProvenanceGraph], features: list[np.ndarray],
                   labels_by_id: dict[str, Label], cfg: PipelineConfig, seed: int,
                   ) -> tuple[DetectionModel, TrainHistory]:
    """Full training run: latent mining, joint optimization with the bandit
    selector, then anomaly-forest fitting and threshold calibration."""
    cfg.validate()
    if not graphs:
        raise ValueError("no graphs to train on")
    rng = np.random.default_rng(seed)
    registry = graphs[0].registry

    features = [np.asarray(f, dtype=np.float64) for f in features]
    miner = None
    if cfg.path_budget > 0 and registry.base_ids():
        miner = fit_latent_miner(graphs, features, registry,
                                 rel_dim=cfg.relation_dim, hops=cfg.path_hops,
                                 path_budget=cfg.path_budget, top_m=cfg.latent_top_m,
                                 candidate_cap=cfg.latent_candidate_cap, seed=seed)
        for graph, feats in zip(graphs, features):
            miner.augment(graph, feats)

    relation_names = [registry.spec(rid).name for rid in registry.all_ids()]
    bundles = [bundle_graph(g, f, relation_names) for g, f in zip(graphs, features)]

    split = plan_split(graphs, labels_by_id, cfg, rng)
    train_masks = []
    for graph, rows in zip(graphs, split.train_rows):
        mask = np.zeros(graph.n_nodes, dtype=bool)
        mask[rows] = True
        train_masks.append(mask)
    batches = list(zip(split.batch_rows, split.batch_labels))

    # a slot can only terminate if its relation shows the bandit a live
    # signal, i.e. some training node has incident edges under it
    active = [any((b.adjacency[j].deg[m] > 0).any()
                  for b, m in zip(bundles, train_masks))
              for j in range(len(relation_names))]

    topo_dim = max(g.n_nodes for g in graphs)
    params = init_detector_params(rng, features[0].shape[1], cfg.hidden_dim,
                                  topo_dim, len(relation_names), cfg.gnn_layers)
    slots = make_slots(len(relation_names), cfg.gnn_layers, cfg, active)

    adam = Adam(params, lr=cfg.learning_rate)
    history = TrainHistory()
    best = np.inf
    patience = 0
    for epoch in range(cfg.max_epochs):
        all_labels = np.concatenate(split.batch_labels)
        assert int((all_labels == 0).sum()) == int((all_labels == 1).sum()), \
            "training batch lost its 1:1 class balance"
        p_table = {(s.rel_id, s.layer): s.p for s in slots}
        forwards = [detector_forward(params, b, p_table, cfg.gnn_layers)
                    for b in bundles]
        parts, grads = detector_loss_and_grads(
            params, forwards, batches,
            lambda_similarity=cfg.lambda_similarity, lambda_reg=cfg.lambda_reg,
            p_table=p_table, n_layers=cfg.gnn_layers)
        adam.step(grads)

        states = selector_states(forwards, train_masks,
                                 len(relation_names), cfg.gnn_layers)
        for slot in slots:
            slot.step(states[(slot.rel_id, slot.layer)])

        history.losses.append(parts["total"])
        history.gnn_losses.append(parts["gnn"])
        history.similarity_losses.append(parts["similarity"])
        history.epochs = epoch + 1
        frozen = all(s.frozen for s in slots)
        if frozen and history.all_frozen_epoch is None:
            history.all_frozen_epoch = epoch + 1
        if best - parts["total"] >= cfg.plateau_eps:
            best = parts["total"]
            patience = 0
        else:
            patience += 1
        if frozen and patience >= cfg.plateau_patience:
            break

    p_table = {(s.rel_id, s.layer): s.p for s in slots}
    forwards = [detector_forward(params, b, p_table, cfg.gnn_layers) for b in bundles]
    fit_chunks = [fw["z"][rows] for fw, rows in zip(forwards, split.fit_benign_rows)
                  if len(rows)]
    forest = IsolationForest(n_trees=cfg.forest_trees, subsample=cfg.forest_subsample)
    forest.fit(np.concatenate(fit_chunks), seed=seed)
    val_chunks = [fw["z"][rows] for fw, rows in zip(forwards, split.val_benign_rows)
                  if len(rows)]
    calib = np.concatenate(val_chunks) if val_chunks else np.concatenate(fit_chunks)
    anomaly_threshold = float(np.quantile(forest.score(calib), cfg.anomaly_quantile))

    model = DetectionModel(config=cfg, registry=registry,
                           relation_names=relation_names, params=params,
                           miner=miner, slots=slots, forest=forest,
                           anomaly_threshold=anomaly_threshold)
    return model, history


# -- inference ----------------------------------------------------------------------


@dataclass
class DetectionRecord:
    node_id: str
    verdict: Verdict
    p_benign: float
    p_malicious: float
    anomaly_score: float
    confidence: float

    def to_dict(self) -> dict:
        return {"node_id": self.node_id, "verdict": self.verdict.value,
                "p_benign": self.p_benign, "p_malicious": self.p_malicious,
                "anomaly_score": self.anomaly_score, "confidence": self.confidence}

    @classmethod
    def from_dict(cls, data: dict) -> "DetectionRecord":
        return cls(node_id=data["node_id"], verdict=Verdict(data["verdict"]),
                   p_benign=float(data["p_benign"]),
                   p_malicious=float(data["p_malicious"]),
                   anomaly_score=float(data["anomaly_score"]),
                   confidence=float(data["confidence"]))


def fuse_decision(class_probs: np.ndarray, anomaly_score: float,
                  confidence_threshold: float, anomaly_threshold: float) -> Verdict:
    """High-confidence class wins; otherwise the anomaly detector may
    override with Anomalous; otherwise fall back to the argmax class."""
    probs = np.asarray(class_probs, dtype=np.float64)
    leader = Verdict.MALICIOUS if int(np.argmax(probs)) == 1 else Verdict.BENIGN
    if float(probs.max()) >= confidence_threshold:
        return leader
    if float(anomaly_score) >= anomaly_threshold:
        return Verdict.ANOMALOUS
    return leader


def embed_graph(model: DetectionModel, graph: ProvenanceGraph,
                features: np.ndarray) -> np.ndarray:
    """Final per-node embeddings under the trained model."""
    if not model.forest.fitted:
        raise RuntimeError("model is not trained")
    features = np.asarray(features, dtype=np.float64)
    if model.miner is not None:
        model.miner.augment(graph, features)
    bundle = bundle_graph(graph, features, model.relation_names)
    return detector_forward(model.params, bundle, model.p_table(),
                            model.config.gnn_layers)["z"]


def classify_graph(model: DetectionModel, graph: ProvenanceGraph,
                   features: np.ndarray) -> np.ndarray:
    """Two-class probabilities per node (columns: benign, malicious)."""
    z = embed_graph(model, graph, features)
    return softmax(linear_forward(z, model.params, "cls"))


def detect_graph(model: DetectionModel, graph: ProvenanceGraph,
                 features: np.ndarray) -> tuple[list[DetectionRecord], np.ndarray]:
    """Run the fused three-way decision over one graph.

    Returns the per-node records plus the final embeddings (reused by the
    embedding exporter and chain reconstruction).
    """
    z = embed_graph(model, graph, features)
    probs = softmax(linear_forward(z, model.params, "cls"))
    scores = model.forest.score(z)
    records = []
    for i, node in enumerate(graph.nodes):
        verdict = fuse_decision(probs[i], scores[i],
                                model.config.confidence_threshold,
                                model.anomaly_threshold)
        records.append(DetectionRecord(node_id=node.id, verdict=verdict,
                                       p_benign=float(probs[i, 0]),
                                       p_malicious=float(probs[i, 1]),
                                       anomaly_score=float(scores[i]),
                                       confidence=float(probs[i].max())))
    return records, z


# -- model serialization helpers -----------------------------------------------------


_SIM_PREFIXES = ("feat.", "topo.", "fuse.", "fusef.", "score")


def _pack_similarity(params: Params) -> bytes:
    arrays = {k: v for k, v in params.items() if k.startswith(_SIM_PREFIXES)}
    return pack_section({}, arrays)


def _pack_gnn(params: Params) -> bytes:
    arrays = {k: v for k, v in params.items()
              if k.startswith("gnn") or k.startswith("cls.")}
    return pack_section({}, arrays)


def _pack_relations(registry: RelationRegistry, relation_names: list[str],
                    miner: LatentMiner | None) -> bytes:
    meta = {"registry": registry.to_dict(), "relation_names": relation_names,
            "miner": None}
    arrays: dict[str, np.ndarray] = {}
    if miner is not None:
        meta["miner"] = {"hops": miner.hops, "top_m": miner.top_m,
                         "candidate_cap": miner.candidate_cap,
                         "base_rel_ids": list(miner.base_rel_ids),
                         "paths": [{"anchor_rel_id": p.anchor_rel_id,
                                    "index": p.index, "name": p.name}
                                   for p in miner.paths]}
        arrays["projection"] = miner.projection
        arrays["rel_embs"] = miner.rel_embs
        for k, (path, heads) in enumerate(zip(miner.paths, miner.head_params)):
            arrays[f"path{k}.composed"] = path.composed
            for h, vec in enumerate(path.hops):
                arrays[f"path{k}.hop{h}"] = vec
            for h, (w, b) in enumerate(heads):
                arrays[f"path{k}.head{h}.W"] = w
                arrays[f"path{k}.head{h}.b"] = b
    return pack_section(meta, arrays)


def _unpack_relations(blob: bytes) -> tuple[RelationRegistry, list[str], LatentMiner | None]:
    meta, arrays = unpack_section(blob)
    registry = RelationRegistry.from_dict(meta["registry"])
    miner = None
    if meta["miner"] is not None:
        info = meta["miner"]
        paths = []
        head_params = []
        for k, pmeta in enumerate(info["paths"]):
            hops = []
            heads = []
            for h in range(info["hops"]):
                hops.append(arrays[f"path{k}.hop{h}"])
                heads.append((arrays[f"path{k}.head{h}.W"], arrays[f"path{k}.head{h}.b"]))
            paths.append(LatentPath(anchor_rel_id=pmeta["anchor_rel_id"],
                                    index=pmeta["index"], name=pmeta["name"],
                                    hops=hops, composed=arrays[f"path{k}.composed"]))
            head_params.append(heads)
        miner = LatentMiner(projection=arrays["projection"],
                            rel_embs=arrays["rel_embs"],
                            base_rel_ids=list(info["base_rel_ids"]),
                            paths=paths, head_params=head_params,
                            hops=info["hops"], top_m=info["top_m"],
                            candidate_cap=info["candidate_cap"])
    return registry, list(meta["relation_names"]), miner


def _pack_selector(slots: list[SelectorSlot], relation_names: list[str],
                   anomaly_threshold: float) -> bytes:
    meta = {"anomaly_threshold": anomaly_threshold,
            "slots": [{"relation": relation_names[s.rel_id], "layer": s.layer,
                       "tau": s.tau, "p_min": s.p_min, "p": s.p,
                       "direction": s.direction, "rewards": list(s.rewards),
                       "epochs": s.epochs, "last_state": s.last_state,
                       "frozen": s.frozen}
                      for s in slots]}
    return pack_section(meta, {})


def _unpack_selector(blob: bytes, relation_names: list[str],
                     ) -> tuple[list[SelectorSlot], float]:
    meta, _ = unpack_section(blob)
    slots = []
    for entry in meta["slots"]:
        slots.append(SelectorSlot(rel_id=relation_names.index(entry["relation"]),
                                  layer=entry["layer"], tau=entry["tau"],
                                  p_min=entry["p_min"], p=entry["p"],
                                  direction=entry["direction"],
                                  rewards=list(entry["rewards"]),
                                  epochs=entry["epochs"],
                                  last_state=entry["last_state"],
                                  frozen=entry["frozen"]))
    return slots, float(meta["anomaly_threshold"])
