"""Camouflage-resistant node fusion and label-aware neighbor distances.

Two branches embed every node: a feature branch (perceptron over the token
features) and a topology branch that consumes the node's sparse
relation-summed adjacency row, so nodes with identical neighbor sets get
identical topology embeddings. The branches fuse through a bounded
residual combiner. A per-GNN-layer scoring perceptron then maps fused
embeddings to a space where the L1 distance between a node and its
neighbor measures label agreement; its 2-class head is trained with the
similarity loss so the metric stays label-aware.
"""

from __future__ import annotations

import numpy as np

from .nn import (Params, add_linear, add_mlp, cross_entropy, linear_backward,
                 linear_forward, mlp_backward, mlp_forward)


def init_similarity_params(rng: np.random.Generator, feat_dim: int, hidden_dim: int,
                           topo_dim: int, n_layers: int) -> Params:
    params: Params = {}
    add_mlp(params, rng, "feat", feat_dim, hidden_dim, hidden_dim)
    add_mlp(params, rng, "topo", topo_dim, hidden_dim, hidden_dim)
    params["fuse.W"] = rng.normal(0.0, np.sqrt(1.0 / hidden_dim), size=(2 * hidden_dim, hidden_dim))
    add_mlp(params, rng, "fusef", hidden_dim, hidden_dim, hidden_dim)
    for layer in range(1, n_layers + 1):
        add_linear(params, rng, f"score{layer}.map", hidden_dim, hidden_dim)
        add_linear(params, rng, f"score{layer}.cls", hidden_dim, 2)
    return params


# -- topology branch ----------------------------------------------------------


def topo_rows_matmul(indptr: np.ndarray, cols: np.ndarray, counts: np.ndarray,
                     weight: np.ndarray, n_rows: int) -> np.ndarray:
    """Sparse-row x dense product: row i gets sum_j counts_ij * W[cols_ij % topo_dim].

    Equivalent to A_dense @ W when every column index fits the weight's
    leading dimension; larger graphs at inference fold indices by modulo.
    """
    topo_dim = weight.shape[0]
    out = np.zeros((n_rows, weight.shape[1]))
    if len(cols) == 0:
        return out
    rows = np.repeat(np.arange(n_rows), np.diff(indptr))
    contrib = counts[:, None] * weight[cols % topo_dim]
    np.add.at(out, rows, contrib)
    return out


def _topo_weight_grad(indptr: np.ndarray, cols: np.ndarray, counts: np.ndarray,
                      dout: np.ndarray, topo_dim: int) -> np.ndarray:
    grad = np.zeros((topo_dim, dout.shape[1]))
    if len(cols) == 0:
        return grad
    rows = np.repeat(np.arange(dout.shape[0]), np.diff(indptr))
    np.add.at(grad, cols % topo_dim, counts[:, None] * dout[rows])
    return grad


# -- fused embedding ----------------------------------------------------------


def similarity_forward(params: Params, features: np.ndarray, topo_indptr: np.ndarray,
                       topo_cols: np.ndarray, topo_counts: np.ndarray,
                       ) -> tuple[np.ndarray, dict]:
    """Fuse feature and topology branches into the layer-0 embedding."""
    n = features.shape[0]
    h_feat, feat_cache = mlp_forward(features, params, "feat")

    topo_pre = topo_rows_matmul(topo_indptr, topo_cols, topo_counts,
                                params["topo.l1.W"], n) + params["topo.l1.b"]
    topo_hidden = np.maximum(topo_pre, 0.0)
    h_topo = linear_forward(topo_hidden, params, "topo.l2")

    concat = np.concatenate([h_topo, h_feat], axis=1)
    fuse_pre = concat @ params["fuse.W"] + h_topo + h_feat
    fused = np.tanh(fuse_pre)
    h0, fusef_cache = mlp_forward(fused, params, "fusef")
    cache = {
        "feat_cache": feat_cache, "fusef_cache": fusef_cache,
        "topo_pre": topo_pre, "topo_hidden": topo_hidden,
        "topo_indptr": topo_indptr, "topo_cols": topo_cols, "topo_counts": topo_counts,
        "concat": concat, "fused": fused,
    }
    return h0, cache


def similarity_backward(dh0: np.ndarray, cache: dict, params: Params, grads: Params) -> None:
    dfused = mlp_backward(dh0, cache["fusef_cache"], params, grads, "fusef")
    dpre = dfused * (1.0 - cache["fused"] ** 2)
    grads["fuse.W"] += cache["concat"].T @ dpre
    dconcat = dpre @ params["fuse.W"].T
    hidden = params["fuse.W"].shape[1]
    dh_topo = dconcat[:, :hidden] + dpre
    dh_feat = dconcat[:, hidden:] + dpre

    mlp_backward(dh_feat, cache["feat_cache"], params, grads, "feat")

    dtopo_hidden = linear_backward(dh_topo, cache["topo_hidden"], params, grads, "topo.l2")
    dtopo_pre = dtopo_hidden * (cache["topo_pre"] > 0.0)
    grads["topo.l1.W"] += _topo_weight_grad(
        cache["topo_indptr"], cache["topo_cols"], cache["topo_counts"],
        dtopo_pre, params["topo.l1.W"].shape[0])
    grads["topo.l1.b"] += dtopo_pre.sum(axis=0)


# -- layer-wise distance scorer ------------------------------------------------


def scorer_forward(params: Params, layer: int, h: np.ndarray) -> tuple[np.ndarray, np.ndarray, dict]:
    """Return (scored, class_logits, cache) for GNN layer ``layer``.

    ``scored`` is the bounded representation distances are measured in;
    the class head on top of it feeds the layer-1 similarity loss.
    """
    pre = linear_forward(h, params, f"score{layer}.map")
    scored = np.tanh(pre)
    logits = linear_forward(scored, params, f"score{layer}.cls")
    return scored, logits, {"h": h, "scored": scored}


def scorer_backward(dscored: np.ndarray, dlogits: np.ndarray | None, cache: dict,
                    params: Params, grads: Params, layer: int) -> np.ndarray:
    total = dscored.copy()
    if dlogits is not None:
        total += linear_backward(dlogits, cache["scored"], params, grads, f"score{layer}.cls")
    dpre = total * (1.0 - cache["scored"] ** 2)
    return linear_backward(dpre, cache["h"], params, grads, f"score{layer}.map")


def pair_distance(scored: np.ndarray, left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """L1 distance between scored representations of node index pairs."""
    return np.abs(scored[left] - scored[right]).sum(axis=1)


def similarity_loss(logits: np.ndarray, labels: np.ndarray,
                    ) -> tuple[float, np.ndarray]:
    """Mean 2-class cross-entropy over the (oversampled) batch rows."""
    return cross_entropy(logits, labels)
