"""Isolation forest over node embeddings, built from scratch.

Embeddings are standardized per dimension before fitting and scoring, so
scores are invariant to affine rescaling of any input dimension. Path
lengths at unsplittable or height-capped leaves extend by the average
unsuccessful-search depth c(size), computed with exact harmonic numbers
(so c(2) is exactly 1). The anomaly score is 2^(-E[path]/c(psi)) and lies
strictly inside (0, 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .binio import pack_arrays, unpack_arrays


def average_path_length(n: int) -> float:
    """c(n) = 2 H(n-1) - 2 (n-1)/n with exact harmonic numbers; 0 for n <= 1."""
    if n <= 1:
        return 0.0
    harmonic = float(np.sum(1.0 / np.arange(1, n)))
    return 2.0 * harmonic - 2.0 * (n - 1) / n


@dataclass
class _Tree:
    split_dim: np.ndarray   # int32, -1 marks a leaf
    split_val: np.ndarray   # float64
    left: np.ndarray        # int32
    right: np.ndarray       # int32
    size: np.ndarray        # int32 samples that reached the node


@dataclass
class IsolationForest:
    n_trees: int = 100
    subsample: int = 256
    mu: np.ndarray = field(default_factory=lambda: np.zeros(0))
    sigma: np.ndarray = field(default_factory=lambda: np.zeros(0))
    c_norm: float = 1.0
    trees: list[_Tree] = field(default_factory=list)

    @property
    def fitted(self) -> bool:
        return bool(self.trees)

    def fit(self, embeddings: np.ndarray, seed: int = 0) -> "IsolationForest":
        data = np.asarray(embeddings, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] < 2:
            raise ValueError("isolation forest needs at least 2 samples")
        self.mu = data.mean(axis=0)
        self.sigma = data.std(axis=0)
        self.sigma = np.where(self.sigma > 0, self.sigma, 1.0)
        normalized = (data - self.mu) / self.sigma

        n = normalized.shape[0]
        psi = min(self.subsample, n)
        self.c_norm = average_path_length(psi)
        if self.c_norm <= 0:
            raise ValueError("subsample too small to normalize path lengths")
        height_limit = math.ceil(math.log2(psi)) if psi > 1 else 0
        rng = np.random.default_rng(seed)
        self.trees = []
        for _ in range(self.n_trees):
            idx = rng.choice(n, size=psi, replace=False)
            self.trees.append(self._grow(normalized[idx], height_limit, rng))
        return self

    def _grow(self, data: np.ndarray, height_limit: int, rng: np.random.Generator) -> _Tree:
        dims, vals, lefts, rights, sizes = [], [], [], [], []

        def build(rows: np.ndarray, depth: int) -> int:
            node = len(dims)
            dims.append(-1)
            vals.append(0.0)
            lefts.append(-1)
            rights.append(-1)
            sizes.append(len(rows))
            if len(rows) <= 1 or depth >= height_limit:
                return node
            sub = data[rows]
            lo, hi = sub.min(axis=0), sub.max(axis=0)
            splittable = np.flatnonzero(hi > lo)
            if len(splittable) == 0:
                return node
            dim = int(rng.choice(splittable))
            val = float(rng.uniform(lo[dim], hi[dim]))
            mask = sub[:, dim] < val
            dims[node] = dim
            vals[node] = val
            lefts[node] = build(rows[mask], depth + 1)
            rights[node] = build(rows[~mask], depth + 1)
            return node

        build(np.arange(len(data)), 0)
        return _Tree(np.array(dims, np.int32), np.array(vals, np.float64),
                     np.array(lefts, np.int32), np.array(rights, np.int32),
                     np.array(sizes, np.int32))

    def _path_lengths(self, tree: _Tree, normalized: np.ndarray) -> np.ndarray:
        n = normalized.shape[0]
        node = np.zeros(n, dtype=np.int64)
        depth = np.zeros(n, dtype=np.float64)
        active = tree.split_dim[node] >= 0
        while active.any():
            cur = node[active]
            dim = tree.split_dim[cur]
            go_left = normalized[active, dim] < tree.split_val[cur]
            node[active] = np.where(go_left, tree.left[cur], tree.right[cur])
            depth[active] += 1.0
            active = tree.split_dim[node] >= 0
        leaf_sizes = tree.size[node]
        extension = np.array([average_path_length(int(s)) for s in leaf_sizes])
        return depth + extension

    def score(self, embeddings: np.ndarray) -> np.ndarray:
        """Anomaly scores in (0, 1); higher isolates faster."""
        if not self.fitted:
            raise RuntimeError("isolation forest is not fitted")
        data = np.asarray(embeddings, dtype=np.float64)
        normalized = (data - self.mu) / self.sigma
        total = np.zeros(data.shape[0])
        for tree in self.trees:
            total += self._path_lengths(tree, normalized)
        mean_path = total / len(self.trees)
        return np.power(2.0, -mean_path / self.c_norm)

    # -- persistence ---------------------------------------------------------

    def to_blob(self) -> bytes:
        arrays: dict[str, np.ndarray] = {
            "mu": self.mu, "sigma": self.sigma,
            "meta": np.array([self.n_trees, self.subsample], np.int64),
            "c_norm": np.array([self.c_norm]),
        }
        for i, tree in enumerate(self.trees):
            arrays[f"t{i}.dim"] = tree.split_dim
            arrays[f"t{i}.val"] = tree.split_val
            arrays[f"t{i}.left"] = tree.left
            arrays[f"t{i}.right"] = tree.right
            arrays[f"t{i}.size"] = tree.size
        return pack_arrays(arrays)

    @classmethod
    def from_blob(cls, blob: bytes) -> "IsolationForest":
        arrays = unpack_arrays(blob)
        forest = cls(n_trees=int(arrays["meta"][0]), subsample=int(arrays["meta"][1]))
        forest.mu = arrays["mu"]
        forest.sigma = arrays["sigma"]
        forest.c_norm = float(arrays["c_norm"][0])
        forest.trees = []
        for i in range(forest.n_trees):
            if f"t{i}.dim" not in arrays:
                break
            forest.trees.append(_Tree(arrays[f"t{i}.dim"], arrays[f"t{i}.val"],
                                      arrays[f"t{i}.left"], arrays[f"t{i}.right"],
                                      arrays[f"t{i}.size"]))
        return forest
