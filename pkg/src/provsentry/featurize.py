"""Node featurization: summary sentences -> skip-gram tokens -> feature rows.

Every node is summarized as a token sentence: its kind token and attribute
tokens sit at position 0, then each 1-hop event contributes an action token
and a neighbor-kind token at position 1, 2, ... in timestamp order. A
skip-gram model with negative sampling embeds the token vocabulary; node
features are the L2-normalized mean of token vectors plus sinusoidal
positional encodings over the event rank.
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from .binio import read_matrix, write_matrix
from .ingest import NodeKind, ProvenanceGraph, RelationGroup

logger = logging.getLogger(__name__)

UNK_TOKEN = "<unk>"


def _attr_tokens(kind: NodeKind, attrs: dict[str, str]) -> list[str]:
    if kind is NodeKind.PROCESS:
        tokens = []
        if attrs.get("name"):
            tokens.append(attrs["name"])
        tokens.extend(attrs.get("cmdline", "").split())
        return tokens
    if kind is NodeKind.FILE:
        return [seg for seg in attrs.get("path", "").split("/") if seg]
    if kind is NodeKind.NETFLOW:
        tokens = []
        if attrs.get("ip"):
            tokens.append(attrs["ip"])  # IPs stay whole tokens
        if attrs.get("port"):
            tokens.append(attrs["port"])
        return tokens
    return [attrs["address"]] if attrs.get("address") else []


MAX_SENTENCE_EVENTS = 32


def build_summary_sentence(graph: ProvenanceGraph, node_idx: int,
                           max_events: int = MAX_SENTENCE_EVENTS,
                           ) -> tuple[list[str], list[int]]:
    """Return (tokens, positions) for one node.

    Position 0 carries the kind and attribute tokens; the k-th incident
    event (deduplicated, ordered by first timestamp) carries its action and
    neighbor-kind tokens at position k. Only the earliest ``max_events``
    events contribute: a node's identity is set by its initial behavior,
    and unbounded sentences let hub degrees and late-arriving structure
    swamp the attribute tokens.
    """
    node = graph.nodes[node_idx]
    tokens = [node.kind.value]
    tokens.extend(_attr_tokens(node.kind, node.attrs))
    positions = [0] * len(tokens)

    events: list[tuple[int, int, str, str, int]] = []
    for rel_id in graph.relation_ids():
        spec = graph.registry.spec(rel_id)
        if spec.group is RelationGroup.LATENT:
            continue
        for direction in ("forward", "reverse"):
            csr = graph.csr(rel_id, direction)
            start, stop = csr.indptr[node_idx], csr.indptr[node_idx + 1]
            for k in range(start, stop):
                nbr = int(csr.cols[k])
                events.append((int(csr.ts[k]), rel_id, spec.action,
                               graph.nodes[nbr].kind.value, nbr))
    events.sort(key=lambda e: (e[0], e[1], e[4]))
    for rank, (_, _, action, nbr_kind, _) in enumerate(events[:max_events], start=1):
        tokens.extend((action, nbr_kind))
        positions.extend((rank, rank))
    return tokens, positions


def build_corpus(graphs: list[ProvenanceGraph]) -> list[tuple[list[str], list[int]]]:
    corpus = []
    for graph in graphs:
        for idx in range(graph.n_nodes):
            corpus.append(build_summary_sentence(graph, idx))
    return corpus


def positional_encoding(positions: np.ndarray, dim: int) -> np.ndarray:
    """Standard sinusoidal encoding over integer positions, shape (len, dim)."""
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 1)
    half = np.arange(0, dim, 2, dtype=np.float64)
    freqs = 1.0 / np.power(10000.0, half / dim)
    angles = positions * freqs  # (n, ceil(dim/2))
    out = np.zeros((positions.shape[0], dim), dtype=np.float64)
    out[:, 0::2] = np.sin(angles)
    out[:, 1::2] = np.cos(angles[:, : dim // 2])
    return out


class TokenEmbedder:
    """Skip-gram with negative sampling over summary-sentence tokens.

    Tokens seen exactly once in the training corpus are folded into a
    reserved ``<unk>`` entry (index 0) so the UNK vector is itself trained;
    unseen tokens at encode time map there too.
    """

    def __init__(self, vocab: dict[str, int], counts: np.ndarray, vectors: np.ndarray) -> None:
        self.vocab = vocab
        self.counts = counts
        self.vectors = vectors  # (V, dim) float32

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def token_index(self, token: str) -> int:
        return self.vocab.get(token, 0)

    def save(self, out_dir: str | Path) -> None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        ordered = sorted(self.vocab.items(), key=lambda kv: kv[1])
        with open(out_dir / "vocab.tsv", "w") as fh:
            for token, idx in ordered:
                fh.write(f"{token}\t{int(self.counts[idx])}\n")
        write_matrix(out_dir / "vectors.bin", self.vectors)

    @classmethod
    def load(cls, in_dir: str | Path) -> "TokenEmbedder":
        in_dir = Path(in_dir)
        vocab: dict[str, int] = {}
        counts: list[int] = []
        with open(in_dir / "vocab.tsv") as fh:
            for idx, line in enumerate(fh):
                token, _, count = line.rstrip("\n").partition("\t")
                vocab[token] = idx
                counts.append(int(count) if count else 0)
        vectors = read_matrix(in_dir / "vectors.bin")
        if len(vocab) != vectors.shape[0]:
            raise ValueError(f"vocab size {len(vocab)} does not match vector rows {vectors.shape[0]}")
        return cls(vocab, np.array(counts, dtype=np.int64), vectors)


def train_token_embedder(corpus: list[tuple[list[str], list[int]]], *, dim: int = 64,
                         window: int = 2, negatives: int = 5, epochs: int = 5,
                         lr: float = 0.025, seed: int = 0,
                         ) -> tuple[TokenEmbedder, list[float]]:
    """Train the embedder; returns it plus the mean pair loss per epoch."""
    counts: dict[str, int] = {}
    for tokens, _ in corpus:
        for tok in tokens:
            counts[tok] = counts.get(tok, 0) + 1
    kept = [tok for tok, c in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])) if c > 1]
    vocab = {UNK_TOKEN: 0}
    for tok in kept:
        vocab[tok] = len(vocab)
    vocab_counts = np.zeros(len(vocab), dtype=np.int64)
    for tok, c in counts.items():
        vocab_counts[vocab.get(tok, 0)] += c

    sentences = [np.array([vocab.get(t, 0) for t in tokens], dtype=np.int32)
                 for tokens, _ in corpus]

    # (center, context) pairs in corpus order
    centers_l, contexts_l = [], []
    for sent in sentences:
        n = len(sent)
        if n < 2:
            continue
        for off in range(1, window + 1):
            centers_l.append(sent[:-off])
            contexts_l.append(sent[off:])
            centers_l.append(sent[off:])
            contexts_l.append(sent[:-off])
    if not centers_l:
        vectors = np.zeros((len(vocab), dim), dtype=np.float32)
        return TokenEmbedder(vocab, vocab_counts, vectors), []
    centers = np.concatenate(centers_l)
    contexts = np.concatenate(contexts_l)

    rng = np.random.default_rng(seed)
    vec_size = len(vocab)
    syn0 = (rng.random((vec_size, dim)) - 0.5) / dim  # input vectors
    syn1 = np.zeros((vec_size, dim))                  # output vectors

    freq = vocab_counts.astype(np.float64) ** 0.75
    neg_cdf = np.cumsum(freq / freq.sum())

    chunk = 8192
    losses: list[float] = []
    for _ in range(epochs):
        epoch_loss = 0.0
        for lo in range(0, len(centers), chunk):
            c_idx = centers[lo : lo + chunk]
            pos_idx = contexts[lo : lo + chunk]
            b = len(c_idx)
            neg_idx = np.searchsorted(neg_cdf, rng.random((b, negatives))).astype(np.int32)
            out_idx = np.concatenate([pos_idx[:, None], neg_idx], axis=1)  # (b, 1+neg)
            v = syn0[c_idx]                      # (b, d)
            u = syn1[out_idx]                    # (b, 1+neg, d)
            scores = np.clip(np.einsum("bd,bkd->bk", v, u), -8.0, 8.0)
            sign = np.full_like(scores, -1.0)
            sign[:, 0] = 1.0
            probs = 1.0 / (1.0 + np.exp(-scores * sign))
            epoch_loss += float(-np.log(np.clip(probs, 1e-12, None)).sum())
            # d loss / d score = sigmoid(score) - target (target 1 for pos, 0 for neg)
            grad_s = 1.0 / (1.0 + np.exp(-scores))
            grad_s[:, 0] -= 1.0
            grad_v = np.einsum("bk,bkd->bd", grad_s, u)
            grad_u = grad_s[:, :, None] * v[:, None, :]
            # hub tokens recur many times per chunk; averaging their
            # accumulated rows keeps the effective step at SGD scale
            c_mult = np.bincount(c_idx, minlength=vec_size)[c_idx]
            np.add.at(syn0, c_idx, (-lr / c_mult)[:, None] * grad_v)
            flat_out = out_idx.ravel()
            o_mult = np.bincount(flat_out, minlength=vec_size)[flat_out]
            np.add.at(syn1, flat_out,
                      (-lr / o_mult)[:, None] * grad_u.reshape(-1, dim))
        losses.append(epoch_loss / len(centers))
    vectors = syn0.astype(np.float32)
    return TokenEmbedder(vocab, vocab_counts, vectors), losses


def encode_node_features(graph: ProvenanceGraph, embedder: TokenEmbedder) -> np.ndarray:
    """Feature matrix (n_nodes, dim): L2-normalized mean of token+position vectors.

    Each token+position sum is normalized onto the unit sphere before the
    mean; a plain mean would split into token mean plus position mean and
    lose which event happened at which rank.
    """
    dim = embedder.dim
    out = np.zeros((graph.n_nodes, dim), dtype=np.float64)
    vectors = embedder.vectors.astype(np.float64)
    for idx in range(graph.n_nodes):
        tokens, positions = build_summary_sentence(graph, idx)
        if not tokens:
            continue
        tok_idx = np.array([embedder.token_index(t) for t in tokens], dtype=np.int32)
        row = vectors[tok_idx] + positional_encoding(np.array(positions), dim)
        norms = np.linalg.norm(row, axis=1, keepdims=True)
        np.divide(row, norms, out=row, where=norms > 0)
        mean = row.mean(axis=0)
        norm = np.linalg.norm(mean)
        out[idx] = mean / norm if norm > 0 else mean
    return out


def save_features(path: str | Path, features: np.ndarray) -> None:
    write_matrix(path, features.astype(np.float32))


def load_features(path: str | Path) -> np.ndarray:
    return read_matrix(path).astype(np.float64)


def featurize_graphs(graphs: list[ProvenanceGraph], *, dim: int = 64, window: int = 2,
                     negatives: int = 5, epochs: int = 5, lr: float = 0.025, seed: int = 0,
                     embedder: TokenEmbedder | None = None,
                     ) -> tuple[TokenEmbedder, list[np.ndarray]]:
    """Train (or apply) the token embedder and encode every graph."""
    if embedder is None:
        corpus = build_corpus(graphs)
        embedder, losses = train_token_embedder(
            corpus, dim=dim, window=window, negatives=negatives,
            epochs=epochs, lr=lr, seed=seed)
        if len(losses) >= 2:
            logger.debug("embedder mean pair loss: first=%.4f last=%.4f", losses[0], losses[-1])
    features = [encode_node_features(g, embedder) for g in graphs]
    return embedder, features
