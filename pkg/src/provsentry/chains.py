"""Attack chain reconstruction over alerted nodes.

Alerted nodes (plus benign nodes that bridge at least two alerts) form a
working subgraph. Every node gets a coarse tactic from an ordered rule
file, then sequential label propagation merges the subgraph into clusters.
Clusters that do not span enough distinct tactics are discarded as false
positives; the survivors come back as scored, exportable attack chains.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ingest import NodeKind, ProvenanceGraph, _name_of

# -- tactic rules ----------------------------------------------------------------


@dataclass(frozen=True)
class TtpRule:
    ttp_index: int
    tactic: str
    action: str | None = None
    kind: NodeKind | None = None
    attr_contains: str | None = None

    def matches(self, node, actions: frozenset[str]) -> bool:
        if self.kind is not None and node.kind is not self.kind:
            return False
        if self.action is not None and self.action not in actions:
            return False
        if self.attr_contains is not None:
            if not any(self.attr_contains in v for v in node.attrs.values()):
                return False
        return True


@dataclass
class TtpMapping:
    rules: list[TtpRule]

    @property
    def size(self) -> int:
        return max(r.ttp_index for r in self.rules) + 1 if self.rules else 0

    def validate(self) -> None:
        if not self.rules:
            raise ValueError("TTP mapping needs at least one rule")
        for rule in self.rules:
            if rule.ttp_index < 0:
                raise ValueError(f"ttp_index must be >= 0, got {rule.ttp_index}")
            if not rule.tactic:
                raise ValueError("rule tactic must be a nonempty string")


DEFAULT_TTP_RULES = TtpMapping(rules=[
    TtpRule(0, "Credential Access", kind=NodeKind.FILE, attr_contains="passwd"),
    TtpRule(1, "Command and Control", kind=NodeKind.NETFLOW, action="send"),
    TtpRule(2, "Exfiltration", kind=NodeKind.NETFLOW, action="write"),
    TtpRule(3, "Discovery", kind=NodeKind.NETFLOW, action="connect"),
    TtpRule(4, "Defense Evasion", kind=NodeKind.MEMORY, action="mprotect"),
    TtpRule(5, "Execution", kind=NodeKind.MEMORY),
    TtpRule(6, "Privilege Escalation", kind=NodeKind.PROCESS, action="fork"),
    TtpRule(7, "Collection", kind=NodeKind.FILE, action="write"),
])


def load_ttp_mapping(path: str | Path) -> TtpMapping:
    """Parse a JSON rule list: [{match: {action?, kind?, attr_contains?},
    ttp_index, tactic}, ...]; earlier rules win."""
    data = json.loads(Path(path).read_text())
    if not isinstance(data, list):
        raise ValueError("TTP mapping file must contain a JSON list")
    rules = []
    for i, entry in enumerate(data):
        match = entry.get("match", {})
        unknown = set(match) - {"action", "kind", "attr_contains"}
        if unknown:
            raise ValueError(f"rule {i}: unknown match keys {sorted(unknown)}")
        rules.append(TtpRule(
            ttp_index=int(entry["ttp_index"]),
            tactic=str(entry["tactic"]),
            action=match.get("action"),
            kind=NodeKind(match["kind"]) if "kind" in match else None,
            attr_contains=match.get("attr_contains")))
    mapping = TtpMapping(rules=rules)
    mapping.validate()
    return mapping


def node_actions(graph: ProvenanceGraph) -> list[frozenset[str]]:
    """Incident base-relation action names per node, either direction."""
    sets: list[set[str]] = [set() for _ in range(graph.n_nodes)]
    for rel_id in graph.registry.base_ids():
        e = graph.edges_of(rel_id)
        action = graph.registry.spec(rel_id).action
        for s in np.unique(e["src"]):
            sets[int(s)].add(action)
        for d in np.unique(e["dst"]):
            sets[int(d)].add(action)
    return [frozenset(s) for s in sets]


def ttp_encode(node, mapping: TtpMapping, actions: frozenset[str] = frozenset(),
               ) -> tuple[np.ndarray, str | None]:
    """First matching rule one-hot encodes the node; no match is all-zero."""
    vec = np.zeros(mapping.size)
    for rule in mapping.rules:
        if rule.matches(node, actions):
            vec[rule.ttp_index] = 1.0
            return vec, rule.tactic
    return vec, None


# -- alert subgraph + label propagation -----------------------------------------


@dataclass
class ChainLabelState:
    node_indices: np.ndarray        # subgraph rows -> graph node index
    node_ids: list[str]
    labels: np.ndarray              # current holder (subgraph row index)
    init_vectors: np.ndarray        # [embedding ; ttp one-hot] per row
    tactics: list[str | None]
    neighbors: list[np.ndarray]     # symmetric adjacency, subgraph-local
    iterations: int = 0
    converged: bool = False


def build_alert_subgraph(graph: ProvenanceGraph, alert_ids: list[str],
                         ) -> tuple[np.ndarray, list[np.ndarray]]:
    """Alert nodes plus bridges touching >= 2 alerts, with the edges that
    involve at least one alert endpoint (base relations, undirected)."""
    if not alert_ids:
        raise ValueError("alert set is empty")
    alert_idx = np.array(sorted(graph.index_of(a) for a in alert_ids))
    is_alert = np.zeros(graph.n_nodes, dtype=bool)
    is_alert[alert_idx] = True

    bridge_hits: dict[int, set[int]] = {}
    pairs = []
    for rel_id in graph.registry.base_ids():
        e = graph.edges_of(rel_id)
        for s, d in zip(e["src"], e["dst"]):
            s, d = int(s), int(d)
            if s == d:
                continue
            if is_alert[s] and is_alert[d]:
                pairs.append((s, d))
            elif is_alert[s]:
                bridge_hits.setdefault(d, set()).add(s)
            elif is_alert[d]:
                bridge_hits.setdefault(s, set()).add(d)
    bridges = {b for b, hits in bridge_hits.items() if len(hits) >= 2}
    for b in bridges:
        for a in bridge_hits[b]:
            pairs.append((a, b))

    members = np.array(sorted(set(alert_idx.tolist()) | bridges))
    local = {int(g): i for i, g in enumerate(members)}
    adj: list[set[int]] = [set() for _ in members]
    for s, d in pairs:
        ls, ld = local[s], local[d]
        adj[ls].add(ld)
        adj[ld].add(ls)
    neighbors = [np.array(sorted(a), dtype=np.int64) for a in adj]
    return members, neighbors


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(a @ b) / (na * nb)


def sweep_order(neighbors: list[np.ndarray]) -> np.ndarray:
    """Update order for one sweep: ascending degree, then row index.

    Leaves settle onto their hub's label before the hub itself updates, so
    a hub faces a unique mode instead of a many-way tie; this is what lets
    a star collapse onto its hub in a single sweep no matter how the rows
    happen to be numbered.
    """
    degrees = np.array([len(n) for n in neighbors], dtype=np.int64)
    return np.lexsort((np.arange(len(neighbors)), degrees))


def propagation_step(labels: np.ndarray, neighbors: list[np.ndarray],
                     init_vectors: np.ndarray,
                     order: np.ndarray | None = None) -> np.ndarray:
    """One sweep of mode updates, applied sequentially in sweep_order.

    Each node adopts the most frequent label among its neighbors; a node
    already holding a modal label keeps it. Remaining ties prefer the
    candidate whose original holder is closest in cosine similarity, then
    the smallest label id. Isolated nodes keep their own label.
    """
    new = labels.copy()
    if order is None:
        order = sweep_order(neighbors)
    for i in order:
        nbrs = neighbors[i]
        if len(nbrs) == 0:
            continue
        cand_labels, counts = np.unique(new[nbrs], return_counts=True)
        top = cand_labels[counts == counts.max()]
        if new[i] in top:
            continue
        if len(top) == 1:
            new[i] = top[0]
            continue
        best = None
        for lab in top:
            sim = _cosine(init_vectors[i], init_vectors[lab])
            key = (-sim, lab)
            if best is None or key < best[0]:
                best = (key, lab)
        new[i] = best[1]
    return new


def run_lpa(alert_ids: list[str], graph: ProvenanceGraph,
            embeddings: np.ndarray, mapping: TtpMapping,
            max_iters: int = 100) -> ChainLabelState:
    """Propagate labels until a fixed point (or the iteration cap)."""
    members, neighbors = build_alert_subgraph(graph, alert_ids)
    actions = node_actions(graph)
    vectors = []
    tactics: list[str | None] = []
    for g in members:
        node = graph.nodes[int(g)]
        t_vec, tactic = ttp_encode(node, mapping, actions[int(g)])
        vectors.append(np.concatenate([embeddings[int(g)], t_vec]))
        tactics.append(tactic)
    state = ChainLabelState(
        node_indices=members,
        node_ids=[graph.nodes[int(g)].id for g in members],
        labels=np.arange(len(members), dtype=np.int64),
        init_vectors=np.asarray(vectors),
        tactics=tactics,
        neighbors=neighbors)
    order = sweep_order(neighbors)
    for _ in range(max_iters):
        new = propagation_step(state.labels, neighbors, state.init_vectors, order)
        if np.array_equal(new, state.labels):
            state.converged = True
            break
        state.labels = new
        state.iterations += 1
    return state


# -- chain extraction -----------------------------------------------------------


@dataclass
class AttackChain:
    chain_id: str
    members: list[str]
    member_info: dict[str, dict] = field(default_factory=dict)
    edges: list[dict] = field(default_factory=list)
    tactics: list[str] = field(default_factory=list)
    score: float = 0.0

    def to_dict(self) -> dict:
        return {"chain_id": self.chain_id, "members": self.members,
                "member_info": self.member_info, "edges": self.edges,
                "tactics": self.tactics, "score": self.score}

    @classmethod
    def from_dict(cls, data: dict) -> "AttackChain":
        return cls(chain_id=data["chain_id"], members=list(data["members"]),
                   member_info=dict(data["member_info"]),
                   edges=[dict(e) for e in data["edges"]],
                   tactics=list(data["tactics"]), score=float(data["score"]))


def extract_chains(state: ChainLabelState, graph: ProvenanceGraph,
                   mapping: TtpMapping, min_tactics: int = 2,
                   confidence: dict[str, float] | None = None,
                   ) -> list[AttackChain]:
    """Group the propagated labels into chains and filter thin ones out.

    A group survives when its members span at least min_tactics distinct
    tactics. Edges are restored from the provenance graph (base relations,
    both endpoints inside the group); chains come back sorted by score,
    the mean member confidence.
    """
    confidence = confidence or {}
    groups: dict[int, list[int]] = {}
    for row, lab in enumerate(state.labels):
        groups.setdefault(int(lab), []).append(row)

    chains = []
    for rows in groups.values():
        tactics = sorted({state.tactics[r] for r in rows
                          if state.tactics[r] is not None})
        if len(tactics) < min_tactics:
            continue
        member_idx = {int(state.node_indices[r]) for r in rows}
        ids = sorted(state.node_ids[r] for r in rows)
        info = {}
        for g in sorted(member_idx):
            node = graph.nodes[g]
            info[node.id] = {"kind": node.kind.value, "name": _name_of(node)}
        edges = []
        for rel_id in graph.registry.base_ids():
            spec = graph.registry.spec(rel_id)
            e = graph.edges_of(rel_id)
            for s, d, t in zip(e["src"], e["dst"], e["ts"]):
                if int(s) in member_idx and int(d) in member_idx:
                    edges.append({"src": graph.nodes[int(s)].id,
                                  "dst": graph.nodes[int(d)].id,
                                  "relation": spec.name, "ts": int(t)})
        edges.sort(key=lambda e: (e["ts"], e["relation"], e["src"], e["dst"]))
        score = (sum(confidence.get(i, 0.0) for i in ids) / len(ids)) if ids else 0.0
        chains.append(AttackChain(chain_id="", members=ids, member_info=info,
                                  edges=edges, tactics=tactics, score=score))
    chains.sort(key=lambda c: (-c.score, c.members[0] if c.members else ""))
    for k, chain in enumerate(chains):
        chain.chain_id = f"chain_{k:03d}"
    return chains


# -- export -----------------------------------------------------------------------


def export_chain(chain: AttackChain, fmt: str) -> bytes:
    """Render a chain as Graphviz DOT or as round-trippable JSON."""
    if fmt == "json":
        return (json.dumps(chain.to_dict(), indent=2, sort_keys=True) + "\n").encode()
    if fmt == "dot":
        lines = [f'digraph "{chain.chain_id}" {{']
        for node_id in chain.members:
            info = chain.member_info.get(node_id, {})
            label = f"{info.get('kind', '?')}:{info.get('name', '')}"
            lines.append(f'  "{node_id}" [label="{label}"];')
        for edge in chain.edges:
            lines.append(f'  "{edge["src"]}" -> "{edge["dst"]}" '
                         f'[label="{edge["relation"]}@{edge["ts"]}"];')
        lines.append("}")
        return ("\n".join(lines) + "\n").encode()
    raise ValueError(f"unknown export format {fmt!r}; expected dot or json")
