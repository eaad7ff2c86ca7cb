"""Audit-log ingestion into heterogeneous provenance graphs.

Entities are processes, files, netflows, and memory regions; every event is
a system-call-level edge from a process to some entity. Relations are keyed
by (action, destination kind) so that e.g. a file write and a socket write
stay distinct, and grouped by the destination kind they touch.

Two input formats are supported:

* canonical JSONL: one event object per line with ``ts``, ``subject``,
  ``object`` and ``action`` fields,
* the 6-field tab-separated trace format (source id, source type char,
  destination id, destination type char, edge type char, graph id) where
  the graph id names the batch and node ids are namespaced per batch.

Malformed lines are recoverable: the parser records the line number and
keeps going.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple

import numpy as np

logger = logging.getLogger(__name__)


class NodeKind(str, Enum):
    PROCESS = "Process"
    FILE = "File"
    NETFLOW = "Netflow"
    MEMORY = "Memory"


class Label(str, Enum):
    BENIGN = "benign"
    MALICIOUS = "malicious"


class RelationGroup(str, Enum):
    """Which entity kind a relation's destination touches."""

    PROCESS = "process"
    FILE = "file"
    NETFLOW = "netflow"
    MEMORY = "memory"
    LATENT = "latent"


_KIND_TO_GROUP = {
    NodeKind.PROCESS: RelationGroup.PROCESS,
    NodeKind.FILE: RelationGroup.FILE,
    NodeKind.NETFLOW: RelationGroup.NETFLOW,
    NodeKind.MEMORY: RelationGroup.MEMORY,
}

# Attribute keys each entity kind may carry.
PERMITTED_ATTRS = {
    NodeKind.PROCESS: ("name", "cmdline"),
    NodeKind.FILE: ("path",),
    NodeKind.NETFLOW: ("ip", "port"),
    NodeKind.MEMORY: ("address",),
}

# Syscall spellings folded onto canonical actions.
ACTION_ALIASES = {
    "sendto": "send",
    "sendmsg": "send",
    "recvfrom": "recv",
    "recvmsg": "recv",
    "readv": "read",
    "writev": "write",
    "openat": "open",
}

# Trace-format type characters. 'a' (process) and 'c' (file) are fixed by
# the format; the rest follow the dataset's documented entity list.
STREAMSPOT_KINDS = {
    "a": NodeKind.PROCESS,
    "b": NodeKind.PROCESS,  # thread, acts as a subject
    "c": NodeKind.FILE,
    "d": NodeKind.MEMORY,   # MAP
    "e": NodeKind.NETFLOW,  # socket
    "f": NodeKind.FILE,     # pipe
    "g": NodeKind.MEMORY,   # shared memory
    "h": NodeKind.FILE,
}


@dataclass
class EntityNode:
    """A provenance entity. ``attrs`` only holds keys permitted for the kind."""

    id: str
    kind: NodeKind
    attrs: dict[str, str] = field(default_factory=dict)
    first_seen: int = 0
    label: Label | None = None

    def __post_init__(self) -> None:
        permitted = PERMITTED_ATTRS[self.kind]
        self.attrs = {k: v for k, v in self.attrs.items() if k in permitted and v not in (None, "")}


class RawEvent(NamedTuple):
    ts: int
    action: str
    src_id: str
    src_kind: NodeKind
    src_name: str
    src_label: Label | None
    dst_id: str
    dst_kind: NodeKind
    dst_name: str
    dst_label: Label | None
    batch_id: str | None = None


@dataclass
class ParseError:
    line_no: int
    message: str


@dataclass(frozen=True)
class RelationSpec:
    name: str
    action: str
    group: RelationGroup


class RelationRegistry:
    """Append-only mapping of relation names to dense ids.

    A relation is identified by (action, group). The registered name is the
    bare action unless that action already exists under another group, in
    which case the group word is suffixed (``write`` vs ``write_netflow``).
    """

    def __init__(self) -> None:
        self._specs: list[RelationSpec] = []
        self._by_key: dict[tuple[str, RelationGroup], int] = {}
        self._by_name: dict[str, int] = {}

    def __len__(self) -> int:
        return len(self._specs)

    def register(self, action: str, group: RelationGroup) -> int:
        key = (action, group)
        if key in self._by_key:
            return self._by_key[key]
        name = action if action not in self._by_name else f"{action}_{group.value}"
        if name in self._by_name:
            raise ValueError(f"relation name collision for {name!r}")
        rel_id = len(self._specs)
        self._specs.append(RelationSpec(name=name, action=action, group=group))
        self._by_key[key] = rel_id
        self._by_name[name] = rel_id
        return rel_id

    def register_latent(self, name: str) -> int:
        if name in self._by_name:
            return self._by_name[name]
        rel_id = len(self._specs)
        self._specs.append(RelationSpec(name=name, action=name, group=RelationGroup.LATENT))
        self._by_key[(name, RelationGroup.LATENT)] = rel_id
        self._by_name[name] = rel_id
        return rel_id

    def spec(self, rel_id: int) -> RelationSpec:
        return self._specs[rel_id]

    def id_of(self, name: str) -> int:
        return self._by_name[name]

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def base_ids(self) -> list[int]:
        return [i for i, s in enumerate(self._specs) if s.group is not RelationGroup.LATENT]

    def latent_ids(self) -> list[int]:
        return [i for i, s in enumerate(self._specs) if s.group is RelationGroup.LATENT]

    def all_ids(self) -> list[int]:
        return list(range(len(self._specs)))

    def to_dict(self) -> dict:
        return {
            "relations": [
                {"name": s.name, "action": s.action, "group": s.group.value} for s in self._specs
            ]
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RelationRegistry":
        reg = cls()
        for entry in data["relations"]:
            spec = RelationSpec(entry["name"], entry["action"], RelationGroup(entry["group"]))
            rel_id = len(reg._specs)
            reg._specs.append(spec)
            reg._by_key[(spec.action, spec.group)] = rel_id
            reg._by_name[spec.name] = rel_id
        return reg


def _attrs_from_name(kind: NodeKind, name: str) -> dict[str, str]:
    if not name:
        return {}
    if kind is NodeKind.PROCESS:
        return {"name": name}
    if kind is NodeKind.FILE:
        return {"path": name}
    if kind is NodeKind.NETFLOW:
        ip, sep, port = name.rpartition(":")
        if sep:
            return {"ip": ip, "port": port}
        return {"ip": name}
    return {"address": name}


class _Csr(NamedTuple):
    indptr: np.ndarray   # int64, len n+1
    cols: np.ndarray     # int32 neighbor indices
    counts: np.ndarray   # float64 multiplicities
    ts: np.ndarray       # int64 first-seen timestamps


class ProvenanceGraph:
    """One batch of the provenance stream.

    Edges are deduplicated per (src, dst, relation); multiplicity is kept as
    a count and the earliest timestamp is retained. Per-relation adjacency
    is exposed in CSR form, forward, reverse, and undirected (incident).
    """

    def __init__(self, batch_id: str, registry: RelationRegistry) -> None:
        self.batch_id = batch_id
        self.registry = registry
        self.nodes: list[EntityNode] = []
        self._index: dict[str, int] = {}
        # rel_id -> arrays (src, dst, count, ts), finalized and sorted
        self._edges: dict[int, dict[str, np.ndarray]] = {}
        self._csr_cache: dict[tuple[int, str], _Csr] = {}

    # -- construction -----------------------------------------------------

    def add_node(self, node: EntityNode) -> int:
        idx = self._index.get(node.id)
        if idx is not None:
            return idx
        idx = len(self.nodes)
        self.nodes.append(node)
        self._index[node.id] = idx
        return idx

    def set_edges(self, rel_id: int, src: np.ndarray, dst: np.ndarray,
                  count: np.ndarray, ts: np.ndarray) -> None:
        order = np.lexsort((dst, ts, src))
        self._edges[rel_id] = {
            "src": np.asarray(src, dtype=np.int32)[order],
            "dst": np.asarray(dst, dtype=np.int32)[order],
            "count": np.asarray(count, dtype=np.float64)[order],
            "ts": np.asarray(ts, dtype=np.int64)[order],
        }
        self._csr_cache.clear()

    # -- basic queries ----------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def n_edges(self, rel_id: int | None = None) -> int:
        if rel_id is not None:
            e = self._edges.get(rel_id)
            return 0 if e is None else len(e["src"])
        return sum(len(e["src"]) for e in self._edges.values())

    def index_of(self, node_id: str) -> int:
        return self._index[node_id]

    def has_node(self, node_id: str) -> bool:
        return node_id in self._index

    def relation_ids(self) -> list[int]:
        return sorted(self._edges)

    def edges_of(self, rel_id: int) -> dict[str, np.ndarray]:
        return self._edges.get(rel_id, {
            "src": np.zeros(0, np.int32), "dst": np.zeros(0, np.int32),
            "count": np.zeros(0, np.float64), "ts": np.zeros(0, np.int64),
        })

    # -- adjacency views ----------------------------------------------------

    def _build_csr(self, rows: np.ndarray, cols: np.ndarray,
                   counts: np.ndarray, ts: np.ndarray) -> _Csr:
        n = self.n_nodes
        order = np.lexsort((cols, ts, rows))
        rows, cols, counts, ts = rows[order], cols[order], counts[order], ts[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr[1:], rows, 1)
        np.cumsum(indptr, out=indptr)
        return _Csr(indptr, cols.astype(np.int32), counts.astype(np.float64), ts.astype(np.int64))

    def csr(self, rel_id: int, direction: str = "forward") -> _Csr:
        """Per-relation adjacency. direction: forward | reverse | incident."""
        key = (rel_id, direction)
        cached = self._csr_cache.get(key)
        if cached is not None:
            return cached
        e = self.edges_of(rel_id)
        if direction == "forward":
            csr = self._build_csr(e["src"], e["dst"], e["count"], e["ts"])
        elif direction == "reverse":
            csr = self._build_csr(e["dst"], e["src"], e["count"], e["ts"])
        elif direction == "incident":
            rows = np.concatenate([e["src"], e["dst"]])
            cols = np.concatenate([e["dst"], e["src"]])
            counts = np.concatenate([e["count"], e["count"]])
            ts = np.concatenate([e["ts"], e["ts"]])
            csr = self._build_csr(rows, cols, counts, ts)
        else:
            raise ValueError(f"unknown direction {direction!r}")
        self._csr_cache[key] = csr
        return csr

    def topology_rows(self) -> _Csr:
        """Relation-summed undirected adjacency over base relations.

        Self-loops are dropped; parallel entries across relations sum their
        counts. This is the sparse input of the topology branch.
        """
        key = (-1, "topology")
        cached = self._csr_cache.get(key)
        if cached is not None:
            return cached
        base = set(self.registry.base_ids())
        rows_l, cols_l, cnt_l = [], [], []
        for rel_id in self.relation_ids():
            if rel_id not in base:
                continue
            e = self.edges_of(rel_id)
            rows_l.extend([e["src"], e["dst"]])
            cols_l.extend([e["dst"], e["src"]])
            cnt_l.extend([e["count"], e["count"]])
        if rows_l:
            rows = np.concatenate(rows_l)
            cols = np.concatenate(cols_l)
            cnt = np.concatenate(cnt_l)
            keep = rows != cols
            rows, cols, cnt = rows[keep], cols[keep], cnt[keep]
            # merge duplicates: key by (row, col)
            n = self.n_nodes
            flat = rows.astype(np.int64) * n + cols.astype(np.int64)
            uniq, inv = np.unique(flat, return_inverse=True)
            merged = np.zeros(len(uniq), dtype=np.float64)
            np.add.at(merged, inv, cnt)
            rows = (uniq // n).astype(np.int32)
            cols = (uniq % n).astype(np.int32)
            csr = self._build_csr(rows, cols, merged, np.zeros(len(rows), np.int64))
        else:
            csr = self._build_csr(np.zeros(0, np.int32), np.zeros(0, np.int32),
                                  np.zeros(0, np.float64), np.zeros(0, np.int64))
        self._csr_cache[key] = csr
        return csr

    # -- persistence --------------------------------------------------------

    def save_dir(self, path: str | Path) -> None:
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        with open(path / "nodes.jsonl", "w") as fh:
            for node in self.nodes:
                rec = {
                    "id": node.id,
                    "kind": node.kind.value,
                    "attrs": node.attrs,
                    "first_seen": node.first_seen,
                    "label": node.label.value if node.label else None,
                }
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
        with open(path / "edges.jsonl", "w") as fh:
            for rel_id in self.relation_ids():
                if self.registry.spec(rel_id).group is RelationGroup.LATENT:
                    continue
                name = self.registry.spec(rel_id).name
                e = self.edges_of(rel_id)
                for s, d, c, t in zip(e["src"], e["dst"], e["count"], e["ts"]):
                    rec = {
                        "src": self.nodes[s].id,
                        "dst": self.nodes[d].id,
                        "relation": name,
                        "ts": int(t),
                        "count": int(c),
                    }
                    fh.write(json.dumps(rec, sort_keys=True) + "\n")
        for rel_id in self.relation_ids():
            spec = self.registry.spec(rel_id)
            if spec.group is not RelationGroup.LATENT:
                continue
            e = self.edges_of(rel_id)
            with open(path / f"{spec.name}.jsonl", "w") as fh:
                for s, d, c in zip(e["src"], e["dst"], e["count"]):
                    rec = {"src": self.nodes[s].id, "dst": self.nodes[d].id, "score": float(c)}
                    fh.write(json.dumps(rec, sort_keys=True) + "\n")

    @classmethod
    def load_dir(cls, path: str | Path, batch_id: str, registry: RelationRegistry) -> "ProvenanceGraph":
        path = Path(path)
        graph = cls(batch_id, registry)
        with open(path / "nodes.jsonl") as fh:
            for line in fh:
                rec = json.loads(line)
                graph.add_node(EntityNode(
                    id=rec["id"],
                    kind=NodeKind(rec["kind"]),
                    attrs=rec.get("attrs", {}),
                    first_seen=rec.get("first_seen", 0),
                    label=Label(rec["label"]) if rec.get("label") else None,
                ))
        pending: dict[int, list[tuple[int, int, float, int]]] = {}
        with open(path / "edges.jsonl") as fh:
            for line in fh:
                rec = json.loads(line)
                rel_id = registry.id_of(rec["relation"])
                pending.setdefault(rel_id, []).append((
                    graph.index_of(rec["src"]), graph.index_of(rec["dst"]),
                    float(rec.get("count", 1)), int(rec.get("ts", 0)),
                ))
        for rel_id, rows in pending.items():
            arr = np.array(rows, dtype=np.float64).reshape(-1, 4)
            graph.set_edges(rel_id, arr[:, 0].astype(np.int32), arr[:, 1].astype(np.int32),
                            arr[:, 2], arr[:, 3].astype(np.int64))
        return graph

    def to_canonical_events(self) -> Iterator[dict]:
        """Expand deduplicated edges back into canonical JSONL event dicts."""
        for rel_id in self.relation_ids():
            spec = self.registry.spec(rel_id)
            if spec.group is RelationGroup.LATENT:
                continue
            e = self.edges_of(rel_id)
            for s, d, c, t in zip(e["src"], e["dst"], e["count"], e["ts"]):
                src, dst = self.nodes[s], self.nodes[d]
                rec = {
                    "ts": int(t),
                    "subject": {"id": src.id, "type": src.kind.value,
                                "name": _name_of(src)},
                    "object": {"id": dst.id, "type": dst.kind.value,
                               "name": _name_of(dst)},
                    "action": spec.action,
                }
                if src.label:
                    rec["subject"]["label"] = src.label.value
                if dst.label:
                    rec["object"]["label"] = dst.label.value
                for _ in range(int(c)):
                    yield dict(rec)


def _name_of(node: EntityNode) -> str:
    if node.kind is NodeKind.PROCESS:
        return node.attrs.get("name", "")
    if node.kind is NodeKind.FILE:
        return node.attrs.get("path", "")
    if node.kind is NodeKind.NETFLOW:
        ip = node.attrs.get("ip", "")
        port = node.attrs.get("port")
        return f"{ip}:{port}" if port else ip
    return node.attrs.get("address", "")


# -- parsers ----------------------------------------------------------------


def iter_jsonl_events(lines: Iterable[str], errors: list[ParseError] | None = None,
                      ) -> Iterator[RawEvent]:
    """Stream canonical JSONL events; malformed lines are recorded and skipped."""
    last_ts = None
    warned_order = False
    for line_no, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
            subj, obj = rec["subject"], rec["object"]
            src_kind = NodeKind(subj["type"])
            dst_kind = NodeKind(obj["type"])
            if src_kind is not NodeKind.PROCESS:
                raise ValueError(f"event subject must be a Process, got {src_kind.value}")
            action = str(rec["action"]).strip().lower()
            action = ACTION_ALIASES.get(action, action)
            if not action:
                raise ValueError("empty action")
            ts = int(rec["ts"])
            event = RawEvent(
                ts=ts,
                action=action,
                src_id=str(subj["id"]),
                src_kind=src_kind,
                src_name=str(subj.get("name", "")),
                src_label=Label(subj["label"]) if subj.get("label") else None,
                dst_id=str(obj["id"]),
                dst_kind=dst_kind,
                dst_name=str(obj.get("name", "")),
                dst_label=Label(obj["label"]) if obj.get("label") else None,
            )
        except (KeyError, ValueError, TypeError) as exc:
            if errors is not None:
                errors.append(ParseError(line_no, f"{type(exc).__name__}: {exc}"))
            continue
        if last_ts is not None and event.ts < last_ts and not warned_order:
            logger.warning("non-monotone timestamp at line %d (%d < %d); keeping arrival order",
                           line_no, event.ts, last_ts)
            warned_order = True
        last_ts = event.ts
        yield event


def iter_streamspot_events(lines: Iterable[str], errors: list[ParseError] | None = None,
                           ) -> Iterator[RawEvent]:
    """Stream 6-field TSV trace events; node ids are namespaced per batch."""
    for line_no, line in enumerate(lines, start=1):
        line = line.rstrip("\n")
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 6:
            if errors is not None:
                errors.append(ParseError(line_no, f"expected 6 tab-separated fields, got {len(parts)}"))
            continue
        src_id, src_type, dst_id, dst_type, edge_type, graph_id = (p.strip() for p in parts)
        try:
            src_kind = STREAMSPOT_KINDS[src_type]
            dst_kind = STREAMSPOT_KINDS[dst_type]
        except KeyError as exc:
            if errors is not None:
                errors.append(ParseError(line_no, f"unknown node type character {exc.args[0]!r}"))
            continue
        if src_kind is not NodeKind.PROCESS:
            if errors is not None:
                errors.append(ParseError(line_no, f"event subject must be a Process, got type {src_type!r}"))
            continue
        if not edge_type:
            if errors is not None:
                errors.append(ParseError(line_no, "empty edge type"))
            continue
        yield RawEvent(
            ts=line_no,
            action=edge_type,
            src_id=f"{graph_id}:{src_id}",
            src_kind=src_kind,
            src_name="",
            src_label=None,
            dst_id=f"{graph_id}:{dst_id}",
            dst_kind=dst_kind,
            dst_name="",
            dst_label=None,
            batch_id=graph_id,
        )


def parse_jsonl(source: str | Path | Iterable[str]) -> tuple[list[RawEvent], list[ParseError]]:
    errors: list[ParseError] = []
    events = list(iter_jsonl_events(_as_lines(source), errors))
    return events, errors


def parse_streamspot(source: str | Path | Iterable[str]) -> tuple[list[RawEvent], list[ParseError]]:
    errors: list[ParseError] = []
    events = list(iter_streamspot_events(_as_lines(source), errors))
    return events, errors


def _as_lines(source: str | Path | Iterable[str]) -> Iterable[str]:
    if isinstance(source, (str, Path)):
        with open(source) as fh:
            yield from fh
    else:
        yield from source


# -- graph assembly -----------------------------------------------------------


class _Draft:
    """Mutable per-batch accumulator."""

    __slots__ = ("nodes", "order", "edges")

    def __init__(self) -> None:
        self.nodes: dict[str, EntityNode] = {}
        self.order: list[str] = []
        self.edges: dict[tuple[str, str, int], list] = {}  # -> [count, min_ts]

    def ensure_node(self, event_side: tuple[str, NodeKind, str, Label | None], ts: int) -> None:
        nid, kind, name, label = event_side
        node = self.nodes.get(nid)
        if node is None:
            node = EntityNode(id=nid, kind=kind, attrs=_attrs_from_name(kind, name),
                              first_seen=ts, label=label)
            self.nodes[nid] = node
            self.order.append(nid)
            return
        node.first_seen = min(node.first_seen, ts)
        if label is Label.MALICIOUS or (label is not None and node.label is None):
            node.label = label
        if not node.attrs and name:
            node.attrs = _attrs_from_name(kind, name)

    def add_edge(self, src: str, dst: str, rel_id: int, ts: int) -> None:
        key = (src, dst, rel_id)
        entry = self.edges.get(key)
        if entry is None:
            self.edges[key] = [1.0, ts]
        else:
            entry[0] += 1.0
            entry[1] = min(entry[1], ts)

    def finalize(self, batch_id: str, registry: RelationRegistry) -> ProvenanceGraph:
        graph = ProvenanceGraph(batch_id, registry)
        for nid in self.order:
            graph.add_node(self.nodes[nid])
        by_rel: dict[int, list[tuple[int, int, float, int]]] = {}
        for (src, dst, rel_id), (count, ts) in self.edges.items():
            by_rel.setdefault(rel_id, []).append(
                (graph.index_of(src), graph.index_of(dst), count, ts))
        for rel_id, rows in by_rel.items():
            arr = np.array(rows, dtype=np.float64).reshape(-1, 4)
            graph.set_edges(rel_id, arr[:, 0].astype(np.int32), arr[:, 1].astype(np.int32),
                            arr[:, 2], arr[:, 3].astype(np.int64))
        return graph


def build_graphs(events: Iterable[RawEvent], registry: RelationRegistry | None = None,
                 batch_size: int = 5000) -> tuple[list[ProvenanceGraph], RelationRegistry]:
    """Partition an event stream into provenance graph batches.

    Events carrying an explicit batch id are grouped by it. Otherwise a
    batch closes exactly when admitting the next unseen node would push its
    distinct-node count past ``batch_size``; an event straddling the
    boundary moves wholly into the next batch (its source node is
    re-materialized there so closed batches hold exactly ``batch_size``
    distinct nodes).
    """
    if registry is None:
        registry = RelationRegistry()
    explicit: dict[str, _Draft] = {}
    explicit_order: list[str] = []
    current = _Draft()
    graphs: list[ProvenanceGraph] = []
    windowed_count = 0

    def flush_current() -> None:
        nonlocal current, windowed_count
        if current.order:
            graphs.append(current.finalize(f"batch_{windowed_count:05d}", registry))
            windowed_count += 1
        current = _Draft()

    for ev in events:
        group = _KIND_TO_GROUP[ev.dst_kind]
        rel_id = registry.register(ev.action, group)
        src_side = (ev.src_id, ev.src_kind, ev.src_name, ev.src_label)
        dst_side = (ev.dst_id, ev.dst_kind, ev.dst_name, ev.dst_label)
        if ev.batch_id is not None:
            draft = explicit.get(ev.batch_id)
            if draft is None:
                draft = explicit[ev.batch_id] = _Draft()
                explicit_order.append(ev.batch_id)
            draft.ensure_node(src_side, ev.ts)
            draft.ensure_node(dst_side, ev.ts)
            draft.add_edge(ev.src_id, ev.dst_id, rel_id, ev.ts)
            continue
        for side in (src_side, dst_side):
            if side[0] not in current.nodes:
                if len(current.nodes) >= batch_size:
                    flush_current()
                current.ensure_node(side, ev.ts)
            else:
                current.ensure_node(side, ev.ts)
        if ev.src_id not in current.nodes:
            # the destination triggered a flush; carry the source over
            current.ensure_node(src_side, ev.ts)
        current.add_edge(ev.src_id, ev.dst_id, rel_id, ev.ts)
    flush_current()
    for batch_id in explicit_order:
        graphs.append(explicit[batch_id].finalize(batch_id, registry))
    return graphs, registry


# -- graph directory ----------------------------------------------------------


def save_graph_dir(graphs: list[ProvenanceGraph], registry: RelationRegistry,
                   root: str | Path) -> None:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    (root / "registry.json").write_text(json.dumps(registry.to_dict(), indent=2))
    order = []
    for graph in graphs:
        graph.save_dir(root / graph.batch_id)
        order.append(graph.batch_id)
    (root / "meta.json").write_text(json.dumps({"batches": order}, indent=2))


def load_graph_dir(root: str | Path) -> tuple[list[ProvenanceGraph], RelationRegistry]:
    root = Path(root)
    registry = RelationRegistry.from_dict(json.loads((root / "registry.json").read_text()))
    meta = json.loads((root / "meta.json").read_text())
    graphs = [ProvenanceGraph.load_dir(root / b, b, registry) for b in meta["batches"]]
    return graphs, registry
