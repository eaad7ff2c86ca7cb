"""Parsers, graph assembly, adjacency views, and persistence round trips."""

import json

import numpy as np
import pytest

from provsentry.ingest import (
    EntityNode,
    Label,
    NodeKind,
    RelationGroup,
    RelationRegistry,
    build_graphs,
    load_graph_dir,
    parse_jsonl,
    parse_streamspot,
    save_graph_dir,
)


def jl(**kw):
    return json.dumps(kw)


def event_line(ts, src, dst, action, src_type="Process", dst_type="File",
               src_label=None, dst_label=None):
    subj = {"id": src, "type": src_type, "name": src}
    obj = {"id": dst, "type": dst_type, "name": dst}
    if src_label:
        subj["label"] = src_label
    if dst_label:
        obj["label"] = dst_label
    return jl(ts=ts, subject=subj, object=obj, action=action)


# -- canonical JSONL parser ---------------------------------------------------


def test_jsonl_connect_event_parses_to_one_netflow_edge():
    line = jl(ts=100,
              subject={"id": "p1", "type": "Process", "name": "firefox"},
              object={"id": "n1", "type": "Netflow", "name": "146.153.68.151:80"},
              action="connect")
    events, errors = parse_jsonl([line])
    assert errors == []
    assert len(events) == 1
    ev = events[0]
    assert ev.ts == 100
    assert ev.action == "connect"
    assert ev.src_id == "p1" and ev.src_kind is NodeKind.PROCESS
    assert ev.dst_id == "n1" and ev.dst_kind is NodeKind.NETFLOW

    graphs, registry = build_graphs(events)
    assert len(graphs) == 1
    rel = registry.id_of("connect")
    assert registry.spec(rel).group is RelationGroup.NETFLOW
    assert graphs[0].n_edges(rel) == 1


def test_jsonl_action_aliases_fold_to_canonical_spellings():
    lines = [
        event_line(1, "p", "n", "sendto", dst_type="Netflow"),
        event_line(2, "p", "n", "recvmsg", dst_type="Netflow"),
        event_line(3, "p", "f", "openat"),
    ]
    events, errors = parse_jsonl(lines)
    assert errors == []
    assert [ev.action for ev in events] == ["send", "recv", "open"]


def test_jsonl_non_process_subject_is_a_recoverable_error():
    lines = [
        event_line(1, "f", "p", "read", src_type="File", dst_type="Process"),
        event_line(2, "p", "f", "read"),
    ]
    events, errors = parse_jsonl(lines)
    assert len(events) == 1
    assert events[0].ts == 2
    assert len(errors) == 1
    assert errors[0].line_no == 1
    assert "Process" in errors[0].message


def test_jsonl_missing_field_records_line_and_continues():
    lines = [
        jl(ts=1, subject={"id": "p", "type": "Process", "name": "p"}, action="read"),
        event_line(2, "p", "f", "read"),
        "not json at all",
    ]
    events, errors = parse_jsonl(lines)
    assert len(events) == 1
    assert sorted(e.line_no for e in errors) == [1, 3]


def test_memory_mmap_lands_in_the_memory_relation_group():
    line = event_line(5, "p1", "0x7f00", "mmap", dst_type="Memory")
    events, _ = parse_jsonl([line])
    _, registry = build_graphs(events)
    assert registry.spec(registry.id_of("mmap")).group is RelationGroup.MEMORY


def test_duplicate_events_dedup_to_one_entry_with_count_two():
    lines = [
        event_line(7, "p1", "f1", "write"),
        event_line(3, "p1", "f1", "write"),
    ]
    events, _ = parse_jsonl(lines)
    graphs, registry = build_graphs(events)
    g = graphs[0]
    e = g.edges_of(registry.id_of("write"))
    assert len(e["src"]) == 1
    assert e["count"][0] == 2.0
    assert e["ts"][0] == 3  # earliest timestamp wins


def test_non_monotone_timestamps_are_kept_not_rejected():
    lines = [event_line(10, "p", "a", "read"), event_line(4, "p", "b", "read")]
    events, errors = parse_jsonl(lines)
    assert errors == []
    assert [ev.ts for ev in events] == [10, 4]


# -- trace TSV parser ---------------------------------------------------------


def test_streamspot_line_maps_fields_and_namespaces_ids():
    events, errors = parse_streamspot(["5\ta\t12\tc\tr\t0"])
    assert errors == []
    ev = events[0]
    assert ev.src_id == "0:5" and ev.src_kind is NodeKind.PROCESS
    assert ev.dst_id == "0:12" and ev.dst_kind is NodeKind.FILE
    assert ev.action == "r"
    assert ev.batch_id == "0"
    assert ev.ts == 1  # synthesized from the line ordinal


def test_streamspot_five_field_line_errors_and_stream_continues():
    lines = ["5\ta\t12\tc\tr", "5\ta\t12\tc\tr\t0"]
    events, errors = parse_streamspot(lines)
    assert len(events) == 1
    assert errors[0].line_no == 1
    assert "6 tab-separated fields" in errors[0].message


def test_streamspot_unknown_type_char_names_the_char():
    events, errors = parse_streamspot(["5\ta\t12\tz\tr\t0"])
    assert events == []
    assert "'z'" in errors[0].message


def test_streamspot_non_process_source_rejected():
    events, errors = parse_streamspot(["5\tc\t12\ta\tr\t0"])
    assert events == []
    assert len(errors) == 1


def test_streamspot_batches_group_by_graph_id():
    lines = ["1\ta\t2\tc\tr\tg1", "1\ta\t2\tc\tr\tg2", "1\ta\t3\tc\tw\tg1"]
    events, _ = parse_streamspot(lines)
    graphs, _ = build_graphs(events)
    by_id = {g.batch_id: g for g in graphs}
    assert set(by_id) == {"g1", "g2"}
    assert by_id["g1"].n_nodes == 3
    assert by_id["g2"].n_nodes == 2


def test_empty_stream_yields_no_graphs():
    events, errors = parse_streamspot([])
    assert events == [] and errors == []
    graphs, _ = build_graphs(events)
    assert graphs == []


# -- batching -----------------------------------------------------------------


def chain_events(n_nodes):
    """p0->f1, p0->f2, ... one new file node per event plus the shared process."""
    lines = [event_line(i, "p0", f"f{i}", "write") for i in range(1, n_nodes)]
    events, errors = parse_jsonl(lines)
    assert not errors
    return events


def test_batches_close_at_exact_node_count():
    # three disjoint stars of 5, 5, and 2 nodes: 12 distinct nodes at
    # batch_size 5 partition as 5/5/2 with no batch-straddling events
    lines = []
    ts = 0
    for b, width in enumerate((4, 4, 1)):
        for i in range(width):
            ts += 1
            lines.append(event_line(ts, f"p{b}", f"f{b}_{i}", "write"))
    events, _ = parse_jsonl(lines)
    graphs, _ = build_graphs(events, batch_size=5)
    assert [g.n_nodes for g in graphs] == [5, 5, 2]
    for g in graphs[:-1]:
        assert g.n_nodes == 5


def test_straddling_event_moves_wholly_into_the_next_batch():
    # a 12-node chain sharing one source: p0 is re-materialized in every
    # batch it straddles into, so later batches carry its copy
    graphs, registry = build_graphs(chain_events(12), batch_size=5)
    rel = registry.id_of("write")
    assert [g.n_nodes for g in graphs] == [5, 5, 4]
    for g in graphs:
        e = g.edges_of(rel)
        # every edge endpoint lives in its own batch
        assert e["src"].max(initial=-1) < g.n_nodes
        assert e["dst"].max(initial=-1) < g.n_nodes
        assert g.has_node("p0")
    assert sum(g.n_edges(rel) for g in graphs) == 11


def test_single_event_builds_one_graph_with_two_nodes_one_edge():
    graphs, _ = build_graphs(chain_events(2))
    assert len(graphs) == 1
    assert graphs[0].n_nodes == 2
    assert graphs[0].n_edges() == 1


# -- node bookkeeping ---------------------------------------------------------


def test_entity_node_drops_attrs_not_permitted_for_its_kind():
    node = EntityNode("f1", NodeKind.FILE, {"path": "/tmp/x", "ip": "1.2.3.4", "name": ""})
    assert node.attrs == {"path": "/tmp/x"}


def test_malicious_label_wins_over_earlier_benign_sighting():
    lines = [
        event_line(1, "p", "f", "read", dst_label="benign"),
        event_line(2, "p", "f", "read", dst_label="malicious"),
    ]
    events, _ = parse_jsonl(lines)
    graphs, _ = build_graphs(events)
    g = graphs[0]
    assert g.nodes[g.index_of("f")].label is Label.MALICIOUS


def test_first_seen_is_the_earliest_timestamp():
    lines = [event_line(9, "p", "f", "read"), event_line(2, "p", "f", "write")]
    events, _ = parse_jsonl(lines)
    graphs, _ = build_graphs(events)
    g = graphs[0]
    assert g.nodes[g.index_of("p")].first_seen == 2


# -- relation registry ----------------------------------------------------------


def test_registry_suffixes_name_on_cross_group_collision():
    reg = RelationRegistry()
    a = reg.register("write", RelationGroup.FILE)
    b = reg.register("write", RelationGroup.NETFLOW)
    assert a != b
    assert reg.spec(a).name == "write"
    assert reg.spec(b).name == "write_netflow"
    assert reg.register("write", RelationGroup.FILE) == a  # idempotent


def test_registry_round_trips_through_dict():
    reg = RelationRegistry()
    reg.register("fork", RelationGroup.PROCESS)
    reg.register("write", RelationGroup.FILE)
    reg.register_latent("latent_path_0")
    clone = RelationRegistry.from_dict(reg.to_dict())
    assert len(clone) == 3
    assert clone.base_ids() == [0, 1]
    assert clone.latent_ids() == [2]
    assert clone.id_of("latent_path_0") == 2


# -- adjacency views ------------------------------------------------------------


def star_graph():
    lines = [
        event_line(1, "p0", "f1", "write"),
        event_line(2, "p0", "f2", "write"),
        event_line(3, "p0", "f1", "write"),
        event_line(4, "p1", "f1", "read"),
        event_line(5, "p0", "p1", "fork", dst_type="Process"),
    ]
    events, _ = parse_jsonl(lines)
    graphs, registry = build_graphs(events)
    return graphs[0], registry


def coo(csr, n):
    rows = []
    for i in range(n):
        for k in range(csr.indptr[i], csr.indptr[i + 1]):
            rows.append((i, int(csr.cols[k]), float(csr.counts[k])))
    return sorted(rows)


def test_csr_forward_reverse_and_incident_agree():
    g, registry = star_graph()
    rel = registry.id_of("write")
    fwd = coo(g.csr(rel, "forward"), g.n_nodes)
    rev = coo(g.csr(rel, "reverse"), g.n_nodes)
    inc = coo(g.csr(rel, "incident"), g.n_nodes)
    assert sorted((d, s, c) for s, d, c in fwd) == rev
    assert sorted(fwd + [(d, s, c) for s, d, c in fwd]) == inc


def test_topology_rows_sum_counts_across_relations():
    g, registry = star_graph()
    topo = coo(g.topology_rows(), g.n_nodes)
    p0, p1 = g.index_of("p0"), g.index_of("p1")
    f1, f2 = g.index_of("f1"), g.index_of("f2")
    expected = sorted([
        (p0, f1, 2.0), (f1, p0, 2.0),   # two writes dedup to count 2
        (p0, f2, 1.0), (f2, p0, 1.0),
        (p1, f1, 1.0), (f1, p1, 1.0),   # read and write merge per (row, col)
        (p0, p1, 1.0), (p1, p0, 1.0),
    ])
    assert topo == expected


def test_topology_rows_drop_self_loops():
    lines = [event_line(1, "p0", "p0", "clone", dst_type="Process"),
             event_line(2, "p0", "f1", "write")]
    events, _ = parse_jsonl(lines)
    graphs, _ = build_graphs(events)
    g = graphs[0]
    topo = coo(g.topology_rows(), g.n_nodes)
    assert all(r != c for r, c, _ in topo)
    assert len(topo) == 2


def test_unknown_direction_raises():
    g, registry = star_graph()
    with pytest.raises(ValueError):
        g.csr(registry.id_of("write"), "sideways")


# -- persistence ----------------------------------------------------------------


def edge_multiset(g):
    out = []
    for rel_id in g.relation_ids():
        name = g.registry.spec(rel_id).name
        e = g.edges_of(rel_id)
        for s, d, c, t in zip(e["src"], e["dst"], e["count"], e["ts"]):
            out.append((name, g.nodes[s].id, g.nodes[d].id, float(c), int(t)))
    return sorted(out)


def test_graph_dir_round_trip_preserves_nodes_and_edges(tmp_path):
    lines = [
        event_line(1, "p0", "f1", "write", dst_label="malicious"),
        event_line(2, "p0", "n1", "connect", dst_type="Netflow"),
        event_line(3, "p0", "f1", "write"),
    ]
    events, _ = parse_jsonl(lines)
    graphs, registry = build_graphs(events)
    save_graph_dir(graphs, registry, tmp_path / "gd")
    loaded, reg2 = load_graph_dir(tmp_path / "gd")
    assert len(loaded) == len(graphs)
    a, b = graphs[0], loaded[0]
    assert [n.id for n in a.nodes] == [n.id for n in b.nodes]
    assert [n.kind for n in a.nodes] == [n.kind for n in b.nodes]
    assert [n.label for n in a.nodes] == [n.label for n in b.nodes]
    assert edge_multiset(a) == edge_multiset(b)


def test_canonical_event_round_trip_is_isomorphic():
    lines = [
        event_line(1, "p0", "f1", "write"),
        event_line(2, "p0", "f1", "write"),
        event_line(3, "p0", "n1", "connect", dst_type="Netflow"),
    ]
    events, _ = parse_jsonl(lines)
    graphs, _ = build_graphs(events)
    g = graphs[0]
    replayed = [json.dumps(ev) for ev in g.to_canonical_events()]
    events2, errors = parse_jsonl(replayed)
    assert not errors
    graphs2, _ = build_graphs(events2)
    g2 = graphs2[0]
    assert sorted(n.id for n in g.nodes) == sorted(n.id for n in g2.nodes)
    assert edge_multiset(g) == edge_multiset(g2)


def test_all_edge_sources_are_processes():
    g, _ = star_graph()
    for rel_id in g.relation_ids():
        e = g.edges_of(rel_id)
        for s in e["src"]:
            assert g.nodes[int(s)].kind is NodeKind.PROCESS
