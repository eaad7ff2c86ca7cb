"""Synthetic provenance scenarios with ground truth, plus mimicry injection.

The generator plants one attack (a compromised browser chain or a poisoned
update fleet) inside a sea of benign activity sampled from five archetypes.
Malicious entities reuse benign-looking names, paths, and ports, so nothing
is separable on a single attribute; what differs is how the entities
behave. The mimicry injector grafts benign DNS-resolution subgraphs onto
chosen attack nodes without touching any attack edge.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .ingest import (Label, NodeKind, ProvenanceGraph, RawEvent,
                     RelationRegistry, _name_of, build_graphs)

ATTACK_TEMPLATES = ("FirefoxBackdoor", "SupplyChain")

_BROWSERS = ["firefox", "chrome"]
_SHELLS = ["bash", "sh", "zsh"]
_TOOLS = ["vim", "gcc", "make", "python3"]
_SERVICES = ["cron", "apt-daily", "backupd"]
_RESOLVERS = ["systemd-resolve", "nscd"]
_BENIGN_IPS = [f"10.0.1.{i}" for i in range(2, 14)] + \
              [f"192.168.0.{i}" for i in range(2, 14)]
_BENIGN_PORTS = ["443", "80", "53"]
_CONF_PATHS = ["/etc/hosts", "/etc/ld.so.cache", "/etc/nsswitch.conf",
               "/etc/ssl/certs.pem"]
_LIB_PATHS = ["/usr/lib/libc.so", "/usr/lib/libssl.so", "/usr/lib/libz.so"]


@dataclass
class ScenarioConfig:
    n_nodes: int = 2000
    attack_fraction: float = 0.05
    attack_template: str = "FirefoxBackdoor"
    n_benign_templates: int = 5
    seed: int = 0

    def validate(self) -> None:
        if self.n_nodes < 50:
            raise ValueError("n_nodes must be >= 50")
        if not 0 < self.attack_fraction <= 0.5:
            raise ValueError("attack_fraction must be in (0, 0.5]")
        if self.attack_template not in ATTACK_TEMPLATES:
            raise ValueError(f"unknown attack template {self.attack_template!r}; "
                             f"choose one of {ATTACK_TEMPLATES}")
        if not 1 <= self.n_benign_templates <= 5:
            raise ValueError("n_benign_templates must be in 1..5")


class _Node(NamedTuple):
    id: str
    kind: NodeKind
    name: str
    label: Label


_ID_PREFIX = {NodeKind.PROCESS: "p", NodeKind.FILE: "f",
              NodeKind.NETFLOW: "n", NodeKind.MEMORY: "m"}


class _Scenario:
    """Event sink with serial node ids and monotone timestamps."""

    def __init__(self, rng: np.random.Generator) -> None:
        self.rng = rng
        self.events: list[RawEvent] = []
        self.labels: dict[str, Label] = {}
        self._serial = 0
        self._ts = 0
        self._shared: dict[str, _Node] = {}   # path-keyed singleton files

    @property
    def n_nodes(self) -> int:
        return self._serial

    def make(self, kind: NodeKind, name: str, label: Label = Label.BENIGN) -> _Node:
        self._serial += 1
        node = _Node(f"{_ID_PREFIX[kind]}{self._serial:05d}", kind, name, label)
        self.labels[node.id] = label
        return node

    def shared_file(self, path: str) -> _Node:
        """Singleton benign file (config or library) reused across templates."""
        node = self._shared.get(path)
        if node is None:
            node = self._shared[path] = self.make(NodeKind.FILE, path)
        return node

    def emit(self, action: str, src: _Node, dst: _Node, times: int = 1) -> None:
        for _ in range(times):
            self._ts += 1000
            self.events.append(RawEvent(
                ts=self._ts, action=action,
                src_id=src.id, src_kind=src.kind, src_name=src.name,
                src_label=src.label,
                dst_id=dst.id, dst_kind=dst.kind, dst_name=dst.name,
                dst_label=dst.label))

    def pick(self, pool: list[str]) -> str:
        return pool[int(self.rng.integers(0, len(pool)))]

    def benign_ip(self) -> str:
        return self.pick(_BENIGN_IPS)


# -- benign archetypes ------------------------------------------------------------


def _benign_browse(sc: _Scenario, cap: int) -> None:
    """Browser session: several full network round trips, cache write."""
    k = int(sc.rng.integers(2, 7))
    if sc.rng.random() < 0.1:
        k = int(sc.rng.integers(12, 25))   # occasional very busy browser
    k = max(1, min(k, cap - 3))
    proc = sc.make(NodeKind.PROCESS, sc.pick(_BROWSERS))
    conf = sc.shared_file(sc.pick(_CONF_PATHS))
    sc.emit("read", proc, conf)
    for _ in range(k):
        flow = sc.make(NodeKind.NETFLOW, f"{sc.benign_ip()}:{sc.pick(_BENIGN_PORTS)}")
        sc.emit("connect", proc, flow)
        sc.emit("send", proc, flow)
        sc.emit("recv", proc, flow)
    cache = sc.make(NodeKind.FILE, f"/home/user/.cache/web-{proc.id}.db")
    sc.emit("write", proc, cache)


def _benign_dns(sc: _Scenario, cap: int) -> None:
    """DNS resolution: resolver reads config, one UDP exchange, cache write."""
    proc = sc.make(NodeKind.PROCESS, sc.pick(_RESOLVERS))
    conf = sc.make(NodeKind.FILE, "/etc/resolv.conf")
    sc.emit("read", proc, conf)
    flow = sc.make(NodeKind.NETFLOW, f"{sc.benign_ip()}:53")
    sc.emit("connect", proc, flow)
    sc.emit("send", proc, flow)
    sc.emit("recv", proc, flow)
    cache = sc.make(NodeKind.FILE, f"/var/cache/dns-{proc.id}.db")
    sc.emit("write", proc, cache)


def _benign_files(sc: _Scenario, cap: int) -> None:
    """Editor/compiler session over a handful of documents."""
    j = max(2, min(int(sc.rng.integers(2, 9)), cap - 1))
    proc = sc.make(NodeKind.PROCESS, sc.pick(_TOOLS))
    for i in range(j):
        doc = sc.make(NodeKind.FILE, f"/home/user/work/doc-{sc.n_nodes + 1}.txt")
        if i % 2 == 0:
            sc.emit("open", proc, doc)
            sc.emit("read", proc, doc)
            sc.emit("close", proc, doc)
        else:
            sc.emit("write", proc, doc)


def _benign_proctree(sc: _Scenario, cap: int) -> None:
    """Shell forks a few children; each loads a shared library and exits."""
    c = max(2, min(int(sc.rng.integers(2, 6)), cap - 2))
    shell = sc.make(NodeKind.PROCESS, sc.pick(_SHELLS))
    lib = sc.shared_file(sc.pick(_LIB_PATHS))
    sc.emit("read", shell, lib)
    for _ in range(c):
        child = sc.make(NodeKind.PROCESS, sc.pick(_TOOLS))
        sc.emit("fork", shell, child)
        sc.emit("execute", shell, child)
        sc.emit("read", child, lib)
        sc.emit("exit", shell, child)


def _benign_service(sc: _Scenario, cap: int) -> None:
    """Periodic service: config read, mapped region, update check, log write."""
    proc = sc.make(NodeKind.PROCESS, sc.pick(_SERVICES))
    conf = sc.shared_file(sc.pick(_CONF_PATHS))
    sc.emit("read", proc, conf)
    region = sc.make(NodeKind.MEMORY, f"0x7f{sc.rng.integers(0, 2**24):06x}000")
    sc.emit("mmap", proc, region)
    sc.emit("read", proc, region)
    flow = sc.make(NodeKind.NETFLOW, f"{sc.benign_ip()}:443")
    sc.emit("connect", proc, flow)
    sc.emit("send", proc, flow)
    sc.emit("recv", proc, flow)
    log = sc.make(NodeKind.FILE, f"/var/log/{proc.name}.log")
    sc.emit("write", proc, log, times=2)


_BENIGN_ARCHETYPES = [_benign_browse, _benign_dns, _benign_files,
                      _benign_proctree, _benign_service]
_MIN_ARCHETYPE_NODES = 6


# -- attack templates ---------------------------------------------------------------


def _allocate_families(remaining: int, weights: list[float]) -> list[int]:
    """Largest-remainder split of the malicious node budget."""
    raw = remaining * np.asarray(weights)
    counts = np.floor(raw).astype(int)
    leftover = remaining - int(counts.sum())
    order = np.argsort(-(raw - counts), kind="stable")
    counts[order[:leftover]] += 1
    return counts.tolist()


def _plant_families(sc: _Scenario, owner: _Node, payload: _Node, n_extra: int) -> None:
    """Grow the attack beyond its core chain: two lateral-movement sweeps
    banner-grabbing across the internal subnet, plus a few support shells.

    Each sweep fans out from a single long-lived worker, the way one reused
    tool walks a subnet. Every helper bootstraps by reading the dropped
    payload, and the sweep traffic completes full exchanges on ordinary web
    ports, so nothing in any single event looks out of place; only the fan-out
    shape betrays the campaign.
    """
    if n_extra <= 0:
        return

    def launch() -> _Node:
        proc = sc.make(NodeKind.PROCESS, sc.pick(_SHELLS), Label.MALICIOUS)
        sc.emit("fork", owner, proc)
        sc.emit("execute", owner, proc)
        sc.emit("read", proc, payload)
        sc.emit("exit", owner, proc)
        return proc

    if n_extra <= 2:
        for _ in range(n_extra):
            launch()
        return
    support, scans, probes = _allocate_families(n_extra - 2, [0.16, 0.46, 0.38])
    scanner = launch()
    prober = launch()
    for _ in range(support):
        launch()

    def sweep(worker: _Node, count: int, port: int) -> None:
        for _ in range(count):
            flow = sc.make(NodeKind.NETFLOW, f"{sc.benign_ip()}:{port}",
                           Label.MALICIOUS)
            sc.emit("connect", worker, flow)
            sc.emit("send", worker, flow)
            sc.emit("recv", worker, flow)

    sweep(scanner, scans, 443)
    sweep(prober, probes, 80)


_CORE_NODES = 7


def _attack_firefox(sc: _Scenario, n_malicious: int) -> None:
    """Drive-by browser compromise: exploit payload over an ad flow, mapped
    shellcode, dropped binary, privileged child, command channel."""
    browser = sc.make(NodeKind.PROCESS, "firefox", Label.MALICIOUS)
    conf = sc.shared_file(sc.pick(_CONF_PATHS))
    sc.emit("read", browser, conf)
    for _ in range(2):   # ordinary browsing before the exploit lands
        flow = sc.make(NodeKind.NETFLOW, f"{sc.benign_ip()}:443")
        sc.emit("connect", browser, flow)
        sc.emit("send", browser, flow)
        sc.emit("recv", browser, flow)
    exploit = sc.make(NodeKind.NETFLOW, "146.153.68.151:80", Label.MALICIOUS)
    sc.emit("connect", browser, exploit)
    sc.emit("recv", browser, exploit)
    region = sc.make(NodeKind.MEMORY, "0x7fdeadbe0000", Label.MALICIOUS)
    sc.emit("mmap", browser, region)
    sc.emit("mprotect", browser, region)
    dropped = sc.make(NodeKind.FILE, "/tmp/.font-cache.bin", Label.MALICIOUS)
    sc.emit("write", browser, dropped)
    child = sc.make(NodeKind.PROCESS, "bash", Label.MALICIOUS)
    sc.emit("fork", browser, child)
    sc.emit("execute", browser, child)
    sc.emit("read", child, dropped)
    sc.emit("read", child, sc.shared_file("/etc/passwd"))
    c2 = sc.make(NodeKind.NETFLOW, "146.153.68.212:443", Label.MALICIOUS)
    sc.emit("connect", child, c2)
    sc.emit("send", child, c2, times=2)
    sc.emit("recv", child, c2)
    archive = sc.make(NodeKind.FILE, "/tmp/.xauth-cache.tar", Label.MALICIOUS)
    sc.emit("write", child, archive, times=2)
    sc.emit("read", child, archive)
    sc.emit("send", child, c2)
    _plant_families(sc, child, dropped, n_malicious - _CORE_NODES)


_FLEET_TIERS = (1, 5, 10)


def _fleet_plan(k: int) -> list[int]:
    """Housekeeping repetitions for the clean update workers.

    A couple of idle units plus a matching cohort at each activity tier, so
    no level of busy-ness is unique to any single worker. Cohort size is
    capped to keep the fleet's benign footprint bounded at large budgets.
    """
    per = max(1, min(k // 2, 12))
    plan = [0, 0]
    for tier in _FLEET_TIERS:
        plan.extend([tier] * per)
    return plan


def _fleet_reserve(n_malicious: int) -> int:
    """Benign nodes the update-fleet template creates around its implants:
    manager plus its config, one channel config per implant, and the clean
    workers with their flows, configs, and housekeeping objects."""
    k = max(1, n_malicious // 2)
    return 2 + k + sum(3 + 4 * r for r in _fleet_plan(k))


def _attack_supplychain(sc: _Scenario, n_malicious: int) -> None:
    """Poisoned update channel: one manager service spawns a fleet of
    update workers, and the workers that pulled the trojaned build beacon
    out to per-host controllers on a single unregistered port.

    Clean workers from the same manager go through identical motions
    (spawn, channel config, one fetch), and the busier ones run resolver
    housekeeping between fetches, so nothing in a worker's own profile
    separates implant from clean sibling; the tell is the far end of its
    flow, and it fades from a worker's surroundings as camouflage piles up.
    """
    k = max(1, n_malicious // 2)
    spare = n_malicious - 2 * k
    manager = sc.make(NodeKind.PROCESS, "update-manager")
    sc.emit("read", manager, sc.shared_file(sc.pick(_CONF_PATHS)))

    c2_no = 0

    def beacon() -> _Node:
        nonlocal c2_no
        c2_no += 1
        addr = f"146.153.{60 + c2_no // 200}.{2 + c2_no % 200}:4444"
        return sc.make(NodeKind.NETFLOW, addr, Label.MALICIOUS)

    units = [-1] * k + _fleet_plan(k)   # -1 marks an implant
    for idx in sc.rng.permutation(len(units)):
        tier = units[int(idx)]
        evil = tier < 0
        worker = sc.make(NodeKind.PROCESS, "updaterd",
                         Label.MALICIOUS if evil else Label.BENIGN)
        sc.emit("fork", manager, worker)
        sc.emit("execute", manager, worker)
        conf = sc.make(NodeKind.FILE, f"/etc/updater/{worker.id}.conf")
        sc.emit("read", worker, conf)
        if evil:
            flow = beacon()
        else:
            flow = sc.make(NodeKind.NETFLOW, f"{sc.benign_ip()}:443")
        for act in ("connect", "send", "recv"):
            sc.emit(act, worker, flow)
        if evil and spare:   # odd budget: the first implant keeps two beacons
            spare = 0
            extra = beacon()
            for act in ("connect", "send", "recv"):
                sc.emit(act, worker, extra)
        for j in range(max(tier, 0)):
            sc.emit("read", worker, sc.make(NodeKind.FILE, "/etc/resolv.conf"))
            sc.emit("read", worker, sc.make(NodeKind.FILE, "/etc/hosts"))
            lookup = sc.make(NodeKind.NETFLOW, f"{sc.benign_ip()}:53")
            for act in ("connect", "send", "recv"):
                sc.emit(act, worker, lookup)
            sc.emit("write", worker,
                    sc.make(NodeKind.FILE, f"/var/cache/dns-{worker.id}-{j}.db"))


_ATTACKS = {"FirefoxBackdoor": _attack_firefox, "SupplyChain": _attack_supplychain}
_MIN_MALICIOUS = {"FirefoxBackdoor": _CORE_NODES, "SupplyChain": 2}


def _benign_reserve(template: str, n_malicious: int) -> int:
    """Benign props each attack template creates alongside its chain."""
    if template == "SupplyChain":
        return _fleet_reserve(n_malicious)
    return 4


# -- scenario assembly ----------------------------------------------------------------


def scenario_events(cfg: ScenarioConfig) -> tuple[list[RawEvent], dict[str, Label]]:
    """Generate the raw event stream and the full ground-truth label map."""
    cfg.validate()
    n_malicious = round(cfg.attack_fraction * cfg.n_nodes)
    minimum = _MIN_MALICIOUS[cfg.attack_template]
    if n_malicious < minimum:
        raise ValueError(f"attack_fraction too small: the {cfg.attack_template} "
                         f"template needs at least {minimum} malicious nodes")
    reserve = _benign_reserve(cfg.attack_template, n_malicious)
    lead = cfg.n_nodes - n_malicious - reserve
    if lead < 4:
        raise ValueError(f"n_nodes too small: the {cfg.attack_template} template "
                         f"needs about {n_malicious + reserve + 4} nodes at this "
                         f"attack_fraction")
    sc = _Scenario(np.random.default_rng(cfg.seed))

    # leading benign session doubles as the padding host; cap it so the
    # attack template and its benign props always fit
    _benign_browse(sc, lead)
    padding_host = next(_Node(ev.src_id, ev.src_kind, ev.src_name, Label.BENIGN)
                        for ev in sc.events if ev.src_kind is NodeKind.PROCESS)
    _ATTACKS[cfg.attack_template](sc, n_malicious)

    archetypes = _BENIGN_ARCHETYPES[:cfg.n_benign_templates]
    while cfg.n_nodes - sc.n_nodes >= _MIN_ARCHETYPE_NODES:
        idx = int(sc.rng.integers(0, len(archetypes)))
        archetypes[idx](sc, cfg.n_nodes - sc.n_nodes)
    while sc.n_nodes < cfg.n_nodes:   # single-node padding reads
        extra = sc.make(NodeKind.FILE, f"/home/user/work/doc-{sc.n_nodes}.txt")
        sc.emit("read", padding_host, extra)

    made_malicious = sum(1 for v in sc.labels.values() if v is Label.MALICIOUS)
    assert sc.n_nodes == cfg.n_nodes, "node budget drifted"
    assert made_malicious == n_malicious, "malicious budget drifted"
    return sc.events, sc.labels


def generate_synthetic(cfg: ScenarioConfig,
                       registry: RelationRegistry | None = None,
                       ) -> tuple[ProvenanceGraph, dict[str, Label]]:
    """Build the scenario as a single provenance graph plus ground truth."""
    events, labels = scenario_events(cfg)
    graphs, _ = build_graphs(events, registry, batch_size=cfg.n_nodes + 1)
    return graphs[0], labels


def attack_processes(graph: ProvenanceGraph, labels: dict[str, Label]) -> list[str]:
    """Malicious process ids, the usual grafting points for mimicry."""
    return [node.id for node in graph.nodes
            if node.kind is NodeKind.PROCESS
            and labels.get(node.id) is Label.MALICIOUS]


# -- mimicry injection ----------------------------------------------------------------


def _events_of(graph: ProvenanceGraph) -> list[RawEvent]:
    out = []
    for rec in graph.to_canonical_events():
        subj, obj = rec["subject"], rec["object"]
        out.append(RawEvent(
            ts=rec["ts"], action=rec["action"],
            src_id=subj["id"], src_kind=NodeKind(subj["type"]),
            src_name=subj["name"],
            src_label=Label(subj["label"]) if subj.get("label") else None,
            dst_id=obj["id"], dst_kind=NodeKind(obj["type"]),
            dst_name=obj["name"],
            dst_label=Label(obj["label"]) if obj.get("label") else None))
    return out


@dataclass(frozen=True)
class TemplateStep:
    """One object node of a mimicry template and the actions taken on it.

    The name may contain "{ip}" (replaced by a random benign address) or
    "{serial}" (replaced by the clone's running number) so repeated clones
    stay plausibly distinct.
    """

    actions: tuple[str, ...]
    kind: NodeKind
    name: str


DNS_TEMPLATE: tuple[TemplateStep, ...] = (
    TemplateStep(("read",), NodeKind.FILE, "/etc/resolv.conf"),
    TemplateStep(("read",), NodeKind.FILE, "/etc/hosts"),
    TemplateStep(("connect", "send", "recv"), NodeKind.NETFLOW, "{ip}:53"),
    TemplateStep(("write",), NodeKind.FILE, "/var/cache/dns-{serial}.db"),
)


def inject_mimicry(graph: ProvenanceGraph, attack_nodes: list[str],
                   clone_count: int,
                   benign_template: tuple[TemplateStep, ...] = DNS_TEMPLATE,
                   seed: int = 0) -> tuple[ProvenanceGraph, dict[str, Label]]:
    """Graft benign template clones onto the given attack nodes.

    A process target performs each template step itself, so every clone of
    the default DNS template hangs four fresh benign objects (two config
    reads, a port-53 exchange, a cache write) directly off the target's own
    event neighborhood, the way a compromised process would launder its
    profile with lookups it never needed. A non-process target cannot be an
    event subject, so a fresh resolver process adopts it (reads or contacts
    the target, then runs the template), at one extra node per clone.
    Original edges and the labels of pre-existing nodes are untouched; every
    injected node is labeled benign.
    """
    for node_id in attack_nodes:
        if not graph.has_node(node_id):
            raise ValueError(f"attack node {node_id!r} not present in graph")
    rng = np.random.default_rng(seed)
    events = _events_of(graph)
    ts = max((ev.ts for ev in events), default=0)
    labels = {node.id: node.label or Label.BENIGN for node in graph.nodes}
    serial = 0

    def fresh(kind: NodeKind, name: str) -> _Node:
        nonlocal serial
        serial += 1
        node = _Node(f"mimic{serial:05d}", kind, name, Label.BENIGN)
        labels[node.id] = Label.BENIGN
        return node

    def emit(action: str, src: _Node, dst: _Node) -> None:
        nonlocal ts
        ts += 1000
        events.append(RawEvent(ts=ts, action=action,
                               src_id=src.id, src_kind=src.kind,
                               src_name=src.name, src_label=src.label,
                               dst_id=dst.id, dst_kind=dst.kind,
                               dst_name=dst.name, dst_label=dst.label))

    def run_template(performer: _Node, clone_no: int) -> None:
        for step in benign_template:
            name = step.name
            if "{ip}" in name:
                name = name.replace(
                    "{ip}", _BENIGN_IPS[int(rng.integers(0, len(_BENIGN_IPS)))])
            if "{serial}" in name:
                name = name.replace("{serial}", f"{clone_no:05d}")
            obj = fresh(step.kind, name)
            for action in step.actions:
                emit(action, performer, obj)

    clone_no = 0
    for node_id in attack_nodes:
        target_node = graph.nodes[graph.index_of(node_id)]
        target = _Node(target_node.id, target_node.kind,
                       _name_of(target_node), target_node.label or Label.BENIGN)
        for _ in range(clone_count):
            clone_no += 1
            if target.kind is NodeKind.PROCESS:
                run_template(target, clone_no)
                continue
            resolver = fresh(NodeKind.PROCESS,
                             _RESOLVERS[int(rng.integers(0, len(_RESOLVERS)))])
            if target.kind is NodeKind.NETFLOW:
                emit("connect", resolver, target)
            else:
                emit("read", resolver, target)
            run_template(resolver, clone_no)

    graphs, _ = build_graphs(events, RelationRegistry(),
                             batch_size=len(labels) + 1)
    return graphs[0], labels


# -- artifact export --------------------------------------------------------------------


def write_scenario(events: list[RawEvent], labels: dict[str, Label],
                   out_dir: str | Path) -> tuple[Path, Path]:
    """Write events.jsonl (canonical schema) and labels.jsonl."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    events_path = out / "events.jsonl"
    with open(events_path, "w") as fh:
        for ev in events:
            rec = {"ts": ev.ts,
                   "subject": {"id": ev.src_id, "type": ev.src_kind.value,
                               "name": ev.src_name},
                   "object": {"id": ev.dst_id, "type": ev.dst_kind.value,
                              "name": ev.dst_name},
                   "action": ev.action}
            if ev.src_label:
                rec["subject"]["label"] = ev.src_label.value
            if ev.dst_label:
                rec["object"]["label"] = ev.dst_label.value
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    labels_path = out / "labels.jsonl"
    write_labels(labels, labels_path)
    return events_path, labels_path


def write_labels(labels: dict[str, Label], path: str | Path) -> None:
    with open(path, "w") as fh:
        for node_id, label in labels.items():
            fh.write(json.dumps({"node_id": node_id, "label": label.value}) + "\n")


def read_labels(path: str | Path) -> dict[str, Label]:
    labels = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            labels[rec["node_id"]] = Label(rec["label"])
    return labels


def export_embeddings(model, graphs: ProvenanceGraph | list[ProvenanceGraph],
                      features: np.ndarray | list[np.ndarray],
                      path: str | Path) -> int:
    """CSV with one row per node: id, ground-truth label, verdict, embedding.

    Accepts a single graph or a list of batches; returns the row count.
    """
    from .detector import detect_graph
    if isinstance(graphs, ProvenanceGraph):
        graphs, features = [graphs], [features]
    rows = 0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header_dim = None
        for graph, feats in zip(graphs, features):
            records, z = detect_graph(model, graph, feats)
            if header_dim is None:
                header_dim = z.shape[1]
                writer.writerow(["node_id", "label", "verdict"]
                                + [f"z{i}" for i in range(header_dim)])
            for node, rec, row in zip(graph.nodes, records, z):
                label = node.label.value if node.label else "unlabeled"
                writer.writerow([node.id, label, rec.verdict.value]
                                + [f"{v:.10g}" for v in row])
                rows += 1
    return rows
