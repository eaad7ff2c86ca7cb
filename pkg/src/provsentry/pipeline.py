"""File-level pipeline steps shared by the CLI and the HTTP service.

Each step reads and writes artifacts on disk and returns a small
JSON-friendly summary. Artifact layout:

* graph dir: registry.json, meta.json, one subdir per batch with
  nodes.jsonl / edges.jsonl, optionally features.bin per batch and an
  embedder/ dir at the root once featurization ran,
* model file: the sectioned binary written by DetectionModel.save,
* detections.jsonl: one DetectionRecord per line,
* chains dir: chain_XXX.json / .dot per surviving chain, per batch.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from .chains import (DEFAULT_TTP_RULES, export_chain, extract_chains,
                     load_ttp_mapping, run_lpa)
from .config import PipelineConfig
from .detector import (DetectionModel, DetectionRecord, Verdict, detect_graph,
                       embed_graph, train_detector)
from .featurize import (TokenEmbedder, encode_node_features, featurize_graphs,
                        load_features, save_features)
from .harness import (ScenarioConfig, attack_processes, export_embeddings,
                      inject_mimicry, read_labels, scenario_events,
                      write_labels, write_scenario)
from .ingest import (Label, ProvenanceGraph, build_graphs, load_graph_dir,
                     parse_jsonl, parse_streamspot, save_graph_dir)
from .metrics import evaluate

logger = logging.getLogger(__name__)


def run_gen(out_dir: str | Path, *, n_nodes: int = 2000,
            attack_fraction: float = 0.05, template: str = "FirefoxBackdoor",
            n_benign_templates: int = 5, seed: int = 0) -> dict:
    """Write a synthetic scenario: events.jsonl plus labels.jsonl."""
    cfg = ScenarioConfig(n_nodes=n_nodes, attack_fraction=attack_fraction,
                         attack_template=template,
                         n_benign_templates=n_benign_templates, seed=seed)
    events, labels = scenario_events(cfg)
    events_path, labels_path = write_scenario(events, labels, out_dir)
    n_mal = sum(1 for lab in labels.values() if lab is Label.MALICIOUS)
    return {"events": str(events_path), "labels": str(labels_path),
            "n_events": len(events), "n_nodes": len(labels),
            "n_malicious": n_mal}


def run_ingest(input_path: str | Path, out_dir: str | Path, *,
               fmt: str = "jsonl", batch_size: int = 5000) -> dict:
    """Parse an event file and save the batched provenance graphs."""
    if fmt == "jsonl":
        events, errors = parse_jsonl(input_path)
    elif fmt == "streamspot":
        events, errors = parse_streamspot(input_path)
    else:
        raise ValueError(f"unknown input format {fmt!r}; expected jsonl or streamspot")
    for err in errors[:10]:
        logger.warning("%s line %d: %s", input_path, err.line_no, err.message)
    if not events:
        raise ValueError(f"no parseable events in {input_path}")
    graphs, registry = build_graphs(events, batch_size=batch_size)
    save_graph_dir(graphs, registry, out_dir)
    return {"out": str(out_dir), "n_events": len(events),
            "n_parse_errors": len(errors), "n_batches": len(graphs),
            "n_nodes": sum(g.n_nodes for g in graphs),
            "n_edges": sum(g.n_edges() for g in graphs),
            "batches": [g.batch_id for g in graphs]}


def _feature_paths(root: Path, graphs: list[ProvenanceGraph]) -> list[Path]:
    return [root / g.batch_id / "features.bin" for g in graphs]


def _features_for(root: Path, graphs: list[ProvenanceGraph],
                  cfg: PipelineConfig, seed: int, *,
                  fit_if_missing: bool) -> list[np.ndarray]:
    """Per-batch feature matrices: stored ones, else re-encoded with the
    stored embedder, else (when allowed) freshly fitted and persisted."""
    paths = _feature_paths(root, graphs)
    if all(p.exists() for p in paths):
        return [load_features(p) for p in paths]
    emb_dir = root / "embedder"
    if (emb_dir / "vectors.bin").exists():
        embedder = TokenEmbedder.load(emb_dir)
        return [encode_node_features(g, embedder) for g in graphs]
    if not fit_if_missing:
        raise ValueError(f"{root} has no features and no embedder; run featurize first")
    embedder, features = featurize_graphs(
        graphs, dim=cfg.token_dim, window=cfg.context_window,
        negatives=cfg.negative_samples, epochs=cfg.embedder_epochs,
        lr=cfg.embedder_lr, seed=seed)
    embedder.save(emb_dir)
    for path, feats in zip(paths, features):
        save_features(path, feats)
    return features


def run_featurize(graph_dir: str | Path, *,
                  cfg: PipelineConfig | None = None, seed: int = 0) -> dict:
    """Fit the token embedder on a graph dir and store per-batch features."""
    cfg = cfg or PipelineConfig()
    root = Path(graph_dir)
    graphs, _ = load_graph_dir(root)
    embedder, features = featurize_graphs(
        graphs, dim=cfg.token_dim, window=cfg.context_window,
        negatives=cfg.negative_samples, epochs=cfg.embedder_epochs,
        lr=cfg.embedder_lr, seed=seed)
    embedder.save(root / "embedder")
    for path, feats in zip(_feature_paths(root, graphs), features):
        save_features(path, feats)
    return {"graphs": str(root), "vocab_size": len(embedder.vocab),
            "dim": embedder.dim, "n_batches": len(graphs)}


def run_train(graph_dir: str | Path, labels_path: str | Path,
              out_model: str | Path, *, cfg: PipelineConfig | None = None,
              seed: int = 0) -> dict:
    """Train the detector on a labeled graph dir and save the model file."""
    cfg = cfg or PipelineConfig()
    root = Path(graph_dir)
    graphs, _ = load_graph_dir(root)
    labels = read_labels(labels_path)
    features = _features_for(root, graphs, cfg, seed, fit_if_missing=True)
    model, history = train_detector(graphs, features, labels, cfg, seed)
    out_model = Path(out_model)
    out_model.parent.mkdir(parents=True, exist_ok=True)
    model.save(out_model)
    return {"model": str(out_model), "epochs": history.epochs,
            "final_loss": history.losses[-1] if history.losses else None,
            "all_frozen_epoch": history.all_frozen_epoch,
            "anomaly_threshold": model.anomaly_threshold,
            "keep_fractions": {f"{model.relation_names[s.rel_id]}/layer{s.layer}": s.p
                               for s in model.slots}}


def run_detect(model_path: str | Path, graph_dir: str | Path,
               out_path: str | Path) -> dict:
    """Score every node of a graph dir and write detections.jsonl."""
    model = DetectionModel.load(model_path)
    root = Path(graph_dir)
    graphs, _ = load_graph_dir(root)
    features = _features_for(root, graphs, model.config, seed=0,
                             fit_if_missing=False)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    counts = {v.value: 0 for v in Verdict}
    total = 0
    with open(out_path, "w") as fh:
        for graph, feats in zip(graphs, features):
            records, _ = detect_graph(model, graph, feats)
            for rec in records:
                fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")
                counts[rec.verdict.value] += 1
                total += 1
    return {"out": str(out_path), "n_nodes": total, "verdicts": counts}


def read_detections(path: str | Path) -> list[DetectionRecord]:
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(DetectionRecord.from_dict(json.loads(line)))
    return records


def run_reconstruct(model_path: str | Path, graph_dir: str | Path,
                    detections_path: str | Path, out_dir: str | Path, *,
                    ttp_path: str | Path | None = None,
                    min_tactics: int = 2) -> dict:
    """Rebuild attack chains around the flagged nodes of each batch.

    Writes chain_XXX.json and chain_XXX.dot per chain under a per-batch
    subdirectory, plus a chains.json manifest at the output root.
    """
    model = DetectionModel.load(model_path)
    root = Path(graph_dir)
    graphs, _ = load_graph_dir(root)
    features = _features_for(root, graphs, model.config, seed=0,
                             fit_if_missing=False)
    records = read_detections(detections_path)
    flagged = {r.node_id for r in records
               if r.verdict in (Verdict.MALICIOUS, Verdict.ANOMALOUS)}
    confidence = {r.node_id: r.confidence for r in records}
    mapping = load_ttp_mapping(ttp_path) if ttp_path else DEFAULT_TTP_RULES

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = []
    total_chains = 0
    for graph, feats in zip(graphs, features):
        alerts = [n.id for n in graph.nodes if n.id in flagged]
        if not alerts:
            continue
        z = embed_graph(model, graph, feats)
        state = run_lpa(alerts, graph, z, mapping,
                        max_iters=model.config.lpa_max_iters)
        chains = extract_chains(state, graph, mapping,
                                min_tactics=min_tactics,
                                confidence=confidence)
        if not chains:
            continue
        batch_dir = out / graph.batch_id
        batch_dir.mkdir(parents=True, exist_ok=True)
        for chain in chains:
            (batch_dir / f"{chain.chain_id}.json").write_bytes(
                export_chain(chain, "json"))
            (batch_dir / f"{chain.chain_id}.dot").write_bytes(
                export_chain(chain, "dot"))
            manifest.append({"batch": graph.batch_id,
                             "chain_id": chain.chain_id,
                             "n_members": len(chain.members),
                             "tactics": chain.tactics,
                             "score": chain.score})
            total_chains += 1
    (out / "chains.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return {"out": str(out), "n_alerts": len(flagged),
            "n_chains": total_chains, "chains": manifest}


def run_attack_sim(graph_dir: str | Path, out_dir: str | Path, *,
                   clones: int = 5, seed: int = 0) -> dict:
    """Inject mimicry clones around the attack nodes of an ingested scenario.

    Writes a new graph dir (single batch, like the input) with labels.jsonl
    at its root covering the original and injected nodes.
    """
    root = Path(graph_dir)
    graphs, _ = load_graph_dir(root)
    if len(graphs) != 1:
        raise ValueError("mimicry injection expects a single-batch scenario")
    graph = graphs[0]
    labels = {n.id: n.label for n in graph.nodes if n.label is not None}
    targets = attack_processes(graph, labels)
    if not targets:
        raise ValueError("scenario has no labeled attack processes to mimic")
    mutated, merged = inject_mimicry(graph, targets, clones, seed=seed)
    out = Path(out_dir)
    save_graph_dir([mutated], mutated.registry, out)
    write_labels(merged, out / "labels.jsonl")
    return {"out": str(out), "targets": targets, "clones": clones,
            "n_nodes": mutated.n_nodes,
            "n_added": mutated.n_nodes - graph.n_nodes}


def run_eval(detections_path: str | Path, labels_path: str | Path,
             out_path: str | Path | None = None) -> dict:
    """Compare detections against ground truth and emit metrics.json."""
    records = read_detections(detections_path)
    truth = read_labels(labels_path)
    report = evaluate(records, truth)
    payload = report.to_dict()
    if out_path is not None:
        out_path = Path(out_path)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        payload = dict(payload, out=str(out_path))
    return payload


def run_export_emb(model_path: str | Path, graph_dir: str | Path,
                   out_path: str | Path) -> dict:
    """Write the fused embedding of every node as CSV."""
    model = DetectionModel.load(model_path)
    root = Path(graph_dir)
    graphs, _ = load_graph_dir(root)
    features = _features_for(root, graphs, model.config, seed=0,
                             fit_if_missing=False)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    rows = export_embeddings(model, graphs, features, out_path)
    return {"out": str(out_path), "n_rows": rows}
