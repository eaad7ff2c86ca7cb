"""Provenance-graph intrusion detection toolkit.

Ingests audit events into heterogeneous provenance graphs, learns
camouflage-resistant node embeddings with bandit-guided neighbor
filtering, flags malicious and anomalous nodes, and reconstructs attack
chains from the alerts.

Submodules import lazily so the CLI can configure thread pools before any
numeric library loads.
"""

import importlib

__version__ = "0.1.0"

_EXPORTS = {
    "PipelineConfig": ".config",
    "load_config": ".config",
    "NodeKind": ".ingest",
    "Label": ".ingest",
    "ProvenanceGraph": ".ingest",
    "RelationRegistry": ".ingest",
    "build_graphs": ".ingest",
    "parse_jsonl": ".ingest",
    "parse_streamspot": ".ingest",
    "save_graph_dir": ".ingest",
    "load_graph_dir": ".ingest",
    "TokenEmbedder": ".featurize",
    "featurize_graphs": ".featurize",
    "IsolationForest": ".iforest",
    "DetectionModel": ".detector",
    "DetectionRecord": ".detector",
    "Verdict": ".detector",
    "train_detector": ".detector",
    "detect_graph": ".detector",
    "embed_graph": ".detector",
    "fuse_decision": ".detector",
    "MetricsReport": ".metrics",
    "evaluate": ".metrics",
    "TtpMapping": ".chains",
    "AttackChain": ".chains",
    "load_ttp_mapping": ".chains",
    "run_lpa": ".chains",
    "extract_chains": ".chains",
    "export_chain": ".chains",
    "ScenarioConfig": ".harness",
    "generate_synthetic": ".harness",
    "inject_mimicry": ".harness",
}

__all__ = sorted(_EXPORTS) + ["__version__"]


def __getattr__(name: str):
    target = _EXPORTS.get(name)
    if target is None:
        raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
    return getattr(importlib.import_module(target, __name__), name)
