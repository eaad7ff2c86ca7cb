"""Pipeline configuration.

One flat dataclass covers every stage so a single config file (simple
``key=value`` lines) can drive the whole toolchain. Defaults follow the
reference setup: 64-dim embeddings everywhere, Adam at 0.01, selector step
0.02, 1:1 oversampling with a 10% malicious label budget.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path


@dataclass
class PipelineConfig:
    # embedding widths
    hidden_dim: int = 64          # similarity/GNN width
    token_dim: int = 64           # token embedder output width
    relation_dim: int = 64        # relation/entity embedding width for latent mining

    # token embedder (skip-gram with negative sampling)
    context_window: int = 2
    negative_samples: int = 5
    embedder_epochs: int = 5
    embedder_lr: float = 0.025

    # latent relation mining
    path_hops: int = 2            # L: attention hops per composed path
    path_budget: int = 4          # K: total composed paths (anchored at the most frequent relations)
    latent_top_m: int = 8         # kept destinations per source node
    latent_candidate_cap: int = 1024

    # GNN / similarity training
    gnn_layers: int = 1
    learning_rate: float = 0.01
    lambda_similarity: float = 2.0   # weight on the layer-1 similarity loss
    lambda_reg: float = 0.01         # weight on the parameter L2 norm
    max_epochs: int = 300
    plateau_eps: float = 1e-4
    plateau_patience: int = 20

    # neighbor selector (per-relation bandit)
    rl_enabled: bool = True
    rl_tau: float = 0.02
    rl_p_init: float = 0.5
    rl_p_min: float = -1.0        # <= 0 means "use rl_tau"

    # label budgeting
    malicious_budget: float = 0.10
    benign_train_frac: float = 0.7
    benign_val_frac: float = 0.2  # slice of benign train reserved for threshold calibration

    # decision thresholds / anomaly detector
    confidence_threshold: float = 0.9
    anomaly_quantile: float = 0.995
    forest_trees: int = 100
    forest_subsample: int = 256

    # ingestion
    batch_size: int = 5000

    # chain reconstruction
    min_tactics: int = 2
    lpa_max_iters: int = 100

    def effective_p_min(self) -> float:
        return self.rl_tau if self.rl_p_min <= 0 else self.rl_p_min

    def validate(self) -> None:
        if not 0 < self.rl_tau < 1:
            raise ValueError(f"rl_tau must be in (0, 1), got {self.rl_tau}")
        if not 0 < self.rl_p_init <= 1:
            raise ValueError(f"rl_p_init must be in (0, 1], got {self.rl_p_init}")
        if self.effective_p_min() <= 0:
            raise ValueError("effective p_min must be positive")
        if self.batch_size < 2:
            raise ValueError("batch_size must be at least 2")
        if not 0 < self.malicious_budget <= 1:
            raise ValueError("malicious_budget must be in (0, 1]")
        if self.gnn_layers < 1:
            raise ValueError("gnn_layers must be >= 1")
        if self.path_hops < 1:
            raise ValueError("path_hops must be >= 1")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        fields = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - fields
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


def _coerce(raw: str, target_type: type):
    raw = raw.strip()
    if target_type is bool:
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"cannot parse {raw!r} as bool")
    if target_type is int:
        return int(raw)
    if target_type is float:
        return float(raw)
    return raw.strip('"')


def load_config(path: str | Path, base: PipelineConfig | None = None) -> PipelineConfig:
    """Load ``key = value`` lines over a base config.

    Blank lines and ``#`` comments are skipped; unknown keys raise with the
    offending line number.
    """
    cfg = dataclasses.replace(base) if base is not None else PipelineConfig()
    types = {f.name: f.type for f in dataclasses.fields(PipelineConfig)}
    # dataclass field types arrive as strings under `from __future__ import annotations`
    type_map = {"int": int, "float": float, "bool": bool, "str": str}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key not in types:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
        target = type_map.get(str(types[key]), str)
        try:
            setattr(cfg, key, _coerce(value, target))
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from exc
    cfg.validate()
    return cfg


def apply_overrides(cfg: PipelineConfig, overrides: dict) -> PipelineConfig:
    """Return a copy of cfg with the given field overrides applied."""
    out = dataclasses.replace(cfg, **overrides)
    out.validate()
    return out


def overrides_from_strings(pairs: dict[str, str]) -> dict:
    """Coerce raw string overrides (from the CLI or the API) to field types."""
    types = {f.name: f.type for f in dataclasses.fields(PipelineConfig)}
    type_map = {"int": int, "float": float, "bool": bool, "str": str}
    out = {}
    for key, raw in pairs.items():
        if key not in types:
            raise ValueError(f"unknown config key {key!r}")
        out[key] = _coerce(str(raw), type_map.get(str(types[key]), str))
    return out
