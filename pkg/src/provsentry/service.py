"""HTTP front end over the pipeline steps.

Every endpoint operates on server-local paths: the caller names input and
output artifacts, the service runs the corresponding pipeline step and
returns its summary. Domain errors (bad formats, missing artifacts,
unusable label sets) come back as 400s with the underlying message.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__, pipeline
from .config import PipelineConfig, apply_overrides, overrides_from_strings


class GenRequest(BaseModel):
    out_dir: str
    n_nodes: int = 2000
    attack_fraction: float = 0.05
    template: str = "FirefoxBackdoor"
    n_benign_templates: int = Field(default=5, ge=1, le=5)
    seed: int = 0


class GenResponse(BaseModel):
    events: str
    labels: str
    n_events: int
    n_nodes: int
    n_malicious: int


class IngestRequest(BaseModel):
    input_path: str
    out_dir: str
    format: str = "jsonl"
    batch_size: int = Field(default=5000, ge=2)


class IngestResponse(BaseModel):
    out: str
    n_events: int
    n_parse_errors: int
    n_batches: int
    n_nodes: int
    n_edges: int
    batches: list[str]


class FeaturizeRequest(BaseModel):
    graph_dir: str
    seed: int = 0
    config: dict[str, str] = Field(default_factory=dict)


class FeaturizeResponse(BaseModel):
    graphs: str
    vocab_size: int
    dim: int
    n_batches: int


class TrainRequest(BaseModel):
    graph_dir: str
    labels_path: str
    out_model: str
    seed: int = 0
    config: dict[str, str] = Field(default_factory=dict)


class TrainResponse(BaseModel):
    model: str
    epochs: int
    final_loss: float | None
    all_frozen_epoch: int | None
    anomaly_threshold: float
    keep_fractions: dict[str, float]


class DetectRequest(BaseModel):
    model_path: str
    graph_dir: str
    out_path: str


class DetectResponse(BaseModel):
    out: str
    n_nodes: int
    verdicts: dict[str, int]


class ReconstructRequest(BaseModel):
    model_path: str
    graph_dir: str
    detections_path: str
    out_dir: str
    ttp_path: str | None = None
    min_tactics: int = Field(default=2, ge=1)


class ChainSummary(BaseModel):
    batch: str
    chain_id: str
    n_members: int
    tactics: list[str]
    score: float


class ReconstructResponse(BaseModel):
    out: str
    n_alerts: int
    n_chains: int
    chains: list[ChainSummary]


class AttackSimRequest(BaseModel):
    graph_dir: str
    out_dir: str
    clones: int = Field(default=5, ge=1)
    seed: int = 0


class AttackSimResponse(BaseModel):
    out: str
    targets: list[str]
    clones: int
    n_nodes: int
    n_added: int


class EvalRequest(BaseModel):
    detections_path: str
    labels_path: str
    out_path: str | None = None


class EvalResponse(BaseModel):
    tp: int
    fp: int
    tn: int
    fn: int
    precision: float
    recall: float
    f1: float
    fpr: float
    auc: float | None = None
    out: str | None = None


class ExportEmbRequest(BaseModel):
    model_path: str
    graph_dir: str
    out_path: str


class ExportEmbResponse(BaseModel):
    out: str
    n_rows: int


def _build_config(raw: dict[str, str]) -> PipelineConfig:
    return apply_overrides(PipelineConfig(), overrides_from_strings(raw))


def create_app() -> FastAPI:
    app = FastAPI(title="provsentry",
                  description="provenance-graph intrusion detection pipeline",
                  version=__version__)

    def guarded(fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ValueError, KeyError, FileNotFoundError, NotADirectoryError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.post("/gen", response_model=GenResponse)
    def gen(req: GenRequest) -> GenResponse:
        out = guarded(pipeline.run_gen, req.out_dir, n_nodes=req.n_nodes,
                      attack_fraction=req.attack_fraction, template=req.template,
                      n_benign_templates=req.n_benign_templates, seed=req.seed)
        return GenResponse(**out)

    @app.post("/ingest", response_model=IngestResponse)
    def ingest(req: IngestRequest) -> IngestResponse:
        out = guarded(pipeline.run_ingest, req.input_path, req.out_dir,
                      fmt=req.format, batch_size=req.batch_size)
        return IngestResponse(**out)

    @app.post("/featurize", response_model=FeaturizeResponse)
    def featurize(req: FeaturizeRequest) -> FeaturizeResponse:
        cfg = guarded(_build_config, req.config)
        out = guarded(pipeline.run_featurize, req.graph_dir, cfg=cfg,
                      seed=req.seed)
        return FeaturizeResponse(**out)

    @app.post("/train", response_model=TrainResponse)
    def train(req: TrainRequest) -> TrainResponse:
        cfg = guarded(_build_config, req.config)
        out = guarded(pipeline.run_train, req.graph_dir, req.labels_path,
                      req.out_model, cfg=cfg, seed=req.seed)
        return TrainResponse(**out)

    @app.post("/detect", response_model=DetectResponse)
    def detect(req: DetectRequest) -> DetectResponse:
        out = guarded(pipeline.run_detect, req.model_path, req.graph_dir,
                      req.out_path)
        return DetectResponse(**out)

    @app.post("/reconstruct", response_model=ReconstructResponse)
    def reconstruct(req: ReconstructRequest) -> ReconstructResponse:
        out = guarded(pipeline.run_reconstruct, req.model_path, req.graph_dir,
                      req.detections_path, req.out_dir, ttp_path=req.ttp_path,
                      min_tactics=req.min_tactics)
        return ReconstructResponse(**out)

    @app.post("/attack-sim", response_model=AttackSimResponse)
    def attack_sim(req: AttackSimRequest) -> AttackSimResponse:
        out = guarded(pipeline.run_attack_sim, req.graph_dir, req.out_dir,
                      clones=req.clones, seed=req.seed)
        return AttackSimResponse(**out)

    @app.post("/eval", response_model=EvalResponse)
    def eval_(req: EvalRequest) -> EvalResponse:
        out = guarded(pipeline.run_eval, req.detections_path, req.labels_path,
                      req.out_path)
        return EvalResponse(**out)

    @app.post("/export-emb", response_model=ExportEmbResponse)
    def export_emb(req: ExportEmbRequest) -> ExportEmbResponse:
        out = guarded(pipeline.run_export_emb, req.model_path, req.graph_dir,
                      req.out_path)
        return ExportEmbResponse(**out)

    return app


app = create_app()
