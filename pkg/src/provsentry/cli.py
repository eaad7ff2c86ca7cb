"""Command line front end.

Every subcommand is a thin client of the HTTP service: requests are built
here, executed either against a running server (--server URL) or against
an in-process instance of the app, and the JSON summary is printed.

Heavy imports happen after argument parsing so --threads can pin the BLAS
thread pools before numpy loads.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path


def _read_config_pairs(path: str) -> dict[str, str]:
    pairs: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise SystemExit(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = stripped.partition("=")
        pairs[key.strip()] = value.strip()
    return pairs


def _post(server: str | None, path: str, payload: dict) -> dict:
    import httpx

    if server:
        with httpx.Client(base_url=server, timeout=None) as client:
            resp = client.post(path, json=payload)
    else:
        import asyncio

        from .service import app

        async def go() -> httpx.Response:
            transport = httpx.ASGITransport(app=app)
            async with httpx.AsyncClient(transport=transport, timeout=None,
                                         base_url="http://provsentry.local") as client:
                return await client.post(path, json=payload)

        resp = asyncio.run(go())
    if resp.status_code != 200:
        try:
            detail = resp.json().get("detail", resp.text)
        except ValueError:
            detail = resp.text
        raise SystemExit(f"error: {detail}")
    return resp.json()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="provsentry",
        description="provenance-graph intrusion detection pipeline")
    parser.add_argument("--seed", type=int, default=None,
                        help="default RNG seed for subcommands that take one")
    parser.add_argument("--config", default=None,
                        help="key=value config file applied to featurize/train")
    parser.add_argument("--threads", type=int, default=None,
                        help="cap the numeric thread pools")
    parser.add_argument("--server", default=None,
                        help="base URL of a running service; default runs in-process")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a synthetic labeled scenario")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--nodes", type=int, default=2000)
    p.add_argument("--attack-fraction", type=float, default=0.05)
    p.add_argument("--template", default="FirefoxBackdoor",
                   choices=["FirefoxBackdoor", "SupplyChain"])
    p.add_argument("--benign-templates", type=int, default=5)
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("ingest", help="parse an event file into graph batches")
    p.add_argument("input", help="events file")
    p.add_argument("--format", default="jsonl", choices=["streamspot", "jsonl"])
    p.add_argument("--batch-size", type=int, default=5000)
    p.add_argument("--out", required=True, help="graph directory")

    p = sub.add_parser("featurize", help="fit the token embedder and store features")
    p.add_argument("--graphs", required=True, help="graph directory")
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("train", help="train the detector on a labeled graph dir")
    p.add_argument("--graphs", required=True, help="graph directory")
    p.add_argument("--labels", required=True, help="labels.jsonl ground truth")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--rl-tau", type=float, default=None,
                   help="selector step size (overrides config)")
    p.add_argument("--rl-pmin", type=float, default=None,
                   help="selector keep-fraction floor (overrides config)")

    p = sub.add_parser("detect", help="score every node of a graph dir")
    p.add_argument("--model", required=True)
    p.add_argument("--graphs", required=True)
    p.add_argument("--out", required=True, help="detections.jsonl to write")

    p = sub.add_parser("reconstruct", help="rebuild attack chains around alerts")
    p.add_argument("--model", required=True)
    p.add_argument("--graphs", required=True)
    p.add_argument("--detections", required=True)
    p.add_argument("--ttp", default=None, help="tactic rule file (JSON)")
    p.add_argument("--min-tactics", type=int, default=2)
    p.add_argument("--out", required=True, help="chains directory")

    p = sub.add_parser("attack-sim", help="inject mimicry clones into a scenario")
    p.add_argument("--graphs", required=True, help="single-batch graph directory")
    p.add_argument("--clones", type=int, default=5)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="mutated graph directory")

    p = sub.add_parser("eval", help="compare detections against ground truth")
    p.add_argument("--detections", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", default=None, help="metrics.json to write")

    p = sub.add_parser("export-emb", help="dump fused node embeddings as CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--graphs", required=True)
    p.add_argument("--out", required=True, help="CSV file to write")

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
            os.environ[var] = str(args.threads)

    def seed_of(local: int | None) -> int:
        if local is not None:
            return local
        return args.seed if args.seed is not None else 0

    config_pairs = _read_config_pairs(args.config) if args.config else {}

    if args.command == "serve":
        import uvicorn

        from .service import app
        uvicorn.run(app, host=args.host, port=args.port)
        return 0

    if args.command == "gen":
        out = _post(args.server, "/gen", {
            "out_dir": args.out, "n_nodes": args.nodes,
            "attack_fraction": args.attack_fraction, "template": args.template,
            "n_benign_templates": args.benign_templates,
            "seed": seed_of(args.seed)})
    elif args.command == "ingest":
        out = _post(args.server, "/ingest", {
            "input_path": args.input, "out_dir": args.out,
            "format": args.format, "batch_size": args.batch_size})
    elif args.command == "featurize":
        out = _post(args.server, "/featurize", {
            "graph_dir": args.graphs, "seed": seed_of(args.seed),
            "config": config_pairs})
    elif args.command == "train":
        pairs = dict(config_pairs)
        if args.rl_tau is not None:
            pairs["rl_tau"] = str(args.rl_tau)
        if args.rl_pmin is not None:
            pairs["rl_p_min"] = str(args.rl_pmin)
        out = _post(args.server, "/train", {
            "graph_dir": args.graphs, "labels_path": args.labels,
            "out_model": args.out, "seed": seed_of(args.seed),
            "config": pairs})
    elif args.command == "detect":
        out = _post(args.server, "/detect", {
            "model_path": args.model, "graph_dir": args.graphs,
            "out_path": args.out})
    elif args.command == "reconstruct":
        out = _post(args.server, "/reconstruct", {
            "model_path": args.model, "graph_dir": args.graphs,
            "detections_path": args.detections, "out_dir": args.out,
            "ttp_path": args.ttp, "min_tactics": args.min_tactics})
    elif args.command == "attack-sim":
        out = _post(args.server, "/attack-sim", {
            "graph_dir": args.graphs, "out_dir": args.out,
            "clones": args.clones, "seed": seed_of(args.seed)})
    elif args.command == "eval":
        out = _post(args.server, "/eval", {
            "detections_path": args.detections, "labels_path": args.labels,
            "out_path": args.out})
    elif args.command == "export-emb":
        out = _post(args.server, "/export-emb", {
            "model_path": args.model, "graph_dir": args.graphs,
            "out_path": args.out})
    else:  # pragma: no cover - argparse enforces the choices
        raise SystemExit(f"unknown command {args.command!r}")

    json.dump(out, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
