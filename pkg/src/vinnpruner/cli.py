"""Command-line interface: headless pruning runs, algorithm comparisons,
mask-image export, fixture generation, and the HTTP server.

Exit codes: 0 success, 2 invalid arguments, 3 archive/model errors.
"""

from __future__ import annotations

import argparse
import base64
import csv
import hashlib
import json
import os
import socket
import sys
from pathlib import Path

import numpy as np

from . import persistence
from .fixtures import generate_fixtures
from .model import ModelError
from .pruning import PruneError, PruneSettings, mask_view_layout_from_shape
from .session import Session

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_ARCHIVE = 3

ALGO_FLAGS = {"map": "map", "lap": "lap", "lap-forward": "lap_forward", "lap-backward": "lap_backward"}


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _parse_layer_ratios(pairs: list[str]) -> dict[int, float]:
    out: dict[int, float] = {}
    for pair in pairs:
        try:
            key, value = pair.split("=", 1)
            out[int(key)] = float(value)
        except ValueError:
            raise CliError(f"--layer-ratio expects L=R, got {pair!r}", EXIT_USAGE)
    return out


def _load_archives(model_path: str, dataset_path: str):
    try:
        model = persistence.load_model(model_path)
        dataset = persistence.load_dataset(dataset_path)
    except (persistence.ArchiveError, ModelError, OSError) as exc:
        raise CliError(str(exc), EXIT_ARCHIVE)
    return model, dataset


def _mask_hashes(masks) -> dict[str, str]:
    return {
        str(i): hashlib.sha256(persistence.pack_mask(masks[i])).hexdigest()
        for i in sorted(masks)
    }


def _run_prune(model, dataset, algorithm: str, ratio: float, layer_ratios, steps: int) -> dict:
    session = Session(session_id="cli", model=model, dataset=dataset)
    try:
        settings = PruneSettings(
            algorithm=algorithm, global_ratio=ratio, per_layer_ratio=dict(layer_ratios)
        )
        settings.validate_layers(model)
    except PruneError as exc:
        raise CliError(str(exc), EXIT_USAGE)
    report_steps = []
    for step in session.list_steps():  # baseline only at this point
        report_steps.append(
            {
                "step": step.step_id,
                "report": step.report.to_dict(),
                "mask_hashes": _mask_hashes(step.masks),
            }
        )
    for _ in range(steps):
        step = session.run_prune_step(settings)
        report_steps.append(
            {
                "step": step.step_id,
                "report": step.report.to_dict(),
                "mask_hashes": _mask_hashes(step.masks),
            }
        )
    return {
        "model": model.name,
        "dataset": dataset.name,
        "settings": {
            "algorithm": algorithm,
            "global_ratio": ratio,
            "per_layer_ratio": {str(k): v for k, v in sorted(layer_ratios.items())},
        },
        "steps": report_steps,
    }


def _write_json(doc: dict, path: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def cmd_prune(args) -> int:
    model, dataset = _load_archives(args.model, args.dataset)
    doc = _run_prune(
        model, dataset, ALGO_FLAGS[args.algo], args.ratio,
        _parse_layer_ratios(args.layer_ratio), args.steps,
    )
    _write_json(doc, args.out)
    return EXIT_OK


def cmd_compare(args) -> int:
    model, dataset = _load_archives(args.model, args.dataset)
    algos = [a.strip() for a in args.algos.split(",") if a.strip()]
    for algo in algos:
        if algo not in ALGO_FLAGS:
            raise CliError(f"unknown algorithm {algo!r}", EXIT_USAGE)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    layer_ratios = _parse_layer_ratios(args.layer_ratio)
    rows = []
    for algo in algos:
        doc = _run_prune(model, dataset, ALGO_FLAGS[algo], args.ratio, layer_ratios, args.steps)
        _write_json(doc, out_dir / f"report-{algo}.json")
        for entry in doc["steps"]:
            rows.append(
                [
                    algo,
                    entry["step"],
                    f"{entry['report']['global_ratio']:.6f}",
                    f"{entry['report']['accuracy']:.6f}",
                    f"{entry['report']['mean_loss']:.6f}",
                ]
            )
    with open(out_dir / "compare.csv", "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["algo", "step", "ratio", "accuracy", "loss"])
        writer.writerows(rows)
    return EXIT_OK


def cmd_export_mask(args) -> int:
    try:
        doc = persistence.load_session_doc(args.session)
    except persistence.ArchiveError as exc:
        raise CliError(str(exc), EXIT_ARCHIVE)
    step_id = args.step if args.step is not None else doc["current_id"]
    by_id = {s["step_id"]: s for s in doc["steps"]}
    if step_id not in by_id:
        raise CliError(f"unknown step {step_id}", EXIT_USAGE)
    masks = {m["layer_index"]: m for m in by_id[step_id]["masks"]}
    if args.layer not in masks:
        raise CliError(f"layer {args.layer} has no mask in step {step_id}", EXIT_USAGE)
    entry = masks[args.layer]
    shape = tuple(entry["shape"])
    mask = persistence.unpack_mask(base64.b64decode(entry["bits"]), shape)
    layout = mask_view_layout_from_shape(shape)
    grid = mask.reshape(layout.rows, layout.cols)
    pixels = np.where(grid > 0, 255, 0).astype(np.uint8)  # 0 = pruned renders dark
    header = f"P5\n{layout.cols} {layout.rows}\n255\n".encode("ascii")
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_bytes(header + pixels.tobytes())
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    for name, path in [("--models-dir", args.models_dir), ("--datasets-dir", args.datasets_dir)]:
        if not Path(path).is_dir():
            raise CliError(f"{name} {path!r} is not a directory", EXIT_USAGE)
    port = args.port
    if port is None:
        port = int(os.environ.get("VINN_PORT", "8080"))
    if port == 0:
        with socket.socket() as probe:
            probe.bind((args.host, 0))
            port = probe.getsockname()[1]
    app = create_app(
        args.models_dir, args.datasets_dir, args.sessions_dir, static_dir=args.static_dir
    )
    print(f"serving on http://{args.host}:{port}", flush=True)
    uvicorn.run(app, host=args.host, port=port, log_level="warning")
    return EXIT_OK


def cmd_gen_fixtures(args) -> int:
    generate_fixtures(args.out, args.seed)
    print(f"fixtures written to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vinnpruner")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the HTTP API and UI server")
    serve.add_argument("--models-dir", required=True)
    serve.add_argument("--datasets-dir", required=True)
    serve.add_argument("--sessions-dir", default="sessions")
    serve.add_argument("--static-dir", default=None, help="built UI to serve under /")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=None, help="default 8080 or $VINN_PORT; 0 = OS-assigned")
    serve.set_defaults(func=cmd_serve)

    prune = sub.add_parser("prune", help="headless iterative pruning run")
    prune.add_argument("--model", required=True)
    prune.add_argument("--dataset", required=True)
    prune.add_argument("--algo", required=True, choices=sorted(ALGO_FLAGS))
    prune.add_argument("--ratio", type=float, required=True)
    prune.add_argument("--layer-ratio", action="append", default=[], metavar="L=R")
    prune.add_argument("--steps", type=int, default=1)
    prune.add_argument("--out", required=True)
    prune.set_defaults(func=cmd_prune)

    compare = sub.add_parser("compare", help="run several algorithms and emit a CSV summary")
    compare.add_argument("--algos", required=True, help="comma-separated, e.g. map,lap")
    compare.add_argument("--model", required=True)
    compare.add_argument("--dataset", required=True)
    compare.add_argument("--ratio", type=float, required=True)
    compare.add_argument("--layer-ratio", action="append", default=[], metavar="L=R")
    compare.add_argument("--steps", type=int, default=1)
    compare.add_argument("--out", required=True)
    compare.set_defaults(func=cmd_compare)

    export = sub.add_parser("export-mask", help="write one layer's mask as a binary PGM")
    export.add_argument("--session", required=True, help="session archive directory")
    export.add_argument("--layer", type=int, required=True)
    export.add_argument("--step", type=int, default=None)
    export.add_argument("--out", required=True)
    export.set_defaults(func=cmd_export_mask)

    gen = sub.add_parser("gen-fixtures", help="deterministically generate the fixture set")
    gen.add_argument("--out", required=True)
    gen.add_argument("--seed", type=int, default=20220822)
    gen.set_defaults(func=cmd_gen_fixtures)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (persistence.ArchiveError, ModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARCHIVE


if __name__ == "__main__":
    sys.exit(main())
