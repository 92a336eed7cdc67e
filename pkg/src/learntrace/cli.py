"""Command-line interface.

Every subcommand exits 0 on success and prints a single JSON line describing
what it wrote; failures exit nonzero with a JSON error object on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .data.greebles import GreeblesSpec, generate_greebles
from .data.manifest import load_manifest, save_manifest
from .data.sessions import load_sessions, save_sessions
from .encoder import EncoderConfig
from .errors import ConfigError, LearntraceError
from .pipeline import (
    StimulusStore,
    correctness_stats,
    evaluate_model,
    export_states,
    gt_label_reports,
    probability_trace,
    split_learners,
    split_sessions,
    train,
)
from .pipeline.train import Hyperparams
from .simulator import SimConfig, default_stimuli, oracle_ap, save_probes, simulate_population
from .tracers import TracerModel, TracerVariant


def _emit(payload: dict) -> None:
    print(json.dumps(payload))


def _variant_from_args(args) -> TracerVariant:
    return TracerVariant(
        args.variant,
        conditioning=args.conditioning,
        meta_per_class_acc=getattr(args, "meta", False),
    )


def _encoder_cfg_for(manifest, args) -> EncoderConfig | None:
    mode = getattr(args, "mode", "auto")
    if mode == "features" or (mode == "auto" and manifest.image_geometry is None):
        if not manifest.feature_names:
            raise ConfigError(f"dataset {manifest.name!r} has no feature vectors")
        return None
    geo = manifest.image_geometry
    if geo is None:
        raise ConfigError(f"dataset {manifest.name!r} has no image geometry")
    return EncoderConfig(
        input_height=geo["height"],
        input_width=geo["width"],
        img_chns=geo["channels"],
        embed_dim=args.embed_dim,
    )


def cmd_generate_greebles(args) -> None:
    if args.spec:
        spec = GreeblesSpec.from_json(args.spec)
    else:
        spec = GreeblesSpec(
            count_per_class=args.count_per_class, image_size=args.image_size, seed=args.seed
        )
    out = Path(args.out)
    manifest = generate_greebles(spec, out)
    spec.to_json(out / "spec.json")
    _emit(
        {
            "manifest": str(out / "manifest.json"),
            "items": len(manifest.items),
            "classes": manifest.classes,
        }
    )


def cmd_simulate(args) -> None:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.dataset:
        manifest = load_manifest(args.dataset)
        manifest_path = Path(args.dataset)
    else:
        manifest = default_stimuli(seed=args.seed)
        manifest_path = out / "stimuli.json"
        save_manifest(manifest_path, manifest)
    config = SimConfig(num_learners=args.learners, seed=args.seed)
    sessions, probes = simulate_population(config, manifest)
    sessions_path = out / "sessions.jsonl"
    probes_path = out / "probes.jsonl"
    save_sessions(sessions_path, sessions)
    save_probes(probes_path, probes)
    oracle = oracle_ap(probes, sessions)
    _emit(
        {
            "dataset": str(manifest_path),
            "sessions": str(sessions_path),
            "probes": str(probes_path),
            "learners": len(sessions),
            "oracle_test_micro": oracle["test_sequence"].micro,
        }
    )


def cmd_train(args) -> None:
    manifest = load_manifest(args.dataset)
    sessions = load_sessions(args.sessions, manifest)
    hp = Hyperparams(
        variant=_variant_from_args(args),
        lr_encoder=args.lr_encoder,
        lr_head=args.lr_head,
        batch_size=args.batch_size,
        patience=args.patience,
        max_epochs=args.max_epochs,
        embed_dim=args.embed_dim,
        seed=args.seed,
        dtype=args.dtype,
    )
    encoder_cfg = _encoder_cfg_for(manifest, args)
    assignment = split_learners([s.learner_id for s in sessions], seed=args.seed)
    model, report = train(sessions, hp, manifest, encoder_cfg, assignment)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ckpt = out / "model.ckpt"
    model.save(ckpt, extra_meta={"hyperparams": {**hp.__dict__, "variant": hp.variant.describe()}})
    (out / "train_report.json").write_text(
        json.dumps(
            {
                "best_epoch": report.best_epoch,
                "best_val_loss": report.best_val_loss,
                "epochs_run": report.epochs_run,
                "stop_reason": report.stop_reason,
                "train_loss": report.train_loss,
                "val_loss": report.val_loss,
                "clamp_hits": report.clamp_hits,
            },
            indent=1,
        )
    )
    (out / "split.json").write_text(
        json.dumps({"train": assignment.train, "val": assignment.val, "test": assignment.test})
    )
    _emit(
        {
            "checkpoint": str(ckpt),
            "best_epoch": report.best_epoch,
            "best_val_loss": report.best_val_loss,
            "epochs_run": report.epochs_run,
            "stop_reason": report.stop_reason,
        }
    )


def _load_model_sessions(args):
    manifest = load_manifest(args.dataset)
    sessions = load_sessions(args.sessions, manifest)
    model = TracerModel.load(args.checkpoint)
    if getattr(args, "use_split", "all") != "all":
        assignment = split_learners(
            [s.learner_id for s in sessions], seed=args.split_seed
        )
        sessions = split_sessions(sessions, assignment)[args.use_split]
    store = StimulusStore(manifest, model.encoder_cfg) if model.variant.uses_embeddings else None
    return manifest, sessions, model, store


def cmd_evaluate(args) -> None:
    manifest, sessions, model, store = _load_model_sessions(args)
    reports = evaluate_model(model, sessions, store)
    baseline = gt_label_reports(sessions, manifest.num_classes)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    payload = {
        "model": {tag: rep.to_dict() for tag, rep in reports.items()},
        "gt_label": {tag: rep.to_dict() for tag, rep in baseline.items()},
        "num_sessions": len(sessions),
    }
    (out / "ap_report.json").write_text(json.dumps(payload, indent=1))
    trace = probability_trace(
        model, sessions, store, manifest, per_class=args.probes_per_class, seed=args.seed
    )
    trace.to_csv(out / "trace.csv")
    _emit(
        {
            "ap_report": str(out / "ap_report.json"),
            "trace": str(out / "trace.csv"),
            "test_micro": reports["test_sequence"].micro,
            "test_macro": reports["test_sequence"].macro,
        }
    )


def cmd_trace(args) -> None:
    manifest, sessions, model, store = _load_model_sessions(args)
    trace = probability_trace(
        model, sessions, store, manifest, per_class=args.probes_per_class, seed=args.seed
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trace.to_csv(out / "trace.csv")
    _emit({"trace": str(out / "trace.csv"), "classes": trace.classes})


def cmd_export_states(args) -> None:
    _, sessions, model, store = _load_model_sessions(args)
    paths = export_states(model, sessions, store, args.out)
    _emit({k: str(v) for k, v in paths.items()})


def cmd_stats(args) -> None:
    manifest = load_manifest(args.dataset) if args.dataset else None
    sessions = load_sessions(args.sessions, manifest)
    stats = correctness_stats(sessions)
    payload = {
        "sessions": len(sessions),
        "train": {k: v for k, v in stats["train"].items() if k != "counts"},
        "test": {k: v for k, v in stats["test"].items() if k != "counts"},
    }
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "stats.json").write_text(json.dumps(payload, indent=1))
    _emit(payload)


def cmd_serve(args) -> None:
    import uvicorn

    from .service import SessionService, build_app

    paths = args.dataset or [
        p for p in os.environ.get("LEARNTRACE_DATASETS", "").split(",") if p.strip()
    ]
    if not paths:
        raise ConfigError("pass --dataset or set LEARNTRACE_DATASETS")
    datasets = {}
    for p in paths:
        m = load_manifest(p)
        datasets[m.name] = m
    out = args.out or os.environ.get("LEARNTRACE_OUT", "sessions.jsonl")
    bind = os.environ.get("LEARNTRACE_BIND", "")
    host = args.host or (bind.split(":")[0] if bind else "127.0.0.1")
    port = args.port or (int(bind.split(":")[1]) if ":" in bind else 8000)
    service = SessionService(datasets, out)
    app = build_app(service)
    print(json.dumps({"serving": sorted(datasets), "host": host, "port": port, "out": str(out)}))
    uvicorn.run(app, host=host, port=port, log_level="warning")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="learntrace")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, checkpoint=False):
        p.add_argument("--dataset", help="dataset manifest path")
        p.add_argument("--sessions", help="session JSONL path")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default="out", help="output directory")
        if checkpoint:
            p.add_argument("--checkpoint", required=True)
            p.add_argument("--use-split", choices=["all", "train", "val", "test"], default="all")
            p.add_argument("--split-seed", type=int, default=0)
            p.add_argument("--probes-per-class", type=int, default=50)

    p = sub.add_parser("generate-greebles", help="render the synthetic shape dataset")
    p.add_argument("--out", default="greebles")
    p.add_argument("--spec", help="generator spec JSON (overrides other flags)")
    p.add_argument("--count-per-class", type=int, default=400)
    p.add_argument("--image-size", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_generate_greebles)

    p = sub.add_parser("simulate", help="generate a synthetic learner population")
    common(p)
    p.add_argument("--learners", type=int, default=150)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="fit a tracer on a session log")
    common(p)
    p.add_argument("--variant", default="static", help="tracer kind")
    p.add_argument("--conditioning", choices=["base", "y", "y_z"], default=None)
    p.add_argument("--meta", action="store_true", help="append per-class accuracy input")
    p.add_argument("--embed-dim", type=int, default=16)
    p.add_argument("--mode", choices=["auto", "images", "features"], default="auto")
    p.add_argument("--dtype", choices=["float32", "float64"], default="float64")
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--patience", type=int, default=35)
    p.add_argument("--max-epochs", type=int, default=400)
    p.add_argument("--lr-encoder", type=float, default=1e-5)
    p.add_argument("--lr-head", type=float, default=1e-3)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="AP report and probability trace for a checkpoint")
    common(p, checkpoint=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("trace", help="probability trace only")
    common(p, checkpoint=True)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("export-states", help="dump recurrent states and emitted classifiers")
    common(p, checkpoint=True)
    p.set_defaults(func=cmd_export_states)

    p = sub.add_parser("stats", help="learner correctness histograms and skewness")
    p.add_argument("--sessions", required=True)
    p.add_argument("--dataset")
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("serve", help="run the session-collection service")
    p.add_argument("--dataset", action="append", help="manifest path (repeatable)")
    p.add_argument("--out", help="output session JSONL")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except LearntraceError as exc:
        print(json.dumps({"error": str(exc), "type": type(exc).__name__}), file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError) as exc:
        print(json.dumps({"error": str(exc), "type": type(exc).__name__}), file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
