"""Command-line entry point.

Subcommands: synth-corpus, train-predictor, curate, train-editor, edit,
evaluate, run-all. Exit codes: 0 success, 1 validation error, 2 runtime
error. EMOEDIT_ARTIFACT_ROOT overrides the artifact root directory.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from emoedit.config import load_config

log = logging.getLogger(__name__)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, default=None, help="YAML config file")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--artifact-root", type=str, default=None, help="override the artifact root")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="emoedit", description="Emotion-evoked image editing toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-corpus", help="generate the procedural toy corpus")
    _add_common(p)

    p = sub.add_parser("train-predictor", help="train the 8-way emotion classifier")
    _add_common(p)
    p.add_argument("--corpus", type=Path, default=None, help="corpus directory (default: artifact root)")
    p.add_argument("--out", type=Path, default=None, help="checkpoint output path")

    p = sub.add_parser("curate", help="build the curated pair manifest")
    _add_common(p)
    p.add_argument("mode", choices=["epas", "epgs"], help="annotate existing pairs or generate+filter")
    p.add_argument("--in", dest="in_manifest", type=Path, default=None, help="input manifest (epas mode)")
    p.add_argument("--predictor", type=Path, default=None, help="predictor checkpoint")
    p.add_argument("--bank", type=Path, default=None, help="instruction bank file")
    p.add_argument("--out", type=Path, default=None, help="output manifest")
    p.add_argument("--report", type=Path, default=None, help="curation report file")

    p = sub.add_parser("train-editor", help="train the diffusion editor")
    _add_common(p)
    p.add_argument("--corpus", type=Path, default=None, help="pair manifest")
    p.add_argument("--codec", type=Path, default=None, help="codec checkpoint")
    p.add_argument("--out", type=Path, default=None, help="editor output directory")

    p = sub.add_parser("edit", help="critic-guided edit of one image")
    _add_common(p)
    p.add_argument("--image", type=Path, required=True)
    p.add_argument("--emotion", type=str, required=True)
    p.add_argument("--editor", type=Path, default=None, help="editor checkpoint")
    p.add_argument("--codec", type=Path, default=None, help="codec checkpoint")
    p.add_argument("--predictor", type=Path, default=None, help="predictor checkpoint")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--session", type=Path, default=None, help="directory for intermediates + verdict log")

    p = sub.add_parser("evaluate", help="score a triples manifest with the four metrics")
    _add_common(p)
    p.add_argument("--triples", type=Path, required=True)
    p.add_argument("--predictor", type=Path, default=None)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("run-all", help="run the full toy pipeline")
    _add_common(p)

    return parser


def _config_from_args(args) -> "RunConfig":
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.artifact_root is not None:
        overrides["artifact_root"] = args.artifact_root
    return load_config(args.config, overrides)


def _cmd_synth_corpus(args) -> int:
    from emoedit.pipeline import stage_synth_corpus

    cfg = _config_from_args(args)
    cfg.root.mkdir(parents=True, exist_ok=True)
    out = stage_synth_corpus(cfg)
    print(f"corpus written to {out}")
    return 0


def _cmd_train_predictor(args) -> int:
    from emoedit import synth
    from emoedit.predictor import TrainConfig, save_predictor, train_predictor
    from emoedit.pipeline import stage_synth_corpus

    cfg = _config_from_args(args)
    corpus_dir = args.corpus or stage_synth_corpus(cfg)
    images, labels = synth.load_corpus(corpus_dir)
    model, acc = train_predictor(
        images, labels, TrainConfig(epochs=cfg.predictor_epochs, lr=cfg.predictor_lr, seed=cfg.seed), cfg.image_side
    )
    out = args.out or cfg.root / "predictor.pt"
    save_predictor(model, out, extra={"train_accuracy": acc})
    print(f"predictor saved to {out} (train accuracy {acc:.3f})")
    return 0


def _cmd_curate(args) -> int:
    import json

    from emoedit import curation, synth
    from emoedit.images import save_image
    from emoedit.manifest import PairRecord, manifest_read, manifest_write
    from emoedit.pipeline import stage_curate, stage_synth_corpus, stage_train_predictor
    from emoedit.predictor import load_predictor

    cfg = _config_from_args(args)
    if args.mode == "epas":
        if args.in_manifest is None or args.predictor is None or args.out is None:
            print("curate epas requires --in, --predictor, --out", file=sys.stderr)
            return 1
        predictor = load_predictor(args.predictor)
        raw = manifest_read(args.in_manifest)
        pairs = [(r.source_path, r.target_path, r.instruction) for r in raw]
        records = curation.annotate_pairs(pairs, predictor, args.in_manifest.parent)
        manifest_write(records, args.out)
        print(f"annotated {len(records)} pairs -> {args.out}")
        return 0

    # epgs: full generate + filter path on the toy corpus
    corpus_dir = stage_synth_corpus(cfg)
    if args.predictor is not None:
        predictor_ckpt = args.predictor
    else:
        predictor_ckpt, _ = stage_train_predictor(cfg, corpus_dir)
    out = stage_curate(cfg, corpus_dir, predictor_ckpt)
    if args.out is not None and Path(args.out) != out:
        manifest_write(manifest_read(out), args.out)
    if args.report is not None:
        report = (cfg.root / "curated" / "report.json").read_text()
        Path(args.report).write_text(report)
    print(f"curated manifest at {out}")
    return 0


def _cmd_train_editor(args) -> int:
    from emoedit.pipeline import stage_train_editor

    cfg = _config_from_args(args)
    manifest = args.corpus or cfg.root / "curated" / "epgs.jsonl"
    codec = args.codec or cfg.root / "codec.pt"
    ckpt, losses = stage_train_editor(cfg, Path(manifest), Path(codec))
    print(f"editor saved to {ckpt} (final loss {losses[-1]:.4f})")
    return 0


def _cmd_edit(args) -> int:
    from emoedit.diffusion import build_schedule, load_codec, load_editor
    from emoedit.images import load_image, save_image
    from emoedit.inference import SamplerConfig, iterative_edit, save_session
    from emoedit.predictor import load_predictor
    from emoedit.taxonomy import emotion_index

    cfg = _config_from_args(args)
    emotion_index(args.emotion)
    codec = load_codec(args.codec or cfg.root / "codec.pt")
    nets, tcfg, _ = load_editor(args.editor or cfg.root / "editor" / "editor_latest.pt", codec)
    predictor = load_predictor(args.predictor or cfg.root / "predictor.pt")
    schedule = build_schedule(tcfg.T, tcfg.beta_start, tcfg.beta_end)
    scfg = SamplerConfig(
        steps=cfg.sampler_steps,
        guidance_emotion=cfg.guidance_emotion,
        guidance_image=cfg.guidance_image,
        start_frac=cfg.start_frac,
        seed=cfg.seed,
    )
    source = load_image(args.image)
    session = iterative_edit(
        source, args.emotion, nets, schedule, predictor, scfg, max_iterations=cfg.critic_max_iterations
    )
    save_image(session.final, args.out)
    if args.session is not None:
        save_session(session, args.session, scfg)
    print(f"edit complete: {session.stop_reason} after {len(session.iterations)} iterations -> {args.out}")
    return 0


def _cmd_evaluate(args) -> int:
    from emoedit.pipeline import stage_evaluate
    from emoedit.manifest import manifest_read, resolve_path
    from emoedit.images import load_image
    from emoedit.metrics import EvalTriple, evaluate_batch, write_report
    from emoedit.predictor import load_predictor

    cfg = _config_from_args(args)
    predictor = load_predictor(args.predictor or cfg.root / "predictor.pt")
    records = manifest_read(args.triples)
    triples = []
    skipped = 0
    for rec in records:
        try:
            src = load_image(resolve_path(args.triples, rec.source_path))
            gen = load_image(resolve_path(args.triples, rec.target_path))
        except Exception as exc:
            skipped += 1
            log.warning("skipping unreadable item: %s", exc)
            continue
        triples.append(EvalTriple(source=src, generated=gen, target_emotion=rec.target_emotion))
    report = evaluate_batch(triples, predictor)
    write_report(report, args.out)
    print(report.summary_table())
    if skipped:
        print(f"{skipped} unreadable items skipped")
    return 0


def _cmd_run_all(args) -> int:
    from emoedit.pipeline import run_pipeline

    cfg = _config_from_args(args)
    results = run_pipeline(cfg)
    print("pipeline complete:")
    for k, v in results.items():
        if k != "stages":
            print(f"  {k}: {v}")
    return 0


_COMMANDS = {
    "synth-corpus": _cmd_synth_corpus,
    "train-predictor": _cmd_train_predictor,
    "curate": _cmd_curate,
    "train-editor": _cmd_train_editor,
    "edit": _cmd_edit,
    "evaluate": _cmd_evaluate,
    "run-all": _cmd_run_all,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
