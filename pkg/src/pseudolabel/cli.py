"""Command line entry point: ``pseudolabel {label,score,synth,stats}``.

Exit status is 0 on success, 1 for input errors and 2 for pipeline errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import List, Optional

from . import __version__
from .filtering import FilterThresholds
from .manifest import (
    ManifestError,
    channel_of,
    corpus_stats,
    parse_category_map,
    prefix_categorizer,
    read_manifest,
)
from .pipeline import InputError, PipelineConfig, PipelineError, run_label
from .scoring import GlmError, GlmTable, batch_score, parse_glm
from .synthetic import NoiseModel, generate_truth, write_synthetic_corpus
from .textnorm import NormalizationConfig

log = logging.getLogger("pseudolabel")

EXIT_OK, EXIT_INPUT, EXIT_PIPELINE = 0, 1, 2

THRESHOLD_FLAGS = ("r_w_min", "r_w_max", "d_a_min", "d_a_max", "c_t_min", "w_t_min", "conf_threshold")


def _load_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    with open(path, encoding="utf-8") as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise InputError(f"config {path} must hold a JSON object")
    return cfg


def _norm_config(args) -> NormalizationConfig:
    return NormalizationConfig(
        remove_punctuation=not args.keep_punctuation,
        numbers_to_words=not args.keep_numbers,
    )


def _load_glm(path: Optional[str]) -> Optional[GlmTable]:
    if not path:
        return None
    with open(path, encoding="utf-8") as fh:
        return parse_glm(fh)


def _categorizer(path: Optional[str]):
    if not path:
        return channel_of
    with open(path, encoding="utf-8") as fh:
        return prefix_categorizer(parse_category_map(fh))


def build_pipeline_config(args) -> PipelineConfig:
    """Config file values first, then any flag given on the command line."""
    file_cfg = _load_config(args.config)
    th = dict(file_cfg.get("thresholds", {}))
    for name in THRESHOLD_FLAGS:
        value = getattr(args, name)
        if value is not None:
            th[name] = value
    merged = {k: v for k, v in file_cfg.items() if k != "thresholds"}
    for key in ("e1", "e2", "audio_root", "out", "glm", "workers", "category_map", "margin"):
        value = getattr(args, key)
        if value is not None:
            merged[key] = value
    missing = [k for k in ("e1", "e2", "audio_root", "out") if not merged.get(k)]
    if missing:
        raise InputError(f"missing required setting(s): {', '.join(missing)}")
    return PipelineConfig(
        e1_path=merged["e1"],
        e2_path=merged["e2"],
        audio_root=merged["audio_root"],
        output_root=merged["out"],
        thresholds=FilterThresholds.from_mapping(th),
        norm=_norm_config(args),
        glm_path=merged.get("glm"),
        workers=int(merged.get("workers", 1)),
        category_map_path=merged.get("category_map"),
        margin=float(merged.get("margin", 0.0)),
    )


def cmd_label(args) -> int:
    cfg = build_pipeline_config(args)
    result = run_label(cfg)
    s = result.stats
    print(
        f"matched {s['matched_segments']}, kept {s['kept_segments']}, "
        f"dropped {s['dropped_segments']}, duplicates {s['duplicates_dropped']}, "
        f"manifest records {s['manifest_records']} -> {os.path.join(cfg.output_root, 'manifest.jsonl')}"
    )
    return EXIT_OK


def cmd_score(args) -> int:
    glm = _load_glm(args.glm)
    categorize = _categorizer(args.category_map)
    with open(args.ref, "rb") as fh:
        refs = read_manifest(fh)
    with open(args.hyp, "rb") as fh:
        hyps = read_manifest(fh)
    hyp_by_path = {}
    for rec in hyps:
        hyp_by_path.setdefault(rec.audio_filepath, rec)
    ref_paths = {r.audio_filepath for r in refs}
    triples, ids, excluded = [], [], []
    for rec in refs:
        hyp = hyp_by_path.get(rec.audio_filepath)
        if hyp is None:
            excluded.append(f"{rec.audio_filepath} (no hypothesis)")
            continue
        triples.append((rec.text, hyp.text, categorize(rec.audio_filepath)))
        ids.append(rec.audio_filepath)
    excluded += [f"{p} (no reference)" for p in hyp_by_path if p not in ref_paths]
    for item in excluded:
        log.warning("excluded from scoring: %s", item)
    report = batch_score(triples, glm, _norm_config(args), grapheme_cer=args.graphemes, ids=ids)
    report.excluded = excluded
    text = report.to_text(show_alignments=args.alignments)
    if args.out_json:
        with open(args.out_json, "w", encoding="utf-8") as fh:
            fh.write(report.to_json(include_details=True) + "\n")
    if args.out_text:
        with open(args.out_text, "w", encoding="utf-8") as fh:
            fh.write(text)
    if not args.out_json and not args.out_text:
        sys.stdout.write(text)
    else:
        o = report.overall
        print(f"WER {100 * o.wer:.2f}%  CER {100 * o.cer:.2f}%  over {report.pairs} pairs ({len(excluded)} excluded)")
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        e1 = NoiseModel(args.e1_sub, args.e1_del, args.e1_ins, args.jitter, args.e1_seed)
        e2 = NoiseModel(args.e2_sub, args.e2_del, args.e2_ins, args.jitter, args.e2_seed)
        corpus = generate_truth(
            args.utterances, args.vocab_size, (args.min_words, args.max_words), seed=args.seed
        )
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    paths = write_synthetic_corpus(
        corpus, e1, e2, args.out, correlation=args.correlation, with_audio=not args.no_audio
    )
    print(f"wrote {len(corpus.utterances)} utterances ({corpus.n_tokens} words) to {args.out}")
    for key, path in paths.items():
        log.info("%s: %s", key, path)
    return EXIT_OK


def cmd_stats(args) -> int:
    with open(args.manifest, "rb") as fh:
        records = read_manifest(fh)
    stats = corpus_stats(records, _categorizer(args.category_map))
    if args.json:
        print(json.dumps(stats.to_dict(), ensure_ascii=False, indent=2))
    else:
        sys.stdout.write(stats.to_text())
    return EXIT_OK


def _add_norm_flags(p) -> None:
    p.add_argument("--keep-punctuation", action="store_true", help="skip punctuation removal")
    p.add_argument("--keep-numbers", action="store_true", help="skip number-to-word expansion")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pseudolabel", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("label", help="build pseudo-labeled segments from two expert hypothesis files")
    p.add_argument("--config", help="JSON file with settings; flags override it")
    p.add_argument("--e1", help="E1 hypothesis JSONL")
    p.add_argument("--e2", help="E2 hypothesis JSONL")
    p.add_argument("--audio-root", help="directory holding <audio_id>.wav sources")
    p.add_argument("--out", help="output directory")
    p.add_argument("--glm", help="GLM file (recorded for later scoring)")
    p.add_argument("--workers", type=int)
    p.add_argument("--category-map", help="two-column file: path prefix, category")
    p.add_argument("--margin", type=float, help="seconds of padding around each segment (default 0)")
    for name in THRESHOLD_FLAGS:
        kind = int if name in ("c_t_min", "w_t_min") else float
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=kind)
    _add_norm_flags(p)
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("score", help="GLM-aware WER/CER of a hypothesis manifest against a reference")
    p.add_argument("--ref", required=True)
    p.add_argument("--hyp", required=True)
    p.add_argument("--glm")
    p.add_argument("--category-map")
    p.add_argument("--graphemes", action="store_true", help="also report grapheme-cluster CER")
    p.add_argument("--alignments", action="store_true", help="include per-utterance alignments in text output")
    p.add_argument("--out-json")
    p.add_argument("--out-text")
    _add_norm_flags(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("synth", help="generate a synthetic truth corpus and two noisy expert outputs")
    p.add_argument("--out", required=True)
    p.add_argument("--utterances", type=int, default=100)
    p.add_argument("--vocab-size", type=int, default=1000)
    p.add_argument("--min-words", type=int, default=5)
    p.add_argument("--max-words", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    for e, seed in (("e1", 1), ("e2", 2)):
        p.add_argument(f"--{e}-sub", type=float, default=0.0)
        p.add_argument(f"--{e}-del", type=float, default=0.0)
        p.add_argument(f"--{e}-ins", type=float, default=0.0)
        p.add_argument(f"--{e}-seed", type=int, default=seed)
    p.add_argument("--jitter", type=float, default=0.0, help="timestamp jitter in seconds")
    p.add_argument("--correlation", type=float, default=0.0, help="chance E2 copies E1 per utterance")
    p.add_argument("--no-audio", action="store_true")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("stats", help="hours per category for a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--category-map")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except PipelineError as exc:
        log.error("pipeline error: %s", exc)
        return EXIT_PIPELINE
    except (InputError, ManifestError, GlmError, ValueError, OSError) as exc:
        log.error("input error: %s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
