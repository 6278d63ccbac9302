"""The labeling run: pair, match, filter, cut, dedup, write manifest and reports."""

from __future__ import annotations

import json
import logging
import math
import os
import time
from collections import Counter, OrderedDict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

from . import __version__
from .audio import AudioBuffer, read_wav, read_wav_info, time_to_index, upsample_8k_to_16k, write_wav
from .filtering import DropReason, FilterThresholds, apply_filter, compute_metrics
from .manifest import (
    ManifestRecord,
    channel_of,
    corpus_stats,
    dedup,
    parse_category_map,
    prefix_categorizer,
    write_manifest,
)
from .matcher import longest_match_set
from .textnorm import NormalizationConfig
from .transcripts import TranscriptPair, pair_transcripts, parse_hypothesis_file

log = logging.getLogger(__name__)

OUTPUT_RATE = 16000
SEGMENT_DIR = "segments"


class InputError(Exception):
    """Bad configuration or unreadable input (exit status 1)."""


class PipelineError(Exception):
    """A stage failed after inputs were accepted (exit status 2)."""


@dataclass
class PipelineConfig:
    e1_path: str
    e2_path: str
    audio_root: str
    output_root: str
    thresholds: FilterThresholds = field(default_factory=FilterThresholds)
    norm: NormalizationConfig = field(default_factory=NormalizationConfig)
    glm_path: Optional[str] = None
    workers: int = 1
    category_map_path: Optional[str] = None
    margin: float = 0.0

    def validate(self) -> None:
        if self.workers < 1:
            raise InputError("worker count must be >= 1")
        if self.margin < 0:
            raise InputError("margin must be >= 0")
        for name in ("e1_path", "e2_path", "audio_root", "glm_path", "category_map_path"):
            path = getattr(self, name)
            if path is not None and not os.path.exists(path):
                raise InputError(f"{name} does not exist: {path}")


@dataclass
class PlannedSegment:
    index: int
    text: str
    reasons: Tuple[str, ...]
    lo: int = 0  # sample bounds at OUTPUT_RATE
    hi: int = 0

    @property
    def kept(self) -> bool:
        return not self.reasons


@dataclass
class PairPlan:
    audio_id: str
    source: str
    segments: List[PlannedSegment]


def _ms_floor(t: float) -> float:
    return math.floor(round(t * 1000, 6)) / 1000


def _ms_ceil(t: float) -> float:
    return math.ceil(round(t * 1000, 6)) / 1000


def source_path(audio_root: str, audio_id: str) -> str:
    return os.path.join(audio_root, f"{audio_id}.wav")


def plan_pair(pair: TranscriptPair, thresholds: FilterThresholds, audio_root: str, margin: float) -> PairPlan:
    """Match and filter one pair; kept segments get sample bounds at 16 kHz.

    Cut bounds are the matched span widened by ``margin`` and snapped outward
    to whole milliseconds, so the written duration is exactly representable
    in the manifest.
    """
    src = source_path(audio_root, pair.audio_id)
    matches = longest_match_set(pair.t1, pair.t2)
    rate = n_out = None
    planned = []
    for idx, seg in enumerate(matches.segments):
        metrics = compute_metrics(seg, (seg.start, seg.end), pair.t1, pair.t2)
        decision = apply_filter(metrics, thresholds)
        ps = PlannedSegment(idx, " ".join(seg.words), tuple(r.value for r in decision.reasons))
        if decision.kept:
            if rate is None:
                if not os.path.exists(src):
                    raise PipelineError(f"missing audio for {pair.audio_id}: {src}")
                rate, n = read_wav_info(src)
                n_out = n * (OUTPUT_RATE // rate)
            limit = _ms_floor(n_out / OUTPUT_RATE)
            start = max(0.0, _ms_floor(seg.start - margin))
            end = min(limit, _ms_ceil(seg.end + margin))
            ps.lo, ps.hi = time_to_index(start, OUTPUT_RATE), time_to_index(end, OUTPUT_RATE)
            if ps.hi <= ps.lo:
                raise PipelineError(f"{pair.audio_id} segment {idx}: span lies outside the audio")
        planned.append(ps)
    return PairPlan(pair.audio_id, src, planned)


def _plan_job(args):
    return plan_pair(*args)


def segment_relpath(audio_id: str, index: int) -> str:
    return f"{SEGMENT_DIR}/{audio_id}__{index:04d}.wav"


def cut_source(source: str, jobs: List[Tuple[int, int, str]]) -> None:
    buf = read_wav(source)
    if buf.sample_rate != OUTPUT_RATE:
        buf = upsample_8k_to_16k(buf)
    for lo, hi, out_path in jobs:
        write_wav(AudioBuffer(buf.samples[lo:hi].copy(), OUTPUT_RATE), out_path)


def _cut_job(args):
    cut_source(*args)


def _map(fn, items, workers):
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))


@dataclass
class LabelResult:
    records: List[ManifestRecord]
    stats: dict


def _write_json(path, obj) -> None:
    tmp = path + ".part"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, ensure_ascii=False, indent=2)
        fh.write("\n")
    os.replace(tmp, path)


def _now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%S%z")


def run_label(cfg: PipelineConfig) -> LabelResult:
    cfg.validate()
    out = cfg.output_root
    os.makedirs(os.path.join(out, SEGMENT_DIR), exist_ok=True)
    status_path = os.path.join(out, "run_status.json")
    started = _now()
    _write_json(status_path, {"status": "running", "started_at": started})
    stage = "parse"
    try:
        try:
            with open(cfg.e1_path, "rb") as fh:
                t1s = parse_hypothesis_file(fh)
            with open(cfg.e2_path, "rb") as fh:
                t2s = parse_hypothesis_file(fh)
            stage = "pair"
            pairing = pair_transcripts(t1s, t2s)
            categorize = channel_of
            if cfg.category_map_path:
                with open(cfg.category_map_path, encoding="utf-8") as fh:
                    categorize = prefix_categorizer(parse_category_map(fh))
        except ValueError as exc:
            raise InputError(str(exc)) from exc
        for aid, expert in pairing.unpaired:
            log.warning("unpaired transcript %s (only %s present)", aid, expert.value)

        stage = "match+filter"
        jobs = [(p, cfg.thresholds, cfg.audio_root, cfg.margin) for p in pairing.pairs]
        plans: List[PairPlan] = _map(_plan_job, jobs, cfg.workers)

        stage = "dedup"
        candidates, origin = [], []
        for plan in plans:
            for seg in plan.segments:
                if seg.kept:
                    rel = segment_relpath(plan.audio_id, seg.index)
                    candidates.append(ManifestRecord(rel, seg.text, (seg.hi - seg.lo) / OUTPUT_RATE))
                    origin.append((plan, seg))
        records, dup_dropped = dedup(candidates)
        keep_paths = {r.audio_filepath for r in records}

        stage = "cut"
        by_source: Dict[str, List[Tuple[int, int, str]]] = OrderedDict()
        for rec, (plan, seg) in zip(candidates, origin):
            if rec.audio_filepath in keep_paths:
                by_source.setdefault(plan.source, []).append(
                    (seg.lo, seg.hi, os.path.join(out, rec.audio_filepath))
                )
        _map(_cut_job, list(by_source.items()), cfg.workers)

        stage = "report"
        with open(os.path.join(out, "manifest.jsonl.part"), "wb") as fh:
            fh.write(write_manifest(records))
        os.replace(os.path.join(out, "manifest.jsonl.part"), os.path.join(out, "manifest.jsonl"))

        matched = sum(len(p.segments) for p in plans)
        filter_kept = len(candidates)
        reasons = Counter(r for p in plans for s in p.segments for r in s.reasons)
        cstats = corpus_stats(records, categorize)
        stats = {
            "pairs": len(pairing.pairs),
            "unpaired": [{"audio_id": a, "present_in": e.value} for a, e in pairing.unpaired],
            "matched_segments": matched,
            "kept_segments": filter_kept,
            "dropped_segments": matched - filter_kept,
            "drop_reasons": {r.value: reasons.get(r.value, 0) for r in DropReason},
            "duplicates_dropped": dup_dropped,
            "manifest_records": len(records),
            "corpus": cstats.to_dict(),
            "provenance": {
                "tool": "pseudolabel",
                "version": __version__,
                "thresholds": cfg.thresholds.to_dict(),
                "margin": cfg.margin,
                "output_rate": OUTPUT_RATE,
                "dedup_key": "normalized-text + 0.1s duration bucket",
                "inputs": {"e1": os.path.basename(cfg.e1_path), "e2": os.path.basename(cfg.e2_path)},
            },
            "run": {"started_at": started, "finished_at": _now(), "workers": cfg.workers},
        }
        _write_json(os.path.join(out, "stats.json"), stats)
        with open(os.path.join(out, "stats.txt"), "w", encoding="utf-8") as fh:
            fh.write(stats_text(stats, cstats.to_text()))
        _write_json(status_path, {"status": "complete", "started_at": started, "finished_at": _now()})
        return LabelResult(records, stats)
    except Exception as exc:
        _write_json(
            status_path,
            {
                "status": "failed",
                "stage": stage,
                "error": str(exc),
                "partial_outputs": True,
                "started_at": started,
                "finished_at": _now(),
            },
        )
        if isinstance(exc, (InputError, PipelineError)):
            raise
        raise PipelineError(f"{stage}: {exc}") from exc


def stats_text(stats: dict, table: str) -> str:
    lines = [
        f"pairs                {stats['pairs']}",
        f"unpaired             {len(stats['unpaired'])}",
        f"matched segments     {stats['matched_segments']}",
        f"kept by filter       {stats['kept_segments']}",
        f"dropped by filter    {stats['dropped_segments']}",
        f"duplicates dropped   {stats['duplicates_dropped']}",
        f"manifest records     {stats['manifest_records']}",
        "",
        "drop reasons:",
    ]
    dropped = stats["dropped_segments"]
    for reason, count in stats["drop_reasons"].items():
        share = 100.0 * count / dropped if dropped else 0.0
        lines.append(f"  {reason:<14} {count:>8}  {share:6.2f}%")
    lines += ["", "thresholds:"]
    lines += [f"  {k} = {v}" for k, v in stats["provenance"]["thresholds"].items()]
    lines += ["", table.rstrip(), ""]
    return "\n".join(lines)
