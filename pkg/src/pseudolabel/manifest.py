"""JSONL manifests of ``{audio_filepath, text, duration}`` records, dedup and corpus stats."""

from __future__ import annotations

import json
import math
import unicodedata
from collections import OrderedDict
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Tuple, Union

from .textnorm import NormalizationConfig, normalize

UNKNOWN_CATEGORY = "unknown"


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class ManifestRecord:
    audio_filepath: str
    text: str
    duration: float

    def __post_init__(self):
        text = " ".join(unicodedata.normalize("NFC", self.text).split())
        object.__setattr__(self, "text", text)
        if not self.audio_filepath:
            raise ManifestError("audio_filepath must be non-empty")
        if not text:
            raise ManifestError(f"{self.audio_filepath}: text must be non-empty")
        if not self.duration > 0:
            raise ManifestError(f"{self.audio_filepath}: duration must be > 0")


def round_duration(seconds: float) -> float:
    return float(Decimal(repr(seconds)).quantize(Decimal("0.001"), rounding=ROUND_HALF_UP))


def record_line(rec: ManifestRecord) -> str:
    obj = {"audio_filepath": rec.audio_filepath, "text": rec.text, "duration": round_duration(rec.duration)}
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def write_manifest(records: Iterable[ManifestRecord]) -> bytes:
    return "".join(record_line(r) + "\n" for r in records).encode("utf-8")


def read_manifest(stream) -> List[ManifestRecord]:
    records = []
    for lineno, line in enumerate(stream, start=1):
        if isinstance(line, bytes):
            line = line.decode("utf-8")
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            records.append(
                ManifestRecord(
                    audio_filepath=str(obj["audio_filepath"]),
                    text=str(obj["text"]),
                    duration=float(obj["duration"]),
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"line {lineno}: {exc}") from None
    return records


_DEDUP_NORM = NormalizationConfig()


def duration_bucket(seconds: float) -> int:
    """Duration in tenths of a second, rounded half up."""
    return int(Decimal(repr(seconds)).scaleb(1).quantize(Decimal(1), rounding=ROUND_HALF_UP))


def dedup_key(rec: ManifestRecord) -> Tuple[str, int]:
    return normalize(rec.text, _DEDUP_NORM), duration_bucket(rec.duration)


def dedup(records: Iterable[ManifestRecord]) -> Tuple[List[ManifestRecord], int]:
    seen = set()
    kept = []
    total = 0
    for rec in records:
        total += 1
        key = dedup_key(rec)
        if key in seen:
            continue
        seen.add(key)
        kept.append(rec)
    return kept, total - len(kept)


def parse_category_map(stream) -> List[Tuple[str, str]]:
    """Two whitespace/tab separated columns per line: path prefix, category."""
    entries = []
    for lineno, line in enumerate(stream, start=1):
        if isinstance(line, bytes):
            line = line.decode("utf-8")
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t") if "\t" in line else line.split(None, 1)
        if len(parts) != 2:
            raise ManifestError(f"category map line {lineno}: expected two columns")
        entries.append((parts[0].strip(), parts[1].strip()))
    return entries


def prefix_categorizer(entries: Iterable[Tuple[str, str]]) -> Callable[[str], str]:
    """Longest matching path prefix wins; the bare file name is also tried."""
    ordered = sorted(entries, key=lambda e: -len(e[0]))

    def category_of(path: str) -> str:
        name = path.rsplit("/", 1)[-1]
        for prefix, category in ordered:
            if path.startswith(prefix) or name.startswith(prefix):
                return category
        return UNKNOWN_CATEGORY

    return category_of


def channel_of(path: str) -> str:
    """Channel from the ``<channel>__<video_id>__<segment_idx>.wav`` naming convention."""
    name = path.rsplit("/", 1)[-1]
    return name.split("__", 1)[0] if "__" in name else UNKNOWN_CATEGORY


@dataclass(frozen=True)
class CategoryStats:
    category: str
    hours: float
    records: int


@dataclass(frozen=True)
class CorpusStats:
    categories: Tuple[CategoryStats, ...]
    total_hours: float
    total_records: int

    def to_dict(self) -> dict:
        return {
            "categories": [
                {"category": c.category, "hours": c.hours, "records": c.records} for c in self.categories
            ],
            "total_hours": self.total_hours,
            "total_records": self.total_records,
        }

    def to_text(self) -> str:
        rows = [(c.category, f"{c.hours:,.2f}") for c in self.categories]
        rows.append(("Total", f"{self.total_hours:,.2f}"))
        width = max([len("Channels Category")] + [len(r[0]) for r in rows])
        num_width = max([len("Hours")] + [len(r[1]) for r in rows])
        lines = [f"{'Channels Category':<{width}}  {'Hours':>{num_width}}"]
        lines += [f"{name:<{width}}  {hours:>{num_width}}" for name, hours in rows]
        return "\n".join(lines) + "\n"


def corpus_stats(
    records: Iterable[ManifestRecord],
    category_of: Union[Callable[[str], str], Mapping[str, str], None] = None,
) -> CorpusStats:
    if category_of is None:
        lookup = channel_of
    elif callable(category_of):
        lookup = category_of
    else:
        mapping = dict(category_of)
        lookup = lambda p: mapping.get(p, UNKNOWN_CATEGORY)  # noqa: E731

    seconds: Dict[str, List[float]] = OrderedDict()
    for rec in records:
        seconds.setdefault(lookup(rec.audio_filepath) or UNKNOWN_CATEGORY, []).append(rec.duration)
    cats = [CategoryStats(name, math.fsum(durs) / 3600.0, len(durs)) for name, durs in seconds.items()]
    cats.sort(key=lambda c: (-c.hours, c.category))
    return CorpusStats(
        categories=tuple(cats),
        total_hours=math.fsum(c.hours for c in cats),
        total_records=sum(c.records for c in cats),
    )
