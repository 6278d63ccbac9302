"""Threshold filtering of matched segments.

Word rate is measured in seconds per word (segment duration over word
count).  Every bound is strict: a value equal to a bound passes.
"""

from __future__ import annotations

import enum
import unicodedata
from dataclasses import asdict, dataclass, field, fields
from typing import List, Optional, Tuple

from .matcher import MatchedSegment
from .transcripts import HypothesisTranscript


class DropReason(str, enum.Enum):
    WORD_RATE_LOW = "WordRateLow"
    WORD_RATE_HIGH = "WordRateHigh"
    TOO_SHORT = "TooShort"
    TOO_LONG = "TooLong"
    TOO_FEW_CHARS = "TooFewChars"
    TOO_FEW_WORDS = "TooFewWords"
    LOW_CONFIDENCE = "LowConfidence"


@dataclass(frozen=True)
class SegmentMetrics:
    r_w: float
    d_a: float
    c_t: int
    w_t: int
    conf_min: float = 1.0


@dataclass(frozen=True)
class FilterThresholds:
    """Bounds for :func:`apply_filter`.

    Only the duration bounds (0.2 s to 18.5 s) have a published source.  The
    word-rate window, minimum characters and minimum words are house defaults
    chosen for conversational Bangla; tune them per corpus.  Confidence
    filtering is off unless ``conf_threshold`` is set.
    """

    r_w_min: float = 0.12
    r_w_max: float = 1.5
    d_a_min: float = 0.2
    d_a_max: float = 18.5
    c_t_min: int = 3
    w_t_min: int = 2
    conf_threshold: Optional[float] = None

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if value is not None and value < 0:
                raise ValueError(f"{f.name} must be non-negative, got {value}")
        if self.r_w_min > self.r_w_max:
            raise ValueError("r_w_min exceeds r_w_max")
        if self.d_a_min > self.d_a_max:
            raise ValueError("d_a_min exceeds d_a_max")
        if self.conf_threshold is not None and self.conf_threshold > 1:
            raise ValueError("conf_threshold must lie in [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_mapping(cls, mapping) -> "FilterThresholds":
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, value in mapping.items():
            if key not in known:
                raise ValueError(f"unknown threshold {key!r}")
            if value is None or (isinstance(value, str) and value.strip().lower() in ("", "none", "off")):
                kwargs[key] = None
            elif key in ("c_t_min", "w_t_min"):
                kwargs[key] = int(value)
            else:
                kwargs[key] = float(value)
        return cls(**kwargs)


@dataclass(frozen=True)
class FilterDecision:
    kept: bool
    reasons: Tuple[DropReason, ...] = field(default_factory=tuple)


def char_count(words) -> int:
    """Codepoints of the NFC words, spaces excluded."""
    return sum(len(unicodedata.normalize("NFC", w)) for w in words)


def compute_metrics(
    m: MatchedSegment,
    span: Tuple[float, float],
    t1: Optional[HypothesisTranscript] = None,
    t2: Optional[HypothesisTranscript] = None,
) -> SegmentMetrics:
    start, end = span
    if not end > start:
        raise ValueError("segment span must have end > start")
    # nanosecond rounding keeps decimal timestamps exact at the bounds (1.2 - 1.0 == 0.2)
    d_a = round(end - start, 9)
    w_t = len(m.words)
    confs = []
    if t1 is not None:
        confs += [w.confidence for w in t1.words[m.span1[0] : m.span1[1]]]
    if t2 is not None:
        confs += [w.confidence for w in t2.words[m.span2[0] : m.span2[1]]]
    return SegmentMetrics(
        r_w=d_a / w_t,
        d_a=d_a,
        c_t=char_count(m.words),
        w_t=w_t,
        conf_min=min(confs) if confs else 1.0,
    )


def apply_filter(metrics: SegmentMetrics, th: FilterThresholds) -> FilterDecision:
    reasons: List[DropReason] = []
    if metrics.r_w < th.r_w_min:
        reasons.append(DropReason.WORD_RATE_LOW)
    if metrics.r_w > th.r_w_max:
        reasons.append(DropReason.WORD_RATE_HIGH)
    if metrics.d_a < th.d_a_min:
        reasons.append(DropReason.TOO_SHORT)
    if metrics.d_a > th.d_a_max:
        reasons.append(DropReason.TOO_LONG)
    if metrics.c_t < th.c_t_min:
        reasons.append(DropReason.TOO_FEW_CHARS)
    if metrics.w_t < th.w_t_min:
        reasons.append(DropReason.TOO_FEW_WORDS)
    if th.conf_threshold is not None and metrics.conf_min < th.conf_threshold:
        reasons.append(DropReason.LOW_CONFIDENCE)
    return FilterDecision(kept=not reasons, reasons=tuple(reasons))
