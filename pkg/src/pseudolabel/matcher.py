"""Word-exact agreement between two hypotheses.

The match set is built by recursive longest-common-run decomposition: find
the longest contiguous run of identical words shared by both hypotheses,
keep it, then recurse separately on the words left of it and the words right
of it.  Ties go to the run starting earliest in the first hypothesis, then
earliest in the second.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Dict, Hashable, List, Sequence, Tuple

from .transcripts import HypothesisTranscript

Block = Tuple[int, int, int]  # (start in t1, start in t2, length)


@dataclass(frozen=True)
class MatchedSegment:
    words: Tuple[str, ...]
    span1: Tuple[int, int]
    span2: Tuple[int, int]
    start: float
    end: float

    def to_dict(self) -> dict:
        return {
            "words": list(self.words),
            "span1": list(self.span1),
            "span2": list(self.span2),
            "start": self.start,
            "end": self.end,
        }


@dataclass(frozen=True)
class MatchSet:
    audio_id: str
    segments: Tuple[MatchedSegment, ...]

    def to_json(self) -> str:
        """Debug dump for inspecting a match set by hand."""
        return json.dumps(
            {"audio_id": self.audio_id, "segments": [s.to_dict() for s in self.segments]},
            ensure_ascii=False,
        )


def _longest_run(a, b, alo, ahi, blo, bhi, b_positions) -> Block:
    # Scans a in order and keeps the first strictly-longer run, which yields
    # the leftmost-in-a, then leftmost-in-b winner among equal lengths.
    best_i, best_j, best_len = alo, blo, 0
    run_ending_at: Dict[int, int] = {}
    for i in range(alo, ahi):
        next_runs = {}
        for j in b_positions.get(a[i], ()):
            if j < blo:
                continue
            if j >= bhi:
                break
            k = run_ending_at.get(j - 1, 0) + 1
            next_runs[j] = k
            if k > best_len:
                best_i, best_j, best_len = i - k + 1, j - k + 1, k
        run_ending_at = next_runs
    return best_i, best_j, best_len


def match_blocks(a: Sequence[Hashable], b: Sequence[Hashable]) -> List[Block]:
    """Non-crossing exact-match blocks of ``a`` and ``b``, ordered by position."""
    b_positions: Dict[Hashable, List[int]] = {}
    for j, tok in enumerate(b):
        b_positions.setdefault(tok, []).append(j)

    blocks: List[Block] = []
    stack = [(0, len(a), 0, len(b))]
    while stack:
        alo, ahi, blo, bhi = stack.pop()
        if alo >= ahi or blo >= bhi:
            continue
        i, j, k = _longest_run(a, b, alo, ahi, blo, bhi, b_positions)
        if k == 0:
            continue
        blocks.append((i, j, k))
        stack.append((alo, i, blo, j))
        stack.append((i + k, ahi, j + k, bhi))
    blocks.sort()
    return blocks


def segment_timespan(
    span1: Tuple[int, int], span2: Tuple[int, int], t1: HypothesisTranscript, t2: HypothesisTranscript
) -> Tuple[float, float]:
    """Union of both experts' intervals for the matched words."""
    (i, j), (k, l) = span1, span2
    start = min(t1.words[i].start, t2.words[k].start)
    end = max(t1.words[j - 1].end, t2.words[l - 1].end)
    return start, end


def _segments_from_blocks(blocks, t1: HypothesisTranscript, t2: HypothesisTranscript) -> MatchSet:
    texts1 = t1.texts
    segments = []
    for i, k, n in blocks:
        span1, span2 = (i, i + n), (k, k + n)
        start, end = segment_timespan(span1, span2, t1, t2)
        segments.append(
            MatchedSegment(
                words=tuple(texts1[i : i + n]), span1=span1, span2=span2, start=start, end=end
            )
        )
    return MatchSet(audio_id=t1.audio_id, segments=tuple(segments))


def longest_match_set(t1: HypothesisTranscript, t2: HypothesisTranscript) -> MatchSet:
    return _segments_from_blocks(match_blocks(t1.texts, t2.texts), t1, t2)


ORACLE_MAX_LEN = 10


def oracle_blocks(a: Sequence[Hashable], b: Sequence[Hashable]) -> List[Block]:
    """Brute-force reference for :func:`match_blocks`.

    Lists every common run by direct slice comparison, then repeatedly takes
    the highest-priority run compatible with everything taken so far.
    Only meant for short inputs.
    """
    if len(a) > ORACLE_MAX_LEN or len(b) > ORACLE_MAX_LEN:
        raise ValueError(f"oracle limited to sequences of length <= {ORACLE_MAX_LEN}")
    a, b = list(a), list(b)
    candidates = [
        (i, j, n)
        for i in range(len(a))
        for j in range(len(b))
        for n in range(1, min(len(a) - i, len(b) - j) + 1)
        if a[i : i + n] == b[j : j + n]
    ]
    candidates.sort(key=lambda c: (-c[2], c[0], c[1]))

    def compatible(x: Block, y: Block) -> bool:
        (i1, j1, n1), (i2, j2, n2) = x, y
        if i1 + n1 <= i2 and j1 + n1 <= j2:
            return True
        return i2 + n2 <= i1 and j2 + n2 <= j1

    chosen: List[Block] = []
    for cand in candidates:
        if all(compatible(cand, c) for c in chosen):
            chosen.append(cand)
    return sorted(chosen)


def oracle_match_set(t1: HypothesisTranscript, t2: HypothesisTranscript) -> MatchSet:
    return _segments_from_blocks(oracle_blocks(t1.texts, t2.texts), t1, t2)
