"""Word-level hypothesis transcripts emitted by the two expert ASR systems."""

from __future__ import annotations

import enum
import json
import unicodedata
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator, List, Sequence, Tuple, Union


class TranscriptError(ValueError):
    """Raised for malformed or invariant-violating hypothesis input."""


class Expert(str, enum.Enum):
    E1 = "E1"
    E2 = "E2"


@dataclass(frozen=True)
class WordToken:
    text: str
    start: float
    end: float
    confidence: float = 1.0

    def __post_init__(self):
        text = unicodedata.normalize("NFC", self.text.strip())
        object.__setattr__(self, "text", text)
        if not text:
            raise TranscriptError("word text must be non-empty")
        if any(ch.isspace() for ch in text):
            raise TranscriptError(f"word text contains whitespace: {text!r}")
        if self.start < 0:
            raise TranscriptError("start must be >= 0")
        if not self.end > self.start:
            raise TranscriptError("end must exceed start")
        if not 0.0 <= self.confidence <= 1.0:
            raise TranscriptError(f"confidence {self.confidence} outside [0, 1]")


@dataclass(frozen=True)
class HypothesisTranscript:
    audio_id: str
    expert: Expert
    words: Tuple[WordToken, ...]
    audio_duration: float

    def __post_init__(self):
        object.__setattr__(self, "expert", Expert(self.expert))
        object.__setattr__(self, "words", tuple(self.words))
        if not self.audio_duration > 0:
            raise TranscriptError(f"{self.audio_id}: audio_duration must be > 0")
        prev_start = None
        for idx, w in enumerate(self.words):
            if prev_start is not None and not w.start > prev_start:
                raise TranscriptError(
                    f"{self.audio_id}: token {idx} start {w.start} not after previous start {prev_start}"
                )
            if w.end > self.audio_duration:
                raise TranscriptError(
                    f"{self.audio_id}: token {idx} ends at {w.end} past audio_duration {self.audio_duration}"
                )
            prev_start = w.start

    @property
    def texts(self) -> List[str]:
        return [w.text for w in self.words]

    def to_dict(self) -> dict:
        return {
            "audio_id": self.audio_id,
            "expert": self.expert.value,
            "audio_duration": self.audio_duration,
            "words": [
                {"text": w.text, "start": w.start, "end": w.end, "confidence": w.confidence}
                for w in self.words
            ],
        }


@dataclass(frozen=True)
class TranscriptPair:
    audio_id: str
    t1: HypothesisTranscript
    t2: HypothesisTranscript

    def __post_init__(self):
        if not (self.t1.audio_id == self.t2.audio_id == self.audio_id):
            raise TranscriptError(f"pair audio ids disagree for {self.audio_id}")
        if self.t1.expert is not Expert.E1 or self.t2.expert is not Expert.E2:
            raise TranscriptError(f"{self.audio_id}: pair must be (E1, E2)")


@dataclass
class PairingResult:
    pairs: List[TranscriptPair]
    unpaired: List[Tuple[str, Expert]] = field(default_factory=list)


def transcript_from_dict(obj: dict) -> HypothesisTranscript:
    audio_id = obj.get("audio_id", "<missing>")
    try:
        raw_words = obj["words"]
        words = []
        for idx, w in enumerate(raw_words):
            try:
                words.append(
                    WordToken(
                        text=w["text"],
                        start=float(w["start"]),
                        end=float(w["end"]),
                        confidence=float(w.get("confidence", 1.0)),
                    )
                )
            except TranscriptError as exc:
                raise TranscriptError(f"{audio_id}: token {idx}: {exc}") from None
        return HypothesisTranscript(
            audio_id=str(obj["audio_id"]),
            expert=Expert(obj["expert"]),
            words=tuple(words),
            audio_duration=float(obj["audio_duration"]),
        )
    except KeyError as exc:
        raise TranscriptError(f"{audio_id}: missing key {exc}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, TranscriptError):
            raise
        raise TranscriptError(f"{audio_id}: {exc}") from None


def iter_hypotheses(stream: Union[IO[bytes], IO[str], Iterable]) -> Iterator[HypothesisTranscript]:
    """Yield transcripts from a JSON-Lines stream, one object per non-blank line."""
    for lineno, line in enumerate(stream, start=1):
        if isinstance(line, bytes):
            line = line.decode("utf-8")
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TranscriptError(f"line {lineno}: malformed JSON: {exc.msg}") from None
        if not isinstance(obj, dict):
            raise TranscriptError(f"line {lineno}: expected a JSON object")
        try:
            yield transcript_from_dict(obj)
        except TranscriptError as exc:
            raise TranscriptError(f"line {lineno}: {exc}") from None


def parse_hypothesis_file(stream) -> List[HypothesisTranscript]:
    return list(iter_hypotheses(stream))


def dump_hypotheses(transcripts: Iterable[HypothesisTranscript]) -> bytes:
    lines = [json.dumps(t.to_dict(), ensure_ascii=False) for t in transcripts]
    return "".join(line + "\n" for line in lines).encode("utf-8")


def _index_by_id(seq: Sequence[HypothesisTranscript]) -> dict:
    index = {}
    for t in seq:
        if t.audio_id in index:
            raise TranscriptError(f"duplicate audio_id {t.audio_id!r} from {t.expert.value}")
        index[t.audio_id] = t
    return index


def pair_transcripts(
    seq1: Sequence[HypothesisTranscript], seq2: Sequence[HypothesisTranscript]
) -> PairingResult:
    """Zip E1 and E2 transcripts by audio_id, keeping seq1 order.

    Ids present on only one side are reported in ``unpaired`` rather than dropped.
    """
    by1 = _index_by_id(seq1)
    by2 = _index_by_id(seq2)
    pairs = [TranscriptPair(aid, t, by2[aid]) for aid, t in by1.items() if aid in by2]
    unpaired = [(aid, Expert.E1) for aid in by1 if aid not in by2]
    unpaired += [(aid, Expert.E2) for aid in by2 if aid not in by1]
    return PairingResult(pairs=pairs, unpaired=unpaired)
