"""Synthetic ground truth and simulated noisy experts.

Used to check, at desk scale, that keeping only the words two independent
experts agree on yields far cleaner labels than trusting either expert
alone.  Every random draw is seeded per utterance (seed XOR a hash of the
utterance index), so results do not depend on processing order.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .audio import AudioBuffer, write_wav
from .filtering import FilterThresholds, apply_filter, compute_metrics
from .manifest import ManifestRecord, write_manifest
from .matcher import longest_match_set
from .scoring import EvalResult, pool, score
from .transcripts import Expert, HypothesisTranscript, WordToken, dump_hypotheses

_CONSONANTS = "কখগঘচছজঝটঠডঢতথদধনপফবভমরলসহ"
_VOWEL_SIGNS = ("", "া", "ি", "ী", "ু", "ূ", "ে", "ো")
_SYLLABLES = tuple(c + v for c in _CONSONANTS for v in _VOWEL_SIGNS)
DEFAULT_CHANNELS = ("News", "Talkshow", "Vlog", "CrimeShow")
_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_seed(seed: int, index: int) -> int:
    return (seed & _MASK64) ^ splitmix64(index)


def _rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, index))


def make_vocab(size: int) -> Tuple[str, ...]:
    """Distinct pseudo-Bangla words, each at least two consonants long."""
    if size < 2:
        raise ValueError("vocab_size must be >= 2")
    n = len(_SYLLABLES)
    width = 2
    while n**width < size:
        width += 1
    words = []
    for k in range(size):
        parts = []
        for _ in range(width):
            k, r = divmod(k, n)
            parts.append(_SYLLABLES[r])
        words.append("".join(parts))
    return tuple(words)


@dataclass(frozen=True)
class NoiseModel:
    sub_rate: float = 0.0
    del_rate: float = 0.0
    ins_rate: float = 0.0
    timing_jitter: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("sub_rate", "del_rate", "ins_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if self.sub_rate + self.del_rate + self.ins_rate > 1.0 + 1e-12:
            raise ValueError("sub_rate + del_rate + ins_rate must not exceed 1")
        if self.timing_jitter < 0:
            raise ValueError("timing_jitter must be >= 0")


@dataclass(frozen=True)
class TruthUtterance:
    audio_id: str
    words: Tuple[WordToken, ...]
    audio_duration: float

    @property
    def text(self) -> str:
        return " ".join(w.text for w in self.words)


@dataclass(frozen=True)
class SyntheticCorpus:
    utterances: Tuple[TruthUtterance, ...]
    vocab: Tuple[str, ...]
    seed: int

    @property
    def n_tokens(self) -> int:
        return sum(len(u.words) for u in self.utterances)


def generate_truth(
    n_utterances: int,
    vocab_size: int,
    length_range: Tuple[int, int] = (5, 20),
    seed: int = 0,
    word_duration: Tuple[float, float] = (0.2, 0.6),
    pause: Tuple[float, float] = (0.0, 0.08),
    channels: Sequence[str] = DEFAULT_CHANNELS,
) -> SyntheticCorpus:
    vocab = make_vocab(vocab_size)
    lo, hi = length_range
    if not 1 <= lo <= hi:
        raise ValueError(f"invalid length_range {length_range}")
    utterances = []
    for idx in range(n_utterances):
        rng = _rng(seed, idx)
        n_words = int(rng.integers(lo, hi + 1))
        ids = rng.integers(0, vocab_size, n_words)
        durs = rng.uniform(*word_duration, n_words)
        gaps = rng.uniform(*pause, n_words)
        t = round(float(rng.uniform(0.05, 0.3)), 3)
        words = []
        for w, d, g in zip(ids, durs, gaps):
            start = t
            end = round(start + float(d), 3)
            words.append(WordToken(vocab[w], start, end, 1.0))
            t = round(end + float(g), 3)
        duration = round(t + float(rng.uniform(0.05, 0.3)), 3)
        audio_id = f"{channels[idx % len(channels)]}__vid{idx:06d}"
        utterances.append(TruthUtterance(audio_id, tuple(words), duration))
    return SyntheticCorpus(tuple(utterances), vocab, seed)


@dataclass(frozen=True)
class NoisyHypothesis:
    transcript: HypothesisTranscript
    origins: Tuple[Optional[int], ...]  # truth index per token, None for insertions


def corrupt_with_origins(
    truth: TruthUtterance,
    noise: NoiseModel,
    vocab: Sequence[str],
    expert: Expert = Expert.E1,
    index: int = 0,
) -> NoisyHypothesis:
    rng = _rng(noise.rng_seed, index)
    word_index = {w: i for i, w in enumerate(vocab)}
    n = len(truth.words)
    u = rng.random(n)
    sub_draw = rng.integers(0, len(vocab) - 1, n)
    ins_mask = rng.random(n) < noise.ins_rate
    ins_words = rng.integers(0, len(vocab), n)
    conf = rng.uniform(0.0, 1.0, 2 * n)
    jitter = rng.uniform(-noise.timing_jitter, noise.timing_jitter, (2 * n, 2))

    draft = []  # (text, start, end, origin, correct)
    for p, tok in enumerate(truth.words):
        if u[p] < noise.del_rate:
            pass
        elif u[p] < noise.del_rate + noise.sub_rate:
            r = int(sub_draw[p])
            if r >= word_index[tok.text]:
                r += 1
            draft.append((vocab[r], tok.start, tok.end, p, False))
        else:
            draft.append((tok.text, tok.start, tok.end, p, True))
        if ins_mask[p]:
            mid = tok.start + (tok.end - tok.start) / 2
            draft.append((vocab[int(ins_words[p])], mid, tok.end, None, False))

    words, origins = [], []
    prev_start = -1.0
    limit = truth.audio_duration
    for q, (text, start, end, origin, correct) in enumerate(draft):
        start = max(0.0, start + float(jitter[q, 0]), prev_start + 0.001)
        end = min(limit, max(end + float(jitter[q, 1]), start + 0.01))
        c = 0.8 + 0.2 * conf[q] if correct else 0.3 + 0.5 * conf[q]
        words.append(WordToken(text, round(start, 4), round(end, 4), round(float(c), 3)))
        origins.append(origin)
        prev_start = words[-1].start
    transcript = HypothesisTranscript(truth.audio_id, expert, tuple(words), truth.audio_duration)
    return NoisyHypothesis(transcript, tuple(origins))


def corrupt(
    truth: TruthUtterance,
    noise: NoiseModel,
    vocab: Sequence[str],
    expert: Expert = Expert.E1,
    index: int = 0,
) -> HypothesisTranscript:
    return corrupt_with_origins(truth, noise, vocab, expert, index).transcript


def simulate_experts(
    corpus: SyntheticCorpus, e1: NoiseModel, e2: NoiseModel, correlation: float = 0.0
) -> Tuple[List[NoisyHypothesis], List[NoisyHypothesis]]:
    """Corrupt every utterance once per expert.

    With ``correlation`` > 0 each utterance's E2 output is, with that
    probability, a copy of E1's (errors included).
    """
    if not 0.0 <= correlation <= 1.0:
        raise ValueError("correlation must lie in [0, 1]")
    h1, h2 = [], []
    for idx, utt in enumerate(corpus.utterances):
        a = corrupt_with_origins(utt, e1, corpus.vocab, Expert.E1, idx)
        if correlation and _rng(e2.rng_seed ^ 0xC0FFEE, idx).random() < correlation:
            b = NoisyHypothesis(
                HypothesisTranscript(utt.audio_id, Expert.E2, a.transcript.words, utt.audio_duration),
                a.origins,
            )
        else:
            b = corrupt_with_origins(utt, e2, corpus.vocab, Expert.E2, idx)
        h1.append(a)
        h2.append(b)
    return h1, h2


@dataclass
class QualityReport:
    kept_fraction: float
    pseudo_label_wer: float
    baseline_wer: float
    matched_segments: int
    kept_segments: int
    kept_words: int
    truth_words: int
    pseudo: EvalResult = field(repr=False, default=None)
    baseline: EvalResult = field(repr=False, default=None)


def end_to_end_quality(
    corpus: SyntheticCorpus,
    e1: NoiseModel,
    e2: NoiseModel,
    thresholds: FilterThresholds = FilterThresholds(),
    correlation: float = 0.0,
) -> QualityReport:
    """Match and filter simulated expert pairs, then score kept labels against truth.

    Each kept segment is compared with the truth words between the first and
    last truth positions its matched tokens came from.  The baseline scores
    E1's full output against the full truth.
    """
    h1s, h2s = simulate_experts(corpus, e1, e2, correlation)
    pseudo_results, base_results = [], []
    matched = kept = kept_words = 0
    for utt, h1, h2 in zip(corpus.utterances, h1s, h2s):
        t1, t2 = h1.transcript, h2.transcript
        base_results.append(score(utt.text, " ".join(t1.texts)))
        for seg in longest_match_set(t1, t2).segments:
            matched += 1
            metrics = compute_metrics(seg, (seg.start, seg.end), t1, t2)
            if not apply_filter(metrics, thresholds).kept:
                continue
            kept += 1
            kept_words += len(seg.words)
            origins = [o for o in h1.origins[seg.span1[0] : seg.span1[1]] if o is not None]
            origins += [o for o in h2.origins[seg.span2[0] : seg.span2[1]] if o is not None]
            ref = " ".join(w.text for w in utt.words[min(origins) : max(origins) + 1]) if origins else ""
            pseudo_results.append(score(ref, " ".join(seg.words)))
    pseudo = pool(pseudo_results)
    baseline = pool(base_results)
    truth_words = corpus.n_tokens
    return QualityReport(
        kept_fraction=kept_words / truth_words if truth_words else 0.0,
        pseudo_label_wer=pseudo.wer,
        baseline_wer=baseline.wer,
        matched_segments=matched,
        kept_segments=kept,
        kept_words=kept_words,
        truth_words=truth_words,
        pseudo=pseudo,
        baseline=baseline,
    )


def synth_audio(utt: TruthUtterance, seed: int, index: int, sample_rate: int = 16000) -> AudioBuffer:
    n = int(round(utt.audio_duration * sample_rate))
    samples = _rng(seed ^ 0xA0D10, index).integers(-2000, 2000, n, dtype=np.int16)
    return AudioBuffer(samples, sample_rate)


def write_synthetic_corpus(
    corpus: SyntheticCorpus,
    e1: NoiseModel,
    e2: NoiseModel,
    out_dir,
    correlation: float = 0.0,
    with_audio: bool = True,
    sample_rate: int = 16000,
) -> dict:
    """Write truth manifest, both hypothesis files, a category map and (optionally) audio."""
    os.makedirs(out_dir, exist_ok=True)
    h1s, h2s = simulate_experts(corpus, e1, e2, correlation)
    paths = {
        "truth": os.path.join(out_dir, "truth.jsonl"),
        "e1": os.path.join(out_dir, "e1.jsonl"),
        "e2": os.path.join(out_dir, "e2.jsonl"),
        "categories": os.path.join(out_dir, "categories.tsv"),
        "audio_root": os.path.join(out_dir, "audio"),
    }
    records = [
        ManifestRecord(f"audio/{u.audio_id}.wav", u.text, u.audio_duration) for u in corpus.utterances
    ]
    with open(paths["truth"], "wb") as fh:
        fh.write(write_manifest(records))
    with open(paths["e1"], "wb") as fh:
        fh.write(dump_hypotheses(h.transcript for h in h1s))
    with open(paths["e2"], "wb") as fh:
        fh.write(dump_hypotheses(h.transcript for h in h2s))
    channels = sorted({u.audio_id.split("__", 1)[0] for u in corpus.utterances})
    with open(paths["categories"], "w", encoding="utf-8") as fh:
        fh.write("".join(f"{c}__\t{c}\n" for c in channels))
    if with_audio:
        os.makedirs(paths["audio_root"], exist_ok=True)
        for idx, utt in enumerate(corpus.utterances):
            write_wav(synth_audio(utt, corpus.seed, idx, sample_rate), os.path.join(paths["audio_root"], f"{utt.audio_id}.wav"))
    with open(os.path.join(out_dir, "synth_params.json"), "w", encoding="utf-8") as fh:
        json.dump(
            {
                "seed": corpus.seed,
                "n_utterances": len(corpus.utterances),
                "vocab_size": len(corpus.vocab),
                "e1": vars(e1),
                "e2": vars(e2),
                "correlation": correlation,
            },
            fh,
            indent=2,
        )
    return paths
