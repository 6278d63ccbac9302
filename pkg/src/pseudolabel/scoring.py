"""GLM-aware WER/CER scoring.

Both reference and hypothesis are normalized, tokenized on spaces and mapped
through the GLM (every spelling variant replaced by its class
representative) before alignment.  Corpus figures are pooled: total errors
over total reference tokens.
"""

from __future__ import annotations

import json
import math
import unicodedata
from collections import OrderedDict
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .textnorm import NormalizationConfig, normalize

POOLING = "pooled-errors/pooled-ref-tokens"
CER_STAGE = "after-glm"

MATCH, SUB, DEL, INS = "match", "sub", "del", "ins"


class GlmError(ValueError):
    pass


@dataclass(frozen=True)
class GlmTable:
    classes: Tuple[Tuple[str, ...], ...] = ()

    def __post_init__(self):
        mapping = {}
        for cls in self.classes:
            if len(cls) < 2:
                raise GlmError(f"GLM class {list(cls)} needs at least two words")
            for word in cls:
                if word in mapping:
                    raise GlmError(f"word {word!r} appears in more than one GLM class")
                mapping[word] = cls[0]
        object.__setattr__(self, "_rep", mapping)

    def representative(self, word: str) -> str:
        return self._rep.get(word, word)

    def __len__(self) -> int:
        return len(self.classes)


def parse_glm(stream) -> GlmTable:
    """One tab-separated equivalence class per line; the first word is the representative."""
    classes = []
    seen: Dict[str, int] = {}
    for lineno, line in enumerate(stream, start=1):
        if isinstance(line, bytes):
            line = line.decode("utf-8")
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        words = []
        for w in line.split("\t"):
            w = unicodedata.normalize("NFC", w.strip())
            if w and w not in words:
                words.append(w)
        if len(words) < 2:
            raise GlmError(f"GLM line {lineno}: class of size {len(words)}")
        for w in words:
            if w in seen:
                raise GlmError(f"GLM line {lineno}: word {w!r} already in class on line {seen[w]}")
            seen[w] = lineno
        classes.append(tuple(words))
    return GlmTable(tuple(classes))


@lru_cache(maxsize=32)
def normalized_glm(glm: GlmTable, norm_cfg: NormalizationConfig) -> GlmTable:
    """The GLM with every entry passed through the scoring normalizer.

    Entries that normalize to nothing or to several words are dropped; when
    two classes collide after normalization the earlier class keeps the word.
    """
    classes, taken = [], set()
    for cls in glm.classes:
        words = []
        for w in cls:
            nw = normalize(w, norm_cfg)
            if nw and " " not in nw and nw not in taken and nw not in words:
                words.append(nw)
        if len(words) >= 2:
            classes.append(tuple(words))
            taken.update(words)
    return GlmTable(tuple(classes))


def canonicalize(tokens: Sequence[str], glm: Optional[GlmTable]) -> List[str]:
    if glm is None:
        return list(tokens)
    return [glm.representative(t) for t in tokens]


@dataclass(frozen=True)
class AlignOp:
    kind: str
    ref: Optional[str] = None
    hyp: Optional[str] = None


@dataclass(frozen=True)
class Alignment:
    ops: Tuple[AlignOp, ...]

    def count(self, kind: str) -> int:
        return sum(1 for op in self.ops if op.kind == kind)

    @property
    def cost(self) -> int:
        return sum(1 for op in self.ops if op.kind != MATCH)

    def ref_side(self) -> List[str]:
        return [op.ref for op in self.ops if op.kind != INS]

    def hyp_side(self) -> List[str]:
        return [op.hyp for op in self.ops if op.kind != DEL]


def edit_table(ref: Sequence, hyp: Sequence) -> List[List[int]]:
    """``table[i][j]`` is the edit cost of aligning ``ref[i:]`` with ``hyp[j:]``."""
    n, m = len(ref), len(hyp)
    table = [[0] * (m + 1) for _ in range(n + 1)]
    for j in range(m + 1):
        table[n][j] = m - j
    for i in range(n - 1, -1, -1):
        row, below = table[i], table[i + 1]
        row[m] = n - i
        r = ref[i]
        for j in range(m - 1, -1, -1):
            diag = below[j + 1] + (r != hyp[j])
            dele = below[j] + 1
            ins = row[j + 1] + 1
            row[j] = min(diag, dele, ins)
    return table


def word_align(ref: Sequence[str], hyp: Sequence[str]) -> Alignment:
    """Minimum unit-cost alignment.

    Walks left to right, preferring match, then substitution, then deletion,
    then insertion whenever several moves keep the cost optimal.
    """
    table = edit_table(ref, hyp)
    n, m = len(ref), len(hyp)
    ops = []
    i = j = 0
    while i < n or j < m:
        here = table[i][j]
        if i < n and j < m:
            same = ref[i] == hyp[j]
            if here == table[i + 1][j + 1] + (not same):
                ops.append(AlignOp(MATCH if same else SUB, ref[i], hyp[j]))
                i += 1
                j += 1
                continue
        if i < n and here == table[i + 1][j] + 1:
            ops.append(AlignOp(DEL, ref[i], None))
            i += 1
        else:
            ops.append(AlignOp(INS, None, hyp[j]))
            j += 1
    return Alignment(tuple(ops))


def edit_cost(ref: Sequence, hyp: Sequence) -> int:
    return edit_table(ref, hyp)[0][0]


def graphemes(text: str) -> List[str]:
    import regex

    return regex.findall(r"\X", text)


@dataclass(frozen=True)
class EvalResult:
    wer: float
    cer: float
    substitutions: int
    deletions: int
    insertions: int
    ref_tokens: int
    char_errors: int = 0
    ref_chars: int = 0
    grapheme_cer: Optional[float] = None
    grapheme_errors: Optional[int] = None
    ref_graphemes: Optional[int] = None
    empty_reference: bool = False

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    def to_dict(self) -> dict:
        return asdict(self)


def _rate(errors: int, total: int) -> float:
    # errors over an empty reference are reported as a raw count
    return errors / total if total else float(errors)


@dataclass
class ScoredPair:
    result: EvalResult
    alignment: Alignment
    ref_tokens: List[str]
    hyp_tokens: List[str]


def score_detail(
    ref_text: str,
    hyp_text: str,
    glm: Optional[GlmTable] = None,
    norm_cfg: NormalizationConfig = NormalizationConfig(),
    grapheme_cer: bool = False,
) -> ScoredPair:
    if glm is not None and len(glm):
        glm = normalized_glm(glm, norm_cfg)
    ref = canonicalize(normalize(ref_text, norm_cfg).split(), glm)
    hyp = canonicalize(normalize(hyp_text, norm_cfg).split(), glm)
    alignment = word_align(ref, hyp)
    ref_str, hyp_str = " ".join(ref), " ".join(hyp)
    char_errors = edit_cost(ref_str, hyp_str)
    g_cer = g_err = g_ref = None
    if grapheme_cer:
        rg, hg = graphemes(ref_str), graphemes(hyp_str)
        g_err, g_ref = edit_cost(rg, hg), len(rg)
        g_cer = _rate(g_err, g_ref)
    s, d, i = alignment.count(SUB), alignment.count(DEL), alignment.count(INS)
    result = EvalResult(
        wer=_rate(s + d + i, len(ref)),
        cer=_rate(char_errors, len(ref_str)),
        substitutions=s,
        deletions=d,
        insertions=i,
        ref_tokens=len(ref),
        char_errors=char_errors,
        ref_chars=len(ref_str),
        grapheme_cer=g_cer,
        grapheme_errors=g_err,
        ref_graphemes=g_ref,
        empty_reference=not ref and bool(hyp),
    )
    return ScoredPair(result, alignment, ref, hyp)


def score(
    ref_text: str,
    hyp_text: str,
    glm: Optional[GlmTable] = None,
    norm_cfg: NormalizationConfig = NormalizationConfig(),
    grapheme_cer: bool = False,
) -> EvalResult:
    return score_detail(ref_text, hyp_text, glm, norm_cfg, grapheme_cer).result


def pool(results: Iterable[EvalResult]) -> EvalResult:
    results = list(results)
    s = sum(r.substitutions for r in results)
    d = sum(r.deletions for r in results)
    i = sum(r.insertions for r in results)
    n = sum(r.ref_tokens for r in results)
    ce = sum(r.char_errors for r in results)
    cn = sum(r.ref_chars for r in results)
    g_err = g_ref = g_cer = None
    if results and all(r.grapheme_errors is not None for r in results):
        g_err = sum(r.grapheme_errors for r in results)
        g_ref = sum(r.ref_graphemes for r in results)
        g_cer = _rate(g_err, g_ref)
    return EvalResult(
        wer=_rate(s + d + i, n),
        cer=_rate(ce, cn),
        substitutions=s,
        deletions=d,
        insertions=i,
        ref_tokens=n,
        char_errors=ce,
        ref_chars=cn,
        grapheme_cer=g_cer,
        grapheme_errors=g_err,
        ref_graphemes=g_ref,
        empty_reference=n == 0 and s + d + i > 0,
    )


@dataclass
class BatchReport:
    overall: EvalResult
    categories: "OrderedDict[str, EvalResult]"
    pairs: int
    details: List[Tuple[str, str, ScoredPair]] = field(default_factory=list)
    excluded: List[str] = field(default_factory=list)

    def to_dict(self, include_details: bool = False) -> dict:
        out = {
            "pooling": POOLING,
            "cer_stage": CER_STAGE,
            "pairs": self.pairs,
            "overall": self.overall.to_dict(),
            "categories": {name: r.to_dict() for name, r in self.categories.items()},
            "excluded": list(self.excluded),
        }
        if include_details:
            out["utterances"] = [
                {"id": uid, "category": cat, **sp.result.to_dict()} for uid, cat, sp in self.details
            ]
        return out

    def to_json(self, include_details: bool = False) -> str:
        return json.dumps(self.to_dict(include_details), ensure_ascii=False, indent=2, sort_keys=False)

    def to_text(self, show_alignments: bool = True) -> str:
        lines = [
            f"# WER pooling: {POOLING}",
            f"# CER computed {CER_STAGE.replace('-', ' ')} canonicalization, codepoints incl. spaces",
            "",
            f"{'Category':<20} {'Pairs':>6} {'RefTok':>8} {'Sub':>6} {'Del':>6} {'Ins':>6} {'WER%':>8} {'CER%':>8}",
        ]
        counts = OrderedDict()
        for _, cat, _sp in self.details:
            counts[cat] = counts.get(cat, 0) + 1
        rows = list(self.categories.items()) + [("ALL", self.overall)]
        for name, r in rows:
            npairs = self.pairs if name == "ALL" else counts.get(name, 0)
            lines.append(
                f"{name:<20} {npairs:>6} {r.ref_tokens:>8} {r.substitutions:>6} {r.deletions:>6} "
                f"{r.insertions:>6} {100 * r.wer:>8.2f} {100 * r.cer:>8.2f}"
            )
        if self.excluded:
            lines += ["", f"excluded (no counterpart): {len(self.excluded)}"]
            lines += [f"  {x}" for x in self.excluded]
        if show_alignments and self.details:
            lines.append("")
            for uid, cat, sp in self.details:
                lines.append(f"id: {uid} [{cat}] WER {100 * sp.result.wer:.2f}%")
                lines += format_alignment(sp.alignment)
                lines.append("")
        return "\n".join(lines).rstrip() + "\n"


def format_alignment(alignment: Alignment) -> List[str]:
    """sclite-style REF/HYP/EVAL rows; deleted and inserted slots shown as ``***``."""
    ref_row, hyp_row, eval_row = [], [], []
    marks = {MATCH: "", SUB: "S", DEL: "D", INS: "I"}
    for op in alignment.ops:
        r = op.ref if op.ref is not None else "***"
        h = op.hyp if op.hyp is not None else "***"
        width = max(len(r), len(h), 1)
        ref_row.append(r.ljust(width))
        hyp_row.append(h.ljust(width))
        eval_row.append(marks[op.kind].ljust(width))
    return [
        "REF:  " + " ".join(ref_row).rstrip(),
        "HYP:  " + " ".join(hyp_row).rstrip(),
        "EVAL: " + " ".join(eval_row).rstrip(),
    ]


def batch_score(
    pairs: Iterable[Tuple[str, str, str]],
    glm: Optional[GlmTable] = None,
    norm_cfg: NormalizationConfig = NormalizationConfig(),
    grapheme_cer: bool = False,
    ids: Optional[Sequence[str]] = None,
) -> BatchReport:
    """Score ``(ref, hyp, category)`` triples; corpus and per-category figures are pooled."""
    details = []
    by_cat: Dict[str, List[EvalResult]] = OrderedDict()
    for idx, (ref, hyp, category) in enumerate(pairs):
        sp = score_detail(ref, hyp, glm, norm_cfg, grapheme_cer)
        uid = ids[idx] if ids is not None else str(idx)
        details.append((uid, category, sp))
        by_cat.setdefault(category, []).append(sp.result)
    categories = OrderedDict((name, pool(rs)) for name, rs in sorted(by_cat.items()))
    overall = pool(sp.result for _, _, sp in details)
    return BatchReport(overall=overall, categories=categories, pairs=len(details), details=details)


def mean_of_ratios(results: Iterable[EvalResult]) -> float:
    """Unpooled average of per-utterance WERs, for comparison only."""
    rs = list(results)
    return math.fsum(r.wer for r in rs) / len(rs) if rs else 0.0
