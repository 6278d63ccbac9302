"""Scoring-time text normalization: punctuation removal, numbers to Bangla words, whitespace."""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import FrozenSet, List, Optional, Tuple

DANDAS = frozenset("।॥")  # ।  ॥
_DIGIT_RUN = re.compile(r"\d+")
FALLBACK_LIMIT = 10**8


@dataclass(frozen=True)
class NormalizationConfig:
    remove_punctuation: bool = True
    numbers_to_words: bool = True
    extra_punct_set: Optional[FrozenSet[str]] = None


@dataclass(frozen=True)
class NumeralTable:
    below_hundred: Tuple[str, ...]
    hundred: str
    thousand: str
    lakh: str
    crore: str


def parse_numeral_table(text: str) -> NumeralTable:
    names = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            key, word = line.split("\t")
        except ValueError:
            raise ValueError(f"numeral table line {lineno}: expected 'key<TAB>word'") from None
        names[key.strip()] = unicodedata.normalize("NFC", word.strip())
    missing = [str(n) for n in range(100) if str(n) not in names]
    missing += [k for k in ("hundred", "thousand", "lakh", "crore") if k not in names]
    if missing:
        raise ValueError(f"numeral table is missing entries: {', '.join(missing)}")
    return NumeralTable(
        below_hundred=tuple(names[str(n)] for n in range(100)),
        hundred=names["hundred"],
        thousand=names["thousand"],
        lakh=names["lakh"],
        crore=names["crore"],
    )


@lru_cache(maxsize=1)
def default_numeral_table() -> NumeralTable:
    data = resources.files("pseudolabel").joinpath("data/bn_numerals.tsv").read_text(encoding="utf-8")
    return parse_numeral_table(data)


def number_to_words(token: str, table: Optional[NumeralTable] = None) -> List[str]:
    """Spell a digit string (any script) in Bangla, grouped as crore/lakh/thousand/hundred.

    Values of 10**8 and above are read digit by digit.
    """
    if not token or not token.isdecimal():
        raise ValueError(f"not a digit token: {token!r}")
    table = table or default_numeral_table()
    units = table.below_hundred
    value = int(token)
    if value >= FALLBACK_LIMIT:
        return [units[unicodedata.decimal(ch)] for ch in token]
    if value == 0:
        return [units[0]]

    words: List[str] = []
    crore, rest = divmod(value, 10**7)
    lakh, rest = divmod(rest, 10**5)
    thousand, rest = divmod(rest, 1000)
    hundred, rest = divmod(rest, 100)
    for count, scale in ((crore, table.crore), (lakh, table.lakh), (thousand, table.thousand)):
        if count:
            words += [units[count], scale]
    if hundred:
        words.append(units[hundred] + table.hundred)
    if rest:
        words.append(units[rest])
    return words


def is_punctuation(ch: str, extra: Optional[FrozenSet[str]] = None) -> bool:
    return unicodedata.category(ch).startswith("P") or ch in DANDAS or (extra is not None and ch in extra)


def normalize(text: str, cfg: NormalizationConfig = NormalizationConfig()) -> str:
    text = unicodedata.normalize("NFC", text)
    if cfg.remove_punctuation:
        extra = cfg.extra_punct_set
        text = "".join(ch for ch in text if not is_punctuation(ch, extra))
        # deleting a character can leave a newly composable sequence
        text = unicodedata.normalize("NFC", text)
    if cfg.numbers_to_words:
        text = _DIGIT_RUN.sub(lambda m: " " + " ".join(number_to_words(m.group())) + " ", text)
    return unicodedata.normalize("NFC", " ".join(text.split()))
