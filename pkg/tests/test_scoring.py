import io
import itertools
import random

import pytest
from hypothesis import given, strategies as st

from pseudolabel.scoring import (
    DEL,
    INS,
    MATCH,
    POOLING,
    SUB,
    GlmError,
    GlmTable,
    batch_score,
    canonicalize,
    edit_cost,
    format_alignment,
    mean_of_ratios,
    parse_glm,
    score,
    word_align,
)
from pseudolabel.textnorm import NormalizationConfig

from oracles import all_sequences, min_cost_over_all_alignments

GLM_EK = GlmTable((("এক", "ek"),))


def test_parse_glm():
    g = parse_glm(io.StringIO("# variants\n\nএক\tek\n"))
    assert g.classes == (("এক", "ek"),)
    assert parse_glm(io.StringIO("")).classes == ()


def test_glm_overlap_names_word():
    with pytest.raises(GlmError, match="ek"):
        parse_glm(io.StringIO("এক\tek\nek\tyek\n"))


def test_glm_singleton_rejected():
    with pytest.raises(GlmError):
        parse_glm(io.StringIO("এক\n"))
    with pytest.raises(GlmError):
        GlmTable((("a",),))


def test_canonicalize():
    assert canonicalize(["x", "ek"], GlmTable()) == ["x", "ek"]
    assert canonicalize(["ek"], GLM_EK) == ["এক"]
    once = canonicalize(["ek", "এক", "z"], GLM_EK)
    assert canonicalize(once, GLM_EK) == once


def test_align_identity():
    a = word_align(list("abc"), list("abc"))
    assert [op.kind for op in a.ops] == [MATCH] * 3 and a.cost == 0


def test_align_substitution():
    a = word_align(list("abc"), list("axc"))
    assert a.cost == 1 and a.count(SUB) == 1
    assert min_cost_over_all_alignments("abc", "axc") == 1


def test_align_empty_reference():
    a = word_align([], ["a", "b"])
    assert [op.kind for op in a.ops] == [INS, INS]


def test_tie_preference_left_to_right():
    # "a" vs "b a": insert-then-match beats substitute-then-insert only by preference order
    assert [op.kind for op in word_align(["a"], ["b", "a"]).ops] == [INS, MATCH]
    assert [op.kind for op in word_align(["a", "b"], ["c"]).ops] == [SUB, DEL]
    assert [op.kind for op in word_align(["a"], ["b", "c"]).ops] == [SUB, INS]


def test_align_cost_exhaustive_small():
    for ref, hyp in itertools.product(all_sequences("ab", 4), repeat=2):
        a = word_align(ref, hyp)
        assert a.cost == min_cost_over_all_alignments(ref, hyp)
        assert a.ref_side() == list(ref) and a.hyp_side() == list(hyp)


seq = st.lists(st.sampled_from("abcd"), max_size=12)


@given(seq, seq)
def test_alignment_properties(ref, hyp):
    a = word_align(ref, hyp)
    assert a.ref_side() == ref and a.hyp_side() == hyp
    assert a.cost <= max(len(ref), len(hyp))
    assert (a.cost == 0) == (ref == hyp)
    b = word_align(hyp, ref)
    assert a.cost == b.cost
    assert a.count(DEL) - a.count(INS) == len(ref) - len(hyp)


def test_score_examples():
    r = score("আমি ভাল", "আমি ভাল")
    assert r.wer == 0 and r.cer == 0
    r = score("a b c", "a x c")
    assert r.wer == pytest.approx(1 / 3) and r.substitutions == 1
    assert score("এক টাকা", "ek টাকা", GLM_EK).wer == 0
    assert score("এক টাকা", "ek টাকা").wer == 0.5


def test_score_cer_counts_spaces():
    r = score("ab cd", "ab ce")
    assert r.ref_chars == 5 and r.char_errors == 1 and r.cer == 0.2


def test_score_empty_reference_conventions():
    assert score("", "").wer == 0
    r = score("", "a b c")
    assert r.wer == 3 and r.ref_tokens == 0 and r.empty_reference


def test_score_normalizes_first():
    assert score("৫ টাকা।", "পাঁচ টাকা").wer == 0
    assert score("৫ টাকা", "পাঁচ টাকা", norm_cfg=NormalizationConfig(numbers_to_words=False)).wer == 0.5


def test_grapheme_cer():
    r = score("ক্ষ", "ক", grapheme_cer=True)
    assert r.ref_graphemes == 1 and r.grapheme_errors == 1
    assert r.ref_chars == 3 and r.char_errors == 2


def test_batch_pooling():
    pairs = [("a", "x", "c1"), ("a b c d e f g h i", "a b c d e f g h x", "c1")]
    rep = batch_score(pairs)
    assert rep.overall.wer == pytest.approx(2 / 10)
    assert mean_of_ratios(sp.result for _, _, sp in rep.details) == pytest.approx(0.5 + 0.5 / 9)


def test_batch_single_pair_equals_score():
    rep = batch_score([("a b c", "a x c", "News")])
    assert rep.overall == score("a b c", "a x c")
    assert list(rep.categories) == ["News"]


def test_batch_categories_and_reports():
    rep = batch_score([("a b", "a b", "News"), ("a b", "a", "Vlog")], ids=["u1", "u2"])
    assert rep.categories["News"].wer == 0 and rep.categories["Vlog"].wer == 0.5
    assert "Talkshow" not in rep.categories
    d = rep.to_dict(include_details=True)
    assert d["pooling"] == POOLING and d["cer_stage"] == "after-glm"
    assert [u["id"] for u in d["utterances"]] == ["u1", "u2"]
    text = rep.to_text()
    assert POOLING in text and "EVAL:" in text


def test_format_alignment():
    rows = format_alignment(word_align(["a", "b", "c"], ["a", "x", "c", "d"]))
    assert rows[0].split() == ["REF:", "a", "b", "c", "***"]
    assert rows[1].split() == ["HYP:", "a", "x", "c", "d"]
    assert rows[2].split() == ["EVAL:", "S", "I"]


def test_whitespace_invariance():
    assert score("  a   b\tc ", "a x  c") == score("a b c", "a x c")


@given(st.lists(st.sampled_from(["ek", "এক", "dui", "দুই", "x", "y"]), max_size=8),
       st.lists(st.sampled_from(["ek", "এক", "dui", "দুই", "x", "y"]), max_size=8), st.randoms())
def test_glm_invariance_property(ref, hyp, rnd):
    glm = GlmTable((("এক", "ek"), ("দুই", "dui")))
    swap = {"ek": "এক", "এক": "ek", "dui": "দুই", "দুই": "dui"}
    ref2 = [swap.get(w, w) if rnd.random() < 0.5 else w for w in ref]
    hyp2 = [swap.get(w, w) if rnd.random() < 0.5 else w for w in hyp]
    assert score(" ".join(ref), " ".join(hyp), glm) == score(" ".join(ref2), " ".join(hyp2), glm)


def test_edit_cost_symmetric_random():
    rng = random.Random(2)
    for _ in range(200):
        a = [rng.choice("abc") for _ in range(rng.randint(0, 15))]
        b = [rng.choice("abc") for _ in range(rng.randint(0, 15))]
        assert edit_cost(a, b) == edit_cost(b, a)


def test_glm_entries_are_matched_in_normalized_form():
    glm = GlmTable((("১০০", "একশ"), ("ok!", "okay")))
    assert score("একশ টাকা", "১০০ টাকা", glm).wer == 0
    assert score("okay", "ok", glm).wer == 0
