import json
import logging

import numpy as np
import pytest

from pseudolabel.audio import AudioBuffer, read_wav, write_wav
from pseudolabel.cli import main
from pseudolabel.manifest import read_manifest

PERMISSIVE = ["--r-w-min", "0", "--r-w-max", "1000", "--d-a-min", "0", "--d-a-max", "1000",
              "--c-t-min", "0", "--w-t-min", "0"]


def synth(tmp_path, name="corpus", *extra):
    out = tmp_path / name
    assert main(["synth", "--out", str(out), "--utterances", "10", "--vocab-size", "500", "--seed", "4", *extra]) == 0
    return out


def label(corpus, out, *extra):
    return main(["label", "--e1", str(corpus / "e1.jsonl"), "--e2", str(corpus / "e2.jsonl"),
                 "--audio-root", str(corpus / "audio"), "--out", str(out), *extra])


def load(path):
    with open(path, "rb") as fh:
        return read_manifest(fh)


def test_noiseless_label_reproduces_truth(tmp_path):
    corpus = synth(tmp_path)
    assert label(corpus, tmp_path / "out", *PERMISSIVE) == 0
    records = load(tmp_path / "out" / "manifest.jsonl")
    truth = load(corpus / "truth.jsonl")
    assert len(records) == 10
    assert [r.text for r in records] == [t.text for t in truth]
    status = json.loads((tmp_path / "out" / "run_status.json").read_text())
    assert status["status"] == "complete"


def test_audio_files_match_manifest(tmp_path):
    corpus = synth(tmp_path, "c", "--e1-sub", "0.2", "--e2-sub", "0.2", "--jitter", "0.02")
    assert label(corpus, tmp_path / "out") == 0
    out = tmp_path / "out"
    records = load(out / "manifest.jsonl")
    assert records
    for rec in records:
        buf = read_wav(out / rec.audio_filepath)
        assert buf.sample_rate == 16000
        assert abs(buf.duration - rec.duration) <= 1 / 16000
    stats = json.loads((out / "stats.json").read_text())
    assert stats["kept_segments"] + stats["dropped_segments"] == stats["matched_segments"]
    assert stats["manifest_records"] == stats["kept_segments"] - stats["duplicates_dropped"]
    assert stats["provenance"]["thresholds"]["d_a_max"] == 18.5


def test_everything_too_long(tmp_path):
    corpus = synth(tmp_path)
    args = PERMISSIVE[:-6] + ["--d-a-max", "0.01", "--c-t-min", "0", "--w-t-min", "0"]
    assert label(corpus, tmp_path / "out", *args) == 0
    assert load(tmp_path / "out" / "manifest.jsonl") == []
    stats = json.loads((tmp_path / "out" / "stats.json").read_text())
    hist = stats["drop_reasons"]
    assert hist["TooLong"] == stats["dropped_segments"] == stats["matched_segments"] > 0
    assert sum(hist.values()) == hist["TooLong"]
    assert "100.00%" in (tmp_path / "out" / "stats.txt").read_text()


def test_rerun_is_byte_identical(tmp_path):
    corpus = synth(tmp_path, "c", "--e1-sub", "0.1", "--e2-sub", "0.1")
    assert label(corpus, tmp_path / "a") == 0
    assert label(corpus, tmp_path / "b") == 0
    assert (tmp_path / "a" / "manifest.jsonl").read_bytes() == (tmp_path / "b" / "manifest.jsonl").read_bytes()


def test_config_file_and_flag_override(tmp_path):
    corpus = synth(tmp_path)
    cfg = {"e1": str(corpus / "e1.jsonl"), "e2": str(corpus / "e2.jsonl"), "audio_root": str(corpus / "audio"),
           "thresholds": {"d_a_min": 0, "d_a_max": 0.01}}
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    assert main(["label", "--config", str(tmp_path / "cfg.json"), "--out", str(tmp_path / "o1")]) == 0
    assert load(tmp_path / "o1" / "manifest.jsonl") == []
    assert main(["label", "--config", str(tmp_path / "cfg.json"), "--out", str(tmp_path / "o2"), "--d-a-max", "100"]) == 0
    assert len(load(tmp_path / "o2" / "manifest.jsonl")) > 0


def test_telephony_sources_are_upsampled(tmp_path):
    corpus = synth(tmp_path)
    for wav in (corpus / "audio").iterdir():
        src = read_wav(wav)
        write_wav(AudioBuffer(src.samples[::2].copy(), 8000), wav)
    assert label(corpus, tmp_path / "out", *PERMISSIVE) == 0
    rec = load(tmp_path / "out" / "manifest.jsonl")[0]
    seg = read_wav(tmp_path / "out" / rec.audio_filepath)
    assert seg.sample_rate == 16000 and abs(seg.duration - rec.duration) <= 1 / 16000


def test_input_errors_exit_1(tmp_path):
    corpus = synth(tmp_path)
    assert label(corpus, tmp_path / "o", "--workers", "0") == 1
    assert main(["label", "--e1", str(tmp_path / "nope.jsonl"), "--e2", str(corpus / "e2.jsonl"),
                 "--audio-root", str(corpus / "audio"), "--out", str(tmp_path / "o")]) == 1
    (corpus / "e1.jsonl").write_text("{broken\n")
    assert label(corpus, tmp_path / "o2") == 1
    assert json.loads((tmp_path / "o2" / "run_status.json").read_text())["status"] == "failed"


def test_missing_audio_is_pipeline_error(tmp_path):
    corpus = synth(tmp_path)
    next((corpus / "audio").iterdir()).unlink()
    assert label(corpus, tmp_path / "o", *PERMISSIVE) == 2
    status = json.loads((tmp_path / "o" / "run_status.json").read_text())
    assert status["status"] == "failed" and status["partial_outputs"]


def test_score_identical(tmp_path, capsys):
    corpus = synth(tmp_path)
    truth = corpus / "truth.jsonl"
    assert main(["score", "--ref", str(truth), "--hyp", str(truth), "--out-json", str(tmp_path / "r.json"),
                 "--out-text", str(tmp_path / "r.txt")]) == 0
    rep = json.loads((tmp_path / "r.json").read_text())
    assert rep["overall"]["wer"] == 0 and all(c["wer"] == 0 for c in rep["categories"].values())
    assert rep["pooling"] == "pooled-errors/pooled-ref-tokens"
    assert "pooled-errors/pooled-ref-tokens" in (tmp_path / "r.txt").read_text()


def test_score_missing_hyp_is_excluded(tmp_path, caplog, capsys):
    corpus = synth(tmp_path)
    lines = (corpus / "truth.jsonl").read_text().splitlines()
    (tmp_path / "hyp.jsonl").write_text("\n".join(lines[1:]) + "\n")
    with caplog.at_level(logging.WARNING):
        assert main(["score", "--ref", str(corpus / "truth.jsonl"), "--hyp", str(tmp_path / "hyp.jsonl"),
                     "--out-json", str(tmp_path / "r.json")]) == 0
    rep = json.loads((tmp_path / "r.json").read_text())
    assert rep["pairs"] == 9 and len(rep["excluded"]) == 1
    assert "excluded" in caplog.text


def test_score_with_glm_and_alignments(tmp_path, capsys):
    (tmp_path / "ref.jsonl").write_text('{"audio_filepath":"News__a__0.wav","text":"এক টাকা","duration":1}\n')
    (tmp_path / "hyp.jsonl").write_text('{"audio_filepath":"News__a__0.wav","text":"ek টাকা দাও","duration":1}\n')
    (tmp_path / "g.glm").write_text("এক\tek\n")
    assert main(["score", "--ref", str(tmp_path / "ref.jsonl"), "--hyp", str(tmp_path / "hyp.jsonl"),
                 "--glm", str(tmp_path / "g.glm"), "--alignments", "--graphemes"]) == 0
    out = capsys.readouterr().out
    assert "News" in out and "50.00" in out and "EVAL:" in out


def test_synth_determinism_and_validation(tmp_path):
    a = synth(tmp_path, "a", "--e1-sub", "0.1", "--no-audio")
    b = synth(tmp_path, "b", "--e1-sub", "0.1", "--no-audio")
    for name in ("truth.jsonl", "e1.jsonl", "e2.jsonl"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert main(["synth", "--out", str(tmp_path / "bad"), "--e1-sub", "1.5"]) == 1
    assert main(["synth", "--out", str(tmp_path / "bad"), "--vocab-size", "1"]) == 1


def test_stats_command(tmp_path, capsys):
    corpus = synth(tmp_path)
    assert main(["stats", "--manifest", str(corpus / "truth.jsonl"), "--category-map", str(corpus / "categories.tsv")]) == 0
    out = capsys.readouterr().out
    assert "Channels Category" in out and "Total" in out
    assert main(["stats", "--manifest", str(corpus / "truth.jsonl"), "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["total_records"] == 10
