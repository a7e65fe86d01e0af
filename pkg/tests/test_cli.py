from __future__ import annotations

import json
from pathlib import Path

import pytest

from emojisent.annotator import BEST_COMBO, RepresentationCombo, build_emoji_prompt, build_tweet_prompt
from emojisent.cli import main
from emojisent.lexicon import EmojiEntry, load_lexicon, read_entries, write_entries

DATA = Path(__file__).parent / "data"
LEX = str(DATA / "fixture_lexicon.tsv")
TWEETS = str(DATA / "fixture_tweets.jsonl")
ICON = RepresentationCombo.of("icon", "description")


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_segment(capsys):
    code, out, _ = run(capsys, "segment", "a😂b👍🏽")
    assert code == 0
    assert out == "0\t1F602\t1\n1\t1F44D 1F3FD\t6\n"


def test_segment_file(capsys, tmp_path):
    p = tmp_path / "t.txt"
    p.write_text("🇫🇷", encoding="utf-8")
    code, out, _ = run(capsys, "segment", "--file", p)
    assert (code, out) == (0, "0\t1F1EB 1F1F7\t0\n")


def test_analyze(capsys):
    code, out, _ = run(capsys, "analyze", "Great 😂👍", "--lexicon", LEX)
    assert code == 0
    rec = json.loads(out)
    assert (rec["label"], rec["score"], rec["strategy"]) == ("positive", 2, "bsa")


def test_analyze_no_emoji(capsys):
    code, out, _ = run(capsys, "analyze", "plain words", "--lexicon", LEX)
    assert json.loads(out)["label"] == "no_emoji"


def test_analyze_weights_and_strategy(capsys):
    code, out, _ = run(capsys, "analyze", "🤔", "--lexicon", LEX, "--strategy", "DPM")
    assert json.loads(out)["label"] == "positive"
    code, out, _ = run(capsys, "analyze", "🤔", "--lexicon", LEX, "--weights=2,1,-2", "--theta", "1")
    assert json.loads(out)["label"] == "neutral"


@pytest.mark.parametrize("extra", [["--strategy", "nope"], ["--weights=1,2"], ["--weights=0,0,0"]])
def test_bad_options_are_input_errors(capsys, extra):
    code, _, _ = run(capsys, "analyze", "😂", "--lexicon", LEX, *extra)
    assert code == 1


def test_missing_lexicon(capsys, caplog, tmp_path):
    code, _, _ = run(capsys, "analyze", "😂", "--lexicon", tmp_path / "nope.tsv")
    assert code == 1 and "nope.tsv" in caplog.text


def test_config_defaults_and_flag_override(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"strategy": "dpm"}), encoding="utf-8")
    _, out, _ = run(capsys, "--config", cfg, "analyze", "🤔", "--lexicon", LEX)
    assert json.loads(out)["strategy"] == "dpm"
    _, out, _ = run(capsys, "--config", cfg, "analyze", "🤔", "--lexicon", LEX, "--strategy", "bsa")
    assert json.loads(out)["strategy"] == "bsa"
    cfg.write_text(json.dumps({"strategy": "vibes"}), encoding="utf-8")
    code, _, _ = run(capsys, "--config", cfg, "analyze", "🤔", "--lexicon", LEX)
    assert code == 1


def test_evaluate_is_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run(capsys, "evaluate", "--dataset", TWEETS, "--lexicon", LEX, "--strategy", "first", "--out-dir", d)[0] == 0
    names = sorted(p.name for p in a.iterdir())
    assert names == ["buckets.csv", "confusion.csv", "groups.csv", "predictions.jsonl", "report.json"]
    for name in names:
        assert (a / name).read_bytes() == (b / name).read_bytes()
    report = json.loads((a / "report.json").read_text(encoding="utf-8"))
    assert report["accuracy"] == "0.8108"


def test_evaluate_custom_buckets(capsys, tmp_path):
    run(capsys, "evaluate", "--dataset", TWEETS, "--lexicon", LEX, "--out-dir", tmp_path, "--buckets", "3")
    lines = (tmp_path / "buckets.csv").read_text(encoding="utf-8").splitlines()
    assert [line.split(",")[0] for line in lines[1:]] == ["1-2", "3+"]


def test_import_esr(capsys, tmp_path):
    out = tmp_path / "esr.tsv"
    assert run(capsys, "import-esr", "-o", out)[0] == 0
    assert len(load_lexicon(out)) == 751


def test_build_dataset(capsys, tmp_path):
    uni = tmp_path / "emoji-test.txt"
    uni.write_text(
        "1F602 ; fully-qualified # 😂 E0.6 face with tears of joy\n"
        "1F44D ; fully-qualified # 👍 E0.6 thumbs up\n",
        encoding="utf-8",
    )
    desc = tmp_path / "d.tsv"
    desc.write_text("1F602\tLaughing.\n", encoding="utf-8")
    out = tmp_path / "entries.jsonl"
    code, stdout, _ = run(capsys, "build-dataset", "--unicode", uni, "--descriptions", desc, "-o", out)
    assert code == 0
    summary = json.loads(stdout)
    assert summary["total"] == 2
    assert [e.description for e in read_entries(out)] == ["Laughing.", ""]
    assert summary["missing_description"] == ["1F44D"]


@pytest.fixture
def entries_file(tmp_path):
    entries = [
        EmojiEntry((0x1F602,), "😂", "face with tears of joy", "Laughing."),
        EmojiEntry((0x1F622,), "😢", "crying face", "A tear."),
    ]
    p = tmp_path / "entries.jsonl"
    write_entries(entries, p)
    return entries, p


def _fixtures(tmp_path, entries, replies):
    p = tmp_path / "fx.jsonl"
    lines = [
        json.dumps({"cache_key": build_emoji_prompt(e, ICON).cache_key, "reply": r})
        for e, r in zip(entries, replies)
    ]
    p.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return p


def test_annotate_mock_then_warm_cache(capsys, tmp_path, entries_file):
    entries, path = entries_file
    fx = _fixtures(tmp_path, entries, ["Positive", "negative."])
    cache, out, recs = tmp_path / "cache.tsv", tmp_path / "lex.tsv", tmp_path / "recs.jsonl"
    args = ["annotate", "--entries", path, "--combo", "icon+description", "-o", out,
            "--records", recs, "--cache", cache]
    assert run(capsys, *args, "--transport", "mock", "--fixtures", fx)[0] == 0
    first = out.read_bytes(), recs.read_bytes()
    labels = {k: v.sentiment.value for k, v in load_lexicon(out).entries.items()}
    assert labels == {(0x1F602,): "positive", (0x1F622,): "negative"}
    # a warm cache needs no transport at all
    assert run(capsys, *args, "--transport", "cache-only")[0] == 0
    assert (out.read_bytes(), recs.read_bytes()) == first


def test_annotate_missing_fixture_writes_nothing(capsys, tmp_path, entries_file):
    entries, path = entries_file
    fx = _fixtures(tmp_path, entries[:1], ["positive"])
    out = tmp_path / "lex.tsv"
    code, _, err = run(capsys, "annotate", "--entries", path, "--combo", "icon+description", "-o", out,
                       "--transport", "mock", "--fixtures", fx)
    assert code == 2
    assert not out.exists()


def test_annotate_unparseable_reply(capsys, caplog, tmp_path, entries_file):
    entries, path = entries_file
    fx = _fixtures(tmp_path, entries, ["positive", "it is sad I guess"])
    out = tmp_path / "lex.tsv"
    code, _, err = run(capsys, "annotate", "--entries", path, "--combo", "icon+description", "-o", out,
                       "--transport", "mock", "--fixtures", fx)
    assert code == 2 and not out.exists()
    assert "1F622" in caplog.text


def test_annotate_missing_representation(capsys, tmp_path, entries_file):
    _, path = entries_file
    code, _, _ = run(capsys, "annotate", "--entries", path, "--combo", BEST_COMBO.slug, "-o", tmp_path / "l.tsv",
                     "--transport", "cache-only")
    assert code == 1


def test_label_texts(capsys, tmp_path):
    ds = tmp_path / "ds.jsonl"
    ds.write_text(
        json.dumps({"id": "1", "text": "yay 😂"}) + "\n" + json.dumps({"id": "2", "text": "meh 🤔"}) + "\n",
        encoding="utf-8",
    )
    fx = tmp_path / "fx.jsonl"
    fx.write_text(
        json.dumps({"text": build_tweet_prompt("yay 😂").text, "reply": "Positive"}) + "\n"
        + json.dumps({"text": build_tweet_prompt("meh 🤔").text, "reply": "neutral"}) + "\n",
        encoding="utf-8",
    )
    out = tmp_path / "labelled.jsonl"
    code, _, _ = run(capsys, "label-texts", "--dataset", ds, "-o", out, "--transport", "mock", "--fixtures", fx)
    assert code == 0
    rows = [json.loads(line) for line in out.read_text(encoding="utf-8").splitlines()]
    assert [r["truth"] for r in rows] == ["positive", "neutral"]


def test_compare(capsys, tmp_path):
    recs = tmp_path / "r.jsonl"
    recs.write_text(
        json.dumps({"key": "1F602", "combo": "icon+description", "label": "positive",
                    "raw_reply": "positive", "model_id": "m"}) + "\n",
        encoding="utf-8",
    )
    code, out, _ = run(capsys, "compare", "--annotations", recs, "--reference", LEX)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "representation,matched,population"
    assert "Icon & Description,1,1" in lines
    assert len(lines) == 16
