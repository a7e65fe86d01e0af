from __future__ import annotations

import json
import warnings
from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emojisent.aggregation import AggregationConfig, Strategy
from emojisent.annotator import ALL_COMBOS, BEST_COMBO, AnnotationRecord, RepresentationCombo
from emojisent.evaluation import (
    ConfusionMatrix,
    LabeledText,
    UndefinedMetricError,
    bucket_by_emoji_count,
    compare_representations,
    comparison_csv,
    confusion,
    evaluate_strategy,
    f1_per_class,
    fmt_fraction,
    read_dataset,
    write_report,
)
from emojisent.lexicon import CLASS_ORDER, Sentiment, SentimentLexicon

POS, NEU, NEG = Sentiment.POSITIVE, Sentiment.NEUTRAL, Sentiment.NEGATIVE
labels = st.sampled_from(CLASS_ORDER)
DATA = Path(__file__).parent / "data"


def brute_f1(pred, truth, cls):
    tp = sum(1 for p, t in zip(pred, truth) if p == cls and t == cls)
    fp = sum(1 for p, t in zip(pred, truth) if p == cls and t != cls)
    fn = sum(1 for p, t in zip(pred, truth) if p != cls and t == cls)
    if tp + fp + fn == 0:
        return None
    return Fraction(2 * tp, 2 * tp + fp + fn)


def test_confusion_micro_fixture():
    m = confusion([POS, POS, NEG], [POS, NEG, NEG])
    assert [m.counts[i][i] for i in range(3)] == [1, 0, 1]
    assert m.cell(NEG, POS) == 1
    f1 = f1_per_class(m)
    assert f1[POS] == Fraction(2, 3)
    assert f1[NEU] is None
    assert f1[NEG] == Fraction(2, 3)
    assert m.accuracy() == Fraction(2, 3)


def test_confusion_rejects_bad_input():
    with pytest.raises(ValueError):
        confusion([POS], [POS, NEG])
    with pytest.raises(ValueError):
        confusion([None], [POS])
    with pytest.raises(UndefinedMetricError):
        f1_per_class(confusion([], []))
    with pytest.raises(UndefinedMetricError):
        ConfusionMatrix().accuracy()


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(labels, labels), min_size=1, max_size=1000))
def test_f1_matches_brute_force(pairs):
    pred = [p for p, _ in pairs]
    truth = [t for _, t in pairs]
    m = confusion(pred, truth)
    assert m.total == len(pairs)
    assert m.trace == sum(p == t for p, t in pairs)
    f1 = f1_per_class(m)
    for cls in CLASS_ORDER:
        assert f1[cls] == brute_f1(pred, truth, cls)
        if f1[cls] is not None:
            assert 0 <= f1[cls] <= 1


def test_fmt_fraction():
    assert fmt_fraction(Fraction(30, 37)) == "0.8108"
    assert fmt_fraction(Fraction(1, 8)) == "0.1250"
    assert fmt_fraction(None) == "undefined"


@pytest.mark.parametrize(
    "counts, expected",
    [
        ([1, 2, 3, 7], [1, 2, 0, 1]),
        ([1, 1, 1], [3, 0, 0, 0]),
        ([], [0, 0, 0, 0]),
        ([5, 4, 6, 100], [0, 0, 2, 2]),
    ],
)
def test_buckets(counts, expected):
    buckets = bucket_by_emoji_count([(c, True) for c in counts])
    assert [b.total for b in buckets] == expected
    assert [b.label for b in buckets] == ["1", "2-3", "4-5", "6+"]
    for b in buckets:
        assert b.accuracy == (Fraction(1) if b.total else None)


def test_bucket_edges_validated():
    with pytest.raises(ValueError):
        bucket_by_emoji_count([], edges=(3, 3))
    with pytest.raises(ValueError):
        bucket_by_emoji_count([(0, True)])
    assert [b.label for b in bucket_by_emoji_count([], edges=(3,))] == ["1-2", "3+"]


@pytest.fixture
def small_lexicon():
    return SentimentLexicon.from_labels(
        {(0x1F602,): POS, (0x1F622,): NEG, (0x1F914,): NEU}, source="test"
    )


def test_four_row_fixture(small_lexicon):
    rows = [
        LabeledText("a", "lol 😂", "en", "US", POS),
        LabeledText("b", "sad 😢", "en", "US", NEG),
        LabeledText("c", "hmm 🤔", "es", "ES", NEU),
        LabeledText("d", "ugh 😂", "es", "ES", NEG),
    ]
    report = evaluate_strategy(rows, small_lexicon, AggregationConfig())
    assert report.accuracy == Fraction(3, 4)
    assert report.to_json()["accuracy"] == "0.7500"
    assert report.per_group["country"]["US"].accuracy == 1
    assert report.per_group["country"]["ES"].accuracy == Fraction(1, 2)
    assert report.macro_accuracy("country") == Fraction(3, 4)


def test_empty_dataset(small_lexicon):
    with pytest.raises(ValueError):
        evaluate_strategy([], small_lexicon, AggregationConfig())


def test_all_rows_excluded_reports_undefined(small_lexicon):
    rows = [LabeledText("a", "no emoji here", "en", "US", POS)]
    report = evaluate_strategy(rows, small_lexicon, AggregationConfig())
    assert report.excluded_no_emoji == 1
    assert report.to_json()["accuracy"] == "undefined"


rows_strategy = st.lists(
    st.tuples(
        st.lists(st.sampled_from(["😂", "😢", "🤔", "x", "🥲"]), max_size=8),
        st.one_of(st.none(), labels),
        st.sampled_from(["ES", "BR", "JP"]),
    ),
    min_size=1,
    max_size=40,
)


@settings(max_examples=100, deadline=None)
@given(rows_strategy, st.sampled_from(list(Strategy)))
def test_population_accounting(raw, strategy):
    lex = SentimentLexicon.from_labels({(0x1F602,): POS, (0x1F622,): NEG, (0x1F914,): NEU}, source="t")
    rows = [LabeledText(f"r{i}", " ".join(parts), "xx", c, t) for i, (parts, t, c) in enumerate(raw)]
    report = evaluate_strategy(rows, lex, AggregationConfig.for_strategy(strategy))
    excluded = report.excluded_no_emoji + report.excluded_missing_truth
    assert excluded + sum(b.total for b in report.buckets) == report.dataset_size == len(rows)
    assert sum(g.total for g in report.per_group["country"].values()) == report.evaluated
    if report.evaluated:
        weighted = sum(Fraction(g.total, report.evaluated) * g.accuracy for g in report.per_group["country"].values())
        assert weighted == report.accuracy


def test_read_dataset_reports_bad_rows(tmp_path):
    p = tmp_path / "d.jsonl"
    p.write_text(
        '{"id": "a", "text": "x 😂", "truth": "positive"}\n'
        "not json\n"
        '{"id": "a", "text": "dup"}\n'
        '{"id": "b", "text": "y", "truth": "great"}\n'
        '{"id": "c", "text": "z"}\n',
        encoding="utf-8",
    )
    rows, errors = read_dataset(p)
    assert [r.id for r in rows] == ["a", "c"]
    assert rows[1].ground_truth is None
    assert [e.line for e in errors] == [2, 3, 4]


# -- the 40-row fixture, scored by hand for the First strategy ----------------


@pytest.fixture
def fixture_report(fixture_lexicon):
    rows, errors = read_dataset(DATA / "fixture_tweets.jsonl")
    assert not errors and len(rows) == 40
    return evaluate_strategy(rows, fixture_lexicon, AggregationConfig.for_strategy("first"))


def test_fixture_exclusions(fixture_report):
    assert fixture_report.dataset_size == 40
    assert fixture_report.excluded_no_emoji == 2
    assert fixture_report.excluded_missing_truth == 1
    assert fixture_report.evaluated == 37


def test_fixture_accuracy_and_f1(fixture_report):
    r = fixture_report
    assert r.accuracy == Fraction(30, 37)
    assert r.matrix.counts == ((13, 1, 1), (2, 8, 0), (2, 1, 9))
    assert r.f1 == {POS: Fraction(13, 16), NEU: Fraction(4, 5), NEG: Fraction(9, 11)}
    out = r.to_json()
    assert out["accuracy"] == "0.8108"
    assert out["f1"] == {"positive": "0.8125", "neutral": "0.8000", "negative": "0.8182"}
    wrong = sorted(row.id for row in r.rows if not row.correct)
    assert wrong == sorted(["es-05", "br-04", "de-04", "jp-05", "sa-05", "ru-05", "kr-05"])


def test_fixture_groups(fixture_report):
    countries = {k: (g.correct, g.total) for k, g in fixture_report.per_group["country"].items()}
    assert countries == {
        "ES": (4, 5), "BR": (3, 4), "FR": (4, 4), "DE": (3, 4),
        "JP": (4, 5), "SA": (4, 5), "RU": (4, 5), "KR": (4, 5),
    }
    assert fixture_report.macro_accuracy("country") == Fraction(13, 16)
    langs = fixture_report.per_group["language"]
    assert (langs["ko"].correct, langs["ko"].total) == (3, 4)
    assert (langs["en"].correct, langs["en"].total) == (1, 1)


def test_fixture_buckets(fixture_report):
    assert [(b.label, b.correct, b.total) for b in fixture_report.buckets] == [
        ("1", 12, 15), ("2-3", 15, 19), ("4-5", 2, 2), ("6+", 1, 1),
    ]


def test_fixture_translated(fixture_lexicon):
    rows, _ = read_dataset(DATA / "fixture_tweets.jsonl")
    report = evaluate_strategy(rows, fixture_lexicon, AggregationConfig(), translated=True)
    # only the ES rows carry translations
    assert report.evaluated + report.excluded_no_emoji == 5
    assert report.excluded_missing_truth == 35
    assert report.to_json()["text_field"] == "translated_text"


def test_write_report(tmp_path, fixture_report):
    paths = write_report(fixture_report, tmp_path)
    assert sorted(p.name for p in paths) == sorted(
        ["report.json", "confusion.csv", "groups.csv", "buckets.csv", "predictions.jsonl"]
    )
    data = json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))
    assert data["evaluated"] == 37
    assert (tmp_path / "buckets.csv").read_text(encoding="utf-8").splitlines()[1] == "1,12,15,0.8000"
    assert len((tmp_path / "predictions.jsonl").read_text(encoding="utf-8").splitlines()) == 37


# -- representation comparison ------------------------------------------------


@pytest.fixture
def reference():
    return SentimentLexicon.from_labels({(1,): POS, (2,): NEU, (3,): NEG, (4,): POS}, source="ref")


def _records(combo, labels):
    return [AnnotationRecord(k, combo, s, s.value, "m") for k, s in labels.items()]


def test_compare_identical(reference):
    recs = [r for combo in ALL_COMBOS for r in _records(combo, reference.labels())]
    results = compare_representations(recs, reference)
    assert len(results) == 15
    assert all(r.matched == r.population == 4 for r in results)


def test_compare_disjoint_warns(reference):
    recs = _records(BEST_COMBO, {(99,): POS})
    with pytest.warns(UserWarning, match="no annotated emoji"):
        results = compare_representations(recs, reference)
    best = next(r for r in results if r.combo == BEST_COMBO)
    assert (best.matched, best.population) == (0, 0)


def test_compare_missing_combo(reference):
    recs = _records(BEST_COMBO, reference.labels())
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        results = compare_representations(recs, reference)
    absent = [r for r in results if not r.present]
    assert len(absent) == 14
    assert "absent" in comparison_csv(results)


def test_compare_counts_disagreements(reference):
    flipped = {(1,): NEG, (2,): NEU, (3,): NEG, (4,): NEU}
    results = compare_representations({RepresentationCombo.of("icon"): flipped}, reference)
    icon = next(r for r in results if r.present)
    assert (icon.matched, icon.population) == (2, 4)


@settings(max_examples=50, deadline=None)
@given(st.permutations(range(4)), st.lists(labels, min_size=4, max_size=4))
def test_compare_permutation_invariant(order, assigned):
    ref = SentimentLexicon.from_labels({(1,): POS, (2,): NEU, (3,): NEG, (4,): POS}, source="ref")
    recs = _records(BEST_COMBO, {(i + 1,): assigned[i] for i in range(4)})
    base = compare_representations(recs, ref)
    shuffled = compare_representations([recs[i] for i in order], ref)
    assert base == shuffled
