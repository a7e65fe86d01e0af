"""Accuracy, confusion matrices, per-class F1 and emoji-count breakdowns.

All metrics are computed from integer counts and held as
:class:`fractions.Fraction`; they are only turned into 4-decimal strings
when a report is rendered.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

from .aggregation import AggregationConfig, aggregate, build_sequence
from .annotator import TABLE_ROWS, AnnotationRecord, RepresentationCombo
from .lexicon import CLASS_ORDER, Sentiment, SentimentLexicon
from .segmenter import EmojiData, NormalizedKey, segment
from .util import atomic_write_text

log = logging.getLogger(__name__)

DEFAULT_BUCKET_EDGES = (2, 4, 6)


class UndefinedMetricError(ValueError):
    pass


def fmt_fraction(value: Optional[Fraction], places: int = 4) -> str:
    if value is None:
        return "undefined"
    q = Decimal(1).scaleb(-places)
    return str((Decimal(value.numerator) / Decimal(value.denominator)).quantize(q, rounding=ROUND_HALF_EVEN))


# -- dataset -----------------------------------------------------------------


@dataclass(frozen=True)
class LabeledText:
    id: str
    text: str
    language: str = ""
    country: str = ""
    ground_truth: Optional[Sentiment] = None
    translated_text: Optional[str] = None
    translated_truth: Optional[Sentiment] = None

    @classmethod
    def from_json(cls, obj: Mapping) -> "LabeledText":
        def label(name):
            value = obj.get(name)
            return Sentiment.parse(value) if value not in (None, "") else None

        if "id" not in obj or "text" not in obj:
            raise ValueError("record needs 'id' and 'text'")
        if not isinstance(obj["text"], str):
            raise ValueError("'text' must be a string")
        return cls(
            id=str(obj["id"]),
            text=obj["text"],
            language=str(obj.get("lang", "")),
            country=str(obj.get("country", "")),
            ground_truth=label("truth"),
            translated_text=obj.get("translated_text"),
            translated_truth=label("translated_truth"),
        )


@dataclass(frozen=True)
class RowError:
    line: int
    row_id: Optional[str]
    message: str


def read_dataset(path) -> tuple[list[LabeledText], list[RowError]]:
    """Read a JSONL dataset; bad rows are skipped and reported, not fatal."""
    rows: list[LabeledText] = []
    errors: list[RowError] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            row_id = None
            try:
                obj = json.loads(line)
                if not isinstance(obj, dict):
                    raise ValueError("record is not an object")
                row_id = str(obj.get("id")) if "id" in obj else None
                row = LabeledText.from_json(obj)
            except ValueError as exc:
                errors.append(RowError(lineno, row_id, str(exc)))
                continue
            if row.id in seen:
                errors.append(RowError(lineno, row.id, f"duplicate id {row.id!r}"))
                continue
            seen.add(row.id)
            rows.append(row)
    for err in errors:
        log.warning("%s:%d: skipped row %s: %s", path, err.line, err.row_id, err.message)
    return rows, errors


# -- confusion matrix and F1 -------------------------------------------------


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are true classes, columns predicted, both in positive/neutral/negative order."""

    counts: tuple[tuple[int, int, int], ...] = ((0, 0, 0), (0, 0, 0), (0, 0, 0))

    def cell(self, truth: Sentiment, pred: Sentiment) -> int:
        return self.counts[CLASS_ORDER.index(truth)][CLASS_ORDER.index(pred)]

    @property
    def total(self) -> int:
        return sum(map(sum, self.counts))

    @property
    def trace(self) -> int:
        return sum(self.counts[i][i] for i in range(3))

    def row_sums(self) -> tuple[int, ...]:
        return tuple(sum(r) for r in self.counts)

    def accuracy(self) -> Fraction:
        if self.total == 0:
            raise UndefinedMetricError("accuracy of an empty confusion matrix is undefined")
        return Fraction(self.trace, self.total)

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(
            tuple(tuple(a + b for a, b in zip(r1, r2)) for r1, r2 in zip(self.counts, other.counts))
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["truth\\predicted", *(c.value for c in CLASS_ORDER)])
        for cls, row in zip(CLASS_ORDER, self.counts):
            w.writerow([cls.value, *row])
        return buf.getvalue()


def confusion(pred: Sequence[Sentiment], truth: Sequence[Sentiment]) -> ConfusionMatrix:
    if len(pred) != len(truth):
        raise ValueError(f"length mismatch: {len(pred)} predictions vs {len(truth)} labels")
    grid = [[0, 0, 0] for _ in range(3)]
    for p, t in zip(pred, truth):
        if p is None or t is None:
            raise ValueError("no-emoji predictions and missing labels must be filtered out first")
        grid[CLASS_ORDER.index(Sentiment(t))][CLASS_ORDER.index(Sentiment(p))] += 1
    return ConfusionMatrix(tuple(tuple(r) for r in grid))


def f1_per_class(matrix: ConfusionMatrix) -> dict[Sentiment, Optional[Fraction]]:
    """F1 = 2TP / (2TP + FP + FN); ``None`` where TP + FP + FN = 0."""
    if matrix.total == 0:
        raise UndefinedMetricError("F1 of an empty confusion matrix is undefined")
    out: dict[Sentiment, Optional[Fraction]] = {}
    for i, cls in enumerate(CLASS_ORDER):
        tp = matrix.counts[i][i]
        fn = sum(matrix.counts[i]) - tp
        fp = sum(matrix.counts[r][i] for r in range(3)) - tp
        denom = 2 * tp + fp + fn
        out[cls] = Fraction(2 * tp, denom) if denom else None
    return out


# -- representation comparison -----------------------------------------------


@dataclass(frozen=True)
class ComboMatch:
    label: str
    combo: RepresentationCombo
    matched: Optional[int]
    population: int

    @property
    def present(self) -> bool:
        return self.matched is not None


def compare_representations(
    annotations: Union[Iterable[AnnotationRecord], Mapping[RepresentationCombo, Mapping[NormalizedKey, Sentiment]]],
    reference: SentimentLexicon,
) -> list[ComboMatch]:
    """Per combination, how many emojis got the same label as ``reference``.

    Each combination is scored over its own annotated keys that also occur
    in the reference.  Combinations without annotations come back with
    ``matched=None``.
    """
    if isinstance(annotations, Mapping):
        grouped = {combo: dict(labels) for combo, labels in annotations.items()}
    else:
        grouped: dict[RepresentationCombo, dict[NormalizedKey, Sentiment]] = defaultdict(dict)
        for rec in annotations:
            grouped[rec.combo][rec.key] = rec.label
    ref = reference.labels()
    results = []
    populations = set()
    for label, combo in TABLE_ROWS:
        labels = grouped.get(combo)
        if labels is None:
            results.append(ComboMatch(label, combo, None, 0))
            continue
        common = [k for k in labels if k in ref]
        if not common:
            warnings.warn(f"{label}: no annotated emoji appears in the reference", stacklevel=2)
        populations.add(frozenset(common))
        matched = sum(1 for k in common if labels[k] == ref[k])
        results.append(ComboMatch(label, combo, matched, len(common)))
    if len(populations) > 1:
        warnings.warn("representation combinations cover different emoji populations", stacklevel=2)
    return results


def comparison_csv(results: Iterable[ComboMatch]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["representation", "matched", "population"])
    for r in results:
        w.writerow([r.label, r.matched if r.present else "absent", r.population])
    return buf.getvalue()


# -- strategy evaluation -----------------------------------------------------


@dataclass(frozen=True)
class Bucket:
    low: int
    high: Optional[int]
    correct: int
    total: int

    @property
    def accuracy(self) -> Optional[Fraction]:
        return Fraction(self.correct, self.total) if self.total else None

    @property
    def label(self) -> str:
        if self.high is None:
            return f"{self.low}+"
        if self.high == self.low:
            return str(self.low)
        return f"{self.low}-{self.high}"


def bucket_by_emoji_count(
    rows: Iterable[tuple[int, bool]], edges: Sequence[int] = DEFAULT_BUCKET_EDGES
) -> list[Bucket]:
    """Group ``(emoji_count, correct)`` pairs into count ranges.

    ``edges`` are the counts at which a new bucket starts; the first bucket
    starts at 1, so the default ``(2, 4, 6)`` gives 1, 2-3, 4-5 and 6+.
    """
    starts = [1, *edges]
    if any(b <= a for a, b in zip(starts, starts[1:])):
        raise ValueError(f"bucket edges must be strictly increasing and > 1: {list(edges)}")
    correct = [0] * len(starts)
    total = [0] * len(starts)
    for count, ok in rows:
        if count < 1:
            raise ValueError(f"emoji count {count} is below the first bucket")
        idx = max(i for i, s in enumerate(starts) if count >= s)
        total[idx] += 1
        correct[idx] += bool(ok)
    out = []
    for i, lo in enumerate(starts):
        hi = starts[i + 1] - 1 if i + 1 < len(starts) else None
        out.append(Bucket(lo, hi, correct[i], total[i]))
    return out


@dataclass(frozen=True)
class GroupStat:
    correct: int
    total: int

    @property
    def accuracy(self) -> Fraction:
        return Fraction(self.correct, self.total)


@dataclass(frozen=True)
class RowResult:
    id: str
    language: str
    country: str
    emoji_count: int
    predicted: Sentiment
    truth: Sentiment
    score: Optional[int]

    @property
    def correct(self) -> bool:
        return self.predicted == self.truth


@dataclass
class EvaluationReport:
    config: AggregationConfig
    translated: bool
    dataset_size: int
    matrix: ConfusionMatrix
    f1: dict
    per_group: dict
    buckets: list
    excluded_no_emoji: int
    excluded_missing_truth: int
    skipped: list = field(default_factory=list)
    rows: list = field(default_factory=list)

    @property
    def evaluated(self) -> int:
        return self.matrix.total

    @property
    def accuracy(self) -> Fraction:
        return self.matrix.accuracy()

    def macro_accuracy(self, kind: str = "country") -> Optional[Fraction]:
        """Unweighted mean of per-group accuracies."""
        groups = self.per_group[kind]
        if not groups:
            return None
        return sum((g.accuracy for g in groups.values()), Fraction(0)) / len(groups)

    def to_json(self) -> dict:
        def acc(fr):
            return fmt_fraction(fr)

        return {
            "strategy": self.config.strategy.value,
            "config": self.config.to_json(),
            "text_field": "translated_text" if self.translated else "text",
            "dataset_size": self.dataset_size,
            "evaluated": self.evaluated,
            "excluded_no_emoji": self.excluded_no_emoji,
            "excluded_missing_truth": self.excluded_missing_truth,
            "skipped_rows": [
                {"line": e.line, "id": e.row_id, "error": e.message} for e in self.skipped
            ],
            "accuracy": acc(self.accuracy) if self.evaluated else "undefined",
            "correct": self.matrix.trace,
            "macro_accuracy_country": acc(self.macro_accuracy("country")),
            "macro_accuracy_language": acc(self.macro_accuracy("language")),
            "f1": {c.value: acc(self.f1.get(c)) for c in CLASS_ORDER},
            "confusion": {
                "order": [c.value for c in CLASS_ORDER],
                "rows_truth_columns_predicted": [list(r) for r in self.matrix.counts],
            },
            "per_group": {
                kind: {
                    name: {"correct": g.correct, "total": g.total, "accuracy": acc(g.accuracy)}
                    for name, g in sorted(groups.items())
                }
                for kind, groups in sorted(self.per_group.items())
            },
            "buckets": [
                {"range": b.label, "correct": b.correct, "total": b.total, "accuracy": acc(b.accuracy)}
                for b in self.buckets
            ],
        }

    def groups_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["group_type", "group", "correct", "total", "accuracy"])
        for kind, groups in sorted(self.per_group.items()):
            for name, g in sorted(groups.items()):
                w.writerow([kind, name, g.correct, g.total, fmt_fraction(g.accuracy)])
        return buf.getvalue()

    def buckets_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["emoji_count", "correct", "total", "accuracy"])
        for b in self.buckets:
            w.writerow([b.label, b.correct, b.total, fmt_fraction(b.accuracy)])
        return buf.getvalue()

    def predictions_jsonl(self) -> str:
        return "".join(
            json.dumps(
                {
                    "id": r.id,
                    "lang": r.language,
                    "country": r.country,
                    "emoji_count": r.emoji_count,
                    "predicted": r.predicted.value,
                    "truth": r.truth.value,
                    "score": r.score,
                },
                ensure_ascii=False,
                sort_keys=True,
            )
            + "\n"
            for r in self.rows
        )


def evaluate_strategy(
    dataset: Sequence[LabeledText],
    lexicon: SentimentLexicon,
    cfg: AggregationConfig,
    *,
    translated: bool = False,
    bucket_edges: Sequence[int] = DEFAULT_BUCKET_EDGES,
    skipped: Sequence[RowError] = (),
    data: Optional[EmojiData] = None,
) -> EvaluationReport:
    """Predict every row from its emojis alone and score against its label.

    Rows without a label and rows with no resolvable emoji are excluded
    and counted.  With ``translated=True`` the translated text and its
    label are used instead of the originals.
    """
    if not dataset:
        raise ValueError("dataset is empty")
    skipped = list(skipped)
    dataset_size = len(dataset) + len(skipped)
    no_emoji = missing_truth = 0
    results: list[RowResult] = []
    for row in dataset:
        text = row.translated_text if translated else row.text
        truth = row.translated_truth if translated else row.ground_truth
        if truth is None or text is None:
            missing_truth += 1
            continue
        try:
            tokens = segment(text, data)
        except UnicodeError as exc:
            skipped.append(RowError(0, row.id, f"invalid text: {exc}"))
            continue
        seq = build_sequence(tokens, lexicon)
        outcome = aggregate(seq, cfg)
        if outcome.no_emoji:
            no_emoji += 1
            continue
        results.append(
            RowResult(row.id, row.language, row.country, len(tokens), outcome.label, truth, outcome.score)
        )

    matrix = confusion([r.predicted for r in results], [r.truth for r in results])
    f1 = f1_per_class(matrix) if matrix.total else {c: None for c in CLASS_ORDER}
    per_group: dict[str, dict[str, GroupStat]] = {}
    for kind, attr in (("language", "language"), ("country", "country")):
        tally: dict[str, list[int]] = defaultdict(lambda: [0, 0])
        for r in results:
            t = tally[getattr(r, attr)]
            t[0] += r.correct
            t[1] += 1
        per_group[kind] = {k: GroupStat(c, n) for k, (c, n) in tally.items()}
    buckets = bucket_by_emoji_count(((r.emoji_count, r.correct) for r in results), bucket_edges)
    return EvaluationReport(
        config=cfg,
        translated=translated,
        dataset_size=dataset_size,
        matrix=matrix,
        f1=f1,
        per_group=per_group,
        buckets=buckets,
        excluded_no_emoji=no_emoji,
        excluded_missing_truth=missing_truth,
        skipped=skipped,
        rows=results,
    )


def write_report(report: EvaluationReport, out_dir) -> list[Path]:
    out = Path(out_dir)
    files = {
        "report.json": json.dumps(report.to_json(), ensure_ascii=False, indent=2, sort_keys=True) + "\n",
        "confusion.csv": report.matrix.to_csv(),
        "groups.csv": report.groups_csv(),
        "buckets.csv": report.buckets_csv(),
        "predictions.jsonl": report.predictions_jsonl(),
    }
    paths = []
    for name, text in files.items():
        atomic_write_text(out / name, text)
        paths.append(out / name)
    return paths
