"""Emoji sentiment lexicons and the multi-representation emoji dataset."""
from __future__ import annotations

import csv
import enum
import json
import os
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Optional, Sequence, Union

from .segmenter import (
    SKIN_TONES,
    ZWJ,
    EmojiToken,
    NormalizedKey,
    key_from_hex,
    key_to_hex,
    normalize,
    parse_emoji_test,
)
from .util import atomic_write_text

PathLike = Union[str, "os.PathLike[str]"]


class Sentiment(str, enum.Enum):
    POSITIVE = "positive"
    NEUTRAL = "neutral"
    NEGATIVE = "negative"

    @classmethod
    def parse(cls, word: str) -> "Sentiment":
        try:
            return cls(word.strip().lower())
        except ValueError:
            raise ValueError(f"unknown sentiment word: {word!r}") from None

    def __str__(self) -> str:
        return self.value


# Row/column order used by every matrix and report.
CLASS_ORDER = (Sentiment.POSITIVE, Sentiment.NEUTRAL, Sentiment.NEGATIVE)


class LexiconError(ValueError):
    """A lexicon or data file could not be loaded."""

    def __init__(self, message: str, path: Optional[PathLike] = None, line: Optional[int] = None):
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)
        self.path = path
        self.line = line


@dataclass(frozen=True)
class LexiconValue:
    sentiment: Sentiment
    source: str


@dataclass(frozen=True)
class SentimentLexicon:
    """Immutable map from normalized emoji key to sentiment.

    ``entries`` is wrapped in a read-only mapping on construction; keys
    are normalized and unique by construction.
    """

    entries: Mapping[NormalizedKey, LexiconValue]
    source: str = ""
    created: str = ""

    def __post_init__(self) -> None:
        fixed = {}
        for key, value in self.entries.items():
            nk = normalize(key)
            if nk != tuple(key):
                raise LexiconError(f"key {key_to_hex(key)} is not normalized")
            if not isinstance(value.sentiment, Sentiment):
                raise LexiconError(f"invalid sentiment for {key_to_hex(key)}: {value.sentiment!r}")
            fixed[nk] = value
        object.__setattr__(self, "entries", MappingProxyType(fixed))

    @classmethod
    def from_labels(
        cls,
        labels: Mapping[NormalizedKey, Sentiment],
        source_tag: str = "",
        source: str = "",
        created: str = "",
    ) -> "SentimentLexicon":
        return cls({k: LexiconValue(v, source_tag) for k, v in labels.items()}, source, created)

    @property
    def entry_count(self) -> int:
        return len(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, key: object) -> bool:
        return key in self.entries

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SentimentLexicon):
            return NotImplemented
        return (
            dict(self.entries) == dict(other.entries)
            and self.source == other.source
            and self.created == other.created
        )

    def __hash__(self) -> int:
        return hash((frozenset(self.entries.items()), self.source, self.created))

    def labels(self) -> dict[NormalizedKey, Sentiment]:
        return {k: v.sentiment for k, v in self.entries.items()}

    def with_entry(self, key: NormalizedKey, sentiment: Sentiment, source_tag: str = "") -> "SentimentLexicon":
        entries = dict(self.entries)
        entries[normalize(key)] = LexiconValue(sentiment, source_tag)
        return SentimentLexicon(entries, self.source, self.created)


def _strip_skin_tones(key: Sequence[int]) -> NormalizedKey:
    return tuple(cp for cp in key if cp not in SKIN_TONES)


def lookup_with_stage(
    lexicon: SentimentLexicon, token: Union[EmojiToken, str, Sequence[int]]
) -> tuple[Optional[Sentiment], Optional[int]]:
    """Like :func:`lookup` but also report the 0-based fallback stage that resolved."""
    exact = normalize(token)
    toneless = _strip_skin_tones(exact)
    first = toneless[: toneless.index(ZWJ)] if ZWJ in toneless else toneless
    for stage, k in enumerate((exact, toneless, first)):
        value = lexicon.entries.get(k)
        if value is not None:
            return value.sentiment, stage
    return None, None


def lookup(lexicon: SentimentLexicon, token: Union[EmojiToken, str, Sequence[int]]) -> Optional[Sentiment]:
    """Sentiment of ``token``, or ``None`` when no fallback stage matches."""
    return lookup_with_stage(lexicon, token)[0]


# -- lexicon file format -----------------------------------------------------
#
#   # source: <free text>
#   # created: <ISO timestamp>
#   1F602<TAB>😂<TAB>positive<TAB>esr-v1.0


def format_lexicon(lexicon: SentimentLexicon) -> str:
    lines = []
    if any(c in lexicon.source + lexicon.created for c in "\r\n"):
        raise ValueError("lexicon metadata must be single-line")
    if lexicon.source:
        lines.append(f"# source: {lexicon.source}")
    if lexicon.created:
        lines.append(f"# created: {lexicon.created}")
    for key in sorted(lexicon.entries):
        value = lexicon.entries[key]
        icon = "".join(map(chr, key))
        lines.append(f"{key_to_hex(key)}\t{icon}\t{value.sentiment.value}\t{value.source}")
    return "".join(line + "\n" for line in lines)


def write_lexicon(lexicon: SentimentLexicon, path: PathLike) -> None:
    atomic_write_text(path, format_lexicon(lexicon))


def parse_lexicon(lines: Iterable[str], path: Optional[PathLike] = None) -> SentimentLexicon:
    entries: dict[NormalizedKey, LexiconValue] = {}
    meta: dict[str, str] = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            continue
        if line.startswith("#"):
            name, sep, value = line[1:].partition(":")
            if sep:
                meta[name.strip()] = value.strip()
            continue
        fields = line.split("\t")
        if len(fields) != 4:
            raise LexiconError(f"expected 4 tab-separated fields, got {len(fields)}", path, lineno)
        hex_key, icon, word, tag = fields
        try:
            key = key_from_hex(hex_key)
        except ValueError as exc:
            raise LexiconError(f"bad codepoints {hex_key!r}: {exc}", path, lineno) from None
        if normalize(key) != key:
            raise LexiconError(f"key {hex_key} contains a variation selector", path, lineno)
        if normalize(icon) != key:
            raise LexiconError(f"icon {icon!r} does not match key {hex_key}", path, lineno)
        try:
            sentiment = Sentiment.parse(word)
        except ValueError as exc:
            raise LexiconError(str(exc), path, lineno) from None
        if key in entries:
            raise LexiconError(f"duplicate key {key_to_hex(key)}", path, lineno)
        entries[key] = LexiconValue(sentiment, tag)
    return SentimentLexicon(entries, meta.get("source", ""), meta.get("created", ""))


def load_lexicon(path: PathLike) -> SentimentLexicon:
    """Load a lexicon file.

    Raises:
        FileNotFoundError: ``path`` does not exist.
        LexiconError: malformed line, duplicate key or unknown sentiment
            word; the message carries the line number.
    """
    with open(path, encoding="utf-8") as f:
        return parse_lexicon(f, path)


# -- Emoji Sentiment Ranking v1.0 --------------------------------------------

ESR_MIN_OCCURRENCES = 5
ESR_COLUMNS = {
    "emoji": "Emoji",
    "occurrences": "Occurrences",
    "negative": "Negative",
    "neutral": "Neutral",
    "positive": "Positive",
}


@dataclass(frozen=True)
class EsrRecord:
    key: NormalizedKey
    occurrences: int
    score_negative: Fraction
    score_neutral: Fraction
    score_positive: Fraction

    def label(self) -> Sentiment:
        """Argmax over the three scores; any tie at the maximum is neutral."""
        scores = {
            Sentiment.NEGATIVE: self.score_negative,
            Sentiment.NEUTRAL: self.score_neutral,
            Sentiment.POSITIVE: self.score_positive,
        }
        top = max(scores.values())
        winners = [s for s, v in scores.items() if v == top]
        return winners[0] if len(winners) == 1 else Sentiment.NEUTRAL


def bundled_esr_path() -> Path:
    return Path(str(resources.files("emojisent") / "data" / "Emoji_Sentiment_Data_v1.0.csv"))


def _score(text: str, occurrences: Optional[int], scores: str) -> Fraction:
    if scores == "counts":
        count = int(text)
        if not occurrences:
            raise ValueError("occurrences must be positive when scores are counts")
        value = Fraction(count, occurrences)
    else:
        value = Fraction(text.strip())
    if not 0 <= value <= 1:
        raise ValueError(f"score {float(value):.4f} outside [0, 1]")
    return value


def read_esr(
    path: PathLike,
    *,
    min_occurrences: int = ESR_MIN_OCCURRENCES,
    scores: str = "counts",
    columns: Optional[Mapping[str, str]] = None,
) -> list[EsrRecord]:
    """Read the ESR v1.0 character table.

    The published CSV stores per-class occurrence counts; with
    ``scores="counts"`` they are divided by the ``Occurrences`` column to
    give fractions.  Use ``scores="fractions"`` for a table that already
    holds values in [0, 1].  Rows under ``min_occurrences`` are dropped;
    the default of 5 gives the 751-emoji ranking.
    """
    if scores not in ("counts", "fractions"):
        raise ValueError(f"scores must be 'counts' or 'fractions', not {scores!r}")
    cols = dict(ESR_COLUMNS)
    cols.update(columns or {})
    records: list[EsrRecord] = []
    seen: set[NormalizedKey] = set()
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        missing = [c for c in cols.values() if c not in (reader.fieldnames or [])]
        if missing:
            raise LexiconError(f"missing columns: {', '.join(missing)}", path, 1)
        for lineno, row in enumerate(reader, 2):
            try:
                key = normalize(row[cols["emoji"]])
                if not key:
                    raise ValueError("empty emoji field")
                occ = int(row[cols["occurrences"]])
                if occ < 0:
                    raise ValueError("negative occurrence count")
                if occ < min_occurrences:
                    continue
                rec = EsrRecord(
                    key,
                    occ,
                    _score(row[cols["negative"]], occ, scores),
                    _score(row[cols["neutral"]], occ, scores),
                    _score(row[cols["positive"]], occ, scores),
                )
            except (TypeError, ValueError, ZeroDivisionError) as exc:
                raise LexiconError(f"malformed row: {exc}", path, lineno) from None
            if key in seen:
                raise LexiconError(f"duplicate key {key_to_hex(key)}", path, lineno)
            seen.add(key)
            records.append(rec)
    return records


def import_esr(
    path: Optional[PathLike] = None,
    *,
    min_occurrences: int = ESR_MIN_OCCURRENCES,
    scores: str = "counts",
    columns: Optional[Mapping[str, str]] = None,
) -> SentimentLexicon:
    """Lexicon labelling each ESR emoji with its predominant category."""
    path = path or bundled_esr_path()
    records = read_esr(path, min_occurrences=min_occurrences, scores=scores, columns=columns)
    return SentimentLexicon(
        {r.key: LexiconValue(r.label(), "esr-v1.0") for r in records},
        source=f"Emoji Sentiment Ranking v1.0 ({Path(path).name}, occurrences >= {min_occurrences})",
    )


def matched_population(reference: SentimentLexicon, keys: Iterable[NormalizedKey]) -> set[NormalizedKey]:
    """Reference keys that also appear in ``keys`` (the comparison population)."""
    wanted = {normalize(k) for k in keys}
    return {k for k in reference.entries if k in wanted}


# -- representation dataset --------------------------------------------------


@dataclass(frozen=True)
class EmojiEntry:
    key: NormalizedKey
    icon: str
    title: str
    description: str = ""
    pixel_ref: Optional[str] = None

    def __post_init__(self) -> None:
        if normalize(self.key) != tuple(self.key):
            raise ValueError(f"entry key {key_to_hex(self.key)} is not normalized")
        if normalize(self.icon) != tuple(self.key):
            raise ValueError(f"icon {self.icon!r} does not match key {key_to_hex(self.key)}")

    def to_json(self) -> dict:
        return {
            "key": key_to_hex(self.key),
            "icon": self.icon,
            "title": self.title,
            "description": self.description,
            "pixel_ref": self.pixel_ref,
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "EmojiEntry":
        return cls(
            key=key_from_hex(obj["key"]),
            icon=obj["icon"],
            title=obj.get("title", ""),
            description=obj.get("description") or "",
            pixel_ref=obj.get("pixel_ref") or None,
        )


@dataclass
class CompletenessSummary:
    total: int = 0
    with_title: int = 0
    with_description: int = 0
    with_pixel: int = 0
    missing_description: list[str] = field(default_factory=list)
    missing_pixel: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {
                "total": self.total,
                "with_title": self.with_title,
                "with_description": self.with_description,
                "with_pixel": self.with_pixel,
                "without_description": self.total - self.with_description,
                "without_pixel": self.total - self.with_pixel,
                "missing_description": self.missing_description,
                "missing_pixel": self.missing_pixel,
            },
            ensure_ascii=False,
            indent=2,
        ) + "\n"


_STATUS_RANK = {"fully-qualified": 0, "component": 1, "minimally-qualified": 2, "unqualified": 3}


def read_descriptions(path: PathLike) -> dict[NormalizedKey, str]:
    """``<hex codepoints>\\t<description>`` per line; ``#`` lines are comments."""
    out: dict[NormalizedKey, str] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            hex_key, sep, text = line.partition("\t")
            if not sep:
                raise LexiconError("expected <codepoints>\\t<description>", path, lineno)
            try:
                key = normalize(key_from_hex(hex_key))
            except ValueError as exc:
                raise LexiconError(str(exc), path, lineno) from None
            out[key] = text.strip()
    return out


def _index_pixels(pixels_dir: PathLike) -> dict[NormalizedKey, Path]:
    out: dict[NormalizedKey, Path] = {}
    for p in sorted(Path(pixels_dir).iterdir()):
        if not p.is_file():
            continue
        try:
            key = normalize(key_from_hex(p.stem))
        except ValueError:
            continue
        out.setdefault(key, p)
    return out


def _check_image(path: Path) -> None:
    from PIL import Image

    try:
        with Image.open(path) as im:
            im.verify()
    except Exception as exc:
        raise LexiconError(f"undecodable pixel image: {exc}", path) from None


def build_representation_dataset(
    unicode_path: PathLike,
    descriptions_path: Optional[PathLike] = None,
    pixels_dir: Optional[PathLike] = None,
) -> tuple[list[EmojiEntry], CompletenessSummary]:
    """Join Unicode names, descriptions and pixel renders into one entry per emoji.

    ``unicode_path`` is in ``emoji-test.txt`` format.  Pixel files are
    looked up by hex-codepoint stem (``1f602.png``, ``1F468-200D-1F4BB.png``).
    """
    with open(unicode_path, encoding="utf-8") as f:
        try:
            sequences = parse_emoji_test(f)
        except ValueError as exc:
            raise LexiconError(str(exc), unicode_path) from None
    best: dict[NormalizedKey, tuple[int, int]] = {}
    for idx, seq in enumerate(sequences):
        key = normalize(seq.codepoints)
        rank = _STATUS_RANK.get(seq.status, 9)
        if key not in best or rank < best[key][0]:
            best[key] = (rank, idx)
    descriptions = read_descriptions(descriptions_path) if descriptions_path else {}
    pixels = _index_pixels(pixels_dir) if pixels_dir else {}

    entries: list[EmojiEntry] = []
    summary = CompletenessSummary()
    for key, (_, idx) in sorted(best.items(), key=lambda kv: kv[1][1]):
        seq = sequences[idx]
        pixel = pixels.get(key)
        if pixel is not None:
            _check_image(pixel)
        entry = EmojiEntry(
            key=key,
            icon="".join(map(chr, seq.codepoints)),
            title=seq.name,
            description=descriptions.get(key, ""),
            pixel_ref=str(pixel) if pixel is not None else None,
        )
        entries.append(entry)
        summary.total += 1
        summary.with_title += bool(entry.title)
        if entry.description:
            summary.with_description += 1
        else:
            summary.missing_description.append(key_to_hex(key))
        if entry.pixel_ref:
            summary.with_pixel += 1
        else:
            summary.missing_pixel.append(key_to_hex(key))
    return entries, summary


def write_entries(entries: Iterable[EmojiEntry], path: PathLike) -> None:
    atomic_write_text(
        path, "".join(json.dumps(e.to_json(), ensure_ascii=False) + "\n" for e in entries)
    )


def read_entries(path: PathLike) -> list[EmojiEntry]:
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                out.append(EmojiEntry.from_json(json.loads(line)))
            except (KeyError, ValueError) as exc:
                raise LexiconError(f"bad entry: {exc}", path, lineno) from None
    return out

