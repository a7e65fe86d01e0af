"""Aggregate per-emoji sentiments into one label for a text.

Every rule here is integer arithmetic: weights and the threshold are ints
so the "equal to threshold means neutral" case is exact.
"""
from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

from .lexicon import Sentiment, SentimentLexicon, lookup
from .segmenter import EmojiData, EmojiToken, NormalizedKey, normalize, segment

POS, NEU, NEG = Sentiment.POSITIVE, Sentiment.NEUTRAL, Sentiment.NEGATIVE


class Strategy(str, enum.Enum):
    BSA = "bsa"
    DPM = "dpm"
    MAJORITY = "majority"
    FIRST = "first"
    CONSEC = "consec"
    REPEAT = "repeat"
    LAST = "last"
    ALL = "all"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class AggregationConfig:
    w_pos: int = 1
    w_neu: int = 0
    w_neg: int = -1
    theta: int = 0
    strategy: Strategy = Strategy.BSA
    qualify_min: int = 2

    def __post_init__(self) -> None:
        for name in ("w_pos", "w_neu", "w_neg", "theta", "qualify_min"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool):
                raise TypeError(f"{name} must be an int, got {value!r}")
        if not self.w_pos > self.w_neu > self.w_neg:
            raise ValueError(
                f"weights must satisfy w_pos > w_neu > w_neg, got "
                f"({self.w_pos}, {self.w_neu}, {self.w_neg})"
            )
        if self.qualify_min < 1:
            raise ValueError("qualify_min must be >= 1")
        object.__setattr__(self, "strategy", Strategy(self.strategy))

    def weight(self, sentiment: Sentiment) -> int:
        if sentiment is POS:
            return self.w_pos
        if sentiment is NEU:
            return self.w_neu
        return self.w_neg

    @classmethod
    def for_strategy(cls, strategy: Strategy | str, **overrides) -> "AggregationConfig":
        """Default config for ``strategy``: DPM weights for DPM, BSA weights otherwise."""
        strategy = Strategy(strategy)
        base = DPM_CONFIG if strategy is Strategy.DPM else BSA_CONFIG
        return replace(base, strategy=strategy, **overrides)

    def to_json(self) -> dict:
        return {
            "strategy": self.strategy.value,
            "w_pos": self.w_pos,
            "w_neu": self.w_neu,
            "w_neg": self.w_neg,
            "theta": self.theta,
            "qualify_min": self.qualify_min,
        }


BSA_CONFIG = AggregationConfig(1, 0, -1, 0, Strategy.BSA)
DPM_CONFIG = AggregationConfig(2, 1, -2, 0, Strategy.DPM)


@dataclass(frozen=True)
class SentimentSequence:
    tokens: tuple[tuple[NormalizedKey, Sentiment], ...] = ()
    unknown_count: int = 0

    @classmethod
    def of(cls, labels: Iterable[Sentiment], keys: Optional[Iterable[NormalizedKey]] = None) -> "SentimentSequence":
        """Build a sequence from labels; without ``keys`` every emoji is distinct."""
        labels = list(labels)
        if keys is None:
            keys = [(i,) for i in range(len(labels))]
        return cls(tuple(zip(keys, labels, strict=True)))

    @property
    def sentiments(self) -> list[Sentiment]:
        return [s for _, s in self.tokens]

    def __len__(self) -> int:
        return len(self.tokens)


def build_sequence(tokens: Iterable[EmojiToken], lexicon: SentimentLexicon) -> SentimentSequence:
    """Look every token up; tokens the lexicon cannot resolve are dropped and counted."""
    out = []
    unknown = 0
    for token in tokens:
        sentiment = lookup(lexicon, token)
        if sentiment is None:
            unknown += 1
        else:
            out.append((normalize(token), sentiment))
    return SentimentSequence(tuple(out), unknown)


@dataclass(frozen=True)
class AggregationOutcome:
    """``label`` is ``None`` for the no-emoji outcome; ``score`` is ``None`` for majority vote."""

    label: Optional[Sentiment]
    score: Optional[int]
    strategy: Strategy

    @property
    def no_emoji(self) -> bool:
        return self.label is None

    def to_json(self) -> dict:
        return {
            "strategy": self.strategy.value,
            "score": self.score,
            "label": self.label.value if self.label is not None else "no_emoji",
        }


@dataclass(frozen=True)
class RunEncoding:
    runs: tuple[tuple[NormalizedKey, Sentiment, int], ...] = ()


@dataclass(frozen=True)
class FrequencyTable:
    freqs: dict = field(default_factory=dict)


def weighted_sum(seq: SentimentSequence, cfg: AggregationConfig = BSA_CONFIG) -> int:
    return sum(cfg.weight(s) for _, s in seq.tokens)


def classify_score(score: int, theta: int = 0) -> Sentiment:
    if score > theta:
        return POS
    if score == theta:
        return NEU
    return NEG


def _outcome(seq: SentimentSequence, score: int, cfg: AggregationConfig, strategy: Strategy) -> AggregationOutcome:
    if not seq.tokens:
        return AggregationOutcome(None, None, strategy)
    return AggregationOutcome(classify_score(score, cfg.theta), score, strategy)


def bsa(seq: SentimentSequence) -> AggregationOutcome:
    return _outcome(seq, weighted_sum(seq, BSA_CONFIG), BSA_CONFIG, Strategy.BSA)


def dpm(seq: SentimentSequence) -> AggregationOutcome:
    return _outcome(seq, weighted_sum(seq, DPM_CONFIG), DPM_CONFIG, Strategy.DPM)


def majority_vote(seq: SentimentSequence) -> AggregationOutcome:
    """Strict plurality of emoji counts.

    Without a strict winner the BSA score decides; a zero BSA score is
    neutral.
    """
    if not seq.tokens:
        return AggregationOutcome(None, None, Strategy.MAJORITY)
    counts = Counter(seq.sentiments)
    c_pos, c_neu, c_neg = counts[POS], counts[NEU], counts[NEG]
    if c_pos > max(c_neu, c_neg):
        label = POS
    elif c_neu > max(c_pos, c_neg):
        label = NEU
    elif c_neg > max(c_pos, c_neu):
        label = NEG
    else:
        label = classify_score(weighted_sum(seq, BSA_CONFIG), 0)
    return AggregationOutcome(label, None, Strategy.MAJORITY)


def _weighted(seq: SentimentSequence, cfg: AggregationConfig, strategy: Strategy) -> AggregationOutcome:
    return _outcome(seq, weighted_sum(seq, cfg), cfg, strategy)


def first_score(seq: SentimentSequence, cfg: AggregationConfig = BSA_CONFIG) -> int:
    return cfg.weight(seq.tokens[0][1]) if seq.tokens else 0


def last_score(seq: SentimentSequence, cfg: AggregationConfig = BSA_CONFIG) -> int:
    return cfg.weight(seq.tokens[-1][1]) if seq.tokens else 0


def first(seq: SentimentSequence, cfg: AggregationConfig = BSA_CONFIG) -> AggregationOutcome:
    return _outcome(seq, first_score(seq, cfg), cfg, Strategy.FIRST)


def last(seq: SentimentSequence, cfg: AggregationConfig = BSA_CONFIG) -> AggregationOutcome:
    return _outcome(seq, last_score(seq, cfg), cfg, Strategy.LAST)


def run_length_encode(seq: SentimentSequence) -> RunEncoding:
    runs: list[list] = []
    for key, sentiment in seq.tokens:
        if runs and runs[-1][0] == key:
            runs[-1][2] += 1
        else:
            runs.append([key, sentiment, 1])
    return RunEncoding(tuple((k, s, n) for k, s, n in runs))


def frequency_table(seq: SentimentSequence) -> FrequencyTable:
    freqs: dict[NormalizedKey, tuple[Sentiment, int]] = {}
    for key, sentiment in seq.tokens:
        prev = freqs.get(key)
        freqs[key] = (sentiment, prev[1] + 1 if prev else 1)
    return FrequencyTable(freqs)


def consecutive_score(seq: SentimentSequence, cfg: AggregationConfig = BSA_CONFIG) -> int:
    qualifying = [(s, n) for _, s, n in run_length_encode(seq).runs if n >= cfg.qualify_min]
    if not qualifying:
        return weighted_sum(seq, cfg)
    return sum(cfg.weight(s) * n for s, n in qualifying)


def repeated_score(seq: SentimentSequence, cfg: AggregationConfig = BSA_CONFIG) -> int:
    qualifying = [(s, n) for s, n in frequency_table(seq).freqs.values() if n >= cfg.qualify_min]
    if not qualifying:
        return weighted_sum(seq, cfg)
    return sum(cfg.weight(s) * n for s, n in qualifying)


def consecutive(seq: SentimentSequence, cfg: AggregationConfig = BSA_CONFIG) -> AggregationOutcome:
    return _outcome(seq, consecutive_score(seq, cfg), cfg, Strategy.CONSEC)


def repeated(seq: SentimentSequence, cfg: AggregationConfig = BSA_CONFIG) -> AggregationOutcome:
    return _outcome(seq, repeated_score(seq, cfg), cfg, Strategy.REPEAT)


def aggregate_all(seq: SentimentSequence, cfg: AggregationConfig = BSA_CONFIG) -> AggregationOutcome:
    score = (
        first_score(seq, cfg)
        + consecutive_score(seq, cfg)
        + repeated_score(seq, cfg)
        + last_score(seq, cfg)
    )
    return _outcome(seq, score, cfg, Strategy.ALL)


def aggregate(seq: SentimentSequence, cfg: AggregationConfig) -> AggregationOutcome:
    """Apply ``cfg.strategy`` with ``cfg``'s weights and threshold.

    Majority vote ignores the weights apart from its BSA tie-break.
    """
    strategy = cfg.strategy
    if strategy is Strategy.MAJORITY:
        return majority_vote(seq)
    if strategy in (Strategy.BSA, Strategy.DPM):
        return _weighted(seq, cfg, strategy)
    return {
        Strategy.FIRST: first,
        Strategy.CONSEC: consecutive,
        Strategy.REPEAT: repeated,
        Strategy.LAST: last,
        Strategy.ALL: aggregate_all,
    }[strategy](seq, cfg)


def analyze_text(
    text: str, lexicon: SentimentLexicon, cfg: AggregationConfig, data: Optional[EmojiData] = None
) -> tuple[AggregationOutcome, SentimentSequence]:
    seq = build_sequence(segment(text, data), lexicon)
    return aggregate(seq, cfg), seq

