"""Infer the sentiment of multilingual text from the emojis it contains."""
from .aggregation import (
    AggregationConfig,
    AggregationOutcome,
    SentimentSequence,
    Strategy,
    aggregate,
    analyze_text,
    build_sequence,
)
from .lexicon import EmojiEntry, Sentiment, SentimentLexicon, import_esr, load_lexicon, lookup, write_lexicon
from .segmenter import EmojiToken, is_emoji, normalize, segment

__version__ = "0.1.0"

__all__ = [
    "AggregationConfig",
    "AggregationOutcome",
    "EmojiEntry",
    "EmojiToken",
    "Sentiment",
    "SentimentLexicon",
    "SentimentSequence",
    "Strategy",
    "aggregate",
    "analyze_text",
    "build_sequence",
    "import_esr",
    "is_emoji",
    "load_lexicon",
    "lookup",
    "normalize",
    "segment",
    "write_lexicon",
]
