"""Emoji sequence segmentation.

Recognition is driven by the vendored ``emoji-test.txt`` snapshot
(Unicode Emoji 15.1) rather than by whatever tables the running Python
ships with, so results are identical on every machine.

A text is scanned left to right.  At each position the longest known
emoji sequence is matched against a trie of variation-selector-free keys;
variation selectors in the text are consumed but never required, so
``U+2764`` and ``U+2764 U+FE0F`` are the same emoji.  Regional indicators
are paired strictly left to right.  Marks and stray skin-tone modifiers
that trail a match belong to the same grapheme cluster and are absorbed
without producing a token of their own.
"""
from __future__ import annotations

import unicodedata
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence, Union

EMOJI_DATA_VERSION = "15.1"

VS15 = 0xFE0E
VS16 = 0xFE0F
ZWJ = 0x200D
VARIATION_SELECTORS = frozenset({VS15, VS16})
SKIN_TONES = frozenset(range(0x1F3FB, 0x1F400))
RI_FIRST, RI_LAST = 0x1F1E6, 0x1F1FF

NormalizedKey = tuple[int, ...]


@dataclass(frozen=True)
class EmojiToken:
    """One emoji occurrence in a text."""

    codepoints: tuple[int, ...]
    byte_offset: int
    ordinal: int

    @property
    def text(self) -> str:
        return "".join(map(chr, self.codepoints))

    @property
    def hex(self) -> str:
        return key_to_hex(self.codepoints)


@dataclass(frozen=True)
class TestSequence:
    """A line from ``emoji-test.txt``."""

    codepoints: tuple[int, ...]
    status: str
    name: str
    group: str
    subgroup: str


def key_to_hex(codepoints: Iterable[int]) -> str:
    return " ".join(f"{cp:04X}" for cp in codepoints)


def key_from_hex(text: str) -> tuple[int, ...]:
    parts = text.replace("-", " ").replace("_", " ").split()
    if not parts:
        raise ValueError("empty codepoint list")
    cps = tuple(int(p, 16) for p in parts)
    for cp in cps:
        if not 0 <= cp <= 0x10FFFF or 0xD800 <= cp <= 0xDFFF:
            raise ValueError(f"not a Unicode scalar value: {cp:X}")
    return cps


def _as_codepoints(candidate: Union[str, Sequence[int], EmojiToken]) -> tuple[int, ...]:
    if isinstance(candidate, EmojiToken):
        return candidate.codepoints
    if isinstance(candidate, str):
        return tuple(map(ord, candidate))
    return tuple(candidate)


def normalize(token: Union[str, Sequence[int], EmojiToken]) -> NormalizedKey:
    """Strip variation selectors, keeping every other codepoint in order."""
    return tuple(cp for cp in _as_codepoints(token) if cp not in VARIATION_SELECTORS)


def parse_emoji_test(lines: Iterable[str]) -> list[TestSequence]:
    """Parse the published ``emoji-test.txt`` format.

    Data lines look like
    ``1F600 ; fully-qualified # 😀 E1.0 grinning face``; ``# group:`` and
    ``# subgroup:`` comment lines set the context for following entries.
    """
    out: list[TestSequence] = []
    group = subgroup = ""
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("group:"):
                group = body[len("group:"):].strip()
            elif body.startswith("subgroup:"):
                subgroup = body[len("subgroup:"):].strip()
            continue
        data, _, comment = line.partition("#")
        cps_text, sep, status = data.partition(";")
        if not sep:
            raise ValueError(f"line {lineno}: missing ';' separator")
        try:
            cps = key_from_hex(cps_text)
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
        # comment is "<glyph> E<version> <name>"
        name = comment.strip()
        bits = name.split(" ", 2)
        if len(bits) == 3 and bits[1].startswith("E"):
            name = bits[2]
        out.append(TestSequence(cps, status.strip(), name, group, subgroup))
    return out


class EmojiData:
    """Lookup tables derived from one ``emoji-test.txt`` snapshot."""

    def __init__(self, sequences: Sequence[TestSequence]):
        self.sequences = tuple(sequences)
        self.keys: frozenset[NormalizedKey] = frozenset(
            normalize(s.codepoints) for s in self.sequences
        )
        self._trie: dict = {}
        for key in self.keys:
            node = self._trie
            for cp in key:
                node = node.setdefault(cp, {})
            node[None] = True

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "EmojiData":
        with open(path, encoding="utf-8") as f:
            return cls(parse_emoji_test(f))

    def fully_qualified(self) -> list[TestSequence]:
        return [s for s in self.sequences if s.status == "fully-qualified"]

    def is_emoji(self, candidate: Union[str, Sequence[int], EmojiToken]) -> bool:
        return normalize(candidate) in self.keys

    def _longest_match(self, cps: Sequence[int], start: int) -> int:
        """End index (exclusive) of the longest known sequence at ``start``, or -1."""
        node = self._trie
        best = -1
        i = start
        n = len(cps)
        while i < n:
            cp = cps[i]
            if cp in VARIATION_SELECTORS and i > start:
                i += 1
                if None in node:
                    best = i
                continue
            node = node.get(cp)
            if node is None:
                break
            i += 1
            if None in node:
                best = i
        return best

    def segment(self, text: Union[str, bytes]) -> list[EmojiToken]:
        """Return the emoji tokens of ``text`` in order of appearance.

        Raises:
            UnicodeError: ``text`` is not valid UTF-8 (undecodable bytes or
                lone surrogates).
        """
        if isinstance(text, (bytes, bytearray)):
            text = bytes(text).decode("utf-8")
        else:
            text.encode("utf-8")
        cps = [ord(c) for c in text]
        n = len(cps)
        tokens: list[EmojiToken] = []
        byte_pos = 0
        i = 0

        def advance(j: int) -> None:
            nonlocal byte_pos, i
            byte_pos += sum(_utf8_len(cp) for cp in cps[i:j])
            i = j

        while i < n:
            cp = cps[i]
            if RI_FIRST <= cp <= RI_LAST:
                if i + 1 < n and RI_FIRST <= cps[i + 1] <= RI_LAST:
                    pair = (cp, cps[i + 1])
                    if pair in self.keys:
                        tokens.append(EmojiToken(pair, byte_pos, len(tokens)))
                    advance(i + 2)
                else:
                    advance(i + 1)
                continue
            end = self._longest_match(cps, i)
            if end < 0:
                advance(i + 1)
                continue
            tokens.append(EmojiToken(tuple(cps[i:end]), byte_pos, len(tokens)))
            advance(end)
            j = i
            while j < n and _extends_cluster(cps[j]):
                j += 1
            advance(j)
        return tokens


def _utf8_len(cp: int) -> int:
    if cp < 0x80:
        return 1
    if cp < 0x800:
        return 2
    if cp < 0x10000:
        return 3
    return 4


def _extends_cluster(cp: int) -> bool:
    # Grapheme-extend material after a complete match: it cannot start an
    # emoji of its own and carries no sentiment.
    if cp in VARIATION_SELECTORS or cp in SKIN_TONES:
        return True
    if 0xE0020 <= cp <= 0xE007F:
        return True
    return unicodedata.category(chr(cp)) in ("Mn", "Me")


@lru_cache(maxsize=1)
def default_data() -> EmojiData:
    """The bundled snapshot, loaded once and shared read-only."""
    ref = resources.files("emojisent") / "data" / "emoji-test.txt"
    with ref.open(encoding="utf-8") as f:
        return EmojiData(parse_emoji_test(f))


def segment(text: Union[str, bytes], data: EmojiData | None = None) -> list[EmojiToken]:
    return (data or default_data()).segment(text)


def is_emoji(candidate: Union[str, Sequence[int], EmojiToken], data: EmojiData | None = None) -> bool:
    return (data or default_data()).is_emoji(candidate)


def format_tokens(tokens: Iterable[EmojiToken]) -> str:
    """One ``<ordinal>\\t<hex codepoints>\\t<byte_offset>`` line per token."""
    return "".join(f"{t.ordinal}\t{t.hex}\t{t.byte_offset}\n" for t in tokens)
