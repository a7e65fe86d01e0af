"""LLM-backed sentiment labelling for emojis and tweets.

A :class:`Transport` sends one prompt and returns the raw reply text.  Two
implementations ship: :class:`ChatCompletionsTransport` talks to a
chat-completions style HTTP endpoint, :class:`MockTransport` replays
scripted replies so everything runs offline.  Replies that parse are
stored in an append-only :class:`AnnotationCache`; a warm cache means no
requests at all.
"""
from __future__ import annotations

import base64
import enum
import hashlib
import itertools
import json
import logging
import os
import string
import threading
import time
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Mapping, Optional, Sequence

from .lexicon import EmojiEntry, LexiconValue, Sentiment, SentimentLexicon
from .segmenter import NormalizedKey, key_from_hex, key_to_hex

log = logging.getLogger(__name__)

DEFAULT_MODEL = "gpt-4o"
DEFAULT_ENDPOINT = "https://api.openai.com/v1/chat/completions"
DEFAULT_API_KEY_ENV = "OPENAI_API_KEY"


class Representation(str, enum.Enum):
    ICON = "icon"
    TITLE = "title"
    DESCRIPTION = "description"
    PIXEL = "pixel"


_DISPLAY = {
    Representation.ICON: "Icon",
    Representation.TITLE: "Title",
    Representation.DESCRIPTION: "Description",
    Representation.PIXEL: "Pixel",
}


@dataclass(frozen=True)
class RepresentationCombo:
    members: frozenset

    def __post_init__(self) -> None:
        members = frozenset(Representation(m) for m in self.members)
        if not members:
            raise ValueError("a representation combo needs at least one member")
        object.__setattr__(self, "members", members)

    @classmethod
    def of(cls, *members: Representation | str) -> "RepresentationCombo":
        return cls(frozenset(members))

    @classmethod
    def parse(cls, text: str) -> "RepresentationCombo":
        """``"pixel+icon+description"`` or Table-1 style ``"Pixel & Icon & Description"``."""
        parts = [p.strip().lower() for p in text.replace("&", "+").replace(",", "+").split("+")]
        try:
            return cls(frozenset(Representation(p) for p in parts if p))
        except ValueError:
            raise ValueError(f"unknown representation combo: {text!r}") from None

    def __contains__(self, item: object) -> bool:
        return item in self.members

    @property
    def label(self) -> str:
        return TABLE_LABELS[self]

    @property
    def slug(self) -> str:
        return "+".join(m.value for m in Representation if m in self.members)

    def __str__(self) -> str:
        return self.slug


def _combo(*names: str) -> RepresentationCombo:
    return RepresentationCombo(frozenset(Representation(n) for n in names))


# Row order and naming used in comparison reports.
TABLE_ROWS: tuple[tuple[str, RepresentationCombo], ...] = (
    ("Icon", _combo("icon")),
    ("Title", _combo("title")),
    ("Description", _combo("description")),
    ("Pixel", _combo("pixel")),
    ("Icon & Description", _combo("icon", "description")),
    ("Icon & Title", _combo("icon", "title")),
    ("Icon & Pixel", _combo("icon", "pixel")),
    ("Title & Description", _combo("title", "description")),
    ("Title & Pixel", _combo("title", "pixel")),
    ("Pixel & Description", _combo("pixel", "description")),
    ("Icon & Title & Description", _combo("icon", "title", "description")),
    ("Pixel & Icon & Title", _combo("pixel", "icon", "title")),
    ("Pixel & Icon & Description", _combo("pixel", "icon", "description")),
    ("Pixel & Title & Description", _combo("pixel", "title", "description")),
    ("Pixel & Icon & Title & Description", _combo("pixel", "icon", "title", "description")),
)
TABLE_LABELS = {combo: label for label, combo in TABLE_ROWS}
ALL_COMBOS: tuple[RepresentationCombo, ...] = tuple(c for _, c in TABLE_ROWS)
BEST_COMBO = _combo("pixel", "icon", "description")


def all_combos() -> list[RepresentationCombo]:
    """Every non-empty subset of the four representations, enumerated from scratch."""
    reps = list(Representation)
    return [
        RepresentationCombo(frozenset(c))
        for k in range(1, len(reps) + 1)
        for c in itertools.combinations(reps, k)
    ]


# -- prompts -----------------------------------------------------------------


@lru_cache(maxsize=None)
def prompt_template(name: str) -> str:
    ref = resources.files("emojisent") / "prompts" / f"{name}.txt"
    return ref.read_text(encoding="utf-8").strip()


@dataclass(frozen=True)
class PromptPayload:
    text: str
    model_id: str
    image: Optional[bytes] = None
    image_mime: Optional[str] = None

    @property
    def cache_key(self) -> str:
        h = hashlib.sha256()
        h.update(self.model_id.encode("utf-8"))
        h.update(b"\x00")
        h.update(self.text.encode("utf-8"))
        h.update(b"\x00")
        if self.image is not None:
            h.update(self.image)
        return h.hexdigest()


class MissingRepresentationError(ValueError):
    def __init__(self, key: NormalizedKey, field: str):
        super().__init__(f"emoji {key_to_hex(key)} has no {field}")
        self.key = key
        self.field = field


_TEXT_REPS = (Representation.ICON, Representation.TITLE, Representation.DESCRIPTION)
_MIME = {".png": "image/png", ".jpg": "image/jpeg", ".jpeg": "image/jpeg", ".gif": "image/gif", ".webp": "image/webp"}


def _join(words: Sequence[str]) -> str:
    if len(words) <= 2:
        return " and ".join(words)
    return ", ".join(words[:-1]) + " and " + words[-1]


def build_emoji_prompt(entry: EmojiEntry, combo: RepresentationCombo, model_id: str = DEFAULT_MODEL) -> PromptPayload:
    """Instantiate the emoji prompt for ``combo``.

    Every combination shares one instruction and differs only in the
    representation list.  The
    textual representations are appended below the instruction and the
    pixel render, if requested, travels as an image attachment.
    """
    values = {
        Representation.ICON: entry.icon,
        Representation.TITLE: entry.title,
        Representation.DESCRIPTION: entry.description,
    }
    for rep in _TEXT_REPS:
        if rep in combo and not values[rep]:
            raise MissingRepresentationError(entry.key, rep.value)
    image = mime = None
    if Representation.PIXEL in combo:
        if not entry.pixel_ref:
            raise MissingRepresentationError(entry.key, "pixel_ref")
        path = Path(entry.pixel_ref)
        image = path.read_bytes()
        mime = _MIME.get(path.suffix.lower(), "application/octet-stream")

    textual = [rep for rep in _TEXT_REPS if rep in combo]
    names = [f"emoji {rep.value}" for rep in textual]
    if Representation.PIXEL in combo:
        subject = "Emoji's picture"
        reps = f" by combining {_join(names)}" if names else ""
    else:
        subject = "Emoji"
        reps = f" by combining {_join(names)}" if len(names) > 1 else f" by using {names[0]}"
    instruction = prompt_template("emoji_prompt").format(subject=subject, representations=reps)
    body = "\n".join(f"Emoji {rep.value}: {values[rep]}" for rep in textual)
    text = instruction + ("\n\n" + body if body else "")
    return PromptPayload(text=text, model_id=model_id, image=image, image_mime=mime)


def build_tweet_prompt(text: str, model_id: str = DEFAULT_MODEL) -> PromptPayload:
    return PromptPayload(text=f"{prompt_template('tweet_prompt')}\n\nTweet: {text}", model_id=model_id)


class SentimentParseError(ValueError):
    def __init__(self, raw: str, item: Optional[str] = None):
        where = f" for {item}" if item else ""
        super().__init__(f"unparseable sentiment reply{where}: {raw!r}")
        self.raw = raw
        self.item = item


_STRIP = string.whitespace + string.punctuation + "\u2018\u2019\u201c\u201d"


def parse_sentiment_reply(raw: str) -> Sentiment:
    word = raw.strip(_STRIP).lower()
    try:
        return Sentiment(word)
    except ValueError:
        raise SentimentParseError(raw) from None


# -- transports --------------------------------------------------------------


class TransportError(RuntimeError):
    """The service could not produce a reply."""


class TransientTransportError(TransportError):
    """A failure worth retrying (timeouts, throttling, 5xx)."""


class Transport(ABC):
    @abstractmethod
    def send(self, payload: PromptPayload) -> str:
        """Return the raw reply text for ``payload``."""


class ChatCompletionsTransport(Transport):
    """POSTs to a chat-completions style endpoint.

    The API key is read from the environment variable named by
    ``api_key_env``; it is never accepted as an argument.  Temperature is
    pinned to 0.
    """

    def __init__(
        self,
        endpoint: str = DEFAULT_ENDPOINT,
        api_key_env: str = DEFAULT_API_KEY_ENV,
        timeout: float = 60.0,
        max_tokens: int = 5,
        client=None,
    ):
        import httpx

        self.endpoint = endpoint
        self.api_key_env = api_key_env
        self.max_tokens = max_tokens
        self._client = client or httpx.Client(timeout=timeout)

    def _headers(self) -> dict:
        key = os.environ.get(self.api_key_env)
        if not key:
            raise TransportError(f"environment variable {self.api_key_env} is not set")
        return {"Authorization": f"Bearer {key}", "Content-Type": "application/json"}

    @staticmethod
    def request_body(payload: PromptPayload, max_tokens: int = 5) -> dict:
        content: list[dict] = [{"type": "text", "text": payload.text}]
        if payload.image is not None:
            data = base64.b64encode(payload.image).decode("ascii")
            content.append(
                {"type": "image_url", "image_url": {"url": f"data:{payload.image_mime};base64,{data}"}}
            )
        return {
            "model": payload.model_id,
            "temperature": 0,
            "max_tokens": max_tokens,
            "messages": [{"role": "user", "content": content}],
        }

    def send(self, payload: PromptPayload) -> str:
        import httpx

        try:
            resp = self._client.post(
                self.endpoint,
                headers=self._headers(),
                json=self.request_body(payload, self.max_tokens),
            )
        except httpx.TransportError as exc:
            raise TransientTransportError(str(exc)) from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransientTransportError(f"HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            content = resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"unexpected response shape: {exc}") from exc
        if not isinstance(content, str):
            raise TransportError("reply content is not a string")
        return content


class MockTransport(Transport):
    """Scripted replies keyed by cache key or by exact prompt text.

    ``calls`` counts every ``send``; an unscripted request is a
    :class:`TransportError`.
    """

    def __init__(self, by_key: Optional[Mapping[str, str]] = None, by_text: Optional[Mapping[str, str]] = None,
                 default: Optional[str] = None):
        self.by_key = dict(by_key or {})
        self.by_text = dict(by_text or {})
        self.default = default
        self.calls = 0
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path) -> "MockTransport":
        """JSONL fixtures: ``{"cache_key": ..., "reply": ...}`` or ``{"text": ..., "reply": ...}``."""
        by_key, by_text = {}, {}
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                    reply = obj["reply"]
                except (ValueError, KeyError) as exc:
                    raise ValueError(f"{path}:{lineno}: bad fixture: {exc}") from None
                if "cache_key" in obj:
                    by_key[obj["cache_key"]] = reply
                elif "text" in obj:
                    by_text[obj["text"]] = reply
                else:
                    raise ValueError(f"{path}:{lineno}: fixture needs cache_key or text")
        return cls(by_key, by_text)

    def send(self, payload: PromptPayload) -> str:
        with self._lock:
            self.calls += 1
        if payload.cache_key in self.by_key:
            return self.by_key[payload.cache_key]
        if payload.text in self.by_text:
            return self.by_text[payload.text]
        if self.default is not None:
            return self.default
        raise TransportError(f"no scripted reply for request {payload.cache_key[:12]}")


class CacheOnlyTransport(Transport):
    def send(self, payload: PromptPayload) -> str:
        raise TransportError(f"cache miss for {payload.cache_key[:12]} in cache-only mode")


def send_with_retries(
    transport: Transport,
    payload: PromptPayload,
    attempts: int = 3,
    backoff: float = 1.0,
    sleep: Callable[[float], None] = time.sleep,
) -> str:
    for attempt in range(attempts):
        try:
            return transport.send(payload)
        except TransientTransportError as exc:
            if attempt == attempts - 1:
                raise TransportError(f"giving up after {attempts} attempts: {exc}") from exc
            delay = backoff * 2**attempt
            log.warning("transient failure (%s); retrying in %.1fs", exc, delay)
            sleep(delay)
    raise AssertionError("unreachable")


# -- cache -------------------------------------------------------------------


def _escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n").replace("\r", "\\r")


def _unescape(text: str) -> str:
    out = []
    it = iter(text)
    for ch in it:
        if ch != "\\":
            out.append(ch)
            continue
        nxt = next(it, "")
        out.append({"t": "\t", "n": "\n", "r": "\r", "\\": "\\"}.get(nxt, nxt))
    return "".join(out)


@dataclass(frozen=True)
class CachedReply:
    model_id: str
    label: Sentiment
    raw_reply: str


class AnnotationCache:
    """Append-only ``<cache_key>\\t<model_id>\\t<label>\\t<raw_reply>`` file.

    Pass ``path=None`` for an in-memory cache.
    """

    def __init__(self, path=None):
        self.path = Path(path) if path is not None else None
        self._entries: dict[str, CachedReply] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            self._load()

    def _load(self) -> None:
        with open(self.path, encoding="utf-8", newline="") as f:
            for lineno, line in enumerate(f, 1):
                if not line.endswith("\n"):
                    log.warning("%s:%d: ignoring truncated trailing record", self.path, lineno)
                    continue
                fields = line[:-1].split("\t")
                if len(fields) != 4:
                    log.warning("%s:%d: ignoring malformed cache record", self.path, lineno)
                    continue
                key, model_id, label, raw = fields
                try:
                    sentiment = Sentiment(label)
                except ValueError:
                    log.warning("%s:%d: ignoring record with label %r", self.path, lineno, label)
                    continue
                self._entries[key] = CachedReply(model_id, sentiment, _unescape(raw))

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: str) -> bool:
        return key in self._entries

    def get(self, key: str) -> Optional[CachedReply]:
        return self._entries.get(key)

    def put(self, key: str, reply: CachedReply) -> None:
        line = f"{key}\t{reply.model_id}\t{reply.label.value}\t{_escape(reply.raw_reply)}\n"
        with self._lock:
            self._entries[key] = reply
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "a", encoding="utf-8", newline="") as f:
                    f.write(line)
                    f.flush()


# -- annotation --------------------------------------------------------------


@dataclass(frozen=True)
class AnnotationRecord:
    key: NormalizedKey
    combo: RepresentationCombo
    label: Sentiment
    raw_reply: str
    model_id: str
    cached: bool = False

    def to_json(self) -> dict:
        # ``cached`` is run state, not data: cold and warm runs serialize identically.
        return {
            "key": key_to_hex(self.key),
            "combo": self.combo.slug,
            "label": self.label.value,
            "raw_reply": self.raw_reply,
            "model_id": self.model_id,
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "AnnotationRecord":
        return cls(
            key=key_from_hex(obj["key"]),
            combo=RepresentationCombo.parse(obj["combo"]),
            label=Sentiment(obj["label"]),
            raw_reply=obj["raw_reply"],
            model_id=obj["model_id"],
        )


def _resolve(payload: PromptPayload, transport: Transport, cache: AnnotationCache, item: str,
             attempts: int, backoff: float, sleep: Callable[[float], None]) -> tuple[CachedReply, bool]:
    hit = cache.get(payload.cache_key)
    if hit is not None:
        return hit, True
    raw = send_with_retries(transport, payload, attempts, backoff, sleep)
    try:
        label = parse_sentiment_reply(raw)
    except SentimentParseError:
        raise SentimentParseError(raw, item) from None
    reply = CachedReply(payload.model_id, label, raw)
    cache.put(payload.cache_key, reply)
    return reply, False


def annotate_emoji(
    entry: EmojiEntry,
    combo: RepresentationCombo,
    transport: Transport,
    cache: AnnotationCache,
    *,
    model_id: str = DEFAULT_MODEL,
    attempts: int = 3,
    backoff: float = 1.0,
    sleep: Callable[[float], None] = time.sleep,
) -> AnnotationRecord:
    payload = build_emoji_prompt(entry, combo, model_id)
    reply, cached = _resolve(payload, transport, cache, f"emoji {key_to_hex(entry.key)}", attempts, backoff, sleep)
    return AnnotationRecord(entry.key, combo, reply.label, reply.raw_reply, reply.model_id, cached)


def annotate_many(
    entries: Iterable[EmojiEntry],
    combo: RepresentationCombo,
    transport: Transport,
    cache: AnnotationCache,
    *,
    max_in_flight: int = 4,
    **kwargs,
) -> list[AnnotationRecord]:
    """Annotate ``entries`` with at most ``max_in_flight`` concurrent requests, preserving order."""
    entries = list(entries)
    if max_in_flight <= 1:
        return [annotate_emoji(e, combo, transport, cache, **kwargs) for e in entries]
    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        return list(pool.map(lambda e: annotate_emoji(e, combo, transport, cache, **kwargs), entries))


def annotate_text_ground_truth(
    text: str,
    transport: Transport,
    cache: AnnotationCache,
    *,
    text_id: Optional[str] = None,
    model_id: str = DEFAULT_MODEL,
    attempts: int = 3,
    backoff: float = 1.0,
    sleep: Callable[[float], None] = time.sleep,
) -> Sentiment:
    payload = build_tweet_prompt(text, model_id)
    item = f"text {text_id}" if text_id is not None else "text"
    reply, _ = _resolve(payload, transport, cache, item, attempts, backoff, sleep)
    return reply.label


def records_to_lexicon(records: Iterable[AnnotationRecord], source: str = "") -> SentimentLexicon:
    entries = {}
    for r in records:
        entries[r.key] = LexiconValue(r.label, f"{r.model_id}:{r.combo.slug}")
    return SentimentLexicon(entries, source=source)


def read_records(path) -> list[AnnotationRecord]:
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                out.append(AnnotationRecord.from_json(json.loads(line)))
            except (KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad annotation record: {exc}") from None
    return out


def format_records(records: Iterable[AnnotationRecord]) -> str:
    return "".join(json.dumps(r.to_json(), ensure_ascii=False, sort_keys=True) + "\n" for r in records)
