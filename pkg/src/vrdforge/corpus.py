"""Corpus ingestion, length-balanced sampling and leakage-free splits."""
from __future__ import annotations

import bisect
import json
import re
import unicodedata
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, CorpusError, EmptyCorpusError

DEFAULT_MAX_CHARS = 120
DEFAULT_MAX_WORDS = 15

_SENTENCE_BREAK = re.compile(r"(?<=[.!?])\s+")


@dataclass(frozen=True)
class Sentence:
    text: str
    char_count: int
    word_count: int
    source_id: str = ""

    @classmethod
    def from_text(cls, text: str, source_id: str = "") -> "Sentence":
        return cls(text, len(text), len(text.split()), source_id)

    def to_json(self) -> dict:
        return {"text": self.text, "wc": self.word_count, "cc": self.char_count, "src": self.source_id}

    @classmethod
    def from_json(cls, obj: dict) -> "Sentence":
        s = cls.from_text(obj["text"], obj.get("src", ""))
        if "wc" in obj and obj["wc"] != s.word_count or "cc" in obj and obj["cc"] != s.char_count:
            raise CorpusError(f"cached counts disagree with text for {obj['text']!r}")
        return s


@dataclass
class IngestResult:
    sentences: list[Sentence]
    dropped_too_long: int = 0
    dropped_too_many_words: int = 0
    segments_seen: int = 0

    def __iter__(self):
        return iter(self.sentences)

    def __len__(self):
        return len(self.sentences)


def clean_segment(text: str) -> str:
    """NFC-normalize, drop control/format characters, collapse whitespace."""
    text = unicodedata.normalize("NFC", text)
    text = "".join(
        " " if ch.isspace() else ch
        for ch in text
        if ch.isspace() or unicodedata.category(ch) not in ("Cc", "Cf")
    )
    return " ".join(text.split())


def segment(text: str) -> list[str]:
    """Split on newlines, then after ``.``, ``!`` or ``?`` followed by whitespace."""
    out = []
    for line in text.splitlines():
        for piece in _SENTENCE_BREAK.split(line):
            piece = clean_segment(piece)
            if piece:
                out.append(piece)
    return out


def _decode(raw) -> str:
    if isinstance(raw, str):
        return raw
    if hasattr(raw, "read"):
        raw = raw.read()
        if isinstance(raw, str):
            return raw
    try:
        return bytes(raw).decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CorpusError(f"invalid UTF-8 at byte offset {exc.start}") from exc


def ingest_text(
    raw,
    max_chars: int = DEFAULT_MAX_CHARS,
    max_words: int | None = DEFAULT_MAX_WORDS,
    source_id: str = "input",
) -> IngestResult:
    """Segment raw UTF-8 text into sentences within the length limits.

    ``raw`` may be ``bytes``, ``str`` or a file object. Segments longer than
    ``max_chars`` (or with more than ``max_words`` words) are dropped and
    counted in the result.
    """
    if max_chars < 1:
        raise ConfigError("max_chars must be positive")
    text = _decode(raw)
    result = IngestResult([])
    for k, piece in enumerate(segment(text)):
        result.segments_seen += 1
        if len(piece) > max_chars:
            result.dropped_too_long += 1
            continue
        s = Sentence.from_text(piece, f"{source_id}:{k}")
        if max_words is not None and s.word_count > max_words:
            result.dropped_too_many_words += 1
            continue
        result.sentences.append(s)
    if not result.sentences:
        raise EmptyCorpusError(f"no sentences survived ingestion of {source_id}")
    return result


def write_jsonl(sentences: Iterable[Sentence], path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for s in sentences:
            fh.write(json.dumps(s.to_json(), ensure_ascii=False) + "\n")
            n += 1
    return n


def read_jsonl(path) -> list[Sentence]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(Sentence.from_json(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise CorpusError(f"{path}:{lineno}: bad corpus record ({exc})") from exc
    if not out:
        raise EmptyCorpusError(f"{path} holds no sentences")
    return out


def load_corpus(path, max_chars: int = DEFAULT_MAX_CHARS, max_words: int | None = DEFAULT_MAX_WORDS) -> list[Sentence]:
    """Read a ``.jsonl`` corpus file, or ingest any other file as raw text."""
    path = Path(path)
    if path.suffix == ".jsonl":
        pool = [s for s in read_jsonl(path) if s.char_count <= max_chars
                and (max_words is None or s.word_count <= max_words)]
        if not pool:
            raise EmptyCorpusError(f"{path}: no sentence within the length limits")
        return pool
    return ingest_text(path.read_bytes(), max_chars, max_words, source_id=path.name).sentences


def bundled_corpus_path() -> Path:
    return Path(__file__).parent / "data" / "sample_es.txt"


# ---------------------------------------------------------------- sampling


@dataclass(frozen=True)
class LengthDistribution:
    """Target weights over contiguous inclusive length ranges."""

    key: str
    buckets: tuple[tuple[tuple[int, int], float], ...]

    def __post_init__(self):
        if self.key not in ("word_count", "char_count"):
            raise ConfigError(f"unknown bucket key {self.key!r}")
        if not self.buckets:
            raise ConfigError("length distribution needs at least one bucket")
        prev_hi = None
        for (lo, hi), weight in self.buckets:
            if lo > hi or lo < 0:
                raise ConfigError(f"bad bucket range [{lo}, {hi}]")
            if prev_hi is not None and lo != prev_hi + 1:
                raise ConfigError(f"buckets must be disjoint and contiguous, got [{lo}, {hi}] after {prev_hi}")
            if not weight > 0:
                raise ConfigError(f"bucket [{lo}, {hi}] has non-positive weight")
            prev_hi = hi
        total = sum(w for _, w in self.buckets)
        if abs(total - 1.0) > 1e-9:
            raise ConfigError(f"bucket weights sum to {total}, expected 1")

    @classmethod
    def uniform(cls, key: str = "word_count", lo: int = 1, hi: int = DEFAULT_MAX_WORDS, width: int = 1):
        ranges = [(a, min(a + width - 1, hi)) for a in range(lo, hi + 1, width)]
        return cls(key, tuple((r, 1.0 / len(ranges)) for r in ranges))

    @property
    def span(self) -> tuple[int, int]:
        return self.buckets[0][0][0], self.buckets[-1][0][1]

    def bucket_index(self, sentence: Sentence) -> int | None:
        value = getattr(sentence, self.key)
        for i, ((lo, hi), _) in enumerate(self.buckets):
            if lo <= value <= hi:
                return i
        return None

    def to_json(self) -> dict:
        return {"key": self.key, "buckets": [[lo, hi, w] for (lo, hi), w in self.buckets]}


class UniformLengthSampler:
    """Pre-grouped pool; each draw picks a bucket by weight, then a member."""

    def __init__(self, pool: Sequence[Sentence], dist: LengthDistribution):
        groups: list[list[Sentence]] = [[] for _ in dist.buckets]
        for s in pool:
            i = dist.bucket_index(s)
            if i is not None:
                groups[i].append(s)
        for ((lo, hi), _), members in zip(dist.buckets, groups):
            if not members:
                raise CorpusError(f"no pool sentence with {dist.key} in [{lo}, {hi}]")
        self.dist = dist
        self.groups = groups
        self._cum = np.cumsum([w for _, w in dist.buckets])
        self._cum[-1] = 1.0

    def draw(self, rng: np.random.Generator, n: int) -> list[Sentence]:
        u = rng.random(n)
        v = rng.random(n)
        out = []
        for a, b in zip(u, v):
            group = self.groups[bisect.bisect_right(self._cum, a)]
            out.append(group[int(b * len(group))])
        return out


@dataclass(frozen=True)
class FixedWordCount:
    """Length policy: every text has exactly ``k`` words."""

    k: int
    allow_truncation: bool = False

    def to_json(self) -> dict:
        return {"mode": "fixed", "k": self.k, "allow_truncation": self.allow_truncation}


def make_sampler(pool, policy):
    if isinstance(policy, FixedWordCount):
        return FixedWordCountSampler(pool, policy.k, policy.allow_truncation)
    return UniformLengthSampler(pool, policy)


class FixedWordCountSampler:
    def __init__(self, pool: Sequence[Sentence], k: int, allow_truncation: bool = False):
        if k < 1:
            raise ConfigError("word count k must be positive")
        candidates = [s for s in pool if s.word_count == k]
        if allow_truncation:
            candidates += [
                Sentence.from_text(" ".join(s.text.split()[:k]), s.source_id + "#trunc")
                for s in pool if s.word_count > k
            ]
        if not candidates:
            raise CorpusError(f"no sentence with exactly {k} words (truncation {'on' if allow_truncation else 'off'})")
        self.k = k
        self.candidates = candidates

    def draw(self, rng: np.random.Generator, n: int) -> list[Sentence]:
        return [self.candidates[int(b * len(self.candidates))] for b in rng.random(n)]


def _check_n(n):
    if n < 1:
        raise ConfigError(f"sample size must be positive, got {n}")


def sample_uniform(pool, dist: LengthDistribution, n: int, rng: np.random.Generator) -> list[Sentence]:
    """Sample ``n`` sentences with replacement, bucket shares following ``dist``."""
    _check_n(n)
    return UniformLengthSampler(pool, dist).draw(rng, n)


def sample_fixed_word_count(pool, k: int, n: int, rng: np.random.Generator,
                            allow_truncation: bool = False) -> list[Sentence]:
    _check_n(n)
    return FixedWordCountSampler(pool, k, allow_truncation).draw(rng, n)


# ---------------------------------------------------------------- splits


def normalize_key(text: str) -> str:
    return " ".join(text.casefold().split())


def split_disjoint(pool: Sequence[Sentence], test_fraction: float,
                   rng: np.random.Generator) -> tuple[list[Sentence], list[Sentence]]:
    """Split by unique normalized text so no test text appears in train.

    Duplicates under casefold + whitespace collapse stay together on one
    side. The test side gets ``round(test_fraction * n_unique)`` units.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ConfigError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    order: dict[str, int] = {}
    for s in pool:
        order.setdefault(normalize_key(s.text), len(order))
    if not order:
        raise EmptyCorpusError("cannot split an empty pool")
    n_test = int(round(test_fraction * len(order)))
    perm = rng.permutation(len(order))
    test_ids = set(perm[:n_test].tolist())
    train, test = [], []
    for s in pool:
        (test if order[normalize_key(s.text)] in test_ids else train).append(s)
    return train, test
