"""Prompt-driven candidate retrieval over a shared embedding space.

Texts and songs are embedded by a deterministic hashed-tag encoder (a
stand-in for a neural text/audio tower, swappable behind ``embed``), ranked
by cosine similarity with a total tie order, and paged through sessions that
never repeat a candidate. Scores are for navigation only: they are never
recorded in manifests or ledger entries.

Float contract: norms and dot products use exactly-rounded summation
(``math.fsum``), so any independent reimplementation of the same formulas
reproduces scores bit for bit on any IEEE-754 platform.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Protocol, Sequence

import numpy as np

from .catalogue import Catalogue, Song
from .errors import InvalidRequestError

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF

SIGNAL_PROMPT_UNINFORMATIVE = "prompt-uninformative"
SIGNAL_EXHAUSTED = "exhausted"

_TOKEN_RE = re.compile(r"[a-z0-9]+")

CATEGORY_FIELDS = ("genre", "instruments", "vocalist", "mood", "situation", "function")


def fnv1a64(data: bytes) -> int:
    value = FNV64_OFFSET
    for byte in data:
        value ^= byte
        value = (value * FNV64_PRIME) & _MASK64
    return value


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


class PromptKind(str, Enum):
    FREE_TEXT = "free_text"
    CATEGORIES = "categories"


@dataclass(frozen=True)
class Prompt:
    kind: PromptKind
    text: str | None = None
    categories: Mapping[str, tuple[str, ...]] | None = None

    def __post_init__(self) -> None:
        if self.kind is PromptKind.FREE_TEXT:
            if self.text is None:
                raise InvalidRequestError("free-text prompt requires text")
        else:
            if not self.categories or not any(self.categories.values()):
                raise InvalidRequestError("category prompt requires at least one selection")
            unknown = set(self.categories) - set(CATEGORY_FIELDS)
            if unknown:
                raise InvalidRequestError(f"unknown category fields {sorted(unknown)}")

    def tags(self) -> list[str]:
        """Free text tokenizes; category labels are used verbatim."""
        if self.kind is PromptKind.FREE_TEXT:
            return tokenize(self.text or "")
        assert self.categories is not None
        return [label for fieldname in CATEGORY_FIELDS for label in self.categories.get(fieldname, ())]


class Encoder(Protocol):
    """Plugin boundary: a list of tags or raw text in, D floats out."""

    dim: int

    def embed(self, tags_or_text: str | Sequence[str]) -> np.ndarray: ...


class HashedTagEncoder:
    """Bucketed tag counts under 64-bit FNV-1a, L2-normalized.

    Empty input embeds to the zero vector; everything else lands on the unit
    sphere.
    """

    def __init__(self, dim: int = 64):
        if dim < 1:
            raise ValueError("encoder dim must be >= 1")
        self.dim = dim

    def embed(self, tags_or_text: str | Sequence[str]) -> np.ndarray:
        tags = tokenize(tags_or_text) if isinstance(tags_or_text, str) else list(tags_or_text)
        counts = [0] * self.dim
        for tag in tags:
            counts[fnv1a64(tag.encode("utf-8")) % self.dim] += 1
        norm = math.sqrt(math.fsum(float(c) * float(c) for c in counts))
        if norm == 0.0:
            return np.zeros(self.dim, dtype=np.float64)
        return np.array([c / norm for c in counts], dtype=np.float64)


def song_tag_multiset(song: Song) -> list[str]:
    """Tags + genre path + artist-name tokens; duplicates accumulate counts."""
    return sorted(song.tags) + [part.lower() for part in song.genre_path] + tokenize(song.artist_name)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    return math.fsum((a * b).tolist())


@dataclass
class RetrievalSession:
    session_id: str
    prompt: Prompt
    prompt_embedding: np.ndarray
    k: int
    shown: list[int] = field(default_factory=list)
    rejected: set[int] = field(default_factory=set)
    rounds: int = 0

    def reject(self, song_ids: Iterable[int]) -> None:
        self.rejected.update(int(s) for s in song_ids)


@dataclass(frozen=True)
class RankResult:
    items: tuple[tuple[int, float], ...]
    signal: str | None = None


class RetrievalEngine:
    """Exhaustive cosine ranking over the catalogue (desk scale, no ANN)."""

    def __init__(
        self,
        catalogue: Catalogue,
        *,
        dim: int = 64,
        default_k: int = 10,
        encoder: Encoder | None = None,
    ):
        self._catalogue = catalogue
        self.default_k = default_k
        self.encoder = encoder if encoder is not None else HashedTagEncoder(dim)
        self._session_counter = itertools.count(1)
        self.rebuild()

    def rebuild(self) -> None:
        ids = self._catalogue.song_ids()
        self._ids = ids
        if ids:
            self._matrix = np.vstack([self.encoder.embed(song_tag_multiset(self._catalogue.get_song(i))) for i in ids])
        else:
            self._matrix = np.zeros((0, self.encoder.dim), dtype=np.float64)

    # -- embeddings ---------------------------------------------------------

    def embed_text(self, prompt: Prompt) -> np.ndarray:
        if prompt.kind is PromptKind.FREE_TEXT:
            return self.encoder.embed(prompt.text or "")
        return self.encoder.embed(prompt.tags())

    def embed_song(self, song: Song) -> np.ndarray:
        return self.encoder.embed(song_tag_multiset(song))

    # -- ranking ------------------------------------------------------------

    def ranked_candidates(
        self, embedding: np.ndarray, exclude: frozenset[int] | set[int] = frozenset()
    ) -> list[tuple[int, float]]:
        """Full ranking by (score desc, song_id asc), minus exclusions."""
        products = self._matrix * embedding
        scored = [
            (song_id, math.fsum(row))
            for song_id, row in zip(self._ids, products.tolist())
            if song_id not in exclude
        ]
        scored.sort(key=lambda item: (-item[1], item[0]))
        return scored

    def open_session(self, prompt: Prompt, *, k: int | None = None, session_id: str | None = None) -> RetrievalSession:
        k = self.default_k if k is None else k
        if k < 1:
            raise InvalidRequestError("k must be >= 1")
        if session_id is None:
            session_id = f"rs-{next(self._session_counter)}"
        return RetrievalSession(session_id, prompt, self.embed_text(prompt), k)

    def rank_top_k(self, session: RetrievalSession) -> RankResult:
        """Next page of candidates; ids returned are added to session.shown."""
        if not self._ids:
            raise InvalidRequestError("catalogue is empty")
        session.rounds += 1
        if not np.any(session.prompt_embedding):
            return RankResult((), SIGNAL_PROMPT_UNINFORMATIVE)
        exclude = set(session.shown) | session.rejected
        ranking = self.ranked_candidates(session.prompt_embedding, exclude)
        if not ranking:
            return RankResult((), SIGNAL_EXHAUSTED)
        page = tuple(ranking[: session.k])
        session.shown.extend(song_id for song_id, _ in page)
        return RankResult(page)

    def refine(self, session: RetrievalSession) -> RankResult:
        if session.rounds == 0:
            raise InvalidRequestError("refine requires a prior ranking in this session")
        return self.rank_top_k(session)
