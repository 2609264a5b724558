"""Reference-song catalogue: ingest, hierarchical browse, and lexical search.

The catalogue is the set of songs available for conditioning a generation.
It is loaded once from a JSON-lines stream and is read-only afterwards, so
request handlers may share it freely. Search here is purely lexical and
deterministic; embedding-based retrieval lives in :mod:`refrain.retrieval`.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Iterator
from urllib.parse import quote

from .blocks import BlockVocabulary, FeatureTrack, track_from_frames
from .errors import NotFoundError

ROOT_NODE_ID = "root"

# Fields every ingestion record must carry, with their JSON types.
_RECORD_FIELDS = {
    "song_id": int,
    "title": str,
    "artist_id": str,
    "artist_name": str,
    "album": str,
    "genre_path": list,
    "tags": list,
    "release_year": int,
    "frame_duration_ms": int,
    "frames": list,
}


@dataclass(frozen=True)
class Song:
    song_id: int
    title: str
    artist_id: str
    artist_name: str
    album: str
    genre_path: tuple[str, ...]
    tags: frozenset[str]
    release_year: int
    feature_track: FeatureTrack


@dataclass(frozen=True)
class HierarchyNode:
    node_id: str
    label: str
    kind: str
    children: tuple[str, ...]
    song_id: int | None = None

    @property
    def is_leaf(self) -> bool:
        return self.song_id is not None


@dataclass(frozen=True)
class IngestRejection:
    line_no: int
    reason: str
    song_id: int | None = None

    def __str__(self) -> str:
        subject = f"song {self.song_id}" if self.song_id is not None else "record"
        return f"line {self.line_no}: rejected {subject}: {self.reason}"


@dataclass(frozen=True)
class IngestReport:
    loaded: int
    rejections: tuple[IngestRejection, ...]


# ---------------------------------------------------------------------------
# Hierarchy builders
# ---------------------------------------------------------------------------

# A builder maps a song to the (kind, key, label) steps of its path, root
# first. ``key`` determines node identity, ``label`` is what the UI shows.
HierarchyBuilder = Callable[[Song], list[tuple[str, str, str]]]


def genre_hierarchy(song: Song) -> list[tuple[str, str, str]]:
    steps = [("genre", song.genre_path[0], song.genre_path[0])]
    for part in song.genre_path[1:]:
        steps.append(("subgenre", part, part))
    steps.append(("artist", song.artist_id, song.artist_name))
    steps.append(("album", song.album, song.album))
    return steps


def decade_hierarchy(song: Song) -> list[tuple[str, str, str]]:
    decade = f"{song.release_year // 10 * 10}s"
    return [("decade", decade, decade), ("year", str(song.release_year), str(song.release_year))]


HIERARCHY_BUILDERS: dict[str, HierarchyBuilder] = {
    "genre": genre_hierarchy,
    "decade": decade_hierarchy,
}


class Catalogue:
    """Song store plus materialized browse hierarchy and search index.

    Ingest is exclusive: callers must not read concurrently with
    :meth:`ingest`. After ingest the object is effectively immutable and
    safe to share across threads.
    """

    def __init__(
        self,
        vocabulary: BlockVocabulary,
        hierarchies: Iterable[str] = ("genre",),
    ):
        self.vocabulary = vocabulary
        self._hierarchies = tuple(hierarchies)
        for name in self._hierarchies:
            if name not in HIERARCHY_BUILDERS:
                raise NotFoundError(f"unknown hierarchy builder {name!r}")
        self._songs: dict[int, Song] = {}
        self._nodes: dict[str, HierarchyNode] = {}
        self._rebuild_hierarchy()

    # -- ingest -------------------------------------------------------------

    def ingest(self, source: Iterable[str] | str | Path) -> IngestReport:
        """Load JSON-lines records; invalid records are rejected, not fatal."""
        if isinstance(source, (str, Path)):
            with io.open(source, "r", encoding="utf-8") as handle:
                lines = handle.readlines()
        else:
            lines = list(source)
        loaded = 0
        rejections: list[IngestRejection] = []
        for line_no, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                rejections.append(IngestRejection(line_no, f"malformed JSON ({exc.msg})"))
                continue
            try:
                song = self._parse_record(record)
            except ValueError as exc:
                song_id = record.get("song_id") if isinstance(record, dict) else None
                song_id = song_id if isinstance(song_id, int) else None
                rejections.append(IngestRejection(line_no, str(exc), song_id))
                continue
            if song.song_id in self._songs:
                rejections.append(IngestRejection(line_no, "duplicate song_id", song.song_id))
                continue
            self._songs[song.song_id] = song
            loaded += 1
        self._rebuild_hierarchy()
        return IngestReport(loaded, tuple(rejections))

    def _parse_record(self, record: object) -> Song:
        if not isinstance(record, dict):
            raise ValueError("record is not a JSON object")
        for field, kind in _RECORD_FIELDS.items():
            if field not in record:
                raise ValueError(f"missing field {field!r}")
            if not isinstance(record[field], kind) or isinstance(record[field], bool):
                raise ValueError(f"field {field!r} has wrong type")
        song_id = record["song_id"]
        if song_id <= 0:
            raise ValueError("song_id must be a positive integer")
        genre_path = tuple(record["genre_path"])
        if not genre_path or not all(isinstance(p, str) and p for p in genre_path):
            raise ValueError("genre_path must be a non-empty list of non-empty strings")
        tags = record["tags"]
        if not tags or not all(isinstance(t, str) and t for t in tags):
            raise ValueError("tags must be a non-empty list of non-empty strings")
        if any(t != t.lower() for t in tags):
            raise ValueError("tags must be lowercase")
        if genre_path[-1].lower() not in tags:
            raise ValueError("the genre leaf must appear among the tags")
        try:
            track = track_from_frames(record["frame_duration_ms"], record["frames"], self.vocabulary)
        except ValueError as exc:
            raise ValueError(f"bad feature track: {exc}") from exc
        return Song(
            song_id=song_id,
            title=record["title"],
            artist_id=record["artist_id"],
            artist_name=record["artist_name"],
            album=record["album"],
            genre_path=genre_path,
            tags=frozenset(tags),
            release_year=record["release_year"],
            feature_track=track,
        )

    # -- reads --------------------------------------------------------------

    def __len__(self) -> int:
        return len(self._songs)

    def __contains__(self, song_id: int) -> bool:
        return song_id in self._songs

    def song_ids(self) -> list[int]:
        return sorted(self._songs)

    def songs(self) -> Iterator[Song]:
        for song_id in sorted(self._songs):
            yield self._songs[song_id]

    def get_song(self, song_id: int) -> Song:
        try:
            return self._songs[song_id]
        except KeyError:
            raise NotFoundError(f"unknown song {song_id}") from None

    def artist_of(self, song_id: int) -> str:
        return self.get_song(song_id).artist_id

    def song_to_artist(self) -> dict[int, str]:
        return {song_id: song.artist_id for song_id, song in self._songs.items()}

    def artist_name(self, artist_id: str) -> str:
        for song in self._songs.values():
            if song.artist_id == artist_id:
                return song.artist_name
        raise NotFoundError(f"unknown artist {artist_id}")

    # -- browse -------------------------------------------------------------

    def node(self, node_id: str) -> HierarchyNode:
        try:
            return self._nodes[node_id]
        except KeyError:
            raise NotFoundError(f"unknown node {node_id!r}") from None

    def browse(self, node_id: str) -> list[HierarchyNode]:
        """Children of a node, sorted by label ascending; leaves carry song_id."""
        parent = self.node(node_id)
        return [self._nodes[child] for child in parent.children]

    def _rebuild_hierarchy(self) -> None:
        labels: dict[str, tuple[str, str]] = {}  # node_id -> (kind, label)
        children: dict[str, set[str]] = {ROOT_NODE_ID: set()}
        leaf_song: dict[str, int] = {}
        labels[ROOT_NODE_ID] = ("catalogue", "catalogue")
        for hierarchy in self._hierarchies:
            root_id = f"{hierarchy}:"
            labels[root_id] = ("hierarchy", hierarchy)
            children[ROOT_NODE_ID].add(root_id)
            children.setdefault(root_id, set())
            builder = HIERARCHY_BUILDERS[hierarchy]
            for song in self._songs.values():
                steps = builder(song) + [("song", str(song.song_id), song.title)]
                parent = root_id
                path: list[str] = []
                for kind, key, label in steps:
                    path.append(quote(key, safe=""))
                    node_id = f"{hierarchy}:" + "/".join(path)
                    labels[node_id] = (kind, label)
                    children.setdefault(parent, set()).add(node_id)
                    children.setdefault(node_id, set())
                    parent = node_id
                leaf_song[parent] = song.song_id
        nodes: dict[str, HierarchyNode] = {}
        for node_id, (kind, label) in labels.items():
            kids = sorted(children.get(node_id, ()), key=lambda cid: (labels[cid][1], cid))
            nodes[node_id] = HierarchyNode(
                node_id=node_id,
                label=label,
                kind=kind,
                children=tuple(kids),
                song_id=leaf_song.get(node_id),
            )
        self._nodes = nodes

    # -- search ---------------------------------------------------------------

    def search(self, query: str, limit: int) -> list[tuple[int, str]]:
        """Case-insensitive prefix-then-substring ranking over text fields.

        Returns ``(song_id, match_field)`` pairs. Prefix matches rank above
        substring matches; ties break by ascending song id. The match field
        reported is the first of title / artist / album / tag reaching the
        song's best match class. Empty queries yield no results.
        """
        if limit < 1:
            raise ValueError("limit must be >= 1")
        if not query:
            return []
        needle = query.lower()
        ranked: list[tuple[int, int, str]] = []
        for song_id in sorted(self._songs):
            song = self._songs[song_id]
            best: tuple[int, str] | None = None
            for field, values in (
                ("title", (song.title,)),
                ("artist", (song.artist_name,)),
                ("album", (song.album,)),
                ("tag", tuple(sorted(song.tags))),
            ):
                for value in values:
                    haystack = value.lower()
                    if haystack.startswith(needle):
                        rank = 0
                    elif needle in haystack:
                        rank = 1
                    else:
                        continue
                    if best is None or rank < best[0]:
                        best = (rank, field)
            if best is not None:
                ranked.append((best[0], song_id, best[1]))
        ranked.sort(key=lambda item: (item[0], item[1]))
        return [(song_id, field) for _, song_id, field in ranked[:limit]]
