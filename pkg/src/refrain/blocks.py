"""Block vocabulary and block-partitioned feature tracks.

A song's audio stand-in is a feature track: an ordered sequence of frames,
each carrying one fixed-dimension vector per named block (genre, mood,
melody, timbre.guitar, ...). The vocabulary is global: every track in a
catalogue carries exactly the configured blocks at the configured
dimensions, which is what makes per-block recombination well defined.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

import math
import struct

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class BlockSpec:
    name: str
    dim: int
    importance: float


@dataclass(frozen=True)
class BlockVocabulary:
    """Ordered, validated set of block definitions."""

    entries: tuple[BlockSpec, ...]

    def __post_init__(self) -> None:
        if not self.entries:
            raise ConfigurationError("block vocabulary must not be empty")
        names = [spec.name for spec in self.entries]
        if len(set(names)) != len(names):
            raise ConfigurationError("block names must be unique")
        for spec in self.entries:
            if not spec.name:
                raise ConfigurationError("block names must be non-empty")
            if spec.dim < 1:
                raise ConfigurationError(f"block {spec.name!r}: dim must be >= 1")
            if spec.importance < 0 or not math.isfinite(spec.importance):
                raise ConfigurationError(f"block {spec.name!r}: importance must be finite and >= 0")
        if not math.fsum(spec.importance for spec in self.entries) > 0:
            raise ConfigurationError("block importances must sum to a positive value")

    @classmethod
    def from_entries(cls, triples: Iterable[tuple[str, int, float]]) -> "BlockVocabulary":
        return cls(tuple(BlockSpec(name, int(dim), float(importance)) for name, dim, importance in triples))

    @classmethod
    def from_config_string(cls, text: str) -> "BlockVocabulary":
        """Parse ``name:dim:importance,name:dim:importance,...``."""
        triples = []
        for raw in text.split(","):
            raw = raw.strip()
            if not raw:
                continue
            parts = raw.split(":")
            if len(parts) != 3:
                raise ConfigurationError(f"bad block entry {raw!r} (want name:dim:importance)")
            triples.append((parts[0], int(parts[1]), float(parts[2])))
        return cls.from_entries(triples)

    def to_config_string(self) -> str:
        return ",".join(f"{s.name}:{s.dim}:{s.importance:g}" for s in self.entries)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(spec.name for spec in self.entries)

    def __contains__(self, name: str) -> bool:
        return any(spec.name == name for spec in self.entries)

    def __iter__(self) -> Iterator[BlockSpec]:
        return iter(self.entries)

    def spec(self, name: str) -> BlockSpec:
        for entry in self.entries:
            if entry.name == name:
                return entry
        raise KeyError(name)

    def dim(self, name: str) -> int:
        return self.spec(name).dim

    def importance(self, name: str) -> float:
        return self.spec(name).importance

    def total_importance(self) -> float:
        return math.fsum(spec.importance for spec in self.entries)


# Semantic blocks are low-dimensional, musical blocks wider; importances
# are uniform by default so worked examples stay easy to check by hand.
DEFAULT_VOCABULARY = BlockVocabulary.from_entries(
    [
        ("genre", 8, 1.0),
        ("mood", 8, 1.0),
        ("situation", 8, 1.0),
        ("melody", 16, 1.0),
        ("rhythm", 16, 1.0),
        ("harmony", 16, 1.0),
        ("timbre.guitar", 16, 1.0),
        ("timbre.voice", 16, 1.0),
        ("timbre.drums", 16, 1.0),
        ("instrumentation", 8, 1.0),
    ]
)


class FeatureTrack:
    """Columnar frame store: one ``(num_frames, dim)`` float64 matrix per block.

    Arrays are frozen on construction; use :meth:`copy` to obtain writable
    buffers for editing flows.
    """

    __slots__ = ("frame_duration_ms", "blocks")

    def __init__(self, frame_duration_ms: int, blocks: Mapping[str, np.ndarray]):
        if frame_duration_ms <= 0:
            raise ValueError("frame_duration_ms must be positive")
        if not blocks:
            raise ValueError("feature track needs at least one block")
        converted: dict[str, np.ndarray] = {}
        num_frames = None
        for name, values in blocks.items():
            arr = np.array(values, dtype=np.float64, order="C", copy=True)
            if arr.ndim != 2:
                raise ValueError(f"block {name!r}: expected a (frames, dim) matrix")
            if num_frames is None:
                num_frames = arr.shape[0]
            elif arr.shape[0] != num_frames:
                raise ValueError("all blocks must have the same frame count")
            arr.setflags(write=False)
            converted[name] = arr
        if num_frames is None or num_frames < 1:
            raise ValueError("feature track needs at least one frame")
        object.__setattr__(self, "frame_duration_ms", int(frame_duration_ms))
        object.__setattr__(self, "blocks", converted)

    def __setattr__(self, name, value):  # pragma: no cover - immutability guard
        raise AttributeError("FeatureTrack is immutable")

    @property
    def num_frames(self) -> int:
        return next(iter(self.blocks.values())).shape[0]

    def frame(self, index: int) -> dict[str, tuple[float, ...]]:
        return {name: tuple(arr[index]) for name, arr in self.blocks.items()}

    def copy_blocks(self) -> dict[str, np.ndarray]:
        return {name: arr.copy() for name, arr in self.blocks.items()}


def validate_track(track: FeatureTrack, vocabulary: BlockVocabulary) -> None:
    """Raise ValueError unless the track matches the vocabulary exactly."""
    expected = set(vocabulary.names)
    present = set(track.blocks)
    if present != expected:
        missing = sorted(expected - present)
        extra = sorted(present - expected)
        raise ValueError(f"block vocabulary mismatch (missing={missing}, extra={extra})")
    for spec in vocabulary:
        dim = track.blocks[spec.name].shape[1]
        if dim != spec.dim:
            raise ValueError(f"block {spec.name!r}: dim {dim} != {spec.dim}")


def track_from_frames(
    frame_duration_ms: int,
    frames: Sequence[Mapping[str, Sequence[float]]],
    vocabulary: BlockVocabulary,
) -> FeatureTrack:
    """Build a track from the row-wise wire format, validating every frame."""
    if not frames:
        raise ValueError("feature track needs at least one frame")
    expected = set(vocabulary.names)
    columns: dict[str, list[Sequence[float]]] = {name: [] for name in vocabulary.names}
    for i, frame in enumerate(frames):
        if set(frame) != expected:
            raise ValueError(f"frame {i}: block vocabulary mismatch")
        for spec in vocabulary:
            values = frame[spec.name]
            if len(values) != spec.dim:
                raise ValueError(f"frame {i}: block {spec.name!r} has dim {len(values)} != {spec.dim}")
            columns[spec.name].append(values)
    blocks = {name: np.asarray(rows, dtype=np.float64) for name, rows in columns.items()}
    track = FeatureTrack(frame_duration_ms, blocks)
    validate_track(track, vocabulary)
    return track


def track_to_frames(track: FeatureTrack) -> list[dict[str, list[float]]]:
    names = sorted(track.blocks)
    return [
        {name: [float(v) for v in track.blocks[name][t]] for name in names}
        for t in range(track.num_frames)
    ]


def track_bytes(track: FeatureTrack, vocabulary: BlockVocabulary) -> bytes:
    """Canonical byte form: header + little-endian float64s in vocabulary order."""
    parts = [struct.pack("<qq", track.frame_duration_ms, track.num_frames)]
    for spec in vocabulary:
        parts.append(track.blocks[spec.name].astype("<f8").tobytes(order="C"))
    return b"".join(parts)


def tracks_byte_equal(a: FeatureTrack, b: FeatureTrack, vocabulary: BlockVocabulary) -> bool:
    return track_bytes(a, vocabulary) == track_bytes(b, vocabulary)
