"""Deterministic feature-space generation with provenance by construction.

The composer never synthesizes from opaque model state: every attributed
block of the output is a fixed-order convex mix of the reference blocks
named in the manifest, so the manifest *is* the proof of what shaped what.
Blocks no reference covers are either seeded noise (flagged unattributed)
or, at audio/temporal level, the user's own material left byte-identical.

Determinism contract: contributors mix in ascending song id, per-element
sums run in that fixed order, unattributed noise comes from a counter-based
SHA-256 stream keyed by (seed, block, frame), and the output id hashes the
little-endian track bytes plus the canonical manifest JSON. Identical
inputs give byte-identical outputs on any platform.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .blocks import BlockVocabulary, FeatureTrack, track_bytes, track_to_frames, validate_track
from .canon import canonical_json, digest, sha256_hex
from .catalogue import Catalogue, Song
from .consent import ConsentSnapshot, IntendedUse
from .errors import InvalidRequestError
from .retrieval import Prompt, RetrievalEngine
from .verification import (
    GenerationRequest,
    ReferenceSelection,
    SelectionLevel,
    UnspecifiedPolicy,
    clears_policy,
    validate_request,
)

ENGINE_VERSION = "refrain-engine/1.0"

ORIGIN_ATTRIBUTED = "attributed"
ORIGIN_UNATTRIBUTED = "unattributed"
ORIGIN_USER_MATERIAL = "user_material"

SOURCE_USER = "user"
SOURCE_PROCEDURAL = "procedural"

BLEND_REPLACE = "replace"
BLEND_MIX = "mix"

_WEIGHT_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Contributor:
    song_id: int
    weight: float
    source: str  # user | procedural

    def to_dict(self) -> dict:
        return {"song_id": self.song_id, "weight": self.weight, "source": self.source}


@dataclass(frozen=True)
class BlockAssignment:
    block: str
    origin: str  # attributed | unattributed | user_material
    importance: float
    contributors: tuple[Contributor, ...] = ()
    segment: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        if self.origin == ORIGIN_ATTRIBUTED:
            total = math.fsum(c.weight for c in self.contributors)
            if not self.contributors or abs(total - 1.0) > _WEIGHT_TOLERANCE:
                raise ValueError(f"block {self.block!r}: contributor weights must sum to 1")
        elif self.contributors:
            raise ValueError(f"block {self.block!r}: {self.origin} blocks take no contributors")

    def to_dict(self) -> dict:
        return {
            "block": self.block,
            "origin": self.origin,
            "importance": self.importance,
            "contributors": [c.to_dict() for c in self.contributors],
            "segment": list(self.segment) if self.segment is not None else None,
        }


@dataclass(frozen=True)
class ProvenanceManifest:
    """Machine-verifiable record of which references shaped which blocks."""

    request_id: str
    snapshot_id: str
    seed: int
    level: SelectionLevel
    intended_use: IntendedUse
    assignments: tuple[BlockAssignment, ...]
    attributed_fraction: float
    engine_version: str
    blend_mode: str
    blend_alpha: float
    warnings: tuple[str, ...] = ()

    def song_ids(self) -> frozenset[int]:
        return frozenset(c.song_id for a in self.assignments for c in a.contributors)

    def assignment(self, block: str) -> BlockAssignment:
        for entry in self.assignments:
            if entry.block == block:
                return entry
        raise KeyError(block)

    def to_dict(self) -> dict:
        return {
            "request_id": self.request_id,
            "snapshot_id": self.snapshot_id,
            "seed": self.seed,
            "level": self.level.value,
            "intended_use": self.intended_use.value,
            "assignments": [a.to_dict() for a in self.assignments],
            "attributed_fraction": self.attributed_fraction,
            "engine_version": self.engine_version,
            "blend_mode": self.blend_mode,
            "blend_alpha": self.blend_alpha,
            "warnings": list(self.warnings),
        }

    def digest(self) -> str:
        return digest(self.to_dict())


@dataclass(frozen=True)
class GenerationOutput:
    output_id: str
    feature_track: FeatureTrack
    manifest: ProvenanceManifest

    def to_doc(self) -> dict:
        """Self-contained output document; the manifest is embedded, never detached."""
        return {
            "output_id": self.output_id,
            "manifest": self.manifest.to_dict(),
            "frame_duration_ms": self.feature_track.frame_duration_ms,
            "frames": track_to_frames(self.feature_track),
        }


def compute_output_id(track: FeatureTrack, manifest: ProvenanceManifest, vocabulary: BlockVocabulary) -> str:
    return sha256_hex(track_bytes(track, vocabulary) + canonical_json(manifest.to_dict()))


def unconditional_noise(seed: int, block: str, frame: int, dim: int) -> np.ndarray:
    """Counter-based pseudo-random vector in [-1, 1), keyed by (seed, block, frame)."""
    prefix = (
        b"refrain-unconditional"
        + seed.to_bytes(8, "little")
        + len(block).to_bytes(2, "little")
        + block.encode("utf-8")
        + frame.to_bytes(8, "little")
    )
    values: list[float] = []
    counter = 0
    while len(values) < dim:
        block_bytes = hashlib.sha256(prefix + counter.to_bytes(4, "little")).digest()
        for offset in range(0, 32, 8):
            if len(values) >= dim:
                break
            word = int.from_bytes(block_bytes[offset : offset + 8], "little")
            values.append((word / 2.0**64) * 2.0 - 1.0)
        counter += 1
    return np.array(values, dtype=np.float64)


def _normalized_contributors(weights_by_song: Mapping[int, float], source_by_song: Mapping[int, str]) -> tuple[Contributor, ...]:
    ids = sorted(weights_by_song)
    total = math.fsum(weights_by_song[song_id] for song_id in ids)
    return tuple(
        Contributor(song_id, weights_by_song[song_id] / total, source_by_song[song_id]) for song_id in ids
    )


SongResolver = Callable[[int], Song]


class GenerationEngine:
    """Resolves block assignments, composes tracks, and emits manifests."""

    def __init__(
        self,
        catalogue: Catalogue,
        vocabulary: BlockVocabulary,
        *,
        retrieval: RetrievalEngine | None = None,
        blend_mode: str = BLEND_REPLACE,
        blend_alpha: float = 1.0,
        engine_version: str = ENGINE_VERSION,
    ):
        if blend_mode not in (BLEND_REPLACE, BLEND_MIX):
            raise ValueError(f"unknown blend mode {blend_mode!r}")
        if not 0.0 <= blend_alpha <= 1.0:
            raise ValueError("blend_alpha must lie in [0, 1]")
        self._catalogue = catalogue
        self._vocabulary = vocabulary
        self._retrieval = retrieval
        self.blend_mode = blend_mode
        self.blend_alpha = blend_alpha
        self.engine_version = engine_version

    # -- assignment resolution ------------------------------------------------

    def resolve_assignments(
        self,
        request: GenerationRequest,
        snapshot: ConsentSnapshot,
        *,
        prompt: Prompt | None = None,
    ) -> tuple[tuple[BlockAssignment, ...], tuple[int, ...], tuple[str, ...]]:
        """Map every block to its contributors.

        Song level: every block mixes all selections. Parameter level:
        blocks mix the selections naming them; uncovered blocks follow the
        request's unspecified policy (noise, or a procedurally retrieved
        compliant reference). Audio/temporal level: uncovered blocks stay
        user material.

        Returns (assignments in vocabulary order, procedural song ids,
        warnings).
        """
        validate_request(request, catalogue=self._catalogue, vocabulary=self._vocabulary)
        selections_for: dict[str, list[ReferenceSelection]] = {name: [] for name in self._vocabulary.names}
        for sel in request.selections:
            blocks = sel.function_blocks or frozenset(self._vocabulary.names)
            for block in blocks:
                selections_for[block].append(sel)

        procedural_pick: int | None = None
        procedural_searched = False
        warnings: list[str] = []
        assignments: list[BlockAssignment] = []
        procedural_ids: list[int] = []

        for spec in self._vocabulary:
            chosen = selections_for[spec.name]
            if chosen:
                weights: dict[int, float] = {}
                for sel in chosen:
                    weights[sel.song_id] = weights.get(sel.song_id, 0.0) + sel.weight
                contributors = _normalized_contributors(weights, {sid: SOURCE_USER for sid in weights})
                segment = chosen[0].segment if request.level is SelectionLevel.TEMPORAL else None
                assignments.append(
                    BlockAssignment(spec.name, ORIGIN_ATTRIBUTED, spec.importance, contributors, segment)
                )
                continue
            if request.level in (SelectionLevel.AUDIO, SelectionLevel.TEMPORAL):
                assignments.append(BlockAssignment(spec.name, ORIGIN_USER_MATERIAL, spec.importance))
                continue
            # Parameter level, block named by no selection.
            if request.unspecified_policy is UnspecifiedPolicy.PROCEDURAL:
                if not procedural_searched:
                    procedural_pick = self._procedural_reference(request, snapshot, prompt)
                    procedural_searched = True
                if procedural_pick is not None:
                    if procedural_pick not in procedural_ids:
                        procedural_ids.append(procedural_pick)
                    assignments.append(
                        BlockAssignment(
                            spec.name,
                            ORIGIN_ATTRIBUTED,
                            spec.importance,
                            (Contributor(procedural_pick, 1.0, SOURCE_PROCEDURAL),),
                        )
                    )
                    continue
                warnings.append(f"procedural-fallback: no compliant reference for block {spec.name!r}")
            assignments.append(BlockAssignment(spec.name, ORIGIN_UNATTRIBUTED, spec.importance))

        return tuple(assignments), tuple(procedural_ids), tuple(warnings)

    def _procedural_reference(
        self, request: GenerationRequest, snapshot: ConsentSnapshot, prompt: Prompt | None
    ) -> int | None:
        """Best-ranked song clearing parameter-level checks, never a user pick.

        Procedural references go through the same policy checks as user
        selections, against the same snapshot.
        """
        if self._retrieval is None:
            return None
        selected = frozenset(sel.song_id for sel in request.selections)
        embedding = self._retrieval.embed_text(prompt) if prompt is not None else None
        if embedding is None or not np.any(embedding):
            union_tags: set[str] = set()
            for song_id in sorted(selected):
                union_tags |= self._catalogue.get_song(song_id).tags
            embedding = self._retrieval.encoder.embed(sorted(union_tags))
        for song_id, _score in self._retrieval.ranked_candidates(embedding, exclude=selected):
            if clears_policy(snapshot, song_id, SelectionLevel.PARAMETER, request.intended_use):
                return song_id
        return None

    # -- composition ------------------------------------------------------------

    def _mixture(
        self,
        assignment: BlockAssignment,
        positions: np.ndarray,
        tracks: Mapping[int, FeatureTrack],
    ) -> np.ndarray:
        """Fixed-order convex mix of reference frames at the given positions.

        References shorter than the target are looped via modulo indexing.
        """
        dim = self._vocabulary.dim(assignment.block)
        acc = np.zeros((len(positions), dim), dtype=np.float64)
        for contributor in assignment.contributors:  # ascending song id
            ref = tracks[contributor.song_id].blocks[assignment.block]
            rows = ref[positions % ref.shape[0]]
            acc = acc + contributor.weight * rows
        return acc

    def _load_tracks(
        self, assignments: Iterable[BlockAssignment], resolver: SongResolver | None
    ) -> dict[int, FeatureTrack]:
        fetch = resolver if resolver is not None else self._catalogue.get_song
        tracks: dict[int, FeatureTrack] = {}
        for assignment in assignments:
            for contributor in assignment.contributors:
                if contributor.song_id not in tracks:
                    song = fetch(contributor.song_id)
                    validate_track(song.feature_track, self._vocabulary)
                    tracks[contributor.song_id] = song.feature_track
        return tracks

    def compose(
        self,
        assignments: Sequence[BlockAssignment],
        seed: int,
        *,
        target_len: int | None = None,
        frame_duration_ms: int | None = None,
        resolver: SongResolver | None = None,
    ) -> FeatureTrack:
        """Build a fresh track: attributed blocks are reference mixes, the rest noise."""
        if not assignments:
            raise InvalidRequestError("cannot compose from an empty assignment list")
        tracks = self._load_tracks(assignments, resolver)
        if target_len is None:
            if not tracks:
                raise InvalidRequestError("target_len is required when nothing is attributed")
            target_len = max(track.num_frames for track in tracks.values())
        if frame_duration_ms is None:
            if tracks:
                frame_duration_ms = tracks[min(tracks)].frame_duration_ms
            else:
                frame_duration_ms = 250
        positions = np.arange(target_len)
        blocks: dict[str, np.ndarray] = {}
        for assignment in assignments:
            if assignment.origin == ORIGIN_ATTRIBUTED:
                blocks[assignment.block] = self._mixture(assignment, positions, tracks)
            elif assignment.origin == ORIGIN_UNATTRIBUTED:
                dim = self._vocabulary.dim(assignment.block)
                blocks[assignment.block] = np.vstack(
                    [unconditional_noise(seed, assignment.block, t, dim) for t in range(target_len)]
                )
            else:
                raise InvalidRequestError("user-material blocks cannot appear outside audio/temporal level")
        track = FeatureTrack(frame_duration_ms, blocks)
        validate_track(track, self._vocabulary)
        return track

    def apply_to_user_track(
        self,
        request: GenerationRequest,
        assignments: Sequence[BlockAssignment],
        *,
        resolver: SongResolver | None = None,
    ) -> FeatureTrack:
        """Overlay attributed mixtures onto the user's track.

        Temporal assignments touch only their segment's frames; everything
        not overwritten stays byte-identical to the input.
        """
        if request.user_track is None:
            raise InvalidRequestError("request carries no user track")
        user = request.user_track
        tracks = self._load_tracks(assignments, resolver)
        blocks = user.copy_blocks()
        for assignment in assignments:
            if assignment.origin != ORIGIN_ATTRIBUTED:
                continue
            start, end = assignment.segment if assignment.segment is not None else (0, user.num_frames)
            positions = np.arange(start, end)
            mixture = self._mixture(assignment, positions, tracks)
            if self.blend_mode == BLEND_REPLACE:
                blocks[assignment.block][start:end] = mixture
            else:
                alpha = self.blend_alpha
                blocks[assignment.block][start:end] = (
                    alpha * mixture + (1.0 - alpha) * blocks[assignment.block][start:end]
                )
        return FeatureTrack(user.frame_duration_ms, blocks)

    # -- end to end --------------------------------------------------------------

    def generate(
        self,
        request: GenerationRequest,
        snapshot: ConsentSnapshot,
        *,
        prompt: Prompt | None = None,
        target_len: int | None = None,
        resolver: SongResolver | None = None,
    ) -> GenerationOutput:
        """Compose the output and its manifest. Caller must have verified the request."""
        assignments, _procedural, warnings = self.resolve_assignments(request, snapshot, prompt=prompt)
        if request.level in (SelectionLevel.AUDIO, SelectionLevel.TEMPORAL):
            feature_track = self.apply_to_user_track(request, assignments, resolver=resolver)
        else:
            feature_track = self.compose(
                assignments, request.seed, target_len=target_len, resolver=resolver
            )
        manifest = ProvenanceManifest(
            request_id=request.request_id,
            snapshot_id=snapshot.snapshot_id,
            seed=request.seed,
            level=request.level,
            intended_use=request.intended_use,
            assignments=assignments,
            attributed_fraction=attributed_fraction(assignments),
            engine_version=self.engine_version,
            blend_mode=self.blend_mode,
            blend_alpha=self.blend_alpha,
            warnings=warnings,
        )
        output_id = compute_output_id(feature_track, manifest, self._vocabulary)
        return GenerationOutput(output_id, feature_track, manifest)


def attributed_fraction(assignments: Sequence[BlockAssignment]) -> float:
    """Share of total block importance carried by attributed blocks."""
    total = math.fsum(a.importance for a in assignments)
    attributed = math.fsum(a.importance for a in assignments if a.origin == ORIGIN_ATTRIBUTED)
    return attributed / total


def contribution_weights(manifest: ProvenanceManifest) -> dict[int, float]:
    """Per-song share of the attributed material, importance-weighted.

    Weights sum to 1 whenever at least one block is attributed; user
    material and unattributed blocks contribute nothing. An empty map is
    legal and means a fully unconditional generation.
    """
    attributed = [a for a in manifest.assignments if a.origin == ORIGIN_ATTRIBUTED]
    if not attributed:
        return {}
    denominator = math.fsum(a.importance for a in attributed)
    weights: dict[int, float] = {}
    for assignment in attributed:
        share = assignment.importance / denominator
        for contributor in assignment.contributors:
            weights[contributor.song_id] = weights.get(contributor.song_id, 0.0) + share * contributor.weight
    return dict(sorted(weights.items()))
