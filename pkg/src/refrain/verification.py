"""Request validation and consent gating over one snapshot.

Every generation request is checked selection by selection against the
consent snapshot it will be generated under: the request level maps to a
usage kind, the intended use maps to a distribution grant. A structurally
broken request raises :class:`InvalidRequestError`; a well-formed request
that fails policy yields a Blocked outcome with named reasons, from which
compliant alternatives can be recommended.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .blocks import BlockVocabulary, FeatureTrack, track_to_frames, validate_track
from .canon import digest
from .catalogue import Catalogue
from .consent import CheckResult, ConsentSnapshot, IntendedUse, UsageKind
from .errors import InvalidRequestError
from .retrieval import RetrievalEngine

MAX_SEED = 2**64 - 1

VERDICT_CLEARED = "cleared"
VERDICT_BLOCKED = "blocked"

SIGNAL_NO_ALTERNATIVE = "no-compliant-alternative"


class SelectionLevel(str, Enum):
    SONG = "song"
    PARAMETER = "parameter"
    AUDIO = "audio"
    TEMPORAL = "temporal"


class UnspecifiedPolicy(str, Enum):
    UNCONDITIONAL = "unconditional"
    PROCEDURAL = "procedural"


USAGE_FOR_LEVEL: dict[SelectionLevel, UsageKind] = {
    SelectionLevel.SONG: UsageKind.SONG_LEVEL_INFERENCE,
    SelectionLevel.PARAMETER: UsageKind.PARAMETER_LEVEL_INFERENCE,
    SelectionLevel.AUDIO: UsageKind.AUDIO_LEVEL_INFERENCE,
    SelectionLevel.TEMPORAL: UsageKind.AUDIO_LEVEL_INFERENCE,
}


@dataclass(frozen=True)
class ReferenceSelection:
    """One reference song, optionally scoped to blocks and a frame segment.

    An empty ``function_blocks`` set means the whole song acts as reference.
    """

    song_id: int
    function_blocks: frozenset[str] = frozenset()
    weight: float = 1.0
    segment: tuple[int, int] | None = None


@dataclass(frozen=True)
class GenerationRequest:
    request_id: str
    user_id: str
    selections: tuple[ReferenceSelection, ...]
    level: SelectionLevel
    intended_use: IntendedUse
    unspecified_policy: UnspecifiedPolicy = UnspecifiedPolicy.UNCONDITIONAL
    seed: int = 0
    user_track: FeatureTrack | None = None


def validate_request(
    request: GenerationRequest,
    *,
    catalogue: Catalogue,
    vocabulary: BlockVocabulary,
) -> None:
    """Raise InvalidRequestError listing every structural violation found."""
    reasons: list[str] = []
    if not request.request_id:
        reasons.append("request_id must be non-empty")
    if not request.selections:
        reasons.append("at least one reference selection is required")
    if not (0 <= request.seed <= MAX_SEED):
        reasons.append("seed must fit in 64 bits")
    names = set(vocabulary.names)
    for i, sel in enumerate(request.selections):
        where = f"selection {i} (song {sel.song_id})"
        if sel.song_id not in catalogue:
            reasons.append(f"{where}: song not in catalogue")
        if not sel.weight > 0:
            reasons.append(f"{where}: weight must be > 0")
        unknown = set(sel.function_blocks) - names
        if unknown:
            reasons.append(f"{where}: unknown blocks {sorted(unknown)}")
        if request.level is SelectionLevel.SONG and sel.function_blocks:
            reasons.append(f"{where}: song-level selections must not name blocks")
        if request.level is SelectionLevel.PARAMETER and not sel.function_blocks:
            reasons.append(f"{where}: parameter-level selections must name at least one block")
        if request.level is SelectionLevel.TEMPORAL and sel.segment is None:
            reasons.append(f"{where}: temporal-level selections require a segment")
        if request.level is not SelectionLevel.TEMPORAL and sel.segment is not None:
            reasons.append(f"{where}: segments are only valid at temporal level")

    if request.level in (SelectionLevel.AUDIO, SelectionLevel.TEMPORAL):
        if request.user_track is None:
            reasons.append(f"{request.level.value}-level requests require a user track")
        else:
            try:
                validate_track(request.user_track, vocabulary)
            except ValueError as exc:
                reasons.append(f"user track: {exc}")
            if request.level is SelectionLevel.TEMPORAL:
                n = request.user_track.num_frames
                for i, sel in enumerate(request.selections):
                    if sel.segment is None:
                        continue
                    start, end = sel.segment
                    if not (0 <= start < end <= n):
                        reasons.append(
                            f"selection {i} (song {sel.song_id}): segment [{start},{end}) out of range"
                        )
                reasons.extend(_segment_conflicts(request, vocabulary))
    elif request.user_track is not None:
        reasons.append("user tracks are only valid at audio/temporal level")

    if reasons:
        raise InvalidRequestError(*reasons)


def _segment_conflicts(request: GenerationRequest, vocabulary: BlockVocabulary) -> list[str]:
    """Temporal edits need one well-defined segment per block."""
    per_block: dict[str, tuple[int, int]] = {}
    conflicts: list[str] = []
    for sel in request.selections:
        if sel.segment is None:
            continue
        blocks = sel.function_blocks or frozenset(vocabulary.names)
        for block in blocks:
            seen = per_block.get(block)
            if seen is None:
                per_block[block] = sel.segment
            elif seen != sel.segment:
                conflicts.append(f"block {block!r}: conflicting segments {seen} and {sel.segment}")
    return conflicts


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SelectionCheck:
    song_id: int
    usage: CheckResult
    distribution: CheckResult

    @property
    def permitted(self) -> bool:
        return self.usage.permitted and self.distribution.permitted


@dataclass(frozen=True)
class VerificationOutcome:
    request_id: str
    snapshot_id: str
    level: SelectionLevel
    intended_use: IntendedUse
    per_selection: tuple[SelectionCheck, ...]
    verdict: str  # cleared | blocked

    @property
    def cleared(self) -> bool:
        return self.verdict == VERDICT_CLEARED

    def failures(self) -> list[tuple[int, str, str]]:
        """Every failing (song_id, check, reason) triple."""
        out = []
        for check in self.per_selection:
            if not check.usage.permitted:
                out.append((check.song_id, "usage", check.usage.reason or ""))
            if not check.distribution.permitted:
                out.append((check.song_id, "distribution", check.distribution.reason or ""))
        return out

    def to_dict(self) -> dict:
        return {
            "request_id": self.request_id,
            "snapshot_id": self.snapshot_id,
            "level": self.level.value,
            "intended_use": self.intended_use.value,
            "verdict": self.verdict,
            "per_selection": [
                {
                    "song_id": check.song_id,
                    "usage": check.usage.to_dict(),
                    "distribution": check.distribution.to_dict(),
                }
                for check in self.per_selection
            ],
        }

    def digest(self) -> str:
        return digest(self.to_dict())


def verify(
    request: GenerationRequest,
    snapshot: ConsentSnapshot,
    *,
    catalogue: Catalogue,
    vocabulary: BlockVocabulary,
) -> VerificationOutcome:
    """Check every selection's usage and distribution grant under one snapshot."""
    validate_request(request, catalogue=catalogue, vocabulary=vocabulary)
    usage_kind = USAGE_FOR_LEVEL[request.level]
    checks = tuple(
        SelectionCheck(
            song_id=sel.song_id,
            usage=snapshot.check_usage(sel.song_id, usage_kind),
            distribution=snapshot.check_distribution(sel.song_id, request.intended_use),
        )
        for sel in request.selections
    )
    verdict = VERDICT_CLEARED if all(check.permitted for check in checks) else VERDICT_BLOCKED
    return VerificationOutcome(
        request_id=request.request_id,
        snapshot_id=snapshot.snapshot_id,
        level=request.level,
        intended_use=request.intended_use,
        per_selection=checks,
        verdict=verdict,
    )


def clears_policy(
    snapshot: ConsentSnapshot, song_id: int, level: SelectionLevel, intended_use: IntendedUse
) -> bool:
    """Would a single-selection request for this song clear at this level/use?"""
    return bool(
        snapshot.check_usage(song_id, USAGE_FOR_LEVEL[level])
        and snapshot.check_distribution(song_id, intended_use)
    )


@dataclass(frozen=True)
class AlternativeSet:
    """Compliant stand-ins for one blocked reference, most similar first."""

    song_id: int
    items: tuple[tuple[int, float], ...]
    signal: str | None = None


def recommend_alternatives(
    request: GenerationRequest,
    outcome: VerificationOutcome,
    snapshot: ConsentSnapshot,
    *,
    catalogue: Catalogue,
    engine: RetrievalEngine,
    k: int,
) -> tuple[AlternativeSet, ...]:
    """For each blocked selection, rank songs that would pass both checks.

    Candidates are ordered by cosine similarity to the blocked song's
    embedding (ties by ascending song id). Similarity is used to navigate
    toward compliant choices only; it never feeds attribution.
    """
    if outcome.cleared:
        raise InvalidRequestError("alternatives are only defined for blocked outcomes")
    blocked_ids: list[int] = []
    for check in outcome.per_selection:
        if not check.permitted and check.song_id not in blocked_ids:
            blocked_ids.append(check.song_id)
    results = []
    for blocked_id in blocked_ids:
        embedding = engine.embed_song(catalogue.get_song(blocked_id))
        compliant = frozenset(
            song_id
            for song_id in catalogue.song_ids()
            if song_id != blocked_id and clears_policy(snapshot, song_id, request.level, request.intended_use)
        )
        ranked = [item for item in engine.ranked_candidates(embedding) if item[0] in compliant]
        items = tuple(ranked[:k])
        results.append(
            AlternativeSet(blocked_id, items, None if items else SIGNAL_NO_ALTERNATIVE)
        )
    return tuple(results)


# ---------------------------------------------------------------------------
# Canonical request form (digests, wire fidelity)
# ---------------------------------------------------------------------------


def request_to_dict(request: GenerationRequest) -> dict:
    doc: dict = {
        "request_id": request.request_id,
        "user_id": request.user_id,
        "level": request.level.value,
        "intended_use": request.intended_use.value,
        "unspecified_policy": request.unspecified_policy.value,
        "seed": request.seed,
        "selections": [
            {
                "song_id": sel.song_id,
                "function_blocks": sorted(sel.function_blocks),
                "weight": sel.weight,
                "segment": list(sel.segment) if sel.segment is not None else None,
            }
            for sel in request.selections
        ],
        "user_track": None,
    }
    if request.user_track is not None:
        doc["user_track"] = {
            "frame_duration_ms": request.user_track.frame_duration_ms,
            "frames": track_to_frames(request.user_track),
        }
    return doc


def request_digest(request: GenerationRequest) -> str:
    return digest(request_to_dict(request))
