"""Bundled demo catalogue and consent matrix.

Four songs with a deliberately varied permission surface: one fully open
song, one song-level-only song, one that allows parameter work but bans
commercial distribution, and one fully opted out. Feature tracks are
deterministic functions of the song id, so every process regenerates the
identical fixture bytes.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Iterable

from .blocks import DEFAULT_VOCABULARY, BlockVocabulary
from .catalogue import Catalogue
from .consent import ConsentRegistry, IntendedUse, UsageKind
from .verification import (
    GenerationRequest,
    ReferenceSelection,
    SelectionLevel,
    UnspecifiedPolicy,
)

OPEN_SONG = 17189         # everything except model training
SONG_ONLY_SONG = 17193    # song-level inference only, no distribution at all
NO_COMMERCIAL_SONG = 17194  # parameter work allowed, commercial distribution banned
OPTED_OUT_SONG = 17196    # no usage grants; private saves only

DEMO_SONGS = [
    {
        "song_id": OPEN_SONG,
        "title": "Harbor Lights",
        "artist_id": "a-17189",
        "artist_name": "Aurelia Finch",
        "album": "Night Ferries",
        "genre_path": ["rock", "indie rock"],
        "tags": ["rock", "indie rock", "guitar", "upbeat", "electric"],
        "release_year": 2011,
        "frames": 24,
    },
    {
        "song_id": SONG_ONLY_SONG,
        "title": "Glass Meridian",
        "artist_id": "a-17193",
        "artist_name": "Vela Strand",
        "album": "Oscillations",
        "genre_path": ["electronic", "ambient"],
        "tags": ["electronic", "ambient", "synth", "calm"],
        "release_year": 2018,
        "frames": 32,
    },
    {
        "song_id": NO_COMMERCIAL_SONG,
        "title": "Paper Sails",
        "artist_id": "a-17194",
        "artist_name": "The Copper Quartet",
        "album": "Dockside",
        "genre_path": ["jazz", "swing"],
        "tags": ["jazz", "swing", "brass", "warm", "guitar"],
        "release_year": 1962,
        "frames": 28,
    },
    {
        "song_id": OPTED_OUT_SONG,
        "title": "Gravel Crossing",
        "artist_id": "a-17196",
        "artist_name": "June Halloway",
        "album": "Milemarkers",
        "genre_path": ["folk", "americana"],
        "tags": ["folk", "americana", "acoustic", "road"],
        "release_year": 1994,
        "frames": 20,
    },
]

# usage: (model_training, song_level, parameter_level, audio_level)
DEMO_USAGE_GRANTS = {
    OPEN_SONG: (False, True, True, True),
    SONG_ONLY_SONG: (False, True, False, False),
    NO_COMMERCIAL_SONG: (False, True, True, False),
    OPTED_OUT_SONG: (False, False, False, False),
}

# distribution: (private, non_commercial, commercial)
DEMO_DISTRIBUTION_GRANTS = {
    OPEN_SONG: (True, True, True),
    SONG_ONLY_SONG: (False, False, False),
    NO_COMMERCIAL_SONG: (True, True, False),
    OPTED_OUT_SONG: (True, False, False),
}

FRAME_DURATION_MS = 250


def demo_frame_values(song_id: int, frame: int, block: str, dim: int) -> list[float]:
    """Deterministic per-song feature values in [-1, 1)."""
    prefix = (
        b"refrain-fixture"
        + song_id.to_bytes(8, "little")
        + frame.to_bytes(8, "little")
        + block.encode("utf-8")
    )
    values: list[float] = []
    counter = 0
    while len(values) < dim:
        digest = hashlib.sha256(prefix + counter.to_bytes(4, "little")).digest()
        for offset in range(0, 32, 8):
            if len(values) >= dim:
                break
            word = int.from_bytes(digest[offset : offset + 8], "little")
            values.append((word / 2.0**64) * 2.0 - 1.0)
        counter += 1
    return values


def demo_catalogue_records(vocabulary: BlockVocabulary = DEFAULT_VOCABULARY) -> list[dict]:
    records = []
    for meta in DEMO_SONGS:
        frames = [
            {spec.name: demo_frame_values(meta["song_id"], t, spec.name, spec.dim) for spec in vocabulary}
            for t in range(meta["frames"])
        ]
        record = {key: value for key, value in meta.items() if key != "frames"}
        record["frame_duration_ms"] = FRAME_DURATION_MS
        record["frames"] = frames
        records.append(record)
    return records


def demo_consent_records() -> list[dict]:
    records = []
    for song_id in sorted(DEMO_USAGE_GRANTS):
        training, song_level, parameter, audio = DEMO_USAGE_GRANTS[song_id]
        private, non_commercial, commercial = DEMO_DISTRIBUTION_GRANTS[song_id]
        records.append(
            {
                "song_id": song_id,
                "usage": {
                    "model_training": training,
                    "song_level": song_level,
                    "parameter_level": parameter,
                    "audio_level": audio,
                },
                "distribution": {
                    "private": private,
                    "non_commercial": non_commercial,
                    "commercial": commercial,
                },
                "actor_id": f"rights-holder-{song_id}",
            }
        )
    return records


def write_jsonl(path: str | Path, records: Iterable[dict]) -> None:
    with Path(path).open("w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")


def build_demo_catalogue(vocabulary: BlockVocabulary = DEFAULT_VOCABULARY) -> Catalogue:
    catalogue = Catalogue(vocabulary)
    report = catalogue.ingest(
        json.dumps(record, ensure_ascii=False) + "\n" for record in demo_catalogue_records(vocabulary)
    )
    assert report.loaded == len(DEMO_SONGS) and not report.rejections
    return catalogue


def build_demo_registry(catalogue: Catalogue) -> ConsentRegistry:
    registry = ConsentRegistry(catalogue.__contains__)
    for record in demo_consent_records():
        usage = record["usage"]
        distribution = record["distribution"]
        registry.set_consent(
            record["song_id"],
            {
                UsageKind.MODEL_TRAINING: usage["model_training"],
                UsageKind.SONG_LEVEL_INFERENCE: usage["song_level"],
                UsageKind.PARAMETER_LEVEL_INFERENCE: usage["parameter_level"],
                UsageKind.AUDIO_LEVEL_INFERENCE: usage["audio_level"],
            },
            {
                IntendedUse.SAVE_FOR_PRIVATE_USE: distribution["private"],
                IntendedUse.NON_COMMERCIAL_DISTRIBUTION: distribution["non_commercial"],
                IntendedUse.COMMERCIAL_DISTRIBUTION: distribution["commercial"],
            },
            actor_id=record["actor_id"],
        )
    return registry


def demo_reference_request(
    *,
    seed: int = 11,
    intended_use: IntendedUse = IntendedUse.NON_COMMERCIAL_DISTRIBUTION,
    request_id: str = "demo-guitar-voice",
) -> GenerationRequest:
    """Two-reference parameter-level request: one song drives guitar and
    voice, a second song joins on voice, all other blocks unconditional."""
    return GenerationRequest(
        request_id=request_id,
        user_id="demo-user",
        selections=(
            ReferenceSelection(OPEN_SONG, frozenset({"timbre.guitar", "timbre.voice"}), 1.0),
            ReferenceSelection(NO_COMMERCIAL_SONG, frozenset({"timbre.voice"}), 1.0),
        ),
        level=SelectionLevel.PARAMETER,
        intended_use=intended_use,
        unspecified_policy=UnspecifiedPolicy.UNCONDITIONAL,
        seed=seed,
    )
