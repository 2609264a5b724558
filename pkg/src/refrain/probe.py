"""Self-check utility: regenerate outputs from seeded inputs and print ids.

Running ``python -m refrain.probe --trials N --master-seed S`` builds a
deterministic random catalogue and consent state, derives N cleared
requests spanning all four selection levels, and prints one output id per
line. Two separate processes given the same arguments must print identical
lines; any divergence is a determinism bug.

The generators here are pure :mod:`random`-based (no global hashing order,
no platform-dependent numerics), so they are also reusable as input
generators for property tests.
"""

from __future__ import annotations

import argparse
import json
import random

from .blocks import DEFAULT_VOCABULARY, BlockVocabulary
from .catalogue import Catalogue
from .consent import ConsentRegistry, ConsentSnapshot, IntendedUse, UsageKind
from .generation import GenerationEngine
from .retrieval import RetrievalEngine
from .verification import (
    GenerationRequest,
    ReferenceSelection,
    SelectionLevel,
    UnspecifiedPolicy,
    clears_policy,
    verify,
)

_WORDS = (
    "amber", "basalt", "cinder", "delta", "ember", "fjord", "garnet", "harbor",
    "iris", "juniper", "kestrel", "lumen", "meadow", "nocturne", "opal", "prairie",
    "quartz", "reverie", "saffron", "tundra", "umber", "velvet", "willow", "zephyr",
)
_GENRES = {
    "rock": ("indie rock", "garage", "post rock"),
    "jazz": ("swing", "bebop", "fusion"),
    "electronic": ("ambient", "techno", "idm"),
    "folk": ("americana", "bluegrass",),
}


def _random_track(rng: random.Random, vocabulary: BlockVocabulary, min_frames: int = 4, max_frames: int = 12) -> list[dict]:
    frames = rng.randint(min_frames, max_frames)
    return [
        {spec.name: [rng.uniform(-1.0, 1.0) for _ in range(spec.dim)] for spec in vocabulary}
        for _ in range(frames)
    ]


def random_catalogue_records(
    rng: random.Random,
    n_songs: int,
    vocabulary: BlockVocabulary = DEFAULT_VOCABULARY,
    *,
    n_artists: int | None = None,
    zero_tracks: bool = False,
) -> list[dict]:
    """``zero_tracks`` keeps tracks to one all-zero frame for metadata-only
    workloads (search/retrieval) where big catalogues would otherwise be
    dominated by feature bytes."""
    ids = sorted(rng.sample(range(10_000, 99_999), n_songs))
    n_artists = n_artists or max(1, n_songs // 3)
    zero_frame = [{spec.name: [0.0] * spec.dim for spec in vocabulary}]
    records = []
    for song_id in ids:
        genre = rng.choice(sorted(_GENRES))
        subgenre = rng.choice(_GENRES[genre])
        tags = {subgenre, genre} | {rng.choice(_WORDS) for _ in range(rng.randint(1, 4))}
        artist_no = rng.randrange(n_artists)
        records.append(
            {
                "song_id": song_id,
                "title": f"{rng.choice(_WORDS).title()} {rng.choice(_WORDS).title()}",
                "artist_id": f"a-{artist_no:03d}",
                "artist_name": f"{rng.choice(_WORDS).title()} {rng.choice(_WORDS).title()}",
                "album": f"{rng.choice(_WORDS).title()} LP",
                "genre_path": [genre, subgenre],
                "tags": sorted(tags),
                "release_year": rng.randint(1960, 2024),
                "frame_duration_ms": 250,
                "frames": zero_frame if zero_tracks else _random_track(rng, vocabulary),
            }
        )
    return records


def random_consent(rng: random.Random, registry: ConsentRegistry, song_ids: list[int], *, open_bias: float = 0.5) -> None:
    """Seed grants with a permissive bias so cleared requests always exist."""
    for song_id in song_ids:
        fully_open = rng.random() < open_bias
        usage = {
            kind: True if fully_open else rng.random() < 0.5
            for kind in UsageKind
        }
        distribution = {
            use: True if fully_open else rng.random() < 0.5
            for use in IntendedUse
        }
        if rng.random() < 0.9:  # a few songs stay recordless (opt-out default)
            registry.set_consent(song_id, usage, distribution, actor_id=f"probe-{song_id}")
            if rng.random() < 0.05:
                registry.revoke(song_id, actor_id=f"probe-{song_id}")


def build_probe_state(
    master_seed: int, *, n_songs: int = 24, vocabulary: BlockVocabulary = DEFAULT_VOCABULARY
) -> tuple[Catalogue, ConsentRegistry, random.Random]:
    rng = random.Random(master_seed)
    catalogue = Catalogue(vocabulary)
    records = random_catalogue_records(rng, n_songs, vocabulary)
    report = catalogue.ingest(json.dumps(r) + "\n" for r in records)
    assert report.loaded == n_songs, report.rejections
    registry = ConsentRegistry(catalogue.__contains__)
    random_consent(rng, registry, catalogue.song_ids())
    return catalogue, registry, rng


def _eligible(snapshot: ConsentSnapshot, catalogue: Catalogue, level: SelectionLevel, use: IntendedUse) -> list[int]:
    return [s for s in catalogue.song_ids() if clears_policy(snapshot, s, level, use)]


def random_cleared_request(
    rng: random.Random,
    catalogue: Catalogue,
    snapshot: ConsentSnapshot,
    request_id: str,
    *,
    vocabulary: BlockVocabulary = DEFAULT_VOCABULARY,
    level: SelectionLevel | None = None,
) -> GenerationRequest | None:
    """Draw a request guaranteed to clear verification, or None if the
    consent state offers no eligible songs at the drawn level."""
    level = level or rng.choice(list(SelectionLevel))
    use = rng.choice(list(IntendedUse))
    eligible = _eligible(snapshot, catalogue, level, use)
    if not eligible:
        return None
    names = list(vocabulary.names)
    user_track = None
    selections: list[ReferenceSelection] = []
    if level is SelectionLevel.SONG:
        chosen = rng.sample(eligible, min(len(eligible), rng.randint(1, 3)))
        selections = [ReferenceSelection(s, frozenset(), rng.randint(1, 8) / 2.0) for s in chosen]
    elif level is SelectionLevel.PARAMETER:
        chosen = rng.sample(eligible, min(len(eligible), rng.randint(1, 3)))
        selections = [
            ReferenceSelection(
                s,
                frozenset(rng.sample(names, rng.randint(1, 3))),
                rng.randint(1, 8) / 2.0,
            )
            for s in chosen
        ]
    else:
        track_frames = _random_track(rng, vocabulary, 8, 16)
        from .blocks import track_from_frames

        user_track = track_from_frames(250, track_frames, vocabulary)
        chosen = rng.sample(eligible, min(len(eligible), rng.randint(1, 3)))
        if level is SelectionLevel.AUDIO:
            selections = [
                ReferenceSelection(
                    s,
                    frozenset(rng.sample(names, rng.randint(1, 3))),
                    rng.randint(1, 8) / 2.0,
                )
                for s in chosen
            ]
        else:  # temporal: disjoint blocks per selection so segments never conflict
            shuffled = names[:]
            rng.shuffle(shuffled)
            per = max(1, len(shuffled) // len(chosen))
            n = user_track.num_frames
            for i, song_id in enumerate(chosen):
                blocks = shuffled[i * per : (i + 1) * per] or [shuffled[-1]]
                start = rng.randrange(0, n)
                end = rng.randrange(start + 1, n + 1)
                selections.append(
                    ReferenceSelection(song_id, frozenset(blocks), rng.randint(1, 8) / 2.0, (start, end))
                )
    policy = rng.choice(list(UnspecifiedPolicy))
    return GenerationRequest(
        request_id=request_id,
        user_id=f"probe-user-{rng.randrange(8)}",
        selections=tuple(selections),
        level=level,
        intended_use=use,
        unspecified_policy=policy,
        seed=rng.getrandbits(63),
        user_track=user_track,
    )


def run_probe(master_seed: int, trials: int) -> list[str]:
    vocabulary = DEFAULT_VOCABULARY
    catalogue, registry, rng = build_probe_state(master_seed, vocabulary=vocabulary)
    retrieval = RetrievalEngine(catalogue)
    engine = GenerationEngine(catalogue, vocabulary, retrieval=retrieval)
    snapshot = registry.take_snapshot()
    output_ids: list[str] = []
    produced = 0
    while produced < trials:
        request = random_cleared_request(rng, catalogue, snapshot, f"probe-{produced}", vocabulary=vocabulary)
        if request is None:
            continue
        outcome = verify(request, snapshot, catalogue=catalogue, vocabulary=vocabulary)
        assert outcome.cleared, outcome.failures()
        output = engine.generate(request, snapshot)
        output_ids.append(output.output_id)
        produced += 1
    return output_ids


def main(argv: list[str] | None = None) -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trials", type=int, default=100)
    parser.add_argument("--master-seed", type=int, default=1)
    args = parser.parse_args(argv)
    for i, output_id in enumerate(run_probe(args.master_seed, args.trials)):
        print(f"{i} {output_id}")


if __name__ == "__main__":
    main()
