from __future__ import annotations

import random

import pytest

from refrain.blocks import DEFAULT_VOCABULARY, track_from_frames
from refrain.consent import IntendedUse, UsageKind
from refrain.errors import InvalidRequestError
from refrain.probe import build_probe_state, random_cleared_request
from refrain.retrieval import RetrievalEngine
from refrain.verification import (
    SIGNAL_NO_ALTERNATIVE,
    GenerationRequest,
    ReferenceSelection,
    SelectionLevel,
    clears_policy,
    recommend_alternatives,
    request_digest,
    request_to_dict,
    verify,
)

from oracles import cosine_oracle, embed_oracle, song_multiset_oracle


def make_request(selections, level, use=IntendedUse.SAVE_FOR_PRIVATE_USE, **kwargs):
    return GenerationRequest(
        request_id=kwargs.pop("request_id", "req-1"),
        user_id="user-1",
        selections=tuple(selections),
        level=level,
        intended_use=use,
        **kwargs,
    )


def verify_fixture(request, catalogue, snapshot):
    return verify(request, snapshot, catalogue=catalogue, vocabulary=DEFAULT_VOCABULARY)


def user_track(frames=16):
    rng = random.Random(7)
    rows = [
        {spec.name: [rng.uniform(-1, 1) for _ in range(spec.dim)] for spec in DEFAULT_VOCABULARY}
        for _ in range(frames)
    ]
    return track_from_frames(250, rows, DEFAULT_VOCABULARY)


# ---------------------------------------------------------------------------
# verify: fixture scenarios
# ---------------------------------------------------------------------------


def test_song_level_commercial_on_open_song_clears(fixture_catalogue, fixture_snapshot):
    request = make_request(
        [ReferenceSelection(17189)], SelectionLevel.SONG, IntendedUse.COMMERCIAL_DISTRIBUTION
    )
    outcome = verify_fixture(request, fixture_catalogue, fixture_snapshot)
    assert outcome.cleared
    assert outcome.snapshot_id == fixture_snapshot.snapshot_id
    assert outcome.failures() == []


def test_parameter_level_on_song_only_reference_blocks(fixture_catalogue, fixture_snapshot):
    request = make_request(
        [ReferenceSelection(17193, frozenset({"melody"}))],
        SelectionLevel.PARAMETER,
        IntendedUse.SAVE_FOR_PRIVATE_USE,
    )
    outcome = verify_fixture(request, fixture_catalogue, fixture_snapshot)
    assert not outcome.cleared
    assert (17193, "usage", "not-granted") in outcome.failures()


def test_commercial_distribution_blocked_by_policy(fixture_catalogue, fixture_snapshot):
    request = make_request(
        [ReferenceSelection(17194)], SelectionLevel.SONG, IntendedUse.COMMERCIAL_DISTRIBUTION
    )
    outcome = verify_fixture(request, fixture_catalogue, fixture_snapshot)
    assert not outcome.cleared
    assert outcome.failures() == [(17194, "distribution", "not-granted")]


def test_temporal_level_maps_to_audio_usage(fixture_catalogue, fixture_snapshot):
    track = user_track()
    request = make_request(
        [ReferenceSelection(17189, frozenset({"timbre.guitar"}), 1.0, (0, 4))],
        SelectionLevel.TEMPORAL,
        IntendedUse.SAVE_FOR_PRIVATE_USE,
        user_track=track,
    )
    outcome = verify_fixture(request, fixture_catalogue, fixture_snapshot)
    assert outcome.cleared  # 17189 grants audio-level inference
    request_b = make_request(
        [ReferenceSelection(17194, frozenset({"timbre.guitar"}), 1.0, (0, 4))],
        SelectionLevel.TEMPORAL,
        IntendedUse.SAVE_FOR_PRIVATE_USE,
        user_track=track,
    )
    outcome_b = verify_fixture(request_b, fixture_catalogue, fixture_snapshot)
    assert (17194, "usage", "not-granted") in outcome_b.failures()


def test_mixed_verdict_lists_every_failure(fixture_catalogue, fixture_snapshot):
    request = make_request(
        [ReferenceSelection(17189), ReferenceSelection(17196)],
        SelectionLevel.SONG,
        IntendedUse.NON_COMMERCIAL_DISTRIBUTION,
    )
    outcome = verify_fixture(request, fixture_catalogue, fixture_snapshot)
    assert not outcome.cleared
    assert set(outcome.failures()) == {
        (17196, "usage", "not-granted"),
        (17196, "distribution", "not-granted"),
    }
    cleared_rows = [c for c in outcome.per_selection if c.permitted]
    assert [c.song_id for c in cleared_rows] == [17189]


def test_soundness_cleared_is_recheckable(fixture_catalogue, fixture_registry):
    # every Cleared outcome can be re-validated from its recorded snapshot id
    snapshot = fixture_registry.take_snapshot()
    request = make_request([ReferenceSelection(17189)], SelectionLevel.SONG)
    outcome = verify_fixture(request, fixture_catalogue, snapshot)
    assert outcome.cleared
    assert outcome.snapshot_id == snapshot.snapshot_id
    for check in outcome.per_selection:
        assert snapshot.check_usage(check.song_id, UsageKind.SONG_LEVEL_INFERENCE).permitted
        assert snapshot.check_distribution(check.song_id, request.intended_use).permitted


# ---------------------------------------------------------------------------
# structural validation
# ---------------------------------------------------------------------------


def test_invalid_requests_raise_not_block(fixture_catalogue, fixture_snapshot):
    cases = [
        make_request([], SelectionLevel.SONG),
        make_request([ReferenceSelection(17189, weight=0.0)], SelectionLevel.SONG),
        make_request([ReferenceSelection(55555)], SelectionLevel.SONG),
        make_request([ReferenceSelection(17189, frozenset({"melody"}))], SelectionLevel.SONG),
        make_request([ReferenceSelection(17189)], SelectionLevel.PARAMETER),
        make_request([ReferenceSelection(17189, frozenset({"no-such-block"}))], SelectionLevel.PARAMETER),
        make_request([ReferenceSelection(17189, frozenset({"melody"}))], SelectionLevel.AUDIO),
        make_request(
            [ReferenceSelection(17189, frozenset({"melody"}))],
            SelectionLevel.TEMPORAL,
            user_track=user_track(),
        ),
        make_request(
            [ReferenceSelection(17189, frozenset({"melody"}), 1.0, (4, 2))],
            SelectionLevel.TEMPORAL,
            user_track=user_track(),
        ),
        make_request(
            [ReferenceSelection(17189, frozenset({"melody"}), 1.0, (0, 999))],
            SelectionLevel.TEMPORAL,
            user_track=user_track(),
        ),
        make_request(
            [ReferenceSelection(17189, frozenset({"melody"}), 1.0, (0, 4))],
            SelectionLevel.SONG,
        ),
        make_request([ReferenceSelection(17189)], SelectionLevel.SONG, user_track=user_track()),
        make_request([ReferenceSelection(17189)], SelectionLevel.SONG, seed=-1),
        make_request([ReferenceSelection(17189)], SelectionLevel.SONG, request_id=""),
    ]
    for request in cases:
        with pytest.raises(InvalidRequestError):
            verify_fixture(request, fixture_catalogue, fixture_snapshot)


def test_conflicting_temporal_segments_rejected(fixture_catalogue, fixture_snapshot):
    track = user_track()
    request = make_request(
        [
            ReferenceSelection(17189, frozenset({"melody"}), 1.0, (0, 4)),
            ReferenceSelection(17194, frozenset({"melody"}), 1.0, (2, 6)),
        ],
        SelectionLevel.TEMPORAL,
        user_track=track,
    )
    with pytest.raises(InvalidRequestError, match="conflicting segments"):
        verify_fixture(request, fixture_catalogue, fixture_snapshot)


def test_identical_segments_on_shared_block_are_fine(fixture_catalogue, fixture_snapshot):
    track = user_track()
    request = make_request(
        [
            ReferenceSelection(17189, frozenset({"melody"}), 1.0, (2, 6)),
            ReferenceSelection(17189, frozenset({"melody", "rhythm"}), 1.0, (2, 6)),
        ],
        SelectionLevel.TEMPORAL,
        user_track=track,
    )
    outcome = verify_fixture(request, fixture_catalogue, fixture_snapshot)
    assert outcome.cleared


# ---------------------------------------------------------------------------
# alternatives
# ---------------------------------------------------------------------------


def blocked_parameter_outcome(fixture_catalogue, fixture_snapshot, use=IntendedUse.SAVE_FOR_PRIVATE_USE):
    request = make_request(
        [ReferenceSelection(17193, frozenset({"melody"}))], SelectionLevel.PARAMETER, use
    )
    outcome = verify_fixture(request, fixture_catalogue, fixture_snapshot)
    assert not outcome.cleared
    return request, outcome


def test_alternatives_only_from_parameter_cleared_songs(fixture_catalogue, fixture_snapshot):
    request, outcome = blocked_parameter_outcome(fixture_catalogue, fixture_snapshot)
    engine = RetrievalEngine(fixture_catalogue)
    sets = recommend_alternatives(
        request, outcome, fixture_snapshot, catalogue=fixture_catalogue, engine=engine, k=5
    )
    assert len(sets) == 1
    alt = sets[0]
    assert alt.song_id == 17193
    candidates = [song_id for song_id, _ in alt.items]
    assert candidates and set(candidates) <= {17189, 17194}
    # every recommendation passes a single-selection verify at the same level and use
    for song_id in candidates:
        single = make_request(
            [ReferenceSelection(song_id, frozenset({"melody"}))], SelectionLevel.PARAMETER
        )
        assert verify_fixture(single, fixture_catalogue, fixture_snapshot).cleared


def test_alternatives_empty_when_everything_revoked(fixture_catalogue, fixture_registry):
    for song_id in fixture_catalogue.song_ids():
        if song_id != 17193:
            fixture_registry.revoke(song_id)
    snapshot = fixture_registry.take_snapshot()
    request, outcome = blocked_parameter_outcome(fixture_catalogue, snapshot)
    engine = RetrievalEngine(fixture_catalogue)
    sets = recommend_alternatives(
        request, outcome, snapshot, catalogue=fixture_catalogue, engine=engine, k=5
    )
    assert sets[0].items == ()
    assert sets[0].signal == SIGNAL_NO_ALTERNATIVE


def test_alternatives_require_blocked_outcome(fixture_catalogue, fixture_snapshot):
    request = make_request([ReferenceSelection(17189)], SelectionLevel.SONG)
    outcome = verify_fixture(request, fixture_catalogue, fixture_snapshot)
    engine = RetrievalEngine(fixture_catalogue)
    with pytest.raises(InvalidRequestError):
        recommend_alternatives(
            request, outcome, fixture_snapshot, catalogue=fixture_catalogue, engine=engine, k=3
        )


def test_alternatives_match_filter_then_rank_oracle(vocabulary):
    catalogue, registry, rng = build_probe_state(321, n_songs=120)
    snapshot = registry.take_snapshot()
    engine = RetrievalEngine(catalogue)
    level, use = SelectionLevel.PARAMETER, IntendedUse.NON_COMMERCIAL_DISTRIBUTION
    blocked = [s for s in catalogue.song_ids() if not clears_policy(snapshot, s, level, use)]
    assert blocked, "probe state should contain at least one blocked song"
    blocked_id = blocked[0]
    request = make_request(
        [ReferenceSelection(blocked_id, frozenset({"melody"}))], level, use
    )
    outcome = verify(request, snapshot, catalogue=catalogue, vocabulary=vocabulary)
    sets = recommend_alternatives(request, outcome, snapshot, catalogue=catalogue, engine=engine, k=7)
    # independent oracle: filter compliant songs, rank by cosine to the blocked song
    blocked_embedding = embed_oracle(song_multiset_oracle(catalogue.get_song(blocked_id)), 64)
    scored = [
        (cosine_oracle(blocked_embedding, embed_oracle(song_multiset_oracle(song), 64)), song.song_id)
        for song in catalogue.songs()
        if song.song_id != blocked_id and clears_policy(snapshot, song.song_id, level, use)
    ]
    scored.sort(key=lambda pair: (-pair[0], pair[1]))
    expected = [(song_id, score) for score, song_id in scored[:7]]
    assert list(sets[0].items) == expected


# ---------------------------------------------------------------------------
# canonical request form
# ---------------------------------------------------------------------------


def test_request_digest_is_stable_and_sensitive(fixture_catalogue):
    request = make_request([ReferenceSelection(17189)], SelectionLevel.SONG)
    assert request_digest(request) == request_digest(request)
    other = make_request([ReferenceSelection(17189, weight=2.0)], SelectionLevel.SONG)
    assert request_digest(request) != request_digest(other)
    doc = request_to_dict(request)
    assert doc["selections"][0]["song_id"] == 17189
    assert doc["user_track"] is None


def test_random_cleared_requests_all_levels_clear(vocabulary):
    catalogue, registry, rng = build_probe_state(777, n_songs=30)
    snapshot = registry.take_snapshot()
    made = {level: 0 for level in SelectionLevel}
    trials = 0
    while trials < 60:
        request = random_cleared_request(rng, catalogue, snapshot, f"req-{trials}", vocabulary=vocabulary)
        if request is None:
            continue
        trials += 1
        outcome = verify(request, snapshot, catalogue=catalogue, vocabulary=vocabulary)
        assert outcome.cleared, (request.level, outcome.failures())
        made[request.level] += 1
    assert all(count > 0 for count in made.values()), made
