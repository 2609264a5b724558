from __future__ import annotations

import pytest

from refrain.blocks import (
    DEFAULT_VOCABULARY,
    BlockVocabulary,
    FeatureTrack,
    track_bytes,
    track_from_frames,
    track_to_frames,
    tracks_byte_equal,
    validate_track,
)
from refrain.errors import ConfigurationError


def test_default_vocabulary_shape():
    names = DEFAULT_VOCABULARY.names
    assert "genre" in names and "timbre.guitar" in names
    assert DEFAULT_VOCABULARY.dim("mood") == 8
    assert DEFAULT_VOCABULARY.dim("melody") == 16
    assert DEFAULT_VOCABULARY.total_importance() == pytest.approx(10.0)


def test_vocabulary_rejects_duplicates_and_bad_values():
    with pytest.raises(ConfigurationError):
        BlockVocabulary.from_entries([("a", 4, 1.0), ("a", 4, 1.0)])
    with pytest.raises(ConfigurationError):
        BlockVocabulary.from_entries([("a", 0, 1.0)])
    with pytest.raises(ConfigurationError):
        BlockVocabulary.from_entries([("a", 4, 0.0), ("b", 4, 0.0)])
    with pytest.raises(ConfigurationError):
        BlockVocabulary.from_entries([])


def test_vocabulary_config_string_roundtrip():
    vocab = BlockVocabulary.from_config_string("a:4:1,b:8:2.5")
    assert vocab.names == ("a", "b")
    assert vocab.dim("b") == 8
    assert vocab.importance("b") == 2.5
    assert BlockVocabulary.from_config_string(vocab.to_config_string()) == vocab


def _tiny_track():
    return FeatureTrack(100, {"a": [[1.0, 2.0], [3.0, 4.0]], "b": [[0.5], [0.25]]})


def test_track_basics():
    track = _tiny_track()
    assert track.num_frames == 2
    assert track.frame(1) == {"a": (3.0, 4.0), "b": (0.25,)}
    with pytest.raises(ValueError):
        FeatureTrack(0, {"a": [[1.0]]})
    with pytest.raises(ValueError):
        FeatureTrack(100, {})
    with pytest.raises(ValueError):
        FeatureTrack(100, {"a": [[1.0]], "b": [[1.0], [2.0]]})


def test_track_arrays_are_frozen():
    track = _tiny_track()
    with pytest.raises(ValueError):
        track.blocks["a"][0, 0] = 9.0
    writable = track.copy_blocks()
    writable["a"][0, 0] = 9.0  # copies are editable
    assert track.blocks["a"][0, 0] == 1.0


def test_validate_track_against_vocabulary():
    vocab = BlockVocabulary.from_entries([("a", 2, 1.0), ("b", 1, 1.0)])
    validate_track(_tiny_track(), vocab)
    with pytest.raises(ValueError):
        validate_track(_tiny_track(), BlockVocabulary.from_entries([("a", 2, 1.0)]))
    with pytest.raises(ValueError):
        validate_track(_tiny_track(), BlockVocabulary.from_entries([("a", 3, 1.0), ("b", 1, 1.0)]))


def test_track_frames_roundtrip():
    vocab = BlockVocabulary.from_entries([("a", 2, 1.0), ("b", 1, 1.0)])
    track = _tiny_track()
    frames = track_to_frames(track)
    rebuilt = track_from_frames(track.frame_duration_ms, frames, vocab)
    assert tracks_byte_equal(track, rebuilt, vocab)


def test_track_from_frames_validates():
    vocab = BlockVocabulary.from_entries([("a", 2, 1.0)])
    with pytest.raises(ValueError):
        track_from_frames(100, [], vocab)
    with pytest.raises(ValueError):
        track_from_frames(100, [{"a": [1.0]}], vocab)  # wrong dim
    with pytest.raises(ValueError):
        track_from_frames(100, [{"z": [1.0, 2.0]}], vocab)  # wrong name


def test_track_bytes_is_canonical_little_endian():
    import struct

    vocab = BlockVocabulary.from_entries([("a", 1, 1.0)])
    track = FeatureTrack(100, {"a": [[1.5]]})
    raw = track_bytes(track, vocab)
    # header: duration, frame count; payload: one float64
    assert raw[:16] == (100).to_bytes(8, "little") + (1).to_bytes(8, "little")
    assert raw[16:] == struct.pack("<d", 1.5)
    assert len(raw) == 24
