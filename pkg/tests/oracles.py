"""Independent reimplementations used as test oracles.

Everything here is deliberately written with different code paths from the
package (reduce-based hashing, scalar loops, struct packing) so the tests
compare two independent derivations of the same specified math, not the
implementation against itself.
"""

from __future__ import annotations

import functools
import hashlib
import math
import struct

# ---------------------------------------------------------------------------
# Hashed-tag embedding
# ---------------------------------------------------------------------------


def fnv1a64_oracle(data: bytes) -> int:
    return functools.reduce(
        lambda h, b: ((h ^ b) * 0x100000001B3) & (2**64 - 1), data, 0xCBF29CE484222325
    )


def embed_oracle(tags: list[str], dim: int) -> list[float]:
    counts = [0] * dim
    for tag in tags:
        counts[fnv1a64_oracle(tag.encode("utf-8")) % dim] += 1
    norm = math.sqrt(math.fsum(float(c) ** 2 for c in counts))
    if norm == 0.0:
        return [0.0] * dim
    return [float(c) / norm for c in counts]


def tokenize_oracle(text: str) -> list[str]:
    tokens, current = [], []
    for ch in text.lower():
        if ch.isascii() and (ch.isdigit() or "a" <= ch <= "z"):
            current.append(ch)
        elif current:
            tokens.append("".join(current))
            current = []
    if current:
        tokens.append("".join(current))
    return tokens


def song_multiset_oracle(song) -> list[str]:
    return (
        sorted(song.tags)
        + [part.lower() for part in song.genre_path]
        + tokenize_oracle(song.artist_name)
    )


def cosine_oracle(a: list[float], b: list[float]) -> float:
    return math.fsum([x * y for x, y in zip(a, b)])


def rank_oracle(
    prompt_embedding: list[float],
    song_embeddings: dict[int, list[float]],
    exclude: set[int] = frozenset(),
) -> list[tuple[int, float]]:
    """Exhaustive cosine ranking, score desc then song id asc."""
    scored = [
        (song_id, cosine_oracle(prompt_embedding, emb))
        for song_id, emb in song_embeddings.items()
        if song_id not in exclude
    ]
    return sorted(scored, key=lambda item: (-item[1], item[0]))


# ---------------------------------------------------------------------------
# Lexical search
# ---------------------------------------------------------------------------


def search_oracle(songs, query: str, limit: int) -> list[tuple[int, str]]:
    """Brute-force scan applying the stated ranking: prefix class 0 beats
    substring class 1, ties ascending song id, field priority
    title > artist > album > tag for the report."""
    if query == "":
        return []
    needle = query.lower()
    rows = []
    for song in songs:
        candidates = [
            ("title", song.title),
            ("artist", song.artist_name),
            ("album", song.album),
        ] + [("tag", tag) for tag in sorted(song.tags)]
        best_class, best_field = None, None
        for field, text in candidates:
            lowered = text.lower()
            if lowered.startswith(needle):
                klass = 0
            elif needle in lowered:
                klass = 1
            else:
                continue
            if best_class is None or klass < best_class:
                best_class, best_field = klass, field
        if best_class is not None:
            rows.append((best_class, song.song_id, best_field))
    rows.sort()
    return [(song_id, field) for _, song_id, field in rows[:limit]]


# ---------------------------------------------------------------------------
# Recombination (exact attribution)
# ---------------------------------------------------------------------------


def pack_double(value: float) -> bytes:
    return struct.pack("<d", value)


def noise_oracle(seed: int, block: str, frame: int, dim: int) -> list[float]:
    prefix = (
        b"refrain-unconditional"
        + struct.pack("<Q", seed)
        + struct.pack("<H", len(block))
        + block.encode("utf-8")
        + struct.pack("<Q", frame)
    )
    raw = b""
    counter = 0
    while len(raw) < dim * 8:
        raw += hashlib.sha256(prefix + struct.pack("<I", counter)).digest()
        counter += 1
    words = struct.unpack(f"<{dim}Q", raw[: dim * 8])
    return [(w / 2.0**64) * 2.0 - 1.0 for w in words]


def mixture_oracle(
    contributors: list[dict],
    block: str,
    positions: range,
    reference_frames: dict[int, list[dict[str, list[float]]]],
    dim: int,
) -> list[list[float]]:
    """Fixed-order convex mix; references loop via modulo indexing."""
    rows = []
    for t in positions:
        row = [0.0] * dim
        for contributor in contributors:  # manifest order = ascending song id
            frames = reference_frames[contributor["song_id"]]
            ref_row = frames[t % len(frames)][block]
            weight = contributor["weight"]
            for i in range(dim):
                row[i] = row[i] + weight * ref_row[i]
        rows.append(row)
    return rows


def recombine_oracle(
    manifest: dict,
    output_frames: list[dict[str, list[float]]],
    reference_frames: dict[int, list[dict[str, list[float]]]],
    user_frames: list[dict[str, list[float]]] | None,
    dims: dict[str, int],
) -> list[str]:
    """Reconstruct every block from the manifest alone and compare bytes.

    Returns a list of human-readable violations; empty means the output is
    exactly explained by its manifest.
    """
    violations: list[str] = []
    n = len(output_frames)
    user_based = manifest["level"] in ("audio", "temporal")
    blend_mode = manifest["blend_mode"]
    alpha = manifest["blend_alpha"]
    for assignment in manifest["assignments"]:
        block = assignment["block"]
        dim = dims[block]
        origin = assignment["origin"]
        if origin == "attributed":
            segment = assignment["segment"]
            start, end = (segment if segment is not None else (0, n))
            mix = mixture_oracle(assignment["contributors"], block, range(start, end), reference_frames, dim)
            for offset, t in enumerate(range(start, end)):
                for i in range(dim):
                    expected = mix[offset][i]
                    if user_based and blend_mode == "mix":
                        expected = alpha * expected + (1.0 - alpha) * user_frames[t][block][i]
                    if pack_double(output_frames[t][block][i]) != pack_double(expected):
                        violations.append(f"{block}[{t}][{i}]: attributed mismatch")
            if user_based:
                for t in list(range(0, start)) + list(range(end, n)):
                    if any(
                        pack_double(output_frames[t][block][i]) != pack_double(user_frames[t][block][i])
                        for i in range(dim)
                    ):
                        violations.append(f"{block}[{t}]: outside segment not user material")
        elif origin == "unattributed":
            for t in range(n):
                noise = noise_oracle(manifest["seed"], block, t, dim)
                for i in range(dim):
                    if pack_double(output_frames[t][block][i]) != pack_double(noise[i]):
                        violations.append(f"{block}[{t}][{i}]: unattributed mismatch")
        elif origin == "user_material":
            for t in range(n):
                if any(
                    pack_double(output_frames[t][block][i]) != pack_double(user_frames[t][block][i])
                    for i in range(dim)
                ):
                    violations.append(f"{block}[{t}]: user material modified")
        else:
            violations.append(f"{block}: unknown origin {origin}")
    return violations


# ---------------------------------------------------------------------------
# Compensation arithmetic
# ---------------------------------------------------------------------------


def largest_remainder_oracle(total: int, shares: dict) -> dict:
    keys = sorted(shares)
    denom = math.fsum(shares[k] for k in keys)
    exact = {k: total * (shares[k] / denom) for k in keys}
    result = {k: math.floor(exact[k]) for k in keys}
    leftovers = sorted(keys, key=lambda k: (-(exact[k] - result[k]), k))
    for k in leftovers[: total - sum(result.values())]:
        result[k] += 1
    return result
