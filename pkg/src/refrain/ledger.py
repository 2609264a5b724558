"""Append-only hash-chained event log with tiered, exactly-conserved payouts.

Money is integer minor units throughout; every split uses largest-remainder
rounding with a deterministic tie order (ascending key), so each entry
conserves its fee to the unit and the whole ledger balances exactly. The
chain hash covers a canonical serialization of every field, anchored at a
32-zero-byte genesis, which makes any byte-level tampering detectable.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping

from .canon import canonical_json
from .consent import ConsentSnapshot, IntendedUse, UsageKind
from .errors import ConfigurationError, ConservationError, RefrainError

GENESIS_PREV_HASH = "0" * 64

KIND_GENERATION = "generation"
KIND_GENERATION_BLOCKED = "generation-blocked"
KIND_VERIFICATION = "verification"
KIND_TTA_DISTRIBUTION = "tta-distribution"

TTA_POOL_LINE = "tta-pool"

# Canonical key order for the JSONL export; also the loader's strict schema.
_ENTRY_FIELDS = (
    "entry_index",
    "timestamp_us",
    "kind",
    "request_id",
    "snapshot_id",
    "outcome_digest",
    "manifest_digest",
    "output_id",
    "fee_minor",
    "payouts",
    "song_weights",
    "tta_pool_delta_minor",
    "platform_delta_minor",
    "currency",
    "hash_alg",
    "prev_hash",
    "entry_hash",
)


@dataclass(frozen=True)
class Tariff:
    """Purpose-tiered pricing: private <= non-commercial <= commercial.

    The default magnitudes are configuration placeholders; only the
    ordering is normative.
    """

    prices_minor: Mapping[IntendedUse, int]
    royalty_rate: float = 0.7
    currency: str = "CR"

    def __post_init__(self) -> None:
        p1 = self.prices_minor.get(IntendedUse.SAVE_FOR_PRIVATE_USE)
        p2 = self.prices_minor.get(IntendedUse.NON_COMMERCIAL_DISTRIBUTION)
        p3 = self.prices_minor.get(IntendedUse.COMMERCIAL_DISTRIBUTION)
        if p1 is None or p2 is None or p3 is None:
            raise ConfigurationError("tariff must price all three intended uses")
        if not (0 < p1 <= p2 <= p3):
            raise ConfigurationError("tariff prices must satisfy 0 < private <= non-commercial <= commercial")
        if not (0.0 <= self.royalty_rate <= 1.0):
            raise ConfigurationError("royalty_rate must lie in [0, 1]")


DEFAULT_TARIFF = Tariff(
    prices_minor={
        IntendedUse.SAVE_FOR_PRIVATE_USE: 100,
        IntendedUse.NON_COMMERCIAL_DISTRIBUTION: 500,
        IntendedUse.COMMERCIAL_DISTRIBUTION: 2500,
    }
)


def compute_fee(intended_use: IntendedUse, tariff: Tariff) -> int:
    return tariff.prices_minor[intended_use]


def largest_remainder(total: int, shares: Mapping) -> dict:
    """Split ``total`` integer units proportionally to ``shares``.

    Floors first, then hands the remaining units to the largest fractional
    parts, ties broken by ascending key. The result always sums to
    ``total`` exactly.
    """
    if total < 0:
        raise ValueError("cannot split a negative total")
    keys = sorted(shares)
    if not keys:
        return {}
    weight_sum = math.fsum(shares[k] for k in keys)
    if weight_sum <= 0:
        raise ValueError("shares must sum to a positive value")
    ideals = {k: total * (shares[k] / weight_sum) for k in keys}
    floors = {k: math.floor(ideals[k]) for k in keys}
    remainder = total - sum(floors.values())
    by_fraction = sorted(keys, key=lambda k: (-(ideals[k] - floors[k]), k))
    for k in by_fraction[:remainder]:
        floors[k] += 1
    assert sum(floors.values()) == total
    return floors


@dataclass(frozen=True)
class Allocation:
    payouts: Mapping[str, int]  # artist -> minor units
    tta_pool_delta_minor: int
    platform_delta_minor: int
    artist_pool_minor: int


def allocate(
    fee_minor: int,
    weights: Mapping[int, float],
    attributed_fraction: float,
    tariff: Tariff,
    song_to_artist: Mapping[int, str],
) -> Allocation:
    """Split one fee into artist payouts, the TTA pool, and the platform.

    The artist pool is ``fee * royalty_rate * attributed_fraction``; the
    remaining royalty share of the unattributed fraction accrues to the
    flat-rate pool; the platform keeps the rest. All three shares and the
    per-artist payouts round by largest remainder, so the sums are exact.
    """
    if fee_minor < 0:
        raise ValueError("fee must be >= 0")
    if not (0.0 <= attributed_fraction <= 1.0):
        raise ValueError("attributed_fraction must lie in [0, 1]")
    if weights:
        total = math.fsum(weights.values())
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"contribution weights must sum to 1 (got {total})")
    for song_id in weights:
        if song_id not in song_to_artist:
            raise ConfigurationError(f"no artist mapping for song {song_id}")

    rate = tariff.royalty_rate
    artist_share = rate * attributed_fraction if weights else 0.0
    destinations = largest_remainder(
        fee_minor,
        {
            "artists": artist_share,
            "tta": rate - artist_share,
            "platform": 1.0 - rate,
        },
    )
    artist_pool = destinations["artists"]

    payouts: dict[str, int] = {}
    if artist_pool > 0:
        per_artist: dict[str, float] = {}
        for song_id, weight in weights.items():
            artist = song_to_artist[song_id]
            per_artist[artist] = per_artist.get(artist, 0.0) + weight
        rounded = largest_remainder(artist_pool, per_artist)
        payouts = {artist: amount for artist, amount in sorted(rounded.items()) if amount > 0}
    return Allocation(
        payouts=payouts,
        tta_pool_delta_minor=destinations["tta"],
        platform_delta_minor=destinations["platform"],
        artist_pool_minor=artist_pool,
    )


# ---------------------------------------------------------------------------
# Ledger entries and the chain
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LedgerEntry:
    entry_index: int
    timestamp_us: int
    kind: str
    request_id: str
    snapshot_id: str
    outcome_digest: str | None
    manifest_digest: str | None
    output_id: str | None
    fee_minor: int
    payouts: Mapping[str, int]
    song_weights: Mapping[str, float]  # song id (stringified) -> weight
    tta_pool_delta_minor: int
    platform_delta_minor: int
    currency: str
    hash_alg: str
    prev_hash: str
    entry_hash: str

    def hashed_fields(self) -> dict:
        return {
            "entry_index": self.entry_index,
            "timestamp_us": self.timestamp_us,
            "kind": self.kind,
            "request_id": self.request_id,
            "snapshot_id": self.snapshot_id,
            "outcome_digest": self.outcome_digest,
            "manifest_digest": self.manifest_digest,
            "output_id": self.output_id,
            "fee_minor": self.fee_minor,
            "payouts": dict(sorted(self.payouts.items())),
            "song_weights": dict(sorted(self.song_weights.items())),
            "tta_pool_delta_minor": self.tta_pool_delta_minor,
            "platform_delta_minor": self.platform_delta_minor,
            "currency": self.currency,
            "hash_alg": self.hash_alg,
        }

    def to_json_line(self) -> str:
        doc = self.hashed_fields()
        doc["prev_hash"] = self.prev_hash
        doc["entry_hash"] = self.entry_hash
        ordered = {key: doc[key] for key in _ENTRY_FIELDS}
        return json.dumps(ordered, separators=(",", ":"), ensure_ascii=False)


def compute_entry_hash(prev_hash: str, fields: dict, hash_alg: str) -> str:
    if hash_alg != "sha256":
        raise ConfigurationError(f"unsupported hash algorithm {hash_alg!r}")
    return hashlib.sha256(bytes.fromhex(prev_hash) + canonical_json(fields)).hexdigest()


@dataclass(frozen=True)
class ChainCheck:
    ok: bool
    broken_at: int | None = None


def _now_us() -> int:
    return time.time_ns() // 1_000


class LedgerFormatError(RefrainError):
    """A persisted ledger line does not match the strict schema."""


class Ledger:
    """Single-writer append log; readers may scan committed entries freely."""

    def __init__(self, *, hash_alg: str = "sha256", clock_us: Callable[[], int] = _now_us, path: str | Path | None = None):
        if hash_alg != "sha256":
            raise ConfigurationError(f"unsupported hash algorithm {hash_alg!r}")
        self.hash_alg = hash_alg
        self._clock_us = clock_us
        self.path = Path(path) if path is not None else None
        self.entries: list[LedgerEntry] = []

    def head_hash(self) -> str:
        return self.entries[-1].entry_hash if self.entries else GENESIS_PREV_HASH

    def append(
        self,
        *,
        kind: str,
        request_id: str,
        snapshot_id: str,
        outcome_digest: str | None = None,
        manifest_digest: str | None = None,
        output_id: str | None = None,
        fee_minor: int = 0,
        payouts: Mapping[str, int] | None = None,
        song_weights: Mapping[int, float] | Mapping[str, float] | None = None,
        tta_pool_delta_minor: int = 0,
        platform_delta_minor: int = 0,
        currency: str = "CR",
        timestamp_us: int | None = None,
    ) -> LedgerEntry:
        """Append one event; rejects anything that does not conserve the fee."""
        payouts = dict(payouts or {})
        song_weights = {str(k): float(v) for k, v in (song_weights or {}).items()}
        total_out = sum(payouts.values()) + tta_pool_delta_minor + platform_delta_minor
        if fee_minor != total_out:
            raise ConservationError(
                f"fee {fee_minor} != payouts+tta+platform {total_out} for request {request_id}"
            )
        fields = {
            "entry_index": len(self.entries),
            "timestamp_us": self._clock_us() if timestamp_us is None else timestamp_us,
            "kind": kind,
            "request_id": request_id,
            "snapshot_id": snapshot_id,
            "outcome_digest": outcome_digest,
            "manifest_digest": manifest_digest,
            "output_id": output_id,
            "fee_minor": fee_minor,
            "payouts": dict(sorted(payouts.items())),
            "song_weights": dict(sorted(song_weights.items())),
            "tta_pool_delta_minor": tta_pool_delta_minor,
            "platform_delta_minor": platform_delta_minor,
            "currency": currency,
            "hash_alg": self.hash_alg,
        }
        prev_hash = self.head_hash()
        entry = LedgerEntry(**fields, prev_hash=prev_hash, entry_hash=compute_entry_hash(prev_hash, fields, self.hash_alg))
        self.entries.append(entry)
        if self.path is not None:
            with self.path.open("a", encoding="utf-8") as handle:
                handle.write(entry.to_json_line() + "\n")
        return entry

    def verify_chain(self) -> ChainCheck:
        """Recompute every hash from genesis; report the first mismatch.

        Entries whose hash fields are not even well formed count as broken,
        not as errors: tampering must never crash the auditor.
        """
        prev = GENESIS_PREV_HASH
        for index, entry in enumerate(self.entries):
            if entry.entry_index != index or entry.prev_hash != prev:
                return ChainCheck(False, index)
            try:
                recomputed = compute_entry_hash(entry.prev_hash, entry.hashed_fields(), entry.hash_alg)
            except (ValueError, ConfigurationError):
                return ChainCheck(False, index)
            if recomputed != entry.entry_hash:
                return ChainCheck(False, index)
            prev = entry.entry_hash
        return ChainCheck(True)

    def tta_pool_balance(self) -> int:
        return sum(entry.tta_pool_delta_minor for entry in self.entries)

    def entries_in_period(self, start_us: int | None = None, end_us: int | None = None) -> list[LedgerEntry]:
        """Half-open period [start_us, end_us)."""
        out = []
        for entry in self.entries:
            if start_us is not None and entry.timestamp_us < start_us:
                continue
            if end_us is not None and entry.timestamp_us >= end_us:
                continue
            out.append(entry)
        return out

    # -- statements --------------------------------------------------------------

    def statement(
        self,
        artist_id: str,
        song_to_artist: Mapping[int, str],
        *,
        start_us: int | None = None,
        end_us: int | None = None,
    ) -> "CompensationStatement":
        """Everything the ledger credited to one artist over a period.

        Per-entry payouts are sub-split across the artist's contributing
        songs by weight (largest remainder again), so statement lines sum
        exactly to the ledger totals.
        """
        lines: list[StatementLine] = []
        currency = None
        for entry in self.entries_in_period(start_us, end_us):
            amount = entry.payouts.get(artist_id)
            if amount is None:
                continue
            currency = currency or entry.currency
            own_songs = {
                int(song_id): weight
                for song_id, weight in entry.song_weights.items()
                if song_to_artist.get(int(song_id)) == artist_id
            }
            if own_songs:
                split = largest_remainder(amount, own_songs)
                for song_id in sorted(own_songs):
                    lines.append(
                        StatementLine(entry.entry_index, song_id, own_songs[song_id], split[song_id])
                    )
            else:  # pool distributions credit the artist without a song
                lines.append(StatementLine(entry.entry_index, None, 0.0, amount))
        return CompensationStatement(
            artist_id=artist_id,
            start_us=start_us,
            end_us=end_us,
            lines=tuple(lines),
            total_minor=sum(line.amount_minor for line in lines),
            currency=currency or "CR",
        )

    def distribute_tta_pool(
        self,
        snapshot: ConsentSnapshot,
        song_to_artist: Mapping[int, str],
        *,
        currency: str = "CR",
    ) -> dict[str, int]:
        """Split the accumulated pool equally among training-consented artists.

        With no eligible artist (or an empty pool) the balance carries
        forward and no entry is written.
        """
        balance = self.tta_pool_balance()
        if balance < 0:
            raise ConservationError("tta pool balance is negative")
        eligible = sorted(
            {
                song_to_artist[song_id]
                for song_id, record in snapshot.records.items()
                if song_id in song_to_artist and record.effective_usage(UsageKind.MODEL_TRAINING)
            }
        )
        if balance == 0 or not eligible:
            return {}
        payouts = largest_remainder(balance, {artist: 1.0 for artist in eligible})
        self.append(
            kind=KIND_TTA_DISTRIBUTION,
            request_id="tta-distribution",
            snapshot_id=snapshot.snapshot_id,
            fee_minor=0,
            payouts=payouts,
            tta_pool_delta_minor=-balance,
            platform_delta_minor=0,
            currency=currency,
        )
        return payouts

    # -- persistence ---------------------------------------------------------------

    def to_jsonl(self) -> str:
        return "".join(entry.to_json_line() + "\n" for entry in self.entries)

    @classmethod
    def from_jsonl(
        cls,
        lines: Iterable[str],
        *,
        hash_alg: str = "sha256",
        clock_us: Callable[[], int] = _now_us,
        path: str | Path | None = None,
    ) -> "Ledger":
        """Strict parse; integrity is judged later by :meth:`verify_chain`."""
        ledger = cls(hash_alg=hash_alg, clock_us=clock_us)
        for line_no, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise LedgerFormatError(f"line {line_no}: malformed JSON ({exc.msg})") from exc
            if not isinstance(doc, dict) or set(doc) != set(_ENTRY_FIELDS):
                raise LedgerFormatError(f"line {line_no}: unexpected field set")
            try:
                entry = LedgerEntry(
                    entry_index=int(doc["entry_index"]),
                    timestamp_us=int(doc["timestamp_us"]),
                    kind=str(doc["kind"]),
                    request_id=str(doc["request_id"]),
                    snapshot_id=str(doc["snapshot_id"]),
                    outcome_digest=doc["outcome_digest"],
                    manifest_digest=doc["manifest_digest"],
                    output_id=doc["output_id"],
                    fee_minor=int(doc["fee_minor"]),
                    payouts={str(k): int(v) for k, v in doc["payouts"].items()},
                    song_weights={str(k): float(v) for k, v in doc["song_weights"].items()},
                    tta_pool_delta_minor=int(doc["tta_pool_delta_minor"]),
                    platform_delta_minor=int(doc["platform_delta_minor"]),
                    currency=str(doc["currency"]),
                    hash_alg=str(doc["hash_alg"]),
                    prev_hash=str(doc["prev_hash"]),
                    entry_hash=str(doc["entry_hash"]),
                )
            except (TypeError, ValueError, AttributeError, KeyError) as exc:
                raise LedgerFormatError(f"line {line_no}: bad field value ({exc})") from exc
            ledger.entries.append(entry)
        ledger.path = Path(path) if path is not None else None
        return ledger

    @classmethod
    def load(cls, path: str | Path, *, hash_alg: str = "sha256") -> "Ledger":
        path = Path(path)
        if not path.exists():
            return cls(hash_alg=hash_alg, path=path)
        with path.open("r", encoding="utf-8") as handle:
            return cls.from_jsonl(handle, hash_alg=hash_alg, path=path)


@dataclass(frozen=True)
class StatementLine:
    entry_index: int
    song_id: int | None  # None marks a TTA pool distribution
    weight: float
    amount_minor: int


@dataclass(frozen=True)
class CompensationStatement:
    artist_id: str
    start_us: int | None
    end_us: int | None
    lines: tuple[StatementLine, ...]
    total_minor: int
    currency: str

    def to_dict(self) -> dict:
        return {
            "artist_id": self.artist_id,
            "period": {"start_us": self.start_us, "end_us": self.end_us},
            "lines": [
                {
                    "entry_index": line.entry_index,
                    "song_id": line.song_id if line.song_id is not None else TTA_POOL_LINE,
                    "weight": line.weight,
                    "amount_minor": line.amount_minor,
                }
                for line in self.lines
            ],
            "total_minor": self.total_minor,
            "currency": self.currency,
        }


def format_minor(amount_minor: int, currency: str = "CR") -> str:
    sign = "-" if amount_minor < 0 else ""
    units, cents = divmod(abs(amount_minor), 100)
    return f"{sign}{units}.{cents:02d} {currency}"
