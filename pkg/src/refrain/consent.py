"""Per-song usage permissions, distribution policies, and revocation.

Consent is opt-out by default: a song without a record denies everything.
Writers are serialized by the caller; readers work against immutable
snapshots so that one verification + generation flow sees a single
consistent state from start to finish.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, replace
from enum import Enum
from types import MappingProxyType
from typing import Callable, Iterable, Mapping

from .canon import digest
from .errors import NotFoundError


class UsageKind(str, Enum):
    MODEL_TRAINING = "model_training"
    SONG_LEVEL_INFERENCE = "song_level"
    PARAMETER_LEVEL_INFERENCE = "parameter_level"
    AUDIO_LEVEL_INFERENCE = "audio_level"


class IntendedUse(str, Enum):
    SAVE_FOR_PRIVATE_USE = "private"
    NON_COMMERCIAL_DISTRIBUTION = "non_commercial"
    COMMERCIAL_DISTRIBUTION = "commercial"


REASON_NO_RECORD = "no-record"
REASON_REVOKED = "revoked"
REASON_NOT_GRANTED = "not-granted"


@dataclass(frozen=True)
class CheckResult:
    permitted: bool
    reason: str | None = None  # no-record | revoked | not-granted

    def __bool__(self) -> bool:
        return self.permitted

    def to_dict(self) -> dict:
        return {"permitted": self.permitted, "reason": self.reason}


PERMITTED = CheckResult(True, None)


@dataclass(frozen=True)
class ConsentRecord:
    song_id: int
    usage_grants: Mapping[UsageKind, bool]
    distribution_grants: Mapping[IntendedUse, bool]
    version: int
    updated_at_us: int
    revoked: bool = False

    def effective_usage(self, kind: UsageKind) -> bool:
        if self.revoked:
            return False
        return bool(self.usage_grants.get(kind, False))

    def effective_distribution(self, use: IntendedUse) -> bool:
        if self.revoked:
            return False
        return bool(self.distribution_grants.get(use, False))


@dataclass(frozen=True)
class ConsentSnapshot:
    """Immutable view of all consent records at one version frontier."""

    snapshot_id: str
    records: Mapping[int, ConsentRecord]
    taken_at_us: int

    def check_usage(self, song_id: int, usage: UsageKind) -> CheckResult:
        record = self.records.get(song_id)
        if record is None:
            return CheckResult(False, REASON_NO_RECORD)
        if record.revoked:
            return CheckResult(False, REASON_REVOKED)
        if not record.usage_grants.get(usage, False):
            return CheckResult(False, REASON_NOT_GRANTED)
        return PERMITTED

    def check_distribution(self, song_id: int, use: IntendedUse) -> CheckResult:
        record = self.records.get(song_id)
        if record is None:
            return CheckResult(False, REASON_NO_RECORD)
        if record.revoked:
            return CheckResult(False, REASON_REVOKED)
        if not record.distribution_grants.get(use, False):
            return CheckResult(False, REASON_NOT_GRANTED)
        return PERMITTED


@dataclass(frozen=True)
class AuditEvent:
    at_us: int
    actor_id: str
    action: str  # set-consent | revoke
    song_id: int
    version: int


def _now_us() -> int:
    return time.time_ns() // 1_000


class ConsentRegistry:
    """Mutable consent store; one writer at a time, snapshot-isolated readers."""

    def __init__(self, song_exists: Callable[[int], bool], clock_us: Callable[[], int] = _now_us):
        self._song_exists = song_exists
        self._clock_us = clock_us
        self._records: dict[int, ConsentRecord] = {}
        self._audit: list[AuditEvent] = []

    def set_consent(
        self,
        song_id: int,
        usage_grants: Mapping[UsageKind, bool],
        distribution_grants: Mapping[IntendedUse, bool],
        *,
        actor_id: str = "system",
    ) -> int:
        """Store or update a record; returns the new version.

        A fresh grant clears any previous revocation. Versions count
        updates, not diffs: repeating an identical call still increments.
        """
        if not self._song_exists(song_id):
            raise NotFoundError(f"unknown song {song_id}")
        previous = self._records.get(song_id)
        version = (previous.version + 1) if previous else 1
        record = ConsentRecord(
            song_id=song_id,
            usage_grants=MappingProxyType({kind: bool(usage_grants.get(kind, False)) for kind in UsageKind}),
            distribution_grants=MappingProxyType(
                {use: bool(distribution_grants.get(use, False)) for use in IntendedUse}
            ),
            version=version,
            updated_at_us=self._clock_us(),
            revoked=False,
        )
        self._records[song_id] = record
        self._audit.append(AuditEvent(record.updated_at_us, actor_id, "set-consent", song_id, version))
        return version

    def revoke(self, song_id: int, *, actor_id: str = "system") -> int:
        """All effective grants become false; prior ledger entries are untouched."""
        previous = self._records.get(song_id)
        if previous is None:
            raise NotFoundError(f"no consent record for song {song_id}")
        record = replace(previous, version=previous.version + 1, updated_at_us=self._clock_us(), revoked=True)
        self._records[song_id] = record
        self._audit.append(AuditEvent(record.updated_at_us, actor_id, "revoke", song_id, record.version))
        return record.version

    def take_snapshot(self) -> ConsentSnapshot:
        """Content-addressed snapshot: equal state yields an equal snapshot id."""
        records = dict(self._records)
        state = {
            str(song_id): {
                "usage": {kind.value: record.usage_grants[kind] for kind in UsageKind},
                "distribution": {use.value: record.distribution_grants[use] for use in IntendedUse},
                "version": record.version,
                "revoked": record.revoked,
            }
            for song_id, record in records.items()
        }
        snapshot_id = "snap-" + digest(state)[:16]
        return ConsentSnapshot(snapshot_id, MappingProxyType(records), self._clock_us())

    @property
    def audit_log(self) -> tuple[AuditEvent, ...]:
        return tuple(self._audit)


# ---------------------------------------------------------------------------
# Fixture loading
# ---------------------------------------------------------------------------

_USAGE_KEYS = {
    "model_training": UsageKind.MODEL_TRAINING,
    "song_level": UsageKind.SONG_LEVEL_INFERENCE,
    "parameter_level": UsageKind.PARAMETER_LEVEL_INFERENCE,
    "audio_level": UsageKind.AUDIO_LEVEL_INFERENCE,
}
_DISTRIBUTION_KEYS = {
    "private": IntendedUse.SAVE_FOR_PRIVATE_USE,
    "non_commercial": IntendedUse.NON_COMMERCIAL_DISTRIBUTION,
    "commercial": IntendedUse.COMMERCIAL_DISTRIBUTION,
}


@dataclass(frozen=True)
class ConsentLoadReport:
    applied: int
    rejections: tuple[str, ...]


def load_consent_lines(registry: ConsentRegistry, lines: Iterable[str]) -> ConsentLoadReport:
    """Replay a JSON-lines consent fixture into the registry.

    Grant lines: ``{song_id, usage: {...}, distribution: {...}, actor_id}``.
    Revocation lines: ``{song_id, revoke: true, actor_id}``.
    """
    applied = 0
    rejections: list[str] = []
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            rejections.append(f"line {line_no}: malformed JSON ({exc.msg})")
            continue
        if not isinstance(record, dict) or not isinstance(record.get("song_id"), int):
            rejections.append(f"line {line_no}: missing integer song_id")
            continue
        song_id = record["song_id"]
        actor_id = record.get("actor_id", "system")
        try:
            if record.get("revoke"):
                registry.revoke(song_id, actor_id=actor_id)
            else:
                usage = record.get("usage", {})
                distribution = record.get("distribution", {})
                if not isinstance(usage, dict) or not isinstance(distribution, dict):
                    raise ValueError("usage/distribution must be objects")
                unknown = (set(usage) - set(_USAGE_KEYS)) | (set(distribution) - set(_DISTRIBUTION_KEYS))
                if unknown:
                    raise ValueError(f"unknown grant keys {sorted(unknown)}")
                registry.set_consent(
                    song_id,
                    {kind: bool(usage.get(key, False)) for key, kind in _USAGE_KEYS.items()},
                    {use: bool(distribution.get(key, False)) for key, use in _DISTRIBUTION_KEYS.items()},
                    actor_id=actor_id,
                )
            applied += 1
        except (NotFoundError, ValueError) as exc:
            rejections.append(f"line {line_no}: {exc}")
    return ConsentLoadReport(applied, tuple(rejections))
