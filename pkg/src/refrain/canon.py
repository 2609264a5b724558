"""Canonical JSON serialization and hashing.

Every digest in the system (request digests, manifest digests, snapshot ids,
ledger chain hashes, output ids) is computed over the same canonical byte
form so that independent implementations can reproduce it:

- object keys sorted, compact separators, UTF-8, no ASCII escaping
- floats with an integral value serialized as integers (``1.0`` -> ``1``),
  everything else via the shortest round-trip decimal form
- NaN / infinity rejected
"""

from __future__ import annotations

import hashlib
import math
from typing import Any

import json

_MAX_SAFE_INT = 2**53


def _canonical(value: Any) -> Any:
    if isinstance(value, float):
        if math.isnan(value) or math.isinf(value):
            raise ValueError("non-finite numbers are not canonicalizable")
        if value.is_integer() and abs(value) <= _MAX_SAFE_INT:
            return int(value)
        return value
    if isinstance(value, dict):
        return {str(key): _canonical(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_canonical(item) for item in value]
    return value


def canonical_json(value: Any) -> bytes:
    return json.dumps(
        _canonical(value),
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
        allow_nan=False,
    ).encode("utf-8")


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def digest(value: Any) -> str:
    """Hex SHA-256 of the canonical JSON form of ``value``."""
    return sha256_hex(canonical_json(value))
