"""Service configuration: key=value files with ABD_-prefixed env overrides."""

from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Mapping

from .blocks import DEFAULT_VOCABULARY, BlockVocabulary
from .catalogue import HIERARCHY_BUILDERS
from .consent import IntendedUse
from .errors import ConfigurationError
from .ledger import Tariff

ENV_PREFIX = "ABD_"


@dataclass(frozen=True)
class ServiceConfig:
    listen_address: str = "127.0.0.1:8080"
    catalogue_path: str | None = None
    consent_path: str | None = None
    ledger_path: str | None = None
    price_private_minor: int = 100
    price_non_commercial_minor: int = 500
    price_commercial_minor: int = 2500
    royalty_rate: float = 0.7
    currency: str = "CR"
    embedding_dim: int = 64
    retrieval_k: int = 10
    blend_mode: str = "replace"
    blend_alpha: float = 1.0
    hash_algorithm: str = "sha256"
    admin_token: str | None = None
    block_vocabulary: BlockVocabulary = DEFAULT_VOCABULARY
    hierarchies: tuple[str, ...] = ("genre",)
    session_idle_seconds: int = 3600
    static_dir: str | None = None  # serve a built studio UI at /studio

    def __post_init__(self) -> None:
        if self.embedding_dim < 8:
            raise ConfigurationError("embedding_dim must be >= 8")
        if self.retrieval_k < 1:
            raise ConfigurationError("retrieval_k must be >= 1")
        if self.blend_mode not in ("replace", "mix"):
            raise ConfigurationError("blend_mode must be 'replace' or 'mix'")
        if not 0.0 <= self.blend_alpha <= 1.0:
            raise ConfigurationError("blend_alpha must lie in [0, 1]")
        if self.hash_algorithm != "sha256":
            raise ConfigurationError("hash_algorithm must be 'sha256'")
        for name in self.hierarchies:
            if name not in HIERARCHY_BUILDERS:
                raise ConfigurationError(f"unknown hierarchy {name!r}")
        self.tariff()  # validates the price ordering

    def tariff(self) -> Tariff:
        return Tariff(
            prices_minor={
                IntendedUse.SAVE_FOR_PRIVATE_USE: self.price_private_minor,
                IntendedUse.NON_COMMERCIAL_DISTRIBUTION: self.price_non_commercial_minor,
                IntendedUse.COMMERCIAL_DISTRIBUTION: self.price_commercial_minor,
            },
            royalty_rate=self.royalty_rate,
            currency=self.currency,
        )

    def host_and_port(self) -> tuple[str, int]:
        host, _, port = self.listen_address.rpartition(":")
        if not host or not port.isdigit():
            raise ConfigurationError(f"bad listen_address {self.listen_address!r} (want host:port)")
        return host, int(port)


def _parse_price(raw: str, key: str) -> int:
    """Prices are written in major units ('1.00'); stored as minor units."""
    try:
        minor = int(Decimal(raw) * 100)
    except InvalidOperation as exc:
        raise ConfigurationError(f"{key}: bad price {raw!r}") from exc
    if minor <= 0:
        raise ConfigurationError(f"{key}: price must be positive")
    return minor


_PARSERS = {
    "listen_address": str,
    "catalogue_path": str,
    "consent_path": str,
    "ledger_path": str,
    "price_private": lambda raw: _parse_price(raw, "price_private"),
    "price_non_commercial": lambda raw: _parse_price(raw, "price_non_commercial"),
    "price_commercial": lambda raw: _parse_price(raw, "price_commercial"),
    "royalty_rate": float,
    "currency": str,
    "embedding_dim": int,
    "retrieval_k": int,
    "blend_mode": str,
    "blend_alpha": float,
    "hash_algorithm": str,
    "admin_token": str,
    "block_vocabulary": BlockVocabulary.from_config_string,
    "hierarchies": lambda raw: tuple(part.strip() for part in raw.split(",") if part.strip()),
    "session_idle_seconds": int,
    "static_dir": str,
}

_KEY_TO_FIELD = {
    "price_private": "price_private_minor",
    "price_non_commercial": "price_non_commercial_minor",
    "price_commercial": "price_commercial_minor",
}


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; '#' starts a comment."""
    values: dict = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigurationError(f"config line {line_no}: expected key=value")
        key, _, raw = stripped.partition("=")
        key = key.strip().lower()
        raw = raw.strip()
        if key not in _PARSERS:
            raise ConfigurationError(f"config line {line_no}: unknown key {key!r}")
        try:
            values[_KEY_TO_FIELD.get(key, key)] = _PARSERS[key](raw)
        except (ValueError, ConfigurationError) as exc:
            raise ConfigurationError(f"config line {line_no}: {exc}") from exc
    return values


def load_config(path: str | Path | None = None, env: Mapping[str, str] | None = None) -> ServiceConfig:
    """Defaults, then the config file, then ABD_* environment overrides."""
    env = os.environ if env is None else env
    values: dict = {}
    if path is not None:
        values.update(parse_config_text(Path(path).read_text(encoding="utf-8")))
    for key, parser in _PARSERS.items():
        env_key = ENV_PREFIX + key.upper()
        if env_key in env:
            try:
                values[_KEY_TO_FIELD.get(key, key)] = parser(env[env_key])
            except (ValueError, ConfigurationError) as exc:
                raise ConfigurationError(f"{env_key}: {exc}") from exc
    known = {f.name for f in fields(ServiceConfig)}
    assert set(values) <= known
    return ServiceConfig(**values)


def config_to_text(config: ServiceConfig) -> str:
    """Render a config back to the file format (used by `refrain fixtures`)."""
    lines = [
        f"listen_address = {config.listen_address}",
        f"catalogue_path = {config.catalogue_path or ''}",
        f"consent_path = {config.consent_path or ''}",
        f"ledger_path = {config.ledger_path or ''}",
        f"price_private = {Decimal(config.price_private_minor) / 100}",
        f"price_non_commercial = {Decimal(config.price_non_commercial_minor) / 100}",
        f"price_commercial = {Decimal(config.price_commercial_minor) / 100}",
        f"royalty_rate = {config.royalty_rate}",
        f"currency = {config.currency}",
        f"embedding_dim = {config.embedding_dim}",
        f"retrieval_k = {config.retrieval_k}",
        f"blend_mode = {config.blend_mode}",
        f"blend_alpha = {config.blend_alpha}",
        f"hash_algorithm = {config.hash_algorithm}",
        f"hierarchies = {','.join(config.hierarchies)}",
        f"session_idle_seconds = {config.session_idle_seconds}",
    ]
    if config.admin_token:
        lines.append(f"admin_token = {config.admin_token}")
    if config.block_vocabulary is not DEFAULT_VOCABULARY:
        lines.append(f"block_vocabulary = {config.block_vocabulary.to_config_string()}")
    return "\n".join(lines) + "\n"


def with_paths(config: ServiceConfig, **paths: str | None) -> ServiceConfig:
    return replace(config, **paths)
