from __future__ import annotations

import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from refrain.blocks import DEFAULT_VOCABULARY
from refrain.fixtures import build_demo_catalogue, build_demo_registry


@pytest.fixture(scope="session")
def vocabulary():
    return DEFAULT_VOCABULARY


@pytest.fixture()
def fixture_catalogue():
    return build_demo_catalogue()


@pytest.fixture()
def fixture_registry(fixture_catalogue):
    return build_demo_registry(fixture_catalogue)


@pytest.fixture()
def fixture_snapshot(fixture_registry):
    return fixture_registry.take_snapshot()


def jsonl(records) -> list[str]:
    return [json.dumps(record) + "\n" for record in records]
