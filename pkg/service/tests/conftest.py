from __future__ import annotations

import json
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from embed_service.app import create_app

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture()
def client(tmp_path):
    app = create_app(models_dir=tmp_path / "models")
    with TestClient(app) as c:
        yield c


@pytest.fixture(scope="session")
def toy_examples() -> list[dict]:
    """Training records produced by the search engine's augment command;
    the file format is the service's fine-tune interface."""
    lines = (DATA_DIR / "toy_examples.jsonl").read_text(encoding="utf-8").splitlines()
    return [json.loads(line) for line in lines if line.strip()]
