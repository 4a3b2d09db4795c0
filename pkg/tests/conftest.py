from __future__ import annotations

from pathlib import Path

import pytest

ORACLE_DIR = Path(__file__).resolve().parent.parent / "fixtures" / "oracle"


@pytest.fixture(scope="session")
def oracle_corpus_path() -> Path:
    return ORACLE_DIR / "corpus.jsonl"


@pytest.fixture(scope="session")
def oracle_pairs_path() -> Path:
    return ORACLE_DIR / "pairs.jsonl"


@pytest.fixture(scope="session")
def oracle_backend_path() -> Path:
    return ORACLE_DIR / "backend.jsonl"


@pytest.fixture(scope="session")
def oracle_backend(oracle_backend_path):
    from affectseek.backends.scripted import ScriptedBackend

    return ScriptedBackend.from_file(oracle_backend_path)
