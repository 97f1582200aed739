import json
from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parent.parent


@pytest.fixture(scope="session")
def schemas():
    """Published JSON schemas, keyed by file stem."""
    out = {}
    for path in (REPO_ROOT / "schemas").glob("*.schema.json"):
        out[path.name.replace(".schema.json", "")] = json.loads(
            path.read_text(encoding="utf-8")
        )
    return out
