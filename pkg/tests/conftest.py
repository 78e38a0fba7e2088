from __future__ import annotations

import json
import sys
from pathlib import Path

import pytest

HERE = Path(__file__).parent
sys.path.insert(0, str(HERE))


@pytest.fixture(scope="session")
def references() -> dict:
    """High-precision values frozen by ``generate_references.py``."""
    return json.loads((HERE / "data" / "references.json").read_text())
