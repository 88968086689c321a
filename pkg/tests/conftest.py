import json
from pathlib import Path

import pytest

from sievelab.core.config import DEFAULT_CATALOG, Settings
from sievelab.services.catalog import load_catalog


@pytest.fixture(scope="session")
def catalog():
    return load_catalog(DEFAULT_CATALOG)


@pytest.fixture
def quick_settings():
    """Small budget and loose tolerance for unit-level quadrature checks."""
    return Settings(budget=2**16, rtol=5e-3)


@pytest.fixture
def tiny_catalog(tmp_path: Path) -> Path:
    """Two overlapping A-family subregions, for ambiguity handling."""
    doc = {
        "version": 1,
        "regions": [
            {"name": "I", "dimension": 0, "group": "master", "where": "theta < 1/2"},
            {"name": "X1", "dimension": 0, "group": "A", "where": "theta1 < 2/5"},
            {"name": "X2", "dimension": 0, "group": "A", "where": "theta1 > 3/10"},
        ],
        "type_ii": [
            {"region": "X1", "family": "A", "ranges": [{"lo": "0", "hi": "(5 - 8*theta)/6"}]},
            {"region": "X2", "family": "A", "ranges": [{"lo": "theta2", "hi": "1/4"}]},
        ],
    }
    path = tmp_path / "tiny_catalog.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path
