"""
Shared fixtures for the toolkit tests.
"""

import math
import sys
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

# Add parent directory to path
ROOT = Path(__file__).parent.parent
sys.path.insert(0, str(ROOT))

from models.calibration import PUBLISHED_GAMMA, PUBLISHED_KAPPA0  # noqa: E402
from settings import settings  # noqa: E402

SEPARATIONS = (3.0, 4.5, 6.0, 7.5)
LENGTHS = (0.5, 1.0, 1.5, 2.0)


def published_kappa(d_m: float) -> float:
    return PUBLISHED_KAPPA0 * math.exp(-PUBLISHED_GAMMA * d_m)


def synthetic_rows(delta_l_c: float = 0.0) -> list[tuple[float, float, float, float]]:
    """Noise-free (d_m, l_c, P4, P3) rows generated from the published kappa law."""
    rows = []
    for d_m in SEPARATIONS:
        for l_c in LENGTHS:
            p4 = math.cos(published_kappa(d_m) * (l_c + delta_l_c)) ** 2
            rows.append((d_m, l_c, p4, 1.0 - p4))
    return rows


@pytest.fixture
def table_path() -> Path:
    return ROOT / "data" / "table1.csv"


@pytest.fixture
def synthetic_table(tmp_path) -> Path:
    path = tmp_path / "synthetic.csv"
    pd.DataFrame(synthetic_rows(), columns=["d_m_um", "l_c_mm", "P4", "P3"]).to_csv(path, index=False)
    return path


@pytest.fixture
def synthetic_sweep(tmp_path) -> Path:
    """Sweep of a theta = 0.3 coupler with a 0.4 rad grating offset and raw powers in uW."""
    theta, offset = 0.3, 0.4
    eps = np.linspace(0.0, 2 * math.pi, 25)
    p1 = 0.5 * (1 + math.sin(2 * theta) * np.sin(eps + offset))
    frame = pd.DataFrame(
        {"dx_um": eps * 60.0 / (4 * math.pi), "epsilon_rad": eps, "P1": 80.0 * p1, "P2": 80.0 * (1 - p1)}
    )
    path = tmp_path / "sweep.csv"
    frame.to_csv(path, index=False)
    return path


@pytest.fixture
def pinned_timestamp(monkeypatch):
    monkeypatch.setattr(settings, "source_date_epoch", 0)
