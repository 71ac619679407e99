import os
import sys
import tempfile
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

# must happen before backend.db builds its engine
_SCRATCH = Path(tempfile.mkdtemp(prefix="hullwalk-tests-"))
os.environ["DATABASE_URL"] = f"sqlite:///{_SCRATCH / 'hullwalk.db'}"
os.environ["HULLWALK_RUNS_DIR"] = str(_SCRATCH / "runs")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def unit_square():
    from backend.services.geometry import convex_hull

    return convex_hull([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]])


@pytest.fixture
def unit_cube():
    from backend.services.geometry import convex_hull

    corners = [[x, y, z] for x in (0.0, 1.0) for y in (0.0, 1.0) for z in (0.0, 1.0)]
    return convex_hull(corners + [[0.5, 0.5, 0.5]])
