from pathlib import Path

import pytest

from flexsched.topology import Network, load_topology

REPO_ROOT = Path(__file__).resolve().parent.parent
RING10_PATH = REPO_ROOT / "examples" / "ring10.topo"


@pytest.fixture(scope="session")
def ring10_text() -> str:
    return RING10_PATH.read_text()


@pytest.fixture()
def ring10(ring10_text) -> Network:
    return load_topology(ring10_text)
