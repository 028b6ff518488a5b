import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from blecert.deploy import Deployment  # noqa: E402


@pytest.fixture
def rng():
    return random.Random(0xB1E)


@pytest.fixture
def deployment():
    return Deployment(random.Random("fixture-world"))
