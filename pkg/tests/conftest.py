import shutil
from importlib import resources
from pathlib import Path

import numpy as np
import pytest

DATA = Path(str(resources.files("ccmsynth") / "data"))


@pytest.fixture
def mini_spec_path():
    return DATA / "mini.spec"


@pytest.fixture
def demo_design_path():
    return DATA / "demo_design.txt"


@pytest.fixture
def mini_copy(tmp_path):
    """The mini problem copied into a scratch directory so it can be edited."""
    for name in ("mini.spec", "mini_path.csv", "demo_design.txt"):
        shutil.copy(DATA / name, tmp_path / name)
    return tmp_path


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
