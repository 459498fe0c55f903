import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from frcheck.config import SamplingConfig
from frcheck.kernels import FRParams, SpaceSpec


@pytest.fixture
def worked_params():
    """n = 2, a = b = (1, 1), c = (4, 4): satisfies the T2-sufficient conditions"""
    return FRParams(n=2, a=(1, 1), b=(1, 1), c=(4, 4))


@pytest.fixture
def worked_spaces():
    return SpaceSpec(p=(2, 2), q=(2, 2), alpha=(0, 0), beta=(0, 0))


@pytest.fixture
def quick_sampling():
    """Small sample counts for tests that only need the plumbing"""
    return SamplingConfig(seed=12345, base_samples=4096, batch_size=1024, doublings=1, workers=2, inner_samples=512)


@pytest.fixture
def sampling():
    """Moderate sample counts for statistical assertions"""
    return SamplingConfig(seed=2024, base_samples=65536, batch_size=16384, doublings=2, workers=4)


@pytest.fixture
def acceptance_sampling():
    """Acceptance-scale sampling (about 10^6 samples per integral)"""
    return SamplingConfig(seed=31337, base_samples=262144, batch_size=16384, doublings=2, workers=4)


@pytest.fixture
def write_config(tmp_path):
    def write(text, name="run.ini"):
        path = tmp_path / name
        path.write_text(text)
        return str(path)
    return write
