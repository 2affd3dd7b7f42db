import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from radarseg import simgen


@pytest.fixture(scope="session")
def suite():
    return simgen.standard_suite()


@pytest.fixture(scope="session")
def scene_logs(suite):
    """Generated standard scenes, shared across the session."""
    out = {}
    for name, spec in suite.items():
        dets, poses = simgen.generate(spec)
        out[name] = (dets, poses, list(spec.mounts))
    return out
