import sys
from pathlib import Path

import pytest

# Make the synthetic-image helpers importable from any test module.
sys.path.insert(0, str(Path(__file__).parent))

from elsed.params import DetectorParams  # noqa: E402


@pytest.fixture
def default_params():
    return DetectorParams()


@pytest.fixture(scope="session")
def warm_detector():
    """Compile the kernels once so timing-sensitive tests start warm."""
    import elsed
    from synth import banner

    elsed.detect(banner(angle_deg=33.0))
    return True
