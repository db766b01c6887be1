"""The drawing core must still run (slowly) when numba is unavailable."""

import subprocess
import sys
from pathlib import Path

SCRIPT = r"""
import sys
sys.modules["numba"] = None  # force the ImportError path
sys.path.insert(0, {tests!r})

import elsed._kernels as K
assert not K.HAVE_NUMBA, "numba import should have been blocked"

import elsed
from synth import banner

img = banner(size=(96, 96), center=(48.0, 48.0), angle_deg=0.0, length=50.0)
segs = elsed.detect(img)
assert len(segs) == 1, segs
assert abs(segs[0].length - 50.0) < 4.0
print("fallback ok:", segs[0].length)
"""


def test_pure_python_fallback():
    tests_dir = str(Path(__file__).parent)
    proc = subprocess.run(
        [sys.executable, "-c", SCRIPT.format(tests=tests_dir)],
        capture_output=True,
        text=True,
        timeout=300,
    )
    assert proc.returncode == 0, proc.stderr
    assert "fallback ok" in proc.stdout
