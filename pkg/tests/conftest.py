import numpy as np
import pytest

from tcfusion.core import Track, TrackSet, label_of


def make_track(birth, index, node, samples):
    """samples: {scan: (x, y)} position-only states (2-D)."""
    return Track(
        label_of(birth, index, node),
        {k: np.asarray(v, dtype=float) for k, v in samples.items()},
    )


def line_track(birth, index, node, start, vel, scans):
    """Straight-line 2-D track over the given scan iterable."""
    x0 = np.asarray(start, dtype=float)
    v = np.asarray(vel, dtype=float)
    return make_track(
        birth, index, node, {k: x0 + v * (k - min(scans)) for k in scans}
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
