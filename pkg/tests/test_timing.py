import numpy as np

from opml.timing import RATIO_WINDOW, REFERENCE_MS, measure_update_times, scaling_ratios, synthetic_stream


def test_synthetic_stream_in_unit_ball():
    s = synthetic_stream(100, 7, seed=1)
    assert len(s) == 100
    assert max(np.linalg.norm(x.features) for x in s) <= 1.0
    assert {x.label for x in s} <= set(range(5))


def test_small_dimension_positive_finite():
    res = measure_update_times([21], samples=50, repeats=1)
    assert 0 < res.median_ms[21] < 1000


def test_scaling_ratio_pairs():
    r = scaling_ratios({128: 1.0, 256: 4.0, 512: 17.0, 300: 2.0}, min_dim=256)
    assert r == {(256, 512): 17.0 / 4.0}
    assert REFERENCE_MS[310] == 1.7 and RATIO_WINDOW == (3.0, 6.0)
