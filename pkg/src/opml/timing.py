"""Per-sample update cost on synthetic unit-ball streams."""
import time
from dataclasses import dataclass, field

import numpy as np

from .data import Sample
from .metric import opml_step
from .triplets import ClassLatestBuffer

__all__ = ["TimingResult", "synthetic_stream", "measure_update_times", "scaling_ratios",
           "REFERENCE_MS", "RATIO_WINDOW"]

# Published per-sample OPML times (ms) at these dimensions, for context only.
REFERENCE_MS = {21: 0.026, 64: 0.023, 310: 1.7}
RATIO_WINDOW = (3.0, 6.0)


@dataclass
class TimingResult:
    median_ms: dict = field(default_factory=dict)
    samples: int = 0
    repeats: int = 0

    def ratios(self, min_dim=256):
        return scaling_ratios(self.median_ms, min_dim)


def synthetic_stream(n, d, classes=5, seed=0):
    """``n`` samples drawn uniformly from the unit ball with random labels."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    X *= rng.random((n, 1)) ** (1.0 / d)
    y = rng.integers(0, classes, n)
    return [Sample(X[i], int(y[i]), i) for i in range(n)]


def measure_update_times(dims, samples=200, repeats=5, gamma=0.1, seed=0):
    """Median wall time (ms) of one triplet construction plus metric update.

    Dimensions are interleaved within each repeat so that machine noise is
    shared across them; every repeat draws a fresh stream.
    """
    per_dim = {d: [] for d in dims}
    for r in range(repeats):
        for d in dims:
            stream = synthetic_stream(samples, d, seed=seed + 1000 * r + d)
            buf = ClassLatestBuffer(seed + r)
            L = np.eye(d)
            for s in stream:
                t0 = time.perf_counter()
                t = buf.observe(s)
                if t is not None:
                    a, b = t.differences
                    opml_step(L, a, b, gamma, out=L)
                    per_dim[d].append(time.perf_counter() - t0)
    return TimingResult({d: 1000.0 * float(np.median(v)) for d, v in per_dim.items()},
                        samples, repeats)


def scaling_ratios(median_ms, min_dim=256):
    """``time(2d) / time(d)`` for every measured doubling pair with ``d >= min_dim``."""
    out = {}
    for d in sorted(median_ms):
        if d >= min_dim and 2 * d in median_ms:
            out[(d, 2 * d)] = median_ms[2 * d] / median_ms[d]
    return out
