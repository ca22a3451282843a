"""One-pass triplet construction from a labeled stream.

Only the latest sample of every class is kept, so memory is ``c`` vectors of
length ``d`` no matter how long the stream runs, and each arrival costs O(1)
bookkeeping (plus one O(d) copy).
"""
from dataclasses import dataclass

import numpy as np

from .data import Sample
from .rng import SplitMix64

__all__ = ["Triplet", "ClassLatestBuffer", "batch_observe_oracle"]


@dataclass(frozen=True, eq=False)
class Triplet:
    anchor: Sample
    positive: Sample
    negative: Sample

    def __post_init__(self):
        if self.anchor.label != self.positive.label:
            raise ValueError("anchor and positive must share a class")
        if self.anchor.label == self.negative.label:
            raise ValueError("negative must come from another class")

    @property
    def differences(self):
        """``(x_t - x_p, x_t - x_q)``."""
        x = self.anchor.features
        return x - self.positive.features, x - self.negative.features


class ClassLatestBuffer:
    """Latest sample per class, in order of first appearance."""

    def __init__(self, seed=0, dim=None):
        self.rng = seed if isinstance(seed, SplitMix64) else SplitMix64(seed)
        self.dim = dim
        self._latest = {}

    def __len__(self):
        return len(self._latest)

    def __contains__(self, label):
        return label in self._latest

    @property
    def known_classes(self):
        return len(self._latest)

    def labels(self):
        return list(self._latest)

    def latest(self, label):
        return self._latest[label]

    def stored_vectors(self):
        return [s.features for s in self._latest.values()]

    def _check_dim(self, sample):
        d = sample.features.shape[0]
        if self.dim is None:
            self.dim = d
        elif d != self.dim:
            raise ValueError(f"sample {sample.stream_index} has dimension {d}, buffer holds {self.dim}")

    def store(self, sample):
        """Record ``sample`` as its class's latest without forming a triplet."""
        self._check_dim(sample)
        copy = Sample(np.array(sample.features, dtype=np.float64), sample.label, sample.stream_index)
        self._latest[sample.label] = copy
        return copy

    def observe(self, sample):
        """Store ``sample`` and return the triplet it anchors, or ``None``.

        A triplet needs an earlier sample of the same class (the positive) and
        at least one other known class; the negative class is drawn uniformly
        from the known classes other than the anchor's.
        """
        self._check_dim(sample)
        positive = self._latest.get(sample.label)
        triplet = None
        if positive is not None and len(self._latest) >= 2:
            others = [k for k in self._latest if k != sample.label]
            negative = self._latest[others[self.rng.randbelow(len(others))]]
            anchor = Sample(np.array(sample.features, dtype=np.float64), sample.label, sample.stream_index)
            triplet = Triplet(anchor, positive, negative)
        self.store(sample)
        return triplet


def batch_observe_oracle(history, sample):
    """Every triplet anchored at ``sample`` that full history allows.

    Positives run over past same-class samples (outer loop, history order),
    negatives over past samples of any other class (inner loop).
    """
    same = [h for h in history if h.label == sample.label]
    other = [h for h in history if h.label != sample.label]
    return [Triplet(sample, p, q) for p in same for q in other]
