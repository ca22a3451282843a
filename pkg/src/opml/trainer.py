"""Online training loops (OPML and its cold-start variant COPML)."""
import csv
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .metric import hinge_loss, opml_step, pair_update
from .triplets import ClassLatestBuffer, Triplet

__all__ = ["TrainConfig", "StepRecord", "TrainTrace", "train_opml", "train_copml",
           "train", "estimate_regret", "regret_bound", "TRIPLET_FLAGS"]

TRIPLET_FLAGS = ("active", "passive", "degenerate", "singular")


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of a run.

    ``gamma`` drives OPML; COPML uses ``gamma1`` for same-class pair steps and
    ``gamma2`` for its triplet steps. The triplet regularizers must lie in
    (0, 1/4) so that every update system stays positive definite.
    """

    gamma: float = 0.1
    gamma1: float = 0.1
    gamma2: float = 0.1
    seed: int = 0
    record_trace: bool = False

    def __post_init__(self):
        for name in ("gamma", "gamma2"):
            v = getattr(self, name)
            if not 0.0 < v < 0.25:
                raise ValueError(f"{name}={v} outside (0, 1/4)")
        if not self.gamma1 > 0.0:
            raise ValueError(f"gamma1={self.gamma1} must be positive")

    def to_dict(self):
        return {"gamma": self.gamma, "gamma1": self.gamma1, "gamma2": self.gamma2,
                "seed": self.seed, "record_trace": self.record_trace}


@dataclass
class StepRecord:
    step: int
    flag: str  # "none", "pair" or one of TRIPLET_FLAGS
    loss: float = math.nan
    eta: float = math.nan
    beta: float = math.nan
    active_count: int = 0
    frob_norm: float = math.nan
    triplet: Triplet = None


@dataclass
class TrainTrace:
    dim: int = 0
    gamma: float = math.nan
    records: list = field(default_factory=list)
    counts: Counter = field(default_factory=Counter)
    initial_norm: float = math.nan

    def __len__(self):
        return len(self.records)

    @property
    def active_updates(self):
        return self.counts["active"]

    def triplet_records(self):
        return [r for r in self.records if r.triplet is not None]

    def max_frob_norm(self):
        norms = [r.frob_norm for r in self.records if not math.isnan(r.frob_norm)]
        return max([self.initial_norm] + norms)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "loss", "flag", "eta", "beta", "frob_norm"])
            for r in self.records:
                w.writerow([r.step, _fmt(r.loss), r.flag, _fmt(r.eta), _fmt(r.beta), _fmt(r.frob_norm)])


def _fmt(v):
    return "" if math.isnan(v) else repr(float(v))


class _Run:
    """Mutable state shared by both loops."""

    def __init__(self, cfg, gamma):
        self.cfg = cfg
        self.gamma = gamma
        self.buffer = ClassLatestBuffer(cfg.seed)
        self.L = None
        self.trace = TrainTrace(gamma=gamma)
        self.step = 0

    def start(self, sample):
        if self.L is None:
            d = sample.features.shape[0]
            self.L = np.eye(d)
            self.trace.dim = d
            self.trace.initial_norm = math.sqrt(d)

    def record(self, flag, loss=math.nan, scalars=None, triplet=None):
        self.trace.counts[flag] += 1
        if self.cfg.record_trace:
            self.trace.records.append(StepRecord(
                self.step, flag, loss,
                scalars.eta if scalars else math.nan,
                scalars.beta if scalars else math.nan,
                self.trace.counts["active"],
                float(np.linalg.norm(self.L)),
                triplet,
            ))

    def triplet_step(self, sample):
        t = self.buffer.observe(sample)
        if t is None:
            self.record("none")
            return
        a, b = t.differences
        out = opml_step(self.L, a, b, self.gamma, out=self.L)
        self.L = out.L
        self.record(out.status, out.loss, out.scalars, t)

    def finish(self, dim_hint=None):
        if self.L is None:
            self.L = np.eye(dim_hint or 0)
        return self.L, self.trace


def train_opml(stream, cfg=TrainConfig(), dim=None):
    """One pass of OPML over ``stream`` (any iterable of samples, read once).

    Returns the learned transform (identity if no triplet ever fired) and
    the run trace. ``dim`` sets the identity size for an empty stream.
    """
    run = _Run(cfg, cfg.gamma)
    for s in stream:
        run.start(s)
        run.triplet_step(s)
        run.step += 1
    return run.finish(dim)


def train_copml(stream, cfg=TrainConfig(), dim=None):
    """COPML: same-class pair steps while one class is known, OPML afterwards.

    While the buffer knows a single class, each new sample of that class is
    paired with its predecessor (the stored latest sample) and updates the
    metric with ``gamma1``. From the second class on, steps are OPML steps
    with ``gamma2``; a first sample of a new class only extends the buffer.
    """
    run = _Run(cfg, cfg.gamma2)
    buf = run.buffer
    for s in stream:
        run.start(s)
        if buf.known_classes == 1 and s.label in buf:
            prev = buf.latest(s.label)
            if prev.features.shape != s.features.shape:
                raise ValueError(f"sample {s.stream_index} has dimension {s.features.shape[0]}, expected {prev.features.shape[0]}")
            run.L = pair_update(run.L, prev.features, s.features, cfg.gamma1)
            buf.store(s)
            run.record("pair")
        else:
            run.triplet_step(s)
        run.step += 1
    return run.finish(dim)


def train(stream, cfg, algo="opml", dim=None):
    if algo == "opml":
        return train_opml(stream, cfg, dim)
    if algo == "copml":
        return train_copml(stream, cfg, dim)
    raise ValueError(f"unknown algorithm {algo!r}")


def estimate_regret(trace, L_star, stream=None):
    """Cumulative loss of the online iterates minus that of ``L_star``.

    The online loss at each triplet step is the hinge loss recorded before
    that step's update.
    """
    recs = trace.triplet_records()
    if not recs and sum(trace.counts[f] for f in TRIPLET_FLAGS):
        raise ValueError("trace has no triplet records; train with record_trace=True")
    return float(sum(r.loss - hinge_loss(L_star, r.triplet) for r in recs))


def regret_bound(trace, L_star=None, alpha=1.0, xi=1.0, radius=1.0):
    """``2 T (alpha + xi + 1) R^2 U^2`` with ``U`` the largest observed Frobenius norm."""
    T = len(trace.triplet_records())
    U = trace.max_frob_norm()
    if L_star is not None:
        U = max(U, float(np.linalg.norm(L_star)))
    return 2.0 * T * (alpha + xi + 1.0) * radius ** 2 * U ** 2
