import math

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from opml import oracle
from opml.metric import hinge_loss
from opml.trainer import TrainConfig, estimate_regret, regret_bound, train, train_copml, train_opml
from opml.triplets import ClassLatestBuffer

from conftest import ball, make_samples


class ForwardOnly:
    """Iterator that fails if anything asks for an element twice."""

    def __init__(self, items):
        self._it = iter(items)
        self.pulled = 0

    def __iter__(self):
        return self

    def __next__(self):
        item = next(self._it)
        self.pulled += 1
        return item

    def __getitem__(self, i):
        raise AssertionError("trainer indexed into the stream")

    def __len__(self):
        raise AssertionError("trainer asked for the stream length")


def stream(rng, n=60, d=4, classes=3):
    return make_samples(ball(rng, n, d), rng.integers(0, classes, n))


def test_config_validation():
    for bad in (dict(gamma=0.0), dict(gamma=0.25), dict(gamma2=0.3), dict(gamma1=0.0)):
        with pytest.raises(ValueError):
            TrainConfig(**bad)
    assert TrainConfig().to_dict()["gamma"] == 0.1


def test_single_class_stream_identity(rng):
    s = make_samples(ball(rng, 10, 3), [2] * 10)
    L, trace = train_opml(s, TrainConfig())
    assert_array_equal(L, np.eye(3))
    assert trace.active_updates == 0


def test_empty_stream():
    L, trace = train_opml([], TrainConfig(), dim=4)
    assert_array_equal(L, np.eye(4))
    assert len(trace) == 0


def test_matches_direct_inverse_chain(rng):
    s = make_samples(ball(rng, 8, 3), [0, 1, 0, 1, 1, 0, 0, 1])
    cfg = TrainConfig(gamma=0.1, seed=5)
    L, trace = train_opml(s, cfg)
    # replay the same triplets with explicit dense inverses
    buf = ClassLatestBuffer(5)
    ref = np.eye(3)
    for x in s:
        t = buf.observe(x)
        if t is not None and hinge_loss(ref, t) > 0:
            a, b = t.differences
            ref = oracle.direct_opml_update(ref, a, b, 0.1)
    assert trace.active_updates > 0
    assert np.linalg.norm(L - ref) < 1e-8


def test_trace_shape_and_flags(rng):
    s = stream(rng)
    L, trace = train_opml(s, TrainConfig(record_trace=True))
    assert len(trace.records) == len(s)
    assert [r.step for r in trace.records] == list(range(len(s)))
    assert sum(trace.counts.values()) == len(s)
    for r in trace.records:
        if r.flag == "active":
            assert r.loss > 0 and not math.isnan(r.eta)
        if r.flag == "passive":
            assert r.loss == 0.0


def test_passive_steps_leave_metric_unchanged(rng):
    s = stream(rng, n=80)
    _, trace = train_opml(s, TrainConfig(record_trace=True))
    prev = trace.initial_norm
    for r in trace.records:
        if r.flag in ("passive", "none", "degenerate", "singular"):
            assert r.frob_norm == prev
        prev = r.frob_norm


def test_forward_only_stream(rng):
    s = stream(rng)
    it = ForwardOnly(s)
    L1, _ = train_opml(it, TrainConfig())
    assert it.pulled == len(s)
    it = ForwardOnly(s)
    L2, _ = train_copml(it, TrainConfig())
    assert it.pulled == len(s)
    assert_array_equal(L1, train_opml(s, TrainConfig())[0])


def test_deterministic(rng):
    s = stream(rng)
    a = train_opml(s, TrainConfig(seed=3, record_trace=True))
    b = train_opml(s, TrainConfig(seed=3, record_trace=True))
    assert a[0].tobytes() == b[0].tobytes()
    assert [(r.flag, r.loss) for r in a[1].records] == [(r.flag, r.loss) for r in b[1].records]


def test_dimension_change_mid_stream(rng):
    s = stream(rng, n=5, d=3)
    bad = s + make_samples(ball(rng, 1, 4), [0])
    with pytest.raises(ValueError, match="dimension"):
        train_opml(bad, TrainConfig())
    with pytest.raises(ValueError, match="dimension"):
        train_copml(make_samples(ball(rng, 3, 3), [0, 0, 0]) + make_samples(ball(rng, 1, 4), [0]),
                    TrainConfig())


def test_copml_pure_prestage(rng):
    s = make_samples(ball(rng, 12, 3), [4] * 12)
    L, trace = train_copml(s, TrainConfig())
    assert trace.counts["pair"] == 11
    assert sum(trace.counts[f] for f in ("active", "passive", "degenerate", "singular")) == 0
    assert not np.array_equal(L, np.eye(3))


def test_copml_equals_opml_without_prestage(rng):
    X = ball(rng, 50, 4)
    labels = [0, 1] + list(rng.integers(0, 3, 48))
    s = make_samples(X, labels)
    L1, t1 = train_opml(s, TrainConfig(gamma=0.15, seed=2, record_trace=True))
    L2, t2 = train_copml(s, TrainConfig(gamma2=0.15, seed=2, record_trace=True))
    assert t2.counts["pair"] == 0
    assert L1.tobytes() == L2.tobytes()
    assert [r.flag for r in t1.records] == [r.flag for r in t2.records]


def test_copml_prestage_then_opml(rng):
    s = make_samples(ball(rng, 30, 3), [0] * 6 + list(rng.integers(0, 2, 24)))
    _, trace = train_copml(s, TrainConfig(record_trace=True))
    assert [r.flag for r in trace.records[:6]] == ["none"] + ["pair"] * 5
    assert "pair" not in [r.flag for r in trace.records[6:]]


def test_train_dispatch(rng):
    with pytest.raises(ValueError):
        train([], TrainConfig(), "lmnn")


def test_regret_self_comparison(rng):
    s = make_samples(ball(rng, 3, 2), [0, 1, 0])
    L, trace = train_opml(s, TrainConfig(record_trace=True))
    (rec,) = trace.triplet_records()
    assert estimate_regret(trace, np.eye(2)) == pytest.approx(0.0, abs=1e-15)
    assert estimate_regret(trace, L) == pytest.approx(rec.loss - hinge_loss(L, rec.triplet))


def test_regret_needs_records(rng):
    _, trace = train_opml(stream(rng), TrainConfig())
    with pytest.raises(ValueError):
        estimate_regret(trace, np.eye(4))


def test_regret_within_bound(rng):
    s = stream(rng, n=100)
    L, trace = train_opml(s, TrainConfig(record_trace=True))
    assert estimate_regret(trace, L) <= regret_bound(trace, L)
    assert regret_bound(trace) == 2 * len(trace.triplet_records()) * 3 * trace.max_frob_norm() ** 2


def test_trace_csv(tmp_path, rng):
    _, trace = train_opml(stream(rng, n=10), TrainConfig(record_trace=True))
    trace.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "step,loss,flag,eta,beta,frob_norm"
    assert len(lines) == 11
