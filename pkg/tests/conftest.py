import numpy as np
import pytest

from opml.data import Dataset, Sample

_VERDICTS = []


@pytest.fixture
def verdict():
    """Record one acceptance line: ``verdict(number, passed, text)``."""
    def record(number, passed, text):
        _VERDICTS.append((number, bool(passed), text))
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, text in sorted(_VERDICTS, key=lambda v: v[0]):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {text}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_samples(X, y):
    X = np.asarray(X, dtype=np.float64)
    return [Sample(X[i], int(y[i]), i) for i in range(len(y))]


def ball(rng, n, d, radius=1.0):
    X = rng.standard_normal((n, d))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    return X * radius * rng.random((n, 1)) ** (1.0 / d)


def toy_dataset(rng, n=40, d=3, classes=2, name="toy"):
    y = np.arange(n) % classes
    X = rng.standard_normal((n, d)) + 2.0 * y[:, None]
    return Dataset(X, y, name)
