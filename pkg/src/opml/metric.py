"""Mahalanobis transform updates at O(d^2) per step.

A metric is a plain ``(d, d)`` float64 array ``L``; distances are
``||L (x - y)||^2``. Updates never modify their input matrix.
"""
import json
import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "UpdateScalars", "StepOutcome", "SingularUpdateError", "DegenerateTripletError",
    "identity_metric", "transformed_distance", "hinge_loss", "triplet_margin",
    "rank2_inverse_factors", "rank2_inverse_matrix", "opml_step", "opml_update",
    "pair_update", "check_positive_definite", "metric_to_bytes", "metric_from_bytes",
    "save_metric", "load_metric", "metric_to_json", "metric_from_json",
]

SINGULAR_RTOL = 1e-12
MAGIC = b"OPMLMET1"


class SingularUpdateError(ArithmeticError):
    """``I + gamma*A`` is (numerically) singular; the update must be skipped."""


class DegenerateTripletError(ValueError):
    """Anchor coincides with its positive or negative."""


def identity_metric(d):
    return np.eye(d)


def _as_metric(L):
    L = np.asarray(L, dtype=np.float64)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise ValueError(f"metric must be square, got shape {L.shape}")
    return L


def transformed_distance(L, x, y):
    """Squared distance ``||L (x - y)||_2^2``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.shape[-1] != L.shape[1]:
        raise ValueError(f"dimension mismatch: {x.shape}, {y.shape} against metric {L.shape}")
    v = L @ (x - y)
    return float(v @ v)


def triplet_margin(L, a, b):
    """``1 + ||L a||^2 - ||L b||^2`` (the hinge argument, unclipped)."""
    La = L @ a
    Lb = L @ b
    return float(1.0 + La @ La - Lb @ Lb)


def hinge_loss(L, triplet):
    """``max(0, 1 + D(x_t, x_p) - D(x_t, x_q))``."""
    x = triplet.anchor.features
    d_pos = transformed_distance(L, x, triplet.positive.features)
    d_neg = transformed_distance(L, x, triplet.negative.features)
    return max(0.0, 1.0 + d_pos - d_neg)


@dataclass(frozen=True)
class UpdateScalars:
    eta: float
    beta: float
    gamma: float

    @property
    def denominator(self):
        return self.eta + self.beta


def rank2_inverse_factors(a, b, gamma):
    """Scalars of the closed-form inverse of ``I + gamma*(a a^T - b b^T)``.

    ``eta = 1 + tr(gamma*A)`` and ``beta = (tr(gamma*A)^2 - tr((gamma*A)^2)) / 2``,
    with both traces taken from the three inner products only.
    """
    aa = float(a @ a)
    bb = float(b @ b)
    ab = float(a @ b)
    tr = gamma * (aa - bb)
    tr_sq = gamma * gamma * (aa * aa + bb * bb - 2.0 * ab * ab)
    eta = 1.0 + tr
    beta = 0.5 * (tr * tr - tr_sq)
    if abs(eta + beta) < SINGULAR_RTOL * (1.0 + abs(eta) + abs(beta)):
        raise SingularUpdateError(f"eta + beta = {eta + beta:.3e} is numerically zero")
    return UpdateScalars(eta, beta, gamma)


def rank2_inverse_matrix(a, b, gamma):
    """Explicit ``(I + gamma*A)^{-1} = I - (eta*gamma*A - (gamma*A)^2) / (eta + beta)``."""
    s = rank2_inverse_factors(a, b, gamma)
    aa, bb, ab = a @ a, b @ b, a @ b
    A = np.outer(a, a) - np.outer(b, b)
    A2 = aa * np.outer(a, a) - ab * np.outer(a, b) - ab * np.outer(b, a) + bb * np.outer(b, b)
    return np.eye(a.shape[0]) - (s.eta * gamma * A - gamma * gamma * A2) / s.denominator


@dataclass(frozen=True)
class StepOutcome:
    L: np.ndarray
    status: str  # "active", "passive", "degenerate" or "singular"
    loss: float
    scalars: UpdateScalars = None


def opml_step(L, a, b, gamma, out=None):
    """One passive-aggressive step on the differences ``a = x_t - x_p``, ``b = x_t - x_q``.

    Without ``out`` the returned matrix is ``L`` itself (not a copy) unless
    the step is active, in which case it is a new array. Passing ``out=L``
    updates ``L`` in place.
    """
    AB = np.empty((a.shape[0], 2))
    AB[:, 0] = a
    AB[:, 1] = b
    left = L @ AB  # columns La, Lb
    La, Lb = left[:, 0], left[:, 1]
    loss = max(0.0, float(1.0 + La @ La - Lb @ Lb))
    if not a.any() or not b.any():
        return StepOutcome(L, "degenerate", loss)
    if not loss > 0.0:
        return StepOutcome(L, "passive", loss)
    try:
        s = rank2_inverse_factors(a, b, gamma)
    except SingularUpdateError:
        return StepOutcome(L, "singular", loss)

    aa, bb, ab = float(a @ a), float(b @ b), float(a @ b)
    c1 = s.eta * gamma / s.denominator
    c2 = gamma * gamma / s.denominator
    # L - c1 (La a' - Lb b') + c2 (aa La a' - ab La b' - ab Lb a' + bb Lb b')
    right = np.empty((2, L.shape[1]))
    right[0] = (c2 * aa - c1) * a - (c2 * ab) * b
    right[1] = (c1 + c2 * bb) * b - (c2 * ab) * a
    if out is None:
        out = np.empty_like(L)
    _add_rank2(L, left, right, out)
    return StepOutcome(out, "active", loss, s)


_BLOCK_ELEMS = 1 << 16


def _add_rank2(L, left, right, out):
    # out = L + left @ right, a few rows at a time so the scratch block stays in cache
    n, d = L.shape
    rows = max(1, _BLOCK_ELEMS // d)
    scratch = np.empty((min(rows, n), d))
    for lo in range(0, n, rows):
        hi = min(lo + rows, n)
        w = scratch[:hi - lo]
        np.matmul(left[lo:hi], right, out=w)
        np.add(L[lo:hi], w, out=out[lo:hi])


def opml_update(L, triplet, gamma):
    """Metric after one OPML step on ``triplet``.

    Passive steps, degenerate triplets (anchor equal to positive or negative)
    and numerically singular systems all return ``L`` unchanged.
    """
    L = _as_metric(L)
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    a, b = triplet.differences
    if a.shape[0] != L.shape[1]:
        raise ValueError(f"dimension mismatch: triplet {a.shape[0]}, metric {L.shape}")
    return opml_step(L, a, b, gamma).L


def pair_update(L, x, y, gamma1):
    """Same-class pair step ``L (I + gamma1 (x-y)(x-y)^T)^{-1}`` via Sherman-Morrison."""
    L = _as_metric(L)
    delta = np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64)
    if delta.shape[0] != L.shape[1]:
        raise ValueError(f"dimension mismatch: pair {delta.shape[0]}, metric {L.shape}")
    if gamma1 == 0 or not delta.any():
        return L.copy()
    Ld = L @ delta
    denom = 1.0 + gamma1 * float(delta @ delta)
    return L - np.outer((gamma1 / denom) * Ld, delta)


def check_positive_definite(a, b, gamma):
    """Whether ``I + gamma*(a a^T - b b^T)`` admits a Cholesky factorization."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    M = np.eye(a.shape[0]) + gamma * (np.outer(a, a) - np.outer(b, b))
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        return False
    return True


# Binary layout: 8 magic bytes, uint64 d, then d*d little-endian float64 row-major.

def metric_to_bytes(L):
    L = _as_metric(L)
    d = L.shape[0]
    return MAGIC + struct.pack("<Q", d) + np.ascontiguousarray(L, dtype="<f8").tobytes()


def metric_from_bytes(blob):
    if blob[:8] != MAGIC:
        raise ValueError("not a metric file (bad magic)")
    (d,) = struct.unpack("<Q", blob[8:16])
    body = blob[16:]
    if len(body) != 8 * d * d:
        raise ValueError(f"metric file truncated: {len(body)} bytes for d={d}")
    return np.frombuffer(body, dtype="<f8").reshape(d, d).astype(np.float64)


def save_metric(path, L):
    with open(path, "wb") as fh:
        fh.write(metric_to_bytes(L))


def load_metric(path):
    with open(path, "rb") as fh:
        return metric_from_bytes(fh.read())


def metric_to_json(L):
    L = _as_metric(L)
    return json.dumps({"d": L.shape[0], "L": L.tolist()})


def metric_from_json(text):
    d = json.loads(text)
    L = np.array(d["L"], dtype=np.float64).reshape(d["d"], d["d"])
    return L
