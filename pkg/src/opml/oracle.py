"""Slow reference implementations for cross-checking the fast paths.

Nothing here is performance critical; everything is O(d^3) or worse on purpose.
"""
import numpy as np

__all__ = ["direct_inverse", "form_A", "form_pair_matrix", "direct_opml_update",
           "direct_pair_update", "naive_knn"]


def direct_inverse(M, tol=1e-13):
    """Gauss-Jordan inverse with partial pivoting.

    Raises ``numpy.linalg.LinAlgError`` when a pivot falls below
    ``tol * max|M|``.
    """
    M = np.array(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"square matrix required, got {M.shape}")
    n = M.shape[0]
    aug = np.hstack([M, np.eye(n)])
    thresh = tol * max(1.0, float(np.abs(M).max(initial=0.0)))
    for col in range(n):
        piv = col + int(np.argmax(np.abs(aug[col:, col])))
        if abs(aug[piv, col]) <= thresh:
            raise np.linalg.LinAlgError(f"singular matrix (pivot {aug[piv, col]:.3e} in column {col})")
        if piv != col:
            aug[[col, piv]] = aug[[piv, col]]
        aug[col] /= aug[col, col]
        factors = aug[:, col].copy()
        factors[col] = 0.0
        aug -= np.outer(factors, aug[col])
    return aug[:, n:]


def form_A(a, b):
    """``a a^T - b b^T`` as a dense matrix."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("dimension mismatch")
    return np.outer(a, a) - np.outer(b, b)


def form_pair_matrix(x, y):
    d = np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64)
    return np.outer(d, d)


def direct_opml_update(L, a, b, gamma):
    """``L (I + gamma A)^{-1}`` by explicit inversion."""
    n = len(a)
    return np.asarray(L) @ direct_inverse(np.eye(n) + gamma * form_A(a, b))


def direct_pair_update(L, x, y, gamma1):
    n = len(x)
    return np.asarray(L) @ direct_inverse(np.eye(n) + gamma1 * form_pair_matrix(x, y))


def naive_knn(L, train, query, k):
    """k-NN label by sorting every (distance, train index) pair.

    Ties in distance go to the earlier train sample; ties in the vote go to
    the smallest class index.
    """
    if len(train) == 0:
        raise ValueError("empty train set")
    L = np.asarray(L, dtype=np.float64)
    q = np.asarray(query, dtype=np.float64)
    scored = []
    for i, s in enumerate(train):
        v = L @ (s.features - q)
        scored.append((float(v @ v), i, s.label))
    scored.sort()
    votes = {}
    for _, _, label in scored[:min(k, len(scored))]:
        votes[label] = votes.get(label, 0) + 1
    best = max(votes.values())
    return min(label for label, n in votes.items() if n == best)
