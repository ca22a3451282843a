"""k-NN error rates, verification ROC curves and repeated-split benchmarks."""
import csv
import json
import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .data import Dataset, SplitSpec, make_stream, normalize
from .trainer import TrainConfig, train

__all__ = ["EvalReport", "RocCurve", "knn_predict", "knn_classify", "error_rate",
           "roc_from_scores", "verification_roc", "auc_mann_whitney", "select_gamma",
           "repeated_eval", "DEFAULT_GAMMA_GRID"]

DEFAULT_GAMMA_GRID = (0.01, 0.05, 0.10, 0.20)
_CHUNK_ELEMS = 1 << 21


def _arrays(samples):
    if isinstance(samples, Dataset):
        return samples.features, samples.labels
    samples = list(samples)
    if not samples:
        return np.empty((0, 0)), np.empty(0, dtype=np.int64)
    X = np.stack([s.features for s in samples]).astype(np.float64)
    y = np.array([s.label for s in samples], dtype=np.int64)
    return X, y


def knn_predict(L, X_train, y_train, X_query, k):
    """Majority labels of the ``k`` nearest train rows under ``L``.

    Equal distances resolve to the earlier train row and split votes to the
    smallest class index.
    """
    n = X_train.shape[0]
    if n == 0:
        raise ValueError("empty train set")
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > n:
        warnings.warn(f"k={k} exceeds the {n} train samples; using k={n}", stacklevel=2)
        k = n
    L = np.asarray(L, dtype=np.float64)
    P_train = X_train @ L.T
    P_query = np.atleast_2d(X_query) @ L.T
    n_classes = int(y_train.max()) + 1
    out = np.empty(P_query.shape[0], dtype=np.int64)
    step = max(1, _CHUNK_ELEMS // max(1, n * P_train.shape[1]))
    classes = np.arange(n_classes)
    for lo in range(0, P_query.shape[0], step):
        diff = P_query[lo:lo + step, None, :] - P_train[None, :, :]
        dist = np.einsum("qnd,qnd->qn", diff, diff)
        nearest = np.argsort(dist, axis=1, kind="stable")[:, :k]
        votes = (y_train[nearest][..., None] == classes).sum(axis=1)
        out[lo:lo + step] = votes.argmax(axis=1)
    return out


def knn_classify(L, train, query, k=5):
    X, y = _arrays(train)
    return int(knn_predict(L, X, y, np.asarray(query, dtype=np.float64)[None, :], k)[0])


def error_rate(L, train, test, k=5):
    """Fraction of ``test`` misclassified by k-NN over ``train``."""
    Xtr, ytr = _arrays(train)
    Xte, yte = _arrays(test)
    if Xte.shape[0] == 0:
        raise ValueError("empty test set")
    pred = knn_predict(L, Xtr, ytr, Xte, k)
    return float(np.mean(pred != yte))


@dataclass
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float

    @property
    def points(self):
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))

    def to_json(self):
        return json.dumps({"auc": self.auc, "fpr": self.fpr.tolist(), "tpr": self.tpr.tolist(),
                           "thresholds": self.thresholds.tolist()})

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["threshold", "fpr", "tpr"])
            for row in zip(self.thresholds.tolist(), self.fpr.tolist(), self.tpr.tolist()):
                w.writerow(row)


def roc_from_scores(scores, same):
    """ROC over every distinct score threshold (``score >= t`` means "same")."""
    scores = np.asarray(scores, dtype=np.float64)
    same = np.asarray(same, dtype=bool)
    n_pos = int(same.sum())
    n_neg = same.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("need both same and different pairs")
    order = np.argsort(-scores, kind="stable")
    s, lab = scores[order], same[order]
    # last index of each run of equal scores
    cut = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tp = np.cumsum(lab)[cut]
    fp = np.cumsum(~lab)[cut]
    tpr = np.r_[0.0, tp / n_pos]
    fpr = np.r_[0.0, fp / n_neg]
    thresholds = np.r_[np.inf, s[cut]]
    auc = float(np.sum((fpr[1:] - fpr[:-1]) * (tpr[1:] + tpr[:-1]) / 2.0))
    return RocCurve(fpr, tpr, thresholds, auc)


def verification_roc(L, pairs):
    """ROC of same/different decisions from min-max normalized similarities.

    ``pairs`` holds ``(x, y, same)`` tuples; each pair scores
    ``1 - D_L(x, y) / max D_L`` over the whole pair set.
    """
    L = np.asarray(L, dtype=np.float64)
    dist = []
    same = []
    for x, y, flag in pairs:
        v = L @ (np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64))
        dist.append(float(v @ v))
        same.append(bool(flag))
    dist = np.array(dist)
    top = dist.max() if dist.size else 0.0
    scores = 1.0 - dist / top if top > 0 else np.ones_like(dist)
    return roc_from_scores(scores, same)


def auc_mann_whitney(scores, same):
    """AUC as the fraction of (same, different) pairs ordered correctly, ties 1/2."""
    scores = np.asarray(scores, dtype=np.float64)
    same = np.asarray(same, dtype=bool)
    pos, neg = scores[same], scores[~same]
    if pos.size == 0 or neg.size == 0:
        raise ValueError("need both same and different pairs")
    greater = (pos[:, None] > neg[None, :]).sum()
    ties = (pos[:, None] == neg[None, :]).sum()
    return float((greater + 0.5 * ties) / (pos.size * neg.size))


@dataclass
class EvalReport:
    dataset: str
    algo: str
    error_rate_mean: float
    error_rate_std: float
    runs: int
    per_run_errors: list
    knn_k: int
    gammas: list = field(default_factory=list)
    wall_time_total_s: float = 0.0
    samples_trained: int = 0

    @property
    def time_per_sample_ms(self):
        if not self.samples_trained:
            return 0.0
        return 1000.0 * self.wall_time_total_s / self.samples_trained

    def to_dict(self, timing=True):
        d = {
            "dataset": self.dataset, "algo": self.algo,
            "error_rate_mean": self.error_rate_mean, "error_rate_std": self.error_rate_std,
            "runs": self.runs, "knn_k": self.knn_k,
            "per_run_errors": list(self.per_run_errors), "gammas": list(self.gammas),
        }
        if timing:
            d["wall_time_total_s"] = self.wall_time_total_s
            d["time_per_sample_ms"] = self.time_per_sample_ms
        return d


def _cv_folds(n, folds):
    idx = np.arange(n)
    return [(idx[idx % folds != f], idx[idx % folds == f]) for f in range(folds)]


def select_gamma(train_set, algo, cfg, grid=DEFAULT_GAMMA_GRID, k=5, folds=3):
    """Grid value with the lowest cross-validated k-NN error on ``train_set``.

    Folds interleave by stream position, so each training part keeps the
    original arrival order. Ties go to the earlier grid entry.
    """
    best, best_err = None, np.inf
    splits = _cv_folds(len(train_set), folds)
    for g in grid:
        c = replace(cfg, gamma=g, gamma2=g, record_trace=False)
        errs = []
        for fit_idx, val_idx in splits:
            fit, val = train_set.subset(fit_idx), train_set.subset(val_idx)
            L, _ = train(fit, c, algo, dim=train_set.dim)
            errs.append(error_rate(L, fit, val, k))
        err = float(np.mean(errs))
        if err < best_err:
            best, best_err = g, err
    return best


def repeated_eval(ds, trainer="opml", cfg=TrainConfig(), runs=100, k=5,
                  split=SplitSpec(), gamma_grid=None, cv_folds=3):
    """Mean and spread of k-NN test error over ``runs`` reseeded splits.

    Run ``r`` uses split seed ``split.seed + r`` and training seed
    ``cfg.seed + r``; each split is normalized on its own train part. With a
    ``gamma_grid`` the regularizer is chosen per run by cross-validation on
    that run's train part. ``trainer="identity"`` is the Euclidean baseline.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    errors, gammas = [], []
    elapsed, n_trained = 0.0, 0
    for r in range(runs):
        tr, te = make_stream(ds, replace(split, seed=split.seed + r))
        tr, te, _ = normalize(tr, te)
        if trainer == "identity":
            L = np.eye(ds.dim)
        else:
            c = replace(cfg, seed=cfg.seed + r)
            if gamma_grid:
                g = select_gamma(tr, trainer, c, gamma_grid, k, cv_folds)
                c = replace(c, gamma=g, gamma2=g)
            gammas.append(c.gamma if trainer == "opml" else c.gamma2)
            t0 = time.perf_counter()
            L, _ = train(tr, c, trainer, dim=ds.dim)
            elapsed += time.perf_counter() - t0
            n_trained += len(tr)
        errors.append(error_rate(L, tr, te, k))
    errs = np.array(errors)
    return EvalReport(ds.name, trainer, float(errs.mean()), float(errs.std()), runs,
                      errors, k, gammas, elapsed, n_trained)
