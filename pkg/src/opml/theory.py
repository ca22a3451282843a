"""Randomized and trace-based checks of the method's stated bounds.

Every check returns a :class:`CheckResult`. Its margin is positive while the
bound holds, and a trial counts as a violation once the margin drops below
minus the check's tolerance.
"""
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import oracle
from .metric import (check_positive_definite, hinge_loss, opml_step, opml_update,
                     rank2_inverse_factors, rank2_inverse_matrix)
from .trainer import estimate_regret, regret_bound
from .triplets import ClassLatestBuffer, Triplet, batch_observe_oracle

__all__ = ["CheckResult", "BoundReport", "TripletTrial", "sample_triplet_trials",
           "check_eigen_interval", "check_system_pd", "check_inverse_residual",
           "check_update_equivalence", "check_trace_ranges", "check_batch_divergence",
           "check_loss_gap", "check_regret", "b_norm_cap", "loss_gap_bound",
           "batch_oracle_metrics", "run_suite", "CHECKS"]


@dataclass
class CheckResult:
    name: str
    trials: int
    violations: int
    worst_margin: float
    asserted: bool = True
    details: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.violations == 0 or not self.asserted


@dataclass
class BoundReport:
    checks: list = field(default_factory=list)
    parameters: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def to_json(self):
        return json.dumps({"parameters": self.parameters,
                           "checks": [asdict(c) for c in self.checks]}, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls([CheckResult(**c) for c in d["checks"]], d["parameters"])

    def table(self):
        lines = [f"{'check':<30} {'trials':>8} {'viol':>6} {'worst margin':>14}  status"]
        for c in self.checks:
            status = "PASS" if c.violations == 0 else ("FAIL" if c.asserted else "info")
            lines.append(f"{c.name:<30} {c.trials:>8} {c.violations:>6} {c.worst_margin:>14.6g}  {status}")
        return "\n".join(lines)


def _ball_point(rng, d, radius=1.0):
    v = rng.standard_normal(d)
    n = np.linalg.norm(v)
    return v / n * radius * rng.random() ** (1.0 / d) if n > 0 else v


@dataclass
class TripletTrial:
    d: int
    gamma: float
    L: np.ndarray
    a: np.ndarray
    b: np.ndarray


def sample_triplet_trials(trials, dims=(2, 64), gamma_range=(0.01, 0.24), seed=0):
    """Random active triplets of unit-ball samples with a random metric.

    Dimensions are uniform on ``dims`` (inclusive), gamma uniform on
    ``gamma_range``; the metric is a random perturbation of the identity.
    Triplets are redrawn until their hinge loss under that metric is positive.
    """
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        d = int(rng.integers(dims[0], dims[1] + 1))
        gamma = float(rng.uniform(*gamma_range))
        L = np.eye(d) + 0.3 * rng.standard_normal((d, d)) / math.sqrt(d)
        while True:
            x, p, q = (_ball_point(rng, d) for _ in range(3))
            a, b = x - p, x - q
            La, Lb = L @ a, L @ b
            if 1.0 + La @ La - Lb @ Lb > 0:
                break
        yield TripletTrial(d, gamma, L, a, b)


def _collect(name, margins, tol, trials=None, asserted=True, **details):
    margins = np.asarray(margins, dtype=np.float64)
    worst = float(margins.min()) if margins.size else math.inf
    viol = int((margins < -tol).sum())
    return CheckResult(name, int(trials if trials is not None else margins.size), viol, worst,
                       asserted, details)


def check_eigen_interval(trials=1000, d=8, seed=0, tol=1e-9):
    """Eigenvalues of ``M1 - M2`` lie in ``[-lmax(M2), lmax(M1)]`` for PSD M1, M2."""
    rng = np.random.default_rng(seed)
    margins = []
    for _ in range(trials):
        G1 = rng.standard_normal((int(rng.integers(1, d + 1)), d))
        G2 = rng.standard_normal((int(rng.integers(1, d + 1)), d))
        M1, M2 = G1.T @ G1, G2.T @ G2
        lam = np.linalg.eigvalsh(M1 - M2)
        hi1 = np.linalg.eigvalsh(M1)[-1]
        hi2 = np.linalg.eigvalsh(M2)[-1]
        scale = 1.0 + hi1 + hi2
        margins.append(min(lam[0] + hi2, hi1 - lam[-1]) / scale)
    return _collect("eigen_interval", margins, tol, d=d)


def check_system_pd(trials=1000, dims=(2, 64), gamma_range=(0.01, 0.24), seed=0):
    """``I + gamma*A`` passes a Cholesky factorization for unit-ball samples."""
    margins, failures = [], 0
    for t in sample_triplet_trials(trials, dims, gamma_range, seed):
        if not check_positive_definite(t.a, t.b, t.gamma):
            failures += 1
        lam = np.linalg.eigvalsh(np.eye(t.d) + t.gamma * oracle.form_A(t.a, t.b))[0]
        margins.append(lam)
    res = _collect("system_positive_definite", margins, 0.0)
    res.violations = max(res.violations, failures)
    res.details["cholesky_failures"] = failures
    return res


def check_inverse_residual(trials=10000, dims=(2, 64), gamma_range=(0.01, 0.24), seed=0, tol=1e-9):
    """``||(I + gamma*A) @ closed_form_inverse - I||_F <= tol``."""
    margins = []
    for t in sample_triplet_trials(trials, dims, gamma_range, seed):
        M = np.eye(t.d) + t.gamma * oracle.form_A(t.a, t.b)
        r = np.linalg.norm(M @ rank2_inverse_matrix(t.a, t.b, t.gamma) - np.eye(t.d))
        margins.append(tol - r)
    return _collect("inverse_residual", margins, 0.0, threshold=tol)


def check_update_equivalence(trials=10000, dims=(2, 64), gamma_range=(0.01, 0.24), seed=0, tol=1e-9):
    """Closed-form update against ``L @ direct_inverse(I + gamma*A)``.

    Tolerance is relative: ``tol * (1 + ||L||_F)``.
    """
    margins = []
    for t in sample_triplet_trials(trials, dims, gamma_range, seed):
        fast = opml_step(t.L, t.a, t.b, t.gamma)
        direct = oracle.direct_opml_update(t.L, t.a, t.b, t.gamma)
        err = np.linalg.norm(fast.L - direct)
        margins.append(tol * (1.0 + np.linalg.norm(t.L)) - err
                       if fast.status == "active" else -math.inf)
    return _collect("closed_form_vs_direct", margins, 0.0, threshold=tol)


def b_norm_cap(eta, beta, gamma, radius=1.0):
    """Upper bound on ``||(I + gamma*A)^{-1} - I||_F`` from the scalar factors."""
    den = eta + beta
    return 32.0 * abs(gamma * gamma / den) * radius ** 4 + 4.0 * math.sqrt(2.0) * abs(eta * gamma / den) * radius ** 2


def check_trace_ranges(trace, radius=1.0):
    """Scalar ranges and norm caps over a recorded training trace.

    Recorded (eta, beta) of active steps must fall in
    ``(1 - 5R^2/4, 1 + 5R^2/4)`` and ``(-R^4, 25R^4/32)``; every recorded
    triplet must satisfy ``||A||_F <= 4 sqrt(2) R^2`` and its explicit
    ``B = (I + gamma*A)^{-1} - I`` must respect :func:`b_norm_cap`.
    """
    R2, R4 = radius ** 2, radius ** 4
    eta_m, beta_m, a_m, b_m = [], [], [], []
    gamma = trace.gamma
    for r in trace.triplet_records():
        if not math.isnan(r.eta):
            eta_m.append(min(r.eta - (1 - 1.25 * R2), (1 + 1.25 * R2) - r.eta))
            beta_m.append(min(r.beta + R4, 25.0 / 32.0 * R4 - r.beta))
        a, b = r.triplet.differences
        A = oracle.form_A(a, b)
        a_m.append(4.0 * math.sqrt(2.0) * R2 - np.linalg.norm(A))
        if r.flag != "active":
            continue
        s = rank2_inverse_factors(a, b, gamma)
        B = rank2_inverse_matrix(a, b, gamma) - np.eye(len(a))
        b_m.append(b_norm_cap(s.eta, s.beta, gamma, radius) - np.linalg.norm(B))
    parts = {"eta": eta_m, "beta": beta_m, "A_frob": a_m, "B_frob": b_m}
    # open intervals: the margin must be strictly positive
    viol = sum(int((np.asarray(m) <= 0).sum()) for k, m in parts.items() if k in ("eta", "beta"))
    viol += sum(int((np.asarray(m) < -1e-12).sum()) for k, m in parts.items() if k in ("A_frob", "B_frob"))
    worst = min([min(m) for m in parts.values() if m] or [math.inf])
    details = {k: (float(min(m)) if m else None) for k, m in parts.items()}
    n = len(trace.triplet_records())
    return CheckResult("trace_ranges", n, viol, float(worst), True, details)


def loss_gap_bound(U, alpha=1.0, xi=1.0, radius=1.0):
    return 2.0 * (alpha + xi + 1.0) * radius ** 2 * U ** 2


def _key(t):
    return (t.positive.stream_index, t.negative.stream_index)


def check_loss_gap(stream, L_onepass, L_batch, seed=0, alpha=1.0, xi=1.0, radius=1.0):
    """Per-step one-pass loss minus batch mean loss against ``2(a+x+1) R^2 U^2``.

    The stream is replayed through a fresh buffer seeded with ``seed``; every
    one-pass triplet must also belong to the batch set of its step.
    """
    L1 = np.asarray(L_onepass, dtype=np.float64)
    L2 = np.asarray(L_batch, dtype=np.float64)
    U = max(np.linalg.norm(L1), np.linalg.norm(L2))
    bound = loss_gap_bound(U, alpha, xi, radius)
    buf = ClassLatestBuffer(seed)
    history, margins, gaps, missing = [], [], [], 0
    for s in stream:
        t = buf.observe(s)
        if t is not None:
            batch = batch_observe_oracle(history, s)
            if _key(t) not in {_key(bt) for bt in batch}:
                missing += 1
            psi1 = hinge_loss(L1, t)
            psi2 = float(np.mean([hinge_loss(L2, bt) for bt in batch]))
            gaps.append(psi1 - psi2)
            margins.append(bound - (psi1 - psi2))
        history.append(s)
    res = _collect("loss_gap", margins, 1e-12, bound=float(bound), U=float(U),
                   max_gap=float(max(gaps)) if gaps else None, not_contained=missing)
    res.violations += missing
    return res


def _side_by_side(stream, gamma, seed, radius):
    """Replay one-pass and batch-oracle learning together.

    Returns ``(L_t, P, b_margins, diffs, bound_margins, n_extra)`` with
    ``L*_t = L_t @ P`` at the end of the stream.
    """
    buf = ClassLatestBuffer(seed)
    history = []
    L = None
    P = None
    b_margins, diffs, bound_margins = [], [], []
    n_extra = 0
    for s in stream:
        if L is None:
            d = s.features.shape[0]
            L, P = np.eye(d), np.eye(d)
        t = buf.observe(s)
        batch = batch_observe_oracle(history, s)
        history.append(s)
        if t is None:
            continue
        a, b = t.differences
        L = opml_step(L, a, b, gamma).L
        for bt in batch:
            if _key(bt) == _key(t):
                continue
            ea, eb = bt.differences
            if not ea.any() or not eb.any():
                continue
            M = L @ P
            Ma, Mb = M @ ea, M @ eb
            if 1.0 + Ma @ Ma - Mb @ Mb <= 0.0:
                continue
            sc = rank2_inverse_factors(ea, eb, gamma)
            B = rank2_inverse_matrix(ea, eb, gamma) - np.eye(len(ea))
            b_margins.append(b_norm_cap(sc.eta, sc.beta, gamma, radius) - np.linalg.norm(B))
            P = P + P @ B
            n_extra += 1
        diff = float(np.linalg.norm(L - L @ P))
        diffs.append(diff)
        bound_margins.append(np.linalg.norm(L) * np.linalg.norm(P - np.eye(len(P))) - diff)
    return L, P, b_margins, diffs, bound_margins, n_extra


def batch_oracle_metrics(stream, gamma=0.1, seed=0):
    """Final one-pass metric and its batch-oracle counterpart ``L_t @ P``."""
    stream = list(stream)
    L, P, *_ = _side_by_side(stream, gamma, seed, 1.0)
    if L is None:
        raise ValueError("empty stream")
    return L, L @ P


def check_batch_divergence(stream, gamma=0.1, seed=0, radius=1.0):
    """One-pass metric against the batch metric that replays the same triplets first.

    After the one-pass updates, the batch strategy applies each remaining
    batch triplet's factor ``I + B_i = (I + gamma*A_i)^{-1}``, so
    ``L*_t = L_t prod(I + B_i)``. As in any passive-aggressive step, a factor
    is applied only when its triplet has positive hinge loss under the
    running ``L_t prod(I + B_j)``. Asserted: every ``||B_i||_F`` is within
    :func:`b_norm_cap`. Reported: ``||L_t - L*_t||_F`` against
    ``||L_t||_F * ||prod(I + B_i) - I||_F``, which is the expanded sum of
    all ordered products of the ``B_i``.
    """
    _, _, b_margins, diffs, bound_margins, n_extra = _side_by_side(stream, gamma, seed, radius)
    return _collect("batch_divergence_caps", b_margins, 1e-12, trials=n_extra,
                    final_divergence=diffs[-1] if diffs else 0.0,
                    max_divergence=max(diffs) if diffs else 0.0,
                    product_bound_worst_margin=float(min(bound_margins)) if bound_margins else None)


def check_regret(trace, L_star, alpha=1.0, xi=1.0, radius=1.0):
    """Estimated regret against ``2 T (a + x + 1) R^2 U^2``."""
    regret = estimate_regret(trace, L_star)
    bound = regret_bound(trace, L_star, alpha, xi, radius)
    return _collect("regret_envelope", [bound - regret], 1e-9, trials=1,
                    regret=regret, bound=bound)


CHECKS = ("eigen", "pd", "inverse", "update", "ranges", "divergence", "gap", "regret")


def _training_streams(datasets, seed):
    from .data import SplitSpec, load_bundled, make_stream, normalize
    for name in datasets:
        ds = load_bundled(name) if isinstance(name, str) else name
        tr, te = make_stream(ds, SplitSpec(seed=seed))
        tr, _, _ = normalize(tr, te)
        yield ds.name, tr


def run_suite(checks=CHECKS, trials=10000, dims=(2, 64), gamma_range=(0.01, 0.24), gamma=0.1,
              seed=0, datasets=("iris", "wine", "breast")):
    """Run the selected checks and collect them into one report.

    Randomized checks use ``trials``, ``dims`` and ``gamma_range``. The
    trace-based ones train OPML with ``gamma`` on the normalized train half
    of each bundled dataset; the side-by-side checks use the first 30 (3
    classes) and the first 20 two-class samples of the first dataset.
    """
    from .trainer import TrainConfig, train_opml

    unknown = set(checks) - set(CHECKS)
    if unknown:
        raise ValueError(f"unknown checks: {sorted(unknown)}")
    report = BoundReport(parameters={
        "R": 1.0, "gamma_range": list(gamma_range), "gamma": gamma, "dims": list(dims),
        "trials": trials, "seed": seed, "datasets": list(datasets), "checks": list(checks)})
    add = report.checks.append
    if "eigen" in checks:
        add(check_eigen_interval(min(trials, 1000), 8, seed))
    if "pd" in checks:
        add(check_system_pd(trials, dims, gamma_range, seed))
    if "inverse" in checks:
        add(check_inverse_residual(trials, dims, gamma_range, seed))
    if "update" in checks:
        add(check_update_equivalence(trials, dims, gamma_range, seed))
    streams = list(_training_streams(datasets, seed)) if datasets else []
    cfg = TrainConfig(gamma=gamma, seed=seed, record_trace=True)
    for name, tr in streams:
        if "ranges" in checks or "regret" in checks:
            L, trace = train_opml(tr, cfg)
            if "ranges" in checks:
                res = check_trace_ranges(trace)
                res.name += f"[{name}]"
                add(res)
            if "regret" in checks:
                res = check_regret(trace, L)
                res.name += f"[{name}]"
                add(res)
    if streams and ("divergence" in checks or "gap" in checks):
        name, tr = streams[0]
        if "divergence" in checks:
            res = check_batch_divergence(tr.subset(np.arange(min(30, len(tr)))), gamma, seed)
            res.name += f"[{name}]"
            add(res)
        if "gap" in checks:
            two = np.flatnonzero(tr.labels <= 1)[:20]
            sub = tr.subset(two)
            L1, L2 = batch_oracle_metrics(sub, gamma, seed)
            res = check_loss_gap(sub, L1, L2, seed)
            res.name += f"[{name}]"
            add(res)
    return report
