"""K-means and the clustering evaluation protocol (ACC, Macro-F1, NMI, ARI)."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment


@dataclass
class KMeansResult:
    labels: np.ndarray
    centers: np.ndarray
    inertia: float
    n_iter: int
    inertia_trace: list = field(default_factory=list)


def _sq_dists(X, centers):
    d = (X * X).sum(1)[:, None] - 2.0 * X @ centers.T + (centers * centers).sum(1)[None, :]
    return np.maximum(d, 0.0)


def _kmeans_pp(X, k, rng):
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    closest = _sq_dists(X, centers[:1]).ravel()
    for c in range(1, k):
        total = closest.sum()
        idx = rng.integers(n) if total <= 0 else rng.choice(n, p=closest / total)
        centers[c] = X[idx]
        closest = np.minimum(closest, _sq_dists(X, centers[c : c + 1]).ravel())
    return centers


def _lloyd(X, centers, max_iter, tol):
    k = centers.shape[0]
    labels = None
    trace = []
    it = 0
    for it in range(1, max_iter + 1):
        d = _sq_dists(X, centers)
        new = d.argmin(axis=1)
        counts = np.bincount(new, minlength=k)
        if np.any(counts == 0):
            # refill each empty cluster with the point farthest from its centroid
            own = d[np.arange(len(X)), new]
            for c in np.flatnonzero(counts == 0):
                movable = counts[new] > 1
                if not movable.any():
                    break
                far = int(np.argmax(np.where(movable, own, -np.inf)))
                counts[new[far]] -= 1
                new[far] = c
                counts[c] = 1
                own[far] = 0.0
        centers = np.stack([X[new == c].mean(axis=0) for c in range(k)])
        trace.append(float(((X - centers[new]) ** 2).sum()))
        done = labels is not None and np.array_equal(new, labels)
        labels = new
        if done or (len(trace) > 1 and trace[-2] - trace[-1] <= tol * max(trace[-2], 1e-300) and trace[-1] <= trace[-2]):
            break
    return labels, centers, trace, it


def kmeans(R, n_clusters: int, n_init: int = 10, max_iter: int = 300, seed: int = 0, tol: float = 1e-10) -> KMeansResult:
    """Lloyd's algorithm with k-means++ seeding; keeps the lowest-inertia run
    out of ``n_init`` restarts. Restart ``i`` uses the ``i``-th child of
    ``SeedSequence(seed)``, so results do not depend on execution order."""
    X = np.asarray(R, dtype=np.float64)
    if n_clusters > X.shape[0]:
        raise ValueError(f"cannot form {n_clusters} clusters from {X.shape[0]} points")
    if n_clusters < 1:
        raise ValueError("n_clusters must be positive")
    best = None
    for child in np.random.SeedSequence(seed).spawn(n_init):
        rng = np.random.default_rng(child)
        labels, centers, trace, it = _lloyd(X, _kmeans_pp(X, n_clusters, rng), max_iter, tol)
        if best is None or trace[-1] < best.inertia:
            best = KMeansResult(labels, centers, trace[-1], it, trace)
    return best


def contingency(pred, truth, n_classes: int) -> np.ndarray:
    """``M[i, j]`` = number of points with ``pred == i`` and ``truth == j``."""
    pred, truth = np.asarray(pred), np.asarray(truth)
    M = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(M, (pred, truth), 1)
    return M


def _check_labels(pred, truth, n_classes):
    pred = np.asarray(pred, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise ValueError("pred and truth must be 1-d arrays of equal length")
    if n_classes is None:
        n_classes = int(max(pred.max(initial=-1), truth.max(initial=-1))) + 1
    for name, y in (("pred", pred), ("truth", truth)):
        if y.size and (y.min() < 0 or y.max() >= n_classes):
            raise ValueError(f"{name} label out of range [0, {n_classes})")
    return pred, truth, n_classes


def lsa_map(pred, truth, n_classes: int | None = None) -> np.ndarray:
    """Permutation ``sigma`` (cluster id -> class id) maximizing matches.

    Ties are resolved first by the larger F1 sum, which does not depend on
    how clusters are numbered, and then by the lexicographically smallest
    ``sigma``.
    """
    pred, truth, C = _check_labels(pred, truth, n_classes)
    M = contingency(pred, truth, C)
    n_pred, n_true = M.sum(axis=1), M.sum(axis=0)
    denom = n_pred[:, None] + n_true[None, :]
    f1 = np.divide(2.0 * M, denom, out=np.zeros((C, C)), where=denom > 0)
    # one F1 unit is worth less than one match: sum of F1 terms is at most C
    W = M + f1 / (C + 1)

    def best(rows, cols):
        if not rows:
            return 0.0
        sub = W[np.ix_(rows, cols)]
        r, c = linear_sum_assignment(sub, maximize=True)
        return float(sub[r, c].sum())

    sigma = np.empty(C, dtype=np.int64)
    free = list(range(C))
    target = best(list(range(C)), free)
    for i in range(C):
        rest = list(range(i + 1, C))
        for j in free:
            cols = [c for c in free if c != j]
            value = W[i, j] + best(rest, cols)
            if value >= target - 1e-9 * max(1.0, target):
                sigma[i] = j
                target = value - W[i, j]
                free = cols
                break
    return sigma


def _entropy(counts):
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def nmi(pred, truth) -> float:
    """Mutual information normalized by the arithmetic mean of the entropies."""
    _, p = np.unique(pred, return_inverse=True)
    _, t = np.unique(truth, return_inverse=True)
    M = np.zeros((p.max() + 1, t.max() + 1))
    np.add.at(M, (p, t), 1)
    h_p, h_t = _entropy(M.sum(1)), _entropy(M.sum(0))
    if h_p == 0.0 and h_t == 0.0:
        return 1.0
    n = M.sum()
    nz = M > 0
    outer = np.outer(M.sum(1), M.sum(0))
    mi = float((M[nz] / n * np.log(M[nz] * n / outer[nz])).sum())
    return max(mi / (0.5 * (h_p + h_t)), 0.0)


def ari(pred, truth) -> float:
    _, p = np.unique(pred, return_inverse=True)
    _, t = np.unique(truth, return_inverse=True)
    M = np.zeros((p.max() + 1, t.max() + 1))
    np.add.at(M, (p, t), 1)
    comb = lambda x: x * (x - 1) / 2.0  # noqa: E731
    n = M.sum()
    sum_ij = comb(M).sum()
    sum_a, sum_b = comb(M.sum(1)).sum(), comb(M.sum(0)).sum()
    expected = sum_a * sum_b / comb(n) if n > 1 else 0.0
    top = 0.5 * (sum_a + sum_b)
    if top == expected:
        return 1.0
    return float((sum_ij - expected) / (top - expected))


@dataclass
class MetricsReport:
    acc: float
    macro_f1: float
    nmi: float
    ari: float
    per_class_f1: list
    confusion: list
    pred_histogram: list
    true_histogram: list
    mapping: list

    def to_dict(self) -> dict:
        return asdict(self)

    def summary(self) -> dict:
        return {k: getattr(self, k) for k in ("acc", "macro_f1", "nmi", "ari")}


def evaluate(pred, truth, n_classes: int | None = None) -> MetricsReport:
    """Map clusters to classes with :func:`lsa_map`, then score.

    ``confusion[i, j]`` counts points of true class ``i`` mapped to class
    ``j``. Per-class F1 is 0 for a class with no true and no predicted points.
    """
    pred, truth, C = _check_labels(pred, truth, n_classes)
    sigma = lsa_map(pred, truth, C)
    mapped = sigma[pred]
    conf = contingency(truth, mapped, C)
    tp = np.diag(conf).astype(np.float64)
    n_true = conf.sum(axis=1).astype(np.float64)
    n_pred = conf.sum(axis=0).astype(np.float64)
    denom = n_true + n_pred
    f1 = np.divide(2.0 * tp, denom, out=np.zeros(C), where=denom > 0)
    return MetricsReport(
        acc=float(tp.sum() / len(truth)),
        macro_f1=float(f1.mean()),
        nmi=nmi(pred, truth),
        ari=ari(pred, truth),
        per_class_f1=f1.tolist(),
        confusion=conf.tolist(),
        pred_histogram=n_pred.astype(np.int64).tolist(),
        true_histogram=n_true.astype(np.int64).tolist(),
        mapping=sigma.tolist(),
    )
