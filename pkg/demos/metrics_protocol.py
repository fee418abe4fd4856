"""The evaluation protocol on hand-built label vectors.

Run with ``python demos/metrics_protocol.py``. Cluster ids are arbitrary, so
predictions are first mapped onto classes with a one-to-one assignment and
only then scored. NMI and ARI need no mapping.
"""

import numpy as np

from fgwcluster.metrics import evaluate, kmeans

truth = np.array([0, 0, 0, 0, 1, 1, 1, 2, 2, 2])
cases = {
    "perfect": truth,
    "renamed": (truth + 1) % 3,
    "one error": np.array([0, 0, 0, 1, 1, 1, 1, 2, 2, 2]),
    "merged": np.array([0, 0, 0, 0, 0, 0, 0, 2, 2, 2]),
    "constant": np.zeros(10, dtype=int),
}
print(f"{'case':<10} {'acc':>6} {'f1':>6} {'nmi':>6} {'ari':>6}  mapping")
for name, pred in cases.items():
    r = evaluate(pred, truth, 3)
    print(f"{name:<10} {r.acc:6.3f} {r.macro_f1:6.3f} {r.nmi:6.3f} {r.ari:6.3f}  {r.mapping}")

r = evaluate(cases["one error"], truth, 3)
print("\nconfusion (rows true, columns mapped prediction)")
for row in r.confusion:
    print("   ", row)

# K-means on three noisy clusters of unit vectors, the shape of embedding the
# trained encoder produces.
rng = np.random.default_rng(1)
centers = np.eye(3, 6)
X = np.repeat(centers, 30, axis=0) + 0.2 * rng.standard_normal((90, 6))
X /= np.linalg.norm(X, axis=1, keepdims=True)
km = kmeans(X, 3, seed=0)
print(f"\nK-means inertia {km.inertia:.3f} after {len(km.inertia_trace)} Lloyd steps")
print("scores:", {k: round(v, 3) for k, v in evaluate(km.labels, np.repeat(np.arange(3), 30)).summary().items()})
