"""Attribute graphs: container, loading, GCN normalization, augmentation and
a stochastic-block-model generator."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import io as fgmio

logger = logging.getLogger(__name__)


class GraphFormatError(ValueError):
    """Raised when graph files on disk cannot be parsed or are inconsistent."""


@dataclass
class AttributeGraph:
    """Undirected attribute graph ``(A, X)`` with optional labels.

    ``adjacency`` is a symmetric CSR matrix with unit entries and an empty
    diagonal. ``features`` is dense ``(n_nodes, d0)``.
    """

    adjacency: sp.csr_matrix
    features: np.ndarray
    labels: np.ndarray | None = None
    n_classes: int | None = None

    def __post_init__(self):
        self.adjacency = sp.csr_matrix(self.adjacency, dtype=np.float64)
        self.adjacency.sort_indices()
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.n_classes is None:
                self.n_classes = int(self.labels.max()) + 1 if self.labels.size else 0

    @property
    def n_nodes(self) -> int:
        return self.features.shape[0]

    @property
    def n_edges(self) -> int:
        """Number of undirected edges."""
        return self.adjacency.nnz // 2

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def edge_array(self) -> np.ndarray:
        """Undirected edges as an ``(E, 2)`` array with ``u < v``, sorted."""
        upper = sp.triu(self.adjacency, k=1).tocoo()
        edges = np.stack([upper.row, upper.col], axis=1).astype(np.int64)
        order = np.lexsort((edges[:, 1], edges[:, 0]))
        return edges[order]

    def validate(self) -> None:
        A = self.adjacency
        n = self.n_nodes
        if A.shape != (n, n):
            raise ValueError(f"adjacency shape {A.shape} does not match {n} nodes")
        if (A != A.T).nnz:
            raise ValueError("adjacency is not symmetric")
        if A.nnz and not np.all(A.data == 1.0):
            raise ValueError("adjacency values must all be 1")
        if A.diagonal().any():
            raise ValueError("adjacency has self-loops")
        if self.labels is not None:
            if self.labels.shape != (n,):
                raise ValueError("labels length does not match node count")
            if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
                raise ValueError("label outside [0, n_classes)")


def edges_to_adjacency(edges, n_nodes: int) -> sp.csr_matrix:
    """Symmetric binary adjacency from an edge array. Duplicates and
    self-loops are removed."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    keep = edges[:, 0] != edges[:, 1]
    u, v = edges[keep, 0], edges[keep, 1]
    rows = np.concatenate([u, v])
    cols = np.concatenate([v, u])
    A = sp.coo_matrix((np.ones(rows.size), (rows, cols)), shape=(n_nodes, n_nodes)).tocsr()
    A.data[:] = 1.0  # coalesced duplicates
    A.sort_indices()
    return A


def _read_edge_list(path: Path) -> np.ndarray:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                raise GraphFormatError(f"{path}:{lineno}: expected 'u v', got {line.strip()!r}")
            try:
                pairs.append((int(parts[0]), int(parts[1])))
            except ValueError:
                raise GraphFormatError(f"{path}:{lineno}: non-integer node id in {line.strip()!r}") from None
    return np.array(pairs, dtype=np.int64).reshape(-1, 2)


def _read_labels(path: Path) -> np.ndarray:
    labels = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s:
                continue
            try:
                labels.append(int(s))
            except ValueError:
                raise GraphFormatError(f"{path}:{lineno}: unparseable label {s!r}") from None
    return np.array(labels, dtype=np.int64)


def load_graph(edge_list_path, features_path, labels_path=None) -> AttributeGraph:
    """Load a graph from an edge list, a feature matrix and optional labels.

    The node count is the number of feature rows; every node id in the edge
    list must be below it. Reciprocal and duplicate edges collapse to one
    undirected edge, and self-loops are dropped with a warning.
    """
    edge_list_path, features_path = Path(edge_list_path), Path(features_path)
    try:
        features = fgmio.read_matrix(features_path)
    except ValueError as exc:
        raise GraphFormatError(str(exc)) from None
    n = features.shape[0]
    edges = _read_edge_list(edge_list_path)
    if edges.size:
        lo, hi = edges.min(), edges.max()
        if lo < 0 or hi >= n:
            bad = lo if lo < 0 else hi
            raise GraphFormatError(
                f"{edge_list_path}: node id {bad} out of range for {n} feature rows in {features_path}"
            )
    n_loops = int(np.count_nonzero(edges[:, 0] == edges[:, 1]))
    if n_loops:
        logger.warning("dropped %d self-loop(s) from %s", n_loops, edge_list_path)
    labels = None
    if labels_path is not None:
        labels = _read_labels(Path(labels_path))
        if labels.shape[0] != n:
            raise GraphFormatError(
                f"{labels_path}: {labels.shape[0]} labels but {n} feature rows in {features_path}"
            )
        if labels.size and labels.min() < 0:
            raise GraphFormatError(f"{labels_path}: negative label")
    g = AttributeGraph(edges_to_adjacency(edges, n), features, labels)
    g.validate()
    return g


def save_graph(g: AttributeGraph, out_dir, features_format: str = "fgm") -> dict:
    """Write ``g`` as ``edges.txt``, ``features.{fgm,csv}`` and, if labelled,
    ``labels.txt``. Returns the written paths keyed by role."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {"edges": out_dir / "edges.txt"}
    with open(paths["edges"], "w", encoding="utf-8", newline="\n") as fh:
        for u, v in g.edge_array():
            fh.write(f"{u} {v}\n")
    if features_format == "fgm":
        paths["features"] = out_dir / "features.fgm"
        fgmio.write_matrix(paths["features"], g.features)
    elif features_format == "csv":
        paths["features"] = out_dir / "features.csv"
        fgmio.write_csv_matrix(paths["features"], g.features)
    else:
        raise ValueError(f"unknown features format {features_format!r}")
    if g.labels is not None:
        paths["labels"] = out_dir / "labels.txt"
        with open(paths["labels"], "w", encoding="utf-8", newline="\n") as fh:
            fh.writelines(f"{int(y)}\n" for y in g.labels)
    return paths


def find_graph_files(data_dir) -> dict:
    """Locate ``edges.txt``, ``features.fgm`` or ``features.csv``, and
    optional ``labels.txt`` inside ``data_dir``."""
    data_dir = Path(data_dir)
    edges = data_dir / "edges.txt"
    if not edges.is_file():
        raise FileNotFoundError(f"missing edge list: {edges}")
    for name in ("features.fgm", "features.csv"):
        if (data_dir / name).is_file():
            features = data_dir / name
            break
    else:
        raise FileNotFoundError(f"missing features file: {data_dir / 'features.fgm'} (or features.csv)")
    labels = data_dir / "labels.txt"
    return {"edges": edges, "features": features, "labels": labels if labels.is_file() else None}


def load_graph_dir(data_dir) -> AttributeGraph:
    files = find_graph_files(data_dir)
    return load_graph(files["edges"], files["features"], files["labels"])


def gcn_normalize(g: AttributeGraph) -> sp.csr_matrix:
    """Symmetric GCN propagation matrix ``D^-1/2 (A + I) D^-1/2``."""
    return normalize_adjacency(g.adjacency)


def normalize_adjacency(A: sp.spmatrix) -> sp.csr_matrix:
    n = A.shape[0]
    A_hat = sp.csr_matrix(A, dtype=np.float64) + sp.identity(n, format="csr")
    deg = np.asarray(A_hat.sum(axis=1)).ravel()
    inv_sqrt = 1.0 / np.sqrt(deg)
    D = sp.diags(inv_sqrt)
    out = (D @ A_hat @ D).tocsr()
    out.sort_indices()
    return out


@dataclass(frozen=True)
class AugmentationConfig:
    pe: float = 0.2
    px: float = 0.2

    def __post_init__(self):
        for name in ("pe", "px"):
            rate = getattr(self, name)
            if not 0.0 <= rate < 1.0:
                raise ValueError(f"{name} must lie in [0, 1), got {rate}")


def augment(g: AttributeGraph, cfg: AugmentationConfig, rng: np.random.Generator) -> AttributeGraph:
    """One random view of ``g``: drop ``floor(pe*E)`` undirected edges and
    zero ``floor(px*d0)`` feature columns, both chosen without replacement."""
    edges = g.edge_array()
    n_drop_e = math.floor(cfg.pe * len(edges))
    n_drop_x = math.floor(cfg.px * g.n_features)
    # draw order is fixed so a seed fully determines the view
    drop_e = rng.choice(len(edges), size=n_drop_e, replace=False) if n_drop_e else np.empty(0, np.int64)
    drop_x = rng.choice(g.n_features, size=n_drop_x, replace=False) if n_drop_x else np.empty(0, np.int64)

    if n_drop_e:
        keep = np.ones(len(edges), dtype=bool)
        keep[drop_e] = False
        A = edges_to_adjacency(edges[keep], g.n_nodes)
    else:
        A = g.adjacency.copy()
    X = g.features.copy()
    if n_drop_x:
        X[:, drop_x] = 0.0
    return AttributeGraph(A, X, g.labels, g.n_classes)


def generate_sbm(n_per_block, p_in: float, p_out: float, feature_centers, noise: float, seed: int) -> AttributeGraph:
    """Stochastic block model with Gaussian node features.

    Node ``i`` in block ``k`` gets features ``feature_centers[k] + noise * N(0, I)``;
    labels are block ids.
    """
    n_per_block = [int(n) for n in n_per_block]
    centers = np.atleast_2d(np.asarray(feature_centers, dtype=np.float64))
    if len(centers) != len(n_per_block):
        raise ValueError("need exactly one feature center per block")
    if not p_in > p_out:
        raise ValueError("p_in must exceed p_out")
    if not (0.0 <= p_out and p_in <= 1.0):
        raise ValueError("probabilities must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(len(n_per_block)), n_per_block)
    n = labels.size
    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(labels[iu] == labels[ju], p_in, p_out)
    hit = rng.random(iu.size) < prob
    A = edges_to_adjacency(np.stack([iu[hit], ju[hit]], axis=1), n)
    X = centers[labels] + noise * rng.standard_normal((n, centers.shape[1]))
    return AttributeGraph(A, X, labels, len(n_per_block))
