"""On-disk formats.

Dense matrices use the FGM1 layout::

    b"FGM1" | u64 rows | u64 cols | rows*cols float32, little-endian, row-major

or plain UTF-8 CSV with one row per line. Checkpoints reuse the magic with a
JSON header in place of the shape (see :func:`write_tensors`).
"""

from __future__ import annotations

import json
import pickle
import struct
from pathlib import Path

import numpy as np

MAGIC = b"FGM1"
_SHAPE = struct.Struct("<QQ")


def write_matrix(path, M) -> None:
    M = np.asarray(M)
    if M.ndim == 1:
        M = M[:, None]
    if M.ndim != 2:
        raise ValueError("FGM1 holds 2-d matrices only")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_SHAPE.pack(*M.shape))
        fh.write(np.ascontiguousarray(M, dtype="<f4").tobytes())


def read_matrix(path) -> np.ndarray:
    """Read an FGM1 or CSV matrix as float64. The format is sniffed from the
    first four bytes."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(4)
        if head == MAGIC:
            raw = fh.read(_SHAPE.size)
            if len(raw) != _SHAPE.size:
                raise ValueError(f"{path}: truncated FGM1 header")
            rows, cols = _SHAPE.unpack(raw)
            data = fh.read()
            if len(data) != rows * cols * 4:
                raise ValueError(f"{path}: expected {rows}x{cols} float32 payload, got {len(data)} bytes")
            return np.frombuffer(data, dtype="<f4").reshape(rows, cols).astype(np.float64)
    return read_csv_matrix(path)


def read_csv_matrix(path) -> np.ndarray:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s:
                continue
            try:
                rows.append([float(x) for x in s.split(",")])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: unparseable feature row") from None
            if len(rows[-1]) != len(rows[0]):
                raise ValueError(f"{path}:{lineno}: expected {len(rows[0])} columns, got {len(rows[-1])}")
    if not rows:
        raise ValueError(f"{path}: empty feature file")
    return np.array(rows, dtype=np.float64)


def write_csv_matrix(path, M) -> None:
    M = np.asarray(M, dtype=np.float64)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in M:
            fh.write(",".join(repr(float(x)) for x in row))
            fh.write("\n")


def write_tensors(path, tensors: dict, meta: dict | None = None) -> None:
    """Write named float64 tensors into one checkpoint file.

    Layout: ``b"FGM1" | u64 header_len | u64 0 | header JSON | blobs``. The
    header lists every tensor with dtype, shape and byte offset (relative to
    the first blob byte) and carries ``meta`` verbatim.
    """
    entries, blobs, offset = [], [], 0
    for name, value in tensors.items():
        arr = np.asarray(value, dtype="<f8")  # tobytes() emits C order; keeps 0-d shapes
        entries.append({"name": name, "dtype": "float64", "shape": list(arr.shape), "offset": offset})
        blobs.append(arr.tobytes())
        offset += arr.nbytes
    header = json.dumps({"tensors": entries, "meta": meta or {}}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_SHAPE.pack(len(header), 0))
        fh.write(header)
        for b in blobs:
            fh.write(b)


def read_tensors(path) -> tuple[dict, dict]:
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise ValueError(f"{path}: not an FGM1 checkpoint")
        header_len, marker = _SHAPE.unpack(fh.read(_SHAPE.size))
        if marker != 0:
            raise ValueError(f"{path}: plain FGM1 matrix, not a checkpoint")
        header = json.loads(fh.read(header_len).decode("utf-8"))
        payload = fh.read()
    tensors = {}
    for e in header["tensors"]:
        count = int(np.prod(e["shape"])) if e["shape"] else 1
        arr = np.frombuffer(payload, dtype="<f8", count=count, offset=e["offset"])
        tensors[e["name"]] = arr.reshape(tuple(e["shape"])).copy()
    return tensors, header["meta"]


# --- converters for public citation datasets -------------------------------


def convert_linqs(content_path, cites_path, out_dir, features_format: str = "fgm"):
    """Convert the LINQS ``<name>.content`` / ``<name>.cites`` pair.

    ``.content`` rows are ``paper_id feat_1 ... feat_d class_label``;
    ``.cites`` rows are ``cited_id citing_id``. Papers are numbered in file
    order, classes in sorted order of their names. Citations that mention
    unknown papers are skipped.
    """
    from .graph import AttributeGraph, edges_to_adjacency, save_graph

    ids, feats, classes = {}, [], []
    with open(content_path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            ids[parts[0]] = len(ids)
            feats.append([float(x) for x in parts[1:-1]])
            classes.append(parts[-1])
    names = sorted(set(classes))
    labels = np.array([names.index(c) for c in classes], dtype=np.int64)
    edges = []
    with open(cites_path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if len(parts) == 2 and parts[0] in ids and parts[1] in ids:
                edges.append((ids[parts[0]], ids[parts[1]]))
    n = len(ids)
    g = AttributeGraph(edges_to_adjacency(np.array(edges).reshape(-1, 2), n), np.array(feats), labels, len(names))
    save_graph(g, out_dir, features_format)
    return g


def convert_planetoid(raw_dir, name: str, out_dir, features_format: str = "fgm"):
    """Convert the Planetoid pickles ``ind.<name>.{x,tx,allx,y,ty,ally,graph,test.index}``.

    Test rows are put back in the order given by ``test.index``; test ids
    missing from the index (Citeseer) become featureless, unlabelled rows and
    receive label 0 only if no other label is known.
    """
    import scipy.sparse as sp

    from .graph import AttributeGraph, edges_to_adjacency, save_graph

    raw_dir = Path(raw_dir)

    def load(part):
        with open(raw_dir / f"ind.{name}.{part}", "rb") as fh:
            return pickle.load(fh, encoding="latin1")

    x, tx, allx, y, ty, ally, graph = (load(p) for p in ("x", "tx", "allx", "y", "ty", "ally", "graph"))
    test_idx = np.loadtxt(raw_dir / f"ind.{name}.test.index", dtype=np.int64)
    sorted_test = np.sort(test_idx)
    lo, hi = sorted_test[0], sorted_test[-1]
    if hi - lo + 1 != len(test_idx):
        full_tx = sp.lil_matrix((hi - lo + 1, tx.shape[1]))
        full_tx[sorted_test - lo, :] = tx
        tx = full_tx
        full_ty = np.zeros((hi - lo + 1, ty.shape[1]))
        full_ty[sorted_test - lo, :] = ty
        ty = full_ty
    features = sp.vstack([allx, tx]).tolil()
    features[test_idx, :] = features[sorted_test, :]
    onehot = np.vstack([ally, ty])
    onehot[test_idx, :] = onehot[sorted_test, :]
    labels = onehot.argmax(axis=1)
    n = features.shape[0]
    edges = [(u, v) for u, nbrs in graph.items() for v in nbrs if u < n and v < n]
    g = AttributeGraph(
        edges_to_adjacency(np.array(edges).reshape(-1, 2), n),
        np.asarray(features.todense()),
        labels,
        onehot.shape[1],
    )
    save_graph(g, out_dir, features_format)
    return g
