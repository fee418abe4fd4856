import pickle
import struct

import numpy as np
import pytest
import scipy.sparse as sp

from fgwcluster.graph import load_graph_dir
from fgwcluster.io import (
    convert_linqs,
    convert_planetoid,
    read_matrix,
    read_tensors,
    write_csv_matrix,
    write_matrix,
    write_tensors,
)


def test_fgm_layout_is_exact(tmp_path):
    M = np.array([[1.0, 2.5], [-3.0, 0.125], [7.0, 8.0]])
    write_matrix(tmp_path / "m.fgm", M)
    raw = (tmp_path / "m.fgm").read_bytes()
    assert raw[:4] == b"FGM1"
    assert struct.unpack("<QQ", raw[4:20]) == (3, 2)
    np.testing.assert_array_equal(np.frombuffer(raw[20:], "<f4").reshape(3, 2), M)
    np.testing.assert_array_equal(read_matrix(tmp_path / "m.fgm"), M)


def test_fgm_truncated_payload(tmp_path):
    write_matrix(tmp_path / "m.fgm", np.ones((2, 2)))
    raw = (tmp_path / "m.fgm").read_bytes()
    (tmp_path / "m.fgm").write_bytes(raw[:-3])
    with pytest.raises(ValueError, match="payload"):
        read_matrix(tmp_path / "m.fgm")


def test_csv_round_trip_is_exact(tmp_path, rng):
    M = rng.standard_normal((4, 3))
    write_csv_matrix(tmp_path / "m.csv", M)
    np.testing.assert_array_equal(read_matrix(tmp_path / "m.csv"), M)


def test_csv_ragged_rows(tmp_path):
    (tmp_path / "m.csv").write_text("1,2\n3\n", encoding="utf-8")
    with pytest.raises(ValueError, match=":2:"):
        read_matrix(tmp_path / "m.csv")


def test_tensor_checkpoint_round_trip(tmp_path, rng):
    tensors = {"a": rng.standard_normal((3, 4)), "b": rng.standard_normal(5), "c": np.array(2.0)}
    meta = {"note": "x", "trace": [1.0, 0.5]}
    write_tensors(tmp_path / "ck.fgm", tensors, meta)
    back, meta_back = read_tensors(tmp_path / "ck.fgm")
    assert meta_back == meta
    for k, v in tensors.items():
        np.testing.assert_array_equal(back[k], v)
        assert back[k].shape == v.shape


def test_plain_matrix_is_not_a_checkpoint(tmp_path):
    write_matrix(tmp_path / "m.fgm", np.ones((2, 2)))
    with pytest.raises(ValueError, match="not a checkpoint"):
        read_tensors(tmp_path / "m.fgm")


def test_convert_linqs(tmp_path):
    src = tmp_path / "src"
    src.mkdir()
    (src / "toy.content").write_text(
        "p10 1 0 1 Theory\np20 0 1 0 Neural\np30 1 1 0 Theory\n", encoding="utf-8"
    )
    (src / "toy.cites").write_text("p10 p20\np20 p10\np30 p10\np99 p10\n", encoding="utf-8")
    g = convert_linqs(src / "toy.content", src / "toy.cites", tmp_path / "out")
    assert g.n_nodes == 3 and g.n_edges == 2
    # classes numbered by sorted name: Neural=0, Theory=1
    assert g.labels.tolist() == [1, 0, 1]
    h = load_graph_dir(tmp_path / "out")
    np.testing.assert_array_equal(h.features, [[1, 0, 1], [0, 1, 0], [1, 1, 0]])
    assert (h.adjacency != g.adjacency).nnz == 0


def test_convert_planetoid(tmp_path):
    # 2 train nodes, 2 test nodes stored out of order, 3 features, 2 classes
    raw = tmp_path / "raw"
    raw.mkdir()
    allx = sp.csr_matrix(np.array([[1, 0, 0], [0, 1, 0]], dtype=float))
    ally = np.array([[1, 0], [0, 1]])
    tx = sp.csr_matrix(np.array([[0, 0, 1], [1, 1, 1]], dtype=float))  # rows for node 3 then node 2
    ty = np.array([[0, 1], [1, 0]])
    graph = {0: [1], 1: [0, 2], 2: [1, 3], 3: [2]}
    for part, obj in {"x": allx, "allx": allx, "y": ally, "ally": ally, "tx": tx, "ty": ty, "graph": graph}.items():
        with open(raw / f"ind.toy.{part}", "wb") as fh:
            pickle.dump(obj, fh)
    (raw / "ind.toy.test.index").write_text("3\n2\n", encoding="utf-8")
    g = convert_planetoid(raw, "toy", tmp_path / "out")
    np.testing.assert_array_equal(g.features, [[1, 0, 0], [0, 1, 0], [1, 1, 1], [0, 0, 1]])
    assert g.labels.tolist() == [0, 1, 0, 1]
    assert g.n_edges == 3
