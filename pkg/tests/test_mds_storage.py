import itertools
import json

import numpy as np
import pytest
import sympy

from robustpir.finite_field import ExtSymbol, FieldMatrix
from robustpir.mds_storage import (
    FileStore, MdsCode, StoreDocument, StoreError, encode_store, erasure_reconstruct,
    files_from_json, make_code, non_mds_subsets, smallest_field,
)


def sympy_mds(code: MdsCode) -> bool:
    g = sympy.Matrix(code.generator.tolist())
    return all(int(g.extract(list(range(code.k)), list(cols)).det()) % code.q
               for cols in itertools.combinations(range(code.n), code.k))


def test_example_codes():
    assert make_code(4, 2, 3).generator.tolist() == [[1, 0, 1, 1], [0, 1, 1, 2]]
    assert make_code(5, 2, 5).generator.tolist() == [[1, 0, 1, 1, 1], [0, 1, 1, 2, 3]]


@pytest.mark.parametrize("n,k", [(n, k) for n in range(2, 9) for k in range(1, n)])
def test_every_built_code_is_systematic_mds(n, k):
    code = make_code(n, k, smallest_field(n, k))
    assert code.is_systematic
    assert sympy_mds(code)


def test_non_mds_detected():
    gen = FieldMatrix.from_rows([[1, 0, 1], [0, 1, 0]], 5)
    assert list(non_mds_subsets(gen, 2)) == [(1, 3)]


def test_field_too_small():
    with pytest.raises(StoreError):
        make_code(6, 2, 3)


def test_example1_node_contents():
    # A = [1, 2], B = [0, 1] (one stripe each in two files) -> (A, B, A+B, A+2B)
    files = FileStore(3, np.array([[[[1]], [[0]]], [[[2]], [[1]]]]).reshape(2, 2, 1, 1))
    nodes = encode_store(files, make_code(4, 2, 3))
    a, b = files.data[:, 0, 0, 0], files.data[:, 1, 0, 0]
    expect = [a, b, (a + b) % 3, (a + 2 * b) % 3]
    for node, want in zip(nodes, expect):
        assert node.W[:, 0].tolist() == want.tolist()


@pytest.mark.parametrize("ell", [1, 3])
def test_erasure_reconstruct_all_pairs_5_2(ell):
    code = make_code(5, 2, 5)
    rng = np.random.default_rng(0)
    files = FileStore.random(2, 2, 3, 5, ell, rng)
    nodes = encode_store(files, code)
    for pair in itertools.combinations(range(1, 6), 2):
        for pos in range(files.m * files.alpha):
            got = erasure_reconstruct(code, {i: nodes[i - 1].symbol(pos) for i in pair})
            f, t = divmod(pos, files.alpha)
            assert np.array_equal(got, files.data[f, :, t])


def test_erasure_needs_k_symbols():
    with pytest.raises(StoreError):
        erasure_reconstruct(make_code(4, 2, 3), {1: ExtSymbol.from_array([1], 3)})


def test_store_document_round_trip(tmp_path):
    files = FileStore.random(3, 2, 3, 5, 2, np.random.default_rng(3))
    doc = StoreDocument(make_code(5, 2, 5), files, 2)
    path = tmp_path / "store.json"
    doc.save(path)
    back = StoreDocument.load(path)
    assert back.files == files and back.nu == 2
    assert back.code.generator == doc.code.generator


def test_store_document_validation():
    good = StoreDocument(make_code(4, 2, 3), FileStore.random(2, 2, 1, 3, 1, np.random.default_rng(0)))
    base = good.to_json()

    def broken(**change):
        d = json.loads(json.dumps(base))
        d.update(change)
        return d

    with pytest.raises(StoreError, match="not prime"):
        StoreDocument.from_json(broken(q=4))
    with pytest.raises(StoreError, match="systematic"):
        StoreDocument.from_json(broken(generator=[[1, 1, 1, 1], [0, 1, 1, 2]]))
    with pytest.raises(StoreError, match="not MDS"):
        StoreDocument.from_json(broken(generator=[[1, 0, 1, 1], [0, 1, 0, 2]]))
    with pytest.raises(StoreError, match="disagree"):
        nodes = [list(n) for n in base["nodes"]]
        nodes[2][0] = (nodes[2][0] + 1) % 3
        StoreDocument.from_json(broken(nodes=nodes))
    with pytest.raises(StoreError, match="missing"):
        d = dict(base)
        del d["files"]
        StoreDocument.from_json(d)


def test_files_from_json_diagnostics():
    with pytest.raises(StoreError, match="m >= 1"):
        files_from_json([], 2, 1, 1, 3)
    with pytest.raises(StoreError, match="file 2: expected shape 2x1"):
        files_from_json([[[1], [2]], [[1, 1], [2]]], 2, 1, 1, 3)
    with pytest.raises(StoreError, match=r"file 1\[1,1\]: coordinates"):
        files_from_json([[[7], [2]]], 2, 1, 1, 3)
