"""Systematic (n, k) MDS encoding of an m-file store.

Each file is a k x alpha matrix of GF(q^l) symbols (held as an int array of
shape ``(k, alpha, ell)``).  Node ``i`` stores the length ``m*alpha`` column
``W_i`` with ``W_i[x*alpha + t] = sum_b G[b, i] * X_x[b, t]`` (0-based here;
file-major then stripe, matching the unit-vector index ``(f-1)*alpha + t``).
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Mapping

import numpy as np

from .finite_field import (
    ExtSymbol,
    FieldError,
    FieldMatrix,
    check_modulus,
    is_prime,
    matmul_mod,
    vandermonde,
)


class StoreError(ValueError):
    """Invalid store, file shape or store document."""


@dataclass(frozen=True)
class MdsCode:
    n: int
    k: int
    generator: FieldMatrix

    def __post_init__(self):
        if self.generator.shape != (self.k, self.n):
            raise StoreError(f"generator must be {self.k}x{self.n}, got {self.generator.shape}")

    @property
    def q(self) -> int:
        return self.generator.q

    def column(self, node: int) -> np.ndarray:
        """Encoding vector of 1-based ``node``."""
        return self.generator.data[:, node - 1]

    @cached_property
    def is_systematic(self) -> bool:
        return np.array_equal(self.generator.data[:, : self.k], np.eye(self.k, dtype=np.int64))

    def is_mds(self) -> bool:
        return not list(non_mds_subsets(self.generator, self.k, limit=1))


def non_mds_subsets(gen: FieldMatrix, k: int, limit: int | None = None):
    """Yield k-subsets of columns (1-based) that are not invertible."""
    found = 0
    for cols in itertools.combinations(range(gen.cols), k):
        if gen.columns(cols).rank() < k:
            yield tuple(c + 1 for c in cols)
            found += 1
            if limit is not None and found >= limit:
                return


def make_code(n: int, k: int, q: int) -> MdsCode:
    """Deterministic systematic (n, k) MDS code over GF(q).

    First choice is ``[I | V]`` with ``V`` the k x (n-k) Vandermonde matrix on
    the points 1..n-k (parity node p stores sum_b p**b * block_b); for k = 2
    this is MDS whenever q > n-k.  When that matrix is not MDS (possible for
    k >= 3) the Reed-Solomon generator on points 0..n-1 is systematized
    instead, which needs q >= n.
    """
    if not (1 <= k <= n):
        raise StoreError(f"need 1 <= k <= n, got n={n}, k={k}")
    try:
        check_modulus(q)
    except FieldError as exc:
        raise StoreError(str(exc)) from None
    if n == k:
        return MdsCode(n, k, FieldMatrix.identity(k, q))
    if q > n - k:
        parity = vandermonde(range(1, n - k + 1), k, q)
        gen = FieldMatrix(np.concatenate([np.eye(k, dtype=np.int64), parity.data], axis=1), q)
        if not list(non_mds_subsets(gen, k, limit=1)):
            return MdsCode(n, k, gen)
    if q >= n:
        v = vandermonde(range(n), k, q)
        gen = v.columns(range(k)).inverse() @ v
        return MdsCode(n, k, gen)
    raise StoreError(f"GF({q}) is too small for a systematic ({n},{k}) MDS code")


def smallest_field(n: int, k: int) -> int:
    """Smallest prime q for which :func:`make_code` succeeds."""
    q = 2
    while True:
        if is_prime(q):
            try:
                make_code(n, k, q)
                return q
            except StoreError:
                pass
        q += 1


@dataclass(frozen=True, eq=False)
class FileStore:
    q: int
    data: np.ndarray  # (m, k, alpha, ell)

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.int64, copy=True)
        if arr.ndim != 4:
            raise StoreError(f"file store must have shape (m, k, alpha, ell), got {arr.shape}")
        if arr.shape[0] < 1:
            raise StoreError("m >= 1 required")
        arr %= self.q
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def m(self) -> int:
        return self.data.shape[0]

    @property
    def k(self) -> int:
        return self.data.shape[1]

    @property
    def alpha(self) -> int:
        return self.data.shape[2]

    @property
    def ell(self) -> int:
        return self.data.shape[3]

    def file(self, f: int) -> np.ndarray:
        """File ``f`` (1-based) as a (k, alpha, ell) array."""
        return self.data[f - 1]

    def block_vector(self, b: int) -> np.ndarray:
        """Block ``b`` (0-based) of every file/stripe as an (m*alpha, ell) array."""
        return self.data[:, b].reshape(self.m * self.alpha, self.ell)

    @classmethod
    def random(cls, m: int, k: int, alpha: int, q: int, ell: int = 1, rng=None) -> FileStore:
        rng = np.random.default_rng(rng)
        return cls(q, rng.integers(0, q, size=(m, k, alpha, ell), dtype=np.int64))

    def __eq__(self, other):
        if not isinstance(other, FileStore):
            return NotImplemented
        return self.q == other.q and np.array_equal(self.data, other.data)


@dataclass(frozen=True, eq=False)
class NodeStore:
    index: int
    W: np.ndarray  # (m*alpha, ell)
    q: int

    def symbol(self, pos: int) -> ExtSymbol:
        return ExtSymbol.from_array(self.W[pos], self.q)


def encode_store(files: FileStore, code: MdsCode) -> list[NodeStore]:
    if files.k != code.k:
        raise StoreError(f"files have {files.k} blocks, code expects k={code.k}")
    if files.q != code.q:
        raise StoreError(f"files over GF({files.q}), code over GF({code.q})")
    # (m*alpha*ell, k) @ (k, n) -> per-node columns
    flat = np.moveaxis(files.data, 1, -1).reshape(-1, files.k)
    coded = matmul_mod(flat, code.generator.data, code.q)
    coded = coded.reshape(files.m * files.alpha, files.ell, code.n)
    nodes = []
    for i in range(code.n):
        w = np.ascontiguousarray(coded[:, :, i])
        w.setflags(write=False)
        nodes.append(NodeStore(i + 1, w, code.q))
    return nodes


def erasure_reconstruct(code: MdsCode, symbols: Mapping[int, object]) -> np.ndarray:
    """Recover the k block symbols of one stripe from any k node symbols.

    ``symbols`` maps 1-based node index to that node's symbol (an
    :class:`ExtSymbol`, int, or coordinate array).  Returns a (k, ell) array.
    """
    if len(symbols) != code.k:
        raise StoreError(f"need exactly k={code.k} node symbols, got {len(symbols)}")
    nodes = sorted(symbols)
    rows = []
    for i in nodes:
        s = symbols[i]
        rows.append(s.coords if isinstance(s, ExtSymbol) else np.atleast_1d(np.asarray(s)))
    y = np.array(rows, dtype=np.int64)
    sub = code.generator.columns([i - 1 for i in nodes])
    try:
        inv = sub.T.inverse()
    except FieldError:
        raise StoreError(f"generator columns {nodes} are singular; code is not MDS") from None
    return matmul_mod(inv.data, y, code.q)


# -- store document ---------------------------------------------------------

def _files_to_json(files: FileStore) -> list:
    out = []
    for x in range(files.m):
        mat = []
        for b in range(files.k):
            row = []
            for t in range(files.alpha):
                coords = [int(c) for c in files.data[x, b, t]]
                row.append(coords[0] if files.ell == 1 else coords)
            mat.append(row)
        out.append(mat)
    return out


def files_from_json(raw, k: int, alpha: int, ell: int, q: int) -> FileStore:
    """Parse a list of k x alpha matrices; entries are ints (ell = 1) or ell-lists."""
    if not isinstance(raw, list) or not raw:
        raise StoreError("m >= 1 required")
    problems = []
    data = np.zeros((len(raw), k, alpha, ell), dtype=np.int64)
    for x, mat in enumerate(raw, start=1):
        if not isinstance(mat, list) or len(mat) != k or any(
            not isinstance(r, list) or len(r) != alpha for r in mat
        ):
            shape = (len(mat), len(mat[0]) if mat and isinstance(mat[0], list) else "?") \
                if isinstance(mat, list) else type(mat).__name__
            problems.append(f"file {x}: expected shape {k}x{alpha}, got {shape}")
            continue
        for b, row in enumerate(mat):
            for t, entry in enumerate(row):
                coords = [entry] if isinstance(entry, int) else entry
                if not isinstance(coords, list) or len(coords) != ell or not all(
                    isinstance(c, int) for c in coords
                ):
                    problems.append(f"file {x}[{b + 1},{t + 1}]: expected {ell} integer coordinate(s)")
                    continue
                if any(c < 0 or c >= q for c in coords):
                    problems.append(f"file {x}[{b + 1},{t + 1}]: coordinates must lie in [0, {q})")
                    continue
                data[x - 1, b, t] = coords
    if problems:
        raise StoreError("; ".join(problems))
    return FileStore(q, data)


@dataclass(frozen=True)
class StoreDocument:
    """Everything in a store file: the code, the files and (optionally) nu."""

    code: MdsCode
    files: FileStore
    nu: int | None = None

    def to_json(self) -> dict:
        nodes = encode_store(self.files, self.code)
        doc = {
            "q": self.code.q,
            "ell": self.files.ell,
            "n": self.code.n,
            "k": self.code.k,
            "m": self.files.m,
            "alpha": self.files.alpha,
            "generator": self.code.generator.tolist(),
            "files": _files_to_json(self.files),
            "nodes": [
                [int(v[0]) if self.files.ell == 1 else [int(c) for c in v] for v in node.W]
                for node in nodes
            ],
        }
        if self.nu is not None:
            doc["nu"] = self.nu
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> StoreDocument:
        missing = [key for key in ("q", "ell", "n", "k", "m", "alpha", "generator", "files") if key not in doc]
        if missing:
            raise StoreError(f"store document missing keys: {', '.join(missing)}")
        q, ell, n, k, m, alpha = (doc[key] for key in ("q", "ell", "n", "k", "m", "alpha"))
        if not is_prime(q):
            raise StoreError(f"q={q} is not prime")
        try:
            gen = FieldMatrix.from_rows(doc["generator"], q)
        except (FieldError, ValueError) as exc:
            raise StoreError(f"bad generator: {exc}") from None
        code = MdsCode(n, k, gen)
        if not code.is_systematic:
            raise StoreError("generator is not systematic (left k x k block must be identity)")
        bad = list(non_mds_subsets(gen, k, limit=1))
        if bad:
            raise StoreError(f"generator is not MDS: columns {bad[0]} are dependent")
        files = files_from_json(doc["files"], k, alpha, ell, q)
        if files.m != m:
            raise StoreError(f"m={m} but {files.m} files present")
        nu = doc.get("nu")
        if "nodes" in doc:
            expected = cls(code, files).to_json()["nodes"]
            if doc["nodes"] != expected:
                raise StoreError("stored node vectors disagree with encoding of files")
        return cls(code, files, nu)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> StoreDocument:
        return cls.from_json(json.loads(Path(path).read_text()))
