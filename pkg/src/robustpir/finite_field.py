"""Prime-field arithmetic and dense linear algebra over GF(q).

Scalars are :class:`FieldElement`; matrices wrap an ``int64`` numpy array
whose entries are kept reduced modulo ``q``.  Data symbols from GF(q^l) are
carried as length-l coordinate vectors (:class:`ExtSymbol`); every operation
the retrieval scheme performs on data is GF(q)-linear, so no extension-field
multiplication is ever required.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class FieldError(ValueError):
    """Invalid field operation (modulus mismatch, zero inverse, bad modulus)."""


class InconsistentSystemError(ArithmeticError):
    """A linear system has no solution."""


def is_prime(q: int) -> bool:
    if q < 2:
        return False
    if q % 2 == 0:
        return q == 2
    p = 3
    while p * p <= q:
        if q % p == 0:
            return False
        p += 2
    return True


def check_modulus(q: int) -> int:
    if not isinstance(q, (int, np.integer)) or not is_prime(int(q)):
        raise FieldError(f"modulus must be prime, got {q!r}")
    # products of two residues must fit in int64
    if q >= 2**31:
        raise FieldError(f"modulus {q} too large for int64 arithmetic")
    return int(q)


def inv_mod(a: int, q: int) -> int:
    a %= q
    if a == 0:
        raise FieldError("zero has no multiplicative inverse")
    return pow(a, -1, q)


@dataclass(frozen=True)
class FieldElement:
    value: int
    q: int

    def __post_init__(self):
        check_modulus(self.q)
        object.__setattr__(self, "value", int(self.value) % self.q)

    def _coerce(self, other) -> int:
        if isinstance(other, FieldElement):
            if other.q != self.q:
                raise FieldError(f"modulus mismatch: GF({self.q}) vs GF({other.q})")
            return other.value
        if isinstance(other, (int, np.integer)):
            return int(other)
        return NotImplemented

    def __add__(self, other):
        v = self._coerce(other)
        if v is NotImplemented:
            return v
        return FieldElement(self.value + v, self.q)

    __radd__ = __add__

    def __sub__(self, other):
        v = self._coerce(other)
        if v is NotImplemented:
            return v
        return FieldElement(self.value - v, self.q)

    def __rsub__(self, other):
        v = self._coerce(other)
        if v is NotImplemented:
            return v
        return FieldElement(v - self.value, self.q)

    def __mul__(self, other):
        v = self._coerce(other)
        if v is NotImplemented:
            return v
        return FieldElement(self.value * v, self.q)

    __rmul__ = __mul__

    def __neg__(self):
        return FieldElement(-self.value, self.q)

    def inverse(self) -> FieldElement:
        return FieldElement(inv_mod(self.value, self.q), self.q)

    def __truediv__(self, other):
        v = self._coerce(other)
        if v is NotImplemented:
            return v
        return FieldElement(self.value * inv_mod(v, self.q), self.q)

    def __int__(self):
        return self.value

    def __repr__(self):
        return f"{self.value} (mod {self.q})"


def ff_add(a: FieldElement, b: FieldElement) -> FieldElement:
    return a + b


def ff_mul_inv(a: FieldElement) -> FieldElement:
    return a.inverse()


@dataclass(frozen=True)
class ExtSymbol:
    """A GF(q^l) symbol as its l coordinates over GF(q)."""

    coords: tuple[int, ...]
    q: int

    def __post_init__(self):
        check_modulus(self.q)
        object.__setattr__(self, "coords", tuple(int(c) % self.q for c in self.coords))

    @classmethod
    def zero(cls, ell: int, q: int) -> ExtSymbol:
        return cls((0,) * ell, q)

    @classmethod
    def from_array(cls, arr, q: int) -> ExtSymbol:
        return cls(tuple(int(x) for x in np.asarray(arr).ravel()), q)

    @property
    def ell(self) -> int:
        return len(self.coords)

    def __add__(self, other: ExtSymbol) -> ExtSymbol:
        if not isinstance(other, ExtSymbol):
            return NotImplemented
        if other.q != self.q or other.ell != self.ell:
            raise FieldError("ExtSymbol field or degree mismatch")
        return ExtSymbol(tuple(a + b for a, b in zip(self.coords, other.coords)), self.q)

    def scale(self, c) -> ExtSymbol:
        c = int(c.value if isinstance(c, FieldElement) else c)
        return ExtSymbol(tuple(c * a for a in self.coords), self.q)

    def __rmul__(self, c):
        if isinstance(c, (FieldElement, int, np.integer)):
            if isinstance(c, FieldElement) and c.q != self.q:
                raise FieldError("modulus mismatch")
            return self.scale(c)
        return NotImplemented

    def to_array(self) -> np.ndarray:
        return np.array(self.coords, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class FieldMatrix:
    """Dense matrix over GF(q).  Entries are stored reduced, never mutated."""

    data: np.ndarray
    q: int

    def __post_init__(self):
        check_modulus(self.q)
        arr = np.array(self.data, dtype=np.int64, copy=True)
        if arr.ndim != 2:
            raise FieldError(f"FieldMatrix must be 2-D, got shape {arr.shape}")
        arr %= self.q
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]], q: int) -> FieldMatrix:
        rows = [list(r) for r in rows]
        if rows and any(len(r) != len(rows[0]) for r in rows):
            raise FieldError("ragged rows")
        if not rows:
            return cls(np.zeros((0, 0), dtype=np.int64), q)
        return cls(np.array(rows, dtype=np.int64), q)

    @classmethod
    def identity(cls, size: int, q: int) -> FieldMatrix:
        return cls(np.eye(size, dtype=np.int64), q)

    @classmethod
    def zeros(cls, rows: int, cols: int, q: int) -> FieldMatrix:
        return cls(np.zeros((rows, cols), dtype=np.int64), q)

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    def __getitem__(self, idx) -> FieldElement:
        i, j = idx
        return FieldElement(int(self.data[i, j]), self.q)

    def __eq__(self, other):
        if not isinstance(other, FieldMatrix):
            return NotImplemented
        return self.q == other.q and np.array_equal(self.data, other.data)

    def __hash__(self):
        return hash((self.q, self.data.shape, self.data.tobytes()))

    def __matmul__(self, other: FieldMatrix) -> FieldMatrix:
        if other.q != self.q:
            raise FieldError("modulus mismatch")
        return FieldMatrix(matmul_mod(self.data, other.data, self.q), self.q)

    @property
    def T(self) -> FieldMatrix:
        return FieldMatrix(self.data.T, self.q)

    def columns(self, idx: Iterable[int]) -> FieldMatrix:
        return FieldMatrix(self.data[:, list(idx)], self.q)

    def tolist(self) -> list[list[int]]:
        return self.data.tolist()

    def rank(self) -> int:
        return rank(self)

    def inverse(self) -> FieldMatrix:
        n, m = self.shape
        if n != m:
            raise FieldError("inverse of non-square matrix")
        aug = np.concatenate([self.data, np.eye(n, dtype=np.int64)], axis=1)
        red, pivots = rref(aug, self.q, ncols=n)
        if len(pivots) != n:
            raise FieldError("matrix is singular")
        return FieldMatrix(red[:, n:], self.q)


def matmul_mod(a: np.ndarray, b: np.ndarray, q: int) -> np.ndarray:
    """(a @ b) mod q without int64 overflow for q < 2**31."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    inner = a.shape[-1]
    if inner == 0:
        return np.zeros(a.shape[:-1] + b.shape[1:], dtype=np.int64)
    # each partial product < q**2; chunk so the running sum stays below 2**63
    step = max(1, (2**62) // ((q - 1) ** 2 or 1))
    if inner <= step:
        return (a @ b) % q
    out = np.zeros(a.shape[:-1] + b.shape[1:], dtype=np.int64)
    for s in range(0, inner, step):
        out = (out + a[..., s:s + step] @ b[s:s + step]) % q
    return out


def rref(mat: np.ndarray, q: int, ncols: int | None = None) -> tuple[np.ndarray, list[int]]:
    """Reduced row-echelon form over GF(q).

    Only the first ``ncols`` columns are eligible as pivots (the remainder are
    carried along, e.g. right-hand sides).  Pivot choice is the first nonzero
    entry scanning rows top-down, columns left to right.
    """
    a = np.array(mat, dtype=np.int64, copy=True) % q
    nrows = a.shape[0]
    ncols = a.shape[1] if ncols is None else ncols
    pivots: list[int] = []
    row = 0
    for col in range(ncols):
        if row >= nrows:
            break
        nz = np.nonzero(a[row:, col])[0]
        if nz.size == 0:
            continue
        p = row + int(nz[0])
        if p != row:
            a[[row, p]] = a[[p, row]]
        a[row] = (a[row] * inv_mod(int(a[row, col]), q)) % q
        factors = a[:, col].copy()
        factors[row] = 0
        nzr = np.nonzero(factors)[0]
        if nzr.size:
            a[nzr] = (a[nzr] - np.outer(factors[nzr], a[row])) % q
        pivots.append(col)
        row += 1
    return a, pivots


def rank(a: FieldMatrix) -> int:
    if a.rows == 0 or a.cols == 0:
        return 0
    return len(rref(a.data, a.q)[1])


@dataclass(frozen=True)
class Solution:
    """Outcome of :func:`gaussian_solve`.

    ``values[c]`` is meaningful only where ``determined[c]`` is true: those
    unknowns take the same value in every solution of the system.
    """

    values: np.ndarray  # (cols, ell)
    pivots: tuple[int, ...]
    free: tuple[int, ...]
    determined: np.ndarray = field(repr=False)  # bool, (cols,)

    @property
    def all_determined(self) -> bool:
        return bool(self.determined.all())


def _as_rhs(y, q: int) -> np.ndarray:
    if isinstance(y, np.ndarray):
        arr = y.astype(np.int64)
    else:
        items = list(y)
        if items and isinstance(items[0], ExtSymbol):
            arr = np.array([s.coords for s in items], dtype=np.int64)
        else:
            arr = np.array(items, dtype=np.int64)
    if arr.ndim == 1:
        arr = arr[:, None]
    return arr % q


def determined_columns(reduced: np.ndarray, pivots: Sequence[int], ncols: int) -> np.ndarray:
    """Columns whose value does not depend on any free variable."""
    det = np.zeros(ncols, dtype=bool)
    pivset = set(pivots)
    free = [c for c in range(ncols) if c not in pivset]
    for r, c in enumerate(pivots):
        if not free or not reduced[r, free].any():
            det[c] = True
    return det


def gaussian_solve(a: FieldMatrix, y) -> Solution:
    """Solve ``a x = y`` over GF(q), coordinatewise over the l columns of ``y``.

    ``y`` may be a sequence of :class:`ExtSymbol`, a sequence of ints, or an
    array of shape ``(rows,)`` / ``(rows, ell)``.  Free variables are set to
    zero in ``values``.  Raises :class:`InconsistentSystemError` when no
    solution exists.
    """
    q = a.q
    rhs = _as_rhs(y, q)
    if rhs.shape[0] != a.rows:
        raise FieldError(f"rhs has {rhs.shape[0]} rows, matrix has {a.rows}")
    n = a.cols
    aug = np.concatenate([a.data, rhs], axis=1)
    red, pivots = rref(aug, q, ncols=n)
    if red[len(pivots):, n:].any():
        raise InconsistentSystemError("inconsistent linear system")
    values = np.zeros((n, rhs.shape[1]), dtype=np.int64)
    for r, c in enumerate(pivots):
        values[c] = red[r, n:]
    pivset = set(pivots)
    free = tuple(c for c in range(n) if c not in pivset)
    return Solution(values, tuple(pivots), free, determined_columns(red, pivots, n))


def vandermonde(points: Sequence[int], k: int, q: int) -> FieldMatrix:
    """k x len(points) matrix with entry (b, j) = points[j] ** b."""
    return FieldMatrix.from_rows([[pow(int(x), b, q) for x in points] for b in range(k)], q)
