"""Turn queries and responses into a linear system and recover the file.

A node ``i`` answering a query of composition (pads P, units E) returns

    sum_{j in P} sum_b G[b,i] * I_b(u_j)  +  sum_{t in E} sum_b G[b,i] * X_f[b,t]

where ``I_b(u_j) = u_j . block_b`` is the interference of pad ``j`` on block
``b``.  Unknown order: file symbols first (stripe-major, block inner), then
interference (pad id ascending, block inner).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .base_pir import Composition, QueryVector, Subquery
from .config import SystemConfig
from .finite_field import FieldMatrix, InconsistentSystemError, gaussian_solve, rref, determined_columns
from .mds_storage import MdsCode


class DecodeError(RuntimeError):
    """The file could not be uniquely recovered from the responses."""


class ProtocolViolation(RuntimeError):
    """A transcript that contradicts the protocol (e.g. response from a failed node)."""


@dataclass(frozen=True)
class UnknownIndex:
    """Column layout of an equation system."""

    k: int
    alpha: int
    pads: tuple[int, ...]

    @property
    def n_file(self) -> int:
        return self.k * self.alpha

    @property
    def size(self) -> int:
        return self.n_file + self.k * len(self.pads)

    def file_col(self, b: int, t: int) -> int:
        """Column of X_f[b, t]; b and t are 1-based."""
        return (t - 1) * self.k + (b - 1)

    def pad_col(self, pad: int, b: int) -> int:
        return self.n_file + self.pads.index(pad) * self.k + (b - 1)

    def labels(self) -> list[str]:
        out = [f"X[{b},{t}]" for t in range(1, self.alpha + 1) for b in range(1, self.k + 1)]
        out += [f"I{b}(u{p})" for p in self.pads for b in range(1, self.k + 1)]
        return out


def equation_row(composition: Composition, node: int, code: MdsCode, f: int,
                 index: UnknownIndex) -> np.ndarray:
    col = code.column(node)
    row = np.zeros(index.size, dtype=np.int64)
    lo = (f - 1) * index.alpha
    for p in composition.pads:
        for b in range(1, index.k + 1):
            row[index.pad_col(p, b)] += col[b - 1]
    for u in composition.units:
        t = u - lo
        if not 1 <= t <= index.alpha:
            raise ProtocolViolation(f"unit e{u} lies outside the window of file {f}")
        for b in range(1, index.k + 1):
            row[index.file_col(b, t)] += col[b - 1]
    return row % code.q


def coefficient_matrix(entries: Iterable[tuple[int, Composition]], code: MdsCode, f: int,
                       alpha: int) -> tuple[np.ndarray, UnknownIndex]:
    """Coefficient rows for ``(node, composition)`` pairs, independent of any pad values."""
    entries = list(entries)
    pads = tuple(sorted({p for _, c in entries for p in c.pads}))
    index = UnknownIndex(code.k, alpha, pads)
    rows = [equation_row(c, node, code, f, index) for node, c in entries]
    mat = np.array(rows, dtype=np.int64).reshape(len(rows), index.size)
    return mat, index


def file_determined(entries: Iterable[tuple[int, Composition]], code: MdsCode, f: int,
                    alpha: int) -> bool:
    """True iff every X_f[b, t] is pinned down by the given equations."""
    mat, index = coefficient_matrix(entries, code, f, alpha)
    if mat.shape[0] == 0:
        return False
    red, pivots = rref(mat, code.q)
    det = determined_columns(red, pivots, index.size)
    return bool(det[: index.n_file].all())


@dataclass
class Transcript:
    """Full record of one retrieval session."""

    config: SystemConfig
    f: int
    seed: int | None
    failed: frozenset[int] = frozenset()
    subqueries: list[Subquery] = field(default_factory=list)
    pads: dict[int, np.ndarray] = field(default_factory=dict)
    responses: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)
    outcome: str = "pending"
    generator: list[list[int]] | None = None
    decoded: np.ndarray | None = field(default=None, compare=False, repr=False)

    @property
    def downloaded(self) -> int:
        return len(self.responses)

    @property
    def responsive(self) -> int:
        return self.config.n - len(self.failed)

    def query(self, subquery: Subquery, node: int) -> QueryVector:
        return QueryVector.build(subquery.queries[node], self.pads, self.config.q,
                                 self.config.query_length)

    def to_json(self) -> dict:
        subs = []
        for sq in self.subqueries:
            doc = sq.to_json()
            for node, entry in doc["queries"].items():
                entry["coeffs"] = self.query(sq, int(node)).coeffs.tolist()
            subs.append(doc)
        return {
            "config": self.config.to_json(),
            "f": self.f,
            "seed": self.seed,
            "failed": sorted(self.failed),
            "outcome": self.outcome,
            "generator": self.generator,
            "pads": {str(p): v.tolist() for p, v in sorted(self.pads.items())},
            "subqueries": subs,
            "responses": [
                {"subquery": s, "node": i, "symbol": v.tolist()}
                for (s, i), v in sorted(self.responses.items())
            ],
            "downloaded": self.downloaded,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, doc: dict) -> Transcript:
        cfg = SystemConfig.from_json(doc["config"])
        t = cls(cfg, doc["f"], doc["seed"], frozenset(doc["failed"]),
                [Subquery.from_json(s) for s in doc["subqueries"]],
                {int(p): np.array(v, dtype=np.int64) for p, v in doc["pads"].items()},
                {(r["subquery"], r["node"]): np.array(r["symbol"], dtype=np.int64)
                 for r in doc["responses"]},
                doc["outcome"], doc.get("generator"))
        for sdoc, sq in zip(doc["subqueries"], t.subqueries):
            for node, entry in sdoc["queries"].items():
                if "coeffs" in entry and entry["coeffs"] != t.query(sq, int(node)).coeffs.tolist():
                    raise ProtocolViolation(
                        f"subquery {sq.index}, node {node}: coefficients disagree with composition"
                    )
        if doc.get("downloaded", t.downloaded) != t.downloaded:
            raise ProtocolViolation("download count disagrees with recorded responses")
        return t

    @classmethod
    def loads(cls, text: str) -> Transcript:
        return cls.from_json(json.loads(text))


@dataclass(frozen=True, eq=False)
class EquationSystem:
    index: UnknownIndex
    matrix: FieldMatrix
    rhs: np.ndarray  # (rows, ell)
    sources: tuple[tuple[int, int], ...]  # (subquery index, node) per row

    @property
    def unknowns(self) -> list[str]:
        return self.index.labels()


def build_system(transcript: Transcript, code: MdsCode, f: int | None = None) -> EquationSystem:
    f = transcript.f if f is None else f
    by_index = {sq.index: sq for sq in transcript.subqueries}
    entries: list[tuple[int, Composition]] = []
    rhs = []
    sources = []
    for (s, node), value in sorted(transcript.responses.items()):
        if node in transcript.failed:
            raise ProtocolViolation(f"response from failed node {node} in subquery {s}")
        sq = by_index.get(s)
        if sq is None or node not in sq.queries:
            raise ProtocolViolation(f"response to unknown query (subquery {s}, node {node})")
        entries.append((node, sq.queries[node]))
        rhs.append(np.atleast_1d(value))
        sources.append((s, node))
    mat, index = coefficient_matrix(entries, code, f, transcript.config.alpha)
    if not entries:
        # still expose the file unknowns so decode reports them as missing
        index = UnknownIndex(code.k, transcript.config.alpha, ())
        mat = np.zeros((0, index.size), dtype=np.int64)
    ell = transcript.config.ell
    rhs_arr = np.array(rhs, dtype=np.int64).reshape(len(rhs), ell)
    return EquationSystem(index, FieldMatrix(mat, code.q), rhs_arr, tuple(sources))


def decode_file(system: EquationSystem) -> np.ndarray:
    """Solve the system; return X_f as a (k, alpha, ell) array."""
    try:
        sol = gaussian_solve(system.matrix, system.rhs)
    except InconsistentSystemError as exc:
        raise DecodeError(f"responses are inconsistent: {exc}") from None
    idx = system.index
    undetermined = [lab for c, lab in enumerate(idx.labels()[: idx.n_file]) if not sol.determined[c]]
    if undetermined:
        raise DecodeError(f"file symbols not determined: {', '.join(undetermined)}")
    ell = system.rhs.shape[1]
    out = np.zeros((idx.k, idx.alpha, ell), dtype=np.int64)
    for t in range(1, idx.alpha + 1):
        for b in range(1, idx.k + 1):
            out[b - 1, t - 1] = sol.values[idx.file_col(b, t)]
    return out


def compute_cpop(transcript: Transcript) -> Fraction:
    """Downloaded symbols per retrieved file symbol."""
    cfg = transcript.config
    return Fraction(transcript.downloaded, cfg.k * cfg.alpha)


def optimal_cpop(n: int, k: int, i: int) -> Fraction:
    return Fraction(n - i, n - i - k)


def decode_report(transcript: Transcript, decoded: np.ndarray | None, equations: int) -> dict:
    cpop = compute_cpop(transcript)
    file_doc = None
    if decoded is not None:
        if decoded.shape[-1] == 1:
            file_doc = decoded[..., 0].tolist()
        else:
            file_doc = decoded.tolist()
    return {
        "f": transcript.f,
        "decoded_file": file_doc,
        "cpop_num": cpop.numerator,
        "cpop_den": cpop.denominator,
        "equations_used": equations,
        "failure_set": sorted(transcript.failed),
        "outcome": transcript.outcome,
    }


def brute_force_decode(queries: Sequence[tuple[np.ndarray, int]], responses: np.ndarray,
                       code: MdsCode, m: int, alpha: int, f: int) -> list[np.ndarray]:
    """Every candidate X_f consistent with the responses, by exhaustive enumeration.

    ``queries`` holds (coefficient vector, node) per response; ``responses``
    has one GF(q) value per query (l = 1).  Uses only forward evaluation of
    node projections on enumerated stores: the response map is linear, so
    ``resp(X_f, rest) = resp(X_f, 0) + resp(0, rest)`` and the two halves are
    enumerated separately.  Intended for tiny fields and stores.
    """
    q, k = code.q, code.k
    coeffs = np.array([c for c, _ in queries], dtype=np.int64)
    nodes = [i for _, i in queries]
    gcols = np.array([code.column(i) for i in nodes], dtype=np.int64)  # (R, k)
    obs = np.asarray(responses, dtype=np.int64).reshape(-1) % q

    def forward(stores: np.ndarray) -> np.ndarray:
        # stores: (N, m, k, alpha) -> responses (N, R)
        n_st = stores.shape[0]
        blocks = np.moveaxis(stores, 2, 1).reshape(n_st, k, m * alpha)  # (N, k, m*alpha)
        proj = np.einsum("rl,nkl->nrk", coeffs, blocks) % q  # u . block_b per query
        return np.einsum("nrk,rk->nr", proj, gcols) % q

    def all_values(count: int) -> np.ndarray:
        grids = np.indices((q,) * count).reshape(count, -1).T if count else np.zeros((1, 0), int)
        return grids.astype(np.int64)

    cand = all_values(k * alpha).reshape(-1, k, alpha)
    stores_f = np.zeros((cand.shape[0], m, k, alpha), dtype=np.int64)
    stores_f[:, f - 1] = cand
    resp_f = forward(stores_f)

    others = m - 1
    flat = all_values(others * k * alpha)
    rest_vals = flat.reshape(flat.shape[0], others, k, alpha)
    stores_r = np.zeros((rest_vals.shape[0], m, k, alpha), dtype=np.int64)
    stores_r[:, [x for x in range(m) if x != f - 1]] = rest_vals
    reachable = {row.tobytes() for row in forward(stores_r)}

    need = (obs[None, :] - resp_f) % q
    return [cand[c] for c in range(cand.shape[0]) if need[c].tobytes() in reachable]
