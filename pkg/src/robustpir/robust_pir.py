"""Universal nu-robust two-layer scheme.

Layer 1 runs ``alpha/alpha_0`` copies of the base scheme on all n nodes.
Once the set U of unresponsive nodes is known, layer 2 re-asks for the
``|U| * d_0`` missing sub-responses through ``d_i - d_0`` extra subqueries
over the ``n_i = n - |U|`` responsive nodes, each with a fresh pad ``u_s``:

* a missing ``u_j + e_t`` (case 1) becomes ``u_s + e_t`` at a node that has
  never been asked about ``e_t``;
* a missing bare ``u_j`` (case 2) becomes ``u_s + u_j`` at a node that never
  received the bare ``u_j``;
* the k remaining responsive nodes get the bare ``u_s``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import lcm

import numpy as np

from .base_pir import BaseParams, Composition, Subquery, base_params, base_subquery, group_layout
from .config import SystemConfig
from .finite_field import FieldMatrix
from .pir_decoder import file_determined


class CapacityExceeded(ValueError):
    """More unresponsive nodes than the scheme tolerates."""


class InfeasiblePlan(RuntimeError):
    """No layer-2 assignment makes the file decodable."""


@dataclass(frozen=True)
class UniversalParams:
    n: int
    k: int
    nu: int
    alpha: int
    d: tuple[int, ...]  # d_0 .. d_nu
    per_i: tuple[BaseParams, ...]  # base parameters of the (n - i, k) code

    @property
    def d0(self) -> int:
        return self.d[0]

    def n_i(self, i: int) -> int:
        return self.n - i


def universal_params(n: int, k: int, nu: int) -> UniversalParams:
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < n, got n={n}, k={k}")
    if not 0 <= nu <= n - k - 1:
        raise CapacityExceeded(
            f"nu={nu} outside [0, n-k-1]; with nu >= n-k privacy needs the whole store"
        )
    per_i = tuple(base_params(n - i, k) for i in range(nu + 1))
    alpha = lcm(*(p.alpha_prime for p in per_i))
    d = tuple(p.d_prime * alpha // p.alpha_prime for p in per_i)
    return UniversalParams(n, k, nu, alpha, d, per_i)


@dataclass(frozen=True, order=True)
class MissingPart:
    """A layer-1 sub-response lost to an unresponsive node.

    ``unit`` is the absolute unit position for case 1 and ``None`` for case 2.
    """

    node: int
    subquery: int
    pad: int
    unit: int | None = None

    @property
    def case(self) -> int:
        return 1 if self.unit is not None else 2

    def sort_key(self):
        if self.case == 1:
            return (1, self.unit, self.node, self.subquery)
        return (2, self.pad, self.node, self.subquery)


@dataclass(frozen=True)
class SessionPlan:
    n: int
    k: int
    f: int
    alpha: int
    layer1: tuple[Subquery, ...]
    failed: frozenset[int] = frozenset()
    layer2: tuple[Subquery, ...] = ()

    @property
    def subqueries(self) -> tuple[Subquery, ...]:
        return self.layer1 + self.layer2

    @property
    def pad_ids(self) -> list[int]:
        return [sq.pad for sq in self.subqueries]

    def node_queries(self, node: int) -> list[Composition]:
        """Compositions received by ``node``, in session order."""
        out = []
        for sq in self.subqueries:
            if node in sq.queries and (sq.layer == 1 or node not in self.failed):
                out.append(sq.queries[node])
        return out

    def received(self) -> list[tuple[int, Composition]]:
        """(node, composition) of every response the user actually gets."""
        return [(node, c) for sq in self.subqueries for node, c in sorted(sq.queries.items())
                if node not in self.failed]


def layer1_plan(config: SystemConfig, f: int) -> SessionPlan:
    if not 1 <= f <= config.m:
        raise ValueError(f"file index {f} outside 1..{config.m}")
    p = config.params
    base = p.per_i[0]
    layout = group_layout(config.n, config.k)
    subs = []
    pad = 0
    for copy in range(p.alpha // base.alpha_prime):
        for j in range(1, base.d_prime + 1):
            pad += 1
            q = base_subquery(j, f, copy * base.alpha_prime, pad, layout, base, p.alpha)
            subs.append(Subquery(pad, 1, pad, q))
    return SessionPlan(config.n, config.k, f, p.alpha, tuple(subs))


def classify_missing(failed, plan: SessionPlan, nu: int | None = None) -> list[MissingPart]:
    failed = frozenset(failed)
    if nu is not None and len(failed) > nu:
        raise CapacityExceeded(f"{len(failed)} unresponsive nodes exceed nu={nu}")
    out = []
    for node in sorted(failed):
        for sq in plan.layer1:
            c = sq.queries[node]
            if c.units:
                (unit,) = c.units
                out.append(MissingPart(node, sq.index, sq.pad, unit))
            else:
                out.append(MissingPart(node, sq.index, sq.pad))
    return out


def _history(plan: SessionPlan, responsive):
    units = {i: set() for i in responsive}
    pure = {i: set() for i in responsive}
    embedded = {i: set() for i in responsive}
    for sq in plan.subqueries:
        for node, c in sq.queries.items():
            if node not in units:
                continue
            units[node].update(c.units)
            if c.is_pure_pad:
                pure[node].add(c.pads[0])
            else:
                embedded[node].update(p for p in c.pads if p != sq.pad)
    return units, pure, embedded


def layer2_plan(config: SystemConfig, plan: SessionPlan, failed) -> SessionPlan:
    """Extend ``plan`` with the layer-2 subqueries for failure set ``failed``.

    Parts (case 1 by unit, then case 2 by pad) are chunked n_i - k per
    subquery.  Each part goes to an eligible responsive node not yet used in
    its subquery.  Preference: nodes that carried a payload in layer 1 (so the
    bare-pad nodes keep anchoring interference), then fewest layer-2 payloads
    so far, then lowest index.  The search backtracks until the whole plan
    passes a decodability rank check.
    """
    failed = frozenset(failed)
    p = config.params
    i = len(failed)
    if i > p.nu:
        raise CapacityExceeded(f"{i} unresponsive nodes exceed nu={p.nu}")
    if not failed <= set(range(1, config.n + 1)):
        raise ValueError(f"failure set {sorted(failed)} names unknown nodes")
    if i == 0:
        return SessionPlan(plan.n, plan.k, plan.f, plan.alpha, plan.layer1, failed)

    parts = sorted(classify_missing(failed, plan, p.nu), key=MissingPart.sort_key)
    width = config.n - i - config.k
    n_sub = p.d[i] - p.d0
    assert len(parts) == width * n_sub, "counting identity violated"

    responsive = [x for x in range(1, config.n + 1) if x not in failed]
    units, pure, embedded = _history(plan, responsive)
    load = {x: 0 for x in responsive}
    idle = {x: all(sq.queries[x].is_pure_pad for sq in plan.layer1) for x in responsive}
    chosen: list[int] = []
    received = [(node, c) for node, c in plan.received() if node not in failed]
    code = config.code

    def build() -> tuple[Subquery, ...]:
        subs = []
        for s in range(n_sub):
            pad = p.d0 + s + 1
            queries = {x: Composition((pad,)) for x in responsive}
            for part, node in zip(parts[s * width:(s + 1) * width], chosen[s * width:(s + 1) * width]):
                if part.case == 1:
                    queries[node] = Composition((pad,), (part.unit,))
                else:
                    queries[node] = Composition((pad, part.pad))
            subs.append(Subquery(len(plan.layer1) + s + 1, 2, pad, queries))
        return tuple(subs)

    def eligible(part: MissingPart, node: int) -> bool:
        if part.case == 1:
            return part.unit not in units[node]
        return part.pad not in pure[node] and part.pad not in embedded[node]

    def search(idx: int):
        if idx == len(parts):
            subs = build()
            extra = [(x, sq.queries[x]) for sq in subs for x in responsive]
            return subs if file_determined(received + extra, code, plan.f, plan.alpha) else None
        part = parts[idx]
        start = (idx // width) * width
        used = set(chosen[start:idx])
        cands = sorted((x for x in responsive if x not in used and eligible(part, x)),
                       key=lambda x: (idle[x], load[x], x))
        for node in cands:
            chosen.append(node)
            load[node] += 1
            if part.case == 1:
                units[node].add(part.unit)
            else:
                embedded[node].add(part.pad)
            result = search(idx + 1)
            if result is not None:
                return result
            chosen.pop()
            load[node] -= 1
            if part.case == 1:
                units[node].discard(part.unit)
            else:
                embedded[node].discard(part.pad)
        return None

    layer2 = search(0)
    if layer2 is None:
        raise InfeasiblePlan(
            f"no decodable layer-2 assignment for (n,k)=({config.n},{config.k}), U={sorted(failed)}"
        )
    return SessionPlan(plan.n, plan.k, plan.f, plan.alpha, plan.layer1, failed, layer2)


@lru_cache(maxsize=4096)
def _cached_plan(n: int, k: int, q: int, m: int, nu: int, f: int, failed: tuple[int, ...]) -> SessionPlan:
    cfg = SystemConfig(n, k, q, m, nu)
    return layer2_plan(cfg, layer1_plan(cfg, f), frozenset(failed))


def session_plan(config: SystemConfig, f: int, failed=()) -> SessionPlan:
    """Complete symbolic plan (both layers) for retrieving file ``f`` under ``failed``.

    Plans depend only on the configuration, ``f`` and the failure set, never
    on pad values, so they are memoized.
    """
    failed = tuple(sorted(set(failed)))
    if len(failed) > config.nu:
        raise CapacityExceeded(f"{len(failed)} unresponsive nodes exceed nu={config.nu}")
    return _cached_plan(config.n, config.k, config.q, config.m, config.nu, f, failed)


def draw_pads(pad_ids, length: int, q: int, rng: np.random.Generator) -> dict[int, np.ndarray]:
    """Fresh i.i.d. uniform pads over GF(q)^length."""
    return {p: rng.integers(0, q, size=length, dtype=np.int64) for p in pad_ids}


def plan_violations(plan: SessionPlan, config: SystemConfig) -> list[str]:
    """Structural invariants every emitted plan must satisfy; returns problems found."""
    problems = []
    n_i = config.n - len(plan.failed)
    for node in range(1, config.n + 1):
        seen_units: set[int] = set()
        pure: set[int] = set()
        secondary: set[int] = set()
        for sq in plan.subqueries:
            if node not in sq.queries or (sq.layer == 2 and node in plan.failed):
                continue
            c = sq.queries[node]
            if sq.pad not in c.pads:
                problems.append(f"node {node}, subquery {sq.index}: fresh pad missing")
            dup = seen_units & set(c.units)
            if dup:
                problems.append(f"node {node} asked twice about unit(s) {sorted(dup)}")
            seen_units.update(c.units)
            if c.is_pure_pad:
                pure.add(sq.pad)
            for old in c.pads:
                if old == sq.pad:
                    continue
                if old in secondary:
                    problems.append(f"node {node} received u{old} as a secondary pad twice")
                secondary.add(old)
        if pure & secondary:
            problems.append(f"node {node} got bare and re-padded copies of {sorted(pure & secondary)}")
    for sq in plan.layer2:
        if set(sq.queries) & plan.failed:
            problems.append(f"subquery {sq.index} queries a failed node")
        if len(sq.queries) != n_i:
            problems.append(f"subquery {sq.index} reaches {len(sq.queries)} nodes, expected {n_i}")
        pure_nodes = sq.pure_nodes()
        if len(pure_nodes) != config.k:
            problems.append(f"subquery {sq.index} has {len(pure_nodes)} bare-pad nodes, expected {config.k}")
        elif FieldMatrix(np.array([config.code.column(x) for x in pure_nodes]), config.q).rank() != config.k:
            problems.append(f"subquery {sq.index}: bare-pad nodes do not span the code")
    return problems
