"""Non-robust base scheme on an (n, k) systematic MDS code.

One subquery hands every node a pad ``u`` or ``u + e_t``.  Nodes are split
into groups after writing ``n - k = beta*k + r``:

* group 1, the k systematic nodes: ``r`` rows carry a unit vector, the
  remaining ``k - r`` get the bare pad.  The payload rows shift cyclically
  downwards from one subquery to the next;
* ``beta`` parity groups of k nodes: every node of group ``s`` gets
  ``u + e_{r' + (s-2)*d' + j}`` in subquery ``j``;
* the last ``r`` parity nodes get the bare pad.

Every subquery therefore has exactly k bare-pad recipients (which pin down the
interference) and n - k payload recipients.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gcd, lcm

import numpy as np


@dataclass(frozen=True, order=True)
class Composition:
    """Symbolic content of one query: a sum of pads and unit vectors.

    ``pads`` are pad ids, ``units`` are 1-based positions in the length
    ``m*alpha`` query vector.
    """

    pads: tuple[int, ...] = ()
    units: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "pads", tuple(sorted(self.pads)))
        object.__setattr__(self, "units", tuple(sorted(self.units)))

    @property
    def is_pure_pad(self) -> bool:
        return len(self.pads) == 1 and not self.units

    def label(self, unit_offset: int = 0) -> str:
        """Human-readable form, e.g. ``u3+u1`` or ``u1+e2``.

        ``unit_offset`` is subtracted from unit positions so a file's window
        can be shown as e1..e_alpha.
        """
        parts = [f"u{p}" for p in sorted(self.pads, reverse=True)]
        parts += [f"e{t - unit_offset}" for t in self.units]
        return "+".join(parts) if parts else "0"

    def to_json(self) -> dict:
        return {"pads": list(self.pads), "units": list(self.units)}

    @classmethod
    def from_json(cls, doc: dict) -> Composition:
        return cls(tuple(doc["pads"]), tuple(doc["units"]))


@dataclass(frozen=True, eq=False)
class QueryVector:
    """A realized query (coefficients over GF(q)) with its composition tag."""

    coeffs: np.ndarray
    composition: Composition
    q: int

    @classmethod
    def build(cls, composition: Composition, pads: dict[int, np.ndarray] | np.ndarray, q: int,
              length: int | None = None) -> QueryVector:
        """Realize ``composition``; ``pads[j]`` is the value of pad ``j``."""
        if length is None:
            length = len(next(iter(pads.values()))) if isinstance(pads, dict) else pads.shape[1]
        coeffs = np.zeros(length, dtype=np.int64)
        for p in composition.pads:
            coeffs = coeffs + np.asarray(pads[p], dtype=np.int64)
        for t in composition.units:
            if not 1 <= t <= length:
                raise IndexError(f"unit position {t} outside query length {length}")
            coeffs[t - 1] += 1
        coeffs %= q
        coeffs.setflags(write=False)
        return cls(coeffs, composition, q)

    def consistent_with(self, pads) -> bool:
        expected = QueryVector.build(self.composition, pads, self.q, len(self.coeffs))
        return np.array_equal(expected.coeffs, self.coeffs)


@dataclass(frozen=True)
class BaseParams:
    n: int
    k: int
    alpha_prime: int  # stripes covered by one copy
    d_prime: int  # subqueries per copy

    @property
    def g(self) -> int:
        return gcd(self.k, self.n - self.k)


def base_params(n: int, k: int) -> BaseParams:
    if not 1 <= k < n:
        raise ValueError(f"base scheme needs 1 <= k < n, got n={n}, k={k}")
    L = lcm(k, n - k)
    return BaseParams(n, k, L // k, L // (n - k))


@dataclass(frozen=True)
class GroupLayout:
    n: int
    k: int
    beta: int
    r: int
    groups: tuple[tuple[int, ...], ...]  # 1-based node ids; groups[0] is group 1

    @property
    def systematic(self) -> tuple[int, ...]:
        return self.groups[0]

    @property
    def parity_groups(self) -> tuple[tuple[int, ...], ...]:
        return self.groups[1:1 + self.beta]

    @property
    def tail(self) -> tuple[int, ...]:
        return self.groups[-1]


def group_layout(n: int, k: int) -> GroupLayout:
    if not 1 <= k < n:
        raise ValueError(f"group layout needs 1 <= k < n, got n={n}, k={k}")
    beta, r = divmod(n - k, k)
    groups = [tuple(range(1, k + 1))]
    for s in range(beta):
        start = k + s * k + 1
        groups.append(tuple(range(start, start + k)))
    groups.append(tuple(range(k + beta * k + 1, n + 1)))
    return GroupLayout(n, k, beta, r, tuple(groups))


def base_subquery(j: int, f: int, stripe_offset: int, pad: int, layout: GroupLayout,
                  params: BaseParams, alpha: int) -> dict[int, Composition]:
    """Compositions sent to each node in subquery ``j`` (1-based) of one copy.

    Unit positions are absolute: ``(f-1)*alpha + stripe_offset + local`` with
    ``local`` in 1..alpha'.  With g = gcd(k, n-k), group 1 covers r/g stripes,
    each carried by g consecutive payload rows; rows shift down by g nodes per
    subquery so that after d' = k/g subqueries every such stripe has been
    seen by all k systematic nodes.  For g = 1 this is a shift by one node
    with row ``rho`` always carrying stripe ``rho``.
    """
    if not 1 <= j <= params.d_prime:
        raise IndexError(f"subquery {j} outside 1..{params.d_prime}")
    if stripe_offset < 0 or stripe_offset + params.alpha_prime > alpha:
        raise IndexError(f"stripe window {stripe_offset}+{params.alpha_prime} exceeds alpha={alpha}")
    k, r, g = layout.k, layout.r, params.g
    base = (f - 1) * alpha + stripe_offset
    out = {node: Composition((pad,)) for node in range(1, layout.n + 1)}
    for rho in range(r):
        node = (rho + (j - 1) * g) % k + 1
        out[node] = Composition((pad,), (base + rho // g + 1,))
    group1_stripes = r // g
    for s, members in enumerate(layout.parity_groups, start=2):
        t = base + group1_stripes + (s - 2) * params.d_prime + j
        for node in members:
            out[node] = Composition((pad,), (t,))
    return out


@dataclass(frozen=True)
class Subquery:
    """One round of queries: a fresh pad and the composition sent to each node."""

    index: int  # 1-based position within the session
    layer: int
    pad: int
    queries: dict[int, Composition]

    def payload_nodes(self) -> list[int]:
        return sorted(i for i, c in self.queries.items() if not c.is_pure_pad)

    def pure_nodes(self) -> list[int]:
        return sorted(i for i, c in self.queries.items() if c.is_pure_pad)

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "layer": self.layer,
            "pad": self.pad,
            "queries": {str(i): c.to_json() for i, c in sorted(self.queries.items())},
        }

    @classmethod
    def from_json(cls, doc: dict) -> Subquery:
        return cls(doc["index"], doc["layer"], doc["pad"],
                   {int(i): Composition.from_json(c) for i, c in doc["queries"].items()})
