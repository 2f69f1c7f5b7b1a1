"""Executable check of perfect privacy against a single (non-colluding) node.

For a fixed failure pattern, the sequence of query vectors one node receives
must have the same distribution whichever file is requested.  Small
instances are checked exactly by enumerating every pad realization; larger
ones by seeded sampling and chi-square homogeneity tests.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy.stats import chi2_contingency

from .base_pir import Composition, Subquery
from .config import SystemConfig
from .robust_pir import SessionPlan, session_plan

Planner = Callable[[SystemConfig, int, tuple], SessionPlan]

DEFAULT_CAP = 2**24


class EnumerationTooLarge(ValueError):
    pass


def leaky_planner(config: SystemConfig, f: int, failed=()) -> SessionPlan:
    """Negative control: the real plan with pads stripped from every payload query."""
    plan = session_plan(config, f, failed)

    def strip(sq: Subquery) -> Subquery:
        queries = {node: (Composition((), c.units) if c.units else c) for node, c in sq.queries.items()}
        return Subquery(sq.index, sq.layer, sq.pad, queries)

    return SessionPlan(plan.n, plan.k, plan.f, plan.alpha,
                       tuple(strip(sq) for sq in plan.layer1), plan.failed,
                       tuple(strip(sq) for sq in plan.layer2))


@dataclass(frozen=True, eq=False)
class NodeView:
    """Linear map from pad realizations to what one node sees."""

    pad_ids: tuple[int, ...]
    pad_mix: np.ndarray  # (queries, pads) 0/1
    units: np.ndarray  # (queries, length)
    q: int

    @classmethod
    def of(cls, plan: SessionPlan, node: int, length: int, q: int) -> NodeView:
        comps = plan.node_queries(node)
        pad_ids = tuple(plan.pad_ids)
        mix = np.zeros((len(comps), len(pad_ids)), dtype=np.int64)
        units = np.zeros((len(comps), length), dtype=np.int64)
        for r, c in enumerate(comps):
            for p in c.pads:
                mix[r, pad_ids.index(p)] += 1
            for t in c.units:
                units[r, t - 1] += 1
        return cls(pad_ids, mix, units, q)

    def realize(self, pads: np.ndarray) -> np.ndarray:
        """``pads``: (N, P, L) -> views (N, Q, L)."""
        return (np.einsum("qp,npl->nql", self.pad_mix, pads) + self.units[None]) % self.q


@dataclass
class QueryDistribution:
    """Distribution of a node's flattened query sequence."""

    masses: dict[tuple[int, ...], Fraction | float]
    method: str  # "exact" | "sampled"
    samples: int | None = None

    def total(self):
        return sum(self.masses.values())

    def total_variation(self, other: QueryDistribution):
        keys = set(self.masses) | set(other.masses)
        zero = Fraction(0) if self.method == "exact" else 0.0
        return sum((abs(self.masses.get(x, zero) - other.masses.get(x, zero)) for x in keys), zero) / 2


def _realizations(count: int, q: int, start: int, stop: int) -> np.ndarray:
    idx = np.arange(start, stop, dtype=np.int64)
    digits = np.empty((idx.size, count), dtype=np.int64)
    for d in range(count):
        digits[:, d] = idx % q
        idx //= q
    return digits


def enumerate_distribution(config: SystemConfig, f: int, node: int, failed=(),
                           cap: int = DEFAULT_CAP, planner: Planner = session_plan,
                           chunk: int = 1 << 16) -> QueryDistribution:
    """Exact distribution of node's view over all pad realizations."""
    plan = planner(config, f, tuple(sorted(failed)))
    L = config.query_length
    view = NodeView.of(plan, node, L, config.q)
    dims = len(view.pad_ids) * L
    total = config.q ** dims
    if total > cap:
        raise EnumerationTooLarge(f"{total} pad realizations exceed cap {cap}")
    counts: Counter = Counter()
    for start in range(0, total, chunk):
        stop = min(total, start + chunk)
        pads = _realizations(dims, config.q, start, stop).reshape(-1, len(view.pad_ids), L)
        flat = view.realize(pads).reshape(stop - start, -1)
        uniq, cnt = np.unique(flat, axis=0, return_counts=True)
        for row, c in zip(uniq, cnt):
            counts[tuple(int(x) for x in row)] += int(c)
    return QueryDistribution({k: Fraction(v, total) for k, v in counts.items()}, "exact")


def mixed_distribution(config: SystemConfig, f: int, node: int, failure_sets,
                       cap: int = DEFAULT_CAP, planner: Planner = session_plan) -> QueryDistribution:
    """View distribution when the failure pattern is uniform over ``failure_sets``."""
    failure_sets = list(failure_sets)
    acc: dict = {}
    w = Fraction(1, len(failure_sets))
    for U in failure_sets:
        d = enumerate_distribution(config, f, node, U, cap, planner)
        for key, mass in d.masses.items():
            acc[key] = acc.get(key, Fraction(0)) + w * mass
    return QueryDistribution(acc, "exact")


def sample_views(config: SystemConfig, f: int, node: int, failed, sessions: int,
                 rng: np.random.Generator, planner: Planner = session_plan) -> np.ndarray:
    """Views (sessions, queries, length) from ``sessions`` independent pad draws."""
    plan = planner(config, f, tuple(sorted(failed)))
    L = config.query_length
    view = NodeView.of(plan, node, L, config.q)
    pads = rng.integers(0, config.q, size=(sessions, len(view.pad_ids), L), dtype=np.int64)
    return view.realize(pads)


def _homogeneity(labels: list[np.ndarray], ncat: int) -> tuple[float, float]:
    table = np.stack([np.bincount(x, minlength=ncat) for x in labels]).astype(float)
    freqs = table / table.sum(axis=1, keepdims=True)
    tv = max((0.5 * np.abs(a - b).sum() for a, b in itertools.combinations(freqs, 2)), default=0.0)
    table = table[:, table.sum(axis=0) > 0]
    if table.shape[1] < 2:
        return 1.0, float(tv)
    return float(chi2_contingency(table)[1]), float(tv)


@dataclass
class NodeVerdict:
    node: int
    f_pairs: list[tuple[int, int]]
    method: str
    passed: bool
    max_tv: Fraction | float
    min_p: float | None = None
    tests: int = 1

    def to_json(self) -> dict:
        tv = self.max_tv
        return {
            "node": self.node,
            "f_pairs": [list(p) for p in self.f_pairs],
            "method": self.method,
            "verdict": "pass" if self.passed else "fail",
            "max_tv": str(tv) if isinstance(tv, Fraction) else round(float(tv), 6),
            "min_p": None if self.min_p is None else float(self.min_p),
            "tests": self.tests,
        }


@dataclass
class AuditReport:
    config: SystemConfig
    failed: tuple[int, ...]
    nodes: list[NodeVerdict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.nodes)

    def to_json(self) -> dict:
        return {
            "config": self.config.to_json(),
            "failed": list(self.failed),
            "verdict": "pass" if self.passed else "fail",
            "nodes": [v.to_json() for v in self.nodes],
        }


def _exact_verdict(config, node, failed, cap, planner) -> NodeVerdict:
    dists = {f: enumerate_distribution(config, f, node, failed, cap, planner)
             for f in range(1, config.m + 1)}
    pairs = list(itertools.combinations(range(1, config.m + 1), 2))
    tv = max((dists[a].total_variation(dists[b]) for a, b in pairs), default=Fraction(0))
    return NodeVerdict(node, pairs, "exact", tv == 0, tv)


def _sampled_verdict(config, node, failed, sessions, seed, significance, planner) -> NodeVerdict:
    q = config.q
    views = []
    for f in range(1, config.m + 1):
        rng = np.random.default_rng([seed, node, f])
        views.append(sample_views(config, f, node, failed, sessions, rng, planner))
    n_queries, L = views[0].shape[1:]
    hash_rng = np.random.default_rng([seed, node, 0x4A5])
    results = []
    for pos in range(n_queries):
        for c in range(L):
            results.append(_homogeneity([v[:, pos, c] for v in views], q))
        # joint behaviour of the whole vector through a fixed linear hash to GF(q)^2
        proj = hash_rng.integers(0, q, size=(L, 2), dtype=np.int64)
        labels = [((v[:, pos, :] @ proj) % q) @ np.array([q, 1]) for v in views]
        results.append(_homogeneity(labels, q * q))
    pvals = [p for p, _ in results]
    tv = max(t for _, t in results)
    threshold = significance / len(results)
    pairs = list(itertools.combinations(range(1, config.m + 1), 2))
    return NodeVerdict(node, pairs, "sampled", min(pvals) >= threshold, tv, min(pvals), len(results))


def assert_privacy(config: SystemConfig, failed=(), mode: str = "auto", sessions: int = 100_000,
                   seed: int = 0, significance: float = 0.01, cap: int = DEFAULT_CAP,
                   planner: Planner = session_plan) -> AuditReport:
    """Compare every node's view distribution across all file indices.

    ``mode`` is ``exact``, ``sample`` or ``auto`` (exact when the number of pad
    realizations is within ``cap``).  Sampling applies Bonferroni-corrected
    chi-square homogeneity tests per node at family level ``significance``.
    """
    failed = tuple(sorted(failed))
    report = AuditReport(config, failed)
    if config.m == 1:
        report.nodes = [NodeVerdict(i, [], "exact", True, Fraction(0)) for i in range(1, config.n + 1)]
        return report
    if mode == "auto":
        n_pads = len(planner(config, 1, failed).pad_ids)
        mode = "exact" if config.q ** (n_pads * config.query_length) <= cap else "sample"
    for node in range(1, config.n + 1):
        if mode == "exact":
            report.nodes.append(_exact_verdict(config, node, failed, cap, planner))
        elif mode == "sample":
            report.nodes.append(_sampled_verdict(config, node, failed, sessions, seed, significance, planner))
        else:
            raise ValueError(f"unknown audit mode {mode!r}")
    return report
