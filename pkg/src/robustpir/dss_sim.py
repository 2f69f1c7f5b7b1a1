"""In-process simulation of a coded storage system answering PIR queries.

A session walks the phases Init -> Layer1Sent -> FailuresObserved ->
(Layer2Sent) -> Decoded, or ends in Aborted.  Nodes are passive projections
of their stored column; the orchestrator collects responses keyed by
(subquery, node), so the order in which nodes answer is irrelevant.
"""

from __future__ import annotations

import enum
import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from .base_pir import QueryVector
from .config import SystemConfig
from .finite_field import ExtSymbol, matmul_mod
from .mds_storage import FileStore, NodeStore, encode_store
from .pir_decoder import DecodeError, Transcript, build_system, decode_file
from .robust_pir import draw_pads, layer1_plan, layer2_plan

log = logging.getLogger(__name__)


class Phase(enum.Enum):
    INIT = "init"
    LAYER1_SENT = "layer1_sent"
    FAILURES_OBSERVED = "failures_observed"
    LAYER2_SENT = "layer2_sent"
    DECODED = "decoded"
    ABORTED = "aborted"


_NEXT = {
    Phase.INIT: {Phase.LAYER1_SENT},
    Phase.LAYER1_SENT: {Phase.FAILURES_OBSERVED},
    Phase.FAILURES_OBSERVED: {Phase.LAYER2_SENT, Phase.DECODED, Phase.ABORTED},
    Phase.LAYER2_SENT: {Phase.DECODED, Phase.ABORTED},
    Phase.DECODED: set(),
    Phase.ABORTED: set(),
}


class SessionError(RuntimeError):
    pass


def node_respond(store: NodeStore, qv: QueryVector) -> ExtSymbol:
    """Project the node's column onto the query: ``qv^T W_i``."""
    coeffs = np.asarray(qv.coeffs, dtype=np.int64)
    if coeffs.shape[0] != store.W.shape[0]:
        raise ValueError(f"query length {coeffs.shape[0]} != stored length {store.W.shape[0]}")
    return ExtSymbol.from_array(matmul_mod(coeffs[None, :], store.W, store.q)[0], store.q)


# -- failure models ---------------------------------------------------------

@dataclass(frozen=True)
class FixedSet:
    """A fixed set of unresponsive nodes; ``late`` nodes drop out during layer 2."""

    nodes: frozenset[int] = frozenset()
    late: frozenset[int] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "nodes", frozenset(self.nodes))
        object.__setattr__(self, "late", frozenset(self.late))

    def draw(self, n: int, nu: int, rng: np.random.Generator) -> frozenset[int]:
        return self.nodes


@dataclass(frozen=True)
class RandomSubset:
    """Pick i uniformly in 0..max_failures, then a uniform i-subset of nodes."""

    max_failures: int
    seed: int | None = None
    late: frozenset[int] = frozenset()

    def draw(self, n: int, nu: int, rng: np.random.Generator) -> frozenset[int]:
        if self.max_failures > nu:
            raise ValueError(f"max_failures={self.max_failures} exceeds nu={nu}")
        if self.seed is not None:
            rng = np.random.default_rng(self.seed)
        i = int(rng.integers(0, self.max_failures + 1))
        return frozenset(int(x) + 1 for x in rng.choice(n, size=i, replace=False))


@dataclass(frozen=True)
class LatencyCutoff:
    """Exponential per-node latencies; nodes slower than ``timeout`` are cut.

    At most ``cap`` (default nu) nodes are cut, the slowest first; any other
    late nodes are waited for.
    """

    timeout: float
    mean: float | tuple[float, ...] = 1.0
    cap: int | None = None
    late: frozenset[int] = frozenset()

    def latencies(self, n: int, rng: np.random.Generator) -> np.ndarray:
        scale = np.broadcast_to(np.asarray(self.mean, dtype=float), (n,))
        return rng.exponential(scale)

    def draw(self, n: int, nu: int, rng: np.random.Generator) -> frozenset[int]:
        lat = self.latencies(n, rng)
        cap = nu if self.cap is None else min(self.cap, nu)
        slow = [i for i in np.argsort(-lat, kind="stable") if lat[i] > self.timeout]
        return frozenset(int(i) + 1 for i in slow[:cap])


FailureModel = FixedSet | RandomSubset | LatencyCutoff


def parse_failure_model(text: str) -> FailureModel:
    """Parse ``none``, ``fixed:1,3``, ``random:2`` or ``latency:TIMEOUT[:MEAN]``."""
    kind, _, arg = text.partition(":")
    kind = kind.strip().lower()
    if kind in ("none", ""):
        return FixedSet()
    if kind == "fixed":
        nodes = frozenset(int(x) for x in arg.split(",") if x.strip()) if arg else frozenset()
        return FixedSet(nodes)
    if kind == "random":
        return RandomSubset(int(arg))
    if kind == "latency":
        timeout, _, mean = arg.partition(":")
        return LatencyCutoff(float(timeout), float(mean) if mean else 1.0)
    raise ValueError(f"unknown failure model {text!r}")


# -- nodes and sessions -----------------------------------------------------

@dataclass
class StorageNode:
    store: NodeStore

    @property
    def index(self) -> int:
        return self.store.index

    def respond(self, qv: QueryVector) -> ExtSymbol:
        return node_respond(self.store, qv)


@dataclass
class RetrievalSession:
    config: SystemConfig
    files: FileStore
    f: int
    failure_model: FailureModel = field(default_factory=FixedSet)
    seed: int | None = None
    phase: Phase = Phase.INIT

    def __post_init__(self):
        if self.files.k != self.config.k or self.files.alpha != self.config.alpha:
            raise ValueError(
                f"store shape k x alpha = {self.files.k}x{self.files.alpha}, "
                f"configuration needs {self.config.k}x{self.config.alpha}"
            )
        if self.files.m != self.config.m or self.files.ell != self.config.ell:
            raise ValueError("store m/ell disagree with configuration")
        pad_ss, fail_ss, order_ss = np.random.SeedSequence(self.seed).spawn(3)
        self._pad_rng = np.random.default_rng(pad_ss)
        self._fail_rng = np.random.default_rng(fail_ss)
        self._order_rng = np.random.default_rng(order_ss)
        self.nodes = {s.index: StorageNode(s) for s in encode_store(self.files, self.config.code)}
        self.transcript = Transcript(self.config, self.f, self.seed,
                                     generator=self.config.code.generator.tolist())
        self.plan = None
        self.decoded: np.ndarray | None = None

    def _advance(self, phase: Phase) -> None:
        if phase not in _NEXT[self.phase]:
            raise SessionError(f"illegal transition {self.phase.value} -> {phase.value}")
        log.debug("session f=%d: %s -> %s", self.f, self.phase.value, phase.value)
        self.phase = phase

    def _dispatch(self, subqueries, skip: frozenset[int]) -> None:
        t = self.transcript
        jobs = [(sq, node) for sq in subqueries for node in sq.queries if node not in skip]
        # any completion order must give the same transcript
        for idx in self._order_rng.permutation(len(jobs)):
            sq, node = jobs[idx]
            resp = self.nodes[node].respond(t.query(sq, node))
            t.responses[(sq.index, node)] = resp.to_array()

    def send_layer1(self) -> None:
        self.plan = layer1_plan(self.config, self.f)
        t = self.transcript
        t.pads.update(draw_pads(self.plan.pad_ids, self.config.query_length, self.config.q,
                                self._pad_rng))
        t.subqueries.extend(self.plan.layer1)
        self._advance(Phase.LAYER1_SENT)

    def observe_failures(self) -> frozenset[int]:
        failed = self.failure_model.draw(self.config.n, self.config.nu, self._fail_rng)
        self.transcript.failed = frozenset(failed)
        self._dispatch(self.plan.layer1, self.transcript.failed)
        self._advance(Phase.FAILURES_OBSERVED)
        return self.transcript.failed

    def send_layer2(self) -> None:
        t = self.transcript
        self.plan = layer2_plan(self.config, self.plan, t.failed)
        new = [p for p in self.plan.pad_ids if p not in t.pads]
        t.pads.update(draw_pads(new, self.config.query_length, self.config.q, self._pad_rng))
        t.subqueries.extend(self.plan.layer2)
        late = self.failure_model.late - t.failed
        self._dispatch(self.plan.layer2, t.failed | late)
        self._advance(Phase.LAYER2_SENT)
        if late:
            self._abort("layer2_failure")

    def _abort(self, outcome: str) -> None:
        self.transcript.outcome = outcome
        self._advance(Phase.ABORTED)

    def decode(self) -> np.ndarray:
        if Phase.DECODED not in _NEXT[self.phase]:
            raise SessionError(f"cannot decode in phase {self.phase.value}")
        system = build_system(self.transcript, self.config.code)
        try:
            self.decoded = self.transcript.decoded = decode_file(system)
        except DecodeError:
            self.transcript.outcome = "decode_failure"
            raise
        self.transcript.outcome = "decoded"
        self._advance(Phase.DECODED)
        return self.decoded

    def run(self) -> Transcript:
        self.send_layer1()
        failed = self.observe_failures()
        if len(failed) > self.config.nu:
            self._abort("capacity_exceeded")
            return self.transcript
        if failed:
            self.send_layer2()
            if self.phase is Phase.ABORTED:
                return self.transcript
        self.decode()
        return self.transcript


def run_session(config: SystemConfig, failure_model: FailureModel, f: int, seed: int | None = None,
                files: FileStore | None = None) -> Transcript:
    """Execute one retrieval end to end.

    Without ``files`` a uniformly random store is drawn from ``seed``.  The
    recovered file is left on ``transcript.decoded``.
    """
    if files is None:
        files = FileStore.random(config.m, config.k, config.alpha, config.q, config.ell,
                                 rng=np.random.SeedSequence([seed or 0, 0xF11E]))
    session = RetrievalSession(config, files, f, failure_model, seed)
    return session.run()


def all_failure_sets(n: int, nu: int) -> list[frozenset[int]]:
    return [frozenset(c) for i in range(nu + 1) for c in itertools.combinations(range(1, n + 1), i)]


def expected_random_cpop(config: SystemConfig, max_failures: int):
    """Mean optimal cPoP when i is uniform on 0..max_failures."""
    from fractions import Fraction

    from .pir_decoder import optimal_cpop

    terms = [optimal_cpop(config.n, config.k, i) for i in range(max_failures + 1)]
    return sum(terms, Fraction(0)) / len(terms)
