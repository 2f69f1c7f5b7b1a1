"""Acceptance checks, one per primary criterion.

Each check returns (passed, detail) and is timed against its runtime bound.
Run standalone with ``python tests/test_acceptance.py`` for a plain report;
under pytest the same lines are printed in the terminal summary.
"""

from __future__ import annotations

import itertools
import sys
import time
from fractions import Fraction

import numpy as np
import pytest
import sympy

from robustpir.config import SystemConfig
from robustpir.dss_sim import FixedSet, all_failure_sets, run_session
from robustpir.mds_storage import FileStore, make_code, smallest_field
from robustpir.pir_decoder import brute_force_decode, compute_cpop, optimal_cpop
from robustpir.privacy_audit import assert_privacy, leaky_planner
from robustpir.repro import repro
from robustpir.robust_pir import universal_params

RESULTS: list[str] = []


def example1_reproduction():
    bad = []
    for m in (2, 3):
        cfg = SystemConfig(4, 2, 3, m, 1)
        for f in range(1, m + 1):
            cp = compute_cpop(run_session(cfg, FixedSet(), f, seed=f))
            if cp != 2:
                bad.append(f"m={m} f={f} U=() cPoP={cp}")
            for node in range(1, 5):
                cp = compute_cpop(run_session(cfg, FixedSet({node}), f, seed=node))
                if cp != 3:
                    bad.append(f"m={m} f={f} U=({node},) cPoP={cp}")
    diffs = repro(1)
    bad += [line for d in diffs if not d.passed for line in d.lines()]
    return not bad, "; ".join(bad) or f"cPoP 2 and 3, {len(diffs)} tables match"


def example2_parameters():
    p = universal_params(5, 2, 2)
    return (p.alpha, p.d) == (3, (2, 3, 6)), f"alpha={p.alpha} d={p.d}"


def example2_cpop():
    cfg = SystemConfig(5, 2, 5, 2, 2)
    want = [Fraction(5, 3), Fraction(2), Fraction(3)]
    got = [compute_cpop(run_session(cfg, FixedSet(range(1, i + 1)), 1, seed=i)) for i in range(3)]
    formula = [optimal_cpop(5, 2, i) for i in range(3)]
    return got == want == formula, f"measured {[str(x) for x in got]}"


def decodability_sweep():
    runs = fails = 0
    patterns = all_failure_sets(5, 2)
    assert len(patterns) == 16
    for m in (1, 2, 3):
        cfg = SystemConfig(5, 2, 5, m, 2)
        for U in patterns:
            for seed in range(20):
                rng = np.random.default_rng([m, seed, *U])
                files = FileStore.random(m, 2, cfg.alpha, 5, 1, rng)
                f = 1 + seed % m
                t = run_session(cfg, FixedSet(U), f, seed=seed, files=files)
                runs += 1
                if t.outcome != "decoded" or not np.array_equal(t.decoded, files.file(f)):
                    fails += 1
    return fails == 0, f"{runs - fails}/{runs} decoded correctly"


def counting_identity():
    checked = violations = 0
    for n in range(2, 11):
        for k in range(1, n):
            for nu in range(0, n - k):
                p = universal_params(n, k, nu)
                for i in range(nu + 1):
                    ni = n - i
                    checked += 1
                    if (ni - k) * (p.d[i] - p.d0) != p.d0 * (n - ni):
                        violations += 1
    return violations == 0, f"{violations} violations in {checked} cases"


def exact_privacy():
    cfg = SystemConfig(4, 2, 3, 2, 1)
    worst = Fraction(0)
    ok = True
    for U in all_failure_sets(4, 1):
        rep = assert_privacy(cfg, U, "exact")
        ok &= rep.passed
        worst = max([worst] + [v.max_tv for v in rep.nodes])
    return ok and worst == 0, f"max TV {worst} over 5 patterns x 4 nodes"


def sampled_privacy():
    cfg = SystemConfig(5, 2, 5, 2, 2)
    good = assert_privacy(cfg, (1,), "sample", sessions=100_000, seed=0, significance=0.01)
    bad = assert_privacy(cfg, (1,), "sample", sessions=100_000, seed=0, significance=0.01,
                         planner=leaky_planner)
    min_p = min(v.min_p for v in good.nodes)
    rejected = [v.node for v in bad.nodes if not v.passed]
    return good.passed and not bad.passed, f"honest min p={min_p:.3g}; broken planner rejected at nodes {rejected}"


def mds_and_oracle():
    codes = 0
    for n in range(2, 9):
        for k in range(1, n):
            code = make_code(n, k, smallest_field(n, k))
            g = sympy.Matrix(code.generator.tolist())
            for cols in itertools.combinations(range(n), k):
                if int(g.extract(list(range(k)), list(cols)).det()) % code.q == 0:
                    return False, f"({n},{k}) columns {cols} singular"
            codes += 1
    for n, k, q in ((4, 2, 3), (5, 2, 5)):
        if not make_code(n, k, q).is_mds():
            return False, f"({n},{k}) over GF({q}) not MDS"
    agree = 0
    cases = [(SystemConfig(4, 2, 3, m, 1), U) for m in (1, 2) for U in all_failure_sets(4, 1)]
    cases += [(SystemConfig(5, 2, 5, m, 2), U) for m in (1, 2) for U in ((), (1,), (2, 5))]
    for cfg, U in cases:
        f = cfg.m
        files = FileStore.random(cfg.m, cfg.k, cfg.alpha, cfg.q, 1, np.random.default_rng(len(U) + 10 * cfg.m))
        t = run_session(cfg, FixedSet(U), f, seed=7, files=files)
        by_index = {sq.index: sq for sq in t.subqueries}
        queries = [(t.query(by_index[s], i).coeffs, i) for s, i in sorted(t.responses)]
        resp = np.array([int(v[0]) for _, v in sorted(t.responses.items())])
        cands = brute_force_decode(queries, resp, cfg.code, cfg.m, cfg.alpha, f)
        if len(cands) != 1 or not np.array_equal(cands[0], t.decoded[..., 0]):
            return False, f"oracle disagrees for {cfg} U={U}"
        agree += 1
    return True, f"{codes} codes MDS; oracle agrees on {agree} sessions"


CRITERIA = [
    ("Example 1 reproduction", example1_reproduction, 1.0),
    ("Example 2 parameters", example2_parameters, 1.0),
    ("Example 2 cPoP", example2_cpop, 1.0),
    ("Decodability sweep", decodability_sweep, 30.0),
    ("Counting identity", counting_identity, 5.0),
    ("Exact privacy", exact_privacy, 10.0),
    ("Sampled privacy", sampled_privacy, 120.0),
    ("MDS + oracle checks", mds_and_oracle, 30.0),
]


def evaluate(name, fn, bound):
    start = time.perf_counter()
    ok, detail = fn()
    elapsed = time.perf_counter() - start
    ok = ok and elapsed < bound
    line = f"[PRIMARY] {name:<24} {'PASS' if ok else 'FAIL'}  {elapsed:6.2f}s < {bound:g}s  {detail}"
    RESULTS.append(line)
    print(line)
    return ok, line


@pytest.mark.parametrize("name,fn,bound", CRITERIA, ids=[c[0] for c in CRITERIA])
def test_primary(name, fn, bound):
    ok, line = evaluate(name, fn, bound)
    assert ok, line


if __name__ == "__main__":
    sys.exit(0 if all([evaluate(*c)[0] for c in CRITERIA]) else 1)
