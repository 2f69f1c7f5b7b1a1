import itertools

import pytest

from robustpir.config import SystemConfig
from robustpir.dss_sim import all_failure_sets
from robustpir.pir_decoder import file_determined
from robustpir.repro import repro
from robustpir.robust_pir import (
    CapacityExceeded, MissingPart, classify_missing, layer1_plan, plan_violations, session_plan,
    universal_params,
)


def test_universal_params_examples():
    p = universal_params(5, 2, 2)
    assert (p.alpha, p.d) == (3, (2, 3, 6))
    assert universal_params(4, 2, 1).d == (1, 2) and universal_params(4, 2, 1).alpha == 1
    assert universal_params(5, 2, 0).d == (2,)
    with pytest.raises(ValueError):
        universal_params(4, 2, 2)


def grid(nmax):
    for n in range(2, nmax + 1):
        for k in range(1, n):
            for nu in range(0, n - k):
                yield n, k, nu


def test_counting_identity_and_closed_form():
    for n, k, nu in grid(10):
        p = universal_params(n, k, nu)
        for i in range(nu + 1):
            ni = n - i
            assert (ni - k) * (p.d[i] - p.d0) == p.d0 * (n - ni)
            # independent closed form: d_i = alpha k / (n_i - k)
            assert p.d[i] * (ni - k) == p.alpha * k


def test_classify_missing_example2(ex2):
    plan = layer1_plan(ex2, 1)
    assert classify_missing({1}, plan) == [MissingPart(1, 1, 1, 1), MissingPart(1, 2, 2, None)]
    parts = sorted(classify_missing({1, 3}, plan), key=MissingPart.sort_key)
    assert [p.case for p in parts] == [1, 1, 1, 2]
    assert sorted(p.unit for p in parts if p.case == 1) == [1, 2, 3]
    with pytest.raises(CapacityExceeded):
        classify_missing({1, 2, 3}, plan, 2)


def test_layer2_example1(ex1):
    plan = session_plan(ex1, 1, (1,))
    assert len(plan.layer2) == 1
    sq = plan.layer2[0]
    assert 1 not in sq.queries
    assert sq.queries[3].pads == tuple(sorted((1, sq.pad)))
    assert all(sq.queries[i].pads == (sq.pad,) for i in (2, 4))


@pytest.mark.parametrize("example", [1, 2])
def test_reference_tables(example):
    diffs = repro(example)
    assert diffs and all(d.passed for d in diffs), "\n".join(l for d in diffs for l in d.lines())


def test_no_layer2_without_failures(ex2):
    assert session_plan(ex2, 2, ()).layer2 == ()


def test_capacity(ex2):
    with pytest.raises(CapacityExceeded):
        session_plan(ex2, 1, (1, 2, 3))


@pytest.mark.parametrize("n", [4, 5, 6])
def test_plans_valid_over_grid(n):
    for k in range(1, n):
        for nu in range(0, n - k):
            cfg = SystemConfig.with_smallest_field(n, k, 2, nu)
            p = cfg.params
            for U in all_failure_sets(n, nu):
                for f in (1, 2):
                    plan = session_plan(cfg, f, U)
                    assert plan_violations(plan, cfg) == []
                    assert len(plan.layer2) == p.d[len(U)] - p.d0
                    assert set(itertools.chain.from_iterable(sq.queries for sq in plan.layer2)).isdisjoint(U)
                    # every layer-2 subquery carries exactly n_i - k missing parts
                    ni = n - len(U)
                    for sq in plan.layer2:
                        assert len([c for c in sq.queries.values() if len(c.pads) + len(c.units) > 1]) == ni - k
                    assert file_determined(plan.received(), cfg.code, f, cfg.alpha)
