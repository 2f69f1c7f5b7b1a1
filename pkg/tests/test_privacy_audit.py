from collections import defaultdict
from fractions import Fraction

import pytest

from robustpir.config import SystemConfig
from robustpir.dss_sim import all_failure_sets
from robustpir.privacy_audit import (
    EnumerationTooLarge, assert_privacy, enumerate_distribution, leaky_planner, mixed_distribution,
)


def test_node3_no_failure_uniform_over_9(ex1):
    for f in (1, 2):
        d = enumerate_distribution(ex1, f, 3, ())
        assert len(d.masses) == 9
        assert set(d.masses.values()) == {Fraction(1, 9)}
        assert d.total() == 1


def test_node3_one_failure_uniform_over_81(ex1):
    for f in (1, 2):
        d = enumerate_distribution(ex1, f, 3, (1,))
        assert len(d.masses) == 81
        assert set(d.masses.values()) == {Fraction(1, 81)}


def test_single_file_trivial():
    cfg = SystemConfig(4, 2, 3, 1, 1)
    assert assert_privacy(cfg, (1,)).passed


def test_exact_all_patterns(ex1):
    for U in all_failure_sets(4, 1):
        rep = assert_privacy(ex1, U, "exact")
        assert rep.passed and all(v.max_tv == 0 for v in rep.nodes)


def test_each_query_marginally_uniform(ex1):
    L = ex1.query_length
    for U in all_failure_sets(4, 1):
        for node in range(1, 5):
            d = enumerate_distribution(ex1, 2, node, U)
            width = len(next(iter(d.masses)))
            for pos in range(0, width, L):
                marg = defaultdict(Fraction)
                for key, mass in d.masses.items():
                    marg[key[pos:pos + L]] += mass
                assert len(marg) == ex1.q ** L
                assert set(marg.values()) == {Fraction(1, ex1.q ** L)}


def test_mixed_failure_privacy(ex1):
    sets = all_failure_sets(4, 1)
    for node in range(1, 5):
        a = mixed_distribution(ex1, 1, node, sets)
        b = mixed_distribution(ex1, 2, node, sets)
        assert a.total_variation(b) == 0


def test_broken_planner_exact_fails(ex1):
    rep = assert_privacy(ex1, (), "exact", planner=leaky_planner)
    assert not rep.passed
    assert max(v.max_tv for v in rep.nodes) == 1


def test_sampled_small(ex2):
    assert assert_privacy(ex2, (1,), "sample", sessions=20_000, seed=3).passed
    assert not assert_privacy(ex2, (1,), "sample", sessions=20_000, seed=3, planner=leaky_planner).passed


def test_enumeration_cap(ex2):
    with pytest.raises(EnumerationTooLarge):
        enumerate_distribution(ex2, 1, 1, (1, 3), cap=1000)


def test_auto_mode_switches(ex1, ex2):
    assert {v.method for v in assert_privacy(ex1, (1,)).nodes} == {"exact"}
    rep = assert_privacy(ex2, (1,), "auto", sessions=5000, cap=1000)
    assert {v.method for v in rep.nodes} == {"sampled"}


def test_report_json(ex1):
    doc = assert_privacy(ex1, (2,), "exact").to_json()
    assert doc["verdict"] == "pass" and doc["failed"] == [2]
    assert set(doc["nodes"][0]) == {"node", "f_pairs", "method", "verdict", "max_tv", "min_p", "tests"}
    assert doc["nodes"][0]["f_pairs"] == [[1, 2]]
