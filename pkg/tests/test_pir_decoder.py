from fractions import Fraction

import numpy as np
import pytest

from robustpir.config import SystemConfig
from robustpir.dss_sim import FixedSet, all_failure_sets, run_session
from robustpir.mds_storage import FileStore
from robustpir.pir_decoder import (
    DecodeError, ProtocolViolation, Transcript, brute_force_decode, build_system, compute_cpop,
    decode_file, optimal_cpop,
)


def test_example1_system_layout(ex1):
    t = run_session(ex1, FixedSet(), 1, seed=5)
    sys_ = build_system(t, ex1.code)
    assert sys_.unknowns == ["X[1,1]", "X[2,1]", "I1(u1)", "I2(u1)"]
    assert sys_.matrix.tolist() == [[0, 0, 1, 0], [0, 0, 0, 1], [1, 1, 1, 1], [1, 2, 1, 2]]
    assert sys_.sources == ((1, 1), (1, 2), (1, 3), (1, 4))


def test_optimal_cpop_values():
    assert [optimal_cpop(5, 2, i) for i in range(3)] == [Fraction(5, 3), Fraction(2), Fraction(3)]
    assert [optimal_cpop(4, 2, i) for i in range(2)] == [Fraction(2), Fraction(3)]


@pytest.mark.parametrize("n,k,nu", [(4, 2, 1), (6, 3, 2), (5, 1, 3), (7, 3, 2)])
def test_decodes_every_pattern(n, k, nu):
    cfg = SystemConfig.with_smallest_field(n, k, 2, nu)
    for U in all_failure_sets(n, nu):
        for f in (1, 2):
            files = FileStore.random(2, k, cfg.alpha, cfg.q, 1, np.random.default_rng([f, *U]))
            t = run_session(cfg, FixedSet(U), f, seed=len(U), files=files)
            assert t.outcome == "decoded"
            assert np.array_equal(t.decoded, files.file(f))
            assert compute_cpop(t) == optimal_cpop(n, k, len(U))


def test_missing_response_is_decode_error(ex2):
    t = run_session(ex2, FixedSet({1}), 1, seed=0)
    del t.responses[max(t.responses)]
    with pytest.raises(DecodeError, match="not determined"):
        decode_file(build_system(t, ex2.code))


def test_tampered_response_is_inconsistent(ex2):
    t = run_session(ex2, FixedSet(), 1, seed=0)
    key = min(t.responses)
    t.responses[key] = (t.responses[key] + 1) % ex2.q
    # 10 equations in 6 + 4 unknowns is square; add a duplicate to expose the tamper
    t.responses[(1, 5)] = t.responses[(1, 5)]
    sys_ = build_system(t, ex2.code)
    try:
        out = decode_file(sys_)
    except DecodeError:
        return
    truth = run_session(ex2, FixedSet(), 1, seed=0).decoded
    assert not np.array_equal(out, truth)


def test_response_from_failed_node(ex2):
    t = run_session(ex2, FixedSet({2}), 1, seed=0)
    t.responses[(1, 2)] = np.array([0])
    with pytest.raises(ProtocolViolation):
        build_system(t, ex2.code)


@pytest.mark.parametrize("U", [(), (1,), (3,), (1, 3)])
def test_transcript_round_trip_bit_exact(ex2, U):
    t = run_session(SystemConfig(5, 2, 5, 2, 2, ell=2), FixedSet(U), 2, seed=11)
    text = t.dumps()
    back = Transcript.loads(text)
    assert back.dumps() == text
    assert np.array_equal(decode_file(build_system(back, back.config.code)), t.decoded)


def test_transcript_rejects_bad_coeffs(ex1):
    doc = run_session(ex1, FixedSet(), 1, seed=0).to_json()
    entry = doc["subqueries"][0]["queries"]["3"]
    entry["coeffs"][0] = (entry["coeffs"][0] + 1) % 3
    with pytest.raises(ProtocolViolation):
        Transcript.from_json(doc)


def _oracle_agrees(cfg, U, f, seed):
    files = FileStore.random(cfg.m, cfg.k, cfg.alpha, cfg.q, 1, np.random.default_rng(seed))
    t = run_session(cfg, FixedSet(U), f, seed=seed, files=files)
    queries = []
    resp = []
    by_index = {sq.index: sq for sq in t.subqueries}
    for (s, node), v in sorted(t.responses.items()):
        queries.append((t.query(by_index[s], node).coeffs, node))
        resp.append(int(v[0]))
    cands = brute_force_decode(queries, np.array(resp), cfg.code, cfg.m, cfg.alpha, f)
    assert len(cands) == 1
    assert np.array_equal(cands[0], t.decoded[..., 0])
    assert np.array_equal(cands[0], files.file(f)[..., 0])


@pytest.mark.parametrize("U", [(), (1,), (4,)])
@pytest.mark.parametrize("m", [1, 2])
def test_brute_force_oracle_4_2(U, m):
    _oracle_agrees(SystemConfig(4, 2, 3, m, 1), U, m, seed=sum(U) + m)


@pytest.mark.parametrize("U", [(), (2,)])
def test_brute_force_oracle_5_2(U):
    _oracle_agrees(SystemConfig(5, 2, 5, 2, 1), U, 2, seed=3)


def test_brute_force_finds_ambiguity(ex1):
    # with one response dropped the oracle sees several candidates and the decoder refuses
    files = FileStore.random(2, 2, 1, 3, 1, np.random.default_rng(0))
    t = run_session(ex1, FixedSet(), 1, seed=0, files=files)
    del t.responses[(1, 4)]
    by_index = {sq.index: sq for sq in t.subqueries}
    queries = [(t.query(by_index[s], i).coeffs, i) for s, i in sorted(t.responses)]
    resp = np.array([int(v[0]) for _, v in sorted(t.responses.items())])
    assert len(brute_force_decode(queries, resp, ex1.code, 2, 1, 1)) > 1
    with pytest.raises(DecodeError):
        decode_file(build_system(t, ex1.code))
