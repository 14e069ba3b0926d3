import pytest
from construction import *
from oracles import OracleTable, derive_params
from subversion import Echo, Honest, PeelSingle, PeelSplit
from utils import chi_square_uniform
import random

random.seed("aima-python")

params = derive_params(3, 8, seed=2, cap=12)
table = OracleTable(params)
R = sample_R(params)


def test_sample_R():
    assert len(R.r) == params.ell and R.n == params.n
    assert all(0 <= r < 1 << params.n for r in R.r)
    assert sample_R(params) == R
    assert sample_R(params, seed=3) != R
    assert r_at(R, 1) == R.r[0] and r_at(R, 8) == R.r[7]
    assert check_R(params, R) is R
    with pytest.raises(ValueError):
        check_R(derive_params(3, 9), R)


def test_serialize_R():
    blob = serialize_R(R)
    assert blob[:4] == R_MAGIC
    assert len(blob) == R_HEADER.size + params.ell
    assert parse_R(blob) == R
    assert R_from_hex(R_to_hex(R)) == R
    with pytest.raises(ValueError):
        parse_R(b'NOPE' + blob[4:])
    with pytest.raises(ValueError):
        parse_R(blob[:-1])


def test_constellation():
    c = constellation(params, R, 5)
    assert c.x == 5
    assert len(c.points) == params.ell
    assert [p.index for p in c.points] == list(range(1, params.ell + 1))
    assert all(p.payload == 5 ^ r_at(R, p.index) for p in c.points)
    with pytest.raises(ValueError):
        constellation(params, R, 8)


def test_honest_construction():
    for x in range(8):
        g, trace = g_tilde(Honest(), table, R, x)
        expected = 0
        for i in range(1, params.ell + 1):
            expected ^= table.query(i, x ^ r_at(R, i))
        assert g == expected
        assert len(trace.queries) == params.ell
        assert c_eval(Honest(), table, R, x) == table.query(0, g)
        assert construction_eval('full', Honest(), table, R, x) == table.query(0, g)


def test_construction_accepts_bitstrings():
    assert c_eval(Honest(), table, R, '101') == c_eval(Honest(), table, R, 5)


def test_trace_concatenates_in_order():
    _, trace = g_tilde(Echo(), table, R, 0)
    assert len(trace.queries) == 2 * params.ell
    assert [p.index for p, _ in trace.queries[::2]] == list(range(1, params.ell + 1))
    assert all(p.index == 0 for p, _ in trace.queries[1::2])


def test_truncate():
    assert truncate(params, 0b101000000) == 0b101
    assert truncate(params, 0b000111111) == 0


def test_broken_single_is_peeled():
    sub = PeelSingle(m=0)
    x = r_at(R, 1)
    assert broken_eval('single', sub, table, R, x) == 0
    assert construction_eval('single', sub, table, R, x) == 0
    other = x ^ 1
    assert broken_eval('single', sub, table, R, other) == truncate(params, table.query(1, 1))


def test_broken_pair_is_peeled():
    p = derive_params(4, 9, seed=2, cap=16)
    t = OracleTable(p)
    rr = sample_R(p)
    sub = PeelSplit('01')
    head = 0b01 ^ (r_at(rr, 1) >> 2)
    tail = 0b01 ^ (r_at(rr, 2) & 0b11)
    assert broken_eval('pair', sub, t, rr, (head << 2) | tail) == 0


def test_broken_eval_rejects():
    with pytest.raises(ValueError):
        broken_eval('triple', Honest(), table, R, 0)
    short = derive_params(3, 1)
    with pytest.raises(ValueError):
        broken_eval('pair', Honest(), OracleTable(short), sample_R(short), 0)


def test_construction_agrees_with_the_raw_table():
    for seed in range(3):
        p = derive_params(3, 8, seed=seed)
        raw = OracleTable(p).truth_table()
        rr = sample_R(p)
        for x in range(8):
            g = 0
            for i in range(1, p.ell + 1):
                g ^= int(raw[(i << 9) | (x ^ r_at(rr, i))])
            assert c_eval(Honest(), OracleTable(p), rr, x) == int(raw[g]) >> 6


def test_honest_construction_is_uniform():
    p = derive_params(3, 8)
    counts = [0] * 8
    for t in range(1600):
        counts[c_eval(Honest(), OracleTable(p, t), sample_R(p, t), 5)] += 1
    assert chi_square_uniform(counts) > 1e-4


if __name__ == '__main__':
    pytest.main()
