import pytest
from oracles import *
from utils import DeskScaleError, chi_square_uniform, keyed_bits
import random

random.seed("aima-python")


def test_derive_params():
    params = derive_params(4, 9)
    assert params.n_prime == 16 and params.L == 16
    assert not params.unsafe
    params = derive_params(6, 11)
    assert params.n_prime == 22 and params.L == 16
    params = derive_params(1, 1)
    assert params.n_prime == 4 and params.L == 2
    assert params.unsafe


def test_derive_params_rejects():
    for n, ell in [(0, 3), (3, 0), (-1, 5)]:
        with pytest.raises(ValueError):
            derive_params(n, ell)
    with pytest.raises(ValueError):
        derive_params(4, 9, seed=-1)
    with pytest.raises(ValueError):
        derive_params(4, 9, seed=1 << 64)


def test_check_params():
    check_params(derive_params(4, 9))
    unsafe = derive_params(4, 8)
    assert unsafe.unsafe
    with pytest.raises(ValueError):
        check_params(unsafe)
    assert check_params(unsafe, allow_unsafe=True) is unsafe
    with pytest.raises(ValueError):
        check_params(derive_params(4, 9)._replace(n_prime=15))


def test_widths():
    params = derive_params(4, 9)
    assert width_in(params, 0) == 12 and width_out(params, 0) == 4
    assert width_in(params, 3) == 4 and width_out(params, 3) == 12


def test_embed():
    params = derive_params(2, 5, cap=8)
    assert embed(params, 0, '000111') == OraclePoint(0, 7)
    assert embed(params, 3, '11') == OraclePoint(3, 3)
    with pytest.raises(ValueError):
        embed(params, 6, 0)
    with pytest.raises(ValueError):
        embed(params, 1, '111')
    with pytest.raises(ValueError):
        embed(params, -1, 0)
    assert embed(params, 7, 0, raw=True) == OraclePoint(7, 0)


def test_embed_is_injective():
    params = derive_params(2, 5, cap=8)
    points = {embed(params, 0, y) for y in range(1 << 6)}
    points |= {embed(params, i, x) for i in range(1, 6) for x in range(1 << 2)}
    assert len(points) == 2 ** 6 + 5 * 2 ** 2
    addresses = {address(params, p) for p in points}
    assert len(addresses) == len(points)
    assert all(a < 1 << params.n_prime for a in addresses)
    assert all(point_at(params, address(params, p)) == p for p in points)


def test_table_is_deterministic():
    params = derive_params(3, 8, seed=11)
    a, b = OracleTable(params), OracleTable(params)
    assert all(a.query(i, x) == b.query(i, x) for i in range(1, 9) for x in range(8))
    assert all(a.query(0, y) == b.query(0, y) for y in range(512))
    c = OracleTable(params, seed=12)
    assert any(a.query(1, x) != c.query(1, x) for x in range(8))


def test_h0_answers_the_prefix():
    params = derive_params(3, 8)
    table = OracleTable(params)
    for y in range(64):
        raw = table.raw(embed(params, 0, y))
        assert table.query(0, y) == raw >> 6
        assert table.query(0, y) < 1 << 3
    assert all(table.query(2, x) < 1 << 9 for x in range(8))


def test_resample():
    params = derive_params(3, 8)
    table = OracleTable(params)
    z = embed(params, 4, 5)
    child = table.resample(z, 0b101010101)
    assert child.query(4, 5) == 0b101010101
    others = [embed(params, i, x) for i in range(1, 9) for x in range(8) if (i, x) != (4, 5)]
    assert child.agrees_with(table, others)
    with pytest.raises(ValueError):
        table.resample(z, 1 << 9)


def test_resampling_an_unqueried_point_keeps_tables_uniform():
    # Read h1(0) = v, then resample the unread point h0(v): the joint
    # (low bits of h1(0), h0(v)) stays uniform.
    params = derive_params(2, 7, cap=10)
    counts = [0] * 16
    for t in range(4000):
        table = OracleTable(params, t)
        v = table.query(1, 0)
        child = table.resample(OraclePoint(0, v), keyed_bits(t, 'resample-s', width=6))
        assert child.query(1, 0) == v
        counts[((v & 3) << 2) | child.query(0, v)] += 1
    assert chi_square_uniform(counts) > 1e-4


def test_overlay_keeps_hidden_bits():
    params = derive_params(3, 8)
    table = OracleTable(params)
    p0, p1 = embed(params, 0, 9), embed(params, 1, 2)
    child = table.overlay({p0: 5, p1: 77})
    assert child.query(0, 9) == 5
    assert child.raw(p0) & 0b111111 == table.raw(p0) & 0b111111
    assert child.query(1, 2) == 77


def test_fixture():
    params = derive_params(2, 7, cap=8)
    table = OracleTable.fixture(params, h=lambda i, x: i * 4 + x, h0=lambda y: y & 3)
    assert table.query(3, 1) == 13
    assert table.query(0, 0b110110) == 2


def test_truth_table_and_cap():
    params = derive_params(2, 7, cap=10)
    table = OracleTable(params)
    values = table.truth_table()
    assert len(values) == 1 << params.n_prime
    assert int(values[address(params, embed(params, 5, 3))]) == table.raw(embed(params, 5, 3))
    frozen = table.materialize()
    assert frozen.query(5, 3) == table.query(5, 3)
    small = derive_params(3, 8, cap=10)
    with pytest.raises(DeskScaleError):
        OracleTable(small).truth_table()


def test_export_import(tmp_path):
    params = derive_params(2, 7, seed=5, cap=10)
    table = OracleTable(params)
    path = str(tmp_path / 'table.crko')
    meta = export_table(table, path)
    assert meta['records'] == 1 << params.n_prime
    assert meta['record_bytes'] == 1
    with open(path, 'rb') as f:
        blob = f.read()
    assert blob[:4] == MAGIC
    assert len(blob) == HEADER.size + (1 << params.n_prime)
    back = import_table(path, cap=10)
    assert back.params.n == 2 and back.params.ell == 7 and back.seed == 5
    assert all(back.query(i, x) == table.query(i, x) for i in range(1, 8) for x in range(4))
    assert all(back.query(0, y) == table.query(0, y) for y in range(64))


def test_import_rejects(tmp_path):
    path = tmp_path / 'bad.crko'
    path.write_bytes(b'XXXX' + bytes(12))
    with pytest.raises(ValueError):
        import_table(str(path))


if __name__ == '__main__':
    pytest.main()
