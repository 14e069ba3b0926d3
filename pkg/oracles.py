"""The ideal primitive H: a family of lazily sampled random functions h0 ... h_ell
carved out of one random function on n' = 3n + ceil(log2(ell + 1)) bits.

h0 takes 3n bits and returns n bits (the prefix of its 3n-bit cell); every other
h_i takes n bits, zero-padded into the 3n-bit slot, and returns the whole cell."""

import json
import logging
import struct
from collections import namedtuple

import numpy as np

from utils import (DeskScaleError, as_int, bitstring, byte_width, check_cap, desk_cap,
                   keyed_bits, mask, SEED_BITS)

logger = logging.getLogger(__name__)

Params = namedtuple('Params', 'n, ell, n_prime, L, seed, unsafe, cap')
OraclePoint = namedtuple('OraclePoint', 'index, payload')

MAGIC = b'CRKO'
VERSION = 1
HEADER = struct.Struct('<4sBBHQ')


# ______________________________________________________________________________
# Parameters and the domain embedding


def derive_params(n, ell, seed=0, cap=None):
    """Sizes for the oracle family. Parameters with ell <= n + 4 are allowed but
    flagged unsafe; callers that must refuse them use check_params."""
    if n < 1 or ell < 1:
        raise ValueError('need n >= 1 and ell >= 1, got n={}, ell={}'.format(n, ell))
    if not 0 <= seed < (1 << SEED_BITS):
        raise ValueError('seed {} is not a 64-bit unsigned value'.format(seed))
    log_term = ell.bit_length()
    unsafe = ell <= n + 4
    if unsafe:
        logger.warning('unsafe parameters: ell=%d <= n + 4 = %d', ell, n + 4)
    return Params(n=n, ell=ell, n_prime=3 * n + log_term, L=1 << log_term,
                  seed=seed, unsafe=unsafe, cap=desk_cap(cap))


def check_params(params, allow_unsafe=False):
    """Re-derive the widths and refuse unsafe parameters unless explicitly allowed."""
    log_term = params.ell.bit_length()
    if params.n_prime != 3 * params.n + log_term or params.L != 1 << log_term:
        raise ValueError('inconsistent widths in {}'.format(params))
    if params.unsafe != (params.ell <= params.n + 4):
        raise ValueError('unsafe flag does not match n={}, ell={}'.format(params.n, params.ell))
    if params.unsafe and not allow_unsafe:
        raise ValueError('ell={} <= n + 4 requires the unsafe-params override'.format(params.ell))
    return params


def width_in(params, i):
    return 3 * params.n if i == 0 else params.n


def width_out(params, i):
    return params.n if i == 0 else 3 * params.n


def embed(params, i, x, raw=False):
    """[0, x] = (0, x) for a 3n-bit x; [i, x] = (i, 0^{2n} x) for an n-bit x.
    Indices above ell are addressable only in raw mode."""
    top = params.L - 1 if raw else params.ell
    if not 0 <= i <= top:
        raise ValueError('function index {} outside 0..{}'.format(i, top))
    return OraclePoint(i, as_int(x, width_in(params, i)))


def address(params, point):
    """Position of a point in the n'-bit domain: index bits above the 3n-bit payload."""
    return (point.index << (3 * params.n)) | point.payload


def point_at(params, addr):
    return OraclePoint(addr >> (3 * params.n), addr & mask(3 * params.n))


def h_output(params, i, raw_value):
    """The answer of h_i given its 3n-bit cell. The only place h0's prefix rule lives."""
    return raw_value >> (2 * params.n) if i == 0 else raw_value


def point_repr(params, point):
    return '({}, {})'.format(point.index, bitstring(point.payload, 3 * params.n))


# ______________________________________________________________________________
# Tables


class OracleTable:
    """Seed-deterministic truth table of H. Cells are sampled on first touch from
    the keyed stream; explicit entries (resampled or imported cells) take precedence,
    then a materialised array, then an optional rule used for fixtures."""

    def __init__(self, params, seed=None, entries=None, array=None, rule=None):
        self.params = params
        self.seed = params.seed if seed is None else seed
        self.entries = dict(entries or {})
        self.array = array
        self.rule = rule
        self.cache = {}

    def raw(self, point):
        """The 3n-bit value stored at an oracle point."""
        if point in self.entries:
            return self.entries[point]
        if self.array is not None:
            return int(self.array[address(self.params, point)])
        value = self.cache.get(point)
        if value is None:
            if self.rule is not None:
                value = self.rule(point)
            if value is None:
                value = keyed_bits(self.seed, 'H', point.index, point.payload,
                                   width=3 * self.params.n)
            self.cache[point] = value
        return value

    def query(self, i, x):
        """h_i(x)."""
        return h_output(self.params, i, self.raw(embed(self.params, i, x)))

    def resample(self, z, s):
        """A copy that stores s at z and agrees with self everywhere else."""
        s = as_int(s, 3 * self.params.n)
        child = OracleTable(self.params, self.seed, {**self.entries, z: s}, self.array, self.rule)
        child.cache = self.cache
        return child

    def overlay(self, outputs):
        """A copy whose h_i answers at the given points are replaced. For h0 only
        the n-bit prefix is set; the hidden low bits keep their old values."""
        n = self.params.n
        entries = dict(self.entries)
        for point, value in outputs.items():
            if point.index == 0:
                entries[point] = (value << (2 * n)) | (self.raw(point) & mask(2 * n))
            else:
                entries[point] = value
        child = OracleTable(self.params, self.seed, entries, self.array, self.rule)
        child.cache = self.cache
        return child

    def truth_table(self):
        """All 2^{n'} cells as a uint64 array indexed by address."""
        check_cap(self.params.n_prime, self.params.cap, 'truth table')
        if 3 * self.params.n > 64:
            raise DeskScaleError(3 * self.params.n, 64, 'uint64 records')
        size = 1 << self.params.n_prime
        return np.fromiter((self.raw(point_at(self.params, a)) for a in range(size)),
                           dtype=np.uint64, count=size)

    def materialize(self):
        """A frozen, fully enumerated copy; safe to share between workers."""
        return OracleTable(self.params, self.seed, array=self.truth_table())

    def agrees_with(self, other, points):
        return all(self.raw(p) == other.raw(p) for p in points)

    @classmethod
    def fixture(cls, params, h=None, h0=None, seed=None):
        """A table whose h_i (i > 0) answers come from h(i, x) and whose h0 answers
        come from h0(y); cells not covered fall back to the keyed stream."""
        n = params.n

        def rule(point):
            if point.index == 0 and h0 is not None:
                return h0(point.payload) << (2 * n)
            if 0 < point.index <= params.ell and h is not None:
                return h(point.index, point.payload)
            return None

        return cls(params, seed, rule=rule)

    def __repr__(self):
        return '<OracleTable n={} ell={} seed={} entries={}>'.format(
            self.params.n, self.params.ell, self.seed, len(self.entries))


# ______________________________________________________________________________
# Truth-table export and import


def export_table(table, path, config_hash=None):
    """Write the header, 2^{n'} little-endian records and a JSON sidecar.
    The sidecar carries config_hash when the export belongs to an experiment run."""
    params = table.params
    values = table.truth_table()
    width = byte_width(3 * params.n)
    records = values.astype('<u8').view(np.uint8).reshape(-1, 8)[:, :width]
    with open(path, 'wb') as f:
        f.write(HEADER.pack(MAGIC, VERSION, params.n, params.ell, table.seed))
        f.write(records.tobytes())
    meta = {'magic': MAGIC.decode(), 'version': VERSION, 'n': params.n, 'ell': params.ell,
            'n_prime': params.n_prime, 'L': params.L, 'seed': table.seed,
            'unsafe_params': params.unsafe, 'record_bytes': width, 'records': len(values)}
    if config_hash is not None:
        meta['config_hash'] = config_hash
    with open(str(path) + '.json', 'w') as f:
        json.dump(meta, f, indent=2, sort_keys=True)
    logger.info('exported %d records to %s', len(values), path)
    return meta


def import_table(path, cap=None):
    """Read a table written by export_table back as a materialised OracleTable."""
    with open(path, 'rb') as f:
        magic, version, n, ell, seed = HEADER.unpack(f.read(HEADER.size))
        if magic != MAGIC or version != VERSION:
            raise ValueError('{} is not a version-{} CRKO table'.format(path, VERSION))
        params = derive_params(n, ell, seed, cap)
        check_cap(params.n_prime, params.cap, 'truth table')
        width = byte_width(3 * n)
        size = 1 << params.n_prime
        body = np.frombuffer(f.read(size * width), dtype=np.uint8)
    if body.size != size * width:
        raise ValueError('{} is truncated'.format(path))
    padded = np.zeros((size, 8), dtype=np.uint8)
    padded[:, :width] = body.reshape(size, width)
    return OracleTable(params, seed, array=padded.view('<u8').reshape(size).astype(np.uint64))
