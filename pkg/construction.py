"""The corrected function

    h~_R(x) = h~_0( g~_R(x) ),    g~_R(x) = XOR_{i=1..ell} h~_i(x xor r_i)

its public randomness R, and the two simpler constructions that a subverter
can peel apart (kept only as negative controls)."""

import logging
import struct
from collections import namedtuple

from oracles import embed
from subversion import EvalTrace, subverted_eval
from utils import as_int, byte_width, keyed_bits

logger = logging.getLogger(__name__)

PublicRandomness = namedtuple('PublicRandomness', 'n, r')
Constellation = namedtuple('Constellation', 'x, points')

R_MAGIC = b'CRKR'
R_HEADER = struct.Struct('<4sHH')


# ______________________________________________________________________________
# Public randomness


def sample_R(params, seed=None):
    """ell independent uniform n-bit strings, a pure function of seed."""
    seed = params.seed if seed is None else seed
    return PublicRandomness(params.n, tuple(keyed_bits(seed, 'R', i, width=params.n)
                                            for i in range(1, params.ell + 1)))


def r_at(R, i):
    """r_i for 1 <= i <= ell."""
    return R.r[i - 1]


def serialize_R(R):
    width = byte_width(R.n)
    return R_HEADER.pack(R_MAGIC, R.n, len(R.r)) + b''.join(r.to_bytes(width, 'big') for r in R.r)


def parse_R(blob):
    magic, n, ell = R_HEADER.unpack(blob[:R_HEADER.size])
    if magic != R_MAGIC:
        raise ValueError('not a serialized R')
    width = byte_width(n)
    body = blob[R_HEADER.size:]
    if len(body) != width * ell:
        raise ValueError('R body holds {} bytes, expected {}'.format(len(body), width * ell))
    r = tuple(as_int(int.from_bytes(body[k * width:(k + 1) * width], 'big'), n) for k in range(ell))
    return PublicRandomness(n, r)


def R_to_hex(R):
    return serialize_R(R).hex()


def R_from_hex(text):
    return parse_R(bytes.fromhex(text))


def check_R(params, R):
    if R.n != params.n or len(R.r) != params.ell:
        raise ValueError('R has n={}, ell={}; params need n={}, ell={}'.format(
            R.n, len(R.r), params.n, params.ell))
    return R


# ______________________________________________________________________________
# The construction


def constellation(params, R, x):
    """The ell oracle points (i, x xor r_i) whose subverted values xor to g~_R(x)."""
    x = as_int(x, params.n)
    return Constellation(x, tuple(embed(params, i, x ^ r_at(R, i)) for i in range(1, params.ell + 1)))


def g_tilde(sub, table, R, x):
    """g~_R(x) and the concatenated trace of its ell subverted evaluations."""
    params = table.params
    x = as_int(x, params.n)
    value, queries = 0, []
    for i in range(1, params.ell + 1):
        trace = subverted_eval(sub, table, i, x ^ r_at(R, i))
        value ^= trace.value
        queries.extend(trace.queries)
    return value, EvalTrace(value, tuple(queries))


def c_eval(sub, table, R, x):
    """The corrected function h~_R(x)."""
    g, _ = g_tilde(sub, table, R, x)
    return subverted_eval(sub, table, 0, g).value


def truncate(params, value):
    """The n-bit prefix of a 3n-bit value."""
    return value >> (2 * params.n)


def broken_eval(variant, sub, table, R, x):
    """The constructions that do not survive subversion: 'single' answers the
    prefix of h~_1(x xor r_1), 'pair' the prefix of h~_1(x xor r_1) xor h~_2(x xor r_2)."""
    params = table.params
    x = as_int(x, params.n)
    if variant == 'single':
        return truncate(params, subverted_eval(sub, table, 1, x ^ r_at(R, 1)).value)
    if variant == 'pair':
        if params.ell < 2:
            raise ValueError('the pair construction needs ell >= 2')
        value = (subverted_eval(sub, table, 1, x ^ r_at(R, 1)).value ^
                 subverted_eval(sub, table, 2, x ^ r_at(R, 2)).value)
        return truncate(params, value)
    raise ValueError('unknown broken construction {!r}'.format(variant))


def construction_eval(construction, sub, table, R, x):
    """Dispatch on 'full', 'single' or 'pair'."""
    if construction == 'full':
        return c_eval(sub, table, R, x)
    return broken_eval(construction, sub, table, R, x)
