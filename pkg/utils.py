"""Provides some utilities widely used by other modules"""

import hashlib
import logging
import math
import os
from multiprocessing import Pool

import numpy as np
from scipy import stats

logger = logging.getLogger(__name__)

DEFAULT_CAP = 24
CAP_ENV = 'CRKO_CAP'
SEED_BITS = 64


# ______________________________________________________________________________
# Errors


class DeskScaleError(ValueError):
    """An operation would enumerate more than 2^cap points."""

    def __init__(self, bits, cap, what='table'):
        super().__init__('{} needs 2^{} points; the desk-scale cap is 2^{}'.format(what, bits, cap))
        self.bits = bits
        self.cap = cap


class BudgetExceeded(RuntimeError):
    """A subverter evaluation or a distinguisher went over its query budget."""

    def __init__(self, where, budget):
        super().__init__('query budget {} exceeded at {}'.format(budget, where))
        self.where = where
        self.budget = budget


class InvariantError(RuntimeError):
    """Internal bookkeeping breach: a write-once cell rewritten, a witness that does not re-check."""


class ConfigError(ValueError):
    """Malformed experiment configuration."""


def desk_cap(cap=None):
    """The enumeration cap in bits: explicit value, then $CRKO_CAP, then 24."""
    if cap is not None:
        return int(cap)
    env = os.environ.get(CAP_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigError('{}={!r} is not an integer'.format(CAP_ENV, env))
    return DEFAULT_CAP


def check_cap(bits, cap, what='table'):
    if bits > cap:
        raise DeskScaleError(bits, cap, what)


# ______________________________________________________________________________
# Bit strings


def mask(width):
    return (1 << width) - 1


def as_int(x, width):
    """Coerce a bit-string ('0101') or a non-negative int to an int of the given width."""
    if isinstance(x, str):
        if len(x) != width or any(c not in '01' for c in x):
            raise ValueError('expected a {}-bit string, got {!r}'.format(width, x))
        return int(x, 2) if width else 0
    if isinstance(x, (bool, float)) or not isinstance(x, (int, np.integer)):
        raise ValueError('expected a bit-string or int, got {!r}'.format(x))
    x = int(x)
    if not 0 <= x < (1 << width):
        raise ValueError('{} does not fit in {} bits'.format(x, width))
    return x


def parse_word(v):
    """An input whose width is checked later: an int, a '0x' hex string or a bit-string."""
    if isinstance(v, str):
        text = v.strip().lower()
        if text.startswith('0x'):
            return int(text, 16)
        if text and all(c in '01' for c in text):
            return int(text, 2)
        raise ValueError('expected an int, a 0x hex string or a bit-string, got {!r}'.format(v))
    if isinstance(v, (bool, float)) or not isinstance(v, (int, np.integer)) or v < 0:
        raise ValueError('expected a non-negative int, got {!r}'.format(v))
    return int(v)


def bitstring(v, width):
    """bitstring(2, 6) --> '000010'"""
    return format(v, '0{}b'.format(width)) if width else ''


def parity(v):
    return bin(v).count('1') & 1


def byte_width(bits):
    return (bits + 7) // 8


# ______________________________________________________________________________
# Keyed streams and seeds


def _stream_word(w):
    if isinstance(w, str):
        return repr(w)
    return str(int(w))


def keyed_bits(seed, label, *words, width):
    """A width-bit value that is a pure function of (seed, label, words).
    Every lazily sampled table in the package draws from this stream, so a
    value never depends on the order in which cells are first touched."""
    key = (int(seed) & mask(SEED_BITS)).to_bytes(8, 'little')
    msg = '|'.join([label] + [_stream_word(w) for w in words]).encode()
    nbytes = byte_width(width)
    if nbytes == 0:
        return 0
    digest = hashlib.shake_256(key + msg).digest(nbytes)
    return int.from_bytes(digest, 'big') >> (8 * nbytes - width)


def keyed_below(seed, label, *words, bound):
    """A value uniform in range(bound), by rejection on the keyed stream."""
    width = max(1, (bound - 1).bit_length())
    attempt = 0
    while True:
        v = keyed_bits(seed, label, *words, attempt, width=width)
        if v < bound:
            return v
        attempt += 1


def _label_word(label):
    if isinstance(label, str):
        return int.from_bytes(label.encode(), 'little')
    return int(label)


def derive_seed(master, *labels):
    """Fan a master seed out to an independent 64-bit child seed per label tuple."""
    words = [int(master) & mask(SEED_BITS)] + [_label_word(label) for label in labels]
    state = np.random.SeedSequence(words).generate_state(1, dtype=np.uint64)
    return int(state[0])


# ______________________________________________________________________________
# Statistics


def binomial_ci(k, trials, level=0.95):
    """Clopper-Pearson interval for k successes out of trials."""
    if trials == 0:
        return 0.0, 1.0
    ci = stats.binomtest(int(k), int(trials)).proportion_ci(confidence_level=level, method='exact')
    return float(ci.low), float(ci.high)


def two_proportion_ci(k1, n1, k2, n2, level=0.95):
    """Wald interval for p1 - p2. Returns (difference, low, high)."""
    p1, p2 = k1 / n1, k2 / n2
    diff = p1 - p2
    se = math.sqrt(p1 * (1 - p1) / n1 + p2 * (1 - p2) / n2)
    z = stats.norm.ppf(0.5 + level / 2)
    return diff, diff - z * se, diff + z * se


def chi_square_uniform(counts):
    """p-value of a chi-square goodness-of-fit test against the uniform distribution."""
    return float(stats.chisquare(np.asarray(counts, dtype=float)).pvalue)


# ______________________________________________________________________________
# Trial farm


def run_trials(fn, jobs, workers=1):
    """Map fn over jobs, on a process pool when workers > 1. Results keep job order."""
    jobs = list(jobs)
    if workers is None or workers <= 1 or len(jobs) < 2:
        return [fn(job) for job in jobs]
    with Pool(workers) as pool:
        return pool.map(fn, jobs)
