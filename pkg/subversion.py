"""Subverted implementations of H: deterministic programs that compute h~_i(x)
with oracle access to the honest h, plus the library of attacks and a
disagreement-rate estimator."""

import logging
from collections import namedtuple

from sortedcontainers import SortedSet

from oracles import OracleTable, embed, width_in, width_out
from utils import (BudgetExceeded, as_int, binomial_ci, check_cap, derive_seed, keyed_below,
                   keyed_bits, mask, parse_word)

logger = logging.getLogger(__name__)

EvalTrace = namedtuple('EvalTrace', 'value, queries')
Estimate = namedtuple('Estimate', 'index, fraction, ci_lo, ci_hi, disagreements, samples, exhaustive')


# ______________________________________________________________________________
# Oracle access


class OracleHandle:
    """The only view of H a subverter gets: h(j, y), counted and recorded.
    The source is anything with params and query(i, x), e.g. an OracleTable
    or the simulator's lazy tables."""

    def __init__(self, source, budget, where):
        self.source = source
        self.params = source.params
        self.budget = budget
        self.where = where
        self.queries = []

    def __call__(self, j, y):
        if len(self.queries) >= self.budget:
            raise BudgetExceeded(self.where, self.budget)
        point = embed(self.params, j, y)
        value = self.source.query(j, y)
        self.queries.append((point, value))
        return value


class Subverter:
    """h~_i(x) = program(i, x, h), where h answers honest oracle queries.
    Subclasses override program; the base class is honest unless a program is
    passed in, which is how test fixtures define one-off subversions."""

    kind = 'program'

    def __init__(self, q_budget=1, program=None, label=None):
        self.q_budget = q_budget
        self._program = program
        self.label = label or self.kind

    def program(self, i, x, h):
        if self._program is not None:
            return self._program(i, x, h)
        return h(i, x)

    def check(self, params):
        """Reject parameters this subverter cannot be evaluated under."""

    def config(self):
        """JSON-ready description; make_subverter(**config()) rebuilds the subverter."""
        return {'kind': self.kind}

    def __repr__(self):
        return '<{} {}>'.format(self.__class__.__name__, self.label)


def subverted_eval(sub, table, i, x):
    """Evaluate h~_i(x) against table; return the value and the ordered query trace."""
    params = table.params
    x = as_int(x, width_in(params, i))
    handle = OracleHandle(table, sub.q_budget, '({}, {})'.format(i, x))
    value = sub.program(i, x, handle)
    value = as_int(value, width_out(params, i))
    return EvalTrace(value, tuple(handle.queries))


def trace_points(trace):
    return [point for point, _ in trace.queries]


# ______________________________________________________________________________
# Built-in subverters


def parse_trigger(z, k=None):
    """A trigger given as a bit-string, a '0x' hex string with k, or an int with k."""
    if isinstance(z, str) and not z.startswith('0x'):
        return as_int(z, len(z)), len(z)
    if k is None:
        raise ValueError('trigger {!r} needs an explicit length k'.format(z))
    value = int(z, 16) if isinstance(z, str) else z
    return as_int(value, k), k


def trigger_hex(z):
    return hex(z)


class Honest(Subverter):
    """h~ = h."""

    kind = 'honest'


class PrefixTrigger(Subverter):
    """On the target index, inputs z || rho answer rho (low bits, zero-padded)."""

    kind = 'prefix_trigger'

    def __init__(self, z, k=None, target=0):
        super().__init__(q_budget=1)
        self.z, self.k = parse_trigger(z, k)
        self.target = target
        self.label = 'prefix_trigger(k={}, target={})'.format(self.k, target)

    def check(self, params):
        if self.k > width_in(params, self.target):
            raise ValueError('trigger of {} bits is longer than the {}-bit input of h{}'.format(
                self.k, width_in(params, self.target), self.target))

    def program(self, i, x, h):
        if i == self.target:
            w = width_in(h.params, i)
            self.check(h.params)
            if x >> (w - self.k) == self.z:
                return x & mask(w - self.k) & mask(width_out(h.params, i))
        return h(i, x)

    def config(self):
        return {'kind': self.kind, 'z': trigger_hex(self.z), 'k': self.k, 'target': self.target}


class ZeroSuffix(Subverter):
    """On the target index, inputs ending in z answer 0."""

    kind = 'zero_suffix'

    def __init__(self, z, k=None, target=0):
        super().__init__(q_budget=1)
        self.z, self.k = parse_trigger(z, k)
        self.target = target
        self.label = 'zero_suffix(k={}, target={})'.format(self.k, target)

    def check(self, params):
        if self.k > width_in(params, self.target):
            raise ValueError('suffix of {} bits is longer than the input of h{}'.format(self.k, self.target))

    def program(self, i, x, h):
        if i == self.target:
            self.check(h.params)
            if x & mask(self.k) == self.z:
                return 0
        return h(i, x)

    def config(self):
        return {'kind': self.kind, 'z': trigger_hex(self.z), 'k': self.k, 'target': self.target}


class PeelSingle(Subverter):
    """h~_target(m) = 0 for one n-bit input m."""

    kind = 'peel_single'

    def __init__(self, m=0, target=1):
        super().__init__(q_budget=1)
        self.m = parse_word(m)
        self.target = target
        self.label = 'peel_single(target={})'.format(target)

    def check(self, params):
        if not 0 < self.target <= params.ell:
            raise ValueError('peel target h{} is not one of h1..h{}'.format(self.target, params.ell))
        as_int(self.m, width_in(params, self.target))

    def program(self, i, x, h):
        if i == self.target:
            self.check(h.params)
            if x == self.m:
                return 0
        return h(i, x)

    def config(self):
        return {'kind': self.kind, 'm': self.m, 'target': self.target}


class PeelSplit(Subverter):
    """h~_1(x) = 0 when x starts with m, h~_2(x) = 0 when x ends with m."""

    kind = 'peel_split'

    def __init__(self, m, k=None):
        super().__init__(q_budget=1)
        self.m, self.k = parse_trigger(m, k)
        self.label = 'peel_split(k={})'.format(self.k)

    def check(self, params):
        if 2 * self.k > params.n:
            raise ValueError('split trigger of {} bits does not fit twice in {} bits'.format(self.k, params.n))

    def program(self, i, x, h):
        n = h.params.n
        self.check(h.params)
        if i == 1 and x >> (n - self.k) == self.m:
            return 0
        if i == 2 and x & mask(self.k) == self.m:
            return 0
        return h(i, x)

    def config(self):
        return {'kind': self.kind, 'm': trigger_hex(self.m), 'k': self.k}


def keyed_permutation(key, k):
    """Fisher-Yates shuffle of range(2^k) driven by the keyed stream."""
    perm = list(range(1 << k))
    for j in range(len(perm) - 1, 0, -1):
        r = keyed_below(key, 'prp', k, j, bound=j + 1)
        perm[j], perm[r] = perm[r], perm[j]
    return perm


class PrfGated(Subverter):
    """Trigger hidden behind a secret permutation: inputs whose top k bits equal
    perm(low k bits) answer 0 on the target index."""

    kind = 'prf_gated'

    def __init__(self, key, k, target=0):
        super().__init__(q_budget=1)
        self.key = key
        self.k = k
        self.target = target
        self.perm = keyed_permutation(key, k)
        self.label = 'prf_gated(k={}, target={})'.format(k, target)

    def check(self, params):
        if 2 * self.k > width_in(params, self.target):
            raise ValueError('gate of 2 x {} bits is longer than the input of h{}'.format(self.k, self.target))

    def program(self, i, x, h):
        if i == self.target:
            w = width_in(h.params, i)
            self.check(h.params)
            if x >> (w - self.k) == self.perm[x & mask(self.k)]:
                return 0
        return h(i, x)

    def config(self):
        return {'kind': self.kind, 'key': self.key, 'k': self.k, 'target': self.target}


class Echo(Subverter):
    """Honest values, but each h~_i (i > 0) also reads h0 at its own output."""

    kind = 'echo'

    def __init__(self):
        super().__init__(q_budget=2)

    def program(self, i, x, h):
        v = h(i, x)
        if i > 0:
            h(0, v)
        return v


class ProbeH0(Subverter):
    """Each h~_i (i > 0) reads h0(y0) before answering honestly."""

    kind = 'probe_h0'

    def __init__(self, y0=0):
        super().__init__(q_budget=2)
        self.y0 = parse_word(y0)

    def check(self, params):
        as_int(self.y0, width_in(params, 0))

    def program(self, i, x, h):
        if i > 0:
            h(0, self.y0)
        return h(i, x)

    def config(self):
        return {'kind': self.kind, 'y0': self.y0}


class CommonQuery(Subverter):
    """Every h~_j (j > 0) reads h_1(c) and xors its masked bits into the answer."""

    kind = 'common_query'

    def __init__(self, c=0, tweak=1):
        super().__init__(q_budget=2)
        self.c = parse_word(c)
        self.tweak = parse_word(tweak)

    def check(self, params):
        as_int(self.c, params.n)

    def program(self, i, x, h):
        if i == 0:
            return h(0, x)
        common = h(1, self.c)
        return h(i, x) ^ (common & self.tweak)

    def config(self):
        return {'kind': self.kind, 'c': self.c, 'tweak': self.tweak}


SUBVERTERS = {cls.kind: cls for cls in (Honest, PrefixTrigger, ZeroSuffix, PeelSingle, PeelSplit,
                                        PrfGated, Echo, ProbeH0, CommonQuery)}


def make_subverter(kind, params=None, **parameters):
    """Build a subverter by kind name; names may use dashes or underscores.
    With params given, triggers too long for the targeted input are rejected here."""
    kind = kind.replace('-', '_')
    if kind not in SUBVERTERS:
        raise ValueError('unknown subverter kind {!r}; choose from {}'.format(kind, sorted(SUBVERTERS)))
    try:
        sub = SUBVERTERS[kind](**parameters)
    except TypeError as e:
        raise ValueError('bad parameters for {}: {}'.format(kind, e))
    if params is not None:
        sub.check(params)
    return sub


def subverter_from_config(config):
    config = dict(config)
    return make_subverter(config.pop('kind'), **config)


# ______________________________________________________________________________
# Measuring the disagreement rate


def disagrees(sub, table, i, x):
    return subverted_eval(sub, table, i, x).value != table.query(i, x)


def disagreement_set(sub, table, i):
    """Every input on which h~_i differs from h_i, exhaustively."""
    params = table.params
    check_cap(width_in(params, i), params.cap, 'h{} domain'.format(i))
    return SortedSet(x for x in range(1 << width_in(params, i)) if disagrees(sub, table, i, x))


def estimate_epsilon(sub, params, trials=1000, exhaustive=False, indices=None, seed=None):
    """Per-index fraction of inputs with h~_i(x) != h_i(x), with 95% intervals.
    Monte Carlo draws a fresh table and a uniform x per trial; exhaustive mode
    counts every input of one table seeded by params.seed."""
    if trials < 1:
        raise ValueError('trials must be at least 1')
    seed = params.seed if seed is None else seed
    indices = range(params.ell + 1) if indices is None else indices
    estimates = {}
    for i in indices:
        w = width_in(params, i)
        if exhaustive:
            count = len(disagreement_set(sub, OracleTable(params, seed), i))
            total = 1 << w
            fraction = count / total
            estimates[i] = Estimate(i, fraction, fraction, fraction, count, total, True)
            continue
        count = 0
        for t in range(trials):
            table = OracleTable(params, derive_seed(seed, 'epsilon', i, t))
            x = keyed_bits(seed, 'epsilon-x', i, t, width=w)
            count += disagrees(sub, table, i, x)
        lo, hi = binomial_ci(count, trials)
        estimates[i] = Estimate(i, count / trials, lo, hi, count, trials, False)
    return estimates


def epsilon_bound(estimates):
    """The conservative epsilon: the largest upper confidence bound over indices."""
    return max(e.ci_hi for e in estimates.values())
