"""Numerical tools: the Walsh-Hadamard transform over (Z/2)^m, XOR convolution,
total variation distances and the Plancherel bound, the distribution of g~_R,
term classifiers (good / honest / invisible / silent), normality, the
self-reference rate, and the ideal subversion used for crossref."""

import csv
import itertools
import logging
import math
from collections import namedtuple

import numpy as np

from construction import g_tilde, r_at, sample_R
from oracles import OraclePoint, OracleTable, derive_params, embed, width_in
from subversion import estimate_epsilon, epsilon_bound, subverted_eval, trace_points
from utils import binomial_ci, check_cap, derive_seed, desk_cap, keyed_bits

logger = logging.getLogger(__name__)

Spectrum = namedtuple('Spectrum', 'm, coeffs')
SpectrumReport = namedtuple('SpectrumReport', 'sample, tv_exact, tv_bound, threshold, violates, epsilon')
TermClass = namedtuple('TermClass', 'i, x, mode, verdict, estimate, threshold, ci_lo, ci_hi, samples, '
                                    'callers, dishonest')
IdealSubversion = namedtuple('IdealSubversion', 'value, trace')
Normality = namedtuple('Normality', 'normal, counts, minimum, required')
Regularity = namedtuple('Regularity', 'regular, probability, threshold, consistent, normal, tables')
SweepRow = namedtuple('SweepRow', 'n, ell, epsilon_hat, tv_exact, tv_bound, rate, ci_lo, ci_hi')

DRIFT = 1e-12


# ______________________________________________________________________________
# Distributions over (Z/2)^m


class Dist:
    """A probability distribution on m-bit strings, as a weight vector of length 2^m."""

    def __init__(self, weights, cap=None):
        weights = np.asarray(weights, dtype=float)
        m = int(round(math.log2(len(weights)))) if len(weights) else -1
        if m < 0 or len(weights) != 1 << m:
            raise ValueError('a distribution needs 2^m weights, got {}'.format(len(weights)))
        check_cap(m, desk_cap(cap), 'distribution')
        if (weights < 0).any() or abs(weights.sum() - 1) > DRIFT:
            raise ValueError('weights must be non-negative and sum to 1 (sum={})'.format(weights.sum()))
        self.m = m
        self.weights = weights

    @classmethod
    def uniform(cls, m):
        return cls(np.full(1 << m, 1.0 / (1 << m)))

    @classmethod
    def point(cls, m, a=0):
        w = np.zeros(1 << m)
        w[a] = 1.0
        return cls(w)

    @classmethod
    def from_values(cls, values, m):
        """Empirical distribution of a sequence of m-bit values."""
        counts = np.bincount(np.asarray(values, dtype=np.int64), minlength=1 << m)
        return cls(counts / counts.sum())

    def shift(self, a):
        """The distribution of v xor a."""
        return Dist(self.weights[np.arange(1 << self.m) ^ a])

    def __repr__(self):
        return '<Dist m={}>'.format(self.m)


def butterfly(values):
    """Unnormalised fast Walsh-Hadamard transform, O(m 2^m)."""
    a = np.array(values, dtype=float)
    size, h = len(a), 1
    while h < size:
        view = a.reshape(-1, 2, h)
        left = view[:, 0, :].copy()
        view[:, 0, :] += view[:, 1, :]
        view[:, 1, :] = left - view[:, 1, :]
        h *= 2
    return a


def wht(d):
    """f^(s) = sum_a f(a) (-1)^{s.a}; a probability distribution has f^(0) = 1."""
    return Spectrum(d.m, butterfly(d.weights))


def inverse_wht(spectrum):
    weights = butterfly(spectrum.coeffs) / (1 << spectrum.m)
    if weights.min() < -DRIFT:
        raise ValueError('spectrum does not invert to a distribution')
    return Dist(renormalize(np.clip(weights, 0, None)))


def renormalize(weights):
    total = weights.sum()
    if abs(total - 1) > DRIFT:
        logger.debug('renormalising weights that sum to %r', total)
        return weights / total
    return weights


def convolve(f, g):
    """(f * g)(x) = sum_y f(y) g(x xor y), through the transform."""
    if f.m != g.m:
        raise ValueError('cannot convolve m={} with m={}'.format(f.m, g.m))
    return inverse_wht(Spectrum(f.m, wht(f).coeffs * wht(g).coeffs))


def tv_exact(f, g):
    if f.m != g.m:
        raise ValueError('cannot compare m={} with m={}'.format(f.m, g.m))
    return 0.5 * float(np.abs(f.weights - g.weights).sum())


def tv_plancherel_bound(f):
    """||f - U||_tv <= 1/2 (sum over nontrivial characters of f^(chi)^2)^(1/2)."""
    coeffs = wht(f).coeffs
    return 0.5 * math.sqrt(float((coeffs[1:] ** 2).sum()))


# ______________________________________________________________________________
# The distribution of g~_R


def column(sub, table, i):
    """Distribution of h~_i(z) over uniform n-bit z."""
    params = table.params
    values = [subverted_eval(sub, table, i, z).value for z in range(1 << params.n)]
    return Dist.from_values(values, 3 * params.n)


def tvd_threshold(params, epsilon):
    """2^{3n-1} (n 2^{-n/2} + epsilon)^{ell/2}."""
    n = params.n
    return 2.0 ** (3 * n - 1) * (n * 2.0 ** (-n / 2) + epsilon) ** (params.ell / 2)


def g_tilde_spectrum(sub, params, t=1, r=0, x=0, table=None, epsilon=0.0, sample=0):
    """Distribution of g~_R(x) when r_t is fixed to r and the other r_i are uniform:
    the shift by h~_t(x xor r) of the convolution of the ell - 1 other columns.
    Returns the distribution and its comparison with uniform."""
    check_cap(3 * params.n, params.cap, 'g~ distribution')
    table = table if table is not None else OracleTable(params)
    dist = Dist.point(3 * params.n)
    for i in range(1, params.ell + 1):
        if i != t:
            dist = convolve(dist, column(sub, table, i))
    dist = dist.shift(subverted_eval(sub, table, t, x ^ r).value)
    uniform = Dist.uniform(3 * params.n)
    exact = tv_exact(dist, uniform)
    threshold = tvd_threshold(params, epsilon)
    report = SpectrumReport(sample, exact, tv_plancherel_bound(dist), threshold, exact > threshold, epsilon)
    return dist, report


def sample_spectra(sub, params, samples, seed=None, epsilon=None, t=1):
    """g_tilde_spectrum over independently seeded tables; epsilon defaults to the
    measured upper bound."""
    seed = params.seed if seed is None else seed
    if epsilon is None:
        epsilon = epsilon_bound(estimate_epsilon(sub, params, trials=200, seed=seed))
    reports = []
    for k in range(samples):
        table = OracleTable(params, derive_seed(seed, 'spectrum', k))
        r = keyed_bits(seed, 'spectrum-r', k, width=params.n)
        reports.append(g_tilde_spectrum(sub, params, t, r, 0, table, epsilon, k)[1])
    return reports


# ______________________________________________________________________________
# Term classification


def caller_index(sub, table, indices=None):
    """point -> [(j, y)] for every subverted evaluation h~_j(y) that queries point.
    Enumerates whole domains, h0 included, so it raises DeskScaleError once 3n
    exceeds the cap."""
    params = table.params
    if indices is None:
        indices = range(params.ell + 1)
    callers = {}
    for j in indices:
        check_cap(width_in(params, j), params.cap, 'h{} domain'.format(j))
        for y in range(1 << width_in(params, j)):
            for point in set(trace_points(subverted_eval(sub, table, j, y))):
                callers.setdefault(point, []).append((j, y))
    return callers


def measured_epsilon(sub, params, epsilon, seed):
    if epsilon is None:
        return epsilon_bound(estimate_epsilon(sub, params, trials=200, seed=seed))
    return epsilon


def dishonest(sub, table, i, x):
    return int(subverted_eval(sub, table, i, x).value != table.query(i, x))


def resample_disagreement(sub, table, z, evaluations, samples, seed):
    """For each (j, y): the fraction of uniform s with R[z; s]h~_j(y) != R[z; s]h_j(y).
    With samples covering all 2^{3n} values of s, every s is tried once."""
    params = table.params
    space = 1 << (3 * params.n)
    if samples >= space:
        values = range(space)
    else:
        values = [keyed_bits(seed, 'resample', z.index, z.payload, k, width=3 * params.n) for k in range(samples)]
    counts = dict.fromkeys(evaluations, 0)
    for s in values:
        child = table.resample(z, s)
        for j, y in evaluations:
            counts[(j, y)] += dishonest(sub, child, j, y)
    return max(counts.values()) / len(values) if counts else 0.0


def passes(estimate, threshold):
    """Zero observed disagreement always passes."""
    return estimate == 0 or estimate < threshold


def classify_term(sub, params, i, x, mode='good', samples=200, table=None, epsilon=None,
                  seed=None, callers=None):
    """Classify the term (x, h_i). good: Monte Carlo over fresh tables against
    sqrt(epsilon). honest: resampling every point h~_i(x) reads, against
    epsilon^(1/4). invisible: every evaluation that reads (i, x) is honest and
    stays so under resampling (i, x). silent: invisible with few h0 callers."""
    seed = params.seed if seed is None else seed
    point = embed(params, i, x)
    x = point.payload
    epsilon = measured_epsilon(sub, params, epsilon, seed)
    table = table if table is not None else OracleTable(params, seed)
    if mode == 'good':
        hits = sum(dishonest(sub, OracleTable(params, derive_seed(seed, 'good', i, x, k)), i, x)
                   for k in range(samples))
        estimate, threshold = hits / samples, math.sqrt(epsilon)
        lo, hi = binomial_ci(hits, samples)
        return TermClass(i, x, mode, passes(estimate, threshold), estimate, threshold, lo, hi,
                         samples, None, dishonest(sub, table, i, x))
    threshold = epsilon ** 0.25
    if mode == 'honest':
        trace = set(trace_points(subverted_eval(sub, table, i, x))) | {point}
        estimate = max(resample_disagreement(sub, table, z, [(i, x)], samples, seed) for z in trace)
        return TermClass(i, x, mode, passes(estimate, threshold), estimate, threshold, None, None,
                         samples, None, dishonest(sub, table, i, x))
    if mode not in ('invisible', 'silent'):
        raise ValueError('unknown classification mode {!r}'.format(mode))
    if callers is None:
        callers = caller_index(sub, table)
    readers = callers.get(point, [])
    honest_readers = all(not dishonest(sub, table, j, y) for j, y in readers)
    estimate = resample_disagreement(sub, table, point, readers, samples, seed) if honest_readers else 1.0
    invisible = honest_readers and passes(estimate, threshold)
    h0_callers = sum(1 for j, _ in readers if j == 0)
    verdict = invisible
    if mode == 'silent':
        verdict = invisible and h0_callers < 2 ** (2.5 * params.n) * sub.q_budget
    return TermClass(i, x, mode, verdict, estimate, threshold, None, None, samples,
                     h0_callers, dishonest(sub, table, i, x))


def check_normality(sub, params, R, table, samples=16, epsilon=None, seed=None):
    """Normal iff every constellation has at least ell - n invisible terms."""
    seed = params.seed if seed is None else seed
    epsilon = measured_epsilon(sub, params, epsilon, seed)
    callers = caller_index(sub, table)
    invisible = {}
    for i in range(1, params.ell + 1):
        for z in range(1 << params.n):
            invisible[(i, z)] = classify_term(sub, params, i, z, 'invisible', samples, table,
                                              epsilon, seed, callers).verdict
    counts = [sum(invisible[(i, x ^ r_at(R, i))] for i in range(1, params.ell + 1))
              for x in range(1 << params.n)]
    required = params.ell - params.n
    return Normality(min(counts) >= required, counts, min(counts), required)


def observable_cells(params):
    """(point, width, shift) for every cell a query can observe: the 3n-bit
    h_i outputs and the n-bit prefix of each h0 cell."""
    n = params.n
    cells = [(embed(params, i, x), 3 * n, 0) for i in range(1, params.ell + 1) for x in range(1 << n)]
    cells += [(embed(params, 0, y), n, 2 * n) for y in range(1 << (3 * n))]
    return cells


def observable_tables(params):
    """Every h_* that queries can tell apart, as fixture tables; the hidden low
    bits of h0 are zero."""
    cells = observable_cells(params)
    check_cap(sum(width for _, width, _ in cells), params.cap, 'observable tables')
    return (OracleTable(params, params.seed, {point: v << shift for (point, _, shift), v in zip(cells, values)})
            for values in itertools.product(*[range(1 << width) for _, width, _ in cells]))


def regular_transcript(sub, params, R, table, play, k, epsilon, samples=None):
    """Whether the transcript alpha[k] that play(table) produces is regular:
    Pr[(R, h_*) normal | alpha[k]] > 1 - sqrt(ell) epsilon^(1/16).
    A fixed distinguisher's transcript is a function of h_*, so conditioning
    on it leaves h_* uniform over the consistent tables; every observable
    table is enumerated and the consistent ones are checked for normality
    with exact resampling. play(table) must return the Transcript."""
    samples = 1 << (3 * params.n) if samples is None else samples
    tables = observable_tables(params)
    target = play(table)[k]
    threshold = 1 - math.sqrt(params.ell) * epsilon ** (1 / 16)
    consistent = normal = total = 0
    for candidate in tables:
        total += 1
        if play(candidate)[k] != target:
            continue
        consistent += 1
        normal += check_normality(sub, params, R, candidate, samples, epsilon).normal
    probability = normal / consistent
    regular = probability > threshold or probability == 1
    logger.info('alpha[%d]: %d of %d tables consistent, Pr[normal] = %.4f', k, consistent, total, probability)
    return Regularity(regular, probability, threshold, consistent, normal, total)


# ______________________________________________________________________________
# Self-reference, the ideal subversion and crossref


def self_referential(sub, table, R, x):
    """Whether computing g~_R(x) reads h0 at g~_R(x) itself."""
    g, trace = g_tilde(sub, table, R, x)
    return OraclePoint(0, g) in trace_points(trace)


def selfref_rate(sub, params, trials, seed=None, exhaustive=False):
    """Fraction of (R, h_*, x) whose constellation is self-referential, with a 95% interval.
    Exhaustive mode checks every anchor of one seeded (R, table)."""
    seed = params.seed if seed is None else seed
    if exhaustive:
        check_cap(params.n, params.cap, 'anchors')
        table, R = OracleTable(params, seed), sample_R(params, seed)
        hits = sum(self_referential(sub, table, R, x) for x in range(1 << params.n))
        total = 1 << params.n
    else:
        hits, total = 0, trials
        for t in range(trials):
            table = OracleTable(params, derive_seed(seed, 'selfref', t, 'table'))
            R = sample_R(params, derive_seed(seed, 'selfref', t, 'R'))
            hits += self_referential(sub, table, R, keyed_bits(seed, 'selfref-x', t, width=params.n))
    lo, hi = binomial_ci(hits, total)
    return hits / total, lo, hi


def ideal_subversion(sub, ds, params, x, i):
    """I(x, i): h~_i(x) evaluated with h_j from DS1 and h0 from DS2, and Tr(x, i),
    the h0 inputs it read."""
    if not 1 <= i <= params.ell:
        raise ValueError('ideal subversion is defined for 1 <= i <= ell, got {}'.format(i))
    trace = subverted_eval(sub, ds.table(), i, x)
    return IdealSubversion(trace.value, frozenset(p.payload for p in trace_points(trace) if p.index == 0))


def ideal_output(sub, ds, params, R, x):
    """I(x) = xor of I(x xor r_i, i), and Tr(x) the union of their traces."""
    value, trace = 0, frozenset()
    for i in range(1, params.ell + 1):
        entry = ideal_subversion(sub, ds, params, x ^ r_at(R, i), i)
        value ^= entry.value
        trace |= entry.trace
    return value, trace


def crossref_event(tables, sub, ds):
    """Completed anchors whose simulated g~ differs from the ideal subversion."""
    return [(x, comp.g) for x, comp in sorted(tables.completions.items())
            if ideal_output(sub, ds, tables.params, tables.R, x)[0] != comp.g]


# ______________________________________________________________________________
# Chernoff sanity and sweeps


def chernoff_tail(ell, m, lams=(2, 4, 6), trials=100000, seed=0, s=1):
    """Empirical Pr[|X| >= lam sigma] for X = sum of chi_s over ell uniform m-bit
    values, next to 2 exp(-lam^2 / 4). Returns {lam: (empirical, bound)}."""
    rng = np.random.default_rng(seed)
    values = rng.integers(0, 1 << m, size=(trials, ell), dtype=np.int64) & s
    bits = np.zeros_like(values)
    for b in range(m):
        bits ^= (values >> b) & 1
    total = (1 - 2 * bits).sum(axis=1)
    sigma = math.sqrt(ell)
    return {lam: (float((np.abs(total) >= lam * sigma).mean()), 2 * math.exp(-lam ** 2 / 4)) for lam in lams}


def sweep(make_sub, ns, trials=1000, seed=0, cap=None, offset=5):
    """For each n (ell = n + offset): measured epsilon, g~ distance to uniform and
    its bound on the seeded table, and the self-reference rate."""
    rows = []
    for n in ns:
        params = derive_params(n, n + offset, seed, cap)
        sub = make_sub(params)
        epsilon = epsilon_bound(estimate_epsilon(sub, params, trials=min(trials, 500), seed=seed))
        _, report = g_tilde_spectrum(sub, params, epsilon=epsilon)
        rate, lo, hi = selfref_rate(sub, params, trials, seed)
        rows.append(SweepRow(n, params.ell, epsilon, report.tv_exact, report.tv_bound, rate, lo, hi))
    return rows


def export_dist(dist, path):
    """CSV of (index, weight)."""
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(['index', 'weight'])
        writer.writerows((a, repr(float(w))) for a, w in enumerate(dist.weights))


def export_spectrum(spectrum, path):
    """CSV of (index, coefficient)."""
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(['index', 'coefficient'])
        writer.writerows((s, repr(float(c))) for s, c in enumerate(spectrum.coeffs))
