"""Simulators that stand in for H next to an ideal function F.

SimTables is the abbreviated simulator S: lazy write-once tables, eager
completion of a constellation on its first query, and programming of
h0(g~_R(x)) := F(x). FullSimulator is S_F, which must answer before R and the
subversion are known and then replays its early queries through S."""

import json
import logging
from collections import namedtuple

import numpy as np

from construction import constellation, g_tilde, r_at
from oracles import OracleTable, OraclePoint, embed, point_repr
from utils import InvariantError, check_cap, keyed_bits

logger = logging.getLogger(__name__)

FREE = 'free'
PROGRAMMED = 'programmed'
ABORT = 'ABORT'

Cell = namedtuple('Cell', 'value, tag, clock')
Completion = namedtuple('Completion', 'anchor, g, trace, start, end, work, preassigned, self_assigned')


# ______________________________________________________________________________
# Pre-drawn randomness


class Datasets:
    """DS1 holds F and h_i for i > 0; DS2 holds the free values of h0.
    Both are keyed streams, so a cell has the same value whenever and wherever
    it is first drawn; materialize() fixes them up front as arrays."""

    def __init__(self, params, seed):
        self.params = params
        self.seed = seed
        self.F_array = None
        self.h_array = None
        self.h0_array = None

    def F(self, x):
        if self.F_array is not None:
            return int(self.F_array[x])
        return keyed_bits(self.seed, 'DS1-F', x, width=self.params.n)

    def h(self, i, x):
        """A fresh value for h_i(x): DS2 for i = 0, DS1 otherwise."""
        if i == 0:
            if self.h0_array is not None:
                return int(self.h0_array[x])
            return keyed_bits(self.seed, 'DS2', x, width=self.params.n)
        if self.h_array is not None and i <= self.params.ell:
            return int(self.h_array[i, x])
        return keyed_bits(self.seed, 'DS1-h', i, x, width=3 * self.params.n)

    def source(self, i):
        return 'DS2' if i == 0 else 'DS1'

    def materialize(self, include_h0=False):
        """Draw DS1 (and optionally DS2) into arrays; the answers do not change."""
        n, ell = self.params.n, self.params.ell
        check_cap(n + ell.bit_length(), self.params.cap, 'DS1')
        self.F_array = np.array([self.F(x) for x in range(1 << n)], dtype=np.uint64)
        h = np.zeros((ell + 1, 1 << n), dtype=np.uint64)
        for i in range(1, ell + 1):
            h[i] = [self.h(i, x) for x in range(1 << n)]
        self.h_array = h
        if include_h0:
            check_cap(3 * n, self.params.cap, 'DS2')
            self.h0_array = np.array([self.h(0, y) for y in range(1 << (3 * n))], dtype=np.uint64)
        return self

    def table(self):
        """The oracle table whose h_i answers are DS1 and whose h0 answers are DS2."""
        n, ell = self.params.n, self.params.ell

        def rule(point):
            if point.index == 0:
                return self.h(0, point.payload) << (2 * n)
            if point.index <= ell:
                return self.h(point.index, point.payload)
            return None

        return OracleTable(self.params, self.seed, rule=rule)


# ______________________________________________________________________________
# The abbreviated simulator


class SimTables:
    """T_H maps oracle points to (value, tag, clock) and T_F maps anchors to F values.
    Both are write-once. Fresh cells come from the datasets; F is the ideal function
    the simulator may query when it programs h0."""

    def __init__(self, params, R, sub, ds, F=None, return_constellation=False, phase=None):
        self.params = params
        self.R = R
        self.sub = sub
        self.ds = ds
        self.F = F or ds.F
        self.return_constellation = return_constellation
        self.phase = phase
        self.T_H = {}
        self.T_F = {}
        self.clock = 0
        self.completions = {}
        self.by_g = {}
        self.h0_readers = []
        self.events = []

    def tick(self):
        self.clock += 1
        return self.clock

    def assign(self, point, value, tag=FREE):
        if point in self.T_H:
            raise InvariantError('cell {} assigned twice'.format(point_repr(self.params, point)))
        self.T_H[point] = Cell(value, tag, self.tick())

    def record_F(self, x, value):
        if x in self.T_F:
            raise InvariantError('T_F({}) assigned twice'.format(x))
        self.T_F[x] = value
        self.tick()

    def read(self, point):
        """Cache-or-fresh; never completes a constellation."""
        cell = self.T_H.get(point)
        if cell is None:
            self.assign(point, self.ds.h(point.index, point.payload))
            cell = self.T_H[point]
        if point.index == 0:
            for reader in self.h0_readers:
                reader(point.payload, self.clock)
        return cell.value

    def query(self, i, x):
        return self.read(embed(self.params, i, x))

    def assigned(self, i, x):
        return embed(self.params, i, x) in self.T_H

    def complete(self, x):
        """Steps 1 and 2 for anchor x. Returns (Completion, newly_completed)."""
        done = self.completions.get(x)
        if done is not None:
            return done, False
        start = self.clock
        points = constellation(self.params, self.R, x).points
        for point in points:
            if point not in self.T_H:
                self.assign(point, self.ds.h(point.index, point.payload))
        g, trace = g_tilde(self.sub, self, self.R, x)
        cell = self.T_H.get(OraclePoint(0, g))
        comp = Completion(x, g, trace, start, self.clock, len(points) + len(trace.queries),
                          preassigned=cell is not None and cell.clock <= start,
                          self_assigned=cell is not None and cell.clock > start)
        self.completions[x] = comp
        self.by_g.setdefault(g, []).append(x)
        return comp, True

    def program(self, comp, value):
        """Step 3: h0(g~) := value unless that cell already holds something."""
        point = OraclePoint(0, comp.g)
        if point in self.T_H:
            return False
        self.assign(point, value, PROGRAMMED)
        return True

    def sim_query(self, i, x):
        """S answering h_i(x). For i > 0 the constellation of x xor r_i is completed
        first and h0 at its g~ is programmed to F; with return_constellation set the
        whole constellation comes back alongside the answer."""
        point = embed(self.params, i, x)
        fired = []
        if i > 0:
            anchor = point.payload ^ r_at(self.R, i)
            comp, new = self.complete(anchor)
            if new:
                fired.append('complete')
                if anchor not in self.T_F:
                    self.record_F(anchor, self.F(anchor))
                if self.program(comp, self.T_F[anchor]):
                    fired.append('programmed')
                else:
                    fired.append('self_assigned' if comp.self_assigned else 'preassigned')
        value = self.read(point)
        self.log(point, value, fired)
        if self.return_constellation and i > 0:
            points = constellation(self.params, self.R, anchor).points
            return value, {p: self.T_H[p].value for p in points}
        return value

    def log(self, point, value, fired):
        self.events.append({'clock': self.clock, 'phase': self.phase, 'index': point.index,
                            'payload': point.payload, 'value': value,
                            'tag': self.T_H[point].tag if point in self.T_H else None,
                            'events': fired})

    def check_programming(self):
        """Every programmed h0 cell holds F at the anchor whose completion programmed it."""
        for x, comp in self.completions.items():
            cell = self.T_H.get(OraclePoint(0, comp.g))
            if cell is not None and cell.tag == PROGRAMMED and x in self.T_F:
                owners = self.by_g[comp.g]
                if owners[0] == x and cell.value != self.T_F[x]:
                    raise InvariantError('h0({}) programmed to {} but F({}) = {}'.format(
                        comp.g, cell.value, x, self.T_F[x]))
        return True

    def outputs(self):
        """Current T_H answers, for overlaying onto a full table."""
        return {point: cell.value for point, cell in self.T_H.items()}


def complete_constellation(state, x):
    """Complete x's constellation (idempotent) and return g~_R(x)."""
    return state.complete(x)[0].g


def sim_query(state, i, x):
    return state.sim_query(i, x)


# ______________________________________________________________________________
# The full-model simulator


class FullSimulator:
    """S_F. Phase one answers straight from DS1/DS2 and logs the query. When
    receive(R, sub) is called the log is replayed through S; if a replayed h0 input
    equals g~_R of a replayed constellation the session aborts (Conflict) and every
    later query gets ABORT. Phase two is plain S."""

    def __init__(self, params, ds, return_constellation=False):
        self.params = params
        self.ds = ds
        self.return_constellation = return_constellation
        self.phase = 'one'
        self.log = []
        self.served = {}
        self.events = []
        self.tables = None
        self.aborted = False
        self.conflict = None

    def query(self, i, x):
        if self.aborted:
            return ABORT
        if self.phase == 'one':
            point = embed(self.params, i, x)
            value = self.ds.h(i, point.payload)
            self.log.append(point)
            self.served.setdefault(point, self.ds.source(i))
            self.events.append({'clock': len(self.log), 'phase': 'one', 'index': i,
                                'payload': point.payload, 'value': value, 'tag': None, 'events': []})
            return value
        return self.tables.sim_query(i, x)

    def receive(self, R, sub):
        """Deliver R and the subversion, replay phase one, enter phase two."""
        if self.phase != 'one':
            raise InvariantError('R delivered twice')
        self.phase = 'replay'
        self.tables = SimTables(self.params, R, sub, self.ds,
                                return_constellation=self.return_constellation, phase='replay')
        for point in self.log:
            self.tables.sim_query(point.index, point.payload)
        self.conflict = find_conflict(self.tables, self.log)
        if self.conflict is not None:
            self.aborted = True
            logger.warning('S_F aborts: h0 input %d equals g~ of the constellation queried at %s',
                           self.conflict[0], self.conflict[1])
        self.phase = 'two'
        self.tables.phase = 'two'
        return not self.aborted

    def session_events(self):
        return self.events + (self.tables.events if self.tables else [])


def find_conflict(tables, log):
    """A replayed h0 input y and a replayed h_i query whose constellation has g~ = y.
    The h0 inputs are the logged h0 queries plus every free h0 cell the replay drew."""
    h0_inputs = {p.payload for p in log if p.index == 0}
    h0_inputs.update(p.payload for p, cell in tables.T_H.items() if p.index == 0 and cell.tag == FREE)
    for point in log:
        if point.index == 0:
            continue
        anchor = point.payload ^ r_at(tables.R, point.index)
        g = tables.completions[anchor].g
        if g in h0_inputs:
            return g, (point.index, point.payload)
    return None


def write_event_log(events, path):
    """One JSON object per line."""
    with open(path, 'w') as f:
        for event in events:
            f.write(json.dumps(event, sort_keys=True) + '\n')
