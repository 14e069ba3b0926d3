"""Indifferentiability games: a distinguisher against the real world (the
construction over H) or the ideal world (F next to a simulator), the hybrid
games between them, crisis-event detection, and the experiments built on top."""

import logging
from collections import namedtuple
from functools import partial

from analysis import ideal_output
from construction import construction_eval, g_tilde, r_at, sample_R
from oracles import OraclePoint, embed, width_in
from simulator import Datasets, FullSimulator, SimTables
from subversion import Honest, subverted_eval
from utils import (BudgetExceeded, InvariantError, as_int, binomial_ci, derive_seed, keyed_below,
                   keyed_bits, mask, parse_word, run_trials, two_proportion_ci)

logger = logging.getLogger(__name__)

Entry = namedtuple('Entry', 'target, x, answer')
Crisis = namedtuple('Crisis', 'fired, step, witness')
GameResult = namedtuple('GameResult', 'variant, decision, transcript, flags, game')
Ladder = namedtuple('Ladder', 'results, flags')
Seeds = namedtuple('Seeds', 'table, R, coins')
Advantage = namedtuple('Advantage', 'advantage, ci_lo, ci_hi, real_rate, ideal_rate, trials')
Rate = namedtuple('Rate', 'rate, ci_lo, ci_hi, hits, trials')

CRISES = ('pred', 'subv', 'selfref', 'forwardpred', 'backwardpred', 'conflict', 'crossref')

# Each adjacent pair of games and the crisis events that may separate them.
LINKS = (('G1', 'G2.1', ('subv',)),
         ('G2.1', 'G2.2', ()),
         ('G2.2', 'G3.1', ('pred', 'selfref')),
         ('G3.1', 'G3.2', ()),
         ('G3.2', 'G4', ('forwardpred', 'backwardpred')))


def make_seeds(master, trial, arm='shared'):
    """Independent, reproducible seeds for one trial of one arm."""
    return Seeds(derive_seed(master, trial, arm, 'table'),
                 derive_seed(master, trial, arm, 'R'),
                 derive_seed(master, trial, arm, 'coins'))


# ______________________________________________________________________________
# Transcripts and crisis flags


class Transcript:
    """R followed by the ordered (target, input, answer) entries, target being
    'F' or a function index. transcript[k] is the prefix alpha[k]; alpha[0] = R."""

    def __init__(self, R):
        self.R = R
        self.entries = []

    def record(self, target, x, answer):
        self.entries.append(Entry(target, x, answer))

    def __getitem__(self, k):
        return (self.R,) + tuple(self.entries[:k])

    def __len__(self):
        return len(self.entries)

    def __eq__(self, other):
        return isinstance(other, Transcript) and self.R == other.R and self.entries == other.entries

    __hash__ = None

    def first_divergence(self, other):
        """Index of the first differing entry, or None when equal."""
        if self.R != other.R:
            return 0
        for k, (a, b) in enumerate(zip(self.entries, other.entries)):
            if a != b:
                return k
        if len(self.entries) != len(other.entries):
            return min(len(self.entries), len(other.entries))
        return None


class CrisisFlags:
    """Monotone flags: the first firing of each event is kept with its step and witness."""

    def __init__(self):
        self.flags = {name: Crisis(False, None, None) for name in CRISES}

    def fire(self, name, step, witness):
        if not self.flags[name].fired:
            logger.debug('%s fired at step %s: %s', name, step, witness)
            self.flags[name] = Crisis(True, step, witness)

    def fired(self, *names):
        return any(self.flags[name].fired for name in (names or CRISES))

    def names(self):
        return [name for name in CRISES if self.flags[name].fired]

    def merge(self, other):
        for name, crisis in other.flags.items():
            if crisis.fired:
                self.fire(name, crisis.step, crisis.witness)
        return self

    def __getitem__(self, name):
        return self.flags[name]

    def __repr__(self):
        return '<CrisisFlags {}>'.format(self.names())


# ______________________________________________________________________________
# The distinguisher's view


class Interface:
    """What a distinguisher sees: F(x) on the construction side, h(i, x) on the
    primitive side, the public R, the subversion it authored and its own coins."""

    def __init__(self, game, budget, coins):
        self.game = game
        self.params = game.params
        self.R = game.R
        self.sub = game.sub
        self.budget = budget
        self.coins = coins
        self.count = 0
        self.F_queried = []
        self.anchors = set()

    def spend(self, where):
        if self.count >= self.budget:
            raise BudgetExceeded(where, self.budget)
        self.count += 1

    def F(self, x):
        x = as_int(x, self.params.n)
        self.spend(('F', x))
        if x not in self.F_queried:
            self.F_queried.append(x)
        return self.game.query_F(x)

    def h(self, i, x):
        point = embed(self.params, i, x)
        self.spend((i, point.payload))
        if i > 0:
            self.anchors.add(point.payload ^ r_at(self.R, i))
        return self.game.query_h(i, point.payload)

    query = h

    def coin(self, width, *label):
        return keyed_bits(self.coins, 'D', *label, width=width)

    def below(self, bound, *label):
        return keyed_below(self.coins, 'D', *label, bound=bound)


# ______________________________________________________________________________
# Games


class Game:
    """A game answers a distinguisher's F-queries and h-queries. To create one,
    subclass and implement answer_F and answer_h; finish runs any bookkeeping
    that needs the whole interaction."""

    variant = None

    def __init__(self, params, sub, R, ds):
        self.params = params
        self.sub = sub
        self.R = R
        self.ds = ds
        self.transcript = Transcript(R)
        self.flags = CrisisFlags()
        self.repaired = 0

    def answer_F(self, x):
        """The construction-side answer at x."""
        raise NotImplementedError

    def answer_h(self, i, x):
        """The primitive-side answer h_i(x)."""
        raise NotImplementedError

    def finish(self):
        """Called once the distinguisher is done."""

    @property
    def step(self):
        return len(self.transcript)

    def query_F(self, x):
        answer = self.answer_F(x)
        self.transcript.record('F', x, answer)
        return answer

    def query_h(self, i, x):
        answer = self.answer_h(i, x)
        self.transcript.record(i, x, answer)
        return answer

    def normal_form(self, oracle):
        """Query the constellation of every F-queried x that D left unqueried."""
        for x in oracle.F_queried:
            if x not in oracle.anchors:
                logger.warning('%s: normal form repair queries the constellation of %d', self.variant, x)
                self.query_h(1, x ^ r_at(self.R, 1))
                oracle.anchors.add(x)
                self.repaired += 1

    def play_game(self, D, coins=0):
        """Run D to its decision, repair to normal form, finish. Returns the bit."""
        oracle = Interface(self, D.budget(self.params, self.sub), coins)
        decision = int(bool(D.program(oracle)))
        self.normal_form(oracle)
        self.finish()
        return decision

    def __repr__(self):
        return '<{}>'.format(self.__class__.__name__)


class Game1(Game):
    """The real world: the construction evaluated over a full table h_*."""

    variant = 'G1'

    def __init__(self, params, sub, R, ds, table=None, construction='full'):
        super().__init__(params, sub, R, ds)
        self.table = table if table is not None else ds.table()
        self.construction = construction

    def answer_F(self, x):
        return construction_eval(self.construction, self.sub, self.table, self.R, x)

    def answer_h(self, i, x):
        return self.table.query(i, x)


class Game21(Game1):
    """As the real world, but the outer h0 is honest: F-answers are h0(g~_R(x))."""

    variant = 'G2.1'

    def answer_F(self, x):
        g, _ = g_tilde(self.sub, self.table, self.R, x)
        return self.table.query(0, g)


class LazyGame(Game):
    """Games that keep H in write-once tables and complete constellations eagerly.
    Subclasses decide what completing a constellation programs."""

    def __init__(self, params, sub, R, ds):
        super().__init__(params, sub, R, ds)
        self.tables = SimTables(params, R, sub, ds, phase=self.variant)
        self.tables.h0_readers.append(self.h0_read)

    def h0_read(self, y, clock):
        pass

    def on_completion(self, comp):
        pass

    def program(self, comp):
        raise NotImplementedError

    def completion(self, x):
        comp, new = self.tables.complete(x)
        if new:
            self.on_completion(comp)
            self.program(comp)
        return comp

    def answer_h(self, i, x):
        if i > 0:
            self.completion(x ^ r_at(self.R, i))
        return self.tables.query(i, x)


class Game22(LazyGame):
    """Lazy version of Game 2.1. Completing x gives h0(g~_R(x)) a uniform value
    unless it is already assigned, then sets F(x) := h0(g~_R(x)). Afterwards the
    empty cells are filled in to give h_*, over which subv is decided."""

    variant = 'G2.2'

    def __init__(self, params, sub, R, ds):
        super().__init__(params, sub, R, ds)
        self.touched = {}
        self.star = None

    def on_completion(self, comp):
        self.touched[comp.anchor] = self.step
        if comp.preassigned:
            self.flags.fire('pred', self.step, (comp.anchor, comp.g))
        elif comp.self_assigned:
            self.flags.fire('selfref', self.step, (comp.anchor, comp.g))

    def program(self, comp):
        x = comp.anchor
        if not self.tables.program(comp, self.ds.F(x)):
            logger.warning('G2.2: h0(%d) already assigned when completing %d; F(%d) takes its value', comp.g, x, x)
        self.tables.record_F(x, self.tables.T_H[OraclePoint(0, comp.g)].value)

    def answer_F(self, x):
        if x not in self.tables.T_F:
            self.completion(x)
        return self.tables.T_F[x]

    def h_star(self):
        """The tables with every empty cell filled from the datasets."""
        return self.ds.table().overlay(self.tables.outputs())

    def filled_F(self, x):
        """F(x) after fill-in: the recorded value, else h0(g~_R(x)) over h_*."""
        if x in self.tables.T_F:
            return self.tables.T_F[x]
        star = self.star if self.star is not None else self.h_star()
        g, _ = g_tilde(self.sub, star, self.R, x)
        return star.query(0, g)

    def finish(self):
        self.star = self.h_star()
        for x, step in self.touched.items():
            g = self.tables.completions[x].g
            if subverted_eval(self.sub, self.star, 0, g).value != self.star.query(0, g):
                self.flags.fire('subv', step, (x, g))


class Game31(LazyGame):
    """F is sampled lazily and h0(g~_R(x)) is programmed to F(x) when free."""

    variant = 'G3.1'

    def F_value(self, x):
        if x not in self.tables.T_F:
            self.tables.record_F(x, self.ds.F(x))
        return self.tables.T_F[x]

    def program(self, comp):
        self.tables.program(comp, self.F_value(comp.anchor))

    def answer_F(self, x):
        value = self.F_value(x)
        self.completion(x)
        return value


class Game32(Game31):
    """Game 3.1 with DS1 drawn up front. Tracks forward and backward prediction."""

    variant = 'G3.2'

    def __init__(self, params, sub, R, ds):
        super().__init__(params, sub, R, Datasets(params, ds.seed).materialize())
        self.F_step = {}
        self.b_anchors = set()

    def on_completion(self, comp):
        if comp.preassigned or comp.self_assigned:
            self.flags.fire('forwardpred', self.step, (comp.anchor, comp.g))

    def h0_read(self, y, clock):
        for x in self.tables.by_g.get(y, ()):
            if x in self.F_step and x not in self.b_anchors:
                self.flags.fire('backwardpred', self.step, (x, y, clock))

    def answer_F(self, x):
        self.F_step.setdefault(x, self.step)
        return super().answer_F(x)

    def answer_h(self, i, x):
        if i > 0:
            self.b_anchors.add(x ^ r_at(self.R, i))
        return super().answer_h(i, x)


class Game4(LazyGame):
    """The ideal world: F from DS1 next to the simulator S. Completed
    constellations whose g~ differs from the ideal subversion raise crossref."""

    variant = 'G4'

    def answer_F(self, x):
        return self.ds.F(x)

    def answer_h(self, i, x):
        return self.tables.sim_query(i, x)

    def finish(self):
        for x, comp in self.tables.completions.items():
            ideal, _ = ideal_output(self.sub, self.ds, self.params, self.R, x)
            if ideal != comp.g:
                self.flags.fire('crossref', self.step, (x, ideal, comp.g))


GAMES = {cls.variant: cls for cls in (Game1, Game21, Game22, Game31, Game32, Game4)}


def run_game(variant, D, sub, params, seeds, construction='full', table=None):
    """Play one game; all randomness comes from seeds."""
    if variant not in GAMES:
        raise ValueError('unknown game {!r}; choose from {}'.format(variant, sorted(GAMES)))
    ds = Datasets(params, seeds.table)
    R = sample_R(params, seeds.R)
    if variant in ('G1', 'G2.1'):
        game = GAMES[variant](params, sub, R, ds, table=table, construction=construction)
    else:
        game = GAMES[variant](params, sub, R, ds)
    decision = game.play_game(D, seeds.coins)
    return GameResult(variant, decision, game.transcript, game.flags, game)


def transcript_of(D, sub, params, R, table, coins=0, variant='G2.1'):
    """D's transcript in Game 1 or 2.1 over a given h_*."""
    if variant not in ('G1', 'G2.1'):
        raise ValueError('only G1 and G2.1 run over a given table, not {!r}'.format(variant))
    game = GAMES[variant](params, sub, R, None, table=table)
    game.play_game(D, coins)
    return game.transcript


def run_ladder(D, sub, params, seeds):
    """All six games on shared seeds. Games 1 and 2.1 run over the h_* that
    Game 2.2 leaves behind."""
    results = {'G2.2': run_game('G2.2', D, sub, params, seeds)}
    star = results['G2.2'].game.star
    results['G2.1'] = run_game('G2.1', D, sub, params, seeds, table=star)
    results['G1'] = run_game('G1', D, sub, params, seeds, table=star)
    for variant in ('G3.1', 'G3.2', 'G4'):
        results[variant] = run_game(variant, D, sub, params, seeds)
    flags = CrisisFlags()
    for result in results.values():
        flags.merge(result.flags)
    return Ladder(results, flags)


def divergences(ladder):
    """Adjacent pairs whose transcripts differ."""
    return [(a, b) for a, b, _ in LINKS if ladder.results[a].transcript != ladder.results[b].transcript]


def unexplained_divergences(ladder):
    """Adjacent pairs that differ although none of their separating events fired."""
    return [(a, b) for a, b, events in LINKS
            if ladder.results[a].transcript != ladder.results[b].transcript
            and not (events and ladder.flags.fired(*events))]


def triangle_accounted(ladder):
    """A real/ideal divergence must come with at least one crisis event."""
    if ladder.results['G1'].transcript == ladder.results['G4'].transcript:
        return True
    return ladder.flags.fired('subv', 'pred', 'selfref', 'forwardpred', 'backwardpred')


def verify_flags(result):
    """Re-check every fired flag's witness against the archived game state."""
    game, flags = result.game, result.flags
    tables = getattr(game, 'tables', None)
    for name in flags.names():
        witness = flags[name].witness
        if name in ('pred', 'selfref', 'forwardpred'):
            x, g = witness
            comp = tables.completions.get(x)
            cell = tables.T_H.get(OraclePoint(0, g))
            ok = comp is not None and comp.g == g and cell is not None
            if ok and name == 'pred':
                ok = cell.clock <= comp.start
            elif ok and name == 'selfref':
                ok = comp.start < cell.clock <= comp.end
            elif ok:
                ok = cell.clock <= comp.end
        elif name == 'subv':
            x, g = witness
            ok = (tables.completions[x].g == g and
                  subverted_eval(game.sub, game.star, 0, g).value != game.star.query(0, g))
        elif name == 'backwardpred':
            x, y, _ = witness
            ok = tables.completions[x].g == y and x in game.F_step
        elif name == 'crossref':
            x, ideal, g = witness
            ok = (ideal_output(game.sub, game.ds, game.params, game.R, x)[0] == ideal != g and
                  tables.completions[x].g == g)
        else:
            ok = True
        if not ok:
            raise InvariantError('{} witness {} does not re-check in {}'.format(name, witness, game))
    return True


# ______________________________________________________________________________
# Distinguishers


class Distinguisher:
    """D(oracle) -> bit, where 1 claims the real world. Subclasses implement
    program; budget gives q_D for the given parameters."""

    kind = None

    def __init__(self, q_D=None):
        self.q_D = q_D

    def budget(self, params, sub):
        return self.q_D if self.q_D is not None else self.default_budget(params, sub)

    def default_budget(self, params, sub):
        return 16

    def program(self, oracle):
        raise NotImplementedError

    def recompute(self, oracle, x):
        """g~_R(x) and h~_0 of it, evaluated through the primitive-side oracle."""
        g, _ = g_tilde(oracle.sub, oracle, oracle.R, x)
        return g, subverted_eval(oracle.sub, oracle, 0, g).value

    def config(self):
        return {'kind': self.kind}

    def __repr__(self):
        return '<{}>'.format(self.kind)


class Constant(Distinguisher):
    kind = 'constant'

    def __init__(self, bit=1):
        super().__init__(q_D=0)
        self.bit = bit

    def program(self, oracle):
        return self.bit

    def config(self):
        return {'kind': self.kind, 'bit': self.bit}


class RandomProbe(Distinguisher):
    """q uniformly random queries, half F and half h_i; answers the parity of all answers."""

    kind = 'random_probe'

    def __init__(self, q=16):
        super().__init__(q_D=q)
        self.q = q

    def program(self, oracle):
        params, acc = oracle.params, 0
        for k in range(self.q):
            if oracle.coin(1, 'side', k):
                acc ^= oracle.F(oracle.coin(params.n, 'x', k))
            else:
                i = oracle.below(params.ell + 1, 'i', k)
                acc ^= oracle.h(i, oracle.coin(width_in(params, i), 'x', k))
        return acc & 1

    def config(self):
        return {'kind': self.kind, 'q': self.q}


class ConstellationSweep(Distinguisher):
    """Query the full constellation of a few random anchors, then F there."""

    kind = 'constellation_sweep'

    def __init__(self, anchors=2):
        super().__init__()
        self.anchors = anchors

    def default_budget(self, params, sub):
        return self.anchors * (params.ell + 1)

    def program(self, oracle):
        params, acc = oracle.params, 0
        for k in range(self.anchors):
            x = oracle.coin(params.n, 'anchor', k)
            for i in range(1, params.ell + 1):
                acc ^= oracle.h(i, x ^ r_at(oracle.R, i))
            acc ^= oracle.F(x)
        return acc & 1

    def config(self):
        return {'kind': self.kind, 'anchors': self.anchors}


class ConsistencyCheck(Distinguisher):
    """Ask F(x), recompute h~_0(g~_R(x)) through h, answer whether they agree."""

    kind = 'consistency_check'

    def __init__(self, x=None):
        super().__init__()
        self.x = None if x is None else parse_word(x)

    def default_budget(self, params, sub):
        return 1 + (params.ell + 1) * sub.q_budget

    def program(self, oracle):
        x = self.x if self.x is not None else oracle.coin(oracle.params.n, 'x')
        answer = oracle.F(x)
        _, recomputed = self.recompute(oracle, x)
        return int(answer == recomputed)

    def config(self):
        return {'kind': self.kind, 'x': self.x}


class PeelSingleAttack(Distinguisher):
    """Against h~_1(m) = 0: query F(m xor r_1) and claim real iff it is 0."""

    kind = 'peel_single_attack'

    def __init__(self, m=0):
        super().__init__(q_D=1)
        self.m = parse_word(m)

    def program(self, oracle):
        return int(oracle.F(self.m ^ r_at(oracle.R, 1)) == 0)

    def config(self):
        return {'kind': self.kind, 'm': self.m}


class PeelSplitAttack(Distinguisher):
    """Against the split trigger: query (m xor r_1's head) || (m xor r_2's tail)."""

    kind = 'peel_split_attack'

    def __init__(self, m=0, k=None):
        super().__init__(q_D=1)
        self.m = parse_word(m)
        self.k = k

    def program(self, oracle):
        n = oracle.params.n
        k = self.k or n // 2
        head = self.m ^ (r_at(oracle.R, 1) >> (n - k))
        tail = self.m ^ (r_at(oracle.R, 2) & mask(k))
        return int(oracle.F((head << (n - k)) | tail) == 0)

    def config(self):
        return {'kind': self.kind, 'm': self.m, 'k': self.k}


class TriggerAttack(Distinguisher):
    """Search random anchors for one whose g~ starts with the h0 trigger z, then
    check that F answers the trigger's payload there."""

    kind = 'trigger_attack'

    def __init__(self, z=0, k=4, tries=4):
        super().__init__()
        self.z = parse_word(z)
        self.k = k
        self.tries = tries

    def default_budget(self, params, sub):
        return self.tries * (params.ell * sub.q_budget + 1)

    def program(self, oracle):
        params = oracle.params
        w = 3 * params.n
        for t in range(self.tries):
            x = oracle.coin(params.n, 'x', t)
            g, _ = g_tilde(oracle.sub, oracle, oracle.R, x)
            if g >> (w - self.k) == self.z:
                return int(oracle.F(x) == g & mask(w - self.k) & mask(params.n))
        return 0

    def config(self):
        return {'kind': self.kind, 'z': self.z, 'k': self.k, 'tries': self.tries}


DISTINGUISHERS = {cls.kind: cls for cls in (Constant, RandomProbe, ConstellationSweep, ConsistencyCheck,
                                            PeelSingleAttack, PeelSplitAttack, TriggerAttack)}


def make_distinguisher(kind, **parameters):
    kind = kind.replace('-', '_')
    if kind not in DISTINGUISHERS:
        raise ValueError('unknown distinguisher {!r}; choose from {}'.format(kind, sorted(DISTINGUISHERS)))
    try:
        return DISTINGUISHERS[kind](**parameters)
    except TypeError as e:
        raise ValueError('bad parameters for {}: {}'.format(kind, e))


def distinguisher_from_config(config):
    config = dict(config)
    return make_distinguisher(config.pop('kind'), **config)


# ______________________________________________________________________________
# Advantage and crisis tallies


def abs_interval(lo, hi):
    if lo <= 0 <= hi:
        return 0.0, max(-lo, hi)
    return min(abs(lo), abs(hi)), max(abs(lo), abs(hi))


def advantage_trial(D, sub, params, construction, master, t):
    real = run_game('G1', D, sub, params, make_seeds(master, t, 'real'), construction=construction)
    ideal = run_game('G4', D, sub, params, make_seeds(master, t, 'ideal'))
    return real.decision, ideal.decision


def estimate_advantage(D, sub, params, trials, construction='full', seed=None, workers=1):
    """|Pr[D -> 1 | real] - Pr[D -> 1 | ideal]| with a 95% two-proportion interval.
    The real arm is Game 1 over the chosen construction, the ideal arm Game 4."""
    if trials < 100:
        raise ValueError('advantage estimates need at least 100 trials, got {}'.format(trials))
    master = params.seed if seed is None else seed
    rows = run_trials(partial(advantage_trial, D, sub, params, construction, master), range(trials), workers)
    real = sum(r for r, _ in rows)
    ideal = sum(i for _, i in rows)
    diff, lo, hi = two_proportion_ci(real, trials, ideal, trials)
    lo, hi = abs_interval(lo, hi)
    return Advantage(abs(diff), lo, hi, real / trials, ideal / trials, trials)


def ladder_trial(D, sub, params, master, t):
    """One shared-seed ladder run, summarised as a flat row."""
    ladder = run_ladder(D, sub, params, make_seeds(master, t))
    for result in ladder.results.values():
        verify_flags(result)
    row = {'trial': t}
    for variant, result in ladder.results.items():
        row['decision_' + variant] = result.decision
    for name in CRISES:
        crisis = ladder.flags[name]
        row[name] = int(crisis.fired)
        row[name + '_witness'] = '' if crisis.witness is None else str(crisis.witness)
    row['divergent'] = ';'.join('{}~{}'.format(a, b) for a, b in divergences(ladder))
    row['unexplained'] = ';'.join('{}~{}'.format(a, b) for a, b in unexplained_divergences(ladder))
    row['real_ideal_differ'] = int(ladder.results['G1'].transcript != ladder.results['G4'].transcript)
    row['decision_differs'] = int(ladder.results['G1'].decision != ladder.results['G4'].decision)
    row['accounted'] = int(triangle_accounted(ladder))
    return row


def crisis_tally(D, sub, params, trials, seed=None, workers=1):
    """Per-trial ladder rows plus the rate of each crisis event with its interval."""
    master = params.seed if seed is None else seed
    rows = run_trials(partial(ladder_trial, D, sub, params, master), range(trials), workers)
    rates = {}
    for name in CRISES:
        hits = sum(row[name] for row in rows)
        rates[name] = Rate(hits / trials, *binomial_ci(hits, trials), hits, trials)
    return rows, rates


# ______________________________________________________________________________
# Exp-Many and Exp-One


class ManyAdversary:
    """Publishes (subversion, terms) before R exists; terms are (i, x) queries."""

    def publish(self, ds, params, coins, R=None):
        raise NotImplementedError


class RandomTerms(ManyAdversary):
    """count uniformly random terms, alternating h0 and h_i, honest subversion."""

    def __init__(self, count=10, sub=None):
        self.count = count
        self.sub = sub or Honest()

    def publish(self, ds, params, coins, R=None):
        terms = []
        for k in range(self.count):
            if k % 2 == 0:
                terms.append((0, keyed_bits(coins, 'M', k, width=3 * params.n)))
            else:
                i = 1 + keyed_below(coins, 'M-i', k, bound=params.ell)
                terms.append((i, keyed_bits(coins, 'M', k, width=params.n)))
        return self.sub, terms


class LeakedR(ManyAdversary):
    """Given R it can compute g~_R from DS1 and ask h0 right there."""

    def publish(self, ds, params, coins, R=None):
        if R is None:
            raise ValueError('LeakedR needs R')
        y = keyed_bits(coins, 'M', width=params.n)
        anchor = y ^ r_at(R, 1)
        g = 0
        for i in range(1, params.ell + 1):
            g ^= ds.h(i, anchor ^ r_at(R, i))
        return Honest(), [(0, g), (1, y)]


def check_term(params, term):
    try:
        i, x = term
        embed(params, i, x)
    except (TypeError, ValueError) as e:
        raise ValueError('malformed term {!r}: {}'.format(term, e))


def run_exp_many(M, params, seeds, leak_R=False, q_D=None):
    """1 iff the published terms contain (x, h0) and (y, h_i) with
    x = g~_R(y xor r_i) once replayed in simulated Game 4."""
    ds = Datasets(params, seeds.table)
    R = sample_R(params, seeds.R)
    sub, terms = M.publish(ds, params, seeds.coins, R if leak_R else None)
    if q_D is not None and len(terms) >= q_D:
        raise ValueError('{} terms published; fewer than q_D={} allowed'.format(len(terms), q_D))
    for term in terms:
        check_term(params, term)
    sim = FullSimulator(params, ds)
    for i, x in terms:
        sim.query(i, x)
    sim.receive(R, sub)
    return int(sim.aborted)


class OneAdversary:
    """Publishes (subversion, (i, x), y) before R exists."""

    def publish(self, ds, params, coins):
        raise NotImplementedError


class GuessG(OneAdversary):
    """Honest subversion, a random query, and a fixed guess y for g~."""

    def __init__(self, y=0, sub=None):
        self.y = y
        self.sub = sub or Honest()

    def publish(self, ds, params, coins):
        return self.sub, (1, keyed_bits(coins, 'M', width=params.n)), self.y


class PeelOff(OneAdversary):
    """With a single mixing function g~_R(x xor r_1) = h~_1(x), which DS1 reveals."""

    def publish(self, ds, params, coins):
        x = keyed_bits(coins, 'M', width=params.n)
        return Honest(), (1, x), ds.h(1, x)


def run_exp_one(M, params, seeds):
    """1 iff g~_R of the constellation completed by the single query equals y."""
    ds = Datasets(params, seeds.table)
    R = sample_R(params, seeds.R)
    sub, term, y = M.publish(ds, params, seeds.coins)
    check_term(params, term)
    i, x = term
    if i < 1:
        raise ValueError('the Exp-One query must target some h_i with i >= 1')
    y = as_int(y, 3 * params.n)
    sim = FullSimulator(params, ds)
    sim.receive(R, sub)
    sim.query(i, x)
    return int(sim.tables.completions[x ^ r_at(R, i)].g == y)


def exp_trial(run, M, params, master, t):
    return run(M, params, make_seeds(master, t))


def exp_rate(run, M, params, trials, seed=None, workers=1):
    """Output-1 rate of run_exp_many or run_exp_one with its 95% interval."""
    master = params.seed if seed is None else seed
    hits = sum(run_trials(partial(exp_trial, run, M, params, master), range(trials), workers))
    return Rate(hits / trials, *binomial_ci(hits, trials), hits, trials)
