import pytest

from games import *
from oracles import derive_params
from simulator import Datasets
from subversion import Echo, Honest, PeelSingle, PrefixTrigger, Subverter
from utils import BudgetExceeded
import logging
import random

random.seed("aima-python")

params = derive_params(4, 9, seed=1, cap=16)


def seeds(t=0):
    return make_seeds(17, t)


def honest_g(ds, R, x):
    g = 0
    for i in range(1, params.ell + 1):
        g ^= ds.h(i, x ^ r_at(R, i))
    return g


class AskF(Distinguisher):
    """Queries F at one point and nothing else."""
    kind = 'ask_f'

    def __init__(self, x=3):
        super().__init__(q_D=1)
        self.x = x

    def program(self, oracle):
        return oracle.F(self.x) & 1


class Greedy(Distinguisher):
    kind = 'greedy'

    def __init__(self):
        super().__init__(q_D=2)

    def program(self, oracle):
        for x in range(3):
            oracle.F(x)
        return 1


def test_make_seeds():
    assert make_seeds(1, 2) == make_seeds(1, 2)
    assert make_seeds(1, 2, 'real') != make_seeds(1, 2, 'ideal')
    s = make_seeds(1, 2)
    assert len({s.table, s.R, s.coins}) == 3


def test_transcript():
    a, b = Transcript('R'), Transcript('R')
    a.record('F', 1, 5)
    a.record(2, 3, 7)
    b.record('F', 1, 5)
    assert a[0] == ('R',)
    assert a[1] == ('R', Entry('F', 1, 5))
    assert len(a) == 2
    assert a != b
    assert a.first_divergence(b) == 1
    b.record(2, 3, 8)
    assert a.first_divergence(b) == 1
    b.entries[1] = Entry(2, 3, 7)
    assert a == b and a.first_divergence(b) is None
    assert a.first_divergence(Transcript('S')) == 0


def test_crisis_flags_are_monotone():
    flags = CrisisFlags()
    assert not flags.fired()
    flags.fire('pred', 3, (1, 2))
    flags.fire('pred', 5, (4, 4))
    assert flags['pred'] == Crisis(True, 3, (1, 2))
    assert flags.fired('pred') and flags.fired() and not flags.fired('subv')
    other = CrisisFlags()
    other.fire('subv', 1, (0, 0))
    flags.merge(other)
    assert flags.names() == ['pred', 'subv']


def test_budget_is_enforced():
    with pytest.raises(BudgetExceeded):
        run_game('G1', Greedy(), Honest(), params, seeds())
    with pytest.raises(BudgetExceeded):
        run_game('G4', Greedy(), Honest(), params, seeds())


def test_unknown_game():
    with pytest.raises(ValueError):
        run_game('G5', Constant(), Honest(), params, seeds())


def test_constant_distinguisher():
    for variant in GAMES:
        result = run_game(variant, Constant(1), Honest(), params, seeds())
        assert result.decision == 1
        assert len(result.transcript) == 0


def test_consistency_check_is_fooled_honestly():
    D = ConsistencyCheck()
    for t in range(5):
        assert run_game('G1', D, Honest(), params, seeds(t)).decision == 1
        assert run_game('G4', D, Honest(), params, seeds(t)).decision == 1


def test_normal_form_repair(caplog):
    with caplog.at_level(logging.WARNING, logger='games'):
        result = run_game('G4', AskF(3), Honest(), params, seeds())
    assert any('normal form repair' in r.getMessage() for r in caplog.records)
    game = result.game
    assert game.repaired == 1
    assert 3 in game.tables.completions
    assert [e.target for e in result.transcript.entries] == ['F', 1]
    result = run_game('G3.1', AskF(3), Honest(), params, seeds())
    assert result.game.repaired == 1


def test_ladder_equalities():
    for sub in [Honest(), Echo(), PeelSingle(m=0)]:
        for D in [RandomProbe(8), ConstellationSweep(2), ConsistencyCheck()]:
            for t in range(3):
                ladder = run_ladder(D, sub, params, seeds(t))
                r = ladder.results
                assert r['G2.1'].transcript == r['G2.2'].transcript
                assert r['G3.1'].transcript == r['G3.2'].transcript
                assert unexplained_divergences(ladder) == []
                assert all(verify_flags(result) for result in r.values())


def test_honest_ladder_is_accounted():
    for t in range(5):
        ladder = run_ladder(ConstellationSweep(2), Honest(), params, seeds(t))
        assert triangle_accounted(ladder)
        assert not ladder.flags.fired('subv', 'crossref')
        r = ladder.results
        assert r['G1'].transcript == r['G2.1'].transcript


def test_pred_fires_on_preassigned_h0():
    ds = Datasets(params, 5)
    R = sample_R(params, 6)
    x = 7
    g = honest_g(ds, R, x)
    game = GAMES['G2.2'](params, Honest(), R, ds)
    game.query_h(0, g)
    answer = game.query_F(x)
    assert game.flags['pred'].fired
    assert answer == ds.h(0, g)
    game.finish()
    assert verify_flags(GameResult('G2.2', 0, game.transcript, game.flags, game))

    other = GAMES['G3.1'](params, Honest(), R, ds)
    other.query_h(0, g)
    assert other.query_F(x) == ds.F(x)


def test_colliding_anchors_share_h0(caplog):
    flat = Subverter(program=lambda i, x, h: 0 if i > 0 else h(i, x))
    ds = Datasets(params, 5)
    R = sample_R(params, 6)
    game = GAMES['G2.2'](params, flat, R, ds)
    with caplog.at_level(logging.WARNING, logger='games'):
        first = game.query_F(1)
        second = game.query_F(2)
    assert first == second == ds.F(1)
    assert game.tables.completions[2].preassigned
    assert game.flags['pred'].witness == (2, 0)
    assert any('already assigned' in r.getMessage() for r in caplog.records)


def test_forwardpred_and_backwardpred():
    ds = Datasets(params, 5)
    R = sample_R(params, 6)
    x = 7
    g = honest_g(ds, R, x)
    game = GAMES['G3.2'](params, Honest(), R, ds)
    game.query_h(0, g)
    game.query_F(x)
    assert game.flags['forwardpred'].fired

    game = GAMES['G3.2'](params, Honest(), R, ds)
    game.query_F(x)
    assert game.query_h(0, g) == ds.F(x)
    assert game.flags['backwardpred'].fired
    assert verify_flags(GameResult('G3.2', 0, game.transcript, game.flags, game))

    ideal = GAMES['G4'](params, Honest(), R, ds)
    ideal.query_F(x)
    assert ideal.query_h(0, g) == ds.h(0, g)


def test_subv_fires_on_a_subverted_h0():
    ds = Datasets(params, 5)
    R = sample_R(params, 6)
    x = next(x for x in range(16) if ds.F(x) != 0)
    g = honest_g(ds, R, x)
    sub = PrefixTrigger(g, k=3 * params.n, target=0)
    game = GAMES['G2.2'](params, sub, R, ds)
    game.query_F(x)
    game.finish()
    assert game.flags['subv'].fired
    assert game.flags['subv'].witness == (x, g)
    assert verify_flags(GameResult('G2.2', 0, game.transcript, game.flags, game))


def test_registry():
    D = make_distinguisher('random-probe', q=4)
    assert isinstance(D, RandomProbe) and D.budget(params, Honest()) == 4
    assert ConsistencyCheck().budget(params, Echo()) == 1 + (params.ell + 1) * 2
    for D in [Constant(0), RandomProbe(3), ConstellationSweep(1), PeelSingleAttack(2), TriggerAttack(1, 2, 3)]:
        assert distinguisher_from_config(D.config()).config() == D.config()
    assert distinguisher_from_config({'kind': 'peel_single_attack', 'm': '0x3'}).m == 3
    assert TriggerAttack(z='11').z == 3 and ConsistencyCheck('0x5').x == 5
    with pytest.raises(ValueError):
        make_distinguisher('oracle_whisperer')
    with pytest.raises(ValueError):
        make_distinguisher('constant', colour=1)


def test_peel_single_breaks_the_single_construction():
    sub, D = PeelSingle(m=0), PeelSingleAttack(m=0)
    broken = estimate_advantage(D, sub, params, 200, construction='single', seed=3)
    assert broken.real_rate == 1.0
    assert broken.advantage > 0.8
    assert broken.ci_lo <= broken.advantage <= broken.ci_hi
    full = estimate_advantage(D, sub, params, 400, construction='full', seed=3)
    assert full.advantage < 0.1


def test_trigger_attack_beats_a_dense_trigger():
    sub, D = PrefixTrigger('00', target=0), TriggerAttack(z=0, k=2, tries=4)
    real = sum(run_game('G1', D, sub, params, make_seeds(5, t, 'real')).decision for t in range(40))
    ideal = sum(run_game('G4', D, sub, params, make_seeds(5, t, 'ideal')).decision for t in range(40))
    assert real >= ideal + 10


def test_estimate_advantage_needs_trials():
    with pytest.raises(ValueError):
        estimate_advantage(Constant(), Honest(), params, 50)
    adv = estimate_advantage(Constant(), Honest(), params, 100)
    assert adv.advantage == 0 and adv.real_rate == adv.ideal_rate == 1.0


def test_crisis_tally():
    rows, rates = crisis_tally(RandomProbe(6), Honest(), params, 4, seed=2)
    assert len(rows) == 4
    assert set(rates) == set(CRISES)
    assert all(row['accounted'] == 1 and row['unexplained'] == '' for row in rows)
    assert all(0 <= rate.ci_lo <= rate.rate <= rate.ci_hi <= 1 for rate in rates.values())


def test_exp_many():
    assert run_exp_many(LeakedR(), params, seeds(), leak_R=True) == 1
    with pytest.raises(ValueError):
        run_exp_many(LeakedR(), params, seeds())
    with pytest.raises(ValueError):
        run_exp_many(LeakedR(), params, seeds(), leak_R=True, q_D=2)
    rate = exp_rate(run_exp_many, RandomTerms(10), params, 50, seed=4)
    assert rate.rate <= 0.1


class BadTerm(OneAdversary):
    def publish(self, ds, params, coins):
        return Honest(), (0, 1), 0


def test_exp_one():
    single = derive_params(4, 1, seed=1)
    assert run_exp_one(PeelOff(), single, seeds()) == 1
    rate = exp_rate(run_exp_one, GuessG(0), params, 50, seed=4)
    assert rate.rate <= 0.1
    with pytest.raises(ValueError):
        run_exp_one(BadTerm(), params, seeds())


if __name__ == '__main__':
    pytest.main()
