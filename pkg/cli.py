"""Batch front door: python cli.py <command> [--config file.json] [flags].

Every command writes <out>/<command>.csv (one row per trial or sample) and
<out>/<command>.json (the summary). Both carry the config hash and the
unsafe-params flag. Exit codes: 0 success, 2 configuration error, 3 invariant breach."""

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from functools import partial

from analysis import caller_index, classify_term, measured_epsilon, sample_spectra, selfref_rate, sweep
from games import (GAMES, GuessG, PeelSingleAttack, PeelSplitAttack, RandomTerms, crisis_tally,
                   distinguisher_from_config, estimate_advantage, exp_rate, ladder_trial, make_seeds,
                   run_exp_many, run_exp_one, run_game, verify_flags)
from oracles import OracleTable, check_params, derive_params, export_table, width_in
from subversion import PeelSingle, PeelSplit, subverter_from_config
from utils import BudgetExceeded, ConfigError, InvariantError, check_cap, run_trials

logger = logging.getLogger(__name__)

COMMANDS = ('demo', 'game', 'advantage', 'crises', 'spectrum', 'classify', 'selfref', 'expgames',
            'sweep', 'export-table')


@dataclass
class ExperimentConfig:
    """Everything a run depends on; identical configs reproduce identical files."""
    command: str = 'demo'
    n: int = 4
    ell: int = None
    seed: int = 0
    trials: int = 1000
    cap: int = None
    unsafe_params: bool = False
    workers: int = 1
    out: str = 'results'
    subverter: dict = field(default_factory=lambda: {'kind': 'honest'})
    distinguisher: dict = field(default_factory=lambda: {'kind': 'random_probe', 'q': 16})
    variant: str = 'ladder'
    construction: str = 'full'
    attack: str = 'peel-single'
    samples: int = 100
    seeds: int = None
    mode: str = 'good'
    index: int = 1
    terms: int = 10
    ns: list = field(default_factory=lambda: [3, 4, 5])

    def resolved_ell(self):
        return self.ell if self.ell is not None else self.n + 5

    def hash(self):
        """SHA-256 of the canonical JSON of every field that affects results."""
        data = {k: v for k, v in dataclasses.asdict(self).items() if k not in ('out', 'workers')}
        data['ell'] = self.resolved_ell()
        return hashlib.sha256(json.dumps(data, sort_keys=True, separators=(',', ':')).encode()).hexdigest()


def load_config(path):
    try:
        with open(path) as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError('cannot read config {}: {}'.format(path, e))
    if 'params' in data:
        data.update(data.pop('params'))
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError('unknown config fields: {}'.format(sorted(unknown)))
    return data


def build_config(args):
    data = load_config(args.config) if args.config else {}
    for name in ('n', 'ell', 'seed', 'trials', 'cap', 'workers', 'out', 'variant', 'construction',
                 'attack', 'samples', 'seeds', 'mode', 'index', 'terms'):
        value = getattr(args, name, None)
        if value is not None:
            data[name] = value
    if args.unsafe_params:
        data['unsafe_params'] = True
    data['command'] = args.command
    return ExperimentConfig(**data)


# ______________________________________________________________________________
# Commands


def cmd_demo(config, params):
    """Peel attacks against the broken constructions and the full one."""
    n = params.n
    if config.attack == 'peel-single':
        sub, D, broken = PeelSingle(m=0), PeelSingleAttack(m=0), 'single'
    elif config.attack == 'peel-split':
        sub, D, broken = PeelSplit(m=0, k=n // 2), PeelSplitAttack(m=0, k=n // 2), 'pair'
    else:
        raise ConfigError('unknown attack {!r}; use peel-single or peel-split'.format(config.attack))
    rows = []
    for construction in (broken, 'full'):
        adv = estimate_advantage(D, sub, params, config.trials, construction, config.seed, config.workers)
        rows.append({'construction': construction, **adv._asdict()})
        print('{:>6}: advantage {:.4f} [{:.4f}, {:.4f}]'.format(construction, adv.advantage, adv.ci_lo, adv.ci_hi))
    return rows, {'attack': config.attack, 'rows': rows}


def game_trial(variant, D, sub, params, master, t):
    result = run_game(variant, D, sub, params, make_seeds(master, t))
    verify_flags(result)
    row = {'trial': t, 'variant': variant, 'decision': result.decision, 'queries': len(result.transcript)}
    for name in result.flags.flags:
        row[name] = int(result.flags[name].fired)
    return row


def cmd_game(config, params):
    sub, D = subverter_from_config(config.subverter), distinguisher_from_config(config.distinguisher)
    runs = config.seeds or config.trials
    variant = config.variant
    if variant in ('ladder', 'pairwise-equality'):
        rows = run_trials(partial(ladder_trial, D, sub, params, config.seed), range(runs), config.workers)
        divergent = [row['divergent'].split(';') for row in rows]
        summary = {'runs': runs,
                   'G2.1==G2.2': sum('G2.1~G2.2' not in d for d in divergent),
                   'G3.1==G3.2': sum('G3.1~G3.2' not in d for d in divergent),
                   'unexplained': sum(bool(row['unexplained']) for row in rows)}
        print('G2.1==G2.2 {}/{}; G3.1==G3.2 {}/{}; unexplained divergences {}'.format(
            summary['G2.1==G2.2'], runs, summary['G3.1==G3.2'], runs, summary['unexplained']))
        return rows, summary
    if variant not in GAMES:
        raise ConfigError('unknown variant {!r}'.format(variant))
    rows = run_trials(partial(game_trial, variant, D, sub, params, config.seed), range(runs), config.workers)
    ones = sum(row['decision'] for row in rows)
    print('{}: {} of {} runs decided 1'.format(variant, ones, runs))
    return rows, {'variant': variant, 'runs': runs, 'ones': ones}


def cmd_advantage(config, params):
    sub, D = subverter_from_config(config.subverter), distinguisher_from_config(config.distinguisher)
    adv = estimate_advantage(D, sub, params, config.trials, config.construction, config.seed, config.workers)
    print('advantage {:.4f} [{:.4f}, {:.4f}] over {} trials'.format(adv.advantage, adv.ci_lo, adv.ci_hi, adv.trials))
    return [adv._asdict()], adv._asdict()


def cmd_crises(config, params):
    sub, D = subverter_from_config(config.subverter), distinguisher_from_config(config.distinguisher)
    rows, rates = crisis_tally(D, sub, params, config.trials, config.seed, config.workers)
    summary = {name: rate._asdict() for name, rate in rates.items()}
    summary['unaccounted'] = sum(1 - row['accounted'] for row in rows)
    summary['unexplained'] = sum(bool(row['unexplained']) for row in rows)
    print('crises: ' + ', '.join('{} {:.4f}'.format(k, r.rate) for k, r in rates.items()) +
          '; unaccounted {}'.format(summary['unaccounted']))
    return rows, summary


def cmd_spectrum(config, params):
    sub = subverter_from_config(config.subverter)
    reports = sample_spectra(sub, params, config.samples, config.seed)
    rows = [r._asdict() for r in reports]
    violations = sum(r.violates for r in reports)
    print('spectrum: {} samples, {} above the threshold'.format(len(rows), violations))
    return rows, {'samples': len(rows), 'violations': violations,
                  'bound_holds': all(r.tv_bound >= r.tv_exact - 1e-10 for r in reports)}


def cmd_classify(config, params):
    sub = subverter_from_config(config.subverter)
    i = config.index
    check_cap(width_in(params, i), params.cap, 'h{} domain'.format(i))
    table = OracleTable(params)
    epsilon = measured_epsilon(sub, params, None, config.seed)
    callers = caller_index(sub, table) if config.mode in ('invisible', 'silent') else None
    rows = [classify_term(sub, params, i, x, config.mode, config.samples, table, epsilon, config.seed,
                          callers)._asdict()
            for x in range(1 << width_in(params, i))]
    passing = sum(row['verdict'] for row in rows)
    print('{} terms of h{}: {} of {} pass'.format(config.mode, i, passing, len(rows)))
    return rows, {'mode': config.mode, 'index': i, 'passing': passing, 'terms': len(rows)}


def cmd_selfref(config, params):
    sub = subverter_from_config(config.subverter)
    rate, lo, hi = selfref_rate(sub, params, config.trials, config.seed)
    print('self-reference rate {:.5f} [{:.5f}, {:.5f}]'.format(rate, lo, hi))
    row = {'rate': rate, 'ci_lo': lo, 'ci_hi': hi, 'trials': config.trials}
    return [row], row


def cmd_expgames(config, params):
    many = exp_rate(run_exp_many, RandomTerms(config.terms), params, config.trials, config.seed, config.workers)
    one = exp_rate(run_exp_one, GuessG(0), params, config.trials, config.seed, config.workers)
    rows = [{'experiment': 'exp-many', **many._asdict()}, {'experiment': 'exp-one', **one._asdict()}]
    print('exp-many {:.5f}, exp-one {:.5f}'.format(many.rate, one.rate))
    return rows, {'rows': rows}


def cmd_sweep(config, params):
    described = dict(config.subverter)
    rows = [row._asdict() for row in sweep(lambda p: subverter_from_config(described), config.ns,
                                           config.trials, config.seed, params.cap)]
    print('sweep over n = {}: {} rows'.format(config.ns, len(rows)))
    return rows, {'rows': rows}


def cmd_export_table(config, params):
    os.makedirs(config.out, exist_ok=True)
    path = os.path.join(config.out, 'table.crko')
    meta = export_table(OracleTable(params), path, config.hash())
    print('wrote {} records to {}'.format(meta['records'], path))
    return [], meta


HANDLERS = {'demo': cmd_demo, 'game': cmd_game, 'advantage': cmd_advantage, 'crises': cmd_crises,
            'spectrum': cmd_spectrum, 'classify': cmd_classify, 'selfref': cmd_selfref,
            'expgames': cmd_expgames, 'sweep': cmd_sweep, 'export-table': cmd_export_table}


# ______________________________________________________________________________
# Output


def write_outputs(config, params, rows, summary):
    os.makedirs(config.out, exist_ok=True)
    digest = config.hash()
    name = config.command
    if rows:
        header = list(rows[0]) + ['config_hash', 'unsafe_params']
        with open(os.path.join(config.out, name + '.csv'), 'w', newline='') as f:
            writer = csv.DictWriter(f, fieldnames=header)
            writer.writeheader()
            for row in rows:
                writer.writerow({**row, 'config_hash': digest, 'unsafe_params': int(params.unsafe)})
    with open(os.path.join(config.out, name + '.json'), 'w') as f:
        json.dump({'config_hash': digest, 'unsafe_params': params.unsafe,
                   'config': dataclasses.asdict(config), 'summary': summary},
                  f, indent=2, sort_keys=True, default=str)


def parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='JSON experiment config; flags override it')
    common.add_argument('--n', type=int)
    common.add_argument('--ell', type=int)
    common.add_argument('--trials', type=int)
    common.add_argument('--seed', type=int)
    common.add_argument('--out', help='output directory')
    common.add_argument('--cap', type=int, help='enumeration cap in bits (default $CRKO_CAP or 24)')
    common.add_argument('--unsafe-params', action='store_true', help='allow ell <= n + 4')
    common.add_argument('--workers', type=int, help='size of the trial worker pool')
    common.add_argument('--samples', type=int)
    common.add_argument('--verbose', action='store_true')
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest='command', required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == 'demo':
            sp.add_argument('--attack', choices=['peel-single', 'peel-split'])
        if name == 'game':
            sp.add_argument('--variant', help='G1, G2.1, G2.2, G3.1, G3.2, G4, ladder or pairwise-equality')
            sp.add_argument('--seeds', type=int, help='number of seeded runs')
        if name == 'advantage':
            sp.add_argument('--construction', choices=['full', 'single', 'pair'])
        if name == 'classify':
            sp.add_argument('--mode', choices=['good', 'honest', 'invisible', 'silent'])
            sp.add_argument('--index', type=int)
        if name == 'expgames':
            sp.add_argument('--terms', type=int, help='Exp-Many terms per run')
    return p


def main(argv=None):
    args = parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format='%(asctime)s - %(levelname)s - %(message)s')
    try:
        config = build_config(args)
        params = check_params(derive_params(config.n, config.resolved_ell(), config.seed, config.cap),
                              allow_unsafe=config.unsafe_params)
        rows, summary = HANDLERS[config.command](config, params)
        write_outputs(config, params, rows, summary)
    except InvariantError as e:
        logger.error('invariant breach: %s', e)
        return 3
    except (ValueError, BudgetExceeded, TypeError) as e:
        logger.error('%s', e)
        return 2
    return 0


if __name__ == '__main__':
    sys.exit(main())
