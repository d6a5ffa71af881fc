"""
Experiment orchestration.

An experiment is an `[experiment]` section of a PasteDeploy-style ini file.
It expands into (agent, seed, lambda) cells; every cell is one training run.
Results land in the output directory as:

  metrics.csv    one row per episode (stage 1) or epoch (stage 2)
  summary.csv    per-cell mean and std across seeds, full run and tail
  summary.txt    the same, laid out as an agent x environment (or agent x
                 lambda) table
  improvement.csv  lambda sweeps only: change relative to lambda = 0
"""

import csv
import io
import logging
import math
import os
from dataclasses import dataclass, field, fields
from multiprocessing import Pool

import numpy as np
import plaster
from paste.deploy.converters import asbool, asint, aslist

from iota_rl import (
    ConfigError, IotaError, atomic_write, mean_std_fmt, reward_fmt,
)
from iota_rl.affordance import load_ruleset
from iota_rl.agents.targets import BOOTSTRAPS, LITERAL
from iota_rl.agents.trainer import (
    AGENTS, DEFAULT_LAMBDA, AgentConfig, Schedule, Trainer, EPISODE, EPOCH,
)
from iota_rl.envs import get_environment, rules_path, environment_names

log = logging.getLogger(__name__)

SECTION = 'experiment'
STAGES = ('1', '2', 'lambda-sweep')
IECR_AGENTS = ('IDQN', 'IDDQN', 'IDuDQN', 'IDDDQN')
SWEEP_LAMBDAS = (0.0, 0.5, 1.0, 5.0, 10.0)

COLUMNS = ('run_id', 'agent', 'env', 'lambda', 'seed', 'unit', 'unit_index',
           'avg_reward', 'epsilon', 'steps_total', 'wall_ms')
SUMMARY_COLUMNS = ('agent', 'env', 'lambda', 'runs', 'full_mean', 'full_std',
                   'tail_mean', 'tail_std')

# ini key -> ExperimentSpec attribute, where they differ
RENAMED = {'lambda': 'lam'}


def _floats(value):
    return tuple(float(v) for v in aslist(value))


def _ints(value):
    return tuple(int(v) for v in aslist(value))


def _path(value):
    return value or None


def _float_fmt(value):
    return repr(float(value))


def _list_fmt(values):
    return ' '.join(_float_fmt(v) if isinstance(v, float) else str(v)
                    for v in values)


@dataclass(frozen=True)
class ExperimentSpec:
    env: str
    stage: str = '2'
    agents: tuple = ('IDQN', 'DQN')
    seeds: tuple = (0, 1, 2)
    episodes: int = 2000
    epochs: int = 200
    steps_per_epoch: int = 400
    lam: float = DEFAULT_LAMBDA
    lambdas: tuple = SWEEP_LAMBDAS
    bootstrap: str = LITERAL
    output_dir: str = 'results'
    rules: str = None
    layout: str = None
    max_steps: int = 3000
    eval_max_steps: int = 3000
    tail_fraction: float = 0.25
    checkpoint_every: int = 50
    checkpoints: bool = False
    record_wall_time: bool = False
    gamma: float = 0.99
    batch_size: int = 64
    target_sync: int = 100
    epsilon_max: float = 0.9
    epsilon_min: float = 0.05
    epsilon_decay_episode: float = 0.001
    epsilon_decay_epoch: float = 0.01
    learning_rate: float = 0.0001
    buffer_size: int = 50000
    hidden: tuple = (128, 128)
    stream_hidden: int = 64

    def __post_init__(self):
        if self.stage not in STAGES:
            raise ConfigError('stage must be one of %s, got %r'
                              % (', '.join(STAGES), self.stage))
        if not self.agents:
            raise ConfigError('no agents listed')
        for agent in self.agents:
            if agent not in AGENTS:
                raise ConfigError('unknown agent %r' % agent)
        if 'RANDOM' in self.agents and self.stage != '1':
            raise ConfigError('RANDOM runs only in stage 1')
        if not self.seeds:
            raise ConfigError('no seeds listed')
        if not 0.0 < self.tail_fraction <= 1.0:
            raise ConfigError('tail_fraction must be in (0, 1]')
        if min((self.lam,) + tuple(self.lambdas)) < 0:
            raise ConfigError('lambda values must be non-negative')
        if self.bootstrap not in BOOTSTRAPS:
            raise ConfigError('bootstrap must be one of %s, got %r'
                              % (', '.join(BOOTSTRAPS), self.bootstrap))
        for name in ('episodes', 'epochs', 'steps_per_epoch', 'max_steps',
                     'eval_max_steps', 'checkpoint_every'):
            if getattr(self, name) < 1:
                raise ConfigError('%s must be positive' % name)

    @property
    def unit(self):
        return EPISODE if self.stage == '1' else EPOCH

    @property
    def schedule(self):
        if self.stage == '1':
            return Schedule(EPISODE, self.episodes)
        return Schedule(EPOCH, self.epochs)

    @property
    def lambda_values(self):
        return tuple(self.lambdas) if self.stage == 'lambda-sweep' \
            else (self.lam,)

    def agent_config(self, lam, checkpoint_dir=None):
        return AgentConfig(
            gamma=self.gamma, batch_size=self.batch_size,
            target_sync=self.target_sync, epsilon_max=self.epsilon_max,
            epsilon_min=self.epsilon_min,
            epsilon_decay_episode=self.epsilon_decay_episode,
            epsilon_decay_epoch=self.epsilon_decay_epoch, lam=lam,
            bootstrap=self.bootstrap,
            learning_rate=self.learning_rate, buffer_size=self.buffer_size,
            hidden=self.hidden, stream_hidden=self.stream_hidden,
            steps_per_epoch=self.steps_per_epoch,
            eval_max_steps=self.eval_max_steps,
            checkpoint_every=self.checkpoint_every,
            checkpoint_dir=checkpoint_dir)

    def cells(self, seed_offset=0):
        """ (agent, seed, lambda) in a fixed order, agents as listed

        Baselines ignore lambda and always run with 0.
        """
        out = []
        for agent in self.agents:
            lambdas = self.lambda_values if AGENTS[agent].iecr else (0.0,)
            for lam in sorted(set(lambdas)):
                for seed in sorted(self.seeds):
                    out.append((agent, seed + seed_offset, lam))
        return out

    def to_ini(self):
        """ Canonical `[experiment]` text; parsing it gives back this spec """
        lines = ['[%s]' % SECTION]
        for f in fields(self):
            value = getattr(self, f.name)
            key = {v: k for k, v in RENAMED.items()}.get(f.name, f.name)
            if value is None:
                text = ''
            elif isinstance(value, bool):
                text = 'true' if value else 'false'
            elif isinstance(value, float):
                text = _float_fmt(value)
            elif isinstance(value, tuple):
                text = _list_fmt(value)
            else:
                text = str(value)
            lines.append(('%s = %s' % (key, text)).rstrip())
        return '\n'.join(lines) + '\n'


CONVERTERS = {
    'env': str,
    'stage': str,
    'agents': lambda v: tuple(aslist(v)),
    'seeds': _ints,
    'episodes': asint,
    'epochs': asint,
    'steps_per_epoch': asint,
    'lam': float,
    'lambdas': _floats,
    'bootstrap': str,
    'output_dir': str,
    'rules': _path,
    'layout': _path,
    'max_steps': asint,
    'eval_max_steps': asint,
    'tail_fraction': float,
    'checkpoint_every': asint,
    'checkpoints': asbool,
    'record_wall_time': asbool,
    'gamma': float,
    'batch_size': asint,
    'target_sync': asint,
    'epsilon_max': float,
    'epsilon_min': float,
    'epsilon_decay_episode': float,
    'epsilon_decay_epoch': float,
    'learning_rate': float,
    'buffer_size': asint,
    'hidden': _ints,
    'stream_hidden': asint,
}


def spec_from_settings(settings):
    """ Build an ExperimentSpec from a settings mapping (strings) """
    kwargs = {}
    for key, value in settings.items():
        if key in ('here', '__file__'):
            continue
        name = RENAMED.get(key, key)
        if name not in CONVERTERS:
            raise ConfigError('unknown experiment key %r' % key)
        try:
            kwargs[name] = CONVERTERS[name](value.strip())
        except (ValueError, TypeError) as e:
            raise ConfigError('bad value for %s: %r (%s)' % (key, value, e))
    if 'env' not in kwargs:
        raise ConfigError('experiment needs an env')
    return ExperimentSpec(**kwargs)


def load_experiment(config_uri, overrides=None):
    """ Read the [experiment] section of an ini file """
    path = config_uri.split('#', 1)[0]
    if not os.path.isfile(path):
        raise ConfigError('config file not found: %s' % path)
    try:
        settings = dict(plaster.get_settings(config_uri, SECTION))
    except (plaster.PlasterError, ValueError, LookupError) as e:
        raise ConfigError('cannot read %s: %s' % (config_uri, e))
    if not settings:
        raise ConfigError('%s has no [%s] section' % (config_uri, SECTION))
    settings.update(overrides or {})
    log.debug('loaded experiment from %s', config_uri)
    return spec_from_settings(settings)


def validate_assets(spec):
    """ Fail before any training when the game, layout or rules are broken """
    if spec.env not in environment_names():
        raise ConfigError('unknown environment %r' % spec.env)
    try:
        env = get_environment(spec.env, layout=spec.layout,
                              max_steps=spec.max_steps)
    except (IotaError, OSError) as e:
        raise ConfigError('layout for %s: %s' % (spec.env, e))
    if any(AGENTS[a].iecr for a in spec.agents):
        path = spec.rules or rules_path(spec.env)
        try:
            rules = load_ruleset(path, env.registry, env.actions)
        except (IotaError, OSError) as e:
            raise ConfigError('rules %s: %s' % (path, e))
        log.debug('%s: %d rules from %s', spec.env, len(rules), path)
    return env


def run_id(env, agent, lam, seed):
    return '%s-%s-lam%g-seed%d' % (env, agent, lam, seed)


def run_cell(job):
    """ Train one cell, returns its metric rows (importable for Pool) """
    spec, agent, seed, lam = job
    env = get_environment(spec.env, layout=spec.layout,
                          max_steps=spec.max_steps)
    rules = None
    if AGENTS[agent].iecr:
        rules = load_ruleset(spec.rules or rules_path(spec.env),
                             env.registry, env.actions)
    checkpoint_dir = None
    if spec.checkpoints:
        checkpoint_dir = os.path.join(spec.output_dir, 'checkpoints')
    trainer = Trainer(env, agent, spec.agent_config(lam, checkpoint_dir),
                      seed=seed, rules=rules)
    rid = run_id(spec.env, agent, lam, seed)
    log.info('starting %s', rid)
    rows = []
    for result in trainer.run(spec.schedule):
        rows.append({
            'run_id': rid,
            'agent': agent,
            'env': spec.env,
            'lambda': '%g' % lam,
            'seed': str(seed),
            'unit': result.unit,
            'unit_index': str(result.unit_index),
            'avg_reward': '%.6f' % result.avg_reward,
            'epsilon': '%.4f' % result.epsilon,
            'steps_total': str(result.steps_total),
            'wall_ms': str(result.wall_ms if spec.record_wall_time else 0),
        })
    log.info('finished %s: %d steps, %d fallback steps', rid,
             trainer.counters.steps, trainer.counters.fallback_steps)
    return rows


def rows_to_csv(rows, columns=COLUMNS):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator='\n')
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


@dataclass(frozen=True)
class RunStats:
    run_id: str
    agent: str
    env: str
    lam: float
    seed: int
    units: int
    full_mean: float
    tail_mean: float


@dataclass(frozen=True)
class CellStats:
    agent: str
    env: str
    lam: float
    runs: int
    full_mean: float
    full_std: float
    tail_mean: float
    tail_std: float


@dataclass
class RunSummary:
    tail_fraction: float
    runs: list = field(default_factory=list)
    cells: list = field(default_factory=list)

    def cell(self, agent, lam=None):
        for c in self.cells:
            if c.agent == agent and (lam is None or c.lam == lam):
                return c
        raise KeyError((agent, lam))

    def to_csv(self):
        return rows_to_csv(({
            'agent': c.agent,
            'env': c.env,
            'lambda': '%g' % c.lam,
            'runs': str(c.runs),
            'full_mean': '%.6f' % c.full_mean,
            'full_std': '%.6f' % c.full_std,
            'tail_mean': '%.6f' % c.tail_mean,
            'tail_std': '%.6f' % c.tail_std,
        } for c in self.cells), SUMMARY_COLUMNS)


def tail_length(n, tail_fraction):
    return max(1, int(math.ceil(n * tail_fraction)))


def summarize(rows, tail_fraction=0.25):
    """ Per-run means and per-cell mean/std across seeds

    rows may come straight from metrics.csv (string values).
    """
    series = {}
    meta = {}
    for row in rows:
        rid = row['run_id']
        series.setdefault(rid, []).append(
            (int(row['unit_index']), float(row['avg_reward'])))
        meta[rid] = (row['agent'], row['env'], float(row['lambda']),
                     int(row['seed']))

    summary = RunSummary(tail_fraction)
    for rid, points in series.items():
        values = np.array([v for _, v in sorted(points)])
        tail = values[-tail_length(len(values), tail_fraction):]
        agent, env, lam, seed = meta[rid]
        summary.runs.append(RunStats(rid, agent, env, lam, seed, len(values),
                                     float(values.mean()),
                                     float(tail.mean())))

    groups = {}
    for r in summary.runs:
        groups.setdefault((r.agent, r.env, r.lam), []).append(r)
    for (agent, env, lam), runs in groups.items():
        full = np.array([r.full_mean for r in runs])
        tail = np.array([r.tail_mean for r in runs])
        summary.cells.append(CellStats(agent, env, lam, len(runs),
                                       float(full.mean()), float(full.std()),
                                       float(tail.mean()), float(tail.std())))
    return summary


def improvement_table(summary):
    """ {(agent, lambda): percent change of the tail mean vs lambda = 0}

    None where the lambda = 0 cell is missing or zero.
    """
    base = {c.agent: c.tail_mean for c in summary.cells if c.lam == 0}
    out = {}
    for c in summary.cells:
        ref = base.get(c.agent)
        if ref is None or ref == 0:
            out[(c.agent, c.lam)] = None
        else:
            out[(c.agent, c.lam)] = 100.0 * (c.tail_mean - ref) / abs(ref)
    return out


def _table(header, body):
    widths = [max(len(row[i]) for row in [header] + body)
              for i in range(len(header))]
    fmt = '  '.join('%%-%ds' % w for w in widths)
    return '\n'.join((fmt % tuple(row)).rstrip() for row in [header] + body)


def format_summary(spec, summary):
    agents = list(spec.agents)
    lines = ['stage %s, %s, tail = final %d%% of units, %d seed(s)' % (
        spec.stage, spec.env, round(100 * summary.tail_fraction),
        len(spec.seeds))]
    if spec.stage == 'lambda-sweep':
        lambdas = sorted(set(c.lam for c in summary.cells))
        header = ['agent'] + ['lambda=%g' % lam for lam in lambdas]
        body = []
        for agent in agents:
            row = [agent]
            for lam in lambdas:
                try:
                    c = summary.cell(agent, lam)
                    row.append(mean_std_fmt(c.tail_mean, c.tail_std))
                except KeyError:
                    row.append('-')
            body.append(row)
    else:
        header = ['agent', spec.env + ' (tail)', spec.env + ' (full)']
        body = []
        for agent in agents:
            c = summary.cell(agent)
            body.append([agent, mean_std_fmt(c.tail_mean, c.tail_std),
                         mean_std_fmt(c.full_mean, c.full_std)])
    lines.append(_table(header, body))
    return '\n'.join(lines) + '\n'


def improvement_csv(table):
    rows = [{'agent': agent, 'lambda': '%g' % lam,
             'improvement_pct': '' if pct is None else reward_fmt(pct)}
            for (agent, lam), pct in sorted(table.items())]
    return rows_to_csv(rows, ('agent', 'lambda', 'improvement_pct'))


def run_experiment(spec, jobs=1, seed_offset=0):
    """ Run every cell, write the result files, return the RunSummary """
    validate_assets(spec)
    cells = spec.cells(seed_offset)
    log.info('%s stage %s: %d cells, %d job(s)', spec.env, spec.stage,
             len(cells), jobs)
    work = [(spec, agent, seed, lam) for agent, seed, lam in cells]
    if jobs > 1:
        with Pool(jobs) as pool:
            results = pool.map(run_cell, work)
    else:
        results = [run_cell(job) for job in work]
    rows = [row for cell_rows in results for row in cell_rows]

    summary = summarize(rows, spec.tail_fraction)
    out = spec.output_dir
    atomic_write(os.path.join(out, 'metrics.csv'), rows_to_csv(rows))
    atomic_write(os.path.join(out, 'summary.csv'), summary.to_csv())
    atomic_write(os.path.join(out, 'summary.txt'),
                 format_summary(spec, summary))
    if spec.stage == 'lambda-sweep':
        atomic_write(os.path.join(out, 'improvement.csv'),
                     improvement_csv(improvement_table(summary)))
    log.info('results written to %s', out)
    return summary


def sweep(spec, jobs=1, seed_offset=0):
    """ Lambda sweep over the IECR agents of spec (all four by default) """
    agents = tuple(a for a in spec.agents if AGENTS[a].iecr) or IECR_AGENTS
    params = {f.name: getattr(spec, f.name) for f in fields(spec)}
    params.update(stage='lambda-sweep', agents=agents)
    return run_experiment(ExperimentSpec(**params), jobs, seed_offset)
