"""
iota-rl: train and compare Q-learning agents with negative affordances.

  iota-rl train --config experiments/stage2-taxidriver.ini --jobs 3
  iota-rl sweep-lambda --config experiments/lambda-sweep.ini
  iota-rl export-curves --in results/metrics.csv --window 10 --out curves/
  iota-rl envs play pacman --seed 1 --policy scripted
  iota-rl ckf dump mario --seed 0 --steps 5

Exit status: 0 on success, 1 on usage or configuration errors, 2 on other
failures.
IOTA_RL_LOG=DEBUG (or INFO, ...) overrides the package log level.
"""

import logging
import os
import sys
from argparse import ArgumentParser, RawTextHelpFormatter

import numpy as np
import plaster

from iota_rl import ConfigError, IotaError, reward_fmt
from iota_rl.ckf import format_ckf
from iota_rl.curves import export_curves
from iota_rl.envs import environment_names, get_environment, play, POLICIES
from iota_rl.harness import load_experiment, run_experiment, sweep

log = logging.getLogger(__name__)


def setup_logging(verbose, config_uri=None):
    log_level = logging.WARNING
    if verbose is not None:
        verbose = int(verbose)
        if verbose == 1:
            log_level = logging.INFO
        elif verbose >= 2:
            log_level = logging.DEBUG
    logging.basicConfig(level=log_level)

    if config_uri and os.path.isfile(config_uri):
        try:
            plaster.setup_logging(config_uri)
        except plaster.PlasterError as e:
            log.warning('no logging setup from %s: %s', config_uri, e)
    override = os.environ.get('IOTA_RL_LOG')
    if override:
        try:
            logging.getLogger('iota_rl').setLevel(override.upper())
        except ValueError:
            log.warning('ignoring IOTA_RL_LOG=%s', override)


def cmd_train(args):
    spec = load_experiment(args.config)
    summary = run_experiment(spec, jobs=args.jobs,
                             seed_offset=args.seed_offset)
    for cell in summary.cells:
        print('%-8s lambda=%-4g tail %s' % (cell.agent, cell.lam,
                                           reward_fmt(cell.tail_mean)))


def cmd_sweep(args):
    spec = load_experiment(args.config)
    summary = sweep(spec, jobs=args.jobs, seed_offset=args.seed_offset)
    print('%d cells written to %s' % (len(summary.cells), spec.output_dir))


def cmd_export(args):
    if args.window < 1:
        raise ConfigError('--window must be at least 1')
    for path in export_curves(args.input, args.window, args.out):
        print(path)


def cmd_play(args):
    env = get_environment(args.name, max_steps=args.max_steps)
    total, steps, kind = play(env, args.seed, args.policy)
    print('%s: reward %s in %d steps (%s)' % (env.name, reward_fmt(total),
                                              steps, kind))


def cmd_dump(args):
    env = get_environment(args.name)
    env.reset(args.seed)
    rng = np.random.default_rng(args.seed)
    for _ in range(args.steps):
        if env.done:
            break
        env.step(int(rng.integers(env.n_actions)))
    ckf, _ = env.observe()
    print(format_ckf(ckf, top_down=args.top_down))


def build_parser():
    parser = ArgumentParser(description=__doc__,
                            formatter_class=RawTextHelpFormatter)
    parser.add_argument('-v', '--verbose', action='count')
    sub = parser.add_subparsers(dest='command')
    sub.required = True

    for name, func, help_text in (
            ('train', cmd_train, 'run a stage 1 or stage 2 experiment'),
            ('sweep-lambda', cmd_sweep, 'run a lambda sweep')):
        p = sub.add_parser(name, help=help_text)
        p.add_argument('--config', required=True)
        p.add_argument('--jobs', type=int, default=1)
        p.add_argument('--seed-offset', type=int, default=0)
        p.set_defaults(func=func)

    p = sub.add_parser('export-curves', help='smooth metrics into curves')
    p.add_argument('--in', dest='input', required=True)
    p.add_argument('--window', type=int, default=10)
    p.add_argument('--out', required=True)
    p.set_defaults(func=cmd_export)

    envs = sub.add_parser('envs', help='environment tools')
    envs_sub = envs.add_subparsers(dest='envs_command')
    envs_sub.required = True
    p = envs_sub.add_parser('play', help='play one episode')
    p.add_argument('name', choices=environment_names())
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--policy', choices=POLICIES, default='random')
    p.add_argument('--max-steps', type=int, default=None)
    p.set_defaults(func=cmd_play)

    ckf = sub.add_parser('ckf', help='CKF tools')
    ckf_sub = ckf.add_subparsers(dest='ckf_command')
    ckf_sub.required = True
    p = ckf_sub.add_parser('dump', help='print the CKF of a game state')
    p.add_argument('name', choices=environment_names())
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--steps', type=int, default=0)
    p.add_argument('--top-down', action='store_true', default=False)
    p.set_defaults(func=cmd_dump)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(sys.argv[1:] if argv is None else argv)
    except SystemExit as e:
        # argparse has already printed usage or help
        return 1 if e.code else 0
    setup_logging(args.verbose, getattr(args, 'config', None))

    try:
        args.func(args)
    except ConfigError as e:
        log.error('configuration error: %s', e)
        return 1
    except (IotaError, OSError) as e:
        log.error('%s', e)
        return 2
    return 0


if __name__ == '__main__':
    sys.exit(main())
