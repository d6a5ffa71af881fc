import logging

import numpy as np

from iota_rl.affordance import iota, load_ruleset
from iota_rl.envs.base import (  # noqa
    Environment, EnvFrame, StepResult, Layout, EnvError, EnvStateError,
    LayoutError, parse_layout, load_layout, layout_path, rules_path,
    MAX_STEPS, WIN, LOSE, TIMEOUT, NONE,
)
from iota_rl.envs.mario import Mario  # noqa
from iota_rl.envs.pacman import Pacman  # noqa
from iota_rl.envs.flappybirds import FlappyBirds  # noqa
from iota_rl.envs.taxidriver import TaxiDriver  # noqa
from iota_rl.envs.scararobot import ScaraRobot  # noqa

log = logging.getLogger(__name__)

POLICIES = ('random', 'scripted')


def environment_names():
    return sorted(cls.name for cls in Environment.__subclasses__())


def get_environment(name, layout=None, max_steps=None):
    for cls in Environment.__subclasses__():
        if cls.name == name:
            return cls(layout=layout, max_steps=max_steps)
    raise EnvError('unknown environment %r (known: %s)'
                   % (name, ', '.join(environment_names())))


def default_rules(env, path=None):
    return load_ruleset(path or rules_path(env.name), env.registry,
                        env.actions)


def scripted_action(env, rules):
    """ Lowest-index action the rules permit in the current state """
    ckf, underlay = env.observe()
    mask = iota(ckf, underlay, rules, env.params)
    allowed = np.flatnonzero(mask)
    return int(allowed[0]) if len(allowed) else 0


def play(env, seed, policy='random', rules=None, max_steps=None):
    """ Run one episode with a fixed policy

    Returns (total reward, steps, terminal kind).
    """
    if policy not in POLICIES:
        raise EnvError('unknown policy %r' % policy)
    if policy == 'scripted' and rules is None:
        rules = default_rules(env)
    rng = np.random.default_rng(seed)
    env.reset(seed)
    total, steps, kind = 0.0, 0, NONE
    limit = max_steps or env.max_steps
    while steps < limit:
        if policy == 'random':
            action = int(rng.integers(env.n_actions))
        else:
            action = scripted_action(env, rules)
        result = env.step(action)
        total += result.reward
        steps += 1
        kind = result.terminal_kind
        if result.terminal:
            break
    log.info('%s seed=%d policy=%s: reward %.2f in %d steps (%s)',
             env.name, seed, policy, total, steps, kind)
    return total, steps, kind
