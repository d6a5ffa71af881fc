import logging
import os
import time
from dataclasses import dataclass, field

import numpy as np

from iota_rl import ConfigError, reward_fmt
from iota_rl.affordance import RuleSet, all_forbidden, iota
from iota_rl.agents.policy import EpsilonSchedule, select_action
from iota_rl.agents.replay import ReplayBuffer, Transition
from iota_rl.agents.targets import (
    BOOTSTRAPS, LITERAL, batch_target_simple, batch_target_double,
    batch_goal_value, batch_baseline_target, batch_baseline_double_target,
)
from iota_rl.envs import get_environment, default_rules, NONE, WIN
from iota_rl.network import (
    Network, AdamState, LossSpec, backward_and_step, save_checkpoint,
)

log = logging.getLogger(__name__)

EPISODE = 'episode'
EPOCH = 'epoch'

DEFAULT_LAMBDA = 1.0


@dataclass(frozen=True)
class AgentKind:
    name: str
    dueling: bool
    double: bool
    iecr: bool
    learns: bool = True

    @property
    def architecture(self):
        return 'dueling' if self.dueling else 'single'


AGENTS = {a.name: a for a in (
    AgentKind('DQN', False, False, False),
    AgentKind('DDQN', False, True, False),
    AgentKind('DuDQN', True, False, False),
    AgentKind('DDDQN', True, True, False),
    AgentKind('IDQN', False, False, True),
    AgentKind('IDDQN', False, True, True),
    AgentKind('IDuDQN', True, False, True),
    AgentKind('IDDDQN', True, True, True),
    AgentKind('RANDOM', False, False, False, learns=False),
)}


def agent_kind(name):
    if isinstance(name, AgentKind):
        return name
    try:
        return AGENTS[name]
    except KeyError:
        raise ConfigError('unknown agent %r (known: %s)'
                          % (name, ', '.join(sorted(AGENTS))))


@dataclass
class AgentConfig:
    gamma: float = 0.99
    batch_size: int = 64
    target_sync: int = 100
    epsilon_max: float = 0.9
    epsilon_min: float = 0.05
    epsilon_decay_episode: float = 0.001
    epsilon_decay_epoch: float = 0.01
    lam: float = DEFAULT_LAMBDA
    bootstrap: str = LITERAL
    learning_rate: float = 1e-4
    buffer_size: int = 50000
    hidden: tuple = (128, 128)
    stream_hidden: int = 64
    steps_per_epoch: int = 400
    eval_max_steps: int = 3000
    checkpoint_every: int = 50
    checkpoint_dir: str = None
    dueling: bool = None

    def __post_init__(self):
        if not 0.0 <= self.epsilon_min <= self.epsilon_max <= 1.0:
            raise ConfigError('need 0 <= epsilon_min <= epsilon_max <= 1')
        if self.lam < 0:
            raise ConfigError('lambda must be non-negative')
        if self.bootstrap not in BOOTSTRAPS:
            raise ConfigError('bootstrap must be one of %s, got %r'
                              % (', '.join(BOOTSTRAPS), self.bootstrap))
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError('gamma must be in [0, 1]')
        for name in ('batch_size', 'target_sync', 'buffer_size',
                     'steps_per_epoch', 'eval_max_steps'):
            if getattr(self, name) < 1:
                raise ConfigError('%s must be positive' % name)


@dataclass(frozen=True)
class Schedule:
    unit: str
    count: int

    def __post_init__(self):
        if self.unit not in (EPISODE, EPOCH):
            raise ConfigError('schedule unit must be episode or epoch')
        if self.count < 1:
            raise ConfigError('schedule needs at least one %s' % self.unit)


@dataclass(frozen=True)
class UnitResult:
    unit: str
    unit_index: int
    avg_reward: float
    epsilon: float
    steps_total: int
    wall_ms: int = 0
    outcome: str = None


@dataclass(frozen=True)
class Evaluation:
    total: float
    steps: int
    kind: str

    @property
    def won(self):
        return self.kind == WIN


@dataclass
class Counters:
    steps: int = 0
    updates: int = 0
    syncs: int = 0
    fallback_steps: int = 0
    forbidden_steps: int = 0
    episodes: int = 0
    returns: list = field(default_factory=list)


class Trainer(object):
    """ One training run of one agent on one environment

    Every executed step: observe the CKF, compute the mask, choose a masked
    epsilon-greedy action, store the transition and, once the buffer holds a
    batch, take one optimizer step. The target network is synced every
    `target_sync` steps.
    """

    def __init__(self, env, kind, config=None, seed=0, rules=None,
                 audit=None):
        self.env = env
        self.kind = agent_kind(kind)
        self.config = config or AgentConfig()
        self.seed = seed
        self.audit = audit
        if self.config.dueling is not None and \
                self.config.dueling != self.kind.dueling:
            raise ConfigError('%s needs a %s network' % (
                self.kind.name, self.kind.architecture))

        n_actions = env.n_actions
        if self.kind.iecr:
            self.rules = rules if rules is not None else default_rules(env)
        else:
            self.rules = RuleSet.empty(n_actions)
        if self.rules.n_actions != n_actions:
            raise ConfigError('rule set has %d actions, %s has %d'
                              % (self.rules.n_actions, env.name, n_actions))

        seeds = np.random.SeedSequence(seed).spawn(4)
        self.rng = np.random.default_rng(seeds[0])
        self.env_rng = np.random.default_rng(seeds[1])
        self.eval_rng = np.random.default_rng(seeds[3])
        self.buffer = ReplayBuffer(self.config.buffer_size,
                                   seed=seeds[2].generate_state(1)[0])
        n_in = env.params.rows * env.params.cols
        if self.kind.learns:
            net_seed = int(np.random.default_rng(seed).integers(2 ** 31))
            self.net = Network(n_in, n_actions, self.kind.dueling,
                               self.config.hidden, self.config.stream_hidden,
                               seed=net_seed)
            self.target = self.net.copy()
            self.adam = AdamState(self.net.params,
                                  lr=self.config.learning_rate)
        else:
            self.net = self.target = self.adam = None
        self.counters = Counters()
        self.epsilon = EpsilonSchedule(self.config.epsilon_max,
                                       self.config.epsilon_min)
        self.losses = []
        self._obs = None

    def mask(self, ckf, underlay):
        if not self.kind.iecr:
            return np.ones(self.env.n_actions, dtype=np.int8)
        return iota(ckf, underlay, self.rules, self.env.params)

    def selection_values(self, ckf, net=None):
        """ Q stream, or the advantage stream for IECR dueling agents """
        fwd = (net or self.net).forward(ckf.flatten())
        if self.kind.dueling and self.kind.iecr:
            return fwd.adv[0]
        return fwd.q[0]

    def choose(self, ckf, mask, epsilon, rng):
        if not self.kind.learns:
            return int(rng.integers(self.env.n_actions))
        return select_action(self.selection_values(ckf), mask, epsilon, rng)

    def _new_episode(self):
        self.env.reset(int(self.env_rng.integers(2 ** 31)))
        ckf, underlay = self.env.observe()
        self._obs = (ckf, underlay, self.mask(ckf, underlay))
        self._episode_return = 0.0

    def step(self, epsilon):
        """ One environment step plus one learning update.

        Returns (reward, terminal).
        """
        if self._obs is None:
            self._new_episode()
        ckf, underlay, mask = self._obs
        action = self.choose(ckf, mask, epsilon, self.rng)
        if all_forbidden(mask):
            self.counters.fallback_steps += 1
        elif not mask[action]:
            self.counters.forbidden_steps += 1
        if self.audit is not None:
            self.audit(ckf, underlay, mask, action)

        result = self.env.step(action)
        next_ckf, next_underlay = self.env.observe()
        next_mask = self.mask(next_ckf, next_underlay)
        self._episode_return += result.reward
        self.counters.steps += 1

        if self.kind.learns:
            self.buffer.push(Transition(ckf, action, result.reward, next_ckf,
                                        mask, next_mask, result.terminal))
            if len(self.buffer) >= self.config.batch_size:
                self.learn()
            if self.counters.steps % self.config.target_sync == 0:
                self.target.load_params(self.net)
                self.counters.syncs += 1

        if result.terminal:
            self.counters.episodes += 1
            self.counters.returns.append(self._episode_return)
            self._obs = None
        else:
            self._obs = (next_ckf, next_underlay, next_mask)
        return result.reward, result.terminal

    def loss_spec(self, batch):
        cfg = self.config
        kind = self.kind
        q_next_t = self.target.forward(batch.next_states).q
        if kind.double:
            q_next_m = self.net.forward(batch.next_states).q
        if kind.iecr and kind.double:
            targets = batch_target_double(batch.rewards, cfg.gamma, q_next_t,
                                          q_next_m, batch.next_masks,
                                          batch.terminals)
        elif kind.iecr:
            targets = batch_target_simple(batch.rewards, cfg.gamma, q_next_t,
                                          batch.next_masks, batch.terminals,
                                          cfg.bootstrap)
        elif kind.double:
            targets = batch_baseline_double_target(
                batch.rewards, cfg.gamma, q_next_t, q_next_m, batch.terminals)
        else:
            targets = batch_baseline_target(batch.rewards, cfg.gamma,
                                            q_next_t, batch.terminals)
        spec = LossSpec(batch.states, targets, td_index=batch.actions,
                        td_on_max=kind.iecr and kind.double)
        if kind.iecr and cfg.lam > 0:
            q_s = self.net.forward(batch.states).q
            spec.aff_goals = batch_goal_value(batch.rewards, cfg.gamma, q_s,
                                              batch.masks, cfg.bootstrap)
            spec.aff_weight = cfg.lam
            spec.aff_active = ~batch.terminals
        return spec

    def learn(self):
        batch = self.buffer.sample(self.config.batch_size)
        loss = backward_and_step(self.net, self.adam, self.loss_spec(batch))
        self.counters.updates += 1
        self.losses.append(loss)
        return loss

    def evaluate_greedy(self, seed, max_steps=None):
        """ One episode with epsilon = 0 on a fresh copy of the game """
        env = get_environment(self.env.name, layout=self.env.layout)
        env.reset(seed)
        limit = max_steps or self.config.eval_max_steps
        total, steps, kind = 0.0, 0, NONE
        for _ in range(limit):
            ckf, underlay = env.observe()
            mask = self.mask(ckf, underlay)
            action = self.choose(ckf, mask, 0.0, self.eval_rng)
            result = env.step(action)
            total += result.reward
            steps += 1
            kind = result.terminal_kind
            if result.terminal:
                break
        return Evaluation(total, steps, kind)

    def _checkpoint(self, epoch):
        cfg = self.config
        if not cfg.checkpoint_dir or not self.kind.learns or \
                epoch % cfg.checkpoint_every:
            return
        path = os.path.join(cfg.checkpoint_dir, '%s-%s-seed%d-epoch%d.ckpt'
                            % (self.env.name, self.kind.name, self.seed,
                               epoch))
        save_checkpoint(path, self.net)
        log.info('checkpoint written to %s', path)

    def run(self, schedule):
        """ Yields one UnitResult per episode or epoch """
        if schedule.unit == EPOCH and not self.kind.learns:
            raise ConfigError('%s has no greedy policy to evaluate per epoch'
                              % self.kind.name)
        decay = self.config.epsilon_decay_episode \
            if schedule.unit == EPISODE else self.config.epsilon_decay_epoch
        self.epsilon.decay = decay
        for index in range(1, schedule.count + 1):
            started = time.perf_counter()
            epsilon = self.epsilon.value
            outcome = None
            if schedule.unit == EPISODE:
                self._obs = None
                terminal = False
                while not terminal:
                    reward, terminal = self.step(epsilon)
                avg = self.counters.returns[-1]
                outcome = self.env.terminal_kind
            else:
                for _ in range(self.config.steps_per_epoch):
                    self.step(epsilon)
                evaluation = self.evaluate_greedy(
                    int(self.env_rng.integers(2 ** 31)))
                avg, outcome = evaluation.total, evaluation.kind
                self._checkpoint(index)
            self.epsilon.advance()
            wall = int(round(1000 * (time.perf_counter() - started)))
            log.info('%s %s %s %d: reward %s, epsilon %.3f, %d steps',
                     self.env.name, self.kind.name, schedule.unit, index,
                     reward_fmt(avg), epsilon, self.counters.steps)
            yield UnitResult(schedule.unit, index, float(avg), epsilon,
                             self.counters.steps, wall, outcome)


def train(env, kind, config, schedule, seed, rules=None, audit=None):
    """ Run a whole schedule, returns (UnitResult list, Trainer) """
    if isinstance(env, str):
        env = get_environment(env)
    trainer = Trainer(env, kind, config, seed=seed, rules=rules, audit=audit)
    return list(trainer.run(schedule)), trainer
