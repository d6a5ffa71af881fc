import unittest

import numpy as np

from iota_rl import ConfigError
from iota_rl.affordance import RuleSet, oracle_mask
from iota_rl.agents import (
    AGENTS, AgentConfig, EpsilonSchedule, PERMITTED, PolicyError, ReplayBuffer,
    ReplayError, Schedule, Trainer, Transition, affordance_loss,
    agent_kind, baseline_double_target, baseline_target, goal_value,
    masked_argmax, select_action, shift_mask_values, target_double,
    target_simple, td_loss_simple, total_loss, train, EPISODE, EPOCH,
)
from iota_rl.agents.targets import (
    batch_baseline_double_target, batch_baseline_target, batch_goal_value,
    batch_target_double, batch_target_simple,
)
from iota_rl.ckf import Ckf
from iota_rl.envs import (
    get_environment, default_rules, LOSE, NONE, TIMEOUT, WIN,
)
from iota_rl.harness import ExperimentSpec
from iota_rl.network import load_checkpoint
from iota_rl.tests import BaseTest, SLOW

Q = [2.0, -1.0, 0.5]


class TestActionSelection(BaseTest):
    def test_shift(self):
        np.testing.assert_allclose(shift_mask_values(Q, [1, 1, 1]),
                                   [3.0, 0.0, 1.5])
        np.testing.assert_allclose(shift_mask_values(Q, [0, 1, 1]),
                                   [0.0, 0.0, 1.5])
        np.testing.assert_allclose(shift_mask_values([0, 0, 0], [1, 1, 1]),
                                   [0, 0, 0])
        with self.assertRaises(PolicyError):
            shift_mask_values([], [])
        with self.assertRaises(PolicyError):
            shift_mask_values(Q, [1, 1])

    def test_greedy(self):
        rng = np.random.default_rng(0)
        self.assertEqual(select_action(Q, [0, 1, 1], 0.0, rng), 2)
        self.assertEqual(select_action([5.0, 1.0], [0, 1], 0.0, rng), 1)

    def test_forbidden_zero_loses_ties(self):
        self.assertEqual(masked_argmax([-1.0, -1.0], [0, 1]), 1)
        self.assertEqual(masked_argmax([1.0, 1.0, 1.0], [1, 1, 1]), 0)

    def test_exploration_is_uniform(self):
        rng = np.random.default_rng(1)
        picks = [select_action([1.0, 0.0], [1, 1], 1.0, rng)
                 for _ in range(10000)]
        ones = sum(picks)
        self.assertLess(abs(ones - 5000), 3 * 50)

    def test_exploration_respects_mask(self):
        rng = np.random.default_rng(2)
        picks = set(select_action(Q, [1, 0, 1], 1.0, rng)
                    for _ in range(500))
        self.assertEqual(picks, {0, 2})

    def test_all_forbidden_falls_back(self):
        rng = np.random.default_rng(3)
        with self.assertLogs('iota_rl.agents.policy', 'WARNING'):
            action = select_action(Q, [0, 0, 0], 0.0, rng)
        self.assertIn(action, (0, 1, 2))

    def test_argmax_invariance(self):
        rng = np.random.default_rng(4)
        for _ in range(1000):
            q = rng.normal(size=5) * 10
            self.assertEqual(masked_argmax(q, np.ones(5)), int(np.argmax(q)))

    def test_bad_epsilon(self):
        with self.assertRaises(PolicyError):
            select_action(Q, [1, 1, 1], 1.5, np.random.default_rng(0))


class TestEpsilon(BaseTest):
    def test_linear_decay(self):
        eps = EpsilonSchedule(0.9, 0.05, 0.001)
        self.assertEqual(eps.value, 0.9)
        for _ in range(10):
            eps.advance()
        self.assertAlmostEqual(eps.value, 0.89)

    def test_floor(self):
        eps = EpsilonSchedule(0.9, 0.05, 0.01)
        for _ in range(85):
            eps.advance()
        self.assertAlmostEqual(eps.value, 0.05)
        for _ in range(100):
            eps.advance()
        self.assertEqual(eps.value, 0.05)

    def test_invalid(self):
        with self.assertRaises(PolicyError):
            EpsilonSchedule(0.05, 0.9)


class TestTargets(BaseTest):
    def test_target_simple(self):
        self.assertEqual(target_simple(-10, 0.99, Q, [1, 1, 1], True), -10)
        self.assertAlmostEqual(target_simple(1, 0.99, Q, [1, 0, 1], False),
                               4.96)
        self.assertEqual(target_simple(0, 0.99, [0, 0], [1, 1], False), 0)

    def test_negative_minimum_inflates(self):
        self.assertEqual(target_simple(0, 1.0, [-1.0, -2.0], [1, 1], False),
                         3.0)
        self.assertEqual(baseline_target(0, 1.0, [-1.0, -2.0], False), -1.0)

    def test_target_double(self):
        self.assertEqual(target_double(2, 0.99, Q, Q, [1, 1, 1], True), 2)
        self.assertEqual(
            target_double(0, 1.0, [1.0, 3.0], [1.0, 3.0], [1, 0], False), 1.0)

    def test_goal_value(self):
        self.assertEqual(goal_value(0, 0.99, [0, 0, 0], [0, 1, 0]), 0)
        self.assertAlmostEqual(goal_value(1, 0.99, Q, [0, 1, 1]), 3.475)
        self.assertAlmostEqual(goal_value(0, 1.0, Q, [1, 1, 1]), 4.0)

    def test_permitted_bootstrap(self):
        self.assertEqual(
            target_simple(0, 1.0, [-1.0, -2.0], [1, 1], False, PERMITTED), -1.0)
        self.assertAlmostEqual(goal_value(1, 0.99, Q, [0, 1, 1], PERMITTED),
                               1.495)
        self.assertEqual(target_simple(0, 1.0, Q, [0, 0, 0], False, PERMITTED),
                         2.0)
        with self.assertRaises(PolicyError):
            target_simple(0, 1.0, Q, [1, 1, 1], False, 'clipped')

    def test_literal_exceeds_permitted_by_twice_the_deficit(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            q = rng.normal(size=4) * 3
            mask = (rng.random(4) < 0.6).astype(np.int8)
            mask[rng.integers(4)] = 1
            literal = target_simple(0, 1.0, q, mask, False)
            permitted = target_simple(0, 1.0, q, mask, False, PERMITTED)
            self.assertAlmostEqual(permitted, float(q[mask == 1].max()))
            self.assertAlmostEqual(literal - permitted,
                                   2 * max(0.0, -q.min()), places=10)

    def test_losses(self):
        self.assertEqual(affordance_loss(2.0, Q), 0.0)
        self.assertAlmostEqual(affordance_loss(3.475, Q), 2.175625)
        self.assertEqual(affordance_loss(100.0, Q, terminal=True), 0.0)
        self.assertEqual(td_loss_simple(2.0, 2.0), 0.0)
        self.assertAlmostEqual(td_loss_simple(4.96, 2.0), 8.7616)

    def test_total_loss(self):
        self.assertEqual(total_loss('simple', 2.0, 3.0, 0.0), 2.0)
        self.assertEqual(total_loss('double', 2.0, 3.0, 1.0), 5.0)
        self.assertEqual(total_loss('simple', 2.0, 0.0, 10.0), 2.0)
        with self.assertRaises(PolicyError):
            total_loss('triple', 1.0, 1.0, 1.0)
        with self.assertRaises(PolicyError):
            total_loss('simple', 1.0, 1.0, -1.0)

    def test_reductions(self):
        rng = np.random.default_rng(5)
        ones = np.ones(4)
        for _ in range(10000):
            r = rng.normal()
            q_pos = rng.random(4) * 5
            self.assertAlmostEqual(
                target_simple(r, 0.99, q_pos, ones, False),
                baseline_target(r, 0.99, q_pos, False), places=10)
            q = rng.normal(size=4)
            self.assertEqual(target_double(r, 0.99, q, q, ones, False),
                             baseline_double_target(r, 0.99, q, q, False))
            self.assertEqual(target_double(r, 0.99, q, q, ones, False),
                             baseline_target(r, 0.99, q, False))

    def test_batches_match_scalars(self):
        rng = np.random.default_rng(6)
        n = 50
        r = rng.normal(size=n)
        q_t = rng.normal(size=(n, 4))
        q_m = rng.normal(size=(n, 4))
        masks = (rng.random((n, 4)) < 0.6).astype(np.int8)
        masks[0] = 0
        terminals = rng.random(n) < 0.2
        np.testing.assert_allclose(
            batch_target_simple(r, 0.9, q_t, masks, terminals),
            [target_simple(*a) for a in zip(r, [0.9] * n, q_t, masks,
                                            terminals)])
        np.testing.assert_allclose(
            batch_target_double(r, 0.9, q_t, q_m, masks, terminals),
            [target_double(*a) for a in zip(r, [0.9] * n, q_t, q_m, masks,
                                            terminals)])
        np.testing.assert_allclose(
            batch_goal_value(r, 0.9, q_m, masks),
            [goal_value(*a) for a in zip(r, [0.9] * n, q_m, masks)])
        np.testing.assert_allclose(
            batch_target_simple(r, 0.9, q_t, masks, terminals, PERMITTED),
            [target_simple(*a, bootstrap=PERMITTED)
             for a in zip(r, [0.9] * n, q_t, masks, terminals)])
        np.testing.assert_allclose(
            batch_goal_value(r, 0.9, q_m, masks, PERMITTED),
            [goal_value(*a, bootstrap=PERMITTED)
             for a in zip(r, [0.9] * n, q_m, masks)])
        np.testing.assert_allclose(
            batch_baseline_target(r, 0.9, q_t, terminals),
            [baseline_target(*a) for a in zip(r, [0.9] * n, q_t, terminals)])
        np.testing.assert_allclose(
            batch_baseline_double_target(r, 0.9, q_t, q_m, terminals),
            [baseline_double_target(*a)
             for a in zip(r, [0.9] * n, q_t, q_m, terminals)])


class TestReplayBuffer(BaseTest):
    def transition(self, state, action):
        return Transition(state, action, 0.0, state, np.ones(2, np.int8),
                          np.ones(2, np.int8), False)

    def test_eviction(self):
        state = Ckf([[10000, 0]], 10)
        buf = ReplayBuffer()
        for i in range(50001):
            buf.push(self.transition(state, i))
        self.assertEqual(len(buf), 50000)
        self.assertEqual(buf.inserted, 50001)
        order = buf.actions_in_order()
        self.assertEqual(order[0], 1)
        self.assertEqual(order[-1], 50000)

    def test_sample(self):
        state = Ckf([[10000, 25410]], 10)
        buf = ReplayBuffer(capacity=10, seed=0)
        for i in range(3):
            buf.push(self.transition(state, i))
        batch = buf.sample(8)
        self.assertEqual(len(batch), 8)
        np.testing.assert_allclose(batch.states[0], [0.1, 0.2541])
        self.assertTrue(set(batch.actions.tolist()) <= {0, 1, 2})

    def test_errors(self):
        with self.assertRaises(ReplayError):
            ReplayBuffer(capacity=0)
        buf = ReplayBuffer(capacity=4)
        with self.assertRaises(ReplayError):
            buf.sample(1)
        buf.push(self.transition(Ckf([[10000, 0]], 10), 0))
        with self.assertRaises(ReplayError):
            buf.push(self.transition(Ckf([[10000, 0, 0]], 10), 0))


class TestAgentKinds(BaseTest):
    def test_roster(self):
        self.assertEqual(sorted(AGENTS), sorted([
            'DQN', 'DDQN', 'DuDQN', 'DDDQN', 'IDQN', 'IDDQN', 'IDuDQN',
            'IDDDQN', 'RANDOM']))
        self.assertTrue(agent_kind('IDDDQN').dueling)
        self.assertTrue(agent_kind('IDDDQN').double)
        self.assertFalse(agent_kind('DuDQN').iecr)
        with self.assertRaises(ConfigError):
            agent_kind('A3C')

    def test_architecture_mismatch(self):
        env = get_environment('taxidriver')
        with self.assertRaises(ConfigError):
            Trainer(env, 'IDuDQN', self.tiny_config(dueling=False))
        with self.assertRaises(ConfigError):
            Trainer(env, 'DQN', self.tiny_config(dueling=True))

    def test_bad_config(self):
        with self.assertRaises(ConfigError):
            AgentConfig(epsilon_min=0.95)
        with self.assertRaises(ConfigError):
            AgentConfig(lam=-1)
        with self.assertRaises(ConfigError):
            AgentConfig(bootstrap='clipped')
        with self.assertRaises(ConfigError):
            Schedule(EPOCH, 0)

    def test_lambda_default_is_shared(self):
        self.assertEqual(AgentConfig().lam, 1.0)
        self.assertEqual(ExperimentSpec(env='taxidriver').lam,
                         AgentConfig().lam)
        config = ExperimentSpec(env='taxidriver').agent_config(0.5)
        self.assertEqual((config.lam, config.bootstrap), (0.5, 'literal'))

    def test_random_has_no_epochs(self):
        trainer = Trainer(get_environment('taxidriver'), 'RANDOM',
                          self.tiny_config())
        with self.assertRaises(ConfigError):
            list(trainer.run(Schedule(EPOCH, 1)))


class TestTrainer(BaseTest):
    def env(self, name='taxidriver', max_steps=50):
        return get_environment(name, max_steps=max_steps)

    def test_epoch_accounting(self):
        results, trainer = train(self.env(), 'IDQN', self.tiny_config(),
                                 Schedule(EPOCH, 3), seed=0)
        self.assertEqual([r.unit_index for r in results], [1, 2, 3])
        self.assertEqual(results[-1].steps_total, 60)
        self.assertEqual(trainer.counters.steps, 60)
        self.assertEqual(trainer.counters.updates, 60 - 8 + 1)
        self.assertEqual(trainer.counters.syncs, 6)
        self.assertEqual({r.unit for r in results}, {EPOCH})

    def test_episode_results(self):
        results, trainer = train(self.env(), 'DDQN', self.tiny_config(),
                                 Schedule(EPISODE, 4), seed=1)
        self.assertEqual(trainer.counters.episodes, 4)
        self.assertEqual([r.avg_reward for r in results],
                         trainer.counters.returns)
        self.assertAlmostEqual(results[-1].epsilon, 0.897)

    def test_deterministic(self):
        def run(kind):
            results, trainer = train(self.env(), kind, self.tiny_config(),
                                     Schedule(EPOCH, 2), seed=4)
            return ([(r.avg_reward, r.epsilon, r.steps_total)
                     for r in results], trainer.losses)
        for kind in ('IDDDQN', 'DQN'):
            self.assertEqual(run(kind), run(kind))

    def test_target_network_is_stale_between_syncs(self):
        trainer = Trainer(self.env(), 'IDuDQN', self.tiny_config(), seed=2)
        state = np.random.default_rng(0).random(trainer.net.n_in)
        last = trainer.target.forward(state).q.copy()
        changed_at = []
        for _ in range(45):
            trainer.step(0.5)
            now = trainer.target.forward(state).q
            if not np.array_equal(now, last):
                changed_at.append(trainer.counters.steps)
                last = now.copy()
        self.assertTrue(changed_at)
        for step in changed_at:
            self.assertEqual(step % 10, 0)

    def test_empty_rules_reduce_to_plain_targets(self):
        trainer = Trainer(self.env(), 'IDQN', self.tiny_config(), seed=3,
                          rules=RuleSet.empty(6))
        for _ in range(30):
            trainer.step(0.5)
        for net in (trainer.net, trainer.target):
            np.abs(net.params['head.W'], out=net.params['head.W'])
            net.params['head.b'][:] = 1.0
        batch = trainer.buffer.sample(16)
        self.assertTrue(batch.masks.all())
        self.assertTrue(batch.next_masks.all())

        spec = trainer.loss_spec(batch)
        q_next = trainer.target.forward(batch.next_states).q
        self.assertTrue((q_next >= 0).all())
        np.testing.assert_allclose(
            spec.td_targets,
            batch_baseline_target(batch.rewards, 0.99, q_next,
                                  batch.terminals))
        q_s = trainer.net.forward(batch.states).q
        np.testing.assert_allclose(spec.aff_goals,
                                   batch.rewards + 0.99 * q_s.max(axis=1))

    def test_greedy_evaluation_reports_outcome(self):
        trainer = Trainer(self.env(), 'IDQN', self.tiny_config(), seed=0)
        evaluation = trainer.evaluate_greedy(5, max_steps=10)
        self.assertLessEqual(evaluation.steps, 10)
        if evaluation.kind == NONE:
            self.assertEqual(evaluation.steps, 10)
        self.assertIn(evaluation.kind, (NONE, WIN, LOSE, TIMEOUT))
        self.assertEqual(evaluation.won, evaluation.kind == WIN)
        results, _ = train(self.env(), 'DQN', self.tiny_config(),
                           Schedule(EPOCH, 2), seed=0)
        for r in results:
            self.assertIn(r.outcome, (NONE, WIN, LOSE, TIMEOUT))

    def test_empty_rules_permit_everything(self):
        seen = []

        def audit(ckf, underlay, mask, action):
            seen.append(mask.copy())
        train(self.env(), 'IDQN', self.tiny_config(), Schedule(EPOCH, 1),
              seed=0, rules=RuleSet.empty(6), audit=audit)
        self.assertEqual(len(seen), 20)
        self.assertTrue(all(m.all() for m in seen))

    def test_rule_count_mismatch(self):
        with self.assertRaises(ConfigError):
            Trainer(self.env(), 'IDQN', self.tiny_config(),
                    rules=RuleSet.empty(4))

    def test_checkpoints(self):
        config = self.tiny_config(checkpoint_dir=self.path('ckpt'),
                                  checkpoint_every=2)
        _, trainer = train(self.env(), 'IDQN', config, Schedule(EPOCH, 2),
                           seed=0)
        net = load_checkpoint(self.path('ckpt',
                                        'taxidriver-IDQN-seed0-epoch2.ckpt'))
        np.testing.assert_array_equal(
            net.params['head.W'],
            trainer.net.params['head.W'].astype(np.float32))

    def audit_run(self, name, kind, steps):
        env = self.env(name, max_steps=200)
        rules = default_rules(env)
        trainer = Trainer(env, kind, self.tiny_config(), seed=1, rules=rules)
        violations = []

        def audit(ckf, underlay, mask, action):
            oracle = oracle_mask(ckf, underlay, rules)
            np.testing.assert_array_equal(mask, oracle)
            if oracle.any() and not oracle[action]:
                violations.append(action)
        trainer.audit = audit
        for _ in range(steps):
            trainer.step(0.5)
        return trainer, violations

    def test_iecr_agents_never_break_rules(self):
        kinds = ('IDQN', 'IDDQN', 'IDuDQN', 'IDDDQN', 'IDQN')
        names = ('flappybirds', 'mario', 'pacman', 'scararobot',
                 'taxidriver')
        for name, kind in zip(names, kinds):
            trainer, violations = self.audit_run(name, kind, 150)
            self.assertEqual(violations, [], name)
            self.assertEqual(trainer.counters.forbidden_steps, 0)

    @unittest.skipUnless(SLOW, 'set IOTA_RL_SLOW=1')
    def test_safety_long_run(self):
        for name in ('pacman', 'taxidriver'):
            trainer, violations = self.audit_run(name, 'IDQN', 100000)
            self.assertEqual(violations, [])
            self.assertLess(trainer.counters.fallback_steps, 100)


@unittest.skipUnless(SLOW, 'set IOTA_RL_SLOW=1')
class TestOrdering(BaseTest):
    def tail(self, name, kind, seed, **config):
        results, _ = train(get_environment(name), kind, AgentConfig(**config),
                           Schedule(EPOCH, 100), seed=seed)
        tail = results[-25:]
        return float(np.mean([r.avg_reward for r in tail])), tail

    def test_taxidriver(self):
        for seed in range(3):
            iecr, _ = self.tail('taxidriver', 'IDQN', seed)
            base, _ = self.tail('taxidriver', 'DQN', seed)
            self.assertGreater(iecr, 0)
            self.assertTrue(base <= 0 or iecr >= 3 * base, (iecr, base))

    def test_flappybirds(self):
        for seed in range(3):
            iecr, _ = self.tail('flappybirds', 'IDQN', seed,
                                bootstrap=PERMITTED)
            base, evaluations = self.tail('flappybirds', 'DQN', seed)
            self.assertGreater(iecr, 0)
            self.assertLess(base, iecr)
            failed = sum(r.outcome != WIN for r in evaluations)
            self.assertGreaterEqual(failed, 0.9 * len(evaluations),
                                    (seed, failed))
