import itertools

import numpy as np

from iota_rl.affordance import (
    AffordanceError, Rule, RuleSet, RuleSyntaxError, UnknownNameError, iota,
    load_ruleset, oracle_mask, parse_ruleset,
)
from iota_rl.ckf import SemanticElement, TokenParams, build_ckf, \
    build_underlay
from iota_rl.envs import environment_names, get_environment, default_rules, \
    rules_path
from iota_rl.tests import BaseTest

CELL = 16

# 5x5 test grids, bottom row first
PACMAN_GRID = [
    '#####',
    '#...#',
    '#.#.#',
    '#...#',
    '#####',
]

TAXI_GRID = [
    '#####',
    '#L.L#',
    '#.#.#',
    '#L..#',
    '#####',
]


def cells_of(grid, char):
    return [(c, r) for r, line in enumerate(grid)
            for c, ch in enumerate(line) if ch == char]


def cell_element(index, name, cell):
    return SemanticElement(index, name, cell[0] * CELL, cell[1] * CELL,
                           CELL, CELL)


def masks(frame, params, rules):
    ckf = build_ckf(frame, params)
    underlay = build_underlay(frame, params)
    return iota(ckf, underlay, rules, params), oracle_mask(ckf, underlay,
                                                           rules)


class TestParseRuleset(BaseTest):
    actions = ('right', 'left', 'jump', 'noop')

    def test_table_line(self):
        rules = parse_ruleset('right pipe 1 0', {'pipe': 0.3}, self.actions)
        self.assertEqual(rules.rules, (Rule(0, 0.3, 1, 0),))
        self.assertEqual(rules.n_actions, 4)

    def test_empty_element(self):
        rules = parse_ruleset('jump empty 0 -1\n', {}, self.actions)
        self.assertEqual(rules.rules, (Rule(2, 0.0, 0, -1),))

    def test_empty_file(self):
        rules = parse_ruleset('', {}, self.actions)
        self.assertEqual(len(rules), 0)
        self.assertEqual(rules.for_action(0), ())

    def test_comments(self):
        text = '# header\n\nright pipe 1 0  # trailing\n'
        rules = parse_ruleset(text, {'pipe': 0.3}, self.actions)
        self.assertEqual(len(rules), 1)

    def test_unknown_names(self):
        text = 'fly pipe 1 0\nright lava 1 0\n'
        with self.assertRaises(UnknownNameError) as cm:
            parse_ruleset(text, {'pipe': 0.3}, self.actions)
        self.assertEqual(cm.exception.offenders, [(1, 'fly'), (2, 'lava')])

    def test_syntax_errors(self):
        with self.assertRaises(RuleSyntaxError) as cm:
            parse_ruleset('right pipe 0 0\nright pipe 1', {'pipe': 0.3},
                          self.actions)
        self.assertEqual(cm.exception.lineno, 2)
        with self.assertRaises(RuleSyntaxError):
            parse_ruleset('right pipe x 0', {'pipe': 0.3}, self.actions)

    def test_duplicates(self):
        with self.assertLogs('iota_rl.affordance', 'WARNING'):
            rules = parse_ruleset('right pipe 1 0\nright pipe 1 0',
                                  {'pipe': 0.3}, self.actions)
        self.assertEqual(len(rules), 1)

    def test_action_range(self):
        with self.assertRaises(AffordanceError):
            RuleSet((Rule(4, 0.1, 1, 0),), 4)

    def test_shipped_rules(self):
        for name in environment_names():
            env = get_environment(name)
            rules = default_rules(env)
            self.assertGreater(len(rules), 0, name)
            self.assertEqual(rules.n_actions, env.n_actions)

    def test_load_file(self):
        path = self.write('x.rules', 'left pipe -1 0\n')
        rules = load_ruleset(path, {'pipe': 0.3}, self.actions)
        self.assertEqual(rules.rules, (Rule(1, 0.3, -1, 0),))


class TestIota(BaseTest):
    def setUp(self):
        super().setUp()
        self.params = TokenParams.for_screen(4, 5 * CELL, 5 * CELL)
        self.registry = {'pacman': 0.1, 'wall': 0.2, 'ghost': 0.3,
                         'pellet': 0.4}
        self.pacman_rules = load_ruleset(
            rules_path('pacman'), self.registry,
            ('right', 'left', 'up', 'down'))
        self.walls = [cell_element(2, 'wall', c)
                      for c in cells_of(PACMAN_GRID, '#')]

    def test_no_rules(self):
        frame = [cell_element(1, 'pacman', (1, 1))] + self.walls
        mask, _ = masks(frame, self.params, RuleSet.empty(4))
        self.assertEqual(mask.tolist(), [1, 1, 1, 1])

    def test_wall_to_the_right(self):
        frame = [cell_element(1, 'pacman', (3, 1))] + self.walls
        mask, _ = masks(frame, self.params, self.pacman_rules)
        self.assertEqual(mask[0], 0)
        self.assertEqual(mask[1], 1)

    def test_only_main_element(self):
        frame = [cell_element(1, 'pacman', (2, 2))]
        mask, _ = masks(frame, self.params, self.pacman_rules)
        self.assertEqual(mask.tolist(), [1, 1, 1, 1])

    def test_pick_on_empty_cell(self):
        params = TokenParams.for_screen(4, 5 * CELL, 5 * CELL)
        registry = {'taxi': 0.1, 'wall': 0.2, 'passenger': 0.3,
                    'destination': 0.4}
        rules = parse_ruleset('pick empty 0 0', registry,
                              ('right', 'left', 'up', 'down', 'pick',
                               'drop'))
        frame = [cell_element(1, 'taxi', (2, 1)),
                 cell_element(3, 'passenger', (1, 1))]
        mask, _ = masks(frame, params, rules)
        self.assertEqual(mask[4], 0)
        frame = [cell_element(1, 'taxi', (1, 1)),
                 cell_element(3, 'passenger', (1, 1))]
        mask, _ = masks(frame, params, rules)
        self.assertEqual(mask[4], 1)

    def test_scan_stays_on_axes(self):
        rules = parse_ruleset('right ghost 1 1', self.registry,
                              ('right', 'left', 'up', 'down'))
        frame = [cell_element(1, 'pacman', (1, 1)),
                 cell_element(3, 'ghost', (2, 2))]
        mask, _ = masks(frame, self.params, rules)
        self.assertEqual(mask[0], 1)

    def test_missing_main(self):
        ckf = build_ckf([cell_element(1, 'pacman', (1, 1))], self.params)
        empty = build_underlay([cell_element(1, 'pacman', (1, 1))],
                               self.params)
        with self.assertRaises(AffordanceError):
            iota(empty, ckf, self.pacman_rules, self.params)

    def test_oracle_pacman_grid(self):
        free = cells_of(PACMAN_GRID, '.')
        for agent, ghost in itertools.product(free, free + [None]):
            frame = [cell_element(1, 'pacman', agent)] + self.walls
            if ghost is not None and ghost != agent:
                frame.append(cell_element(3, 'ghost', ghost))
            for pellet in free:
                if pellet in (agent, ghost):
                    continue
                frame.append(cell_element(4, 'pellet', pellet))
                mask, oracle = masks(frame, self.params, self.pacman_rules)
                np.testing.assert_array_equal(mask, oracle)
                frame.pop()

    def test_oracle_taxi_grid(self):
        params = TokenParams.for_screen(4, 5 * CELL, 5 * CELL)
        registry = {'taxi': 0.1, 'wall': 0.2, 'passenger': 0.3,
                    'destination': 0.4}
        rules = load_ruleset(rules_path('taxidriver'), registry,
                             ('right', 'left', 'up', 'down', 'pick', 'drop'))
        walls = [cell_element(2, 'wall', c) for c in cells_of(TAXI_GRID, '#')]
        landmarks = cells_of(TAXI_GRID, 'L')
        free = landmarks + cells_of(TAXI_GRID, '.')
        for taxi in free:
            for passenger, destination in itertools.permutations(
                    landmarks + [None], 2):
                if destination is None:
                    continue
                frame = [cell_element(1, 'taxi', taxi)] + walls
                if passenger is not None:
                    frame.append(cell_element(3, 'passenger', passenger))
                frame.append(cell_element(4, 'destination', destination))
                mask, oracle = masks(frame, params, rules)
                np.testing.assert_array_equal(mask, oracle)

    def test_monotone(self):
        rng = np.random.default_rng(5)
        rules = self.pacman_rules.rules
        free = cells_of(PACMAN_GRID, '.')
        for _ in range(200):
            agent, ghost = (free[i] for i in rng.choice(len(free), 2,
                                                        replace=False))
            frame = [cell_element(1, 'pacman', agent),
                     cell_element(3, 'ghost', ghost)] + self.walls
            subset = [r for r in rules if rng.random() < 0.5]
            small, _ = masks(frame, self.params, RuleSet(subset, 4))
            full, _ = masks(frame, self.params, RuleSet(rules, 4))
            self.assertTrue(np.all(full <= small))

    def test_locality(self):
        params = TokenParams.for_screen(4, 9 * CELL, 9 * CELL)
        agent = (4, 4)
        base = [cell_element(1, 'pacman', agent),
                cell_element(2, 'wall', (5, 4))]
        reference, _ = masks(base, params, self.pacman_rules)
        for c in range(9):
            for r in range(9):
                if max(abs(c - agent[0]), abs(r - agent[1])) <= 1:
                    continue
                for index, name in ((2, 'wall'), (3, 'ghost')):
                    frame = base + [cell_element(index, name, (c, r))]
                    mask, _ = masks(frame, params, self.pacman_rules)
                    np.testing.assert_array_equal(mask, reference)


class TestScreenEdge(BaseTest):
    def test_main_on_far_edge(self):
        params = TokenParams.for_screen(4, 64, 64)
        rules = RuleSet((Rule(1, 0.2, -1, 0),), 4)
        frame = [SemanticElement(1, 'pacman', 64, 0, 16, 16),
                 SemanticElement(2, 'wall', 32, 0, 16, 16)]
        ckf = build_ckf(frame, params)
        underlay = build_underlay(frame, params)
        mask = iota(ckf, underlay, rules, params)
        np.testing.assert_array_equal(mask, [1, 0, 1, 1])
        np.testing.assert_array_equal(mask, oracle_mask(ckf, underlay,
                                                        rules))
