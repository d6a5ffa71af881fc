"""
Negative affordances.

A rule <action, element, phi, alpha> forbids ``action`` when ``element`` is
found in the main element's row within ``phi`` columns, or in its column
within ``alpha`` rows. The sign of a range picks the scan direction and both
ends are inclusive. Zero-range rules look at what lies under the main
element, which is read from the underlay grid.
"""

import logging
from dataclasses import dataclass

import numpy as np

from iota_rl import IotaError
from iota_rl.ckf import CkfError, MAIN_INDEX

log = logging.getLogger(__name__)

EMPTY = 'empty'


class AffordanceError(IotaError, ValueError):
    pass


class RuleSyntaxError(AffordanceError):
    def __init__(self, lineno, message):
        super().__init__('line %d: %s' % (lineno, message))
        self.lineno = lineno


class UnknownNameError(AffordanceError):
    def __init__(self, offenders):
        text = ', '.join('line %d: %s' % o for o in offenders)
        super().__init__('unknown names (%s)' % text)
        self.offenders = offenders


@dataclass(frozen=True)
class Rule:
    action: int
    key: float
    phi: int
    alpha: int

    @property
    def zero_range(self):
        return self.phi == 0 and self.alpha == 0


@dataclass(frozen=True)
class RuleSet:
    rules: tuple
    n_actions: int

    def __post_init__(self):
        object.__setattr__(self, 'rules', tuple(self.rules))
        for rule in self.rules:
            if not 0 <= rule.action < self.n_actions:
                raise AffordanceError('rule action %d outside [0, %d)'
                                      % (rule.action, self.n_actions))

    @classmethod
    def empty(cls, n_actions):
        return cls((), n_actions)

    def for_action(self, action):
        return tuple(r for r in self.rules if r.action == action)

    def __len__(self):
        return len(self.rules)


def all_forbidden(mask):
    return not np.any(mask)


def _scan(n, start, extent):
    """ Indices from start to start+extent inclusive, clipped to [0, n) """
    step = 1 if extent >= 0 else -1
    stop = start + extent + step
    return [i for i in range(start, stop, step) if 0 <= i < n]


def _main_position(ckf):
    try:
        return ckf.main_position()
    except CkfError:
        raise AffordanceError('main element not found in CKF')


def _key_index(key, mu):
    return int(round(key * mu))


def iota(ckf, underlay, rules, params=None):
    """ Mask of permitted actions (1) for the state held by ckf """
    if params is not None and ckf.shape != (params.rows, params.cols):
        raise AffordanceError('CKF shape %r does not match %dx%d'
                              % (ckf.shape, params.rows, params.cols))
    u1, v1 = _main_position(ckf)
    keys = ckf.keys
    under = underlay.keys
    rows, cols = keys.shape
    mask = np.ones(rules.n_actions, dtype=np.int8)

    for a in range(rules.n_actions):
        for rule in rules.for_action(a):
            target = _key_index(rule.key, ckf.mu)
            if rule.zero_range:
                hit = under[v1, u1] == target
            else:
                hit = any(keys[v1, p] == target
                          for p in _scan(cols, u1, rule.phi)) or \
                    any(keys[l, u1] == target
                        for l in _scan(rows, v1, rule.alpha))
            if hit:
                mask[a] = 0
                break
    return mask


def oracle_mask(ckf, underlay, rules):
    """ Brute-force reference: every (rule, cell) pair checked on its own """
    rows, cols = ckf.shape
    main = None
    for r in range(rows):
        for c in range(cols):
            if main is None and ckf.cell(r, c).bands()[0] == MAIN_INDEX:
                main = (r, c)
    if main is None:
        raise AffordanceError('main element not found in CKF')
    mr, mc = main

    mask = [1] * rules.n_actions
    for rule in rules.rules:
        wanted = _key_index(rule.key, ckf.mu)
        if rule.zero_range:
            if underlay.cell(mr, mc).bands()[0] == wanted:
                mask[rule.action] = 0
            continue
        lo_c, hi_c = sorted((mc, mc + rule.phi))
        lo_r, hi_r = sorted((mr, mr + rule.alpha))
        for r in range(rows):
            for c in range(cols):
                in_row = r == mr and lo_c <= c <= hi_c
                in_col = c == mc and lo_r <= r <= hi_r
                if (in_row or in_col) and \
                        ckf.cell(r, c).bands()[0] == wanted:
                    mask[rule.action] = 0
    return np.array(mask, dtype=np.int8)


def parse_ruleset(text, registry, action_names):
    """ Parse rule-file text

    :param registry: element name -> key (``empty`` is always key 0)
    :param action_names: action names in action-index order
    """
    actions = {name: i for i, name in enumerate(action_names)}
    rules = []
    seen = set()
    offenders = []

    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 4:
            raise RuleSyntaxError(lineno, 'expected 4 fields, got %d'
                                  % len(fields))
        action_name, element_name, phi, alpha = fields
        try:
            phi, alpha = int(phi), int(alpha)
        except ValueError:
            raise RuleSyntaxError(lineno, 'ranges must be integers')

        if action_name not in actions:
            offenders.append((lineno, action_name))
        if element_name == EMPTY:
            key = 0.0
        elif element_name in registry:
            key = registry[element_name]
        else:
            offenders.append((lineno, element_name))
            continue
        if action_name not in actions:
            continue

        rule = Rule(actions[action_name], key, phi, alpha)
        if rule in seen:
            log.warning('line %d: duplicate rule %s %s %d %d ignored',
                        lineno, action_name, element_name, phi, alpha)
            continue
        seen.add(rule)
        rules.append(rule)

    if offenders:
        raise UnknownNameError(offenders)
    log.debug('parsed %d rules over %d actions', len(rules),
              len(action_names))
    return RuleSet(tuple(rules), len(action_names))


def load_ruleset(path, registry, action_names):
    with open(path, 'r', encoding='utf-8') as f:
        return parse_ruleset(f.read(), registry, action_names)
