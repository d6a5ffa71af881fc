"""
Bootstrap targets and loss terms.

The masked forms share one inner expression. The `literal` bootstrap is
max[(q + |min q|) * mask] - min q: with an all-ones mask and non-negative q
it collapses to max q, for negative minima it adds 2 * |min q|. The
`permitted` bootstrap is the plain maximum over permitted actions (over all
actions when none is permitted). The double target is the same under both.
"""

import numpy as np

from iota_rl.agents.policy import (
    PolicyError, shift_mask_values, masked_argmax,
)


LITERAL = 'literal'
PERMITTED = 'permitted'
BOOTSTRAPS = (LITERAL, PERMITTED)


def _check_bootstrap(bootstrap):
    if bootstrap not in BOOTSTRAPS:
        raise PolicyError('unknown bootstrap %r' % (bootstrap,))


def _masked_max(q, mask, bootstrap=LITERAL):
    _check_bootstrap(bootstrap)
    q = np.asarray(q, dtype=np.float64)
    if bootstrap == PERMITTED:
        return float(_batch_permitted_max(q[None], np.asarray(mask)[None])[0])
    return float(shift_mask_values(q, mask).max() - q.min())


def target_simple(r, gamma, q_next_target, next_mask, terminal,
                  bootstrap=LITERAL):
    if terminal:
        return float(r)
    return float(r) + gamma * _masked_max(q_next_target, next_mask, bootstrap)


def target_double(r, gamma, q_next_target, q_next_main, next_mask, terminal):
    """ Masked argmax over the target network, valued on its raw output

    q_next_main only enters the bracket as a constant subtrahend, so it
    never changes the chosen action.
    """
    if terminal:
        return float(r)
    q_t = np.asarray(q_next_target, dtype=np.float64)
    bracket = shift_mask_values(q_t, next_mask) - np.min(q_next_main)
    bracket = np.where(np.asarray(next_mask) != 0, bracket, -np.inf)
    if not np.isfinite(bracket).any():
        best = masked_argmax(q_t, np.ones_like(q_t))
    else:
        best = int(np.argmax(bracket))
    return float(r) + gamma * float(q_t[best])


def goal_value(r, gamma, q_main_s, mask, bootstrap=LITERAL):
    """ Goal for the affordance term, a constant during backprop """
    return float(r) + gamma * _masked_max(q_main_s, mask, bootstrap)


def baseline_target(r, gamma, q_next_target, terminal):
    """ r + gamma * max q' """
    if terminal:
        return float(r)
    return float(r) + gamma * float(np.max(q_next_target))


def baseline_double_target(r, gamma, q_next_target, q_next_main, terminal):
    """ Action picked by the main network, valued by the target network """
    if terminal:
        return float(r)
    return float(r) + gamma * float(
        np.asarray(q_next_target)[int(np.argmax(q_next_main))])


def squared_error(residual):
    return float(residual) ** 2


def td_loss_simple(target, q_sa):
    return squared_error(target - q_sa)


def affordance_loss(goal, q_main_s, terminal=False):
    if terminal:
        return 0.0
    return squared_error(goal - float(np.max(q_main_s)))


def total_loss(kind, td_term, aff_term, lam):
    if kind not in ('simple', 'double'):
        raise PolicyError('loss kind must be simple or double, got %r' % kind)
    if lam < 0:
        raise PolicyError('lambda must be non-negative')
    return td_term + lam * aff_term


def _batch_permitted_max(q, masks):
    q = np.asarray(q, dtype=np.float64)
    permitted = np.asarray(masks) != 0
    best = np.where(permitted, q, -np.inf).max(axis=1)
    return np.where(permitted.any(axis=1), best, q.max(axis=1))


def _batch_masked_max(q, masks, bootstrap=LITERAL):
    _check_bootstrap(bootstrap)
    if bootstrap == PERMITTED:
        return _batch_permitted_max(q, masks)
    q = np.asarray(q, dtype=np.float64)
    shifted = (q + np.abs(q.min(axis=1, keepdims=True))) * masks
    return shifted.max(axis=1) - q.min(axis=1)


def _bootstrap(rewards, gamma, terminals, values):
    rewards = np.asarray(rewards, dtype=np.float64)
    return np.where(terminals, rewards, rewards + gamma * values)


def batch_target_simple(rewards, gamma, q_next_target, next_masks,
                        terminals, bootstrap=LITERAL):
    """ target_simple over a batch of rows """
    return _bootstrap(rewards, gamma, terminals,
                      _batch_masked_max(q_next_target, next_masks, bootstrap))


def batch_target_double(rewards, gamma, q_next_target, q_next_main,
                        next_masks, terminals):
    q_t = np.asarray(q_next_target, dtype=np.float64)
    permitted = np.asarray(next_masks) != 0
    shifted = (q_t + np.abs(q_t.min(axis=1, keepdims=True))) * next_masks
    bracket = np.where(permitted, shifted, -np.inf)
    best = np.where(permitted.any(axis=1), bracket.argmax(axis=1),
                    q_t.argmax(axis=1))
    values = q_t[np.arange(len(q_t)), best]
    return _bootstrap(rewards, gamma, terminals, values)


def batch_goal_value(rewards, gamma, q_main_s, masks, bootstrap=LITERAL):
    rewards = np.asarray(rewards, dtype=np.float64)
    return rewards + gamma * _batch_masked_max(q_main_s, masks, bootstrap)


def batch_baseline_target(rewards, gamma, q_next_target, terminals):
    return _bootstrap(rewards, gamma, terminals,
                      np.asarray(q_next_target).max(axis=1))


def batch_baseline_double_target(rewards, gamma, q_next_target, q_next_main,
                                 terminals):
    q_t = np.asarray(q_next_target)
    best = np.asarray(q_next_main).argmax(axis=1)
    return _bootstrap(rewards, gamma, terminals,
                      q_t[np.arange(len(q_t)), best])
