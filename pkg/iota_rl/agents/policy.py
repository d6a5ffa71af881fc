import logging

import numpy as np

from iota_rl import IotaError
from iota_rl.affordance import all_forbidden

log = logging.getLogger(__name__)


class PolicyError(IotaError, ValueError):
    pass


def shift_mask_values(q, mask):
    """ (q + |min q|) * mask """
    q = np.asarray(q, dtype=np.float64)
    if q.size == 0:
        raise PolicyError('cannot shift an empty vector')
    mask = np.asarray(mask)
    if mask.shape != q.shape:
        raise PolicyError('mask of length %d for %d values'
                          % (mask.size, q.size))
    return (q + abs(q.min())) * mask


def masked_argmax(q, mask):
    """ Greedy action among the permitted ones, lowest index on ties

    Forbidden entries never win a tie against a permitted zero.
    """
    shifted = shift_mask_values(q, mask)
    shifted = np.where(np.asarray(mask) != 0, shifted, -np.inf)
    return int(np.argmax(shifted))


def select_action(q, mask, epsilon, rng):
    """ Masked epsilon-greedy choice

    An all-zero mask falls back to uniform choice over every action.
    """
    mask = np.asarray(mask)
    if not 0.0 <= epsilon <= 1.0:
        raise PolicyError('epsilon must be in [0, 1], got %r' % epsilon)
    if all_forbidden(mask):
        log.warning('every action is forbidden, choosing uniformly')
        return int(rng.integers(mask.size))
    if rng.random() < epsilon:
        allowed = np.flatnonzero(mask)
        return int(allowed[rng.integers(allowed.size)])
    return masked_argmax(q, mask)


class EpsilonSchedule(object):
    """ Linear decay by `decay` per unit (episode or epoch), clamped """

    def __init__(self, start=0.9, floor=0.05, decay=0.001):
        if not 0.0 <= floor <= start <= 1.0:
            raise PolicyError('need 0 <= epsilon_min <= epsilon_max <= 1')
        self.start = start
        self.floor = floor
        self.decay = decay
        self.units = 0

    @property
    def value(self):
        return min(self.start, max(self.floor,
                                   self.start - self.decay * self.units))

    def advance(self):
        self.units += 1
        return self.value
