import logging
from dataclasses import dataclass

import numpy as np

from iota_rl import IotaError

log = logging.getLogger(__name__)


class ReplayError(IotaError):
    pass


@dataclass(frozen=True)
class Transition:
    state: object
    action: int
    reward: float
    next_state: object
    mask: np.ndarray
    next_mask: np.ndarray
    terminal: bool


@dataclass
class Batch:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    masks: np.ndarray
    next_masks: np.ndarray
    terminals: np.ndarray

    def __len__(self):
        return len(self.actions)


class ReplayBuffer(object):
    """ FIFO ring of transitions, sampled uniformly with replacement

    States are kept as flattened CKF token codes (int32) and turned back
    into token values when sampled.
    """

    def __init__(self, capacity=50000, seed=0):
        if capacity < 1:
            raise ReplayError('capacity must be positive')
        self.capacity = capacity
        self.rng = np.random.default_rng(seed)
        self.size = 0
        self.head = 0
        self.inserted = 0
        self.scale = None
        self._store = None

    def _allocate(self, n_in, n_actions):
        cap = self.capacity
        self._store = {
            'states': np.zeros((cap, n_in), dtype=np.int32),
            'next_states': np.zeros((cap, n_in), dtype=np.int32),
            'actions': np.zeros(cap, dtype=np.int64),
            'rewards': np.zeros(cap, dtype=np.float64),
            'masks': np.zeros((cap, n_actions), dtype=np.int8),
            'next_masks': np.zeros((cap, n_actions), dtype=np.int8),
            'terminals': np.zeros(cap, dtype=bool),
        }

    def push(self, t):
        state = t.state.codes.ravel()
        if self._store is None:
            self.scale = t.state.scale
            self._allocate(state.size, len(t.mask))
        elif state.size != self._store['states'].shape[1]:
            raise ReplayError('state of size %d in a buffer of size %d'
                              % (state.size, self._store['states'].shape[1]))
        i = self.head
        s = self._store
        s['states'][i] = state
        s['next_states'][i] = t.next_state.codes.ravel()
        s['actions'][i] = t.action
        s['rewards'][i] = t.reward
        s['masks'][i] = t.mask
        s['next_masks'][i] = t.next_mask
        s['terminals'][i] = t.terminal
        self.head = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        self.inserted += 1

    def __len__(self):
        return self.size

    def oldest(self):
        """ Slot index of the oldest stored transition """
        return self.head if self.size == self.capacity else 0

    def actions_in_order(self):
        """ Stored actions, oldest first """
        if self._store is None:
            return np.zeros(0, dtype=np.int64)
        order = (self.oldest() + np.arange(self.size)) % self.capacity
        return self._store['actions'][order]

    def sample(self, batch_size):
        if self.size == 0:
            raise ReplayError('cannot sample an empty buffer')
        idx = self.rng.integers(self.size, size=batch_size)
        s = self._store
        return Batch(
            states=s['states'][idx] / self.scale,
            actions=s['actions'][idx],
            rewards=s['rewards'][idx],
            next_states=s['next_states'][idx] / self.scale,
            masks=s['masks'][idx],
            next_masks=s['next_masks'][idx],
            terminals=s['terminals'][idx],
        )
