import os
import shutil
import tempfile
import unittest

from iota_rl.agents import AgentConfig
from iota_rl.envs import parse_layout
from iota_rl.harness import ExperimentSpec

# Long acceptance runs (40k-step orderings, 1e5-step audits) only run when
# IOTA_RL_SLOW=1.
SLOW = os.environ.get('IOTA_RL_SLOW') == '1'

PACMAN_HEADER = {
    'name': 'pacman',
    'registry': 'pacman wall ghost pellet',
    'actions': 'right left up down',
}

TAXI_HEADER = {
    'name': 'taxidriver',
    'registry': 'taxi wall passenger destination',
    'actions': 'right left up down pick drop',
}

MARIO_HEADER = {
    'name': 'mario',
    'registry': 'mario ground pipe hole enemy block flag',
    'actions': 'right left jump noop',
}


def make_layout(header, grid):
    lines = ['%s: %s' % item for item in sorted(header.items())]
    return parse_layout('\n'.join(lines + ['---'] + list(grid)))


class BaseTest(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.mkdtemp(prefix='iota-rl-')
        self.addCleanup(shutil.rmtree, self.tmp, True)

    def path(self, *parts):
        return os.path.join(self.tmp, *parts)

    def write(self, name, text):
        path = self.path(name)
        with open(path, 'w', encoding='utf-8') as f:
            f.write(text)
        return path

    def tiny_config(self, **kwargs):
        params = dict(batch_size=8, target_sync=10, hidden=(16, 16),
                      stream_hidden=8, buffer_size=1000, steps_per_epoch=20,
                      eval_max_steps=50, learning_rate=1e-3)
        params.update(kwargs)
        return AgentConfig(**params)

    def tiny_spec(self, **kwargs):
        params = dict(env='taxidriver', stage='2', agents=('IDQN', 'DQN'),
                      seeds=(0, 1, 2), epochs=2, steps_per_epoch=10,
                      max_steps=50, eval_max_steps=20, batch_size=4,
                      target_sync=5, hidden=(8, 8), stream_hidden=4,
                      buffer_size=100, output_dir=self.path('results'))
        params.update(kwargs)
        return ExperimentSpec(**params)
