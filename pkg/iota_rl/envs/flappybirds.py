import logging

from iota_rl.ckf import Direction
from iota_rl.envs.base import Environment, LayoutError, NONE, WIN, LOSE

log = logging.getLogger(__name__)


class FlappyBirds(Environment):
    """ Keep the bird inside the pipe gaps

    The bird sits on a fixed column and moves in pixels: `fly` lifts it
    more than `fall` drops it. Pipe pairs scroll left; each pair leaves a
    gap of `gap_rows` rows whose bottom row comes from the layout's `gaps`
    sequence, starting at a seed-chosen offset. Contacts are decided on
    the bird's anchor cell.
    """

    name = 'flappybirds'
    reward_codomain = frozenset((10, -10, 1, 0))

    def __init__(self, layout=None, max_steps=None):
        super().__init__(layout, max_steps)
        head = self.layout.header
        self.fly_px = int(head.get('fly_px', 12))
        self.fall_px = int(head.get('fall_px', 4))
        self.scroll_px = int(head.get('scroll_px', 2))
        self.gap_rows = int(head.get('gap_rows', 3))
        self.spacing_px = int(head.get('pipe_spacing', 6)) * self.layout.cell
        self.goal_pipes = int(head.get('goal_pipes', 10))
        self.gaps = self.layout.ints('gaps')
        top = self.layout.rows - 1
        for g in self.gaps:
            if not 2 <= g or g + self.gap_rows > top - 1:
                raise LayoutError('gap row %d leaves no room for a pipe' % g)
        if not self.gaps:
            raise LayoutError('flappybirds layout needs a gaps sequence')

    def _reset(self):
        cell = self.layout.cell
        col, row = self.layout.cells('B')[0]
        self.x = col * cell
        self.y = row * cell
        self.direction = None
        self.offset = int(self.rng.integers(len(self.gaps)))
        self.spawned = 0
        self.passed = 0
        self.pipes = []
        self._spawn(self.spacing_px)

    def _spawn(self, x):
        gap = self.gaps[(self.offset + self.spawned) % len(self.gaps)]
        self.pipes.append({'x': x, 'gap': gap, 'passed': False})
        self.spawned += 1

    @property
    def bird_cell(self):
        cell = self.layout.cell
        return int(self.x // cell), int(self.y // cell)

    def _scroll(self):
        for p in self.pipes:
            p['x'] -= self.scroll_px
        self.pipes = [p for p in self.pipes if p['x'] >= 0]
        last = self.layout.screen_w - self.layout.cell
        while not self.pipes or self.pipes[-1]['x'] + self.spacing_px <= last:
            start = self.pipes[-1]['x'] + self.spacing_px if self.pipes \
                else last
            self._spawn(start)

    def _crashed(self):
        col, row = self.bird_cell
        if row <= 0 or row >= self.layout.rows - 1:
            return True
        for p in self.pipes:
            if int(p['x'] // self.layout.cell) == col and \
                    not p['gap'] <= row < p['gap'] + self.gap_rows:
                return True
        return False

    def _step(self, action):
        dy = self.fly_px if self.actions[action] == 'fly' else -self.fall_px
        self.y = max(0, min(self.y + dy, self.layout.screen_h - 1))
        self.direction = self.motion(0, dy)
        self._scroll()

        if self._crashed():
            log.debug('bird crashed at %r after %d pipes', self.bird_cell,
                      self.passed)
            return -10, LOSE

        col, _ = self.bird_cell
        reward = 0
        for p in self.pipes:
            if not p['passed'] and p['x'] // self.layout.cell < col:
                p['passed'] = True
                self.passed += 1
                reward = 1
        if self.passed >= self.goal_pipes:
            return 10, WIN
        return reward, NONE

    def _elements(self):
        cell = self.layout.cell
        top = self.layout.rows - 1
        w = self.layout.screen_w
        out = [self.element_px('bird', self.x, self.y,
                               direction=self.direction),
               self.element_px('ceiling', 0, top * cell, w=w),
               self.element_px('floor', 0, 0, w=w)]
        for p in self.pipes:
            g = p['gap']
            out.append(self.element_px('pipe_down', p['x'], cell,
                                       h=(g - 1) * cell,
                                       direction=Direction.LEFT))
            upper = g + self.gap_rows
            out.append(self.element_px('pipe_up', p['x'], upper * cell,
                                       h=(top - upper) * cell,
                                       direction=Direction.LEFT))
        return out
