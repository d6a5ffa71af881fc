import logging

from iota_rl.ckf import Direction
from iota_rl.envs.base import Environment, runs, NONE, WIN, LOSE

log = logging.getLogger(__name__)


class Mario(Environment):
    """ Walk right to the flag, jumping over holes, pipes and enemies

    Mario moves one column per tick. A jump rises `jump_rise` cells then
    gravity pulls one cell per tick. Enemies patrol the walking row,
    moving once every other tick and turning at walls and hole edges.
    """

    name = 'mario'
    reward_codomain = frozenset((10, -10, 1, 0))

    def _reset(self):
        lay = self.layout
        self.rise_max = int(lay.header.get('jump_rise', 3))
        self.ground = lay.cells('#')
        self.pipes = lay.cells('P')
        self.blocks = lay.cells('B')
        self.solid = set(self.ground) | set(self.pipes) | set(self.blocks)
        self.hole_cells = lay.cells('H')
        self.holes = set()
        for c, r in self.hole_cells:
            self.holes.update(((c, r), (c, r + 1)))
        self.col, self.row = lay.cells('M')[0]
        self.flag = lay.cells('F')[0]
        self.best = self.col
        self.rise = 0
        self.direction = None
        self.enemies = [[c, r, int(self.rng.choice((-1, 1)))]
                        for c, r in lay.cells('E')]
        self.enemy_phase = int(self.rng.integers(2))
        self.static = self._static_elements()

    def _static_elements(self):
        out = []
        for c, r, n in runs(self.ground, 'h'):
            out.append(self.element('ground', c, r, w=n))
        for c, r, n in runs(self.pipes, 'v'):
            out.append(self.element('pipe', c, r, h=n))
        for c, r, n in runs(self.hole_cells, 'h'):
            out.append(self.element('hole', c, r, w=n, h=2))
        for c, r, n in runs(self.blocks, 'h'):
            out.append(self.element('block', c, r, w=n))
        out.append(self.element('flag', *self.flag))
        return out

    def free(self, col, row):
        return self.in_grid(col, row) and (col, row) not in self.solid

    def on_ground(self):
        return (self.col, self.row - 1) in self.solid

    def _step(self, action):
        name = self.actions[action]
        prev = (self.col, self.row)
        dx = {'right': 1, 'left': -1}.get(name, 0)

        if name == 'jump' and self.on_ground():
            self.rise = self.rise_max
        if dx and self.free(self.col + dx, self.row):
            self.col += dx
        if self.rise > 0:
            if self.free(self.col, self.row + 1):
                self.row += 1
                self.rise -= 1
            else:
                self.rise = 0
        elif not self.on_ground() and self.row > 0:
            self.row -= 1
        self.direction = self.motion(self.col - prev[0], self.row - prev[1])

        if (self.col, self.row) in self.holes:
            log.debug('mario fell at column %d', self.col)
            return -10, LOSE
        if self._touches_enemy(prev):
            return -10, LOSE
        if self.steps % 2 == self.enemy_phase:
            moved = self._move_enemies()
            if self._touches_enemy(prev, moved):
                return -10, LOSE

        if self.col >= self.flag[0]:
            return 10, WIN
        if self.col > self.best:
            self.best = self.col
            return 1, NONE
        return 0, NONE

    def _touches_enemy(self, prev, before=None):
        here = (self.col, self.row)
        for i, (c, r, _) in enumerate(self.enemies):
            if (c, r) == here:
                return True
            if before is not None and before[i] == here and (c, r) == prev:
                return True
        return False

    def _enemy_can_walk(self, col, row):
        return (self.free(col, row) and (col, row) not in self.holes
                and (col, row - 1) in self.solid)

    def _move_enemies(self):
        before = [(c, r) for c, r, _ in self.enemies]
        for enemy in self.enemies:
            c, r, d = enemy
            if not self._enemy_can_walk(c + d, r):
                d = -d
            if self._enemy_can_walk(c + d, r):
                c += d
            enemy[:] = [c, r, d]
        return before

    def _elements(self):
        out = [self.element('mario', self.col, self.row,
                            direction=self.direction)]
        out.extend(self.static)
        for c, r, d in self.enemies:
            out.append(self.element('enemy', c, r, direction=Direction.RIGHT
                                    if d > 0 else Direction.LEFT))
        return out
