import logging

from iota_rl.envs.base import Environment, runs, NONE, WIN, LOSE

log = logging.getLogger(__name__)

MOVES = {
    'right': (1, 0),
    'left': (-1, 0),
    'up': (0, 1),
    'down': (0, -1),
}


class Pacman(Environment):
    """ Eat every pellet in the maze while avoiding the ghosts

    Walls stop Pacman in place. Ghosts move every `ghost_period` ticks,
    keep their heading in corridors and pick a new one at junctions or
    dead ends.
    """

    name = 'pacman'
    reward_codomain = frozenset((10, -10, 1, 0))

    def _reset(self):
        lay = self.layout
        self.period = int(lay.header.get('ghost_period', 2))
        self.walls = set(lay.cells('#'))
        self.pellets = set(lay.cells('o'))
        self.pos = lay.cells('C')[0]
        self.direction = None
        self.ghosts = []
        for cell in lay.cells('G'):
            options = self._open_moves(cell)
            self.ghosts.append([cell, options[self.rng.integers(len(options))]])
        self.static = [self.element('wall', c, r, w=n)
                       for c, r, n in runs(self.walls, 'h')]

    def _open_moves(self, cell):
        c, r = cell
        return [m for m in MOVES.values()
                if self.in_grid(c + m[0], r + m[1])
                and (c + m[0], r + m[1]) not in self.walls]

    def _ghost_heading(self, cell, heading):
        options = self._open_moves(cell)
        back = (-heading[0], -heading[1])
        forward = [m for m in options if m != back]
        if not forward:
            return back
        if heading in forward and len(forward) == 1:
            return heading
        return forward[self.rng.integers(len(forward))]

    def _move_ghosts(self):
        for ghost in self.ghosts:
            (c, r), heading = ghost
            heading = self._ghost_heading((c, r), heading)
            ghost[:] = [(c + heading[0], r + heading[1]), heading]

    def _step(self, action):
        dx, dy = MOVES[self.actions[action]]
        prev = self.pos
        target = (prev[0] + dx, prev[1] + dy)
        if self.in_grid(*target) and target not in self.walls:
            self.pos = target
        self.direction = self.motion(self.pos[0] - prev[0],
                                     self.pos[1] - prev[1])

        if any(g[0] == self.pos for g in self.ghosts):
            return -10, LOSE
        if self.steps % self.period == 0:
            before = [g[0] for g in self.ghosts]
            self._move_ghosts()
            for old, (new, _) in zip(before, self.ghosts):
                if new == self.pos or (old == self.pos and new == prev):
                    log.debug('pacman caught at %r', self.pos)
                    return -10, LOSE

        if self.pos in self.pellets:
            self.pellets.discard(self.pos)
            if not self.pellets:
                return 10, WIN
            return 1, NONE
        return 0, NONE

    def _elements(self):
        out = [self.element('pacman', *self.pos, direction=self.direction)]
        out.extend(self.static)
        for (c, r), heading in self.ghosts:
            out.append(self.element('ghost', c, r,
                                    direction=self.motion(*heading)))
        for c, r in sorted(self.pellets):
            out.append(self.element('pellet', c, r))
        return out
