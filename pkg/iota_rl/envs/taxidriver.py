import logging

from iota_rl.envs.base import Environment, runs, NONE, WIN, LOSE

log = logging.getLogger(__name__)

MOVES = {
    'right': (1, 0),
    'left': (-1, 0),
    'up': (0, 1),
    'down': (0, -1),
}


class TaxiDriver(Environment):
    """ Pick the passenger up and drop them at the destination

    The seed places the taxi on a free cell and draws the passenger and
    destination from two different landmarks. Driving into a wall wrecks
    the taxi and ends the episode.
    """

    name = 'taxidriver'
    reward_codomain = frozenset((10, 0))

    def _reset(self):
        lay = self.layout
        self.walls = set(lay.cells('#'))
        landmarks = lay.cells('L')
        starts = lay.cells('.')
        self.pos = starts[self.rng.integers(len(starts))]
        p, d = self.rng.choice(len(landmarks), size=2, replace=False)
        self.passenger = landmarks[p]
        self.destination = landmarks[d]
        self.carrying = False
        self.direction = None
        self.static = [self.element('wall', c, r, w=n)
                       for c, r, n in runs(self.walls, 'h')]

    def _step(self, action):
        name = self.actions[action]
        self.direction = None
        if name in MOVES:
            dx, dy = MOVES[name]
            target = (self.pos[0] + dx, self.pos[1] + dy)
            self.direction = self.motion(dx, dy)
            if target in self.walls or not self.in_grid(*target):
                log.debug('taxi hit a wall at %r', target)
                return 0, LOSE
            self.pos = target
            return 0, NONE
        if name == 'pick':
            if not self.carrying and self.pos == self.passenger:
                self.carrying = True
                return 10, NONE
            return 0, NONE
        if self.carrying and self.pos == self.destination:
            self.carrying = False
            return 10, WIN
        return 0, NONE

    def _elements(self):
        out = [self.element('taxi', *self.pos, direction=self.direction)]
        out.extend(self.static)
        if not self.carrying:
            out.append(self.element('passenger', *self.passenger))
        out.append(self.element('destination', *self.destination))
        return out
