import logging
import math

from iota_rl.envs.base import Environment, LayoutError, NONE, WIN, LOSE

log = logging.getLogger(__name__)

MOVES = {
    'right': (1, 0),
    'left': (-1, 0),
    'up': (0, 1),
    'down': (0, -1),
}


def elbow_position(base, tip, l1, l2):
    """ Elbow joint of a two-link arm reaching tip, elbow kept high

    Returns ((x, y), (theta1, theta2)).
    """
    dx, dy = tip[0] - base[0], tip[1] - base[1]
    d2 = dx * dx + dy * dy
    c2 = max(-1.0, min(1.0, (d2 - l1 * l1 - l2 * l2) / (2 * l1 * l2)))
    best = None
    for t2 in (math.acos(c2), -math.acos(c2)):
        t1 = math.atan2(dy, dx) - math.atan2(l2 * math.sin(t2),
                                             l1 + l2 * math.cos(t2))
        elbow = (base[0] + l1 * math.cos(t1), base[1] + l1 * math.sin(t1))
        if best is None or elbow[1] > best[0][1]:
            best = (elbow, (t1, t2))
    return best


class ScaraRobot(Environment):
    """ Planar two-link arm moving an object onto a target

    The end effector moves `move_px` pixels per action and must stay inside
    the annulus the links can reach. Touching an obstacle cell ends the
    episode. The elbow is recomputed from the effector position.
    """

    name = 'scararobot'
    reward_codomain = frozenset((10, 1, 0))

    def __init__(self, layout=None, max_steps=None):
        super().__init__(layout, max_steps)
        links = self.layout.ints('links') or [64, 56]
        if len(links) != 2 or min(links) <= 0:
            raise LayoutError('links must be two positive lengths')
        self.l1, self.l2 = links
        self.step_px = int(self.layout.header.get('move_px', 8))
        cell = self.layout.cell
        bc, br = self.layout.cells('S')[0]
        self.base_cell = (bc, br)
        self.base = (bc * cell + cell / 2, br * cell + cell / 2)

    def center(self, x, y):
        half = self.layout.cell / 2
        return x + half, y + half

    def reachable(self, x, y):
        lay = self.layout
        if not (0 <= x <= lay.screen_w - lay.cell
                and 0 <= y <= lay.screen_h - lay.cell):
            return False
        cx, cy = self.center(x, y)
        d = math.hypot(cx - self.base[0], cy - self.base[1])
        return abs(self.l1 - self.l2) <= d <= self.l1 + self.l2

    def _reset(self):
        lay = self.layout
        cell = lay.cell
        self.obstacles = set(lay.cells('#'))
        col, row = lay.cells('E')[0]
        self.x, self.y = col * cell, row * cell
        objects = lay.cells('o')
        targets = lay.cells('t')
        self.object = objects[self.rng.integers(len(objects))]
        self.target = targets[self.rng.integers(len(targets))]
        self.holding = False
        self.direction = None
        self.static = [self.element('obstacle', c, r)
                       for c, r in sorted(self.obstacles)]
        self.static.append(self.element('base', *self.base_cell))

    @property
    def cell(self):
        return int(self.x // self.layout.cell), int(self.y // self.layout.cell)

    @property
    def goal(self):
        return self.target if self.holding else self.object

    def goal_distance(self):
        cell = self.layout.cell
        gx, gy = self.center(self.goal[0] * cell, self.goal[1] * cell)
        cx, cy = self.center(self.x, self.y)
        return math.hypot(gx - cx, gy - cy)

    @property
    def elbow(self):
        point, _ = elbow_position(self.base, self.center(self.x, self.y),
                                  self.l1, self.l2)
        return point

    def _step(self, action):
        name = self.actions[action]
        self.direction = None
        if name in MOVES:
            dx, dy = MOVES[name]
            x, y = self.x + dx * self.step_px, self.y + dy * self.step_px
            if not self.reachable(x, y) or \
                    (int(x // self.layout.cell),
                     int(y // self.layout.cell)) == self.base_cell:
                return 0, NONE
            before = self.goal_distance()
            self.x, self.y = x, y
            self.direction = self.motion(dx, dy)
            if self.cell in self.obstacles:
                log.debug('effector hit an obstacle at %r', self.cell)
                return 0, LOSE
            return (1 if self.goal_distance() < before else 0), NONE
        if name == 'pick':
            if not self.holding and self.cell == self.object:
                self.holding = True
                return 10, NONE
            return 0, NONE
        if self.holding and self.cell == self.target:
            self.holding = False
            self.object = self.target
            return 10, WIN
        return 0, NONE

    def _elements(self):
        lay = self.layout
        out = [self.element_px('effector', self.x, self.y,
                               direction=self.direction)]
        out.extend(self.static)
        ex, ey = self.elbow
        half = lay.cell / 2
        ex = max(0, min(ex - half, lay.screen_w - lay.cell))
        ey = max(0, min(ey - half, lay.screen_h - lay.cell))
        out.append(self.element_px('elbow', ex, ey))
        if not self.holding:
            out.append(self.element('object', *self.object))
        out.append(self.element('target', *self.target))
        return out
