import logging
import os
from dataclasses import dataclass

import numpy as np

from iota_rl import IotaError
from iota_rl.ckf import (
    SemanticElement, TokenParams, Direction,
    build_ckf, build_underlay, element_key,
)

log = logging.getLogger(__name__)

here = os.path.dirname(__file__)
LAYOUT_DIR = os.path.join(here, 'layouts')
RULES_DIR = os.path.join(os.path.dirname(here), 'rules')

MAX_STEPS = 3000
CELL = 16

WIN = 'win'
LOSE = 'lose'
TIMEOUT = 'timeout'
NONE = 'none'


class EnvError(IotaError):
    pass


class EnvStateError(EnvError):
    pass


class LayoutError(EnvError):
    pass


@dataclass(frozen=True)
class EnvFrame:
    elements: tuple
    screen_w: int
    screen_h: int
    registry: dict
    y_axis: str

    @property
    def main(self):
        return next(e for e in self.elements if e.is_main)


@dataclass(frozen=True)
class StepResult:
    frame: EnvFrame
    reward: float
    terminal: bool
    terminal_kind: str


class Layout(object):
    """ A text-grid map with a `key: value` header

    Grid rows are stored bottom-up when the header declares `y_axis: up`,
    so that ``char_at(col, row)`` uses the same row numbers as the CKF.
    """

    def __init__(self, header, lines, path=None):
        self.header = header
        self.path = path
        widths = set(len(line) for line in lines)
        if not lines or len(widths) != 1:
            raise LayoutError('%s: grid rows must be non-empty and of equal '
                              'width' % (path or 'layout'))
        self.y_axis = header.get('y_axis', 'up')
        if self.y_axis not in ('up', 'down'):
            raise LayoutError('y_axis must be up or down')
        self.grid = list(reversed(lines)) if self.y_axis == 'up' \
            else list(lines)
        self.cell = int(header.get('cell', CELL))
        for key, size in (('screen_w', self.screen_w),
                          ('screen_h', self.screen_h)):
            if key in header and int(header[key]) != size:
                raise LayoutError('%s=%s does not match the grid (%d)'
                                  % (key, header[key], size))

    @property
    def name(self):
        return self.header.get('name')

    @property
    def rows(self):
        return len(self.grid)

    @property
    def cols(self):
        return len(self.grid[0])

    @property
    def screen_w(self):
        return self.cols * self.cell

    @property
    def screen_h(self):
        return self.rows * self.cell

    @property
    def registry(self):
        return self.header.get('registry', '').split()

    @property
    def actions(self):
        return self.header.get('actions', '').split()

    @property
    def max_steps(self):
        return int(self.header.get('max_steps', MAX_STEPS))

    def ints(self, key):
        return [int(v) for v in self.header.get(key, '').split()]

    def char_at(self, col, row):
        return self.grid[row][col]

    def cells(self, chars):
        """ (col, row) of every cell holding one of chars """
        return [(c, r) for r in range(self.rows) for c in range(self.cols)
                if self.grid[r][c] in chars]


def parse_layout(text, path=None):
    header = {}
    lines = text.splitlines()
    try:
        sep = lines.index('---')
    except ValueError:
        raise LayoutError('%s: missing --- separator' % (path or 'layout'))
    for lineno, line in enumerate(lines[:sep], start=1):
        line = line.strip()
        if not line or line.startswith('#'):
            continue
        if ':' not in line:
            raise LayoutError('%s line %d: expected key: value'
                              % (path or 'layout', lineno))
        key, value = line.split(':', 1)
        header[key.strip()] = value.strip()
    grid = [line.rstrip('\n') for line in lines[sep + 1:] if line.strip()]
    return Layout(header, grid, path)


def layout_path(name):
    return os.path.join(LAYOUT_DIR, name + '.txt')


def rules_path(name):
    return os.path.join(RULES_DIR, name + '.rules')


def load_layout(path):
    with open(path, 'r', encoding='utf-8') as f:
        return parse_layout(f.read(), path)


class Environment(object):
    """
    Game interface.

    Subclasses set `name` and `reward_codomain` and implement:
    - _reset(): lay the level out, using self.rng
    - _step(action): advance one tick, return (reward, terminal_kind)
    - _elements(): the SemanticElements currently visible, main first
    """

    name = None
    reward_codomain = frozenset()

    def __init__(self, layout=None, max_steps=None):
        if layout is None:
            layout = load_layout(layout_path(self.name))
        elif isinstance(layout, str):
            layout = load_layout(layout)
        self.layout = layout
        self.actions = tuple(layout.actions)
        self.element_names = tuple(layout.registry)
        if not self.actions or not self.element_names:
            raise LayoutError('%s layout must declare actions and registry'
                              % self.name)
        self.params = TokenParams.for_screen(
            len(self.element_names), layout.screen_w, layout.screen_h,
            layout.cell, layout.cell)
        self.index = {n: i + 1 for i, n in enumerate(self.element_names)}
        self.registry = {n: element_key(i, self.params.mu)
                         for n, i in self.index.items()}
        self.max_steps = max_steps or layout.max_steps
        self.steps = 0
        self.done = True
        self.terminal_kind = NONE
        self.rng = None

    @property
    def n_actions(self):
        return len(self.actions)

    @property
    def y_axis(self):
        return self.layout.y_axis

    def action_space(self):
        return len(self.actions), list(self.actions)

    def action_index(self, name):
        return self.actions.index(name)

    def reset(self, seed):
        self.rng = np.random.default_rng(seed)
        self.steps = 0
        self.done = False
        self.terminal_kind = NONE
        self._reset()
        log.debug('%s reset with seed %d', self.name, seed)
        return self.frame()

    def step(self, action):
        if self.done:
            raise EnvStateError('%s: step after terminal state (%s)'
                                % (self.name, self.terminal_kind))
        if not 0 <= action < self.n_actions:
            raise EnvError('%s: invalid action %r' % (self.name, action))
        reward, kind = self._step(int(action))
        self.steps += 1
        if kind == NONE and self.steps >= self.max_steps:
            kind = TIMEOUT
        self.terminal_kind = kind
        self.done = kind != NONE
        return StepResult(self.frame(), reward, self.done, kind)

    def frame(self):
        return EnvFrame(tuple(self._elements()), self.layout.screen_w,
                        self.layout.screen_h, dict(self.registry),
                        self.layout.y_axis)

    def observe(self):
        """ (ckf, underlay) of the current frame """
        elements = self._elements()
        return (build_ckf(elements, self.params),
                build_underlay(elements, self.params))

    def element(self, name, col, row, w=1, h=1, direction=None, dx=0, dy=0):
        """ Element anchored at a cell, sizes in cells, offsets in pixels """
        cell = self.layout.cell
        return SemanticElement(self.index[name], name,
                               col * cell + dx, row * cell + dy,
                               w * cell, h * cell, direction)

    def element_px(self, name, x, y, w=None, h=None, direction=None):
        cell = self.layout.cell
        return SemanticElement(self.index[name], name, x, y,
                               w or cell, h or cell, direction)

    @staticmethod
    def motion(dx, dy):
        return Direction.from_motion(dx, dy)

    def in_grid(self, col, row):
        return 0 <= col < self.layout.cols and 0 <= row < self.layout.rows

    def _reset(self):
        raise NotImplementedError()

    def _step(self, action):
        raise NotImplementedError()

    def _elements(self):
        raise NotImplementedError()


def runs(cells, axis):
    """ Merge (col, row) cells into runs along axis ('h' or 'v')

    Returns (col, row, length) for every maximal run.
    """
    cells = set(cells)
    out = []
    for col, row in sorted(cells, key=lambda c: (c[1], c[0])
                           if axis == 'h' else c):
        prev = (col - 1, row) if axis == 'h' else (col, row - 1)
        if prev in cells:
            continue
        length = 1
        while ((col + length, row) if axis == 'h'
               else (col, row + length)) in cells:
            length += 1
        out.append((col, row, length))
    return out
