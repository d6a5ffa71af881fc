"""
Contextual key frames (CKF).

A frame's semantic elements are rasterized into a grid sized by the main
element's cell. Every occupied cell holds a token whose decimal digit bands
carry, from left to right: the element key, the horizontal sub-cell offset,
the vertical sub-cell offset and the movement direction.

Tokens are kept as exact scaled integers (``code``); a token's real value is
``code / (10000 * mu)``, so the key band always sits in the first one (mu=10)
or two (mu=100) decimals.
"""

import enum
import logging
import math
from dataclasses import dataclass

import numpy as np

from iota_rl import IotaError

log = logging.getLogger(__name__)

KEY_UNIT = 10000
COL_UNIT = 1000
ROW_UNIT = 100
DIR_UNIT = 10

MAIN_INDEX = 1
MAX_ELEMENTS = 100


class CkfError(IotaError, ValueError):
    pass


class Direction(enum.Enum):
    RIGHT = 1
    UP_RIGHT = 2
    UP = 3
    UP_LEFT = 4
    LEFT = 5
    DOWN_LEFT = 6
    DOWN = 7
    DOWN_RIGHT = 8

    @classmethod
    def parse(cls, value):
        """ Accept a Direction, an arrow, an ASCII name or None """
        if value is None or isinstance(value, cls):
            return value
        if value in ARROWS:
            return cls(ARROWS.index(value) + 1)
        try:
            return cls[str(value).upper().replace('-', '_')]
        except KeyError:
            raise CkfError('unknown direction: %r' % (value,))

    @classmethod
    def from_motion(cls, dx, dy):
        """ Compass direction of a displacement, y growing upward """
        sx = (dx > 0) - (dx < 0)
        sy = (dy > 0) - (dy < 0)
        return _MOTION.get((sx, sy))


ARROWS = '→↗↑↖←↙↓↘'

_MOTION = {
    (1, 0): Direction.RIGHT,
    (1, 1): Direction.UP_RIGHT,
    (0, 1): Direction.UP,
    (-1, 1): Direction.UP_LEFT,
    (-1, 0): Direction.LEFT,
    (-1, -1): Direction.DOWN_LEFT,
    (0, -1): Direction.DOWN,
    (1, -1): Direction.DOWN_RIGHT,
}


def compute_mu(n_elements):
    """ Token range value: smallest power of ten above the element count """
    if not 1 <= n_elements < MAX_ELEMENTS:
        raise CkfError('element count must be in [1, %d), got %r'
                       % (MAX_ELEMENTS, n_elements))
    return 10 if n_elements <= 9 else 100


@dataclass(frozen=True)
class TokenParams:
    mu: int
    n_elements: int
    screen_w: float
    screen_h: float
    ref_w: float
    ref_h: float

    def __post_init__(self):
        if not 1 <= self.n_elements < MAX_ELEMENTS:
            raise CkfError('n_elements must be in [1, %d)' % MAX_ELEMENTS)
        if not 10 * self.n_elements >= self.mu > self.n_elements:
            raise CkfError('mu=%r does not fit %d elements'
                           % (self.mu, self.n_elements))
        if self.mu not in (10, 100):
            raise CkfError('mu must be 10 or 100, got %r' % (self.mu,))
        if self.ref_w <= 0 or self.ref_h <= 0:
            raise CkfError('reference cell must have a positive size')
        if self.screen_w <= 0 or self.screen_h <= 0:
            raise CkfError('screen must have a positive size')

    @classmethod
    def for_screen(cls, n_elements, screen_w, screen_h, ref_w=16, ref_h=16):
        return cls(compute_mu(n_elements), n_elements, screen_w, screen_h,
                   ref_w, ref_h)

    @property
    def rows(self):
        return math.ceil(self.screen_h / self.ref_h)

    @property
    def cols(self):
        return math.ceil(self.screen_w / self.ref_w)

    @property
    def scale(self):
        return KEY_UNIT * self.mu

    @property
    def decimals(self):
        return 5 if self.mu == 10 else 6


@dataclass(frozen=True)
class SemanticElement:
    index: int
    name: str
    x: float
    y: float
    w: float
    h: float
    direction: Direction = None

    def __post_init__(self):
        if self.index < 1:
            raise CkfError('element index must be positive: %r' % self.index)
        if self.w <= 0 or self.h <= 0:
            raise CkfError('%s has a non-positive size' % self.name)
        if self.x < 0 or self.y < 0:
            raise CkfError('%s has negative coordinates' % self.name)
        object.__setattr__(self, 'direction',
                           Direction.parse(self.direction))

    @property
    def is_main(self):
        return self.index == MAIN_INDEX


@dataclass(frozen=True)
class Token:
    code: int
    mu: int

    @property
    def value(self):
        return self.code / (KEY_UNIT * self.mu)

    def bands(self):
        """ (key index, column digit, row digit, direction digit) """
        index, rest = divmod(self.code, KEY_UNIT)
        col, rest = divmod(rest, COL_UNIT)
        row, rest = divmod(rest, ROW_UNIT)
        return index, col, row, rest // DIR_UNIT

    @property
    def key(self):
        return (self.code // KEY_UNIT) / self.mu

    def __float__(self):
        return self.value


def element_key(index, mu):
    if not 1 <= index < mu:
        raise CkfError('index %r does not fit mu=%r' % (index, mu))
    return index / mu


def _split(pos, cell):
    """ Whole cells and first decimal digit of the remainder """
    whole = int(pos // cell)
    digit = int(10 * (pos - whole * cell) // cell)
    return whole, min(digit, 9)


def _grid_digits(x, y, params):
    if not 0 <= x <= params.screen_w or not 0 <= y <= params.screen_h:
        raise CkfError('position (%r, %r) is outside the %rx%r screen'
                       % (x, y, params.screen_w, params.screen_h))
    u, col = _split(x, params.ref_w)
    v, row = _split(y, params.ref_h)
    # the far screen edge belongs to the last cell
    if u >= params.cols:
        u, col = params.cols - 1, 9
    if v >= params.rows:
        v, row = params.rows - 1, 9
    return u, v, col, row


def grid_position(x, y, params):
    """ Returns (u, v, a, b): cell column, cell row and sub-cell bands """
    u, v, col, row = _grid_digits(x, y, params)
    return u, v, col / (10 * params.mu), row / (100 * params.mu)


def direction_value(direction, mu):
    direction = Direction.parse(direction)
    if direction is None:
        return 0.0
    return direction.value / (1000 * mu)


def relative_size(w, h, params, index=None):
    """ Element size in cells of the main element """
    if w <= 0 or h <= 0:
        raise CkfError('size must be positive, got %rx%r' % (w, h))
    if index == MAIN_INDEX:
        return 1, 1
    return math.ceil(w / params.ref_w), math.ceil(h / params.ref_h)


def pack_token(k, a, b, d, mu):
    """ Build a token from real band values (k, a, b, d) """
    index = round(k * mu)
    col = round(a * 10 * mu)
    row = round(b * 100 * mu)
    direction = round(d * 1000 * mu)
    if not 0 <= index < mu or not 0 <= col <= 9 or not 0 <= row <= 9 \
            or not 0 <= direction <= 8:
        raise CkfError('bands out of range: %r' % ((k, a, b, d),))
    code = index * KEY_UNIT + col * COL_UNIT + row * ROW_UNIT \
        + direction * DIR_UNIT
    return Token(code, mu)


def tokenize_element(e, params):
    if e.index >= params.mu:
        raise CkfError('%s index %d does not fit mu=%d'
                       % (e.name, e.index, params.mu))
    u, v, col, row = _grid_digits(e.x, e.y, params)
    direction = e.direction.value if e.direction else 0
    code = e.index * KEY_UNIT + col * COL_UNIT + row * ROW_UNIT \
        + direction * DIR_UNIT
    return Token(code, params.mu)


def _code_of(t, mu):
    if isinstance(t, Token):
        return t.code
    return int(round(float(t) * KEY_UNIT * mu))


def decode_key(t, mu):
    return (_code_of(t, mu) // KEY_UNIT) / mu


def decode_token(t, mu):
    """ Inverse of pack_token: (k, a, b, d) as reals """
    index, col, row, direction = Token(_code_of(t, mu), mu).bands()
    return (index / mu, col / (10 * mu), row / (100 * mu),
            direction / (1000 * mu))


class Ckf(object):
    """ An immutable rows x cols grid of token codes """

    def __init__(self, codes, mu):
        codes = np.array(codes, dtype=np.int64)
        if codes.ndim != 2:
            raise CkfError('a CKF is two dimensional')
        codes.flags.writeable = False
        self.codes = codes
        self.mu = mu

    @property
    def rows(self):
        return self.codes.shape[0]

    @property
    def cols(self):
        return self.codes.shape[1]

    @property
    def shape(self):
        return self.codes.shape

    @property
    def scale(self):
        return KEY_UNIT * self.mu

    @property
    def values(self):
        return self.codes / self.scale

    @property
    def keys(self):
        """ Key index of every cell (0 = empty) """
        return self.codes // KEY_UNIT

    def flatten(self):
        return self.values.ravel()

    def cell(self, row, col):
        return Token(int(self.codes[row, col]), self.mu)

    def main_position(self):
        """ (u, v) of the main element, first match in row-major order """
        found = np.argwhere(self.keys == MAIN_INDEX)
        if not len(found):
            raise CkfError('main element not found in CKF')
        v, u = found[0]
        return int(u), int(v)

    def __eq__(self, other):
        if not isinstance(other, Ckf):
            return NotImplemented
        return self.mu == other.mu and np.array_equal(self.codes,
                                                      other.codes)

    def __hash__(self):
        return hash((self.mu, self.codes.shape, self.codes.tobytes()))

    def __repr__(self):
        return '<Ckf %dx%d mu=%d>' % (self.rows, self.cols, self.mu)


def _check_frame(frame):
    elements = list(frame)
    if not elements:
        raise CkfError('frame has no elements')
    mains = sum(1 for e in elements if e.is_main)
    if mains != 1:
        raise CkfError('frame must hold exactly one main element, found %d'
                       % mains)
    return elements


def build_ckf(frame, params, include_main=True):
    """ Rasterize a frame: ascending index order, the main element last """
    elements = _check_frame(frame)
    codes = np.zeros((params.rows, params.cols), dtype=np.int64)
    others = sorted((e for e in elements if not e.is_main),
                    key=lambda e: e.index)
    order = others
    if include_main:
        order = others + [e for e in elements if e.is_main]

    for e in order:
        token = tokenize_element(e, params)
        u, v, _, _ = _grid_digits(e.x, e.y, params)
        w_cells, h_cells = relative_size(e.w, e.h, params, e.index)
        r0, r1 = min(v, params.rows), min(v + h_cells, params.rows)
        c0, c1 = min(u, params.cols), min(u + w_cells, params.cols)
        codes[r0:r1, c0:c1] = token.code
    return Ckf(codes, params.mu)


def build_underlay(frame, params):
    """ The frame rasterized without its main element """
    return build_ckf(frame, params, include_main=False)


def format_ckf(ckf, top_down=False):
    """ Fixed-width text, one grid row per line """
    decimals = 5 if ckf.mu == 10 else 6
    fmt = '%.' + str(decimals) + 'f'
    rows = ckf.values
    if top_down:
        rows = rows[::-1]
    return '\n'.join(' '.join(fmt % c for c in row) for row in rows)
