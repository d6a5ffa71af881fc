"""
Fully-connected Q network on numpy.

Row-vector convention: a batch is (B, n_in), a layer computes X @ W + b.
The trunk is a stack of rectified layers; the head is either one linear
layer (Q stream) or two streams, value and advantage, aggregated as
q = v + adv - mean(adv).
"""

import logging
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from iota_rl import IotaError

log = logging.getLogger(__name__)

HIDDEN = (128, 128)
STREAM_HIDDEN = 64


class NetworkError(IotaError):
    pass


class NonFiniteError(NetworkError):
    def __init__(self, where, tensors):
        self.report = {}
        for name, t in tensors.items():
            bad = ~np.isfinite(t)
            if bad.any():
                finite = t[~bad]
                self.report[name] = (int(bad.sum()),
                                     float(np.linalg.norm(finite)))
        details = ', '.join('%s: %d non-finite, finite norm %.4g' % (n, c, f)
                            for n, (c, f) in sorted(self.report.items()))
        super().__init__('non-finite values in %s (%s)' % (where, details))


def relu(x):
    return np.maximum(x, 0.0)


def relu_grad(z):
    return (z > 0).astype(z.dtype)


def huber(residual):
    r = np.abs(residual)
    return np.where(r <= 1.0, 0.5 * residual * residual, r - 0.5)


def huber_grad(residual):
    return np.clip(residual, -1.0, 1.0)


def squared(residual):
    return 0.5 * residual * residual


def squared_grad(residual):
    return residual


LOSSES = {
    'huber': (huber, huber_grad),
    'squared': (squared, squared_grad),
}


def check_finite(where, tensors):
    if not all(np.all(np.isfinite(t)) for t in tensors.values()):
        raise NonFiniteError(where, tensors)


@dataclass
class Forward:
    q: np.ndarray
    v: np.ndarray = None
    adv: np.ndarray = None
    cache: dict = None


class Network(object):
    """ Q network with parameters in an ordered name -> array mapping """

    def __init__(self, n_in, n_actions, dueling=False, hidden=HIDDEN,
                 stream_hidden=STREAM_HIDDEN, seed=0, params=None):
        if n_in < 1 or n_actions < 1:
            raise NetworkError('network needs positive input and output sizes')
        self.n_in = int(n_in)
        self.n_actions = int(n_actions)
        self.dueling = bool(dueling)
        self.hidden = tuple(int(h) for h in hidden)
        self.stream_hidden = int(stream_hidden)
        if params is None:
            params = self._init(np.random.default_rng(seed))
        self.params = OrderedDict((k, np.array(v, dtype=np.float64))
                                  for k, v in params.items())
        self._check_shapes()

    def shapes(self):
        out = OrderedDict()
        sizes = (self.n_in,) + self.hidden
        for i, (a, b) in enumerate(zip(sizes, sizes[1:])):
            out['trunk.%d.W' % i] = (a, b)
            out['trunk.%d.b' % i] = (b,)
        last = sizes[-1]
        if self.dueling:
            for stream, n_out in (('value', 1), ('adv', self.n_actions)):
                out[stream + '.0.W'] = (last, self.stream_hidden)
                out[stream + '.0.b'] = (self.stream_hidden,)
                out[stream + '.1.W'] = (self.stream_hidden, n_out)
                out[stream + '.1.b'] = (n_out,)
        else:
            out['head.W'] = (last, self.n_actions)
            out['head.b'] = (self.n_actions,)
        return out

    def _init(self, rng):
        """ Uniform fan-in scaling: U(-1/sqrt(fan_in), 1/sqrt(fan_in)) """
        params = OrderedDict()
        fan_in = None
        for name, shape in self.shapes().items():
            if name.endswith('.W'):
                fan_in = shape[0]
            bound = 1.0 / np.sqrt(fan_in)
            params[name] = rng.uniform(-bound, bound, size=shape)
        return params

    def _check_shapes(self):
        expected = self.shapes()
        if list(expected) != list(self.params):
            raise NetworkError('parameter names do not match the architecture')
        for name, shape in expected.items():
            if self.params[name].shape != shape:
                raise NetworkError('%s has shape %r, expected %r'
                                   % (name, self.params[name].shape, shape))

    @property
    def n_params(self):
        return sum(p.size for p in self.params.values())

    def copy(self):
        return Network(self.n_in, self.n_actions, self.dueling, self.hidden,
                       self.stream_hidden,
                       params=OrderedDict((k, v.copy())
                                          for k, v in self.params.items()))

    def load_params(self, other):
        for name, value in other.params.items():
            np.copyto(self.params[name], value)

    def _inputs(self, states):
        x = np.asarray(states, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise NetworkError('input of shape %r does not match %d inputs'
                               % (np.shape(states), self.n_in))
        return x

    def _dense(self, prefix, x, cache, activate=True):
        z = x @ self.params[prefix + '.W'] + self.params[prefix + '.b']
        cache[prefix] = (x, z)
        return relu(z) if activate else z

    def forward(self, states):
        """ Batched forward pass, keeping what backward() needs """
        cache = {}
        h = self._inputs(states)
        for i in range(len(self.hidden)):
            h = self._dense('trunk.%d' % i, h, cache)
        if not self.dueling:
            q = self._dense('head', h, cache, activate=False)
            return Forward(q, cache=cache)
        v = self._dense('value.1', self._dense('value.0', h, cache), cache,
                        activate=False)[:, 0]
        adv = self._dense('adv.1', self._dense('adv.0', h, cache), cache,
                          activate=False)
        q = v[:, None] + adv - adv.mean(axis=1, keepdims=True)
        return Forward(q, v, adv, cache)

    def _dense_back(self, prefix, dout, cache, grads, activated=True):
        x, z = cache[prefix]
        if activated:
            dout = dout * relu_grad(z)
        grads[prefix + '.W'] = x.T @ dout
        grads[prefix + '.b'] = dout.sum(axis=0)
        return dout @ self.params[prefix + '.W'].T

    def backward(self, fwd, dq):
        """ Gradients of every parameter given dL/dq of shape (B, n_a) """
        grads = OrderedDict()
        cache = fwd.cache
        if self.dueling:
            dv = dq.sum(axis=1, keepdims=True)
            dadv = dq - dq.mean(axis=1, keepdims=True)
            dh = self._dense_back('value.1', dv, cache, grads, False)
            dh = self._dense_back('value.0', dh, cache, grads)
            dh2 = self._dense_back('adv.1', dadv, cache, grads, False)
            dh = dh + self._dense_back('adv.0', dh2, cache, grads)
        else:
            dh = self._dense_back('head', dq, cache, grads, False)
        for i in reversed(range(len(self.hidden))):
            dh = self._dense_back('trunk.%d' % i, dh, cache, grads)
        return OrderedDict((k, grads[k]) for k in self.params)

    def __repr__(self):
        return '<Network %s %d->%s->%d>' % (
            'dueling' if self.dueling else 'single', self.n_in,
            'x'.join(str(h) for h in self.hidden), self.n_actions)


def forward_single(net, state):
    if net.dueling:
        raise NetworkError('forward_single needs a single-stream network')
    return net.forward(state).q[0]


def forward_dueling(net, state):
    """ Returns (v, adv, q) for one state """
    if not net.dueling:
        raise NetworkError('forward_dueling needs a dueling network')
    f = net.forward(state)
    return float(f.v[0]), f.adv[0], f.q[0]


def copy_weights(src):
    return src.copy()


@dataclass
class LossSpec:
    """ A mini-batch loss

    The TD residual is td_targets - Q(s, a) where a is td_index, or the
    greedy action when td_on_max is set. The affordance residual is
    aff_goals - max_a Q(s, a), weighted by aff_weight and zeroed where
    aff_active is false. Targets and goals are constants.
    """
    states: np.ndarray
    td_targets: np.ndarray
    td_index: np.ndarray = None
    td_on_max: bool = False
    aff_goals: np.ndarray = None
    aff_weight: float = 0.0
    aff_active: np.ndarray = None
    kind: str = 'huber'

    def __post_init__(self):
        if self.kind not in LOSSES:
            raise NetworkError('unknown loss kind %r' % self.kind)
        if self.td_index is None and not self.td_on_max:
            raise NetworkError('LossSpec needs td_index or td_on_max')
        if self.aff_weight < 0:
            raise NetworkError('affordance weight must be non-negative')

    @property
    def uses_affordance(self):
        return self.aff_goals is not None and self.aff_weight > 0


def _residuals(q, spec):
    batch = np.arange(q.shape[0])
    greedy = q.argmax(axis=1)
    td_index = greedy if spec.td_on_max else np.asarray(spec.td_index)
    td_res = np.asarray(spec.td_targets, dtype=np.float64) - q[batch,
                                                               td_index]
    if spec.uses_affordance:
        aff_res = np.asarray(spec.aff_goals, dtype=np.float64) - \
            q[batch, greedy]
        active = np.ones(q.shape[0]) if spec.aff_active is None \
            else np.asarray(spec.aff_active, dtype=np.float64)
    else:
        aff_res = active = None
    return batch, greedy, td_index, td_res, aff_res, active


def composite_loss(net, spec):
    """ mean(h(td) + weight * active * h(aff)) over the batch """
    h, _ = LOSSES[spec.kind]
    q = net.forward(spec.states).q
    _, _, _, td_res, aff_res, active = _residuals(q, spec)
    total = h(td_res)
    if aff_res is not None:
        total = total + spec.aff_weight * active * h(aff_res)
    return float(total.mean())


def loss_gradient(net, spec):
    """ Returns (loss, grads) """
    h, dh = LOSSES[spec.kind]
    fwd = net.forward(spec.states)
    q = fwd.q
    size = q.shape[0]
    batch, greedy, td_index, td_res, aff_res, active = _residuals(q, spec)
    total = h(td_res)
    dq = np.zeros_like(q)
    np.add.at(dq, (batch, td_index), -dh(td_res) / size)
    if aff_res is not None:
        weight = spec.aff_weight * active
        total = total + weight * h(aff_res)
        np.add.at(dq, (batch, greedy), -weight * dh(aff_res) / size)
    return float(total.mean()), net.backward(fwd, dq)


def backward_and_step(net, adam, spec):
    """ One optimizer step on the composite loss, returns the loss """
    loss, grads = loss_gradient(net, spec)
    check_finite('gradients', grads)
    adam.step(net.params, grads)
    check_finite('parameters', net.params)
    return loss


def gradient_check(net, spec, n_samples=200, eps=1e-5, seed=0, floor=1e-6):
    """ Largest relative error between analytic and central differences """
    _, grads = loss_gradient(net, spec)
    rng = np.random.default_rng(seed)
    names = list(net.params)
    sizes = np.array([net.params[n].size for n in names])
    flat = rng.choice(sizes.sum(), size=min(n_samples, sizes.sum()),
                      replace=False)
    bounds = np.cumsum(sizes)
    worst = 0.0
    for k in flat:
        i = int(np.searchsorted(bounds, k, side='right'))
        offset = k - (bounds[i - 1] if i else 0)
        name = names[i]
        param = net.params[name].reshape(-1)
        saved = param[offset]
        param[offset] = saved + eps
        up = composite_loss(net, spec)
        param[offset] = saved - eps
        down = composite_loss(net, spec)
        param[offset] = saved
        numeric = (up - down) / (2 * eps)
        analytic = grads[name].reshape(-1)[offset]
        error = abs(analytic - numeric) / max(abs(analytic), abs(numeric),
                                              floor)
        worst = max(worst, error)
    return worst
