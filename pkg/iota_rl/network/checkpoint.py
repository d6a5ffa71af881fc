"""
Network checkpoints.

Layout, all little-endian:
  magic 'IOTA', uint16 version, uint8 dueling flag,
  uint32 n_in, uint32 n_actions, uint32 stream_hidden,
  uint16 hidden layer count, uint32 per hidden width,
  uint16 tensor count, then per tensor: uint16 name length, UTF-8 name,
  uint8 ndim, uint32 per dimension;
  then every tensor's data as float32, in manifest order.
"""

import logging
import struct
from collections import OrderedDict

import numpy as np

from iota_rl import IotaError, atomic_write
from iota_rl.network.mlp import Network

log = logging.getLogger(__name__)

MAGIC = b'IOTA'
VERSION = 1


class CheckpointError(IotaError):
    pass


def dump_checkpoint(net):
    out = [MAGIC, struct.pack('<HB', VERSION, int(net.dueling)),
           struct.pack('<III', net.n_in, net.n_actions, net.stream_hidden),
           struct.pack('<H', len(net.hidden))]
    out.extend(struct.pack('<I', h) for h in net.hidden)
    out.append(struct.pack('<H', len(net.params)))
    for name, value in net.params.items():
        raw = name.encode('utf-8')
        out.append(struct.pack('<H', len(raw)) + raw)
        out.append(struct.pack('<B', value.ndim))
        out.extend(struct.pack('<I', d) for d in value.shape)
    for value in net.params.values():
        out.append(value.astype('<f4').tobytes())
    return b''.join(out)


class _Reader(object):
    def __init__(self, blob):
        self.blob = blob
        self.pos = 0

    def take(self, size):
        if self.pos + size > len(self.blob):
            raise CheckpointError('checkpoint is truncated')
        chunk = self.blob[self.pos:self.pos + size]
        self.pos += size
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def parse_checkpoint(blob):
    r = _Reader(blob)
    if r.take(4) != MAGIC:
        raise CheckpointError('not a checkpoint (bad magic)')
    version, dueling = r.unpack('<HB')
    if version != VERSION:
        raise CheckpointError('unsupported checkpoint version %d' % version)
    n_in, n_actions, stream_hidden = r.unpack('<III')
    (n_hidden,) = r.unpack('<H')
    hidden = r.unpack('<%dI' % n_hidden) if n_hidden else ()
    (n_tensors,) = r.unpack('<H')
    manifest = []
    for _ in range(n_tensors):
        (length,) = r.unpack('<H')
        name = r.take(length).decode('utf-8')
        (ndim,) = r.unpack('<B')
        manifest.append((name, r.unpack('<%dI' % ndim)))
    params = OrderedDict()
    for name, shape in manifest:
        count = int(np.prod(shape))
        data = np.frombuffer(r.take(4 * count), dtype='<f4')
        params[name] = data.astype(np.float64).reshape(shape)
    if r.pos != len(blob):
        raise CheckpointError('%d trailing bytes in checkpoint'
                              % (len(blob) - r.pos))
    try:
        return Network(n_in, n_actions, bool(dueling), hidden, stream_hidden,
                       params=params)
    except IotaError as e:
        raise CheckpointError('checkpoint manifest mismatch: %s' % e)


def save_checkpoint(path, net):
    atomic_write(path, dump_checkpoint(net))
    log.debug('saved checkpoint %s (%d parameters)', path, net.n_params)


def load_checkpoint(path):
    with open(path, 'rb') as f:
        return parse_checkpoint(f.read())
