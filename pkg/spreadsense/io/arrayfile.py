"""
Binary complex array (S2CX) and sampling mask (S2MK) files, little-endian.

S2CX: magic, u32 version, u8 ndim, u64 dims[ndim], then row-major
      interleaved (real, imag) f64 pairs.
S2MK: magic, u32 version, u8 mode, u8 ndim, u64 dims[ndim], u64 count,
      u64 indices[count], then f64 p, f64 beta, u64 seed, u64 M, u64 M'.
      Unknown p/beta are NaN, unknown seed/M are 2**64 - 1.
"""
import math
import struct

import numpy as np

from spreadsense.errors import Format_Error
from spreadsense.sampling import FULL_GRID, PHASE_ENCODE, make_mask

ARRAY_MAGIC = b'S2CX'
MASK_MAGIC = b'S2MK'
VERSION = 1
UNKNOWN = 2 ** 64 - 1

MASK_MODES = {FULL_GRID: 0, PHASE_ENCODE: 1}
MASK_MODE_NAMES = {v: k for k, v in MASK_MODES.items()}


class _Reader:
    """walks a byte buffer, raising Format_Error with the offset on truncation"""

    def __init__(self, buf, path):
        self.buf = buf
        self.path = path
        self.offset = 0

    def take(self, n, what):
        if self.offset + n > len(self.buf):
            raise Format_Error("{0}: truncated while reading {1}".format(self.path, what), self.offset)
        chunk = self.buf[self.offset:self.offset + n]
        self.offset += n
        return chunk

    def unpack(self, fmt, what):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    def header(self, magic):
        found = self.take(4, 'magic') if len(self.buf) >= 4 else self.buf
        if found != magic:
            raise Format_Error("{0}: bad magic, expected {1!r} found {2!r}".format(self.path, magic, bytes(found)), 0)
        version, = self.unpack('<I', 'version')
        if version != VERSION:
            raise Format_Error("{0}: unsupported version {1}, expected {2}".format(self.path, version, VERSION), 4)

    def done(self):
        if self.offset != len(self.buf):
            raise Format_Error("{0}: {1} trailing bytes".format(self.path, len(self.buf) - self.offset), self.offset)


def write_array(path, arr):
    arr = np.ascontiguousarray(arr, dtype=np.complex128)
    with open(path, 'wb') as f:
        f.write(ARRAY_MAGIC)
        f.write(struct.pack('<IB', VERSION, arr.ndim))
        f.write(struct.pack('<{0}Q'.format(arr.ndim), *arr.shape))
        f.write(arr.astype('<c16').tobytes())


def read_array(path):
    with open(path, 'rb') as f:
        r = _Reader(f.read(), path)
    r.header(ARRAY_MAGIC)
    ndim, = r.unpack('<B', 'dim count')
    dims = r.unpack('<{0}Q'.format(ndim), 'dims')
    n = int(np.prod(dims, dtype=np.int64))
    payload = r.take(16 * n, 'payload')
    r.done()
    return np.frombuffer(payload, dtype='<c16').astype(np.complex128).reshape(dims)


def _or_unknown(v):
    return UNKNOWN if v is None else int(v)


def write_mask(path, mask):
    indices = np.asarray(mask.indices, dtype='<u8')
    p = float('nan') if mask.p is None else float(mask.p)
    beta = float('nan') if mask.beta is None else float(mask.beta)
    with open(path, 'wb') as f:
        f.write(MASK_MAGIC)
        f.write(struct.pack('<IBB', VERSION, MASK_MODES[mask.mode], len(mask.shape)))
        f.write(struct.pack('<{0}Q'.format(len(mask.shape)), *mask.shape))
        f.write(struct.pack('<Q', indices.size))
        f.write(indices.tobytes())
        f.write(struct.pack('<ddQQQ', p, beta, _or_unknown(mask.seed), _or_unknown(mask.target), mask.count))


def read_mask(path):
    with open(path, 'rb') as f:
        r = _Reader(f.read(), path)
    r.header(MASK_MAGIC)
    mode, ndim = r.unpack('<BB', 'mode')
    if mode not in MASK_MODE_NAMES:
        raise Format_Error("{0}: unknown mask mode {1}".format(path, mode), r.offset - 2)
    dims = r.unpack('<{0}Q'.format(ndim), 'dims')
    count, = r.unpack('<Q', 'index count')
    start = r.offset
    indices = np.frombuffer(r.take(8 * count, 'indices'), dtype='<u8').astype(np.int64)
    size = int(np.prod(dims, dtype=np.int64))
    if count and (indices.max() >= size or np.any(np.diff(indices) <= 0)):
        raise Format_Error("{0}: mask indices must be sorted, unique and below {1}".format(path, size), start)
    p, beta, seed, target, actual = r.unpack('<ddQQQ', 'metadata')
    r.done()
    if actual != count:
        raise Format_Error("{0}: metadata count {1} differs from {2} indices".format(path, actual, count),
                           r.offset - 8)
    return make_mask(MASK_MODE_NAMES[mode], dims, indices,
                     None if math.isnan(p) else p, None if math.isnan(beta) else beta,
                     None if seed == UNKNOWN else seed, None if target == UNKNOWN else target)
