"""
Sparsity bases (Dirac, periodic Haar, Fourier) and the discrete gradient / TV
machinery used by the reconstruction objective.
"""
from collections import namedtuple

import numpy as np

from spreadsense.errors import InvalidArgument_Error
from spreadsense.operators import LinearOperator, fourier_forward, fourier_inverse

DIRAC = 'dirac'
HAAR = 'haar'
FOURIER = 'fourier'
BASIS_KINDS = (DIRAC, HAAR, FOURIER)

SQRT2 = np.sqrt(2.)


class SparsityBasis(namedtuple('SparsityBasis', ['kind', 'shape', 'depth'])):
    """depth is a per-axis tuple for haar, None otherwise"""
    __slots__ = ()

    @property
    def ndim(self):
        return len(self.shape)

    @property
    def size(self):
        return int(np.prod(self.shape))


def _log2(n):
    k = int(n).bit_length() - 1
    return k if (1 << k) == n else None


def make_basis(kind, shape, depth=None):
    """
    :param kind: dirac, haar or fourier
    :param shape: signal shape (int for 1D)
    :param depth: haar decomposition depth; default is full depth log2(n) per axis
    """
    if kind not in BASIS_KINDS:
        raise InvalidArgument_Error("unknown basis {0}, choose from {1}".format(kind, ', '.join(BASIS_KINDS)))
    shape = (int(shape),) if np.isscalar(shape) else tuple(int(n) for n in shape)
    if any(n < 1 for n in shape):
        raise InvalidArgument_Error("basis sizes must be >= 1, got {0}".format(shape))
    if kind != HAAR:
        return SparsityBasis(kind, shape, None)
    levels = []
    for n in shape:
        full = _log2(n)
        if depth is None:
            if full is None:
                raise InvalidArgument_Error("haar basis needs power-of-two sizes, got {0}".format(shape))
            levels.append(full)
        else:
            if depth < 0 or n % (1 << depth):
                raise InvalidArgument_Error("size {0} does not support haar depth {1}".format(n, depth))
            levels.append(int(depth))
    return SparsityBasis(kind, shape, tuple(levels))


def _haar_analyze_axis(x, depth, axis):
    x = np.moveaxis(x, axis, 0)
    a = x
    details = []
    for _ in range(depth):
        even, odd = a[0::2], a[1::2]
        details.insert(0, (even - odd) / SQRT2)
        a = (even + odd) / SQRT2
    return np.moveaxis(np.concatenate([a] + details, axis=0), 0, axis)


def _haar_synthesize_axis(c, depth, axis):
    c = np.moveaxis(c, axis, 0)
    n = c.shape[0]
    m = n >> depth
    a = c[:m]
    while m < n:
        d = c[m:2 * m]
        x = np.empty((2 * m,) + a.shape[1:], dtype=np.result_type(a, d))
        x[0::2] = (a + d) / SQRT2
        x[1::2] = (a - d) / SQRT2
        a = x
        m *= 2
    return np.moveaxis(a, 0, axis)


def _check_size(basis, x):
    x = np.asarray(x)
    if x.shape != basis.shape:
        raise InvalidArgument_Error("array of shape {0} does not match {1} basis of shape {2}".format(
            x.shape, basis.kind, basis.shape))
    return x


def synthesize(basis, alpha):
    """rho = Psi alpha"""
    alpha = _check_size(basis, alpha).astype(np.complex128)
    if basis.kind == DIRAC:
        return alpha.copy()
    if basis.kind == FOURIER:
        return fourier_inverse(alpha)
    out = alpha
    for axis, depth in enumerate(basis.depth):
        out = _haar_synthesize_axis(out, depth, axis)
    return out


def analyze(basis, signal):
    """alpha = Psi^* rho"""
    signal = _check_size(basis, signal).astype(np.complex128)
    if basis.kind == DIRAC:
        return signal.copy()
    if basis.kind == FOURIER:
        return fourier_forward(signal)
    out = signal
    for axis, depth in enumerate(basis.depth):
        out = _haar_analyze_axis(out, depth, axis)
    return out


class SynthesisOp(LinearOperator):
    """coefficients -> signal; orthonormal, so the adjoint is analysis"""

    def __init__(self, basis):
        super().__init__(basis.shape, basis.shape)
        self.basis = basis

    def forward(self, x):
        return synthesize(self.basis, x)

    def adjoint(self, y):
        return analyze(self.basis, y)


def hard_threshold(alpha, K):
    """keep the K largest magnitudes, lowest index first among ties"""
    alpha = np.asarray(alpha)
    if not 1 <= K <= alpha.size:
        raise InvalidArgument_Error("K must be in [1, {0}], got {1}".format(alpha.size, K))
    flat = alpha.ravel()
    keep = np.argsort(-np.abs(flat), kind='stable')[:K]
    out = np.zeros_like(flat)
    out[keep] = flat[keep]
    return out.reshape(alpha.shape)


def gradient(img):
    """
    forward differences along every axis, zero on the last sample (Neumann)

    :return: array of shape (ndim,) + img.shape
    """
    img = np.asarray(img)
    return np.stack([np.diff(img, axis=d, append=np.take(img, [-1], axis=d)) for d in range(img.ndim)])


def divergence(field):
    """negative adjoint of gradient"""
    field = np.asarray(field)
    out = np.zeros(field.shape[1:], dtype=field.dtype)
    for d in range(field.shape[0]):
        q = field[d].copy()
        last = [slice(None)] * q.ndim
        last[d] = -1
        q[tuple(last)] = 0
        out += q - np.roll(q, 1, axis=d)
    return out


def gradient_magnitude(img):
    g = gradient(img)
    return np.sqrt(np.sum(np.abs(g) ** 2, axis=0))


def tv_norm(img):
    """isotropic total variation with the complex modulus per directional difference"""
    return float(np.sum(gradient_magnitude(img)))
