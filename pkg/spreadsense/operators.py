"""
Linear measurement chain: unitary DFT (F), zero-padding up-sampling (U),
chirp modulation (C), mask selection (M), their compositions

    nu = M F C U rho                     (constant chirp)
    nu = M F_xy C F_z U rho              (chirp varying with the readout time)

and exact adjoints.

k-space arrays are kept in natural FFT order (DC at index 0). Zero padding
embeds a size-n spectrum into size m by keeping frequencies
0 .. n - n//2 - 1 at the front and -n//2 .. -1 at the back, so for even n
the Nyquist bin sits, unsplit, on the negative side.
"""
import math
from collections import namedtuple

import numpy as np
from scipy.sparse.linalg import LinearOperator as ScipyLinearOperator

from spreadsense.errors import InvalidArgument_Error
from spreadsense.grid import (READOUT_VARYING, GridSpec, chirp_rates_for, discrete_chirp_rate,
                              make_fov, phase_axes, physical_chirp_rate, sample_coordinates,
                              varying_chirp)

KSpaceData = namedtuple('KSpaceData', ['values', 'indices'])

# rad s^-1 T^-1, proton
GYROMAGNETIC_RATIO = 2 * math.pi * 42.577478e6

# 7T acquisitions the schedule presets are modelled on; dt = 1 / pixel bandwidth
SCANNER_PRESETS = {
    'phantom': {'kappa': 3000e-6, 'te': 6e-3, 'dt': 1 / 400.,
                'fov': (0.192, 0.192, 0.192), 'N': (192, 192, 192)},
    'brain':   {'kappa': 4500e-6, 'te': 4.59e-3, 'dt': 1 / 250.,
                'fov': (0.243, 0.176, 0.256), 'N': (243, 176, 256)},
}

MAX_DENSE_COLUMNS = 4096


def _as_complex(x):
    return np.asarray(x, dtype=np.complex128)


def fourier_forward(x, axes=None):
    """unitary multi-dimensional DFT"""
    return np.fft.fftn(_as_complex(x), axes=axes, norm='ortho')


def fourier_inverse(x, axes=None):
    return np.fft.ifftn(_as_complex(x), axes=axes, norm='ortho')


def frequency_block_indices(n, m):
    """positions of a size-n spectrum inside a size-m spectrum (natural FFT order)"""
    return np.concatenate([np.arange(n - n // 2), np.arange(m - n // 2, m)])


def embed_kspace(X, shape):
    X = _as_complex(X)
    if len(shape) != X.ndim or any(m < n for n, m in zip(X.shape, shape)):
        raise InvalidArgument_Error("cannot embed k-space of shape {0} into {1}".format(X.shape, shape))
    out = np.zeros(shape, dtype=np.complex128)
    out[np.ix_(*[frequency_block_indices(n, m) for n, m in zip(X.shape, shape)])] = X
    return out


def crop_kspace(X, shape):
    X = _as_complex(X)
    if len(shape) != X.ndim or any(m > n for n, m in zip(X.shape, shape)):
        raise InvalidArgument_Error("cannot crop k-space of shape {0} to {1}".format(X.shape, shape))
    return X[np.ix_(*[frequency_block_indices(m, n) for n, m in zip(X.shape, shape)])]


def _changed_axes(src, dst):
    return tuple(ax for ax, (n, m) in enumerate(zip(src, dst)) if n != m)


def upsample(img, shape):
    """U: band-limited interpolation by zero padding; an isometry"""
    img = _as_complex(img)
    shape = tuple(shape)
    if len(shape) != img.ndim or any(m < n for n, m in zip(img.shape, shape)):
        raise InvalidArgument_Error("upsample target {0} is smaller than source {1}".format(shape, img.shape))
    axes = _changed_axes(img.shape, shape)
    if not axes:
        return img.copy()
    return fourier_inverse(embed_kspace(fourier_forward(img, axes), shape), axes)


def downsample(img, shape):
    """U^*: keep the central spatial frequencies; downsample(upsample(x)) == x"""
    img = _as_complex(img)
    shape = tuple(shape)
    if len(shape) != img.ndim or any(m > n for n, m in zip(img.shape, shape)):
        raise InvalidArgument_Error("downsample target {0} is larger than source {1}".format(shape, img.shape))
    axes = _changed_axes(img.shape, shape)
    if not axes:
        return img.copy()
    return fourier_inverse(crop_kspace(fourier_forward(img, axes), shape), axes)


def resample_values(img, shape):
    """Band-limited resampling that keeps pixel values (a constant image stays constant)."""
    img = _as_complex(img)
    shape = tuple(shape)
    scale = math.sqrt(np.prod(shape) / float(np.prod(img.shape)))
    if all(m >= n for n, m in zip(img.shape, shape)):
        return upsample(img, shape) * scale
    if all(m <= n for n, m in zip(img.shape, shape)):
        return downsample(img, shape) * scale
    raise InvalidArgument_Error("mixed up/down resampling from {0} to {1} is not supported".format(img.shape, shape))


class LinearOperator:
    """
    Minimal operator contract: forward/adjoint on arrays of shape ishape/oshape.
    Operators hold no mutable state after construction.
    """

    def __init__(self, ishape, oshape):
        self.ishape = tuple(ishape)
        self.oshape = tuple(oshape)

    def forward(self, x):
        raise NotImplementedError

    def adjoint(self, y):
        raise NotImplementedError

    def __call__(self, x):
        return self.forward(x)

    @property
    def H(self):
        return _Adjoint(self)

    def normal(self, x):
        return self.adjoint(self.forward(x))

    @property
    def isize(self):
        return int(np.prod(self.ishape))

    @property
    def osize(self):
        return int(np.prod(self.oshape))

    def as_matrix(self):
        """dense matrix, column by column; only for small oracles"""
        if self.isize > MAX_DENSE_COLUMNS:
            raise InvalidArgument_Error("refusing to densify an operator with {0} columns".format(self.isize))
        A = np.zeros((self.osize, self.isize), dtype=np.complex128)
        e = np.zeros(self.isize, dtype=np.complex128)
        for j in range(self.isize):
            e[j] = 1
            A[:, j] = np.ravel(self.forward(e.reshape(self.ishape)))
            e[j] = 0
        return A

    def aslinearoperator(self):
        """scipy view acting on flattened vectors"""
        return ScipyLinearOperator((self.osize, self.isize), dtype=np.complex128,
                                   matvec=lambda v: np.ravel(self.forward(v.reshape(self.ishape))),
                                   rmatvec=lambda v: np.ravel(self.adjoint(v.reshape(self.oshape))))


class _Adjoint(LinearOperator):
    def __init__(self, op):
        super().__init__(op.oshape, op.ishape)
        self.op = op

    def forward(self, x):
        return self.op.adjoint(x)

    def adjoint(self, y):
        return self.op.forward(y)


class Composed(LinearOperator):
    """Composed([A, B, C]) applies C, then B, then A."""

    def __init__(self, ops):
        ops = list(ops)
        for outer, inner in zip(ops[:-1], ops[1:]):
            if outer.ishape != inner.oshape:
                raise InvalidArgument_Error("cannot compose {0} -> {1} with {2} -> {3}".format(
                    inner.ishape, inner.oshape, outer.ishape, outer.oshape))
        super().__init__(ops[-1].ishape, ops[0].oshape)
        self.ops = ops

    def forward(self, x):
        for op in reversed(self.ops):
            x = op.forward(x)
        return x

    def adjoint(self, y):
        for op in self.ops:
            y = op.adjoint(y)
        return y


class FourierOp(LinearOperator):
    def __init__(self, shape, axes=None):
        super().__init__(shape, shape)
        self.axes = axes

    def forward(self, x):
        return fourier_forward(x, self.axes)

    def adjoint(self, y):
        return fourier_inverse(y, self.axes)


class UpsampleOp(LinearOperator):
    def __init__(self, ishape, oshape):
        if len(ishape) != len(oshape) or any(m < n for n, m in zip(ishape, oshape)):
            raise InvalidArgument_Error("upsample target {0} is smaller than source {1}".format(oshape, ishape))
        super().__init__(ishape, oshape)

    def forward(self, x):
        return upsample(x, self.oshape)

    def adjoint(self, y):
        return downsample(y, self.ishape)


def chirp_phase(shape, rates, base_shape, fov):
    """
    pi * sum_a w_a x_a**2 on the phase encoding axes of `shape`, with physical rates
    recovered from discrete ones on the base grid. `rates` is one value per phase axis,
    or an (N_z, 2) readout-varying schedule which yields a per-plane phase over the
    last axis (planes in natural FFT order).
    """
    ndim = len(shape)
    axes = phase_axes(ndim)
    rates = np.asarray(rates, dtype=float)
    varying = rates.ndim == 2
    if varying:
        if ndim != 3 or rates.shape != (shape[2], 2):
            raise InvalidArgument_Error("schedule of shape {0} does not fit grid {1}".format(rates.shape, shape))
        # readout order (k_z = -N_z/2 ...) -> natural FFT order (k_z = 0 ...)
        rates = np.fft.ifftshift(rates, axes=0)
    elif rates.size == 1 and len(axes) == 2:
        rates = np.repeat(rates.ravel(), 2)
    elif rates.size != len(axes):
        raise InvalidArgument_Error("{0} chirp rates for {1} phase encoding axes".format(rates.size, len(axes)))
    phase = np.zeros(shape, dtype=float)
    for i, ax in enumerate(axes):
        L = fov.lengths[ax]
        x2 = sample_coordinates(shape[ax], L) ** 2
        bshape = [1] * ndim
        bshape[ax] = shape[ax]
        if varying:
            w = physical_chirp_rate(rates[:, i], L, base_shape[ax])
            bshape_w = [1] * ndim
            bshape_w[2] = shape[2]
            phase = phase + np.pi * x2.reshape(bshape) * w.reshape(bshape_w)
        else:
            w = physical_chirp_rate(float(rates.ravel()[i]), L, base_shape[ax])
            phase = phase + np.pi * w * x2.reshape(bshape)
    return phase


class ChirpOp(LinearOperator):
    """diagonal unimodular modulation exp(i pi (w_x x^2 + w_y y^2))"""

    def __init__(self, shape, rates, base_shape, fov):
        super().__init__(shape, shape)
        self.diag = np.exp(1j * chirp_phase(shape, rates, base_shape, fov))

    def forward(self, x):
        return _as_complex(x) * self.diag

    def adjoint(self, y):
        return _as_complex(y) * np.conj(self.diag)


class MaskOp(LinearOperator):
    """gathers the flat indices of a k-space grid, in index order"""

    def __init__(self, shape, indices):
        indices = np.asarray(indices, dtype=np.int64).ravel()
        size = int(np.prod(shape))
        if indices.size and (indices.min() < 0 or indices.max() >= size):
            raise InvalidArgument_Error("mask index out of range for grid {0}".format(tuple(shape)))
        if np.unique(indices).size != indices.size:
            raise InvalidArgument_Error("mask indices are not unique")
        super().__init__(shape, (indices.size,))
        self.indices = indices

    def forward(self, x):
        return np.ravel(_as_complex(x))[self.indices]

    def adjoint(self, y):
        out = np.zeros(self.isize, dtype=np.complex128)
        out[self.indices] = y
        return out.reshape(self.ishape)


class SensingOperator(LinearOperator):
    """
    Spread-spectrum Fourier sensing from a source grid (where rho lives) through a
    modulation grid (where the chirp is applied) to masked k-space samples.

    For the reconstruction model, source = N_c and modulation = N_u. The single
    dimension setting uses source = N and modulation = N_c.
    A readout-varying chirp takes the F_xy C F_z route; the readout axis must not be
    resampled then.
    """

    def __init__(self, source_shape, modulation_shape, chirp, indices, base_shape, fov=1.0):
        source_shape, modulation_shape = tuple(source_shape), tuple(modulation_shape)
        fov = fov if hasattr(fov, 'lengths') else make_fov(fov, len(source_shape))
        self.varying = chirp.mode == READOUT_VARYING
        if self.varying and (len(source_shape) != 3 or source_shape[2] != modulation_shape[2]):
            raise InvalidArgument_Error("readout-varying sensing needs 3D grids with an unchanged readout axis")
        self.up = UpsampleOp(source_shape, modulation_shape)
        rates = chirp.rates if self.varying else chirp_rates_for_signed(chirp, len(source_shape))
        self.chirp = ChirpOp(modulation_shape, rates, base_shape, fov)
        self.mask = MaskOp(modulation_shape, indices)
        self.xy_axes = phase_axes(len(source_shape))
        super().__init__(source_shape, self.mask.oshape)

    def forward(self, x):
        u = self.up.forward(x)
        if self.varying:
            u = fourier_forward(u, axes=(2,))
            return self.mask.forward(fourier_forward(self.chirp.forward(u), axes=self.xy_axes))
        return self.mask.forward(fourier_forward(self.chirp.forward(u)))

    def adjoint(self, y):
        k = self.mask.adjoint(y)
        if self.varying:
            u = self.chirp.adjoint(fourier_inverse(k, axes=self.xy_axes))
            u = fourier_inverse(u, axes=(2,))
        else:
            u = self.chirp.adjoint(fourier_inverse(k))
        return self.up.adjoint(u)


def chirp_rates_for_signed(chirp, ndim):
    """signed constant rates, one per phase axis"""
    chirp_rates_for(chirp, ndim)  # validates the count
    rates = tuple(chirp.rates)
    return rates * len(phase_axes(ndim)) if len(rates) == 1 else rates


def _check_grid(grid):
    if not isinstance(grid, GridSpec):
        raise InvalidArgument_Error("expected a GridSpec, got {0}".format(type(grid).__name__))


def chirp_modulate(img, chirp, grid, direction='forward'):
    """
    Multiply by the chirp on the modulation grid N_u. With a readout-varying chirp the
    last axis of img is read as k_z (natural FFT order), one rate pair per plane.
    """
    _check_grid(grid)
    img = _as_complex(img)
    if img.shape != tuple(grid.Nu):
        raise InvalidArgument_Error("image shape {0} is not the modulation grid {1}".format(img.shape, grid.Nu))
    rates = chirp.rates if chirp.mode == READOUT_VARYING else chirp_rates_for_signed(chirp, grid.ndim)
    op = ChirpOp(grid.Nu, rates, grid.N, grid.fov)
    if direction == 'forward':
        return op.forward(img)
    elif direction == 'conjugate':
        return op.adjoint(img)
    raise InvalidArgument_Error("direction must be 'forward' or 'conjugate', got {0}".format(direction))


def apply_mask(kspace, mask):
    op = MaskOp(np.shape(kspace), mask.indices)
    return KSpaceData(op.forward(kspace), op.indices)


def adjoint_mask(data, shape):
    op = MaskOp(shape, data.indices)
    return op.adjoint(data.values)


def sensing_operator(grid, chirp, mask):
    """N_c -> masked N_u k-space for a GridSpec"""
    _check_grid(grid)
    if tuple(mask.shape) != tuple(grid.Nu):
        raise InvalidArgument_Error("mask indexes grid {0}, expected N_u = {1}".format(tuple(mask.shape), grid.Nu))
    return SensingOperator(grid.Nc, grid.Nu, chirp, mask.indices, grid.N, grid.fov)


def sensing_forward(rho, grid, chirp, mask):
    if chirp.mode == READOUT_VARYING:
        raise InvalidArgument_Error("sensing_forward needs a constant chirp; use sensing_forward_varying")
    op = sensing_operator(grid, chirp, mask)
    return KSpaceData(op.forward(rho), op.mask.indices)


def sensing_adjoint(data, grid, chirp, mask):
    if chirp.mode == READOUT_VARYING:
        raise InvalidArgument_Error("sensing_adjoint needs a constant chirp; use sensing_adjoint_varying")
    return sensing_operator(grid, chirp, mask).adjoint(data.values)


def _check_varying(grid, chirp):
    if grid.ndim != 3 or chirp.mode != READOUT_VARYING:
        raise InvalidArgument_Error("varying sensing needs a 3D grid and a readout-varying chirp")
    if len(chirp.rates) != grid.N[2]:
        raise InvalidArgument_Error("schedule has {0} entries but N_z = {1}".format(len(chirp.rates), grid.N[2]))


def sensing_forward_varying(rho, grid, chirp, mask):
    _check_varying(grid, chirp)
    op = sensing_operator(grid, chirp, mask)
    return KSpaceData(op.forward(rho), op.mask.indices)


def sensing_adjoint_varying(data, grid, chirp, mask):
    _check_varying(grid, chirp)
    return sensing_operator(grid, chirp, mask).adjoint(data.values)


def chirp_rate_schedule(kappa, te, dt, fov, N, gamma=GYROMAGNETIC_RATIO, n_readout=None, scale=1.0):
    """
    Chirp rates of a quadratic x^2 - y^2 field during readout: w(t) = gamma kappa t / pi,
    w_x = +w, w_y = -w, sampled at the centers of n_readout equal slices of
    [TE - dt/2, TE + dt/2], then made discrete with the (L, N) of each axis.
    """
    if not dt > 0:
        raise InvalidArgument_Error("readout duration must be positive, got {0}".format(dt))
    fov = fov if hasattr(fov, 'lengths') else make_fov(fov, 3)
    if len(N) != 3 or fov.ndim != 3:
        raise InvalidArgument_Error("schedules are defined on 3D grids")
    nz = int(n_readout or N[2])
    if nz < 1:
        raise InvalidArgument_Error("need at least one readout sample, got {0}".format(nz))
    t = te - dt / 2. + (np.arange(nz) + 0.5) * dt / nz
    w = gamma * kappa * t / np.pi
    wx = discrete_chirp_rate(w, fov.lengths[0], N[0])
    wy = discrete_chirp_rate(-w, fov.lengths[1], N[1])
    return varying_chirp(scale * np.column_stack([wx, wy]))


def preset_schedule(name, n_readout=None, scale=1.0):
    if name not in SCANNER_PRESETS:
        raise InvalidArgument_Error("unknown scanner preset {0}, choose from {1}".format(name, sorted(SCANNER_PRESETS)))
    p = SCANNER_PRESETS[name]
    return chirp_rate_schedule(p['kappa'], p['te'], p['dt'], p['fov'], p['N'],
                               n_readout=n_readout, scale=scale)


def dot_test(op, seed=0, ntrials=20):
    """largest |<A x, y> - <x, A^H y>| / (|x| |y|) over random complex probes"""
    rng = np.random.default_rng(seed)
    worst = 0.
    for _ in range(ntrials):
        x = rng.standard_normal(op.ishape) + 1j * rng.standard_normal(op.ishape)
        y = rng.standard_normal(op.oshape) + 1j * rng.standard_normal(op.oshape)
        lhs = np.vdot(y, op.forward(x))
        rhs = np.vdot(op.adjoint(y), x)
        worst = max(worst, abs(lhs - rhs) / (np.linalg.norm(x) * np.linalg.norm(y)))
    return worst


def modulated_spectrum(img, grid, chirp):
    """
    log10 amplitude of the N_u spectrum before and after chirp modulation, centered
    for display. img lives on N or N_c.
    """
    _check_grid(grid)
    if chirp.mode == READOUT_VARYING:
        raise InvalidArgument_Error("spectrum diagnostic needs a constant chirp")
    u = upsample(img, grid.Nu)
    tiny = np.finfo(float).tiny
    before = np.log10(np.abs(fourier_forward(u)) + tiny)
    after = np.log10(np.abs(fourier_forward(chirp_modulate(u, chirp, grid))) + tiny)
    return np.fft.fftshift(before), np.fft.fftshift(after)
