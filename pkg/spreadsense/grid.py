"""
Spatial and frequency grids, field of view, chirp rates and the three grid
sizes (N, N_c, N_u) induced by a chirp.

Axis convention: arrays are row-major with shape (N_x,), (N_x, N_y) or
(N_x, N_y, N_z). The phase encoding axes are x and y; z (last axis of a 3D
grid) is the readout direction and is never extended by the chirp.
"""
import math
from collections import namedtuple

import numpy as np

from spreadsense.errors import InvalidArgument_Error

CONSTANT = 'constant'
READOUT_VARYING = 'readout-varying'


class FieldOfView(namedtuple('FieldOfView', ['lengths'])):
    __slots__ = ()

    @property
    def ndim(self):
        return len(self.lengths)


def make_fov(lengths, ndim=None):
    """
    :param lengths: scalar or sequence of physical lengths (any consistent unit)
    :param ndim: if given, a scalar length is broadcast to ndim dimensions
    """
    if np.isscalar(lengths):
        lengths = (float(lengths),) * (ndim or 1)
    lengths = tuple(float(x) for x in lengths)
    if not 1 <= len(lengths) <= 3:
        raise InvalidArgument_Error("field of view must have 1 to 3 lengths, got {0}".format(len(lengths)))
    if ndim is not None and len(lengths) != ndim:
        raise InvalidArgument_Error("field of view has {0} lengths but the grid is {1}D".format(len(lengths), ndim))
    if any(not (x > 0 and math.isfinite(x)) for x in lengths):
        raise InvalidArgument_Error("field of view lengths must be strictly positive, got {0}".format(lengths))
    return FieldOfView(lengths)


def phase_axes(ndim):
    """Axes carrying chirp modulation: x for 1D, (x, y) for 2D and 3D."""
    return (0,) if ndim == 1 else (0, 1)


class ChirpSpec(namedtuple('ChirpSpec', ['mode', 'rates'])):
    """
    mode 'constant': rates is a tuple with one discrete rate per phase encoding axis.
    mode 'readout-varying': rates is a (N_z, 2) array of (w_x, w_y) pairs in
    readout-time order, i.e. row m belongs to k_z = m - N_z//2.
    """
    __slots__ = ()

    def max_abs(self):
        r = np.abs(np.asarray(self.rates, dtype=float))
        if self.mode == READOUT_VARYING:
            return tuple(r.max(axis=0))
        return tuple(r)

    def is_zero(self):
        return not np.any(np.asarray(self.rates, dtype=float))


def constant_chirp(*rates):
    """constant_chirp(0.3) for 1D, constant_chirp(0.3, 0.3) for 2D/3D"""
    if len(rates) == 1 and not np.isscalar(rates[0]):
        rates = tuple(rates[0])
    rates = tuple(float(w) for w in rates)
    if not 1 <= len(rates) <= 2:
        raise InvalidArgument_Error("a constant chirp has one or two rates, got {0}".format(len(rates)))
    if not all(math.isfinite(w) for w in rates):
        raise InvalidArgument_Error("chirp rates must be finite, got {0}".format(rates))
    return ChirpSpec(CONSTANT, rates)


def varying_chirp(schedule):
    """
    :param schedule: sequence of (w_x, w_y) pairs, one per readout frequency (readout-time order)
    """
    rates = np.array(schedule, dtype=float)
    if rates.ndim != 2 or rates.shape[1] != 2 or rates.shape[0] < 1:
        raise InvalidArgument_Error("a readout-varying chirp needs an (N_z, 2) schedule, got shape {0}".format(rates.shape))
    if not np.all(np.isfinite(rates)):
        raise InvalidArgument_Error("chirp schedule contains non-finite rates")
    rates.setflags(write=False)
    return ChirpSpec(READOUT_VARYING, rates)


def chirp_rates_for(chirp, ndim):
    """Per phase-axis maximum absolute rate, broadcasting a single rate to both x and y."""
    r = chirp.max_abs()
    naxes = len(phase_axes(ndim))
    if len(r) == naxes:
        return r
    if len(r) == 1:
        return r * naxes
    raise InvalidArgument_Error("chirp has {0} rates but a {1}D grid has {2} phase encoding axes".format(len(r), ndim, naxes))


class GridSpec(namedtuple('GridSpec', ['N', 'Nc', 'Nu', 'fov'])):
    __slots__ = ()

    @property
    def ndim(self):
        return len(self.N)

    @property
    def band_limits(self):
        return tuple(n / (2. * L) for n, L in zip(self.N, self.fov.lengths))

    @property
    def phase_axes(self):
        return phase_axes(self.ndim)

    @property
    def readout_axis(self):
        return 2 if self.ndim == 3 else None


def discrete_chirp_rate(w, L, N):
    """w_bar = w * L**2 / N"""
    if not L > 0 or not N >= 1:
        raise InvalidArgument_Error("need L > 0 and N >= 1, got L={0} N={1}".format(L, N))
    return w * L ** 2 / N


def physical_chirp_rate(w_bar, L, N):
    """w = w_bar * N / L**2"""
    if not L > 0 or not N >= 1:
        raise InvalidArgument_Error("need L > 0 and N >= 1, got L={0} N={1}".format(L, N))
    return w_bar * N / L ** 2


def even_ceil(x):
    # round() guards products like 1.5*256 that land a hair above the integer
    n = math.ceil(round(x, 9))
    return n + (n % 2)


def _check_sizes(N):
    if np.isscalar(N):
        N = (N,)
    N = tuple(int(n) for n in N)
    if not 1 <= len(N) <= 3 or any(n < 1 for n in N):
        raise InvalidArgument_Error("grid sizes must be 1 to 3 integers >= 1, got {0}".format(N))
    return N


def make_grids(N, chirp, fov=1.0):
    """
    Per phase encoding axis: N_c = even(ceil((1+|w|)N)), N_u = even(ceil((1+2|w|)N)),
    with |w| the largest absolute rate over the schedule. Axes with zero rate and the
    readout axis keep N.
    """
    N = _check_sizes(N)
    fov = fov if isinstance(fov, FieldOfView) else make_fov(fov, len(N))
    if fov.ndim != len(N):
        raise InvalidArgument_Error("field of view has {0} lengths but the grid is {1}D".format(fov.ndim, len(N)))
    rates = chirp_rates_for(chirp, len(N))
    if chirp.mode == READOUT_VARYING:
        if len(N) != 3:
            raise InvalidArgument_Error("readout-varying chirps need a 3D grid")
        if len(chirp.rates) != N[2]:
            raise InvalidArgument_Error("schedule has {0} entries but N_z = {1}".format(len(chirp.rates), N[2]))
    Nc, Nu = list(N), list(N)
    for ax, w in zip(phase_axes(len(N)), rates):
        if w == 0:
            continue
        Nc[ax] = even_ceil((1 + w) * N[ax])
        Nu[ax] = even_ceil((1 + 2 * w) * N[ax])
    return GridSpec(N, tuple(Nc), tuple(Nu), fov)


def sample_coordinates(n, L):
    """x_i = (i - n/2) L / n, so the field of view center sits at index n/2."""
    return (np.arange(n) - n / 2.) * L / n


def frequency_coordinates(n):
    """integer frequencies in natural FFT order: 0, 1, ..., -1"""
    return np.fft.fftfreq(n, 1. / n)


def acceleration_factor(N, M):
    N = int(np.prod(N))
    if M <= 0:
        raise InvalidArgument_Error("measurement count must be positive, got {0}".format(M))
    return N / M
