"""
k-space sampling masks: uniform random selection and variable density
sampling (VDS) with a power-law profile

    f(k) = clip((1 - |k|/|k_m|)**p + beta, 0, 1)

whose offset beta is calibrated so the expected number of samples equals the
target, and whose power p is the smallest on a 0.5 grid giving beta >= 0.

Masks are flat, sorted indices into a grid in natural FFT order.
"""
from collections import namedtuple

import numpy as np

from spreadsense.errors import InfeasibleTarget_Error, InvalidArgument_Error
from spreadsense.grid import frequency_coordinates
from spreadsense.operators import frequency_block_indices

FULL_GRID = 'full-grid'
PHASE_ENCODE = 'phase-encode-plane'

BETA_TOL = 1e-6
COUNT_TOL = 0.5
P_STEP = 0.5
MAX_P = 200.


class SamplingMask(namedtuple('SamplingMask', ['mode', 'shape', 'indices', 'p', 'beta', 'seed', 'target', 'actual'])):
    """
    p, beta are None for uniform masks; seed is None when the mask was not drawn here.
    actual is the number of selected locations (M').
    """
    __slots__ = ()

    @property
    def count(self):
        return int(len(self.indices))

    def as_array(self):
        out = np.zeros(int(np.prod(self.shape)), dtype=bool)
        out[self.indices] = True
        return out.reshape(self.shape)


VdsProfile = namedtuple('VdsProfile', ['p', 'beta', 'k_max'])


def make_mask(mode, shape, indices, p=None, beta=None, seed=None, target=None):
    shape = tuple(int(n) for n in shape)
    indices = np.unique(np.asarray(indices, dtype=np.int64))
    size = int(np.prod(shape))
    if indices.size and (indices[0] < 0 or indices[-1] >= size):
        raise InvalidArgument_Error("mask index out of range for grid {0}".format(shape))
    if mode not in (FULL_GRID, PHASE_ENCODE):
        raise InvalidArgument_Error("unknown mask mode {0}".format(mode))
    return SamplingMask(mode, shape, indices, p, beta, seed, target, int(indices.size))


def candidate_radii(shape):
    """
    Normalized radius |k| of every location of a band grid, flattened in natural
    FFT order. Each axis is scaled by N_d/2 so the band edge sits at 1.
    """
    shape = (int(shape),) if np.isscalar(shape) else tuple(shape)
    axes = [frequency_coordinates(n) / (n / 2.) for n in shape]
    mesh = np.meshgrid(*axes, indexing='ij')
    return np.sqrt(sum(k ** 2 for k in mesh)).ravel()


def make_vds_profile(p, beta, shape):
    k_max = candidate_radii(shape).max()
    if not k_max > 0:
        raise InvalidArgument_Error("a variable density profile needs a grid with nonzero frequencies")
    if p < 0 or not -1 <= beta <= 1:
        raise InvalidArgument_Error("need p >= 0 and beta in [-1, 1], got p={0} beta={1}".format(p, beta))
    return VdsProfile(float(p), float(beta), float(k_max))


def vds_profile_value(k, profile):
    base = np.clip(1. - np.asarray(k, dtype=float) / profile.k_max, 0., None)
    return np.clip(base ** profile.p + profile.beta, 0., 1.)


def expected_count(p, beta, radii, k_max):
    return float(np.sum(vds_profile_value(radii, VdsProfile(p, beta, k_max))))


def _check_target(M, n):
    if M <= 0:
        raise InvalidArgument_Error("target measurement count must be positive, got {0}".format(M))
    if M > n:
        raise InfeasibleTarget_Error("target {0} exceeds the {1} candidate locations".format(M, n))


def calibrate_beta(p, M, shape):
    """
    Bisection on beta in [-1, 1] for sum_i f(k_i) = M within COUNT_TOL. The first
    midpoint is beta = 0, so plateaus there are resolved in favour of 0.
    """
    radii = candidate_radii(shape)
    k_max = radii.max()
    _check_target(M, radii.size)
    lo, hi = -1., 1.
    if expected_count(p, hi, radii, k_max) < M - COUNT_TOL:
        raise InfeasibleTarget_Error("target {0} unreachable with p={1}".format(M, p))
    while True:
        mid = (lo + hi) / 2.
        count = expected_count(p, mid, radii, k_max)
        if abs(count - M) <= COUNT_TOL:
            return mid
        if count < M:
            lo = mid
        else:
            hi = mid
        if hi - lo < BETA_TOL:
            break
    mid = (lo + hi) / 2.
    if abs(expected_count(p, mid, radii, k_max) - M) > COUNT_TOL:
        raise InfeasibleTarget_Error("no beta in [-1, 1] gives {0} expected samples with p={1}".format(M, p))
    return mid


def find_p_M(M, shape):
    """smallest p in {0, 0.5, 1, ...} whose calibrated beta is >= 0; returns (p, beta)"""
    p = 0.
    while p <= MAX_P:
        beta = calibrate_beta(p, M, shape)
        if beta >= 0:
            return p, beta
        p += P_STEP
    raise InfeasibleTarget_Error("no profile power up to {0} reaches beta >= 0 for M={1}".format(MAX_P, M))


def draw_vds_mask(profile, shape, seed, mode=FULL_GRID, target=None):
    """one independent Bernoulli draw per location with probability f(k)"""
    shape = (int(shape),) if np.isscalar(shape) else tuple(shape)
    prob = vds_profile_value(candidate_radii(shape), profile)
    rng = np.random.default_rng(seed)
    selected = np.flatnonzero(rng.random(prob.size) < prob)
    return make_mask(mode, shape, selected, profile.p, profile.beta, seed, target)


def draw_uniform_mask(M, shape, seed, mode=FULL_GRID):
    """M distinct locations, uniform without replacement"""
    shape = (int(shape),) if np.isscalar(shape) else tuple(shape)
    n = int(np.prod(shape))
    if not 1 <= M <= n:
        raise InvalidArgument_Error("uniform mask needs 1 <= M <= {0}, got {1}".format(n, M))
    rng = np.random.default_rng(seed)
    return make_mask(mode, shape, rng.choice(n, size=int(M), replace=False), seed=seed, target=int(M))


def embed_mask(mask, shape):
    """
    Re-index a mask drawn over a band grid into a larger grid, keeping the same
    physical frequencies (natural FFT order on both sides).
    """
    shape = tuple(int(n) for n in shape)
    if len(shape) != len(mask.shape) or any(m < n for n, m in zip(mask.shape, shape)):
        raise InvalidArgument_Error("cannot embed a mask over {0} into {1}".format(mask.shape, shape))
    coords = np.unravel_index(mask.indices, mask.shape)
    mapped = [frequency_block_indices(n, m)[c] for c, n, m in zip(coords, mask.shape, shape)]
    indices = np.ravel_multi_index(mapped, shape) if mapped[0].size else np.zeros(0, dtype=np.int64)
    return make_mask(mask.mode, shape, indices, mask.p, mask.beta, mask.seed, mask.target)


def expand_phase_encode_mask(mask, Nz):
    """replicate each selected (k_x, k_y) over all N_z readout frequencies"""
    if len(mask.shape) != 2:
        raise InvalidArgument_Error("phase encoding masks are 2D, got shape {0}".format(mask.shape))
    if Nz < 1:
        raise InvalidArgument_Error("N_z must be >= 1, got {0}".format(Nz))
    indices = (np.asarray(mask.indices, dtype=np.int64)[:, None] * Nz + np.arange(Nz)).ravel()
    target = None if mask.target is None else mask.target * Nz
    return make_mask(FULL_GRID, mask.shape + (int(Nz),), indices, mask.p, mask.beta, mask.seed, target)


def coverage_target(coverage, shape):
    """target count for a coverage fraction of a grid"""
    if not 0 < coverage <= 1:
        raise InvalidArgument_Error("coverage must be in (0, 1], got {0}".format(coverage))
    return max(1, int(round(coverage * int(np.prod(shape)))))
