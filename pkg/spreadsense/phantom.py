"""
Synthetic complex test images: Shepp-Logan style ellipse phantoms with a smooth
quadratic phase, and single lines of them for the 1D experiments.

Coordinates are normalized to [-1, 1) along every axis, centered like the
sampling grid; axis 0 is x.
"""
from collections import namedtuple

import numpy as np
from scipy.ndimage import gaussian_filter

from spreadsense.errors import InvalidArgument_Error
from spreadsense.grid import sample_coordinates
from spreadsense.sparsity import analyze, hard_threshold, make_basis, synthesize

# center, semi-axes, rotation about z in degrees, complex amplitude
Ellipse = namedtuple('Ellipse', ['center', 'axes', 'angle', 'amplitude'])

# phase = c0 + cx x + cy y + cxx x^2 + cxy x y + cyy y^2 (radians)
PhantomSpec = namedtuple('PhantomSpec', ['shape', 'ellipses', 'phase', 'texture', 'seed'])

NO_PHASE = (0., 0., 0., 0., 0., 0.)
DEFAULT_PHASE = (0.2, 0.4, -0.3, 0.6, 0.2, -0.5)
TEXTURE_WIDTH = 2.

# modified Shepp-Logan, additive intensities
SHEPP_2D = [
    Ellipse((0., 0.), (0.69, 0.92), 0., 1.),
    Ellipse((0., -0.0184), (0.6624, 0.874), 0., -0.8),
    Ellipse((0.22, 0.), (0.11, 0.31), -18., -0.2),
    Ellipse((-0.22, 0.), (0.16, 0.41), 18., -0.2),
    Ellipse((0., 0.35), (0.21, 0.25), 0., 0.1),
    Ellipse((0., 0.1), (0.046, 0.046), 0., 0.1),
    Ellipse((0., -0.1), (0.046, 0.046), 0., 0.1),
    Ellipse((-0.08, -0.605), (0.046, 0.023), 0., 0.1),
    Ellipse((0., -0.606), (0.023, 0.023), 0., 0.1),
    Ellipse((0.06, -0.605), (0.023, 0.046), 0., 0.1),
]

SHEPP_3D = [
    Ellipse((0., 0., 0.), (0.69, 0.92, 0.81), 0., 1.),
    Ellipse((0., -0.0184, 0.), (0.6624, 0.874, 0.78), 0., -0.8),
    Ellipse((0.22, 0., 0.), (0.11, 0.31, 0.22), -18., -0.2),
    Ellipse((-0.22, 0., 0.), (0.16, 0.41, 0.28), 18., -0.2),
    Ellipse((0., 0.35, -0.15), (0.21, 0.25, 0.41), 0., 0.1),
    Ellipse((0., 0.1, 0.25), (0.046, 0.046, 0.05), 0., 0.1),
    Ellipse((0., -0.1, 0.25), (0.046, 0.046, 0.05), 0., 0.1),
    Ellipse((-0.08, -0.605, 0.), (0.046, 0.023, 0.05), 0., 0.1),
    Ellipse((0., -0.606, 0.), (0.023, 0.023, 0.02), 0., 0.1),
    Ellipse((0.06, -0.605, 0.), (0.023, 0.046, 0.02), 0., 0.1),
]

PRESETS = {
    'shepp2d': ((128, 128), SHEPP_2D),
    'shepp3d': ((64, 64, 64), SHEPP_3D),
    'line256': ((256, 256), SHEPP_2D),
}


def _coordinates(shape):
    return np.meshgrid(*[sample_coordinates(n, 2.) for n in shape], indexing='ij')


def check_spec(spec):
    ndim = len(spec.shape)
    if not 1 <= ndim <= 3 or any(n < 1 for n in spec.shape):
        raise InvalidArgument_Error("phantom shape must have 1 to 3 sizes >= 1, got {0}".format(spec.shape))
    if len(spec.phase) != 6:
        raise InvalidArgument_Error("phase map needs 6 quadratic coefficients, got {0}".format(len(spec.phase)))
    for e in spec.ellipses:
        if len(e.center) != ndim or len(e.axes) != ndim:
            raise InvalidArgument_Error("ellipse {0} does not have {1} dimensions".format(e, ndim))
        if any(a <= 0 for a in e.axes) or any(abs(c) > 1 for c in e.center):
            raise InvalidArgument_Error("ellipse {0} lies outside the field of view".format(e))
        if not np.isfinite(e.amplitude):
            raise InvalidArgument_Error("ellipse amplitude must be finite, got {0}".format(e.amplitude))
    if spec.texture < 0:
        raise InvalidArgument_Error("texture amplitude must be >= 0, got {0}".format(spec.texture))


def phantom_spec(preset, shape=None, phase=DEFAULT_PHASE, texture=0., seed=0):
    if preset not in PRESETS:
        raise InvalidArgument_Error("unknown phantom preset {0}, choose from {1}".format(preset, sorted(PRESETS)))
    default_shape, ellipses = PRESETS[preset]
    shape = tuple(int(n) for n in (shape or default_shape))
    if len(shape) != len(default_shape):
        raise InvalidArgument_Error("preset {0} is {1}D, got shape {2}".format(preset, len(default_shape), shape))
    spec = PhantomSpec(shape, list(ellipses), tuple(phase), float(texture), seed)
    check_spec(spec)
    return spec


def make_phantom(spec):
    """sum of ellipse indicators times amplitudes, times exp(i phase(x, y))"""
    check_spec(spec)
    coords = _coordinates(spec.shape)
    img = np.zeros(spec.shape, dtype=np.complex128)
    for e in spec.ellipses:
        theta = np.radians(e.angle)
        d = [c - c0 for c, c0 in zip(coords, e.center)]
        if len(d) >= 2:
            u = d[0] * np.cos(theta) + d[1] * np.sin(theta)
            v = -d[0] * np.sin(theta) + d[1] * np.cos(theta)
            d = [u, v] + d[2:]
        inside = sum((di / a) ** 2 for di, a in zip(d, e.axes)) <= 1
        img[inside] += e.amplitude
    if spec.texture > 0:
        rng = np.random.default_rng(spec.seed)
        field = gaussian_filter(rng.standard_normal(spec.shape), TEXTURE_WIDTH)
        field /= max(field.std(), np.finfo(float).tiny)
        img *= 1. + spec.texture * field
    x = coords[0]
    y = coords[1] if len(coords) > 1 else np.zeros_like(x)
    c0, cx, cy, cxx, cxy, cyy = spec.phase
    return img * np.exp(1j * (c0 + cx * x + cy * y + cxx * x ** 2 + cxy * x * y + cyy * y ** 2))


def make_test_line(img, row):
    img = np.asarray(img)
    if img.ndim != 2:
        raise InvalidArgument_Error("test lines come from 2D images, got {0}D".format(img.ndim))
    if not 0 <= row < img.shape[0]:
        raise InvalidArgument_Error("row {0} out of range [0, {1})".format(row, img.shape[0]))
    return img[row].copy()


def insert_test_line(img, row, line):
    out = np.array(img, dtype=np.complex128)
    if not 0 <= row < out.shape[0] or np.shape(line) != out.shape[1:]:
        raise InvalidArgument_Error("cannot insert a line of shape {0} at row {1}".format(np.shape(line), row))
    out[row] = line
    return out


def sparse_test_signal(line, basis_kind, K):
    """the best K-term approximation of a line in a basis"""
    basis = make_basis(basis_kind, np.shape(line))
    return synthesize(basis, hard_threshold(analyze(basis, line), K))


def preset_image(preset, N=None, texture=0., seed=0):
    """
    image of a preset; N overrides the size along every axis. line256 returns row
    N/2 + N/8 of the 2D phantom, which crosses the inner structures.
    """
    if preset not in PRESETS:
        raise InvalidArgument_Error("unknown phantom preset {0}, choose from {1}".format(preset, sorted(PRESETS)))
    shape = None if N is None else (int(N),) * len(PRESETS[preset][0])
    img = make_phantom(phantom_spec(preset, shape, texture=texture, seed=seed))
    if preset == 'line256':
        n = img.shape[0]
        return make_test_line(img, n // 2 + n // 8)
    return img
