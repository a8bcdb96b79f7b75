"""
Measurement noise, the chi-square residual estimator and the fidelity bound
epsilon^2, plus reconstruction error metrics.

sigma is the standard deviation of each of the real and imaginary parts of a
measurement, so for M residuals drawn from the noise model chi2 follows a
chi-square distribution with 2M degrees of freedom.
"""
import math
from collections import namedtuple

import numpy as np
from scipy.stats import norm

from spreadsense.errors import InvalidArgument_Error
from spreadsense.operators import KSpaceData

DEFAULT_PERCENTILE = 0.99
RECOVERY_THRESHOLD = 1e-3

NoiseModel = namedtuple('NoiseModel', ['sigma', 'seed'])
FidelityBound = namedtuple('FidelityBound', ['M', 'percentile', 'eps2'])


def make_noise_model(sigma, seed=0):
    if not sigma >= 0 or not math.isfinite(sigma):
        raise InvalidArgument_Error("noise sigma must be finite and >= 0, got {0}".format(sigma))
    return NoiseModel(float(sigma), seed)


def sigma_from_snr(rho, snr):
    """input snr = mean |rho| / sigma"""
    if not snr > 0:
        raise InvalidArgument_Error("snr must be positive, got {0}".format(snr))
    mean_mag = float(np.mean(np.abs(rho)))
    if mean_mag == 0:
        raise InvalidArgument_Error("cannot set a noise level from a zero signal")
    return mean_mag / snr


def add_noise(data, model):
    if model.sigma == 0:
        return KSpaceData(np.array(data.values, dtype=np.complex128), data.indices)
    rng = np.random.default_rng(model.seed)
    n = np.shape(data.values)
    noise = rng.normal(0., model.sigma, n) + 1j * rng.normal(0., model.sigma, n)
    return KSpaceData(np.asarray(data.values, dtype=np.complex128) + noise, data.indices)


def chi2(residual, sigma):
    """sum of |residual_b|^2 / sigma^2; residual may be KSpaceData or an array"""
    if not sigma > 0:
        raise InvalidArgument_Error("chi2 needs sigma > 0, got {0}".format(sigma))
    values = residual.values if isinstance(residual, KSpaceData) else residual
    values = np.asarray(values)
    return float(np.sum(values.real ** 2 + values.imag ** 2) / sigma ** 2)


def epsilon_squared(M, percentile=DEFAULT_PERCENTILE):
    """
    `percentile` quantile of chi-square with k = 2M degrees of freedom, by the
    Wilson-Hilferty cube approximation k (1 - 2/(9k) + z sqrt(2/(9k)))**3.
    """
    if M < 1:
        raise InvalidArgument_Error("need at least one measurement, got M={0}".format(M))
    if not 0 < percentile < 1:
        raise InvalidArgument_Error("percentile must be in (0, 1), got {0}".format(percentile))
    k = 2. * M
    h = 2. / (9. * k)
    z = norm.ppf(percentile)
    return k * (1. - h + z * math.sqrt(h)) ** 3


def fidelity_bound(M, percentile=DEFAULT_PERCENTILE):
    return FidelityBound(int(M), percentile, epsilon_squared(M, percentile))


def relative_error(rho, rho_hat):
    rho = np.asarray(rho)
    rho_hat = np.asarray(rho_hat)
    if rho.shape != rho_hat.shape:
        raise InvalidArgument_Error("shapes differ: {0} vs {1}".format(rho.shape, rho_hat.shape))
    ref = np.linalg.norm(rho)
    if ref == 0:
        raise InvalidArgument_Error("relative error against a zero reference")
    return float(np.linalg.norm(rho - rho_hat) / ref)


def is_recovered(rho, rho_hat, threshold=RECOVERY_THRESHOLD):
    """inclusive: an error of exactly threshold counts as recovered"""
    err = relative_error(rho, rho_hat)
    return err <= threshold or math.isclose(err, threshold, rel_tol=1e-9)
