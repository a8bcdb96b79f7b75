"""
Mutual coherence between the spread-spectrum sensing system F C U and a
sparsity basis, in the single dimension setting: the signal lives on N
samples, is up-sampled to N_c and chirp modulated there.
"""
import math
import sys
from collections import namedtuple

import numpy as np
import pandas as pd

from spreadsense.errors import InvalidArgument_Error
from spreadsense.grid import CONSTANT, constant_chirp, make_fov, make_grids
from spreadsense.operators import ChirpOp, fourier_forward, upsample
from spreadsense.sparsity import BASIS_KINDS, make_basis, synthesize

CoherenceReport = namedtuple('CoherenceReport', ['basis', 'w_bar', 'N', 'Nc', 'mu', 'product'])

TABLE_COLUMNS = ['basis', 'w_bar', 'N', 'N_c', 'mu', 'Nc_mu2']
TABLE_RATES = (0., 0.1, 0.3, 0.5)
COLUMN_BLOCK = 64


def _basis_columns(basis, start, stop):
    cols = np.zeros((basis.size, stop - start), dtype=np.complex128)
    e = np.zeros(basis.size, dtype=np.complex128)
    for j in range(start, stop):
        e[j] = 1
        cols[:, j - start] = synthesize(basis, e)
        e[j] = 0
    return cols


def mutual_coherence(chirp, basis_kind, N, fov=1.0, block=COLUMN_BLOCK):
    """
    mu = max |<phi_i, C U psi_j>| over all Fourier rows i of the N_c grid and basis
    columns j; columns are formed block by block from unit coefficient vectors.

    :param chirp: ChirpSpec with a single constant rate, or a float rate
    """
    if np.isscalar(chirp):
        chirp = constant_chirp(chirp)
    if chirp.mode != CONSTANT or len(chirp.rates) != 1:
        raise InvalidArgument_Error("coherence is computed in 1D with a single constant chirp rate")
    N = int(N)
    basis = make_basis(basis_kind, (N,))
    fov = make_fov(fov, 1)
    grid = make_grids((N,), chirp, fov)
    Nc = grid.Nc[0]
    diag = ChirpOp((Nc,), chirp.rates, grid.N, fov).diag[:, None]
    mu = 0.
    for start in range(0, N, block):
        stop = min(start + block, N)
        cols = _basis_columns(basis, start, stop)
        coeffs = fourier_forward(diag * upsample(cols, (Nc, stop - start)), axes=(0,))
        mu = max(mu, float(np.abs(coeffs).max()))
    return CoherenceReport(basis_kind, float(chirp.rates[0]), N, Nc, mu, Nc * mu ** 2)


def coherence_table(bases=BASIS_KINDS, rates=TABLE_RATES, N=256, verbose=False):
    rows = []
    for kind in bases:
        for w in rates:
            r = mutual_coherence(constant_chirp(w), kind, N)
            if verbose:
                print("LOG: {0} w_bar={1} N_c={2} Nc_mu2={3:.4g}".format(kind, w, r.Nc, r.product),
                      file=sys.stderr)
            rows.append({'basis': r.basis, 'w_bar': r.w_bar, 'N': r.N, 'N_c': r.Nc,
                         'mu': r.mu, 'Nc_mu2': r.product})
    return pd.DataFrame(rows, columns=TABLE_COLUMNS)


def recovery_scaling(report, K):
    """N_c mu^2 K ln(N)^4: measurement count scaling of the recovery condition, up to a constant"""
    if K < 1:
        raise InvalidArgument_Error("sparsity K must be >= 1, got {0}".format(K))
    return report.product * K * math.log(report.N) ** 4
