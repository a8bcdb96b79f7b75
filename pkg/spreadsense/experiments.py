"""
Experiment harnesses:

  phase-transition  recovery probability of K-sparse lines vs number of
                    measurements, per basis and chirp rate (1D, noiseless)
  error-curves      relative TV reconstruction error vs input snr for VDS
                    masks with and without chirp, and the best chirp rate
  varying-chirp     the same comparison on a 3D phantom with a chirp rate
                    that varies along the readout
  highres-demo      full band coverage with chirp, reconstructed on N_c

The 2D and 3D harnesses measure a phantom at twice the resolution in the phase
encoding directions and reconstruct on the coarse grid, so the data never come
from the reconstruction model itself.

Trial t of every cell uses seed = master seed + t, so masks and noise are paired
across chirp rates.
"""
import math
import os
import sys
import time
from collections import namedtuple
from concurrent.futures import ProcessPoolExecutor
from functools import lru_cache

import numpy as np
import pandas as pd

from spreadsense.errors import InvalidArgument_Error
from spreadsense.grid import (READOUT_VARYING, chirp_rates_for, constant_chirp, even_ceil,
                              make_grids, phase_axes)
from spreadsense.io.arrayfile import write_array
from spreadsense.io.config import parse_bool, parse_list, parse_value, read_config, worker_count, write_manifest
from spreadsense.noise import (DEFAULT_PERCENTILE, add_noise, epsilon_squared, is_recovered, make_noise_model,
                               relative_error, sigma_from_snr)
from spreadsense.operators import (ChirpOp, KSpaceData, SensingOperator, chirp_rates_for_signed, crop_kspace,
                                   downsample, fourier_forward, preset_schedule, resample_values, upsample)
from spreadsense.phantom import make_phantom, phantom_spec, preset_image, sparse_test_signal
from spreadsense.sampling import (FULL_GRID, PHASE_ENCODE, coverage_target, draw_uniform_mask, draw_vds_mask, embed_mask,
                                  expand_phase_encode_mask, find_p_M, make_mask, make_vds_profile)
from spreadsense.solver import DEFAULT_OPTIONS, PHASE_TRANSITION_OPTIONS, solve_bp
from spreadsense.sparsity import BASIS_KINDS, make_basis

PHASE_TRANSITION = 'phase-transition'
ERROR_CURVES = 'error-curves'
VARYING_CHIRP = 'varying-chirp'
HIGHRES_DEMO = 'highres-demo'
EXPERIMENT_KINDS = (PHASE_TRANSITION, ERROR_CURVES, VARYING_CHIRP, HIGHRES_DEMO)

NO_CHIRP = 'none'
SCHEDULE = 'schedule'

WOPT_SWEEP = [0., 0.1, 0.2, 0.3, 0.4, 0.5]
SNR_SWEEP = [2., 4., 8., 16., 32., 64.]
PHASE_TRANSITION_COVERAGES = [0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5, 0.55, 0.6, 0.7]

ExperimentConfig = namedtuple('ExperimentConfig', [
    'kind', 'N', 'bases', 'rates', 'coverages', 'measurements', 'snrs', 'trials', 'seed', 'K',
    'phantom', 'texture', 'schedule', 'schedule_scale', 'percentile', 'max_iter', 'tol', 'tv_iter',
    'workers', 'verbose', 'out_dir'])

# desk-scale defaults per kind
KIND_DEFAULTS = {
    PHASE_TRANSITION: dict(N=(256,), bases=list(BASIS_KINDS), rates=[0., 0.1, 0.3, 0.5],
                           coverages=PHASE_TRANSITION_COVERAGES, snrs=[], trials=100, K=25,
                           phantom='line256', max_iter=PHASE_TRANSITION_OPTIONS.max_iter,
                           tol=PHASE_TRANSITION_OPTIONS.tol),
    ERROR_CURVES: dict(N=(128, 128), bases=[], rates=WOPT_SWEEP, coverages=[0.2], snrs=SNR_SWEEP,
                       trials=10, K=0, phantom='shepp2d'),
    VARYING_CHIRP: dict(N=(64, 64, 64), bases=[], rates=[], coverages=[0.15, 0.25, 0.5], snrs=[32.],
                        trials=5, K=0, phantom='shepp3d'),
    HIGHRES_DEMO: dict(N=(128, 128), bases=[], rates=[0.3], coverages=[1.], snrs=[], trials=1, K=0,
                       phantom='shepp2d'),
}
COMMON_DEFAULTS = dict(measurements=[], seed=0, texture=0., schedule='brain', schedule_scale=0.5,
                       percentile=DEFAULT_PERCENTILE, max_iter=DEFAULT_OPTIONS.max_iter, tol=DEFAULT_OPTIONS.tol,
                       tv_iter=DEFAULT_OPTIONS.tv_iter, workers=0, verbose=False, out_dir=None)

CONFIG_TYPES = {
    'N': lambda v: tuple(parse_list(v, int)), 'bases': lambda v: parse_list(v, str),
    'rates': parse_list, 'coverages': parse_list, 'measurements': lambda v: parse_list(v, int),
    'snrs': parse_list, 'trials': lambda v: parse_value(v, int), 'seed': lambda v: parse_value(v, int),
    'K': lambda v: parse_value(v, int), 'phantom': str, 'texture': lambda v: parse_value(v, float),
    'schedule': str, 'schedule_scale': lambda v: parse_value(v, float),
    'percentile': lambda v: parse_value(v, float), 'max_iter': lambda v: parse_value(v, int),
    'tol': lambda v: parse_value(v, float), 'tv_iter': lambda v: parse_value(v, int),
    'workers': lambda v: parse_value(v, int), 'verbose': parse_bool, 'out_dir': str,
}

ExperimentResult = namedtuple('ExperimentResult', ['trials', 'summary', 'extra'])


def make_config(kind, **overrides):
    if kind not in EXPERIMENT_KINDS:
        raise InvalidArgument_Error("unknown experiment {0}, choose from {1}".format(kind, ', '.join(EXPERIMENT_KINDS)))
    unknown = set(overrides) - set(ExperimentConfig._fields)
    if unknown:
        raise InvalidArgument_Error("unknown config keys: {0}".format(', '.join(sorted(unknown))))
    values = dict(COMMON_DEFAULTS)
    values.update(KIND_DEFAULTS[kind])
    values.update(overrides)
    values['kind'] = kind
    values['N'] = tuple(int(n) for n in np.atleast_1d(values['N']))
    config = ExperimentConfig(**values)
    check_config(config)
    return config


def load_config(path, **overrides):
    entries = read_config(path)
    kind = entries.pop('kind', None)
    if kind is None:
        raise InvalidArgument_Error("{0}: missing 'kind'".format(path))
    values = {}
    for key, raw in entries.items():
        if key not in CONFIG_TYPES:
            raise InvalidArgument_Error("{0}: unknown key {1}".format(path, key))
        values[key] = CONFIG_TYPES[key](raw)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return make_config(kind, **values)


def check_config(c):
    if c.trials < 1:
        raise InvalidArgument_Error("trial count must be >= 1, got {0}".format(c.trials))
    if any(not 0 < x <= 1 for x in c.coverages):
        raise InvalidArgument_Error("coverages must be in (0, 1], got {0}".format(c.coverages))
    if any(m < 1 for m in c.measurements):
        raise InvalidArgument_Error("measurement counts must be >= 1, got {0}".format(c.measurements))
    if any(not math.isfinite(w) for w in c.rates):
        raise InvalidArgument_Error("chirp rates must be finite, got {0}".format(c.rates))
    if any(not s > 0 for s in c.snrs):
        raise InvalidArgument_Error("snr values must be positive (inf for noiseless), got {0}".format(c.snrs))
    for b in c.bases:
        if b not in BASIS_KINDS:
            raise InvalidArgument_Error("unknown basis {0}".format(b))
    expected_ndim = {PHASE_TRANSITION: 1, ERROR_CURVES: 2, VARYING_CHIRP: 3, HIGHRES_DEMO: 2}[c.kind]
    if len(c.N) != expected_ndim:
        raise InvalidArgument_Error("{0} runs on {1}D grids, got N={2}".format(c.kind, expected_ndim, c.N))
    if c.kind == PHASE_TRANSITION and not 1 <= c.K <= c.N[0]:
        raise InvalidArgument_Error("sparsity K must be in [1, N], got {0}".format(c.K))
    if c.kind == HIGHRES_DEMO and len(c.rates) != 1:
        raise InvalidArgument_Error("highres-demo takes a single chirp rate, got {0}".format(c.rates))


def solver_options(c):
    base = PHASE_TRANSITION_OPTIONS if c.kind == PHASE_TRANSITION else DEFAULT_OPTIONS
    return base._replace(max_iter=c.max_iter, tol=c.tol, tv_iter=c.tv_iter)


def trial_seeds(c):
    return [c.seed + t for t in range(c.trials)]


def _log(c, msg):
    if c.verbose:
        print("LOG: " + msg, file=sys.stderr)


def _run_tasks(fn, tasks, workers):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def _chirp_for(w, ndim):
    return constant_chirp(w) if ndim == 1 else constant_chirp(w, w)


@lru_cache(maxsize=8)
def _fine_phantom(preset, shape, texture, seed):
    return make_phantom(phantom_spec(preset, shape, texture=texture, seed=seed))


@lru_cache(maxsize=8)
def _test_line(N):
    return preset_image('line256', N)


def fine_shape(N):
    """twice the resolution in the phase encoding directions"""
    return tuple(2 * n if ax in phase_axes(len(N)) else n for ax, n in enumerate(N))


def mismatch_kspace(fine_img, grid, chirp):
    """
    Full k-space on the coarse modulation grid N_u computed from an image sampled on a
    finer grid over the same field of view, scaled to the coarse chain's normalization.
    """
    ndim = grid.ndim
    w = chirp_rates_for(chirp, ndim)
    fine_u = list(fine_img.shape)
    for ax, wa in zip(phase_axes(ndim), w):
        fine_u[ax] = max(grid.Nu[ax], even_ceil(fine_img.shape[ax] + 2 * wa * grid.N[ax]))
    u = upsample(fine_img, tuple(fine_u))
    if chirp.mode == READOUT_VARYING:
        c = ChirpOp(fine_u, chirp.rates, grid.N, grid.fov)
        k = fourier_forward(c.forward(fourier_forward(u, axes=(2,))), axes=(0, 1))
    else:
        c = ChirpOp(fine_u, chirp_rates_for_signed(chirp, ndim), grid.N, grid.fov)
        k = fourier_forward(c.forward(u))
    return crop_kspace(k, grid.Nu) * math.sqrt(np.prod(grid.Nc) / float(np.prod(fine_img.shape)))


def _reconstruct(kspace, grid, chirp, mask, reference, snr, seed, options, percentile):
    """measure, add noise, solve the TV problem; returns (report, sigma_eff, eps2, zero_fill_error)"""
    op = SensingOperator(grid.Nc, grid.Nu, chirp, mask.indices, grid.N, grid.fov)
    data = KSpaceData(np.ravel(kspace)[op.mask.indices], op.mask.indices)
    sigma = 0. if math.isinf(snr) else sigma_from_snr(reference, snr)
    sigma_eff = sigma * math.sqrt(np.prod(grid.Nc) / float(np.prod(grid.N)))
    data = add_noise(data, make_noise_model(sigma_eff, seed))
    eps2 = epsilon_squared(mask.count, percentile)
    eps = sigma_eff * math.sqrt(eps2)
    report = solve_bp('tv', op, data, eps, options=options, sigma=sigma_eff if sigma_eff > 0 else 1.)
    zero_fill = resample_values(op.adjoint(data.values), grid.N)
    return report, sigma_eff, eps2, relative_error(reference, zero_fill)


# phase transition

PTTask = namedtuple('PTTask', ['basis', 'w_bar', 'M', 'trial', 'seed', 'N', 'K', 'options'])


def phase_transition_trial(task):
    N = task.N
    rho = sparse_test_signal(_test_line(N), task.basis, task.K)
    chirp = constant_chirp(task.w_bar)
    grid = make_grids((N,), chirp)
    mask = draw_uniform_mask(task.M, grid.Nc, task.seed)
    op = SensingOperator((N,), grid.Nc, chirp, mask.indices, (N,), grid.fov)
    report = solve_bp('l1', op, op.forward(rho), 0., basis=make_basis(task.basis, (N,)), options=task.options)
    return {'basis': task.basis, 'w_bar': task.w_bar, 'M': task.M, 'N_c': grid.Nc[0], 'trial': task.trial,
            'seed': task.seed, 'recovered': bool(is_recovered(rho, report.image)),
            'rel_error': relative_error(rho, report.image), 'iterations': report.iterations,
            'converged': report.converged}


def _measurement_counts(c, Nc):
    if c.measurements:
        counts = list(c.measurements)
    else:
        counts = [max(1, int(round(x * c.N[0]))) for x in c.coverages]
    capped = [min(m, Nc) for m in counts]
    if capped != counts:
        print("WARNING: measurement counts capped at N_c = {0}".format(Nc), file=sys.stderr)
    return sorted(set(capped))


def run_phase_transition(c):
    options = solver_options(c)
    tasks = []
    for basis in c.bases:
        for w in c.rates:
            Nc = make_grids(c.N, constant_chirp(w)).Nc[0]
            for M in _measurement_counts(c, Nc):
                for t, seed in enumerate(trial_seeds(c)):
                    tasks.append(PTTask(basis, float(w), M, t, seed, c.N[0], c.K, options))
    _log(c, "phase transition: {0} solves".format(len(tasks)))
    records = _run_tasks(phase_transition_trial, tasks, worker_count(c.workers))
    trials = pd.DataFrame(records).sort_values(['basis', 'w_bar', 'M', 'trial']).reset_index(drop=True)
    summary = trials.groupby(['basis', 'w_bar', 'M'], sort=True).agg(
        trials=('recovered', 'size'), recovered_count=('recovered', 'sum')).reset_index()
    summary['recovered_count'] = summary['recovered_count'].astype(int)
    summary['probability'] = summary['recovered_count'] / summary['trials']
    return ExperimentResult(trials, summary, None)


# error curves

ECTask = namedtuple('ECTask', ['N', 'coverage', 'snr', 'w_bar', 'trial', 'seed', 'p', 'beta', 'target',
                               'phantom', 'texture', 'phantom_seed', 'options', 'percentile'])


def error_curve_trial(task):
    fine = _fine_phantom(task.phantom, fine_shape(task.N), task.texture, task.phantom_seed)
    reference = resample_values(fine, task.N)
    chirp = _chirp_for(task.w_bar, len(task.N))
    grid = make_grids(task.N, chirp)
    band = draw_vds_mask(make_vds_profile(task.p, task.beta, task.N), task.N, task.seed, target=task.target)
    mask = embed_mask(band, grid.Nu)
    kspace = mismatch_kspace(fine, grid, chirp)
    report, sigma, eps2, zero_fill_error = _reconstruct(kspace, grid, chirp, mask, reference, task.snr, task.seed,
                                                        task.options, task.percentile)
    estimate = resample_values(report.image, task.N)
    return {'coverage': task.coverage, 'snr': task.snr, 'w_bar': task.w_bar, 'trial': task.trial,
            'seed': task.seed, 'N_c': 'x'.join(str(n) for n in grid.Nc), 'M': task.target,
            'M_actual': mask.count, 'p': task.p, 'beta': task.beta, 'sigma': sigma, 'eps2': eps2,
            'chi2_final': report.chi2, 'iterations': report.iterations, 'converged': report.converged,
            'rel_error': relative_error(reference, estimate), 'zero_fill_error': zero_fill_error}


def _summarize(trials, keys):
    summary = trials.groupby(keys, sort=True)['rel_error'].agg(['mean', 'std', 'count']).reset_index()
    # unbiased estimator; a single trial has no spread
    summary['std'] = summary['std'].fillna(0.)
    return summary.rename(columns={'mean': 'mean_error', 'std': 'std_error', 'count': 'trials'})


def best_chirp_rates(summary):
    """w_opt per (coverage, snr): the rate with the lowest mean error, lowest rate on ties"""
    rows = []
    for (cov, snr), cell in summary.groupby(['coverage', 'snr'], sort=True):
        cell = cell.sort_values(['mean_error', 'w_bar'])
        best = cell.iloc[0]
        base = cell[cell['w_bar'] == 0.]['mean_error']
        rows.append({'coverage': cov, 'snr': snr, 'w_opt': best['w_bar'], 'mean_error': best['mean_error'],
                     'baseline_error': base.iloc[0] if len(base) else float('nan')})
    return pd.DataFrame(rows, columns=['coverage', 'snr', 'w_opt', 'mean_error', 'baseline_error'])


def _vds_parameters(c, shape):
    params = {}
    for cov in c.coverages:
        M = coverage_target(cov, shape)
        params[cov] = (M,) + find_p_M(M, shape)
        _log(c, "coverage {0}: M={1} p_M={2} beta={3:.4f}".format(cov, *params[cov]))
    return params


def run_error_vs_snr(c):
    options = solver_options(c)
    params = _vds_parameters(c, c.N)
    tasks = []
    for cov in c.coverages:
        M, p, beta = params[cov]
        for snr in c.snrs:
            for w in c.rates:
                for t, seed in enumerate(trial_seeds(c)):
                    tasks.append(ECTask(c.N, cov, float(snr), float(w), t, seed, p, beta, M, c.phantom,
                                        c.texture, c.seed, options, c.percentile))
    _log(c, "error curves: {0} solves".format(len(tasks)))
    records = _run_tasks(error_curve_trial, tasks, worker_count(c.workers))
    trials = pd.DataFrame(records).sort_values(['coverage', 'snr', 'w_bar', 'trial']).reset_index(drop=True)
    summary = _summarize(trials, ['coverage', 'snr', 'w_bar'])
    return ExperimentResult(trials, summary, best_chirp_rates(summary))


# readout-varying chirp

VCTask = namedtuple('VCTask', ['N', 'coverage', 'snr', 'chirp', 'trial', 'seed', 'p', 'beta', 'target',
                               'phantom', 'texture', 'phantom_seed', 'schedule', 'schedule_scale',
                               'options', 'percentile'])


def varying_chirp_trial(task):
    N = task.N
    fine = _fine_phantom(task.phantom, fine_shape(N), task.texture, task.phantom_seed)
    reference = resample_values(fine, N)
    if task.chirp == SCHEDULE:
        chirp = preset_schedule(task.schedule, n_readout=N[2], scale=task.schedule_scale)
    else:
        chirp = constant_chirp(0., 0.)
    grid = make_grids(N, chirp)
    plane = draw_vds_mask(make_vds_profile(task.p, task.beta, N[:2]), N[:2], task.seed, mode=PHASE_ENCODE,
                          target=task.target)
    mask = expand_phase_encode_mask(embed_mask(plane, grid.Nu[:2]), N[2])
    kspace = mismatch_kspace(fine, grid, chirp)
    report, sigma, eps2, zero_fill_error = _reconstruct(kspace, grid, chirp, mask, reference, task.snr, task.seed,
                                                        task.options, task.percentile)
    estimate = resample_values(report.image, N)
    wmax = chirp.max_abs()
    return {'coverage': task.coverage, 'snr': task.snr, 'chirp': task.chirp, 'w_bar_x_max': wmax[0],
            'w_bar_y_max': wmax[-1], 'trial': task.trial, 'seed': task.seed,
            'N_c': 'x'.join(str(n) for n in grid.Nc), 'M': task.target * N[2], 'M_actual': mask.count,
            'p': task.p, 'beta': task.beta, 'sigma': sigma, 'eps2': eps2, 'chi2_final': report.chi2,
            'iterations': report.iterations, 'converged': report.converged,
            'rel_error': relative_error(reference, estimate), 'zero_fill_error': zero_fill_error}


def run_varying_chirp_validation(c):
    options = solver_options(c)
    params = _vds_parameters(c, c.N[:2])
    tasks = []
    for cov in c.coverages:
        M, p, beta = params[cov]
        for snr in c.snrs:
            for label in (NO_CHIRP, SCHEDULE):
                for t, seed in enumerate(trial_seeds(c)):
                    tasks.append(VCTask(c.N, cov, float(snr), label, t, seed, p, beta, M, c.phantom, c.texture,
                                        c.seed, c.schedule, c.schedule_scale, options, c.percentile))
    _log(c, "varying chirp: {0} solves".format(len(tasks)))
    records = _run_tasks(varying_chirp_trial, tasks, worker_count(c.workers))
    trials = pd.DataFrame(records).sort_values(['coverage', 'snr', 'chirp', 'trial']).reset_index(drop=True)
    return ExperimentResult(trials, _summarize(trials, ['coverage', 'snr', 'chirp']), None)


# high resolution

def run_high_resolution_demo(c):
    """
    Sample the whole N band with a chirp and reconstruct on N_c. extra holds the
    N_c image and its down-sampled N grid counterpart.
    """
    options = solver_options(c)
    w = float(c.rates[0])
    fine = _fine_phantom(c.phantom, fine_shape(c.N), c.texture, c.seed)
    reference = resample_values(fine, c.N)
    chirp = _chirp_for(w, len(c.N))
    grid = make_grids(c.N, chirp)
    target = coverage_target(c.coverages[0], c.N)
    if target == int(np.prod(c.N)):
        band = make_mask(FULL_GRID, c.N, np.arange(target), target=target)
    else:
        M, p, beta = _vds_parameters(c, c.N)[c.coverages[0]]
        band = draw_vds_mask(make_vds_profile(p, beta, c.N), c.N, c.seed, target=M)
    mask = embed_mask(band, grid.Nu)
    snr = c.snrs[0] if c.snrs else float('inf')
    kspace = mismatch_kspace(fine, grid, chirp)
    report, sigma, eps2, zero_fill_error = _reconstruct(kspace, grid, chirp, mask, reference, snr, c.seed, options,
                                                        c.percentile)
    image_Nc = report.image
    image_N = downsample(image_Nc, grid.N)
    rec = {'w_bar': w, 'N': 'x'.join(str(n) for n in grid.N), 'N_c': 'x'.join(str(n) for n in grid.Nc),
           'M_actual': mask.count, 'snr': snr, 'sigma': sigma, 'eps2': eps2, 'chi2_final': report.chi2,
           'iterations': report.iterations, 'converged': report.converged,
           'rel_error': relative_error(reference, resample_values(image_Nc, grid.N)),
           'zero_fill_error': zero_fill_error}
    trials = pd.DataFrame([rec])
    return ExperimentResult(trials, trials, {'Nc': image_Nc, 'N': image_N})


RUNNERS = {
    PHASE_TRANSITION: run_phase_transition,
    ERROR_CURVES: run_error_vs_snr,
    VARYING_CHIRP: run_varying_chirp_validation,
    HIGHRES_DEMO: run_high_resolution_demo,
}


def config_snapshot(c):
    snap = c._asdict()
    snap['N'] = list(c.N)
    return snap


def write_result(c, result, out_dir, timings):
    """write CSVs/images and the run manifest; returns the list of written paths"""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    if c.kind == HIGHRES_DEMO:
        for key in ('Nc', 'N'):
            path = os.path.join(out_dir, 'highres.{0}.s2cx'.format(key))
            write_array(path, result.extra[key])
            paths.append(path)
        path = os.path.join(out_dir, 'highres.summary.csv')
        result.summary.to_csv(path, index=False)
        paths.append(path)
    else:
        for name, df in (('trials', result.trials), ('summary', result.summary)):
            path = os.path.join(out_dir, '{0}.{1}.csv'.format(c.kind, name))
            df.to_csv(path, index=False)
            paths.append(path)
        if c.kind == ERROR_CURVES:
            path = os.path.join(out_dir, 'error-curves.wopt.csv')
            result.extra.to_csv(path, index=False)
            paths.append(path)
    path = os.path.join(out_dir, 'run_manifest.json')
    write_manifest(path, config_snapshot(c), {'master_seed': c.seed, 'trial_seeds': trial_seeds(c)}, timings)
    paths.append(path)
    return paths


def run_experiment(c, out_dir=None):
    start = time.time()
    result = RUNNERS[c.kind](c)
    timings = {'run_seconds': time.time() - start}
    out_dir = out_dir or c.out_dir
    if out_dir:
        for path in write_result(c, result, out_dir, timings):
            _log(c, "wrote {0}".format(path))
    return result
