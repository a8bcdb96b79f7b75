import os

import numpy as np
import pandas as pd
import pytest

from spreadsense.errors import InvalidArgument_Error
from spreadsense.experiments import (ERROR_CURVES, EXPERIMENT_KINDS, HIGHRES_DEMO, NO_CHIRP, PHASE_TRANSITION,
                                     SCHEDULE, VARYING_CHIRP, best_chirp_rates, fine_shape, load_config, make_config,
                                     mismatch_kspace, run_experiment, trial_seeds)
from spreadsense.grid import constant_chirp, make_grids
from spreadsense.io.config import read_manifest
from spreadsense.operators import downsample, fourier_forward, resample_values, upsample

DATA_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'data')
CONFIG_FILES = {
    PHASE_TRANSITION: 'phase_transition.cfg',
    ERROR_CURVES: 'error_curves.cfg',
    VARYING_CHIRP: 'varying_chirp.cfg',
    HIGHRES_DEMO: 'highres_demo.cfg',
}


@pytest.mark.parametrize("kind", EXPERIMENT_KINDS)
def test_shipped_configs_load(kind):
    c = load_config(os.path.join(DATA_DIR, CONFIG_FILES[kind]), trials=3, seed=None)
    assert c.kind == kind
    assert c.trials == 3
    assert c.seed == 0


def test_make_config_checks():
    assert make_config(PHASE_TRANSITION).N == (256,)
    with pytest.raises(InvalidArgument_Error):
        make_config('no-such-kind')
    with pytest.raises(InvalidArgument_Error):
        make_config(PHASE_TRANSITION, colour='red')
    with pytest.raises(InvalidArgument_Error):
        make_config(ERROR_CURVES, N=(64,))
    with pytest.raises(InvalidArgument_Error):
        make_config(ERROR_CURVES, coverages=[0.])
    with pytest.raises(InvalidArgument_Error):
        make_config(HIGHRES_DEMO, rates=[0.1, 0.2])
    with pytest.raises(InvalidArgument_Error):
        make_config(PHASE_TRANSITION, bases=['wavelet'])
    with pytest.raises(InvalidArgument_Error):
        make_config(PHASE_TRANSITION, trials=0)


def test_load_config_rejects_unknown_keys(tmp_path):
    path = tmp_path / 'bad.cfg'
    path.write_text("kind = error-curves\nsnr = 4\n")
    with pytest.raises(InvalidArgument_Error):
        load_config(str(path))
    path.write_text("N = 64, 64\n")
    with pytest.raises(InvalidArgument_Error, match='kind'):
        load_config(str(path))


def test_trial_seeds_are_paired():
    assert trial_seeds(make_config(ERROR_CURVES, seed=10, trials=3)) == [10, 11, 12]


def test_fine_shape():
    assert fine_shape((8, 6)) == (16, 12)
    assert fine_shape((8, 8, 4)) == (16, 16, 4)


def test_mismatch_of_band_limited_image(rng):
    N = (8, 8)
    coarse = rng.standard_normal(N) + 1j * rng.standard_normal(N)
    fine = upsample(coarse, fine_shape(N))
    chirp = constant_chirp(0., 0.)
    grid = make_grids(N, chirp)
    k = mismatch_kspace(fine, grid, chirp)
    np.testing.assert_allclose(k, fourier_forward(resample_values(fine, N)), atol=1e-12)


def test_mismatch_shape_with_chirp(rng):
    N = (8, 8)
    fine = rng.standard_normal(fine_shape(N)) + 0j
    chirp = constant_chirp(0.3, 0.3)
    grid = make_grids(N, chirp)
    assert mismatch_kspace(fine, grid, chirp).shape == grid.Nu


def test_phase_transition_full_sampling():
    c = make_config(PHASE_TRANSITION, N=(32,), bases=['dirac'], rates=[0.], measurements=[16, 32, 40], trials=2,
                    K=3, workers=1, max_iter=1000)
    result = run_experiment(c)
    s = result.summary
    assert list(s.columns) == ['basis', 'w_bar', 'M', 'trials', 'recovered_count', 'probability']
    assert s['M'].tolist() == [16, 32]
    assert s.loc[s.M == 32, 'probability'].iloc[0] == 1.
    assert len(result.trials) == 4
    assert result.trials['seed'].tolist() == [0, 1, 0, 1]


def test_error_curves_noiseless(tmp_path):
    c = make_config(ERROR_CURVES, N=(16, 16), rates=[0., 0.3], coverages=[1.], snrs=[float('inf')], trials=2,
                    workers=1, max_iter=1000)
    result = run_experiment(c, str(tmp_path))
    assert len(result.trials) == 4
    assert set(result.summary.columns) >= {'coverage', 'snr', 'w_bar', 'mean_error', 'std_error', 'trials'}
    assert result.trials['M_actual'].tolist() == [256] * 4
    assert result.trials.loc[result.trials.w_bar == 0., 'rel_error'].max() <= 1e-3
    assert np.all(np.isfinite(result.trials['rel_error']))
    assert len(result.extra) == 1
    assert result.extra['w_opt'].iloc[0] in (0., 0.3)
    for name in ('error-curves.trials.csv', 'error-curves.summary.csv', 'error-curves.wopt.csv',
                 'run_manifest.json'):
        assert (tmp_path / name).exists()
    manifest = read_manifest(str(tmp_path / 'run_manifest.json'))
    assert manifest['config']['kind'] == ERROR_CURVES
    assert manifest['seeds']['trial_seeds'] == [0, 1]


def test_best_chirp_rate_prefers_lower_rate_on_ties():
    summary = pd.DataFrame({'coverage': [0.2] * 3, 'snr': [8.] * 3, 'w_bar': [0.3, 0., 0.1],
                            'mean_error': [0.1, 0.2, 0.1]})
    best = best_chirp_rates(summary)
    assert best['w_opt'].iloc[0] == 0.1
    assert best['baseline_error'].iloc[0] == 0.2


def test_varying_chirp_small():
    c = make_config(VARYING_CHIRP, N=(8, 8, 8), coverages=[0.5], snrs=[float('inf')], trials=1, workers=1,
                    max_iter=10)
    result = run_experiment(c)
    assert sorted(result.trials['chirp']) == ['none', 'schedule']
    none = result.trials[result.trials.chirp == 'none'].iloc[0]
    assert none['w_bar_x_max'] == 0.
    assert none['M_actual'] % 8 == 0
    assert len(result.summary) == 2


def test_highres_demo(tmp_path):
    c = make_config(HIGHRES_DEMO, N=(16, 16), rates=[0.3], workers=1, max_iter=50)
    result = run_experiment(c, str(tmp_path))
    grid = make_grids((16, 16), constant_chirp(0.3, 0.3))
    assert result.extra['Nc'].shape == grid.Nc
    assert result.extra['N'].shape == (16, 16)
    np.testing.assert_allclose(result.extra['N'], downsample(result.extra['Nc'], (16, 16)))
    assert result.trials['M_actual'].iloc[0] == 256
    for name in ('highres.Nc.s2cx', 'highres.N.s2cx', 'highres.summary.csv', 'run_manifest.json'):
        assert (tmp_path / name).exists()


def test_error_curve_solves_converge_and_beat_zero_fill():
    c = make_config(ERROR_CURVES, N=(64, 64), rates=[0., 0.3], coverages=[0.2], snrs=[32.], trials=2, workers=1,
                    max_iter=1000)
    t = run_experiment(c).trials
    assert t['iterations'].min() > 1
    assert t['converged'].all()
    assert np.all(t['rel_error'] < t['zero_fill_error'])
    assert np.all(t['chi2_final'] <= t['eps2'] * (1 + 1e-6) * (1 + 1e-12))


@pytest.mark.slow
def test_chirp_lowers_error_and_spread_at_moderate_snr():
    c = make_config(ERROR_CURVES, N=(128, 128), rates=[0., 0.3], coverages=[0.2], snrs=[32.], trials=10)
    s = run_experiment(c).summary.set_index('w_bar')
    assert s.loc[0.3, 'mean_error'] < s.loc[0., 'mean_error']
    assert s.loc[0.3, 'std_error'] <= s.loc[0., 'std_error']


def _first_reliable_M(probability):
    hits = probability[probability >= 0.95]
    return hits.index.min() if len(hits) else float('inf')


@pytest.mark.slow
@pytest.mark.parametrize("basis", ['haar', 'fourier'])
def test_chirp_improves_recovery_across_measurement_sweep(basis):
    trials = 100
    c = make_config(PHASE_TRANSITION, bases=[basis], rates=[0., 0.3], trials=trials)
    s = run_experiment(c).summary
    p0 = s[s.w_bar == 0.].set_index('M')['probability']
    p3 = s[s.w_bar == 0.3].set_index('M')['probability']
    assert len(p0) == 12
    assert list(p0.index) == list(p3.index)
    pooled = (p0 + p3) / 2
    binomial_sigma = np.sqrt(pooled * (1 - pooled) / trials)
    assert np.all(p3 >= p0 - 2 * binomial_sigma)
    assert _first_reliable_M(p3) < _first_reliable_M(p0)


@pytest.mark.slow
def test_varying_chirp_error_not_above_unchirped():
    c = make_config(VARYING_CHIRP, N=(64, 64, 64), coverages=[0.25], snrs=[32.], trials=5)
    s = run_experiment(c).summary.set_index('chirp')
    assert s.loc[SCHEDULE, 'mean_error'] <= s.loc[NO_CHIRP, 'mean_error']
