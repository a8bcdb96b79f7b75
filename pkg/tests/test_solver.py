import math

import numpy as np
import pytest

from spreadsense.errors import InvalidArgument_Error, NumericFailure_Error
from spreadsense.grid import constant_chirp, make_grids
from spreadsense.noise import add_noise, epsilon_squared, is_recovered, make_noise_model, relative_error
from spreadsense.operators import KSpaceData, SensingOperator, sensing_operator
from spreadsense.phantom import sparse_test_signal
from spreadsense.sampling import FULL_GRID, draw_uniform_mask, make_mask
from spreadsense.solver import (DEFAULT_OPTIONS, FEASIBILITY_RTOL, PHASE_TRANSITION_OPTIONS, SolverOptions, data_scale,
                                feasibility_bound, project_l2_ball, prox_tv, soft_threshold, solve_bp)
from spreadsense.sparsity import analyze, make_basis, synthesize, tv_norm


def _op_1d(N, w, M, seed):
    chirp = constant_chirp(w)
    g = make_grids((N,), chirp)
    mask = draw_uniform_mask(M, g.Nc, seed)
    return SensingOperator((N,), g.Nc, chirp, mask.indices, (N,), g.fov)


def test_soft_threshold():
    np.testing.assert_allclose(soft_threshold(np.array([3 + 4j]), 1.), [2.4 + 3.2j])
    np.testing.assert_array_equal(soft_threshold(np.array([0.5, -0.5j, 0.]), 1.), [0, 0, 0])
    np.testing.assert_allclose(soft_threshold(np.array([-2., 2j]), 0.5), [-1.5, 1.5j])
    with pytest.raises(InvalidArgument_Error):
        soft_threshold(np.ones(2), -1.)


def test_project_l2_ball():
    nu = np.array([1., 1j])
    np.testing.assert_allclose(project_l2_ball(nu + np.array([3., 4j]), nu, 1.), nu + np.array([0.6, 0.8j]))
    inside = nu + 0.1
    np.testing.assert_array_equal(project_l2_ball(inside, nu, 1.), inside)
    np.testing.assert_array_equal(project_l2_ball(inside, nu, 0.), nu)


def test_prox_tv_trivial_cases(rng):
    x = rng.standard_normal((5, 6)) + 0j
    np.testing.assert_array_equal(prox_tv(x, 0.), x)
    flat = np.full((6, 6), 2 - 1j)
    np.testing.assert_allclose(prox_tv(flat, 0.7), flat)
    with pytest.raises(InvalidArgument_Error):
        prox_tv(x, -1.)


def test_prox_tv_step_shrinks_jump():
    lam, n = 0.2, 8
    x = np.concatenate([np.zeros(n), np.ones(n)])
    u = prox_tv(x, lam, iterations=5000)
    np.testing.assert_allclose(u[:n], lam / n, atol=2e-3)
    np.testing.assert_allclose(u[n:], 1 - lam / n, atol=2e-3)


def test_prox_tv_trace_never_increases(rng):
    x = rng.standard_normal((12, 12)) + 1j * rng.standard_normal((12, 12))
    u, trace = prox_tv(x, 0.5, iterations=40, return_trace=True)
    assert len(trace) == 40
    assert np.all(np.diff(trace) <= 0)
    assert trace[-1] <= 0.5 * tv_norm(x)
    assert tv_norm(u) < tv_norm(x)


def test_full_sampling_l1_recovery():
    N = 32
    x = np.zeros(N, dtype=complex)
    x[[3, 17, 20]] = [1., -2j, 0.5 + 0.5j]
    op = _op_1d(N, 0., N, 0)
    nu = op.forward(x)
    eps = 1e-4 * np.linalg.norm(nu)
    report = solve_bp('l1', op, nu, eps, basis=make_basis('dirac', N), options=SolverOptions(max_iter=2000, tol=1e-8))
    assert relative_error(x, report.image) < 1e-3


def test_full_sampling_tv_recovery():
    img = np.zeros((16, 16), dtype=complex)
    img[4:12, 6:10] = 1.
    chirp = constant_chirp(0.)
    g = make_grids(img.shape, chirp)
    mask = make_mask(FULL_GRID, g.Nu, np.arange(256))
    op = sensing_operator(g, chirp, mask)
    nu = op.forward(img)
    report = solve_bp('tv', op, nu, 1e-3 * np.linalg.norm(nu), options=SolverOptions(max_iter=1000))
    assert relative_error(img, report.image) < 1e-2
    assert report.image.shape == img.shape


def test_single_spike_recovered_from_few_samples():
    N = 256
    rho = np.zeros(N, dtype=complex)
    rho[100] = 1.
    op = _op_1d(N, 0., 64, seed=3)
    report = solve_bp('l1', op, op.forward(rho), 0., basis=make_basis('dirac', N), options=PHASE_TRANSITION_OPTIONS)
    assert report.iterations > 1
    assert is_recovered(rho, report.image)


def test_unchirped_sparse_line_is_recovered():
    N, M = 256, 160
    line = np.abs(np.sin(np.linspace(0, 7, N))) + np.where(np.arange(N) % 37 < 5, 1., 0.)
    rho = sparse_test_signal(line, 'dirac', 25)
    op = _op_1d(N, 0., M, seed=0)
    report = solve_bp('l1', op, op.forward(rho), 0., basis=make_basis('dirac', N), options=PHASE_TRANSITION_OPTIONS)
    assert report.iterations > 1
    assert is_recovered(rho, report.image)


def test_first_iterate_is_not_accepted_without_a_prox_step():
    N = 64
    img = np.zeros(N, dtype=complex)
    img[20:40] = 1.
    op = _op_1d(N, 0., 32, seed=5)
    nu = op.forward(img)
    zero_fill = op.adjoint(nu)
    report = solve_bp('tv', op, nu, 1e-3 * np.linalg.norm(nu), options=SolverOptions(max_iter=400))
    assert report.iterations > 1
    assert report.trace[0] > 0
    assert report.objective < tv_norm(zero_fill)


def test_feasibility_bound_is_relative_to_eps():
    opts = SolverOptions(feas_atol=1e-9)
    assert feasibility_bound(1e-3, 1e6, opts) == pytest.approx(1e-3 * math.sqrt(1 + FEASIBILITY_RTOL), rel=1e-15)
    assert feasibility_bound(1e-3, 1e6, opts) ** 2 <= 1e-6 * (1 + FEASIBILITY_RTOL) * (1 + 1e-12)
    assert feasibility_bound(0., 1e6, opts) == pytest.approx(1e-3)


def test_gamma_is_relative_to_data():
    op = _op_1d(16, 0., 16, seed=0)
    x = np.zeros(16, dtype=complex)
    x[3] = 4j
    assert data_scale(op, op.forward(x)) == pytest.approx(4.)
    assert data_scale(op, np.zeros(16, dtype=complex)) == 1.
    assert DEFAULT_OPTIONS.gamma < PHASE_TRANSITION_OPTIONS.gamma


def test_noisy_solution_is_feasible():
    N = 64
    rho = sparse_test_signal(np.sin(np.linspace(0, 3, N)) + 1., 'haar', 6)
    op = _op_1d(N, 0.3, 48, seed=1)
    sigma = 0.01
    data = add_noise(KSpaceData(op.forward(rho), np.arange(48)), make_noise_model(sigma, seed=2))
    eps = sigma * math.sqrt(epsilon_squared(48))
    basis = make_basis('haar', N)
    report = solve_bp('l1', op, data, eps, basis=basis, sigma=sigma, options=SolverOptions(max_iter=1500))
    assert report.residual_norm <= eps * math.sqrt(1 + FEASIBILITY_RTOL)
    assert report.chi2 == pytest.approx(report.residual_norm ** 2 / sigma ** 2)
    assert report.chi2 <= epsilon_squared(48) * (1 + FEASIBILITY_RTOL) * (1 + 1e-12)
    np.testing.assert_allclose(report.image, synthesize(basis, report.solution))


def test_objective_below_truth_with_loose_bound():
    N = 64
    rho = sparse_test_signal(np.cos(np.linspace(0, 5, N)), 'dirac', 8)
    op = _op_1d(N, 0.1, 40, seed=4)
    nu = op.forward(rho)
    report = solve_bp('l1', op, nu, 0.1 * np.linalg.norm(nu), basis=make_basis('dirac', N))
    assert report.objective < np.sum(np.abs(analyze(make_basis('dirac', N), rho)))


def test_solve_is_deterministic():
    N = 32
    op = _op_1d(N, 0.2, 20, seed=0)
    nu = op.forward(np.linspace(0, 1, N) + 0j)
    opts = SolverOptions(max_iter=30)
    a = solve_bp('tv', op, nu, 0.05, options=opts)
    b = solve_bp('tv', op, nu, 0.05, options=opts)
    np.testing.assert_array_equal(a.solution, b.solution)
    assert a.iterations == b.iterations and a.trace == b.trace


def _dense_douglas_rachford(A, nu, eps, gamma, iterations):
    """
    the same splitting with exact linear solves and gamma in units of max |A^H nu|;
    selection by lowest objective among feasible iterates
    """
    n = A.shape[1]
    G = np.eye(n) + A.conj().T @ A
    bound = eps * math.sqrt(1 + FEASIBILITY_RTOL)
    zx, zr = A.conj().T @ nu, nu.copy()
    gamma = gamma * np.abs(zx).max()
    best, x = None, zx
    for _ in range(iterations):
        x = np.linalg.solve(G, zx + A.conj().T @ zr)
        r = A @ x
        qx = soft_threshold(2 * x - zx, gamma)
        qr = project_l2_ball(2 * r - zr, nu, eps)
        zx, zr = zx + qx - x, zr + qr - r
        if np.linalg.norm(r - nu) <= bound:
            obj = np.sum(np.abs(x))
            if best is None or obj < best[1]:
                best = (x, obj)
    return x if best is None else best[0]


def test_matches_dense_splitting(rng):
    N = 32
    op = _op_1d(N, 0.3, 24, seed=7)
    basis = make_basis('haar', N)
    A = np.column_stack([op.forward(synthesize(basis, e)) for e in np.eye(N, dtype=complex)])
    nu = rng.standard_normal(24) + 1j * rng.standard_normal(24)
    eps = 0.05 * np.linalg.norm(nu)
    opts = SolverOptions(max_iter=60, tol=1e-30, gamma=0.5, cg_tol=1e-13, cg_maxiter=1000)
    report = solve_bp('l1-synthesis', op, nu, eps, basis=basis, options=opts)
    expected = _dense_douglas_rachford(A, nu, eps, 0.5, 60)
    assert report.iterations == 60
    assert not report.converged
    np.testing.assert_allclose(report.solution, expected, rtol=1e-6, atol=1e-9)


def test_non_finite_data_raises():
    op = _op_1d(16, 0., 8, seed=0)
    nu = np.full(8, np.nan, dtype=complex)
    with pytest.raises(NumericFailure_Error):
        solve_bp('tv', op, nu, 0.1)


def test_invalid_arguments():
    op = _op_1d(16, 0., 8, seed=0)
    nu = np.ones(8, dtype=complex)
    with pytest.raises(InvalidArgument_Error):
        solve_bp('l2', op, nu, 0.1)
    with pytest.raises(InvalidArgument_Error):
        solve_bp('l1', op, nu, 0.1)
    with pytest.raises(InvalidArgument_Error):
        solve_bp('l1', op, nu, 0.1, basis=make_basis('dirac', 8))
    with pytest.raises(InvalidArgument_Error):
        solve_bp('tv', op, nu, -0.1)
    with pytest.raises(InvalidArgument_Error):
        solve_bp('tv', op, np.ones(7), 0.1)
    with pytest.raises(InvalidArgument_Error):
        solve_bp('tv', op, nu, 0.1, options=SolverOptions(relax=2.))
    with pytest.raises(InvalidArgument_Error):
        solve_bp('tv', op, nu, 0.1, options=SolverOptions(max_iter=0))
