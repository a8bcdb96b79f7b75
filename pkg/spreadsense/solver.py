"""
Constrained basis pursuit

    min_x  R(x)   subject to   || A x - nu ||_2 <= eps

with R the l1 norm of synthesis coefficients (A = Phi Psi) or the TV norm of
the image (A = Phi), by Douglas-Rachford splitting on the product space (x, r):

    f(x, r) = R(x) + indicator(|| r - nu || <= eps)
    g(x, r) = indicator(r = A x)

prox f is separable (soft threshold or TV prox, l2 ball projection); prox g is
the projection onto the graph of A, a linear solve with I + A^H A done by
conjugate gradients. Only forward/adjoint applications of A are needed.
"""
import math
import sys
from collections import namedtuple

import numpy as np
from scipy.sparse.linalg import LinearOperator as ScipyLinearOperator
from scipy.sparse.linalg import cg

from spreadsense.errors import InvalidArgument_Error, NumericFailure_Error
from spreadsense.operators import Composed
from spreadsense.sparsity import SynthesisOp, divergence, gradient, synthesize, tv_norm

L1 = 'l1'
TV = 'tv'
PROBLEM_ALIASES = {'l1': L1, 'l1-synthesis': L1, 'tv': TV}

SolverOptions = namedtuple('SolverOptions', ['max_iter', 'tol', 'gamma', 'relax', 'cg_tol', 'cg_maxiter',
                                             'tv_iter', 'feas_atol', 'log_every'],
                           defaults=[500, 1e-6, 0.05, 1.0, 1e-6, 100, 50, 1e-9, 50])

# gamma is relative to max |A^H nu|; feas_atol only applies when eps = 0
DEFAULT_OPTIONS = SolverOptions()
PHASE_TRANSITION_OPTIONS = SolverOptions(max_iter=3000, tol=1e-8, gamma=1.0, cg_tol=1e-10)

# relative slack on eps^2 when deciding feasibility
FEASIBILITY_RTOL = 1e-6

SolveReport = namedtuple('SolveReport', ['solution', 'image', 'iterations', 'chi2', 'converged', 'trace',
                                         'objective', 'residual_norm'])


def check_options(options):
    for name in ('max_iter', 'tol', 'gamma', 'cg_tol', 'cg_maxiter', 'tv_iter'):
        if not getattr(options, name) > 0:
            raise InvalidArgument_Error("solver option {0} must be positive, got {1}".format(
                name, getattr(options, name)))
    if not 0 < options.relax < 2:
        raise InvalidArgument_Error("relaxation must be in (0, 2), got {0}".format(options.relax))
    if options.feas_atol < 0:
        raise InvalidArgument_Error("feas_atol must be >= 0, got {0}".format(options.feas_atol))
    return options


def soft_threshold(x, tau):
    """x * max(1 - tau/|x|, 0), phase preserved, 0 -> 0"""
    if tau < 0:
        raise InvalidArgument_Error("threshold must be >= 0, got {0}".format(tau))
    x = np.asarray(x)
    mag = np.abs(x)
    scale = np.zeros(mag.shape)
    np.divide(tau, mag, out=scale, where=mag > 0)
    return x * np.maximum(1. - scale, 0.) * (mag > 0)


def project_l2_ball(r, nu, eps):
    if eps < 0:
        raise InvalidArgument_Error("ball radius must be >= 0, got {0}".format(eps))
    d = np.asarray(r) - nu
    dist = np.linalg.norm(d)
    if dist <= eps:
        return np.array(r, copy=True)
    return nu + eps * d / dist


def prox_tv(x, lam, iterations=DEFAULT_OPTIONS.tv_iter, return_trace=False):
    """
    Approximate argmin_u 1/2 ||u - x||^2 + lam TV(u) by projected gradient on the
    dual field p (|p| <= 1 per pixel) with step 1/(4 d). The returned image is the
    best primal iterate seen, so the objective trace never increases.
    """
    if lam < 0:
        raise InvalidArgument_Error("TV weight must be >= 0, got {0}".format(lam))
    x = np.asarray(x, dtype=np.complex128)
    trace = []
    if lam == 0:
        return (x.copy(), [0.]) if return_trace else x.copy()
    step = 1. / (4. * x.ndim * lam)
    p = np.zeros((x.ndim,) + x.shape, dtype=np.complex128)
    best_u, best_obj = x.copy(), lam * tv_norm(x)
    for _ in range(int(iterations)):
        u = x + lam * divergence(p)
        p = p + step * gradient(u)
        p /= np.maximum(1., np.sqrt(np.sum(np.abs(p) ** 2, axis=0)))
        u = x + lam * divergence(p)
        obj = 0.5 * np.linalg.norm(u - x) ** 2 + lam * tv_norm(u)
        if obj < best_obj:
            best_u, best_obj = u, obj
        trace.append(best_obj)
    return (best_u, trace) if return_trace else best_u


class _GraphProjector:
    """(vx, vr) -> (x, A x) with (I + A^H A) x = vx + A^H vr"""

    def __init__(self, A, options):
        self.A = A
        self.options = options
        n = A.isize
        self.normal = ScipyLinearOperator((n, n), dtype=np.complex128,
                                          matvec=lambda v: v + np.ravel(A.normal(v.reshape(A.ishape))))

    def __call__(self, vx, vr, x0):
        b = np.ravel(vx + self.A.adjoint(vr))
        x, _ = cg(self.normal, b, x0=np.ravel(x0), rtol=self.options.cg_tol, atol=0.,
                  maxiter=self.options.cg_maxiter)
        x = x.reshape(self.A.ishape)
        return x, self.A.forward(x)


def _problem_kind(problem):
    if problem not in PROBLEM_ALIASES:
        raise InvalidArgument_Error("unknown problem {0}, choose from {1}".format(problem, sorted(PROBLEM_ALIASES)))
    return PROBLEM_ALIASES[problem]


def data_scale(A, nu):
    """max |A^H nu|, the unit the regularization weight gamma is given in"""
    scale = float(np.abs(A.adjoint(nu)).max()) if nu.size else 0.
    return scale if scale > 0 and math.isfinite(scale) else 1.


def feasibility_bound(eps, nu_norm, options):
    """||r - nu|| <= eps sqrt(1 + FEASIBILITY_RTOL); an eps = 0 problem gets feas_atol ||nu|| instead"""
    if eps > 0:
        return eps * math.sqrt(1. + FEASIBILITY_RTOL)
    return options.feas_atol * nu_norm


def solve_bp(problem, op, nu, eps, basis=None, options=DEFAULT_OPTIONS, sigma=1.0, verbose=False):
    """
    :param problem: 'l1' (synthesis, needs basis) or 'tv'
    :param op: sensing LinearOperator from the image grid to the measurements
    :param nu: measurements (KSpaceData or array in mask order)
    :param eps: radius of the fidelity ball (not squared)
    :param sigma: noise level used to report chi2 in noise units
    :return: SolveReport; solution holds coefficients for l1, the image for tv

    Convergence is the relative change of the splitting variable (zx, zr), so
    at least one prox step is taken before the loop can stop.
    """
    kind = _problem_kind(problem)
    options = check_options(options)
    if eps < 0 or not math.isfinite(eps):
        raise InvalidArgument_Error("eps must be finite and >= 0, got {0}".format(eps))
    if not sigma > 0:
        raise InvalidArgument_Error("sigma must be positive, got {0}".format(sigma))
    nu = np.asarray(getattr(nu, 'values', nu), dtype=np.complex128)
    if nu.shape != op.oshape:
        raise InvalidArgument_Error("measurements of shape {0} do not match operator output {1}".format(
            nu.shape, op.oshape))
    if kind == L1:
        if basis is None:
            raise InvalidArgument_Error("l1 synthesis needs a sparsity basis")
        if tuple(basis.shape) != op.ishape:
            raise InvalidArgument_Error("basis shape {0} does not match operator input {1}".format(
                basis.shape, op.ishape))
        A = Composed([op, SynthesisOp(basis)])
    else:
        A = op
    gamma = options.gamma * data_scale(A, nu)
    if kind == L1:

        def prox_reg(v):
            return soft_threshold(v, gamma)

        def objective(v):
            return float(np.sum(np.abs(v)))
    else:

        def prox_reg(v):
            return prox_tv(v, gamma, options.tv_iter)

        objective = tv_norm

    project = _GraphProjector(A, options)
    bound = feasibility_bound(eps, np.linalg.norm(nu), options)

    zx, zr = A.adjoint(nu), nu.copy()
    x_prev = zx
    best = None
    trace = []
    x = zx
    k = 0
    converged = False
    for k in range(1, options.max_iter + 1):
        x, r = project(zx, zr, x_prev)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(r))):
            raise NumericFailure_Error("non-finite iterate at iteration {0}".format(k))
        qx = prox_reg(2 * x - zx)
        qr = project_l2_ball(2 * r - zr, nu, eps)
        dx, dr = options.relax * (qx - x), options.relax * (qr - r)
        z_norm = math.sqrt(np.linalg.norm(zx) ** 2 + np.linalg.norm(zr) ** 2)
        zx = zx + dx
        zr = zr + dr

        change = math.sqrt(np.linalg.norm(dx) ** 2 + np.linalg.norm(dr) ** 2) / max(z_norm, 1e-12)
        trace.append(float(change))
        x_prev = x
        res = np.linalg.norm(r - nu)
        feasible = res <= bound
        if feasible:
            obj = objective(x)
            if best is None or obj < best[1]:
                best = (x, obj, res, k)
        if verbose and options.log_every and k % options.log_every == 0:
            print("LOG: iter {0} change {1:.3e} residual {2:.4e} bound {3:.4e}".format(k, change, res, bound),
                  file=sys.stderr)
        if feasible and change < options.tol:
            converged = True
            best = (x, objective(x), res, k)
            break

    if best is None:
        if verbose:
            print("WARNING: no feasible iterate after {0} iterations".format(k), file=sys.stderr)
        sol, res = x, np.linalg.norm(A.forward(x) - nu)
        obj = objective(x)
    else:
        sol, obj, res, _ = best
    if verbose:
        print("LOG: stopped after {0} iterations, converged={1}".format(k, converged), file=sys.stderr)
    image = synthesize(basis, sol) if kind == L1 else sol
    return SolveReport(sol, image, k, float(res ** 2 / sigma ** 2), converged, trace, obj, float(res))
