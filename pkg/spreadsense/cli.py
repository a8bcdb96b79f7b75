"""
s2sense: command line entry point.

    s2sense phantom --preset line256 --out line.s2cx
    s2sense mask --grid 128,128 --coverage 0.2 --profile vds --chirp 0.3 --out m.s2mk
    s2sense measure --image img.s2cx --mask m.s2mk --chirp 0.3 --snr 32 --out nu.s2cx
    s2sense reconstruct --data nu.s2cx --mask m.s2mk --grid 128,128 --chirp 0.3 --problem tv --out rec.s2cx
    s2sense coherence-table --N 256
    s2sense error-curves --config data/error_curves.cfg --out-dir results/

Exit status: 0 on success, 1 on usage errors, 2 on runtime failures.
"""
import argparse
import math
import os
import sys

import numpy as np
import pandas as pd

from spreadsense import __version__
from spreadsense.coherence import TABLE_RATES, coherence_table
from spreadsense.errors import InvalidArgument_Error, SpreadSense_Error
from spreadsense.experiments import EXPERIMENT_KINDS, load_config, make_config, run_experiment
from spreadsense.grid import CONSTANT, constant_chirp, make_fov, make_grids, varying_chirp
from spreadsense.io.arrayfile import read_array, read_mask, write_array, write_mask
from spreadsense.noise import add_noise, epsilon_squared, make_noise_model, sigma_from_snr
from spreadsense.operators import KSpaceData, SensingOperator, resample_values
from spreadsense.phantom import PRESETS, preset_image
from spreadsense.sampling import (FULL_GRID, PHASE_ENCODE, calibrate_beta, coverage_target, draw_uniform_mask,
                                  draw_vds_mask, embed_mask, expand_phase_encode_mask, find_p_M, make_vds_profile)
from spreadsense.solver import DEFAULT_OPTIONS, solve_bp
from spreadsense.sparsity import BASIS_KINDS, make_basis


class _Parser(argparse.ArgumentParser):
    """usage errors exit with status 1"""

    def error(self, message):
        self.print_usage(sys.stderr)
        print("ERROR: {0}".format(message), file=sys.stderr)
        sys.exit(1)


def parse_sizes(s):
    try:
        sizes = tuple(int(x) for x in s.split(',') if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma separated integers, got {0!r}".format(s))
    if not sizes:
        raise argparse.ArgumentTypeError("empty size list")
    return sizes


def parse_floats(s):
    try:
        return tuple(float(x) for x in s.split(',') if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma separated numbers, got {0!r}".format(s))


def parse_chirp(s):
    """comma separated constant rates, or a CSV schedule with columns w_x,w_y in readout order"""
    if os.path.isfile(s):
        df = pd.read_csv(s)
        if not {'w_x', 'w_y'} <= set(df.columns):
            raise InvalidArgument_Error("chirp schedule {0} needs columns w_x,w_y".format(s))
        return varying_chirp(df[['w_x', 'w_y']].to_numpy(dtype=float))
    try:
        return constant_chirp(*[float(x) for x in s.split(',')])
    except ValueError:
        raise InvalidArgument_Error("--chirp expects rates like 0.3 or 0.3,-0.3, or a CSV file; got {0!r}".format(s))


def chirp_arg(s):
    try:
        return parse_chirp(s)
    except InvalidArgument_Error as e:
        raise argparse.ArgumentTypeError(str(e))


def _fov(args, ndim):
    return make_fov(args.fov if len(args.fov) > 1 else args.fov[0], ndim)


def _full_mask(mask, grid):
    """expand a phase encoding plane mask over the readout axis and check it indexes N_u"""
    if mask.mode == PHASE_ENCODE and grid.ndim == 3:
        mask = expand_phase_encode_mask(mask, grid.N[2])
    if tuple(mask.shape) != tuple(grid.Nu):
        raise InvalidArgument_Error("mask indexes a {0} grid but the chirp gives N_u = {1}".format(
            'x'.join(map(str, mask.shape)), 'x'.join(map(str, grid.Nu))))
    return mask


def cmd_phantom(args):
    N = None
    if args.grid:
        if len(set(args.grid)) != 1:
            raise InvalidArgument_Error("phantom presets are isotropic, got --grid {0}".format(args.grid))
        N = args.grid[0]
    img = preset_image(args.preset, N, texture=args.texture, seed=args.seed)
    write_array(args.out, img)
    print("LOG: seed {0}; wrote {1} array of shape {2} to {3}".format(
        args.seed, args.preset, 'x'.join(map(str, img.shape)), args.out), file=sys.stderr)
    return 0


def cmd_mask(args):
    band = args.grid
    mode = args.mode
    if mode == PHASE_ENCODE and len(band) != 2:
        raise InvalidArgument_Error("phase encoding masks are drawn over a 2D (k_x, k_y) grid")
    M = coverage_target(args.coverage, band)
    if args.profile == 'uniform':
        mask = draw_uniform_mask(M, band, args.seed, mode=mode)
    else:
        if args.p == 'auto':
            p, beta = find_p_M(M, band)
        else:
            p = float(args.p)
            beta = calibrate_beta(p, M, band)
        mask = draw_vds_mask(make_vds_profile(p, beta, band), band, args.seed, mode=mode, target=M)
    if args.chirp is not None:
        chirp = args.chirp
        if chirp.mode != CONSTANT:
            raise InvalidArgument_Error("mask embedding takes constant rates")
        grid = make_grids(band, chirp)
        mask = embed_mask(mask, grid.Nu[:len(band)])
    write_mask(args.out, mask)
    print("LOG: seed {0}; {1} mask, target {2}, drawn {3}, grid {4}, p={5} beta={6}".format(
        args.seed, args.profile, M, mask.count, 'x'.join(map(str, mask.shape)), mask.p, mask.beta),
        file=sys.stderr)
    return 0


def cmd_coherence_table(args):
    df = coherence_table(args.bases, args.rates, args.N, verbose=args.verbose)
    if args.out:
        df.to_csv(args.out, index=False)
        print("LOG: wrote {0}".format(args.out), file=sys.stderr)
    else:
        df.to_csv(sys.stdout, index=False)
    return 0


def cmd_measure(args):
    img = read_array(args.image)
    chirp = args.chirp
    grid = make_grids(img.shape, chirp, _fov(args, img.ndim))
    mask = _full_mask(read_mask(args.mask), grid)
    op = SensingOperator(grid.Nc, grid.Nu, chirp, mask.indices, grid.N, grid.fov)
    values = op.forward(resample_values(img, grid.Nc))
    sigma = 0. if math.isinf(args.snr) else sigma_from_snr(img, args.snr)
    sigma *= math.sqrt(np.prod(grid.Nc) / float(np.prod(grid.N)))
    data = add_noise(KSpaceData(values, op.mask.indices), make_noise_model(sigma, args.seed))
    write_array(args.out, data.values)
    print("LOG: seed {0}; {1} measurements, sigma {2:.6g}; wrote {3}".format(args.seed, len(data.values), sigma,
                                                                           args.out), file=sys.stderr)
    return 0


def cmd_reconstruct(args):
    chirp = args.chirp
    grid = make_grids(args.grid, chirp, _fov(args, len(args.grid)))
    mask = _full_mask(read_mask(args.mask), grid)
    nu = read_array(args.data).ravel()
    if nu.size != mask.count:
        raise InvalidArgument_Error("{0} holds {1} values but the mask selects {2}".format(args.data, nu.size,
                                                                                          mask.count))
    op = SensingOperator(grid.Nc, grid.Nu, chirp, mask.indices, grid.N, grid.fov)
    if args.eps == 'auto':
        eps = args.sigma * math.sqrt(epsilon_squared(mask.count, args.percentile))
    else:
        try:
            eps = float(args.eps)
        except ValueError:
            raise InvalidArgument_Error("--eps must be 'auto' or a number, got {0!r}".format(args.eps))
    basis = make_basis(args.basis, grid.Nc) if args.problem == 'l1' else None
    options = DEFAULT_OPTIONS._replace(max_iter=args.max_iter, tol=args.tol)
    report = solve_bp(args.problem, op, nu, eps, basis=basis, options=options, sigma=args.sigma,
                      verbose=args.verbose)
    image = resample_values(report.image, grid.N) if args.downsample else report.image
    write_array(args.out, image)
    print("iterations={0} converged={1} chi2={2:.6g} eps2={3:.6g} objective={4:.6g}".format(
        report.iterations, report.converged, report.chi2, (eps / args.sigma) ** 2, report.objective))
    print("LOG: wrote {0} image of shape {1}".format(args.out, 'x'.join(map(str, image.shape))), file=sys.stderr)
    return 0


def cmd_experiment(args):
    overrides = {'seed': args.seed, 'workers': args.workers, 'trials': args.trials}
    if args.verbose:
        overrides['verbose'] = True
    if args.config:
        config = load_config(args.config, **overrides)
        if config.kind != args.command:
            raise InvalidArgument_Error("{0} describes a {1} run, not {2}".format(args.config, config.kind,
                                                                                  args.command))
    else:
        config = make_config(args.command, **{k: v for k, v in overrides.items() if v is not None})
    print("LOG: {0} with master seed {1}, {2} trials per cell".format(config.kind, config.seed, config.trials),
          file=sys.stderr)
    result = run_experiment(config, args.out_dir)
    print(result.summary.to_string(index=False))
    return 0


def build_parser():
    parser = _Parser(prog='s2sense', description="Spread-spectrum Fourier sensing simulation and reconstruction")
    parser.add_argument('--version', action='version', version='%(prog)s ' + __version__)
    sub = parser.add_subparsers(dest='command', metavar='command')

    p = sub.add_parser('phantom', help="write a synthetic complex test image")
    p.add_argument('--grid', type=parse_sizes, help="size per axis (isotropic), default per preset")
    p.add_argument('--preset', choices=sorted(PRESETS), default='shepp2d')
    p.add_argument('--texture', type=float, default=0., help="relative amplitude of smooth random texture")
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--out', required=True)
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser('mask', help="draw a k-space sampling mask")
    p.add_argument('--grid', type=parse_sizes, required=True, help="probed band N, e.g. 128,128")
    p.add_argument('--coverage', type=float, required=True, help="fraction of the band to sample")
    p.add_argument('--profile', choices=['uniform', 'vds'], default='vds')
    p.add_argument('--p', default='auto', help="profile power or 'auto' for p_M")
    p.add_argument('--mode', choices=[FULL_GRID, PHASE_ENCODE], default=FULL_GRID)
    p.add_argument('--chirp', type=chirp_arg, default=None, help="embed the mask into the N_u grid of this chirp")
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--out', required=True)
    p.set_defaults(func=cmd_mask)

    p = sub.add_parser('coherence-table', help="N_c mu^2 per basis and chirp rate")
    p.add_argument('--N', type=int, default=256)
    p.add_argument('--bases', type=lambda s: s.split(','), default=list(BASIS_KINDS))
    p.add_argument('--rates', type=parse_floats, default=TABLE_RATES)
    p.add_argument('--out', default=None, help="CSV path (default: stdout)")
    p.add_argument('--verbose', action='store_true')
    p.set_defaults(func=cmd_coherence_table)

    p = sub.add_parser('measure', help="simulate measurements of an image")
    p.add_argument('--image', required=True)
    p.add_argument('--mask', required=True)
    p.add_argument('--chirp', type=chirp_arg, default='0')
    p.add_argument('--fov', type=parse_floats, default=(1.,))
    p.add_argument('--snr', type=float, default=float('inf'))
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--out', required=True)
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser('reconstruct', help="solve the constrained l1 or TV problem")
    p.add_argument('--data', required=True, help="measurements in mask order")
    p.add_argument('--mask', required=True)
    p.add_argument('--grid', type=parse_sizes, required=True, help="base grid N")
    p.add_argument('--chirp', type=chirp_arg, default='0')
    p.add_argument('--fov', type=parse_floats, default=(1.,))
    p.add_argument('--problem', choices=['l1', 'tv'], default='tv')
    p.add_argument('--basis', choices=list(BASIS_KINDS), default='haar')
    p.add_argument('--eps', default='auto', help="'auto' (99th percentile bound) or the ball radius")
    p.add_argument('--sigma', type=float, default=1., help="noise level per real/imaginary part")
    p.add_argument('--percentile', type=float, default=0.99)
    p.add_argument('--max-iter', type=int, default=DEFAULT_OPTIONS.max_iter)
    p.add_argument('--tol', type=float, default=DEFAULT_OPTIONS.tol)
    p.add_argument('--downsample', action='store_true', help="write the image on N instead of N_c")
    p.add_argument('--verbose', action='store_true')
    p.add_argument('--out', required=True)
    p.set_defaults(func=cmd_reconstruct)

    for kind in EXPERIMENT_KINDS:
        p = sub.add_parser(kind, help="run the {0} experiment".format(kind))
        p.add_argument('--config', default=None, help="key = value config file (defaults per experiment)")
        p.add_argument('--out-dir', required=True)
        p.add_argument('--seed', type=int, default=None, help="override the master seed")
        p.add_argument('--trials', type=int, default=None)
        p.add_argument('--workers', type=int, default=None, help="worker processes (default: S2_THREADS or all CPUs)")
        p.add_argument('--verbose', action='store_true')
        p.set_defaults(func=cmd_experiment)
    return parser


def dispatch(argv):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 1
    if args.command is None:
        parser.print_usage(sys.stderr)
        print("ERROR: no command given", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except (SpreadSense_Error, OSError) as e:
        print("ERROR: {0}".format(e), file=sys.stderr)
        return 2


def main():
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
