##
# Command-line entry point: ddfsim <subcommand> [options]
##
import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from ddfsim import __version__, settings
from ddfsim.config import load_config
from ddfsim.ddf.channel import draw_channel
from ddfsim.ddf.destination import rad_detect, rad_gaussian_block, rad_pairwise_closed_form
from ddfsim.ddf.dmt import decision_time_pmf_closed, dmt_curve, outage_mc
from ddfsim.ddf.simulation import (CSV_COLUMNS, OUTAGE_STREAM, calibrate_tau, run_sweep, substream, sweep_metadata,
                                   sweep_rows)
from ddfsim.ddf.udm import build_udm, udm_verify
from ddfsim.exceptions import DDFError, ValidationError
from ddfsim.storage import ResultStorage, csv_text

logger = logging.getLogger(__name__)

RAD_STREAM = 3


def _int_list(text):
    return [int(v) for v in text.split(',') if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=Path, default=None, help='key = value simulation config file')
    common.add_argument('--seed', type=int, default=None, help='master seed (overrides the config)')
    common.add_argument('--out', type=Path, default=None, help='CSV output path (stdout when omitted)')
    common.add_argument('--threads', type=int, default=None, help='worker processes for the trial loop')
    common.add_argument('--verbose', action='store_true', help='debug logging')

    parser = argparse.ArgumentParser(prog='ddfsim', description='Dynamic decode-and-forward relay simulator')
    parser.add_argument('--version', action='version', version='%(prog)s ' + __version__)
    commands = parser.add_subparsers(dest='command', required=True)

    dmt = commands.add_parser('dmt', parents=[common], help='diversity-multiplexing tradeoff curves')
    dmt.add_argument('--M', type=_int_list, default=[2, 5, 10, 20], help='slot counts, comma separated')
    dmt.add_argument('--N', type=_int_list, default=[1, 2, 3, 4, 5, 6], help='Pareto step counts')
    dmt.add_argument('--points', type=int, default=101, help='multiplexing gains on [0, 1]')

    outage = commands.add_parser('outage', parents=[common], help='Monte Carlo outage probability')
    outage.add_argument('--trials', type=int, default=settings.DDF_OUTAGE_TRIALS)

    commands.add_parser('simulate', parents=[common], help='error probability curves')

    calibrate = commands.add_parser('calibrate-tau', parents=[common], help='Forney threshold per SNR')
    calibrate.add_argument('--snr', type=float, default=None, help='single SNR in dB (default: config grid)')
    calibrate.add_argument('--target', type=float, default=None, help='relay / destination error fraction')

    udm = commands.add_parser('udm-check', parents=[common], help='build and verify UDMs')
    udm.add_argument('--L', type=int, default=None)
    udm.add_argument('--n', type=int, default=None)
    udm.add_argument('--q', type=int, default=None)

    rad = commands.add_parser('rad', parents=[common], help='relay activity detector error floor')
    rad.add_argument('--T', type=int, default=1)
    rad.add_argument('--M', type=int, default=2)
    rad.add_argument('--trials', type=int, default=10000)
    return parser


def _emit(args, header, rows, metadata=None):
    if args.out is None:
        sys.stdout.write(csv_text(header, rows, metadata))
        return
    ResultStorage(args.out.parent).save_csv(args.out.name, header, rows, metadata)


def _config(args):
    return load_config(args.config, seed=args.seed, threads=args.threads)


def cmd_dmt(args):
    r_grid = np.linspace(0.0, 1.0, args.points)
    curves = [dmt_curve('infinite', r_grid), dmt_curve('tx-bound', r_grid)]
    curves += [dmt_curve('finite', r_grid, M) for M in args.M]
    curves += [dmt_curve('pareto', r_grid, N) for N in args.N]
    rows = [row for curve in curves for row in curve.rows()]
    _emit(args, ('r', 'd', 'M_or_N', 'variant'), rows)
    return 0


def cmd_outage(args):
    cfg = _config(args)
    M = cfg.params.M
    header = (['snr_db', 'p_out_mc', 'std_err'] + ['pmf_mc_%d' % m for m in range(1, M + 1)]
              + ['pmf_closed_%d' % m for m in range(1, M + 1)] + ['cond_out_%d' % m for m in range(1, M + 1)])
    rows = []
    for snr_index, snr_db in enumerate(cfg.snr_db):
        params = cfg.params_at(snr_index)
        estimate = outage_mc(params, args.trials, substream(cfg.seed, OUTAGE_STREAM, snr_index))
        rows.append([snr_db, estimate.p_out, estimate.standard_error] + list(estimate.decision_pmf)
                    + list(decision_time_pmf_closed(params)) + list(estimate.conditional_outage))
        logger.info('%.1f dB: outage %g', snr_db, estimate.p_out)
    _emit(args, header, rows, {'M': M, 'T': cfg.params.T, 'R': cfg.params.R, 'trials': args.trials})
    return 0


def cmd_simulate(args):
    cfg = _config(args)
    stats = run_sweep(cfg)
    _emit(args, CSV_COLUMNS, sweep_rows(stats), sweep_metadata(cfg))
    return 0


def cmd_calibrate_tau(args):
    cfg = _config(args)
    grid = cfg.snr_db if args.snr is None else (args.snr,)
    rows = [(snr_db, calibrate_tau(cfg, snr_db, args.target)) for snr_db in grid]
    metadata = sweep_metadata(cfg)
    metadata['target_fraction'] = cfg.target_fraction if args.target is None else args.target
    _emit(args, ('snr_db', 'tau'), rows, metadata)
    return 0


def cmd_udm_check(args):
    defaults = _config(args).udm if args.config else settings.DDF_UDM
    L, n, q = (value if value is not None else default for value, default in zip((args.L, args.n, args.q), defaults))
    udm = build_udm(L, n, q)
    valid = udm_verify(udm, exhaustive=True)
    if args.out is None:
        sys.stdout.write(udm.format_grid())
    else:
        ResultStorage(args.out.parent).save_udm(args.out.name, udm)
    logger.info('UDM (L=%d, n=%d, q=%d) %s', L, n, q, 'verified' if valid else 'FAILED verification')
    return 0 if valid else 1


def cmd_rad(args):
    cfg = _config(args)
    rows = []
    for snr_index, snr_db in enumerate(cfg.snr_db):
        params = replace(cfg.params, M=args.M, T=args.T, rho_db=float(snr_db))
        rng = substream(cfg.seed, RAD_STREAM, snr_index)
        pairwise = 0.0
        misses = 0
        for _ in range(args.trials):
            ch = draw_channel(params, rng)
            pairwise += rad_pairwise_closed_form(1, 2, ch, params)
            m = int(rng.integers(1, params.M + 1))
            misses += rad_detect(rad_gaussian_block(m, ch, params, rng), ch, params) != m
        rows.append((snr_db, args.T, pairwise / args.trials, misses / args.trials))
    _emit(args, ('snr_db', 'T', 'pep_closed_avg', 'detect_error_mc'), rows,
          {'M': args.M, 'trials': args.trials, 'seed': cfg.seed})
    return 0


COMMANDS = {
    'dmt': cmd_dmt,
    'outage': cmd_outage,
    'simulate': cmd_simulate,
    'calibrate-tau': cmd_calibrate_tau,
    'udm-check': cmd_udm_check,
    'rad': cmd_rad,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s', stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        for message in exc.messages:
            sys.stderr.write('config error: %s\n' % message)
        return 2
    except DDFError as exc:
        logger.error('%s', exc)
        return 1
