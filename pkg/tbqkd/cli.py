"""
Command line front end of tbqkd.

    tbqkd keyrate [--config F] [--distance-km X] [--n-sum N] [--e-z V --e-x V] [--out JSON]
    tbqkd sweep distance|brightness|reprate [--config F] [--out CSV] [--workers N]
    tbqkd mc run [--pulses N] [--seed S] [--mode matrix|pheno] [--out CSV] [--dead-time]
    tbqkd stability [--blocks N] [--block-pulses N] [--distance-km X] [--seed S] [--out CSV]
    tbqkd table1 [--config F] [--out CSV]
    tbqkd validate

Results go to ``--out`` or standard output, log records to standard error.
"""
import argparse
import logging
import sys

import tbqkd
from tbqkd import checks, finitekey, montecarlo, reporters, sweeps
from tbqkd.formats import RunReport
from tbqkd.settings import load_config
from tbqkd.utils import ConfigError, ParameterError, UsageError

logger = logging.getLogger(__name__)

LOG_LEVELS = ('DEBUG', 'INFO', 'REPORT', 'WARNING', 'ERROR')


class _Parser(argparse.ArgumentParser):
    """Argument parser that raises instead of exiting the interpreter."""

    def error(self, message):
        raise UsageError(message)


def _add_config(parser):
    parser.add_argument('--config', default=None, help='flat key = value (or YAML) parameter file')


def build_parser():
    parser = _Parser(prog='tbqkd', description='Time-bin QKD with a quantum-dot single-photon source.')
    parser.add_argument('--log-level', default='WARNING', type=str.upper, choices=LOG_LEVELS)
    parser.add_argument('--log-file', default=None, help='also write log records to LOG_FILE.log')
    parser.add_argument('--version', action='version', version=tbqkd.__version__)
    sub = parser.add_subparsers(dest='command', parser_class=_Parser)
    sub.required = True

    k = sub.add_parser('keyrate', help='finite-key secure key rate of one operating point')
    _add_config(k)
    k.add_argument('--distance-km', type=float, default=None)
    k.add_argument('--n-sum', type=float, default=sweeps.N_SUM_SWEEP, help='pulses sent in the block')
    k.add_argument('--e-z', type=float, default=None, help='measured Z-basis QBER')
    k.add_argument('--e-x', type=float, default=None, help='measured X-basis QBER')
    k.add_argument('--out', default=None)

    s = sub.add_parser('sweep', help='distance sweep or gain grids')
    s.add_argument('kind', choices=('distance', 'brightness', 'reprate'))
    _add_config(s)
    s.add_argument('--resolution', type=int, default=None, help='grid points per axis')
    s.add_argument('--distance-km', type=float, default=40.0, help='fiber length of the gain grids')
    s.add_argument('--n-sum', type=float, default=sweeps.N_SUM_SWEEP)
    s.add_argument('--workers', type=int, default=1)
    s.add_argument('--out', default=None)

    m = sub.add_parser('mc', help='pulse-level Monte Carlo')
    m_sub = m.add_subparsers(dest='mc_command', parser_class=_Parser)
    m_sub.required = True
    r = m_sub.add_parser('run', help='simulate one block and write the per-bit histograms')
    _add_config(r)
    r.add_argument('--pulses', type=int, default=10**6)
    r.add_argument('--seed', type=int, default=0)
    r.add_argument('--mode', choices=('matrix', 'pheno'), default='pheno')
    r.add_argument('--distance-km', type=float, default=None)
    r.add_argument('--dead-time', action='store_true', help='veto clicks within the detector dead time')
    r.add_argument('--workers', type=int, default=1)
    r.add_argument('--out', default=None)

    t = sub.add_parser('stability', help='QBER series over independent blocks')
    _add_config(t)
    t.add_argument('--blocks', type=int, default=360)
    t.add_argument('--block-pulses', type=int, default=2 * 10**5)
    t.add_argument('--distance-km', type=float, default=None)
    t.add_argument('--seed', type=int, default=0)
    t.add_argument('--mode', choices=('matrix', 'pheno'), default='pheno')
    t.add_argument('--out', default=None)
    t.add_argument('--summary', default=None, help='write the JSON summary to this file')

    tab = sub.add_parser('table1', help='secure bits per pulse at the measured operating points')
    _add_config(tab)
    tab.add_argument('--out', default=None)

    sub.add_parser('validate', help='run the invariant suite')
    return parser


def _system(args):
    system, security, split = load_config(args.config)
    if getattr(args, 'distance_km', None) is not None:
        system = system.replace(length_km=args.distance_km)
    return system, security, split


def cmd_keyrate(args):
    if (args.e_z is None) != (args.e_x is None):
        raise UsageError('--e-z and --e-x must be given together')
    system, security, split = _system(args)
    report = finitekey.analyze(system, security, split, args.n_sum, e_z_override=args.e_z, e_x_override=args.e_x)
    inputs = dict(distance_km=system.length_km, n_sum=args.n_sum, e_z=args.e_z, e_x=args.e_x, config=args.config,
                  ec_model=security.ec_model, pe_variant=system.pe_variant)
    outputs = dict(e_z=report.e_z, e_x=report.e_x, phi_z_bar=report.phi_z_bar, lambda_ec=report.lambda_ec,
                   skb_per_pulse=report.r_secure, skr_bps=report.skr_bps, r_raw=report.r_raw,
                   secret_length=report.secret_length, flags=list(report.flags))
    logger.report('SKB/pulse {:.4g} ({})'.format(report.r_secure, report.status))
    reporters.write_report(
        RunReport('keyrate', inputs, outputs, status=report.status, version=tbqkd.__version__), args.out)
    return 0


def cmd_sweep(args):
    system, security, split = load_config(args.config)
    common = dict(system=system, security=security, split=split, n_sum=args.n_sum, n_workers=args.workers,
                  distance_km=args.distance_km)
    if args.kind == 'distance':
        spec = sweeps.SweepSpec.distance(resolution=args.resolution or 201, **common)
        result = sweeps.distance_sweep(spec)
        crossing = sweeps.max_tolerable_distance(spec)
        logger.report('E_X reaches 11% at {:.2f} km'.format(crossing))
    elif args.kind == 'brightness':
        result = sweeps.brightness_purity_sweep(sweeps.SweepSpec.brightness_purity(args.resolution or 11, **common))
    else:
        result = sweeps.reprate_lifetime_sweep(sweeps.SweepSpec.reprate_lifetime(args.resolution or 11, **common))
    reporters.write_sweep(result, args.out)
    return 0


def _mc_config(args, n_pulses):
    if n_pulses < 1:
        raise UsageError('--pulses must be at least 1, got {}'.format(n_pulses))
    return montecarlo.McConfig(mode=args.mode, seed=args.seed, n_pulses=n_pulses,
                               dead_time_enabled=getattr(args, 'dead_time', False),
                               n_workers=getattr(args, 'workers', 1))


def cmd_mc(args):
    cfg = _mc_config(args, args.pulses)
    system, _, _ = _system(args)
    seq = montecarlo.EncodingSequence()
    hist = montecarlo.simulate_block(system, seq, cfg)
    qber = montecarlo.sift_and_qber(hist, seq)
    logger.report('E_Z0={:.4g} E_Z1={:.4g} E_X0={:.4g}'.format(qber.e_z0, qber.e_z1, qber.e_x0))
    reporters.write_histogram(hist, seq, args.out)
    return 0


def cmd_stability(args):
    if args.blocks < 2:
        raise UsageError('--blocks must be at least 2, got {}'.format(args.blocks))
    cfg = _mc_config(args, args.block_pulses)
    system, _, _ = _system(args)
    result = sweeps.stability_run(system, cfg, args.blocks, args.block_pulses)
    summary = result.summary
    logger.report('std E_Z0={:.3g} E_Z1={:.3g} E_X0={:.3g} (projected to {:.3g} pulses, statistical only)'.format(
        summary['projected_std_e_z0'], summary['projected_std_e_z1'], summary['projected_std_e_x0'],
        summary['reference_pulses']))
    reporters.write_stability(result, args.out)
    if args.summary:
        inputs = dict(blocks=args.blocks, block_pulses=args.block_pulses, distance_km=system.length_km,
                      mode=cfg.mode)
        reporters.write_report(RunReport('stability', inputs, summary, seed=args.seed, version=tbqkd.__version__),
                               args.summary)
    return 0


def cmd_table1(args):
    system, security, split = load_config(args.config)
    reporters.write_sweep(sweeps.table1_reproduction(system, security, split), args.out)
    return 0


def cmd_validate(args):
    results = checks.run_invariants()
    lines = ['{} {}: {}'.format('PASS' if r.passed else 'FAIL', r.name, r.detail) for r in results]
    failed = [r.name for r in results if not r.passed]
    lines.append('{} of {} invariants passed'.format(len(results) - len(failed), len(results)))
    reporters.write_text('\n'.join(lines) + '\n')
    return 1 if failed else 0


COMMANDS = {
    'keyrate': cmd_keyrate,
    'sweep': cmd_sweep,
    'mc': cmd_mc,
    'stability': cmd_stability,
    'table1': cmd_table1,
    'validate': cmd_validate,
}


def run_command(argv=None):
    """Parse ``argv``, run the command and return its exit code.

    Configuration, usage and parameter errors are printed to standard error
    with the usage synopsis and give exit code 1.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        sys.stderr.write(parser.format_usage())
        sys.stderr.write('tbqkd: error: {}\n'.format(e))
        return 1
    except SystemExit as e:
        # --help and --version
        return e.code or 0

    root = logging.getLogger()
    handlers = list(root.handlers)
    try:
        reporters.init_logger(root, level=args.log_level, outfname=args.log_file)
        return COMMANDS[args.command](args)
    except UsageError as e:
        sys.stderr.write(parser.format_usage())
        sys.stderr.write('tbqkd: error: {}\n'.format(e))
        return 1
    except ConfigError as e:
        sys.stderr.write('tbqkd: config error: {}\n'.format(e))
        return 1
    except ParameterError as e:
        sys.stderr.write('tbqkd: parameter error: {}\n'.format(e))
        return 1
    finally:
        for handler in root.handlers[len(handlers):]:
            root.removeHandler(handler)
            handler.close()


def main():
    sys.exit(run_command(sys.argv[1:]))


if __name__ == '__main__':
    main()
