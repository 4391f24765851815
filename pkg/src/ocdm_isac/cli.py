"""Command line entry point: ``ocdm-isac {ber,rmse,single,dump-dfnt}``."""

import argparse
import sys

import numpy as np

from . import experiments as ex
from .config import ExperimentConfig, load_config
from .errors import ConfigError, ConstraintViolation, InvalidOrderError, NumericalError
from .fresnel import dfnt_matrix

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 1


def _u64(s):
    v = int(s, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser():
    p = argparse.ArgumentParser(prog="ocdm-isac", description="OCDM ISAC link simulator")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config file (defaults built in)")
    common.add_argument("--seed", type=_u64, help="override the master seed")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--threads", type=_positive, default=1, help="worker threads")
    common.add_argument("--mode", choices=("ocdm", "ofdm"), help="override the waveform")
    common.add_argument("--trials", type=_positive, help="override the trial count")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("ber", parents=[common], help="BER vs SNR^com sweep")
    rm = sub.add_parser("rmse", parents=[common], help="range / velocity RMSE vs SNR^rad sweep")
    rm.add_argument("--estimates", help="also write per-trial estimates to this CSV")
    si = sub.add_parser("single", parents=[common], help="one end-to-end run with optional dumps")
    si.add_argument("--snr-rad-db", type=float, help="radar SNR (default: last sweep point)")
    si.add_argument("--dump-frame", metavar="PATH", help="transmitted time frame CSV")
    si.add_argument("--dump-channel", metavar="PATH", help="channel estimate vs truth CSV")
    si.add_argument("--dump-periodogram", metavar="PATH", help="periodogram surface CSV (row-major)")
    si.add_argument("--dump-bits", metavar="PATH", help="transmitted / decoded bits CSV")
    df = sub.add_parser("dump-dfnt", help="write the DFnT matrix as re,im pairs")
    df.add_argument("--order", type=int, default=256, help="transform order M (positive, even)")
    df.add_argument("--out", help="output path (default: stdout)")
    return p


def _emit(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        ex.write_text(out, text)


def _experiment(args):
    exp = load_config(args.config) if args.config else ExperimentConfig()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.mode is not None:
        changes["mode"] = args.mode
    if args.trials is not None:
        changes["trials"] = args.trials
    return exp.replace(**changes) if changes else exp


def _single(exp, args):
    res = ex.run_single(exp, args.snr_rad_db)
    dumps = (("dump_frame", lambda: ex.frame_csv(res["frame"])),
             ("dump_channel", lambda: ex.channel_csv(res["channel_estimate"], res["channel_true"])),
             ("dump_periodogram", lambda: ex.matrix_csv(res["periodogram"])),
             ("dump_bits", lambda: ex.bits_csv(res["bits"], res["rx_bits"])))
    for attr, render in dumps:
        path = getattr(args, attr)
        if path:
            ex.write_text(path, render())
    rows = [ex.ResultRow(exp.name, exp.seed, exp.rmse_snr_com_db, exp.mode, exp.radar_estimation,
                         exp.radar_equalizer, "", "ber", res["ber"]),
            ex.ResultRow(exp.name, exp.seed, res["snr_rad_db"], exp.mode, exp.radar_estimation,
                         exp.radar_equalizer, "", "peak_to_median_db", res["peak_to_median_db"])]
    for p, est in enumerate(res["estimates"]):
        for metric in ("range_hat", "velocity_hat", "tau_hat", "doppler_hat"):
            rows.append(ex.ResultRow(exp.name, exp.seed, res["snr_rad_db"], exp.mode, exp.radar_estimation,
                                     exp.radar_equalizer, str(p), metric, getattr(est, metric)))
    return ex.format_results(exp, rows, "single")


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "dump-dfnt":
            _emit(ex.complex_matrix_csv(dfnt_matrix(args.order)), args.out)
            return EXIT_OK
        exp = _experiment(args)
        if args.command == "ber":
            text = ex.format_results(exp, ex.run_ber_sweep(exp, args.threads), "ber")
        elif args.command == "rmse":
            res = ex.simulate_rmse(exp, args.threads)
            text = ex.format_results(exp, ex.run_rmse_sweep(exp, result=res), "rmse")
            if args.estimates:
                ex.write_text(args.estimates, ex.estimate_rows(exp, res))
        else:
            text = _single(exp, args)
        _emit(text, args.out)
    except (ConfigError, ConstraintViolation, InvalidOrderError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
