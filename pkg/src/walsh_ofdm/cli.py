"""Command-line interface: ``walsh-ofdm {ber,sweep,flops,interference}``.

Exit status is 0 on success, 1 on a runtime failure and 2 on a usage or
configuration error.
"""

import argparse
import json
import math
import os
import sys
from contextlib import contextmanager

import numpy as np

from . import flops as flops_mod
from . import harness
from .channel import interference_matrix
from .errors import ConfigError
from .transforms import TransformKind, TransformPlan

CONFIG_ENV = "WALSH_OFDM_CONFIG"

CONFIG_KEYS = """\
configuration keys (YAML or JSON file, or --set dotted.key=value):
  channel.n_tx, channel.n_rx      antennas (default 2, 2)
  channel.N                       block length (default 128)
  channel.N_cp                    cyclic prefix length in samples (default 16)
  channel.pdp_db                  tap powers in dB, one per sample delay (Vehicular A)
  channel.velocity                terminal speed in m/s (default 33.33)
  channel.carrier_hz              carrier frequency in Hz (default 2e9)
  channel.chip_duration_s         sample duration in s (default 24.4e-6)
  channel.epsilon_max             CFO bound in subcarrier spacings (default 0.1)
  channel.static                  true for fixed taps without fading
  channel.seed                    unused by simulations (master_seed drives them)
  transform                       walsh | fourier
  equalizer                       LZF | LMMSE | MMSE_SIC | JLCOZF_SIC
  jlcozf.xi_re, jlcozf.xi_im      covariance weight and ridge (default 0.01, 1)
  jlcozf.tau                      bandwidth in samples (default 80)
  jlcozf.delta                    series terms, integer or inf (default inf)
  jlcozf.signal_gain              model scale at which xi applies (default N)
  snr_db_list                     per-antenna SNR list in dB; inf for noise off
  trials                          Monte Carlo trials (default 10000)
  est_error.sigma_eps             std-dev of the receiver's CFO error
  est_error.sigma_ch              std-dev of each tap component error
  master_seed                     seed of all random draws (default 0)
  failed_policy                   include | exclude | pessimistic
"""


class _UsageError(Exception):
    pass


@contextmanager
def _output(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


def _csv_list(text, conv):
    try:
        return [conv(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise _UsageError(f"cannot parse list {text!r}: {exc}") from exc


def _delta(text):
    return math.inf if text.strip().lower() in ("inf", "infinity") else int(text)


def _build_config(args):
    path = args.config or os.environ.get(CONFIG_ENV)
    data = harness.load_config(path) if path else {}
    overrides = list(args.set or [])
    if args.seed is not None:
        overrides.append(f"master_seed={args.seed}")
    return harness.config_from_dict(harness.apply_overrides(data, overrides))


def _write_results(args, cfg, curves):
    with _output(args.out) as fh:
        harness.write_csv(curves, fh)
    if args.summary:
        with open(args.summary, "w", encoding="utf-8") as fh:
            json.dump(harness.summary(cfg, curves), fh, indent=2)
            fh.write("\n")
    for c in curves:
        for p in c.points:
            tag = "" if c.sweep_value is None else f"{c.sweep_var}={c.sweep_value} "
            print(
                f"{tag}snr={p.snr_db:g} dB  ber={p.ber:.3e}  errors={p.errors}/{p.bits}"
                f"  failed={p.failed_trials}",
                file=sys.stderr,
            )


def cmd_ber(args):
    cfg = _build_config(args)
    _write_results(args, cfg, [harness.run_ber(cfg, jobs=args.jobs)])
    return 0


def cmd_sweep(args):
    cfg = _build_config(args)
    if args.var == "est_error":
        values = [
            tuple(float(x) for x in v.split(":")) if ":" in v else float(v)
            for v in args.values.split(",")
            if v.strip()
        ]
    elif args.var == "delta":
        values = _csv_list(args.values, _delta)
    else:
        values = _csv_list(args.values, float)
    try:
        curves = harness.run_sweep(cfg, args.var, values, jobs=args.jobs)
    except ValueError as exc:
        raise _UsageError(str(exc)) from exc
    _write_results(args, cfg, curves)
    return 0


def cmd_flops(args):
    sigmas = _csv_list(args.sigma, int)
    Ns = _csv_list(args.N, int)
    taus = _csv_list(args.tau, int)
    deltas = _csv_list(args.delta, _delta)
    wanted = set(_csv_list(args.equalizers, lambda v: v.strip().upper()))
    unknown = wanted - {e.value for e in harness.Equalizer}
    if unknown:
        raise _UsageError(f"unknown equalizer(s): {', '.join(sorted(unknown))}")
    try:
        rows = flops_mod.flop_table(sigmas, Ns, taus, deltas, args.per_subcarrier_build)
    except ValueError as exc:
        raise _UsageError(str(exc)) from exc
    rows = [r for r in rows if r[0] in wanted]
    with _output(args.out) as fh:
        fh.write("equalizer,sigma,N,tau,delta,flops,efficiency_vs_proposed\n")
        for name, sigma, N, tau, delta, value, eff in rows:
            d = "inf" if math.isinf(delta) else str(delta)
            fh.write(f"{name},{sigma},{N},{tau},{d},{value:.6e},{eff:.4f}\n")
    return 0


def cmd_interference(args):
    try:
        TransformPlan(TransformKind(args.kind), args.N)
    except ValueError as exc:
        raise _UsageError(str(exc)) from exc
    mag = np.abs(interference_matrix(args.kind, args.epsilon, args.N))
    mag = mag / mag.max()
    with _output(args.out) as fh:
        fh.write("row,col,magnitude\n")
        for r, c in np.ndindex(mag.shape):
            fh.write(f"{r},{c},{mag[r, c]:.12g}\n")
    return 0


def _sim_parent():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help=f"YAML/JSON config file (default: ${CONFIG_ENV} if set)")
    p.add_argument(
        "--set", action="append", metavar="KEY=VALUE", help="override a config key (repeatable)"
    )
    p.add_argument("--seed", type=int, help="override master_seed")
    p.add_argument("--out", help="CSV output path (default stdout)")
    p.add_argument("--summary", help="also write a JSON summary to this path")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    return p


def build_parser():
    parser = argparse.ArgumentParser(
        prog="walsh-ofdm",
        description="Walsh/Fourier MIMO-OFDM link simulator with CFO-aware detectors.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.RawDescriptionHelpFormatter
    sim = _sim_parent()

    p = sub.add_parser(
        "ber", parents=[sim], help="BER against SNR", epilog=CONFIG_KEYS, formatter_class=fmt
    )
    p.set_defaults(func=cmd_ber)

    p = sub.add_parser(
        "sweep",
        parents=[sim],
        help="paired BER sweep of one parameter",
        epilog=CONFIG_KEYS
        + "\nest_error values are a scalar (both std-devs) or sigma_eps:sigma_ch.\n",
        formatter_class=fmt,
    )
    p.add_argument("--var", required=True, choices=harness.SWEEP_VARIABLES)
    p.add_argument("--values", required=True, help="comma-separated sweep values")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("flops", help="analytic flop table")
    p.add_argument("--sigma", default="2,4,6", help="comma-separated sigma values")
    p.add_argument("--N", default="128", help="comma-separated block lengths")
    p.add_argument("--tau", default="80", help="comma-separated bandwidths")
    p.add_argument("--delta", default="inf,3", help="comma-separated delta values (3, inf)")
    p.add_argument(
        "--equalizers",
        default="LZF,LMMSE,MMSE_SIC,JLCOZF_SIC",
        help="comma-separated equalizers to report",
    )
    p.add_argument(
        "--per-subcarrier-build",
        action="store_true",
        help="multiply the per-stream build cost of the banded detector by N",
    )
    p.add_argument("--out", help="CSV output path (default stdout)")
    p.set_defaults(func=cmd_flops)

    p = sub.add_parser("interference", help="normalized |interference matrix| as CSV")
    p.add_argument("--kind", choices=[k.value for k in TransformKind], default="walsh")
    p.add_argument("--N", type=int, default=128)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--out", help="CSV output path (default stdout)")
    p.set_defaults(func=cmd_interference)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error [{exc.key}]: {exc}", file=sys.stderr)
        return 2
    except (_UsageError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - report any runtime failure as status 1
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
