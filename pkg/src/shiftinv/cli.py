"""Command-line entry point: ``shiftinv {gen,run,sweep,report}``.

Exit status: 0 on success, 2 for configuration errors, 3 for numerical
failures (a non positive definite system that ridge could not rescue, CG
divergence, or a failed error recomputation).
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .data import gen_synthetic, procedural_images, synthetic_ecg
from .experiments import (
    ALGORITHMS,
    SNR_LEVELS,
    ConfigError,
    ExperimentConfig,
    parse_synthetic,
    run_experiment,
    sweep_snr,
    sweep_sparsity,
    sweep_support,
    sweep_timing,
    write_csv,
)
from .io import write_csv_matrix, write_pgm, write_simx
from .solvers import DivergenceError, NotPositiveDefiniteError

log = logging.getLogger("shiftinv")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

_BOOL_KEYS = {"deterministic", "no_early_stop", "ecg_synthetic", "images_procedural"}


def _int_list(text):
    return [int(v) for v in text.split(",") if v.strip()]


def _snr_list(text):
    return [None if v.strip().lower() == "none" else float(v) for v in text.split(",") if v.strip()]


def _add_data_options(p):
    g = p.add_argument_group("data source (pick one)")
    g.add_argument("--synthetic", metavar="SPEC", help="e.g. n=20,N=500,L=10,q=3,s=4,snr=30")
    g.add_argument("--data", metavar="FILE", help="SIMX or CSV matrix, one signal per column")
    g.add_argument("--ecg", metavar="FILE", help="single-column CSV or SIMX signal")
    g.add_argument("--ecg-synthetic", action="store_true", help="bundled ECG-like signal")
    g.add_argument("--images", metavar="DIR", help="directory of 8-bit .pgm images")
    g.add_argument("--images-procedural", action="store_true", help="bundled procedural images")
    g.add_argument("--segment", type=int, default=64, help="ECG segment length p")
    g.add_argument("--patch", type=int, default=8, help="image patch side")
    g.add_argument("--ecg-samples", type=int, default=64 * 1600)


def _add_model_options(p):
    p.add_argument("--algo", choices=ALGORITHMS, help="required for run (flag or config file)")
    p.add_argument("--L", type=int, default=None, help="number of circulants / kernels")
    p.add_argument("--s", type=int, default=4, help="sparsity per signal")
    p.add_argument("--n", type=int, default=None, help="kernel / filter length")
    p.add_argument("--m", type=int, default=None, help="wavelet stages")
    p.add_argument("--iters", type=int, default=50, help="alternating iterations K")
    p.add_argument("--init", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mask-shifts", type=int, default=None, help="allow only the first Q shifts per block")
    p.add_argument("--threshold", type=float, default=0.99, help="recovery correlation threshold")
    p.add_argument("--no-early-stop", action="store_true")


def _add_common(p):
    p.add_argument("--config", metavar="FILE", help="key = value file; CLI flags take precedence")
    p.add_argument("--threads", type=int, default=None, help="cap BLAS/FFT worker threads")
    p.add_argument("--deterministic", action="store_true", help="single-threaded, bit-reproducible")
    p.add_argument("--out", default="out", help="output directory or file")


def build_parser():
    parser = argparse.ArgumentParser(prog="shiftinv", description="Shift-invariant dictionary learning experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="write a dataset to disk")
    _add_common(gen)
    gen.add_argument("--synthetic", metavar="SPEC")
    gen.add_argument("--ecg-synthetic", action="store_true")
    gen.add_argument("--images-procedural", action="store_true")
    gen.add_argument("--ecg-samples", type=int, default=64 * 1600)
    gen.add_argument("--seed", type=int, default=0)

    run = sub.add_parser("run", help="fit one configuration and write its artifacts")
    _add_common(run)
    _add_data_options(run)
    _add_model_options(run)

    sweep = sub.add_parser("sweep", help="parameter sweeps (CSV tables)")
    sweep.add_argument("kind", choices=("snr", "sparsity", "support", "timing"))
    _add_common(sweep)
    _add_data_options(sweep)
    _add_model_options(sweep)
    sweep.add_argument("--seeds", type=int, default=20, help="number of seeds 0..S-1")
    sweep.add_argument("--snrs", type=_snr_list, default=list(SNR_LEVELS), help="comma list, 'none' = noiseless")
    sweep.add_argument("--s-values", type=_int_list, default=[2, 4, 6, 8, 12, 16, 24, 32])
    sweep.add_argument("--n-values", type=_int_list, default=[2, 4, 6, 8, 12, 16])
    sweep.add_argument("--L-values", type=_int_list, default=[2, 4, 8])
    sweep.add_argument("--N", type=int, default=8192, help="signals for the timing sweep")
    sweep.add_argument("--repeats", type=int, default=3)

    rep = sub.add_parser("report", help="print the summary of a run directory")
    rep.add_argument("path")
    parser.subcommands = {"gen": gen, "run": run, "sweep": sweep, "report": rep}
    return parser


def _config_defaults(path):
    """Flatten every section of a key = value file into argparse defaults."""
    cp = configparser.ConfigParser()
    cp.optionxform = str
    if not cp.read(path):
        raise ConfigError(f"cannot read config file {path}")
    values = {}
    for section in cp.sections():
        for key, value in cp.items(section):
            dest = key.strip().replace("-", "_")
            if dest in _BOOL_KEYS:
                values[dest] = cp.getboolean(section, key)
            elif dest == "K":
                values["iters"] = value
            else:
                values[dest] = value
    return values


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        defaults = _config_defaults(args.config)
        sub = parser.subcommands[args.command]
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(defaults) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def _dataset(args):
    chosen = [k for k in ("synthetic", "data", "ecg", "images") if getattr(args, k, None)]
    chosen += [k for k in ("ecg_synthetic", "images_procedural") if getattr(args, k, False)]
    if len(chosen) != 1:
        raise ConfigError("choose exactly one data source (--synthetic, --data, --ecg, --ecg-synthetic, "
                          "--images, --images-procedural)")
    kind = {"data": "matrix"}.get(chosen[0], chosen[0])
    source = getattr(args, chosen[0])
    return kind, source if isinstance(source, str) else None


def _config(args, algo=None):
    kind, source = _dataset(args)
    algo = algo or args.algo
    if algo is None:
        raise ConfigError("--algo is required")
    L = args.L if args.L is not None else (1 if algo == "cdla" else 2)
    return ExperimentConfig(
        algorithm=algo, dataset=kind, source=source, L=L, s=args.s, n=args.n, m=args.m, K=args.iters,
        init=args.init, seed=args.seed, segment=args.segment, patch=args.patch, ecg_samples=args.ecg_samples,
        mask_shifts=args.mask_shifts, threshold=args.threshold, early_stop=not args.no_early_stop,
        output_dir=args.out,
    ).validate()


def cmd_gen(args):
    out = Path(args.out)
    if args.synthetic:
        spec = parse_synthetic(args.synthetic if "seed=" in args.synthetic else f"{args.synthetic},seed={args.seed}")
        Y, truth = gen_synthetic(spec)
        out.parent.mkdir(parents=True, exist_ok=True)
        write_simx(out, Y)
        write_simx(out.with_name(out.stem + "_kernels.simx"), truth.kernels)
        print(f"wrote {Y.shape[0]}x{Y.shape[1]} dataset to {out}")
    elif args.ecg_synthetic:
        out.parent.mkdir(parents=True, exist_ok=True)
        write_csv_matrix(out, synthetic_ecg(args.ecg_samples, seed=args.seed)[:, None])
        print(f"wrote {args.ecg_samples} ECG samples to {out}")
    elif args.images_procedural:
        out.mkdir(parents=True, exist_ok=True)
        for i, img in enumerate(procedural_images(seed=args.seed)):
            write_pgm(out / f"image{i}.pgm", img)
        print(f"wrote procedural images to {out}")
    else:
        raise ConfigError("gen needs --synthetic, --ecg-synthetic or --images-procedural")


def cmd_run(args):
    config = _config(args)
    report, Y, D, X, params = run_experiment(config)
    out = Path(args.out)
    report.save(out, Y, D, X)
    write_simx(out / "params.simx", params)
    line = f"{config.algorithm}: epsilon = {report.epsilon:.4f}% after {report.n_iter} iterations"
    if report.recovery is not None:
        line += f", recovery = {report.recovery:.3f}"
    if report.baseline_epsilon is not None:
        line += f", fixed-{config.init} baseline = {report.baseline_epsilon:.4f}%"
    print(line)


def cmd_sweep(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seeds = list(range(args.seeds))
    if args.kind == "snr":
        if not args.synthetic:
            raise ConfigError("the snr sweep needs --synthetic without an snr entry")
        base = ",".join(t for t in args.synthetic.split(",") if not t.strip().startswith(("snr", "seed")))
        spec = parse_synthetic(base)
        L = args.L if args.L is not None else spec.L
        header, rows, sheader, srows = sweep_snr(base, L, args.s, args.iters, seeds, args.snrs,
                                                 init=args.init or "random", threshold=args.threshold,
                                                 early_stop=not args.no_early_stop)
        write_csv(out / "recovery_vs_snr.csv", header, rows)
        write_csv(out / "recovery_scores.csv", sheader, srows)
    elif args.kind == "sparsity":
        header, rows = sweep_sparsity(_config(args), args.s_values)
        write_csv(out / "error_vs_sparsity.csv", header, rows)
    elif args.kind == "support":
        m = args.m if args.m is not None else 1
        header, rows = sweep_support(_config(args, algo=args.algo or "cdla"), args.n_values, m=m)
        write_csv(out / "error_vs_support.csv", header, rows)
    else:
        n = args.n if args.n is not None else 64
        header, rows = sweep_timing(args.L_values, n=n, N=args.N, s=args.s, K=args.iters,
                                    repeats=args.repeats, seed=args.seed)
        write_csv(out / "timing.csv", header, rows)
    print(f"wrote {args.kind} sweep to {out}")


def cmd_report(args):
    path = Path(args.path)
    summary_path = path / "summary.json" if path.is_dir() else path
    try:
        summary = json.loads(summary_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read run summary {summary_path}: {exc}") from exc
    print(f"algorithm        {summary['algorithm']} (seed {summary['seed']})")
    print(f"epsilon          {summary['epsilon_percent']:.6f} %")
    print(f"iterations       {summary['iterations']}{' (early stop)' if summary['stopped_early'] else ''}")
    print(f"monotone updates {summary['dictionary_steps_monotone']}")
    for key in ("recovery_rate", "baseline_epsilon_percent", "utilization_total", "expected_peak"):
        if key in summary:
            print(f"{key:<16} {summary[key]}")
    for phase, secs in sorted(summary["timings_seconds"].items()):
        print(f"time[{phase}]".ljust(17) + f"{secs:.3f} s")


COMMANDS = {"gen": cmd_gen, "run": cmd_run, "sweep": cmd_sweep, "report": cmd_report}


def main(argv=None):
    try:
        args = parse_args(sys.argv[1:] if argv is None else argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # argparse usage errors
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    threads = 1 if getattr(args, "deterministic", False) else getattr(args, "threads", None)
    limits = threadpool_limits(limits=threads) if threads else nullcontext()
    try:
        with limits:
            COMMANDS[args.command](args)
    except (NotPositiveDefiniteError, DivergenceError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
