"""Command-line entry point.

Subcommands: simulate | spectrum | clt | martingale-error | lln.
Exit codes: 0 pass, 1 verdict failure, 2 usage/config error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys

import numpy as np

from . import config as cfgmod
from .errors import ConfigError, FieldSpectraError, UnsupportedModelError
from .harness import ExperimentPlan, lln_rotated_average, run_clt_experiment, write_report
from .models import analytic_spectral_density, density_fn, sample_to_csv, simulate
from .projection import martingale_approx_error
from .rng import LANE_INNOVATIONS, StreamKey
from .spectral import TWO_PI, fejer_smoothed_variance, spectral_density_partial_sum


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fieldspectra",
        description=(
            "Simulate stationary lattice random fields and verify the limit "
            "behaviour of their Fourier transforms and periodograms."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, timestamp: bool = False) -> None:
        p.add_argument("--config", required=True, metavar="PATH",
                       help="TOML or JSON run configuration")
        p.add_argument("--out", metavar="PATH",
                       help="output file (overrides output.path from the config)")
        p.add_argument("--seed", type=int, metavar="U64",
                       help="override the configured master seed")
        if timestamp:
            p.add_argument("--no-timestamp", action="store_true",
                           help="omit the generated_at field for byte-reproducible output")

    p = sub.add_parser("simulate", help="write one field realization as CSV")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("spectrum", help="tabulate spectral densities on a frequency grid")
    common(p)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("clt", help="run the central-limit experiment and write a JSON report")
    common(p, timestamp=True)
    p.add_argument("--replicates", type=int, metavar="N",
                   help="override the configured replicate count")
    p.add_argument("--negative-control", action="store_true",
                   help="sabotage hook: double the target variance; a healthy "
                        "run must then exit 1")
    p.add_argument("--workers", type=int, default=1, metavar="N",
                   help="worker threads (results are identical for any value)")
    p.set_defaults(func=cmd_clt)

    p = sub.add_parser("martingale-error",
                       help="tabulate the normalized field/martingale gap over a shape ladder")
    common(p)
    p.add_argument("--replicates", type=int, metavar="N",
                   help="override the configured replicate count")
    p.set_defaults(func=cmd_martingale_error)

    p = sub.add_parser("lln", help="tabulate rotated-average decay over an n1 ladder")
    common(p)
    p.add_argument("--replicates", type=int, metavar="N",
                   help="override the configured replicate count")
    p.set_defaults(func=cmd_lln)
    return parser


def _load(args) -> dict:
    cfg = cfgmod.load_config(args.config)
    cfgmod.validate_top_level(cfg)
    return cfg


def _out_path(args, output: cfgmod.OutputConfig) -> str:
    path = args.out or output.path
    if path is None:
        raise ConfigError("no output path: pass --out or set output.path in the config")
    return path


def cmd_simulate(args) -> int:
    cfg = _load(args)
    model = cfgmod.parse_model(cfgmod._require_table(cfg, "model", "config"))
    sim = cfgmod.parse_simulate(cfgmod._require_table(cfg, "simulate", "config"))
    output = cfgmod.parse_output(cfg.get("output"))
    seed = args.seed if args.seed is not None else sim.master_seed
    sample = simulate(model, sim.shape, StreamKey(seed, sim.replicate_id, LANE_INNOVATIONS))
    path = _out_path(args, output)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        sample_to_csv(sample, fh)
    return 0


def _frequency_grid(extents) -> np.ndarray:
    axes = [-math.pi + TWO_PI * np.arange(m) / m for m in extents]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def cmd_spectrum(args) -> int:
    cfg = _load(args)
    model = cfgmod.parse_model(cfgmod._require_table(cfg, "model", "config"))
    spec = cfgmod.parse_spectrum(cfgmod._require_table(cfg, "spectrum", "config"))
    output = cfgmod.parse_output(cfg.get("output"))
    d = len(spec.grid)
    if spec.fejer_shape.ndim != d:
        raise ConfigError(
            f"spectrum.fejer_shape has d={spec.fejer_shape.ndim} but grid has d={d}"
        )
    pts = _frequency_grid(spec.grid)
    f = density_fn(model, ndim=d)
    path = _out_path(args, output)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            [f"t{i + 1}" for i in range(d)]
            + ["f_analytic", "f_partial_sum", "fejer_smoothed_normalized"]
        )
        norm = TWO_PI**d
        for row in pts:
            t = tuple(float(c) for c in row)
            try:
                analytic = repr(analytic_spectral_density(model, t))
            except UnsupportedModelError:
                analytic = ""
            partial = spectral_density_partial_sum(model, t, spec.partial_sum_radius)
            smoothed = fejer_smoothed_variance(
                f, spec.fejer_shape, t, spec.quadrature_resolution
            )
            writer.writerow(
                [repr(c) for c in t] + [analytic, repr(partial), repr(smoothed / norm)]
            )
    return 0


def cmd_clt(args) -> int:
    cfg = _load(args)
    model = cfgmod.parse_model(cfgmod._require_table(cfg, "model", "config"))
    plan = cfgmod.parse_experiment(cfgmod._require_table(cfg, "experiment", "config"), model)
    output = cfgmod.parse_output(cfg.get("output"))
    if args.seed is not None or args.replicates is not None or args.negative_control:
        plan = ExperimentPlan(
            model=plan.model,
            frequencies=plan.frequencies,
            shapes=plan.shapes,
            replicates=args.replicates if args.replicates is not None else plan.replicates,
            master_seed=args.seed if args.seed is not None else plan.master_seed,
            tests=plan.tests,
            negative_control=plan.negative_control or args.negative_control,
        )
    report = run_clt_experiment(plan, workers=max(1, args.workers))
    path = _out_path(args, output)
    timestamp = output.timestamp and not args.no_timestamp
    write_report(report, path, timestamp=timestamp, csv_path=output.csv_path)
    return 0 if report.passed else 1


def cmd_martingale_error(args) -> int:
    cfg = _load(args)
    model = cfgmod.parse_model(cfgmod._require_table(cfg, "model", "config"))
    mart = cfgmod.parse_martingale(cfgmod._require_table(cfg, "martingale", "config"))
    output = cfgmod.parse_output(cfg.get("output"))
    seed = args.seed if args.seed is not None else mart.master_seed
    replicates = args.replicates if args.replicates is not None else mart.replicates
    path = _out_path(args, output)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["shape", "estimate", "standard_error", "replicates"])
        for shape in mart.shapes:
            est = martingale_approx_error(
                model,
                shape,
                mart.frequency,
                ell=mart.truncation,
                replicates=replicates,
                key=StreamKey(seed, 0, LANE_INNOVATIONS),
            )
            writer.writerow(
                [
                    "x".join(str(n) for n in shape.extents),
                    repr(est.value),
                    repr(est.standard_error),
                    est.replicates,
                ]
            )
    return 0


def cmd_lln(args) -> int:
    cfg = _load(args)
    model = cfgmod.parse_model(cfgmod._require_table(cfg, "model", "config"))
    lln = cfgmod.parse_lln(cfgmod._require_table(cfg, "lln", "config"))
    output = cfgmod.parse_output(cfg.get("output"))
    seed = args.seed if args.seed is not None else lln.master_seed
    replicates = args.replicates if args.replicates is not None else lln.replicates
    estimates = lln_rotated_average(
        model,
        lln.frequency,
        lln.n1_ladder,
        lln.n2,
        replicates=replicates,
        key=StreamKey(seed, 0, LANE_INNOVATIONS),
        rotated=lln.rotated,
    )
    path = _out_path(args, output)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["n1", "estimate", "standard_error", "replicates"])
        for n1, est in zip(lln.n1_ladder, estimates):
            writer.writerow([n1, repr(est.value), repr(est.standard_error), est.replicates])
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse prints its own message; keep its code
        code = exc.code
        return code if isinstance(code, int) else 2
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    except FieldSpectraError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
