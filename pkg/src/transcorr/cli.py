"""Command-line front end.

Subcommands: simulate, estimate, moments, merge-blocks, shrinkage-curve,
reproduce.  Exit codes: 0 ok, 2 config error, 3 data error, 4 numerical
inconsistency.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .blocks import merge_ld_blocks, read_block_file, write_block_file
from .config import load_config
from .errors import ConfigError, DataError, NumericalInconsistencyError
from .harness import estimate_from_files, run_experiment
from .ld import read_covariance
from .moments import MOMENTS_CSV_HEADER, blockwise_moments, read_moments, write_moments
from .reproduce import reproduce
from .shrinkage import shrinkage_curve, write_curve

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="transcorr",
        description="Bias-corrected trans-ancestry genetic correlation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run a replicated simulation experiment")
    p_sim.add_argument("--config", required=True, help="experiment config file")
    p_sim.add_argument("--seed", type=int, default=None, help="override base_seed")
    p_sim.add_argument("--workers", type=int, default=None)
    p_sim.add_argument("--out", default=None, help="output directory")

    p_est = sub.add_parser("estimate", help="estimate from summary-stats/genotype/trait files")
    p_est.add_argument("--summary-stats", required=True)
    p_est.add_argument("--genotypes", required=True)
    p_est.add_argument("--traits", required=True)
    p_est.add_argument("--moments", required=True)
    p_est.add_argument("--h2-beta", type=float, required=True)
    p_est.add_argument("--h2-alpha", type=float, required=True)
    p_est.add_argument("--no-center", action="store_true",
                       help="use raw inner products instead of centered traits")
    p_est.add_argument("--config-id", default="estimate")
    p_est.add_argument("--out", default=None, help="write a results CSV here")

    p_mom = sub.add_parser("moments", help="compute spectral moments from covariance exports")
    p_mom.add_argument("--x-cov", required=True, help="covariance export for population I")
    p_mom.add_argument("--z-cov", required=True, help="covariance export for population II")
    p_mom.add_argument("--n", type=int, default=None,
                       help="sample size behind the estimates (sample-debiased mode)")
    p_mom.add_argument("--mode", choices=("population-exact", "sample-debiased"),
                       default="population-exact")
    p_mom.add_argument("--out", required=True)

    p_merge = sub.add_parser("merge-blocks", help="merge two block-spec files")
    p_merge.add_argument("--a", required=True)
    p_merge.add_argument("--b", required=True)
    p_merge.add_argument("--out", required=True)

    p_curve = sub.add_parser("shrinkage-curve", help="tabulate the shrinkage path")
    p_curve.add_argument("--moments", required=True, help="moments CSV")
    p_curve.add_argument("--h2-beta", type=float, required=True)
    p_curve.add_argument("--h2-alpha", type=float, default=None)
    p_curve.add_argument("--phi", type=float, default=1.0)
    p_curve.add_argument("--omega-min", type=float, default=1e-3)
    p_curve.add_argument("--omega-max", type=float, default=50.0)
    p_curve.add_argument("--omega-points", type=int, default=40)
    p_curve.add_argument("--t", default="0,0.25,0.5,0.75,1",
                         help="comma-separated LD mixing weights in [0,1]")
    p_curve.add_argument("--out", required=True)

    p_rep = sub.add_parser("reproduce", help="emit desk-scale reproduction artifacts")
    p_rep.add_argument("--target", choices=("table1", "fig1", "fig2", "fig3"),
                       required=True)
    p_rep.add_argument("--scale", choices=("desk", "paper"), default="desk")
    p_rep.add_argument("--allow-paper-scale", action="store_true")
    p_rep.add_argument("--seed", type=int, default=None)
    p_rep.add_argument("--workers", type=int, default=1)
    p_rep.add_argument("--out", default=".")
    return parser


def _cmd_simulate(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config = config.with_seed(args.seed)
    table = run_experiment(config, out_dir=args.out, workers=args.workers)
    print(f"{table.replicates} replicates ({table.n_failed} failed) -> {table.raw_path}")
    for row in table.rows:
        print(f"  {row.config_id} {row.estimator}: mean={row.mean:.4f} se={row.se:.4f}")
    return EXIT_OK


def _cmd_estimate(args) -> int:
    result = estimate_from_files(
        args.summary_stats, args.genotypes, args.traits, args.moments,
        h2_beta=args.h2_beta, h2_alpha=args.h2_alpha,
        center_traits=not args.no_center,
    )
    row = result.csv_row(args.config_id, 0)
    from .estimators import RESULTS_CSV_HEADER
    if args.out:
        with open(args.out, "wt", encoding="utf-8") as fh:
            fh.write(RESULTS_CSV_HEADER + "\n")
            fh.write(row + "\n")
    print(RESULTS_CSV_HEADER)
    print(row)
    return EXIT_OK


def _cmd_moments(args) -> int:
    x_cov = read_covariance(args.x_cov)
    z_cov = read_covariance(args.z_cov)
    if args.mode == "sample-debiased":
        if args.n is None:
            raise ConfigError("sample-debiased moments need --n (estimation sample size)")
        m = blockwise_moments(x_cov, z_cov, args.n, mode="sample-debiased")
    else:
        m = blockwise_moments(x_cov, z_cov, n_x=1, mode="population-exact")
    write_moments(m, args.out)
    print(MOMENTS_CSV_HEADER)
    print(m.csv_row())
    return EXIT_OK


def _cmd_merge_blocks(args) -> int:
    merged = merge_ld_blocks(read_block_file(args.a), read_block_file(args.b))
    write_block_file(merged, args.out)
    print(f"{len(merged)} merged blocks covering 1..{merged.p} -> {args.out}")
    return EXIT_OK


def _cmd_curve(args) -> int:
    moments = read_moments(args.moments)
    t_grid = [float(v) for v in args.t.split(",") if v != ""]
    omega_grid = list(np.geomspace(args.omega_min, args.omega_max, args.omega_points))
    rows = shrinkage_curve(omega_grid, t_grid, h2_beta=args.h2_beta,
                           moments=moments, phi=args.phi, h2_alpha=args.h2_alpha)
    write_curve(rows, args.out)
    print(f"{len(rows)} curve rows -> {args.out}")
    return EXIT_OK


def _cmd_reproduce(args) -> int:
    files = reproduce(args.target, scale=args.scale, out_dir=args.out,
                      allow_paper_scale=args.allow_paper_scale,
                      workers=args.workers, base_seed=args.seed)
    for name, path in sorted(files.items()):
        print(f"{name}: {path}")
    return EXIT_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "estimate": _cmd_estimate,
    "moments": _cmd_moments,
    "merge-blocks": _cmd_merge_blocks,
    "shrinkage-curve": _cmd_curve,
    "reproduce": _cmd_reproduce,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        from threadpoolctl import threadpool_limits
        with threadpool_limits(limits=1):
            return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalInconsistencyError as exc:
        print(f"numerical inconsistency: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
