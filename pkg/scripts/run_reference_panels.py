#!/usr/bin/env python3
"""Compare ridge reference-panel choices in trans-ancestry estimation.

Runs the desk-scale panel comparison (training-matched, test-matched, and
equally mixed panels plus the marginal estimator) and prints the mean naive
and corrected estimates per panel.
"""

import argparse

from transcorr.harness import run_experiment
from transcorr.reproduce import fig2_config


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="out/panels")
    parser.add_argument("--workers", type=int, default=2)
    parser.add_argument("--replicates", type=int, default=None)
    args = parser.parse_args()

    config = fig2_config("desk")
    if args.replicates is not None:
        from dataclasses import replace
        config = replace(config, replicates=args.replicates)
    table = run_experiment(config, out_dir=args.out, workers=args.workers)
    print(f"{'group':<22} {'estimator':<12} {'mean':>8} {'sd':>8}   (truth 0.3)")
    for row in table.rows:
        print(f"{row.config_id:<22} {row.estimator:<12} {row.mean:>8.4f} {row.se:>8.4f}")


if __name__ == "__main__":
    main()
