#!/usr/bin/env python3
"""Emit the LD-heterogeneity shrinkage curves (biobank moment fixture).

Writes the S(t)-vs-omega tables behind the shrinkage-factor figure and the
within- vs cross-population comparison figure as CSV; no plotting here.
"""

import argparse

from transcorr.reproduce import reproduce


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="out/curves")
    args = parser.parse_args()
    for target in ("fig1", "fig3"):
        files = reproduce(target, "desk", out_dir=f"{args.out}/{target}")
        for name, path in sorted(files.items()):
            print(f"{target} {name}: {path}")


if __name__ == "__main__":
    main()
