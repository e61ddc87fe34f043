"""Run the 1-D outlier-location sweep with default settings.

Usage: python scripts/run_outlier1d.py [out_dir]
"""

import argparse

from trdre.experiments import run_outlier1d

if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out_dir", nargs="?", default="results/outlier1d")
    args = parser.parse_args()
    summary = run_outlier1d(args.out_dir)
    for row in summary["rows"]:
        print(
            f"b={row['b']:.0f}: trimmed delta={row['delta_trdre']:.3f} "
            f"untrimmed delta={row['delta_kliep']:.3f} (target {summary['delta_star']})"
        )
    print(f"outputs in {args.out_dir}")
