"""Run the 1-D truncation experiment with default settings.

Usage: python scripts/run_truncation1d.py [out_dir]
"""

import argparse

from trdre.experiments import run_truncation1d

if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out_dir", nargs="?", default="results/truncation1d")
    args = parser.parse_args()
    summary = run_truncation1d(args.out_dir)
    print(f"delta_hat={summary['delta_hat']:.4f} (target {summary['delta_star']})")
    print(f"outputs in {args.out_dir}")
