"""Run the Gaussian MN change-detection experiment with default settings.

Sweeps 30 penalties at each of d in {20, 25, 36}; takes several minutes.
Set TRDRE_THREADS to parallelize the three conditions per dimension.

Usage: python scripts/run_mnchange.py [out_dir]
"""

import argparse

from trdre.experiments import run_mnchange

if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out_dir", nargs="?", default="results/mnchange")
    args = parser.parse_args()
    summary = run_mnchange(args.out_dir)
    for d, by_cond in summary["auc"].items():
        line = " ".join(f"{name}={auc:.3f}" for name, auc in sorted(by_cond.items()))
        print(f"d={d}: AUC {line}")
    print(f"outputs in {args.out_dir}")
