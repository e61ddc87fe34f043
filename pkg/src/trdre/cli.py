"""Command line interface: fit, experiment, gen.

Every command prints the resolved seed on stdout (default 42), writes all
outputs atomically, and is deterministic: identical flags and seed give
byte-identical files. Exit codes: 0 all requested outputs written, 2 bad
usage or unreadable input (message names the file and line), 3 runtime
failure such as a diverging fit.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import experiments
from .baselines import brute_force_maxmin_1d
from .estimator import (
    FitDivergedError,
    TrimConfig,
    fit_featurized,
    fit_result_to_dict,
    kkt_check,
)
from .ratio_model import feature_map_from_name, featurize, log_normalizer
from .storage import CsvParseError, read_numeric_csv, write_csv, write_json
from .synthetic import (
    gen_gaussian_mn_pair,
    gen_outlier_1d,
    gen_truncation_1d,
    sample_gaussian,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_RUNTIME = 3


def _add_common_fit_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--nu", type=float, default=1.0, help="kept-weight fraction in (0, 1], 1 = no trimming")
    p.add_argument("--lambda", dest="lam", type=float, default=0.0, help="regularizer scale")
    p.add_argument("--regularizer", choices=["none", "l1", "l2sq"], default="none")
    p.add_argument("--eta0", type=float, default=1.0, help="base step size")
    p.add_argument("--max-iter", type=int, default=5000)
    p.add_argument("--tol", type=float, default=1e-7, help="best-objective window tolerance")
    p.add_argument("--seed", type=int, default=42)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trdre", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit the trimmed ratio estimator on two CSV samples")
    p_fit.add_argument("--xp", required=True, help="numerator sample CSV (rows = samples)")
    p_fit.add_argument("--xq", required=True, help="denominator sample CSV")
    p_fit.add_argument("--features", choices=["linear", "quadratic", "rbf"], default="linear")
    p_fit.add_argument(
        "--rbf-bandwidth",
        type=float,
        default=None,
        help="rbf kernel bandwidth (default: median pairwise distance of the basis, which is Xq)",
    )
    _add_common_fit_flags(p_fit)
    p_fit.add_argument("--out", required=True, help="output directory")
    p_fit.add_argument("--verify", action="store_true", help="run optimality self-checks and print results")

    p_exp = sub.add_parser("experiment", help="run a reference experiment")
    exp_sub = p_exp.add_subparsers(dest="experiment", required=True)

    e_tr = exp_sub.add_parser("truncation1d")
    e_tr.add_argument("--n", type=int, default=5000)
    e_tr.add_argument("--nu", type=float, default=0.5)
    e_tr.add_argument("--seed", type=int, default=42)
    e_tr.add_argument("--eta0", type=float, default=1.0)
    e_tr.add_argument("--max-iter", type=int, default=5000)
    e_tr.add_argument("--tol", type=float, default=1e-7)
    e_tr.add_argument("--out", required=True)

    e_out = exp_sub.add_parser("outlier1d")
    e_out.add_argument("--n-good", type=int, default=4000)
    e_out.add_argument("--n-out", type=int, default=1000)
    e_out.add_argument("--n-q", type=int, default=5000)
    e_out.add_argument("--b-grid", default="0,1,2,3,4,5,6", help="comma separated outlier locations")
    e_out.add_argument("--nu", type=float, default=0.8)
    e_out.add_argument("--seed", type=int, default=42)
    e_out.add_argument("--eta0", type=float, default=1.0)
    e_out.add_argument("--max-iter", type=int, default=5000)
    e_out.add_argument("--tol", type=float, default=1e-7)
    e_out.add_argument("--out", required=True)

    e_mn = exp_sub.add_parser("mnchange")
    e_mn.add_argument("--d-list", default="20,25,36", help="comma separated dimensions")
    e_mn.add_argument("--n", type=int, default=500)
    e_mn.add_argument("--n-changed", type=int, default=20)
    e_mn.add_argument("--nu", type=float, default=0.9)
    e_mn.add_argument("--lambda", dest="lam", type=float, default=0.0938, help="penalty for the heat maps")
    e_mn.add_argument(
        "--lambda-grid",
        default=None,
        help="comma separated ascending penalties for the sweep (default: 30 log points in [1e-4, 1])",
    )
    e_mn.add_argument("--outlier-value", type=float, default=10.0)
    e_mn.add_argument("--threshold", type=float, default=1e-6)
    e_mn.add_argument("--seed", type=int, default=42)
    e_mn.add_argument("--eta0", type=float, default=0.1)
    e_mn.add_argument("--max-iter", type=int, default=5000)
    e_mn.add_argument("--tol", type=float, default=1e-7)
    e_mn.add_argument("--out", required=True)

    p_gen = sub.add_parser("gen", help="export synthetic datasets")
    gen_sub = p_gen.add_subparsers(dest="generator", required=True)

    g_pair = gen_sub.add_parser("mnpair")
    g_pair.add_argument("--d", type=int, required=True)
    g_pair.add_argument("--n-changed", type=int, required=True)
    g_pair.add_argument("--seed", type=int, default=42)
    g_pair.add_argument("--out", required=True, help="output JSON path")

    g_samp = gen_sub.add_parser("mnsamples")
    g_samp.add_argument("--pair", required=True, help="mnpair JSON path")
    g_samp.add_argument("--which", choices=["p", "q"], required=True)
    g_samp.add_argument("--n", type=int, required=True)
    g_samp.add_argument("--seed", type=int, default=42)
    g_samp.add_argument("--out", required=True, help="output CSV path")

    g_gauss = gen_sub.add_parser("gaussian")
    g_gauss.add_argument("--precision", required=True, help="precision matrix CSV")
    g_gauss.add_argument("--n", type=int, required=True)
    g_gauss.add_argument("--seed", type=int, default=42)
    g_gauss.add_argument("--out", required=True)

    g_o1 = gen_sub.add_parser("outlier1d")
    g_o1.add_argument("--n-good", type=int, default=4000)
    g_o1.add_argument("--n-out", type=int, default=1000)
    g_o1.add_argument("--b", type=float, required=True)
    g_o1.add_argument("--n-q", type=int, default=None)
    g_o1.add_argument("--seed", type=int, default=42)
    g_o1.add_argument("--out-xp", required=True)
    g_o1.add_argument("--out-xq", required=True)

    g_t1 = gen_sub.add_parser("truncation1d")
    g_t1.add_argument("--n", type=int, default=5000)
    g_t1.add_argument("--nu", type=float, default=0.5)
    g_t1.add_argument("--seed", type=int, default=42)
    g_t1.add_argument("--out-xp", required=True)
    g_t1.add_argument("--out-xq", required=True)

    return parser


def _echo_seed(seed: int) -> None:
    default_note = " (default)" if seed == 42 else ""
    print(f"[trdre] seed={seed}{default_note}")


def cmd_fit(args) -> int:
    Xp = read_numeric_csv(args.xp)
    Xq = read_numeric_csv(args.xq)
    cfg = TrimConfig(
        nu=args.nu, lam=args.lam, regularizer=args.regularizer,
        eta0=args.eta0, max_iter=args.max_iter, tol=args.tol, seed=args.seed,
    )
    fmap = feature_map_from_name(args.features, basis=Xq, bandwidth=args.rbf_bandwidth)
    PhiP, PhiQ = featurize(Xp, fmap), featurize(Xq, fmap)
    result = fit_featurized(PhiP, PhiQ, cfg)

    out = Path(args.out)
    payload = fit_result_to_dict(result, cfg)
    payload["inputs"] = {
        "xp": args.xp, "xq": args.xq, "features": args.features,
        "rbf_bandwidth": getattr(fmap, "bandwidth", None),
    }
    write_json(out / "fit_result.json", payload)
    kept = result.kept_indices
    trimmed = np.setdiff1d(np.arange(PhiP.shape[0]), kept)
    write_csv(out / "kept_indices.csv", [[int(i)] for i in kept], header=["index"])
    write_csv(out / "trimmed_indices.csv", [[int(i)] for i in trimmed], header=["index"])
    print(f"[trdre] wrote {out / 'fit_result.json'} (objective_best={result.objective_best!r})")

    if args.verify:
        report = kkt_check(result, PhiP, PhiQ, cfg)
        print(
            f"[verify] weight structure {'PASS' if report.weight_ok else 'FAIL'}"
            f" (max violation {report.max_weight_violation:.3g})"
        )
        print(
            f"[verify] stationarity {'PASS' if report.stationarity_ok else 'FAIL'}"
            f" (||grad||-style residual {report.stationarity:.3g}, tol {report.stationarity_tol})"
        )
        ratios = np.exp(PhiQ @ result.delta_best - log_normalizer(result.delta_best, PhiQ))
        gap = abs(float(np.mean(ratios)) - 1.0)
        print(f"[verify] self-normalization {'PASS' if gap < 1e-10 else 'FAIL'} (|mean-1| = {gap:.3g})")
        if PhiP.shape[1] == 1 and cfg.lam == 0.0:
            gdelta, gval = brute_force_maxmin_1d(PhiP, PhiQ, cfg.nu, grid_step=1e-2)
            diff = abs(gval - result.objective_best)
            print(
                f"[verify] 1-d grid oracle {'PASS' if diff < 1e-2 else 'FAIL'}"
                f" (grid delta {gdelta!r}, |objective gap| = {diff:.3g})"
            )
    return EXIT_OK


def cmd_experiment(args) -> int:
    common = dict(seed=args.seed, eta0=args.eta0, max_iter=args.max_iter, tol=args.tol)
    if args.experiment == "truncation1d":
        experiments.run_truncation1d(args.out, n=args.n, nu=args.nu, **common)
    elif args.experiment == "outlier1d":
        b_grid = [float(v) for v in args.b_grid.split(",") if v != ""]
        experiments.run_outlier1d(
            args.out, n_good=args.n_good, n_out=args.n_out, n_q=args.n_q,
            b_grid=b_grid, nu=args.nu, **common,
        )
    else:
        d_values = [int(v) for v in args.d_list.split(",") if v != ""]
        if args.lambda_grid is None:
            grid = experiments.DEFAULT_LAMBDA_GRID
        else:
            grid = [float(v) for v in args.lambda_grid.split(",") if v != ""]
        experiments.run_mnchange(
            args.out, d_values=d_values, n=args.n, n_changed=args.n_changed, nu=args.nu,
            lam_heatmap=args.lam, lambda_grid=grid, outlier_value=args.outlier_value,
            threshold=args.threshold, **common,
        )
    print(f"[trdre] experiment {args.experiment} written to {args.out}")
    return EXIT_OK


def cmd_gen(args) -> int:
    if args.generator == "mnpair":
        pair = gen_gaussian_mn_pair(args.d, args.n_changed, args.seed)
        write_json(
            args.out,
            {
                "d": args.d,
                "n_changed": args.n_changed,
                "seed": args.seed,
                "theta_p": [[float(v) for v in row] for row in pair.theta_p],
                "theta_q": [[float(v) for v in row] for row in pair.theta_q],
                "delta_star": [[float(v) for v in row] for row in pair.delta_star],
                "changed_edges": [[int(i), int(j)] for i, j in pair.changed_edges],
            },
        )
    elif args.generator == "mnsamples":
        with open(args.pair, encoding="utf-8") as fh:
            pair = json.load(fh)
        theta = np.asarray(pair["theta_p" if args.which == "p" else "theta_q"], dtype=float)
        X = sample_gaussian(theta, args.n, args.seed)
        write_csv(args.out, X, comment=f"which={args.which} n={args.n} seed={args.seed}")
    elif args.generator == "gaussian":
        theta = read_numeric_csv(args.precision)
        X = sample_gaussian(theta, args.n, args.seed)
        write_csv(args.out, X, comment=f"n={args.n} seed={args.seed}")
    elif args.generator == "outlier1d":
        xp, xq = gen_outlier_1d(args.n_good, args.n_out, args.b, args.seed, n_q=args.n_q)
        note = f"b={args.b} n_good={args.n_good} n_out={args.n_out} seed={args.seed}"
        write_csv(args.out_xp, xp, comment=note)
        write_csv(args.out_xq, xq, comment=note)
    else:
        xp, xq = gen_truncation_1d(args.n, args.nu, args.seed)
        note = f"n={args.n} nu={args.nu} seed={args.seed}"
        write_csv(args.out_xp, xp, comment=note)
        write_csv(args.out_xq, xq, comment=note)
    print("[trdre] gen done")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    _echo_seed(args.seed)
    try:
        if args.command == "fit":
            return cmd_fit(args)
        if args.command == "experiment":
            return cmd_experiment(args)
        return cmd_gen(args)
    except FileNotFoundError as exc:
        print(f"error: missing input file: {exc.filename or exc}", file=sys.stderr)
        return EXIT_USAGE
    except CsvParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FitDivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
