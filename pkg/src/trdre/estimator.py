"""Trimmed density ratio estimation by gradient ascent and trimming.

The estimator solves the convex max-min program

    max_delta  min_w  sum_i w_i * log rhat(x_p_i; delta)  -  lam * R(delta)
    s.t.       w in [0, 1/n_p]^{n_p},  <1, w> = nu,

where rhat is the self-normalized log-linear ratio model and nu in (0, 1]
is the fraction of numerator samples trusted to be inliers. For any fixed
delta the inner minimum is attained at a polytope vertex: weight 1/n_p on
the k_keep = round(nu * n_p) samples with the smallest log-ratio, weight 0
elsewhere. The outer loop therefore alternates, per iteration:

    1. rank X_p by log-ratio under the current delta,
    2. assign the extreme-point weights w,
    3. step delta along the (sub)gradient with rate eta0 / sqrt(it + 1),

while tracking the best (objective, delta, w) triple visited. With nu = 1
every weight is 1/n_p and the procedure is exactly the classical
unconstrained KLIEP fit, exposed as ``fit_kliep``.

Regularizers: "none", "l1" (R = sum |delta_i|), "l2sq" (R = sum delta_i^2).
The l1 step is proximal (soft-thresholding after the gradient step) so
coefficients reach exact zeros; the other two fold the regularizer's
(sub)gradient into the step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .ratio_model import FeatureMap, _log_mean_exp_and_softmax, as_sample_matrix, featurize

REGULARIZERS = ("none", "l1", "l2sq")


@dataclass(frozen=True)
class TrimConfig:
    """Hyperparameters for a trimmed ratio fit.

    nu is the kept-weight budget (1 = no trimming), lam scales the
    regularizer, eta0 the base step size. The loop stops at max_iter or
    once the best objective improves by less than tol over a 50-iteration
    window. l1_ball_radius, when set, projects delta onto an l1 ball of
    that radius after every step (off by default). seed is carried along
    for provenance in serialized results; the fit itself is deterministic.
    """

    nu: float = 1.0
    lam: float = 0.0
    regularizer: str = "none"
    eta0: float = 1.0
    max_iter: int = 5000
    tol: float = 1e-7
    seed: int = 42
    l1_ball_radius: float | None = None

    def __post_init__(self) -> None:
        if not (0.0 < self.nu <= 1.0):
            raise ValueError(f"nu must lie in (0, 1], got {self.nu}")
        if self.lam < 0.0 or not np.isfinite(self.lam):
            raise ValueError(f"lam must be a finite nonnegative real, got {self.lam}")
        if self.regularizer not in REGULARIZERS:
            raise ValueError(f"regularizer must be one of {REGULARIZERS}, got {self.regularizer!r}")
        if self.eta0 <= 0.0 or not np.isfinite(self.eta0):
            raise ValueError(f"eta0 must be a positive real, got {self.eta0}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be at least 1, got {self.max_iter}")
        if self.tol <= 0.0:
            raise ValueError(f"tol must be a positive real, got {self.tol}")
        if self.l1_ball_radius is not None and self.l1_ball_radius <= 0.0:
            raise ValueError(f"l1_ball_radius must be positive when set, got {self.l1_ball_radius}")


class FitDivergedError(RuntimeError):
    """Objective became non-finite; usually eta0 is too large."""

    def __init__(self, iteration: int, delta_norm: float):
        self.iteration = iteration
        self.delta_norm = delta_norm
        super().__init__(
            f"objective became non-finite at iteration {iteration} "
            f"(||delta||_inf = {delta_norm:.3g}); try a smaller eta0"
        )


@dataclass
class FitResult:
    """Best iterate of a trimmed fit.

    trace holds one (iteration, objective) pair per iteration actually
    run, where the objective is the inner-minimized max-min value at that
    iterate; objective_best is its running maximum. t_hat is the largest
    kept log-ratio under delta_best (the trimming threshold).
    """

    delta_best: np.ndarray
    w_best: np.ndarray
    objective_best: float
    t_hat: float
    trace: list[tuple[int, float]] = field(repr=False)
    iterations_run: int
    converged: bool

    @property
    def kept_indices(self) -> np.ndarray:
        return np.flatnonzero(self.w_best > 0.0)


def keep_count(nu: float, n_p: int) -> int:
    """Number of kept samples: nu * n_p rounded half-up, must be >= 1."""
    k = int(math.floor(nu * n_p + 0.5))
    if k < 1:
        raise ValueError(f"nu={nu} keeps no samples out of n_p={n_p}")
    return min(k, n_p)


def assign_weights(log_ratio_values: np.ndarray, nu: float) -> np.ndarray:
    """Inner-minimizing weights: 1/n_p on the k_keep smallest log-ratios.

    Ties are broken by ascending sample index (stable sort), so the
    result is deterministic. Raises if nu keeps no samples.
    """
    lr = np.asarray(log_ratio_values, dtype=float)
    if lr.ndim != 1 or lr.size < 1:
        raise ValueError("log_ratio_values must be a nonempty vector")
    n_p = lr.size
    k = keep_count(nu, n_p)
    order = np.argsort(lr, kind="stable")
    w = np.zeros(n_p)
    w[order[:k]] = 1.0 / n_p
    return w


def reg_value_and_subgradient(delta: np.ndarray, cfg: TrimConfig) -> tuple[float, np.ndarray]:
    """R(delta) and one element of its subdifferential (sign(0) = 0 for l1)."""
    delta = np.asarray(delta, dtype=float)
    if cfg.regularizer == "none":
        return 0.0, np.zeros_like(delta)
    if cfg.regularizer == "l1":
        return float(np.sum(np.abs(delta))), np.sign(delta)
    return float(np.sum(delta**2)), 2.0 * delta


def objective(
    delta: np.ndarray, w: np.ndarray, PhiP: np.ndarray, PhiQ: np.ndarray, cfg: TrimConfig
) -> float:
    """sum_i w_i * log rhat(x_p_i; delta) - lam * R(delta)."""
    delta = np.asarray(delta, dtype=float)
    w = np.asarray(w, dtype=float)
    logN, _ = _log_mean_exp_and_softmax(PhiQ @ delta)
    reg_val, _ = reg_value_and_subgradient(delta, cfg)
    return float(w @ (PhiP @ delta) - np.sum(w) * logN - cfg.lam * reg_val)


def gradient(delta: np.ndarray, w: np.ndarray, PhiP: np.ndarray, PhiQ: np.ndarray) -> np.ndarray:
    """d/d delta of the weighted log-ratio sum at fixed weights.

    Equals Phi_p^T w - nu * Phi_q^T softmax(PhiQ delta) with nu = sum(w);
    the regularizer term is not included.
    """
    delta = np.asarray(delta, dtype=float)
    w = np.asarray(w, dtype=float)
    _, sm = _log_mean_exp_and_softmax(PhiQ @ delta)
    return PhiP.T @ w - float(np.sum(w)) * (PhiQ.T @ sm)


def soft_threshold(v: np.ndarray, t: float) -> np.ndarray:
    """Componentwise sign(v) * max(|v| - t, 0)."""
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def project_l1_ball(v: np.ndarray, radius: float) -> np.ndarray:
    """Euclidean projection of v onto {u : sum |u_i| <= radius}."""
    if radius <= 0.0:
        raise ValueError("radius must be positive")
    a = np.abs(v)
    if a.sum() <= radius:
        return np.array(v, dtype=float)
    # Sort-based simplex projection of |v|.
    u = np.sort(a)[::-1]
    css = np.cumsum(u)
    rho = np.nonzero(u * np.arange(1, v.size + 1) > css - radius)[0][-1]
    theta = (css[rho] - radius) / (rho + 1.0)
    return np.sign(v) * np.maximum(a - theta, 0.0)


def fit_featurized(PhiP: np.ndarray, PhiQ: np.ndarray, cfg: TrimConfig) -> FitResult:
    """Run the ascent-and-trimming loop on already-featurized samples."""
    PhiP = np.asarray(PhiP, dtype=float)
    PhiQ = np.asarray(PhiQ, dtype=float)
    if PhiP.ndim != 2 or PhiQ.ndim != 2 or PhiP.shape[1] != PhiQ.shape[1]:
        raise ValueError("PhiP and PhiQ must be 2-D with matching feature dimension")
    n_p, m = PhiP.shape
    k = keep_count(cfg.nu, n_p)
    nu_eff = k / n_p

    delta = np.zeros(m)
    trace: list[tuple[int, float]] = []
    best_hist = np.empty(cfg.max_iter)
    best_obj = -np.inf
    delta_best = delta.copy()
    w_best = np.zeros(n_p)
    t_hat = np.nan
    converged = False
    iterations = 0

    for it in range(cfg.max_iter):
        logN, sm = _log_mean_exp_and_softmax(PhiQ @ delta)
        lr = PhiP @ delta - logN
        order = np.argsort(lr, kind="stable")
        kept = order[:k]
        w = np.zeros(n_p)
        w[kept] = 1.0 / n_p

        reg_val, reg_sub = reg_value_and_subgradient(delta, cfg)
        obj = float(np.sum(lr[kept]) / n_p - cfg.lam * reg_val)
        if not np.isfinite(obj):
            raise FitDivergedError(it, float(np.max(np.abs(delta))))

        trace.append((it, obj))
        if obj > best_obj:
            best_obj = obj
            delta_best = delta.copy()
            w_best = w
            t_hat = float(lr[order[k - 1]])
        best_hist[it] = best_obj
        iterations = it + 1
        if it >= 50 and best_hist[it] - best_hist[it - 50] < cfg.tol:
            converged = True
            break

        eta = cfg.eta0 / math.sqrt(it + 1.0)
        g = PhiP.T @ w - nu_eff * (PhiQ.T @ sm)
        if cfg.regularizer == "l1":
            delta = soft_threshold(delta + eta * g, eta * cfg.lam)
        elif cfg.regularizer == "l2sq":
            delta = delta + eta * (g - cfg.lam * reg_sub)
        else:
            delta = delta + eta * g
        if cfg.l1_ball_radius is not None:
            delta = project_l1_ball(delta, cfg.l1_ball_radius)

    return FitResult(
        delta_best=delta_best,
        w_best=w_best,
        objective_best=best_obj,
        t_hat=t_hat,
        trace=trace,
        iterations_run=iterations,
        converged=converged,
    )


def fit(Xp, Xq, feature_map: FeatureMap, cfg: TrimConfig) -> FitResult:
    """Fit the trimmed ratio estimator on raw samples."""
    Xp = as_sample_matrix(Xp, "Xp")
    Xq = as_sample_matrix(Xq, "Xq")
    if Xp.shape[1] != Xq.shape[1]:
        raise ValueError(f"Xp and Xq disagree on dimension: {Xp.shape[1]} vs {Xq.shape[1]}")
    return fit_featurized(featurize(Xp, feature_map), featurize(Xq, feature_map), cfg)


def fit_kliep(Xp, Xq, feature_map: FeatureMap, cfg: TrimConfig) -> FitResult:
    """Untrimmed baseline: the same fit with nu forced to 1."""
    return fit(Xp, Xq, feature_map, replace(cfg, nu=1.0))


@dataclass(frozen=True)
class KKTReport:
    """Optimality diagnostics for a fitted (delta, w) pair.

    Weight structure: entries with log-ratio below t_hat - ratio_tol must
    carry weight 1/n_p, entries above t_hat + ratio_tol must carry 0;
    entries inside the band may take any value in [0, 1/n_p]. Stationarity
    is the sup-norm distance of the data gradient from lam times the
    regularizer's subdifferential (minimal-norm element at zeros).
    """

    weight_ok: bool
    max_weight_violation: float
    first_bad_index: int | None
    stationarity: float
    stationarity_ok: bool
    ratio_tol: float
    stationarity_tol: float

    @property
    def passed(self) -> bool:
        return self.weight_ok and self.stationarity_ok


def kkt_check(
    result: FitResult,
    PhiP: np.ndarray,
    PhiQ: np.ndarray,
    cfg: TrimConfig,
    ratio_tol: float = 1e-2,
    stationarity_tol: float = 1e-2,
) -> KKTReport:
    """Check the saddle-point conditions at result.delta_best."""
    delta = result.delta_best
    w = np.asarray(result.w_best, dtype=float)
    n_p = PhiP.shape[0]
    logN, _ = _log_mean_exp_and_softmax(PhiQ @ delta)
    lr = PhiP @ delta - logN

    cap = 1.0 / n_p
    must_keep = lr < result.t_hat - ratio_tol
    must_drop = lr > result.t_hat + ratio_tol
    viol = np.zeros(n_p)
    viol[must_keep] = np.abs(w[must_keep] - cap)
    viol[must_drop] = np.abs(w[must_drop])
    in_band = ~(must_keep | must_drop)
    viol[in_band] = np.maximum(np.maximum(-w[in_band], w[in_band] - cap), 0.0)
    max_viol = float(np.max(viol)) if n_p else 0.0
    weight_ok = max_viol <= 1e-12
    first_bad = int(np.argmax(viol > 1e-12)) if not weight_ok else None

    g = gradient(delta, w, PhiP, PhiQ)
    if cfg.regularizer == "l1":
        per_coord = np.where(
            delta != 0.0,
            np.abs(g - cfg.lam * np.sign(delta)),
            np.maximum(np.abs(g) - cfg.lam, 0.0),
        )
        stationarity = float(np.max(per_coord))
    elif cfg.regularizer == "l2sq":
        stationarity = float(np.max(np.abs(g - cfg.lam * 2.0 * delta)))
    else:
        stationarity = float(np.max(np.abs(g)))

    return KKTReport(
        weight_ok=weight_ok,
        max_weight_violation=max_viol,
        first_bad_index=first_bad,
        stationarity=stationarity,
        stationarity_ok=stationarity <= stationarity_tol,
        ratio_tol=ratio_tol,
        stationarity_tol=stationarity_tol,
    )


def fit_result_to_dict(result: FitResult, cfg: TrimConfig) -> dict:
    """JSON-ready view of a FitResult with the config echoed."""
    return {
        "delta": [float(v) for v in result.delta_best],
        "kept_indices": [int(i) for i in result.kept_indices],
        "t_hat": float(result.t_hat),
        "objective_best": float(result.objective_best),
        "trace": [[int(it), float(obj)] for it, obj in result.trace],
        "iterations_run": int(result.iterations_run),
        "converged": bool(result.converged),
        "config": {
            "nu": cfg.nu,
            "lambda": cfg.lam,
            "regularizer": cfg.regularizer,
            "eta0": cfg.eta0,
            "max_iter": cfg.max_iter,
            "tol": cfg.tol,
            "seed": cfg.seed,
            "l1_ball_radius": cfg.l1_ball_radius,
        },
    }
