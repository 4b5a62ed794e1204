"""Model-agnostic first-order solver and cross-validation driver.

Projected gradient with Armijo line search along the feasible direction
d_k = projection(x_k - beta_bar * grad_k) - x_k, stopping on the duality-style
gap f(x) - lower_bound(x) or on the iteration cap.  Models plug in through a
small capability set: f, gradient, projection, is_feasible, get_rhs,
get_lower_bound, average_rate_difference.

Everything here is deterministic: identical inputs give bit-identical
outputs, including the cross-validation splits.
"""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass, field

import numpy as np

# Step sizes shrink as (1/2)^m; give up on a step after this many halvings.
MAX_HALVINGS = 64


@dataclass(frozen=True)
class Param:
    """Solver and model parameters shared across the calibration paths."""

    eps: float = 1e-5          # feasibility floor for intensities
    sigma: float = 0.5         # Armijo slope fraction, in (0, 1)
    accuracy: float = 1e-3     # stopping gap
    max_iter: int = 30
    lower_lambda: float = 1e-6
    upper_lambda: float = 1e30
    beta_bar: float = 1.0      # initial projected-gradient step
    cv_proportion: float = 0.2

    def __post_init__(self):
        if not 0.0 < self.sigma < 1.0:
            raise ValueError("sigma must lie in (0, 1)")
        if self.lower_lambda > self.upper_lambda:
            raise ValueError("lower_lambda must not exceed upper_lambda")
        if self.eps <= 0.0:
            raise ValueError("eps must be positive")
        if self.beta_bar <= 0.0:
            raise ValueError("beta_bar must be positive")
        if self.max_iter < 0:
            raise ValueError("max_iter must be non-negative")
        if self.accuracy < 0.0:
            raise ValueError("accuracy must be non-negative")
        if not 0.0 < self.cv_proportion <= 1.0:
            raise ValueError("cv_proportion must lie in (0, 1]")


@dataclass
class IterRecord:
    """One accepted (or terminal) iteration of the projected-gradient loop."""

    k: int
    f: float
    rhs: float          # directional derivative along d_k (nan when absent)
    theta: float        # accepted step length (nan when no step taken)
    f_next: float       # objective after the step (nan when no step taken)
    feasible: bool


@dataclass
class SolveResult:
    x: np.ndarray
    f: float
    iterations: int
    gap: float
    stop_reason: str    # 'gap' | 'max_iter' | 'no_descent' | 'line_search'
    trace: list = field(default_factory=list)


def _check_finite(value, what: str):
    if isinstance(value, np.ndarray):
        if not np.all(np.isfinite(value)):
            raise ValueError(f"non-finite {what} encountered")
    elif not math.isfinite(value):
        raise ValueError(f"non-finite {what} encountered")


def projected_gradient_armijo_feasible(model, param: Param, x0,
                                       record_trace: bool = False) -> SolveResult:
    """Minimize model.f over its feasible set from (the projection of) x0.

    Per iteration: walk along d = projection(x - beta_bar*grad) - x with the
    largest step (1/2)^m, m >= 0, passing the Armijo test
    f(x + theta*d) <= f(x) + sigma*theta*get_rhs(grad, d).  Stops when
    f(x) - get_lower_bound(x, grad) <= accuracy, at max_iter, when no descent
    direction exists (rhs >= 0), or when the line search exhausts its
    halvings.  Returns the best (lowest-f) feasible iterate seen.
    """
    x = model.projection(np.asarray(x0, dtype=float))
    fx = float(model.f(x))
    _check_finite(fx, "objective")
    best_x, best_f = x, fx
    trace: list = []
    gap = math.inf
    if param.max_iter == 0:
        return SolveResult(best_x, best_f, 0, gap, "max_iter", trace)

    stop_reason = "max_iter"
    k = 0
    while k < param.max_iter:
        grad = model.gradient(x)
        _check_finite(grad, "gradient")
        gap = fx - float(model.get_lower_bound(x, grad))
        if gap <= param.accuracy:
            stop_reason = "gap"
            if record_trace:
                trace.append(IterRecord(k, fx, math.nan, math.nan, math.nan,
                                        bool(model.is_feasible(x))))
            break
        z = model.projection(x - param.beta_bar * grad)
        d = z - x
        rhs = float(model.get_rhs(grad, d))
        if rhs >= 0.0:
            stop_reason = "no_descent"
            if record_trace:
                trace.append(IterRecord(k, fx, rhs, math.nan, math.nan,
                                        bool(model.is_feasible(x))))
            break
        theta = 1.0
        accepted = False
        for _ in range(MAX_HALVINGS + 1):
            x_next = x + theta * d
            f_next = float(model.f(x_next))
            _check_finite(f_next, "objective")
            if f_next <= fx + param.sigma * theta * rhs:
                accepted = True
                break
            theta *= 0.5
        if not accepted:
            stop_reason = "line_search"
            if record_trace:
                trace.append(IterRecord(k, fx, rhs, math.nan, math.nan,
                                        bool(model.is_feasible(x))))
            break
        if record_trace:
            trace.append(IterRecord(k, fx, rhs, theta, f_next,
                                    bool(model.is_feasible(x_next))))
        x, fx = x_next, f_next
        if fx < best_f:
            best_x, best_f = x, fx
        k += 1
    return SolveResult(best_x, best_f, k, gap, stop_reason, trace)


# ============================================================
# Cross-validation
# ============================================================

@dataclass
class CrossValidationResult:
    cpu_time: float
    best_weight: float
    lam: np.ndarray              # calibrated intensities under best_weight
    mean_losses: list = field(default_factory=list)  # one per candidate


def _fold_of_positions(n: int, K: int, perm=None):
    """fold id per observation position: deterministic round-robin."""
    if perm is None:
        return [p % K for p in range(n)]
    return [perm[p] % K for p in range(n)]


def cross_validation(param: Param, problem, sample, cv_weights,
                     shuffle_seed: int | None = None) -> CrossValidationResult:
    """Pick the smoothing weight by K-fold likelihood cross-validation.

    ``sample[c][r][t]`` is the per-observation count list of a cell (equal
    lengths across (c, r) for a fixed t).  K = max(1, floor(1/cv_proportion))
    folds are assigned round-robin by observation position (optionally by a
    seeded shuffle of positions); for each candidate weight, each fold's
    block is fitted with the common weight and scored by the unpenalized
    Poisson negative log-likelihood of the held-out observations.  The
    weight with the lowest mean validation loss wins, ties going to the
    smaller weight; the result carries a full-data fit under that weight.
    """
    t_start = time.process_time()
    cv_weights = list(cv_weights)
    if not cv_weights:
        raise ValueError("cv_weights must be nonempty")
    if any(w < 0 for w in cv_weights):
        raise ValueError("cv_weights must be non-negative")
    C, R, T = problem.N.shape
    n_per_t = [None] * T
    total = 0
    for c in range(C):
        for r in range(R):
            for t in range(T):
                lst = sample[c][r][t]
                total += len(lst)
                if n_per_t[t] is None:
                    n_per_t[t] = len(lst)
                elif n_per_t[t] != len(lst):
                    raise ValueError(
                        f"uneven observation counts at time index {t}")
    if total == 0:
        raise ValueError("empty sample: no observations to cross-validate")

    K = max(1, math.floor(1.0 / param.cv_proportion))
    perms = None
    if shuffle_seed is not None:
        rng = random.Random(shuffle_seed)
        perms = [rng.sample(range(n), n) if n else [] for n in n_per_t]
    folds = [_fold_of_positions(n_per_t[t], K,
                                None if perms is None else perms[t])
             for t in range(T)]

    # Per-fold N/M for the estimation block and its complement.
    est = []
    for b in range(K):
        N_fit = np.zeros((C, R, T))
        M_fit = np.zeros((C, R, T))
        N_val = np.zeros((C, R, T))
        M_val = np.zeros((C, R, T))
        for t in range(T):
            fold_t = folds[t]
            for c in range(C):
                for r in range(R):
                    lst = sample[c][r][t]
                    for p, count in enumerate(lst):
                        if fold_t[p] == b:
                            N_fit[c, r, t] += 1
                            M_fit[c, r, t] += count
                        else:
                            N_val[c, r, t] += 1
                            M_val[c, r, t] += count
        est.append((N_fit, M_fit, N_val, M_val))

    d = np.asarray(problem.durations, dtype=float)
    x0 = np.ones((C, R, T))
    mean_losses = []
    best_w = None
    best_loss = math.inf
    for w in cv_weights:
        losses = []
        for N_fit, M_fit, N_val, M_val in est:
            sub = problem.with_common_weight(w, N=N_fit, M=M_fit)
            fit = projected_gradient_armijo_feasible(sub.model(param), param, x0)
            lam = fit.x
            loss = float(np.sum(N_val * d * lam) - np.sum(M_val * np.log(lam)))
            losses.append(loss)
        mean_loss = float(np.mean(losses))
        mean_losses.append(mean_loss)
        if mean_loss < best_loss or (mean_loss == best_loss
                                     and best_w is not None and w < best_w):
            best_loss = mean_loss
            best_w = w

    final = problem.with_common_weight(best_w)
    fit = projected_gradient_armijo_feasible(final.model(param), param, x0)
    return CrossValidationResult(time.process_time() - t_start, best_w,
                                 fit.x, mean_losses)
