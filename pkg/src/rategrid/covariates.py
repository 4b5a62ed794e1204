"""Poisson intensity model driven by regional covariates.

Intensities are linear in per-region regressors:

    lambda[c, d, t, i] = sum_j beta[c, d, t, j] * x[j, i]

and the coefficients beta >= 0 are fitted by minimizing the Poisson negative
log-likelihood over the feasible set {beta >= 0, lambda >= eps per region}.
The projection onto that set decomposes into independent (c, d, t) blocks,
each a small least-distance quadratic program solved by an internal
active-set method, so no external QP solver is needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import Param


@dataclass
class CovariatesProblem:
    """Data for the covariates model.

    N, M are (C, D, T, R) observation/arrival counts (D counts weekday plus
    holiday classes); x is the (J, R) non-negative regressor table;
    durations holds the T period lengths in hours.
    """

    N: np.ndarray
    M: np.ndarray
    x: np.ndarray
    durations: np.ndarray

    def __post_init__(self):
        self.N = np.asarray(self.N, dtype=float)
        self.M = np.asarray(self.M, dtype=float)
        self.x = np.asarray(self.x, dtype=float)
        self.durations = np.asarray(self.durations, dtype=float)
        if self.N.ndim != 4 or self.M.shape != self.N.shape:
            raise ValueError("N and M must be identical (C, D, T, R) arrays")
        C, D, T, R = self.N.shape
        if self.x.ndim != 2 or self.x.shape[1] != R:
            raise ValueError(f"x must be (J, {R})")
        if np.any(self.x < 0):
            raise ValueError("regressor values must be non-negative")
        if np.any(self.x.sum(axis=0) == 0):
            bad = int(np.argmin(self.x.sum(axis=0)))
            raise ValueError(f"region {bad} has all-zero regressors")
        if self.durations.shape != (T,) or np.any(self.durations <= 0):
            raise ValueError("durations must be length-T positive hours")
        if np.any(self.N < 0) or np.any(self.M < 0):
            raise ValueError("N and M must be non-negative")
        if np.any(self.M[self.N == 0] != 0):
            raise ValueError("M must be zero wherever N is zero")

    @property
    def dims(self):
        C, D, T, R = self.N.shape
        return C, D, T, R, self.x.shape[0]

    def model(self, param: Param) -> "CovModel":
        return CovModel(self, param)


def lambda_of_beta(p: CovariatesProblem, beta) -> np.ndarray:
    """Intensity array (C, D, T, R) for the given coefficients."""
    beta = np.asarray(beta, dtype=float)
    return np.einsum("cdtj,ji->cdti", beta, p.x)


def f_cov(p: CovariatesProblem, beta) -> float:
    lam = lambda_of_beta(p, beta)
    if np.any(lam <= 0):
        raise ValueError("non-positive intensity encountered (infeasible beta)")
    d = p.durations.reshape(1, 1, -1, 1)
    return float(np.sum(p.N * d * lam) - np.sum(p.M * np.log(lam)))


def grad_cov(p: CovariatesProblem, beta) -> np.ndarray:
    lam = lambda_of_beta(p, beta)
    if np.any(lam <= 0):
        raise ValueError("non-positive intensity encountered (infeasible beta)")
    d = p.durations.reshape(1, 1, -1, 1)
    inner = p.N * d - p.M / lam
    return np.einsum("ji,cdti->cdtj", p.x, inner)


# ============================================================
# projection
# ============================================================

def _project_block(y: np.ndarray, x: np.ndarray, eps: float,
                   max_pivots: int | None = None) -> np.ndarray:
    """min ||b - y||^2 s.t. b >= 0 and x[:, i] . b >= eps for every region.

    Primal active-set method for the least-distance QP (identity Hessian):
    from a feasible start, repeatedly minimize on the current working set of
    tight constraints, walking to the nearest blocking halfspace and
    dropping constraints whose multiplier goes negative.  Exact up to
    linear-algebra roundoff, so the KKT residual is far below any
    feasibility tolerance.  (A dual coordinate-ascent sweep was tried first
    historically but falls into floating-point limit cycles when nearly
    parallel constraints are active far from y.)
    """
    J, R = x.shape
    A = np.vstack([np.eye(J), x.T])              # (J+R, J): rows a_k
    c = np.concatenate([np.zeros(J), np.full(R, eps)])
    if max_pivots is None:
        max_pivots = 50 * (J + R) + 100

    # Feasible start: clip to the orthant, then push along the all-ones
    # direction (every constraint row has positive mass on it).
    b = np.clip(y.astype(float), 0.0, None)
    gaps = c - A @ b
    if np.any(gaps > 0):
        rates = A @ np.ones(J)
        tau = float(np.max(gaps / rates))
        b = b + tau
    scale = max(1.0, float(np.linalg.norm(y)), float(np.linalg.norm(b)))
    work: list = []                              # indices of active rows

    for _ in range(max_pivots):
        g = b - y
        if work:
            Aw = A[work]
            mu, *_ = np.linalg.lstsq(Aw @ Aw.T, Aw @ g, rcond=None)
            p = -g + Aw.T @ mu
        else:
            p = -g
        if float(np.linalg.norm(p)) <= 1e-13 * scale:
            if not work:
                return b
            u, *_ = np.linalg.lstsq(A[work].T, g, rcond=None)
            k_min = int(np.argmin(u))
            if u[k_min] >= -1e-11 * scale:
                return b
            work.pop(k_min)
            continue
        # largest step along p before leaving some inactive halfspace
        alpha = 1.0
        blocker = -1
        rates = A @ p
        vals = A @ b
        for k in range(J + R):
            if k in work or rates[k] >= -1e-15 * scale:
                continue
            t_k = (c[k] - vals[k]) / rates[k]
            if t_k < alpha:
                alpha = max(t_k, 0.0)
                blocker = k
        b = b + alpha * p
        if blocker >= 0:
            work.append(blocker)
    raise RuntimeError("projection did not converge")


def project_cov(p: CovariatesProblem, param: Param, y) -> np.ndarray:
    """Project onto {beta >= 0, lambda >= eps}, block by (c, d, t) block."""
    y = np.asarray(y, dtype=float)
    C, D, T, R, J = p.dims
    if y.shape != (C, D, T, J):
        raise ValueError(f"expected shape {(C, D, T, J)}, got {y.shape}")
    out = np.empty_like(y)
    for c in range(C):
        for d in range(D):
            for t in range(T):
                out[c, d, t] = _project_block(y[c, d, t], p.x, param.eps)
    return out


def is_feasible_cov(p: CovariatesProblem, param: Param, beta) -> bool:
    """beta >= 0 and lambda >= eps, with slack eps/2 absorbing projection error."""
    beta = np.asarray(beta, dtype=float)
    slack = param.eps / 2.0
    if not np.all(np.isfinite(beta)) or np.any(beta < -slack):
        return False
    lam = lambda_of_beta(p, beta)
    return bool(np.all(lam >= param.eps - slack))


# ============================================================
# solver adapter
# ============================================================

@dataclass
class CovModel:
    """Capability set the projected-gradient solver drives."""

    problem: CovariatesProblem
    param: Param

    def f(self, x) -> float:
        return f_cov(self.problem, x)

    def gradient(self, x) -> np.ndarray:
        return grad_cov(self.problem, x)

    def projection(self, x) -> np.ndarray:
        return project_cov(self.problem, self.param, x)

    def is_feasible(self, x) -> bool:
        return is_feasible_cov(self.problem, self.param, x)

    def get_rhs(self, grad, direction) -> float:
        return float(np.sum(grad * direction))

    def get_lower_bound(self, x, grad) -> float:
        """Relaxed bound: min of the linearization over {y >= 0} only.

        Unbounded (a large negative sentinel) whenever some gradient entry
        is negative; with a non-negative gradient the minimum sits at y = 0.
        """
        grad = np.asarray(grad, dtype=float)
        if np.any(grad < 0):
            return -1e300
        return f_cov(self.problem, x) - float(np.sum(grad * np.asarray(x)))

    def average_rate_difference(self, x1, x2) -> float:
        lam1 = lambda_of_beta(self.problem, x1)
        lam2 = lambda_of_beta(self.problem, x2)
        return float(np.mean(np.abs(lam1 - lam2)))
