"""Penalized Poisson intensity model without covariates.

Estimates lambda[c, i, t] (arrivals per hour, by type c, zone i, period t)
by minimizing

    f(lambda) = sum_{c,i,t} [ N[c,i,t] * d_t * lambda - M[c,i,t] * ln lambda ]
              + sum_{c,t} sum_{neighbor pairs {i,j}} w[i,j] * (lambda_i - lambda_j)^2
              + sum_{c,i} sum_G W_G * sum_{pairs {t,t'} in G} (lambda_t - lambda_t')^2

over the box [max(lower_lambda, eps), upper_lambda].  N counts observations
(e.g. how many Mondays were watched), M the arrivals seen in them, d_t the
period length in hours.  A constant offset (sum ln M!) is dropped; it does
not move minimizers.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .engine import Param


@dataclass
class RegularizedProblem:
    """Data and penalty structure for the no-covariates model.

    Shapes: N, M are (C, R, T); durations has length T (positive hours);
    groups partitions {0..T-1} with which_group its inverse; w is the RxR
    symmetric neighbor-weight matrix (zero diagonal, zero for non-neighbors);
    dist holds centroid distances (stored for output, not used by the
    objective unless scale_by_distance is set); type_region is carried
    through but unused by the objective.
    """

    N: np.ndarray
    M: np.ndarray
    durations: np.ndarray
    groups: list
    which_group: list
    W: np.ndarray                 # per-group time-smoothing weights, >= 0
    w: np.ndarray                 # RxR spatial weights
    dist: np.ndarray | None = None
    type_region: list | None = None
    neighbors: list | None = None
    scale_by_distance: bool = False
    _pairs: list = field(init=False, repr=False)

    def __post_init__(self):
        self.N = np.asarray(self.N, dtype=float)
        self.M = np.asarray(self.M, dtype=float)
        self.durations = np.asarray(self.durations, dtype=float)
        self.W = np.asarray(self.W, dtype=float)
        self.w = np.asarray(self.w, dtype=float)
        C, R, T = self.N.shape
        if self.M.shape != (C, R, T):
            raise ValueError("N and M must have identical shapes")
        if self.durations.shape != (T,) or np.any(self.durations <= 0):
            raise ValueError("durations must be length-T positive hours")
        if np.any(self.N < 0) or np.any(self.M < 0):
            raise ValueError("N and M must be non-negative")
        if np.any(self.M[self.N == 0] != 0):
            raise ValueError("M must be zero wherever N is zero")
        seen = sorted(t for g in self.groups for t in g)
        if seen != list(range(T)):
            raise ValueError("groups must partition the time indices 0..T-1")
        if len(self.which_group) != T or any(
                t not in self.groups[self.which_group[t]] for t in range(T)):
            raise ValueError("which_group is inconsistent with groups")
        if self.W.shape != (len(self.groups),) or np.any(self.W < 0):
            raise ValueError("W must hold one non-negative weight per group")
        if self.w.shape != (R, R):
            raise ValueError(f"w must be {R}x{R}")
        if np.any(self.w < 0):
            raise ValueError("neighbor weights must be non-negative")
        if not np.array_equal(self.w, self.w.T):
            raise ValueError("neighbor weight matrix must be symmetric")
        if np.any(np.diag(self.w) != 0):
            raise ValueError("neighbor weight matrix must have a zero diagonal")
        if self.neighbors is not None:
            for i in range(R):
                for j in range(R):
                    if self.w[i, j] > 0 and j not in self.neighbors[i]:
                        raise ValueError(
                            f"w[{i},{j}] > 0 but {j} is not a neighbor of {i}")
        pairs = []
        for i in range(R):
            for j in range(i + 1, R):
                if self.w[i, j] > 0:
                    wij = self.w[i, j]
                    if self.scale_by_distance:
                        if self.dist is None or self.dist[i, j] <= 0:
                            raise ValueError(
                                "scale_by_distance needs positive distances")
                        wij = wij / self.dist[i, j]
                    pairs.append((i, j, wij))
        self._pairs = pairs

    @property
    def shape(self):
        return self.N.shape

    def with_common_weight(self, weight: float, N=None, M=None) -> "RegularizedProblem":
        """Copy with W_G = w_{i,j} = weight on every neighbor pair, data optional.

        The neighbor pattern comes from the adjacency lists when present,
        falling back to the sparsity pattern of w.
        """
        R = self.w.shape[0]
        adj = np.zeros((R, R))
        if self.neighbors is not None:
            for i, nbrs in enumerate(self.neighbors):
                for j in nbrs:
                    adj[i, j] = adj[j, i] = 1.0
        else:
            adj = (self.w > 0).astype(float)
        return replace(self,
                       N=self.N if N is None else N,
                       M=self.M if M is None else M,
                       W=np.full(len(self.groups), float(weight)),
                       w=float(weight) * adj)

    def model(self, param: Param) -> "NoRegModel":
        return NoRegModel(self, param)


# ============================================================
# objective / gradient / projection
# ============================================================

def f_noreg(p: RegularizedProblem, lam) -> float:
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise ValueError("intensities must be positive")
    d = p.durations
    val = float(np.sum(p.N * d * lam) - np.sum(p.M * np.log(lam)))
    for i, j, wij in p._pairs:
        diff = lam[:, i, :] - lam[:, j, :]
        val += wij * float(np.sum(diff * diff))
    for gi, g in enumerate(p.groups):
        Wg = p.W[gi]
        if Wg == 0 or len(g) < 2:
            continue
        block = lam[:, :, g]
        s = block.sum(axis=2)
        # sum over unordered pairs {t,t'}: |G| * sum(x^2) - (sum x)^2
        val += Wg * float(np.sum(len(g) * np.sum(block * block, axis=2) - s * s))
    return val


def grad_noreg(p: RegularizedProblem, lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise ValueError("intensities must be positive")
    g = p.N * p.durations - p.M / lam
    for i, j, wij in p._pairs:
        diff = lam[:, i, :] - lam[:, j, :]
        g[:, i, :] += 2.0 * wij * diff
        g[:, j, :] -= 2.0 * wij * diff
    for gi, grp in enumerate(p.groups):
        Wg = p.W[gi]
        if Wg == 0 or len(grp) < 2:
            continue
        block = lam[:, :, grp]
        s = block.sum(axis=2, keepdims=True)
        g[:, :, grp] += 2.0 * Wg * (len(grp) * block - s)
    return g


def project_noreg(param: Param, lam_raw) -> np.ndarray:
    """Clamp to the box [max(lower_lambda, eps), upper_lambda]."""
    floor = max(param.lower_lambda, param.eps)
    return np.clip(np.asarray(lam_raw, dtype=float), floor, param.upper_lambda)


def average_rate_difference(lam1, lam2) -> float:
    lam1 = np.asarray(lam1, dtype=float)
    lam2 = np.asarray(lam2, dtype=float)
    if lam1.shape != lam2.shape:
        raise ValueError("intensity arrays must have identical shapes")
    return float(np.mean(np.abs(lam1 - lam2)))


# ============================================================
# solver adapter
# ============================================================

@dataclass
class NoRegModel:
    """Capability set the projected-gradient solver drives."""

    problem: RegularizedProblem
    param: Param

    @property
    def _floor(self) -> float:
        return max(self.param.lower_lambda, self.param.eps)

    def f(self, x) -> float:
        return f_noreg(self.problem, x)

    def gradient(self, x) -> np.ndarray:
        return grad_noreg(self.problem, x)

    def projection(self, x) -> np.ndarray:
        return project_noreg(self.param, x)

    def is_feasible(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(np.isfinite(x)) and np.all(x >= self._floor)
                    and np.all(x <= self.param.upper_lambda))

    def get_rhs(self, grad, direction) -> float:
        return float(np.sum(grad * direction))

    def get_lower_bound(self, x, grad) -> float:
        """f(x) + min over the box of grad . (y - x), in closed form."""
        x = np.asarray(x, dtype=float)
        grad = np.asarray(grad, dtype=float)
        y = np.where(grad > 0, self._floor, self.param.upper_lambda)
        return f_noreg(self.problem, x) + float(np.sum(grad * (y - x)))

    def average_rate_difference(self, x1, x2) -> float:
        return average_rate_difference(x1, x2)


def zero_penalty_optimum(p: RegularizedProblem, param: Param) -> np.ndarray:
    """Cellwise minimizer M/(N*d) with W = w = 0, clamped to the box."""
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = np.where(p.N > 0, p.M / (p.N * p.durations), 0.0)
    return project_noreg(param, lam)
