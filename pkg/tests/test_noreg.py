"""Tests for the no-covariates penalized Poisson model."""

from __future__ import annotations

import math

import numpy as np
import pytest

from rategrid.engine import Param, projected_gradient_armijo_feasible
from rategrid.noreg import (RegularizedProblem, average_rate_difference,
                            f_noreg, grad_noreg, project_noreg,
                            zero_penalty_optimum)


def _single_cell(N=10.0, M=20.0, d=1.0):
    return RegularizedProblem(N=np.array([[[N]]]), M=np.array([[[M]]]),
                              durations=[d], groups=[[0]], which_group=[0],
                              W=[0.0], w=np.zeros((1, 1)))


def _random_problem(seed=3, C=2, R=3, T=4, weighted=True):
    rng = np.random.default_rng(seed)
    N = rng.integers(5, 40, size=(C, R, T)).astype(float)
    M = rng.poisson(2.0 * N).astype(float)
    M[N == 0] = 0.0
    w = np.zeros((R, R))
    if weighted:
        w[0, 1] = w[1, 0] = 0.7
        w[1, 2] = w[2, 1] = 1.3
    return RegularizedProblem(
        N=N, M=M, durations=np.array([1.0, 0.5, 2.0, 1.0]),
        groups=[[0, 1], [2, 3]], which_group=[0, 0, 1, 1],
        W=np.array([0.4, 2.0]) if weighted else np.zeros(2), w=w)


# ------------------------------------------------------------------
# objective
# ------------------------------------------------------------------

def test_f_single_cell_value():
    p = _single_cell()
    lam = np.array([[[2.0]]])
    # 10*1*2 - 20*ln 2
    assert f_noreg(p, lam) == pytest.approx(6.137056388801094, abs=1e-12)
    assert f_noreg(p, lam) == pytest.approx(6.1371, abs=5e-5)


def test_f_zero_penalty_equals_sum_of_cell_minima():
    p = _random_problem(weighted=False)
    lam = p.M / (p.N * p.durations)
    total = f_noreg(p, lam)
    # per-cell 1-D oracle
    oracle = 0.0
    C, R, T = p.N.shape
    for c in range(C):
        for r in range(R):
            for t in range(T):
                lam_ct = p.M[c, r, t] / (p.N[c, r, t] * p.durations[t])
                oracle += (p.N[c, r, t] * p.durations[t] * lam_ct
                           - p.M[c, r, t] * math.log(lam_ct))
    assert total == pytest.approx(oracle, rel=1e-12)


def test_f_constant_lambda_kills_penalties():
    p = _random_problem(weighted=True)
    lam = np.full(p.shape, 1.7)
    bare = float(np.sum(p.N * p.durations * lam) - np.sum(p.M * np.log(lam)))
    assert f_noreg(p, lam) == pytest.approx(bare, rel=1e-14)


def test_f_rejects_nonpositive_lambda():
    p = _single_cell()
    with pytest.raises(ValueError, match="positive"):
        f_noreg(p, np.array([[[0.0]]]))
    with pytest.raises(ValueError, match="positive"):
        grad_noreg(p, np.array([[[-1.0]]]))


def test_f_penalties_increase_objective():
    p = _random_problem(weighted=True)
    p0 = _random_problem(weighted=False)
    rng = np.random.default_rng(0)
    lam = rng.uniform(0.5, 3.0, size=p.shape)
    assert f_noreg(p, lam) > f_noreg(p0, lam)


# ------------------------------------------------------------------
# gradient
# ------------------------------------------------------------------

def test_grad_zero_at_single_cell_optimum():
    p = _single_cell()
    g = grad_noreg(p, np.array([[[2.0]]]))
    assert g[0, 0, 0] == 0.0


def test_grad_constant_lambda_is_likelihood_only():
    p = _random_problem(weighted=True)
    lam = np.full(p.shape, 2.5)
    g = grad_noreg(p, lam)
    assert np.allclose(g, p.N * p.durations - p.M / lam, rtol=0, atol=1e-12)


def test_grad_matches_finite_differences():
    p = _random_problem(weighted=True)
    rng = np.random.default_rng(8)
    lam = rng.uniform(0.5, 3.0, size=p.shape)
    g = grad_noreg(p, lam)
    h = 1e-6
    for idx in np.ndindex(p.shape):
        up = lam.copy(); up[idx] += h
        dn = lam.copy(); dn[idx] -= h
        fd = (f_noreg(p, up) - f_noreg(p, dn)) / (2 * h)
        assert g[idx] == pytest.approx(fd, rel=1e-5, abs=1e-7)


# ------------------------------------------------------------------
# projection / rate difference
# ------------------------------------------------------------------

def test_project_clamps_to_box():
    param = Param(lower_lambda=1e-6, upper_lambda=1e3, eps=1e-7)
    assert project_noreg(param, np.array([-5.0]))[0] == 1e-6
    assert project_noreg(param, np.array([1e9]))[0] == 1e3
    feas = np.array([0.5, 2.0])
    assert np.array_equal(project_noreg(param, feas), feas)


def test_project_floor_uses_eps_when_larger():
    param = Param(lower_lambda=1e-6, upper_lambda=1e3, eps=1e-2)
    assert project_noreg(param, np.array([0.0]))[0] == 1e-2


def test_average_rate_difference():
    assert average_rate_difference(np.ones(4), np.ones(4)) == 0.0
    assert average_rate_difference(np.array([1.0, 1.0]),
                                   np.array([1.0, 3.0])) == 1.0
    rng = np.random.default_rng(4)
    a, b = rng.uniform(0, 5, 10), rng.uniform(0, 5, 10)
    assert average_rate_difference(a, b) == pytest.approx(
        float(np.mean(np.abs(a - b))), rel=1e-15)
    with pytest.raises(ValueError, match="shape"):
        average_rate_difference(np.ones(3), np.ones(4))


# ------------------------------------------------------------------
# problem validation
# ------------------------------------------------------------------

def _base_kwargs():
    return dict(N=np.ones((1, 2, 2)), M=np.ones((1, 2, 2)),
                durations=[1.0, 1.0], groups=[[0], [1]], which_group=[0, 1],
                W=[0.0, 0.0], w=np.zeros((2, 2)))


def test_validation_errors():
    kw = _base_kwargs()
    kw["N"] = np.zeros((1, 2, 2))  # M > 0 where N == 0
    with pytest.raises(ValueError, match="M must be zero"):
        RegularizedProblem(**kw)

    kw = _base_kwargs()
    kw["groups"] = [[0], [0]]
    with pytest.raises(ValueError, match="partition"):
        RegularizedProblem(**kw)

    kw = _base_kwargs()
    kw["which_group"] = [1, 0]
    with pytest.raises(ValueError, match="which_group"):
        RegularizedProblem(**kw)

    kw = _base_kwargs()
    w = np.zeros((2, 2)); w[0, 1] = 1.0
    kw["w"] = w
    with pytest.raises(ValueError, match="symmetric"):
        RegularizedProblem(**kw)

    kw = _base_kwargs()
    kw["w"] = np.eye(2)
    with pytest.raises(ValueError, match="diagonal"):
        RegularizedProblem(**kw)

    kw = _base_kwargs()
    w = np.zeros((2, 2)); w[0, 1] = w[1, 0] = 1.0
    kw["w"] = w
    kw["neighbors"] = [[], []]
    with pytest.raises(ValueError, match="not a neighbor"):
        RegularizedProblem(**kw)

    kw = _base_kwargs()
    kw["durations"] = [1.0, -1.0]
    with pytest.raises(ValueError, match="durations"):
        RegularizedProblem(**kw)

    kw = _base_kwargs()
    kw["W"] = [-1.0, 0.0]
    with pytest.raises(ValueError, match="non-negative"):
        RegularizedProblem(**kw)


def test_with_common_weight():
    kw = _base_kwargs()
    w = np.zeros((2, 2)); w[0, 1] = w[1, 0] = 0.5
    kw["w"] = w
    p = RegularizedProblem(**kw)
    q = p.with_common_weight(4.0)
    assert np.all(q.W == 4.0)
    assert q.w[0, 1] == q.w[1, 0] == 4.0 and q.w[0, 0] == 0.0
    # neighbor lists override the sparsity pattern of w
    kw["w"] = np.zeros((2, 2))
    kw["neighbors"] = [[1], [0]]
    p2 = RegularizedProblem(**kw)
    q2 = p2.with_common_weight(2.0)
    assert q2.w[0, 1] == 2.0


def test_scale_by_distance_halves_weight():
    kw = _base_kwargs()
    w = np.zeros((2, 2)); w[0, 1] = w[1, 0] = 1.0
    kw["w"] = w
    lam = np.array([[[1.0, 1.0], [3.0, 3.0]]])
    dist1 = np.array([[0.0, 1.0], [1.0, 0.0]])
    dist2 = np.array([[0.0, 2.0], [2.0, 0.0]])
    p1 = RegularizedProblem(**kw, dist=dist1, scale_by_distance=True)
    p2 = RegularizedProblem(**kw, dist=dist2, scale_by_distance=True)
    pen1 = f_noreg(p1, lam) - f_noreg(RegularizedProblem(**_base_kwargs()), lam)
    pen2 = f_noreg(p2, lam) - f_noreg(RegularizedProblem(**_base_kwargs()), lam)
    assert pen1 == pytest.approx(2 * pen2, rel=1e-12)
    assert pen1 > 0


# ------------------------------------------------------------------
# solver-level behavior
# ------------------------------------------------------------------

def test_zero_penalty_solution_matches_closed_form():
    p = _random_problem(weighted=False)
    param = Param(accuracy=1e-10, max_iter=2000, upper_lambda=1e6)
    fit = projected_gradient_armijo_feasible(p.model(param), param,
                                             np.ones(p.shape))
    closed = zero_penalty_optimum(p, param)
    assert np.abs(fit.x - closed).max() <= 1e-6


def test_smoothing_weight_monotonically_shrinks_group_spread():
    base = _random_problem(weighted=False)
    param = Param(accuracy=1e-10, max_iter=2000, upper_lambda=1e6)
    adj = np.zeros((3, 3))
    adj[0, 1] = adj[1, 0] = adj[1, 2] = adj[2, 1] = 1.0
    spreads = []
    for wgt in [0.0, 1.0, 1e2, 1e4, 1e6]:
        p = RegularizedProblem(N=base.N, M=base.M, durations=base.durations,
                               groups=base.groups, which_group=base.which_group,
                               W=np.full(2, wgt), w=wgt * adj)
        fit = projected_gradient_armijo_feasible(p.model(param), param,
                                                 np.ones(p.shape))
        spreads.append(max(float(np.ptp(fit.x[:, :, g], axis=2).max())
                           for g in base.groups))
    assert all(spreads[i + 1] <= spreads[i] for i in range(len(spreads) - 1))
    assert spreads[-1] < 1e-4


def test_convexity_witness():
    p = _random_problem(weighted=True)
    rng = np.random.default_rng(17)
    for _ in range(100):
        x = rng.uniform(0.1, 5.0, size=p.shape)
        y = rng.uniform(0.1, 5.0, size=p.shape)
        mid = 0.5 * (x + y)
        assert f_noreg(p, mid) <= 0.5 * f_noreg(p, x) + 0.5 * f_noreg(p, y) + 1e-9


def test_lower_bound_below_optimum():
    # single cell: optimum value is known in closed form
    p = _single_cell()
    param = Param(upper_lambda=1e3)
    model = p.model(param)
    f_star = f_noreg(p, np.array([[[2.0]]]))
    rng = np.random.default_rng(5)
    for _ in range(50):
        lam = rng.uniform(0.1, 10.0, size=(1, 1, 1))
        lb = model.get_lower_bound(lam, grad_noreg(p, lam))
        assert lb <= f_star + 1e-9


def test_zero_penalty_optimum_clamps():
    p = _single_cell(N=10.0, M=0.0)
    param = Param(lower_lambda=1e-4, upper_lambda=1e3)
    assert zero_penalty_optimum(p, param)[0, 0, 0] == 1e-4
