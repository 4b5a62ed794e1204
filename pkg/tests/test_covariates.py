"""Tests for the covariates model and its internal QP projection."""

from __future__ import annotations

import numpy as np
import pytest

from rategrid.covariates import (CovariatesProblem, f_cov, grad_cov,
                                 is_feasible_cov, lambda_of_beta, project_cov)
from rategrid.engine import Param, projected_gradient_armijo_feasible


# ------------------------------------------------------------------
# exact projection oracle: enumerate every candidate active set
# ------------------------------------------------------------------

def exact_projection(y, x, eps, tol=1e-12):
    """Reference solution of min ||b-y||^2, b >= 0, x[:,i].b >= eps.

    Tries every subset of at most J constraints as the active set, solves
    the KKT equalities, and keeps the closest primal-dual feasible point.
    Exponential, so only for J + R <= ~12.
    """
    J, R = x.shape
    A = np.vstack([np.eye(J), x.T])
    c = np.concatenate([np.zeros(J), np.full(R, eps)])
    best, best_d = None, np.inf
    for bits in range(1 << (J + R)):
        act = [k for k in range(J + R) if bits >> k & 1]
        if len(act) > J:
            continue
        Aa, ca = A[act], c[act]
        if act:
            try:
                u = np.linalg.solve(Aa @ Aa.T, ca - Aa @ y)
            except np.linalg.LinAlgError:
                continue
            if np.any(u < -tol):
                continue
            b = y + Aa.T @ u
        else:
            b = y.copy()
        if np.any(A @ b < c - 1e-9):
            continue
        d = np.linalg.norm(b - y)
        if d < best_d:
            best_d, best = d, b
    return best


def _project1(x, eps, y, **param_kw):
    """Project a single (c,d,t) block through the public API."""
    J, R = x.shape
    p = CovariatesProblem(N=np.ones((1, 1, 1, R)), M=np.ones((1, 1, 1, R)),
                          x=x, durations=[1.0])
    param = Param(eps=eps, **param_kw)
    return project_cov(p, param, np.asarray(y, float).reshape(1, 1, 1, J)).ravel()


# ------------------------------------------------------------------
# lambda / objective / gradient
# ------------------------------------------------------------------

def _unit_problem(N=10.0, M=20.0, x_val=1.0, d=1.0):
    return CovariatesProblem(N=np.array([[[[N]]]]), M=np.array([[[[M]]]]),
                             x=np.array([[x_val]]), durations=[d])


def test_lambda_of_beta():
    p = _unit_problem(x_val=2.0)
    assert lambda_of_beta(p, np.zeros((1, 1, 1, 1)))[0, 0, 0, 0] == 0.0
    assert lambda_of_beta(p, np.full((1, 1, 1, 1), 3.0))[0, 0, 0, 0] == 6.0


def test_lambda_matches_dot_product_oracle():
    rng = np.random.default_rng(2)
    C, D, T, R, J = 2, 3, 2, 4, 3
    x = rng.uniform(0, 2, size=(J, R)) + 0.05
    p = CovariatesProblem(N=np.ones((C, D, T, R)), M=np.ones((C, D, T, R)),
                          x=x, durations=np.ones(T))
    beta = rng.uniform(0, 2, size=(C, D, T, J))
    lam = lambda_of_beta(p, beta)
    for c in range(C):
        for d in range(D):
            for t in range(T):
                for i in range(R):
                    assert lam[c, d, t, i] == pytest.approx(
                        float(np.dot(beta[c, d, t], x[:, i])), rel=1e-14)


def test_f_cov_single_cell_value():
    p = _unit_problem()
    beta = np.full((1, 1, 1, 1), 2.0)
    assert f_cov(p, beta) == pytest.approx(6.137056388801094, abs=1e-12)


def test_f_cov_scale_invariance():
    rng = np.random.default_rng(3)
    C, D, T, R, J = 1, 2, 2, 3, 2
    x = rng.uniform(0.5, 2.0, size=(J, R))
    N = np.full((C, D, T, R), 4.0)
    M = np.full((C, D, T, R), 6.0)
    beta = rng.uniform(0.5, 1.5, size=(C, D, T, J))
    p1 = CovariatesProblem(N=N, M=M, x=x, durations=np.ones(T))
    p2 = CovariatesProblem(N=N, M=M, x=2.0 * x, durations=np.ones(T))
    assert f_cov(p1, beta) == f_cov(p2, beta / 2.0)


def test_f_cov_rejects_zero_intensity():
    p = _unit_problem()
    with pytest.raises(ValueError, match="intensity"):
        f_cov(p, np.zeros((1, 1, 1, 1)))


def test_grad_cov_stationary_point():
    p = _unit_problem()
    g = grad_cov(p, np.full((1, 1, 1, 1), 2.0))
    assert g[0, 0, 0, 0] == 0.0


def test_grad_cov_positive_when_no_arrivals():
    rng = np.random.default_rng(4)
    C, D, T, R, J = 1, 1, 2, 3, 2
    x = rng.uniform(0.1, 2.0, size=(J, R))
    p = CovariatesProblem(N=np.full((C, D, T, R), 5.0),
                          M=np.zeros((C, D, T, R)),
                          x=x, durations=[1.0, 2.0])
    beta = rng.uniform(0.5, 1.5, size=(C, D, T, J))
    g = grad_cov(p, beta)
    assert np.all(g > 0)
    # exact form: sum_i x_ji * N * d_t
    expect = np.einsum("ji,cdti->cdtj", x, p.N * p.durations.reshape(1, 1, -1, 1))
    assert np.allclose(g, expect, rtol=1e-14)


def test_grad_cov_matches_finite_differences():
    rng = np.random.default_rng(5)
    C, D, T, R, J = 1, 2, 2, 3, 2
    x = rng.uniform(0.5, 2.0, size=(J, R))
    N = rng.integers(3, 20, size=(C, D, T, R)).astype(float)
    M = rng.poisson(2.0 * N).astype(float)
    M[N == 0] = 0.0
    p = CovariatesProblem(N=N, M=M, x=x, durations=np.array([1.0, 0.5]))
    beta = rng.uniform(0.5, 1.5, size=(C, D, T, J))
    g = grad_cov(p, beta)
    h = 1e-6
    for idx in np.ndindex(beta.shape):
        up = beta.copy(); up[idx] += h
        dn = beta.copy(); dn[idx] -= h
        fd = (f_cov(p, up) - f_cov(p, dn)) / (2 * h)
        assert g[idx] == pytest.approx(fd, rel=1e-5, abs=1e-6)


# ------------------------------------------------------------------
# projection
# ------------------------------------------------------------------

def test_projection_line_example():
    b = _project1(np.array([[1.0]]), 0.1, [-1.0])
    assert b[0] == pytest.approx(0.1, abs=1e-12)


def test_projection_halfplane_example():
    b = _project1(np.array([[1.0], [1.0]]), 1.0, [0.0, 0.0])
    assert np.allclose(b, [0.5, 0.5], atol=1e-12)


def test_projection_feasible_point_unchanged():
    x = np.array([[1.0, 0.5], [0.3, 2.0]])
    y = np.array([2.0, 3.0])          # lambda = (2.9, 7.0) >> eps
    b = _project1(x, 0.1, y)
    assert np.array_equal(b, y)


def test_projection_matches_enumeration_oracle():
    rng = np.random.default_rng(11)
    for scale in [1.0, 50.0, 5000.0]:
        for _ in range(100):
            J = int(rng.integers(1, 4))
            R = int(rng.integers(1, 4))
            x = rng.uniform(0.0, 2.0, size=(J, R))
            x[int(rng.integers(0, J))] += 0.1
            eps = float(rng.choice([1e-5, 0.1, 1.0]))
            y = rng.normal(0.0, scale, size=J)
            got = _project1(x, eps, y)
            want = exact_projection(y, x, eps)
            assert np.abs(got - want).max() <= 1e-7 * max(1.0, scale)


def test_projection_optimality_vs_random_feasible_points():
    rng = np.random.default_rng(12)
    x = rng.uniform(0.3, 2.0, size=(3, 3))
    eps = 0.1
    y = rng.normal(0.0, 3.0, size=3)
    b = _project1(x, eps, y)
    d_b = np.linalg.norm(b - y)
    found = 0
    while found < 1000:
        z = rng.uniform(0.0, 3.0, size=3)
        if np.all(x.T @ z >= eps):
            found += 1
            assert d_b <= np.linalg.norm(z - y) + 1e-6


def test_projection_idempotent():
    rng = np.random.default_rng(13)
    x = rng.uniform(0.3, 2.0, size=(2, 3))
    for scale in [1.0, 1000.0]:
        for _ in range(50):
            y = rng.normal(0.0, scale, size=2)
            b1 = _project1(x, 0.05, y)
            b2 = _project1(x, 0.05, b1)
            assert np.abs(b2 - b1).max() <= 1e-8


def test_projection_nonexpansive():
    rng = np.random.default_rng(14)
    x = rng.uniform(0.3, 2.0, size=(2, 3))
    for _ in range(100):
        y1 = rng.normal(0.0, 10.0, size=2)
        y2 = rng.normal(0.0, 10.0, size=2)
        b1 = _project1(x, 0.05, y1)
        b2 = _project1(x, 0.05, y2)
        assert (np.linalg.norm(b1 - b2)
                <= np.linalg.norm(y1 - y2) + 1e-8)


def test_projection_blocks_independent():
    rng = np.random.default_rng(15)
    C, D, T, R, J = 1, 2, 2, 2, 2
    x = rng.uniform(0.3, 2.0, size=(J, R))
    p = CovariatesProblem(N=np.ones((C, D, T, R)), M=np.ones((C, D, T, R)),
                          x=x, durations=np.ones(T))
    param = Param(eps=0.1)
    y = rng.normal(0.0, 2.0, size=(C, D, T, J))
    full = project_cov(p, param, y)
    for d in range(D):
        for t in range(T):
            assert np.allclose(full[0, d, t],
                               _project1(x, 0.1, y[0, d, t]), atol=1e-12)


def test_projection_shape_check():
    p = _unit_problem()
    with pytest.raises(ValueError, match="shape"):
        project_cov(p, Param(), np.zeros((2, 1, 1, 1)))


# ------------------------------------------------------------------
# feasibility
# ------------------------------------------------------------------

def test_is_feasible_cases():
    rng = np.random.default_rng(16)
    x = rng.uniform(0.3, 2.0, size=(2, 3))
    p = CovariatesProblem(N=np.ones((1, 1, 1, 3)), M=np.ones((1, 1, 1, 3)),
                          x=x, durations=[1.0])
    param = Param(eps=0.1)
    y = rng.normal(0.0, 5.0, size=(1, 1, 1, 2))
    b = project_cov(p, param, y)
    assert is_feasible_cov(p, param, b)
    bad = b.copy(); bad[0, 0, 0, 0] = -1.0
    assert not is_feasible_cov(p, param, bad)
    assert not is_feasible_cov(p, param, np.zeros_like(b))  # beta=0, eps>0


# ------------------------------------------------------------------
# validation
# ------------------------------------------------------------------

def test_problem_validation():
    ones = np.ones((1, 1, 1, 2))
    with pytest.raises(ValueError, match="all-zero"):
        CovariatesProblem(N=ones, M=ones, x=np.array([[1.0, 0.0]]),
                          durations=[1.0])
    with pytest.raises(ValueError, match="non-negative"):
        CovariatesProblem(N=ones, M=ones, x=np.array([[1.0, -1.0]]),
                          durations=[1.0])
    with pytest.raises(ValueError, match="M must be zero"):
        CovariatesProblem(N=np.zeros((1, 1, 1, 2)), M=ones,
                          x=np.array([[1.0, 1.0]]), durations=[1.0])
    with pytest.raises(ValueError, match="durations"):
        CovariatesProblem(N=ones, M=ones, x=np.array([[1.0, 1.0]]),
                          durations=[0.0])
    with pytest.raises(ValueError, match="identical"):
        CovariatesProblem(N=ones, M=np.ones((1, 1, 2, 2)),
                          x=np.array([[1.0, 1.0]]), durations=[1.0])


# ------------------------------------------------------------------
# end-to-end recovery
# ------------------------------------------------------------------

def _recovery_fit(scale=1.0, seed=0, max_iter=400):
    rng = np.random.default_rng(seed)
    C, D, T, R, J = 1, 2, 4, 10, 2
    x = rng.uniform(0.5, 2.0, size=(J, R))
    beta_true = rng.uniform(0.5, 1.5, size=(C, D, T, J))
    lam = np.einsum("cdtj,ji->cdti", beta_true, x)
    N = np.full((C, D, T, R), 500.0)
    M = rng.poisson(500 * lam).astype(float)
    p = CovariatesProblem(N=N, M=M, x=scale * x, durations=np.ones(T))
    param = Param(eps=1e-5, accuracy=1e-9, max_iter=max_iter)
    model = p.model(param)
    fit = projected_gradient_armijo_feasible(
        model, param, model.projection(np.ones((C, D, T, J))))
    return p, beta_true, fit


def test_solver_recovers_planted_coefficients():
    _, beta_true, fit = _recovery_fit()
    rel = np.linalg.norm(fit.x - beta_true) / np.linalg.norm(beta_true)
    assert rel <= 0.05


def test_minimizer_scale_equivariant():
    p1, _, fit1 = _recovery_fit(scale=1.0)
    p2, _, fit2 = _recovery_fit(scale=2.0)
    lam1 = lambda_of_beta(p1, fit1.x)
    lam2 = lambda_of_beta(p2, fit2.x)
    assert float(np.mean(np.abs(lam1 - lam2))) <= 0.01 * float(np.mean(lam1))


def test_no_arrivals_pushes_lambda_to_floor():
    p = CovariatesProblem(N=np.full((1, 1, 1, 1), 5.0),
                          M=np.zeros((1, 1, 1, 1)),
                          x=np.array([[1.0]]), durations=[1.0])
    param = Param(eps=0.1, accuracy=1e-12, max_iter=100)
    model = p.model(param)
    res = projected_gradient_armijo_feasible(model, param,
                                             np.full((1, 1, 1, 1), 3.0))
    assert lambda_of_beta(p, res.x)[0, 0, 0, 0] == pytest.approx(0.1, abs=1e-9)
