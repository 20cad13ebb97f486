import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fedtrans.glm import GAUSSIAN, LOGISTIC
from fedtrans.solver import (
    PenaltyConfig,
    SmoothObjective,
    SolverDivergence,
    SparsityBudget,
    cross_validate_lambda,
    glm_objective,
    hard_threshold_topk,
    kkt_residual,
    lambda_grid,
    lambda_max,
    lasso_fit_fn,
    penalty_weights,
    quadratic_objective,
    soft_threshold,
    solve_l1,
)

from oracles import logistic_lasso_cd, logistic_lasso_objective


def test_soft_threshold_examples():
    assert np.allclose(soft_threshold([2, -0.5, 0.1], 0.5), [1.5, 0, 0])
    v = np.array([0.3, -2.0, 0.0])
    assert np.array_equal(soft_threshold(v, 0), v)
    assert np.array_equal(soft_threshold([-3, 3], 1), [-2, 2])


def test_hard_threshold_examples():
    assert np.array_equal(hard_threshold_topk([3, -1, 0.5, 2], 2), [3, 0, 0, 2])
    v = np.array([1.0, -4.0, 2.0])
    assert np.array_equal(hard_threshold_topk(v, 3), v)
    assert np.array_equal(hard_threshold_topk([1, -1, 1], 2), [1, -1, 0])
    assert np.array_equal(hard_threshold_topk([1, 2], 0), [0, 0])
    with pytest.raises(ValueError):
        hard_threshold_topk([1, 2], 3)


@settings(max_examples=60, deadline=None)
@given(v=st.lists(st.floats(-10, 10), min_size=1, max_size=30), t=st.floats(0, 3), data=st.data())
def test_hard_of_soft_threshold_keeps_largest(v, t, data):
    k = data.draw(st.integers(0, len(v)))
    out = hard_threshold_topk(soft_threshold(v, t), k)
    s = soft_threshold(v, t)
    assert np.count_nonzero(out) <= k
    kept = np.abs(s[out != 0])
    dropped = np.abs(s[out == 0])
    if kept.size and dropped.size:
        assert kept.min() >= dropped.max()


def test_penalty_config_validation():
    PenaltyConfig(0.0)
    with pytest.raises(ValueError):
        PenaltyConfig(-1.0)
    with pytest.raises(ValueError):
        PenaltyConfig(0.1, c_n=0)
    with pytest.raises(ValueError):
        SparsityBudget(0)


def test_quadratic_prox_closed_form():
    z = np.array([2.0, -0.5])
    obj = quadratic_objective(np.eye(2), -z, 0.5 * z @ z)
    sol = solve_l1(obj, 0.5)
    assert sol.converged
    assert np.allclose(sol.coef, [1.5, 0.0], atol=1e-9)


def test_accepts_penalty_config():
    z = np.array([2.0, -0.5])
    sol = solve_l1(quadratic_objective(np.eye(2), -z), PenaltyConfig(0.5, penalize_intercept=False))
    # coordinate 0 unpenalized
    assert np.allclose(sol.coef, [2.0, 0.0], atol=1e-9)


def orthonormal_design(rng, n, p):
    Q, _ = np.linalg.qr(rng.standard_normal((n, p)))
    return np.sqrt(n) * Q


def test_orthonormal_gaussian_lasso_is_soft_threshold():
    rng = np.random.default_rng(0)
    for _ in range(10):
        n, p = 60, 8
        X = orthonormal_design(rng, n, p)
        y = X @ rng.standard_normal(p) + rng.standard_normal(n)
        lam = rng.uniform(0.05, 1.0)
        sol = solve_l1(glm_objective(GAUSSIAN, X, y, scale=1.0 / n), lam)
        ols = X.T @ y / n
        assert np.max(np.abs(sol.coef - soft_threshold(ols, lam))) < 1e-6


def test_logistic_lasso_matches_coordinate_descent():
    rng = np.random.default_rng(1)
    n, p, lam = 40, 5, 0.1
    X = rng.standard_normal((n, p))
    y = (rng.random(n) < 1 / (1 + np.exp(-X @ np.array([1.0, -1.0, 0.5, 0, 0])))).astype(float)
    sol = solve_l1(glm_objective(LOGISTIC, X, y, scale=1.0 / n), lam)
    ref = logistic_lasso_cd(X, y, lam)
    gap = logistic_lasso_objective(X, y, sol.coef, lam) - logistic_lasso_objective(X, y, ref, lam)
    assert abs(gap) < 1e-6


def test_kkt_conditions_hold_with_unpenalized_intercept():
    rng = np.random.default_rng(2)
    n, p = 80, 6
    X = np.column_stack([np.ones(n), rng.standard_normal((n, p - 1))])
    y = (rng.random(n) < 0.3).astype(float)
    obj = glm_objective(LOGISTIC, X, y, scale=1.0 / n)
    w = penalty_weights(p, penalize_intercept=False)
    sol = solve_l1(obj, 0.05, weights=w, tol=1e-8)
    g = obj.gradient_at(sol.coef)
    assert sol.converged
    assert abs(g[0]) <= 1e-8
    assert kkt_residual(g, sol.coef, 0.05, w) <= 1e-8
    for j in range(1, p):
        if sol.coef[j] != 0:
            assert abs(g[j] + 0.05 * np.sign(sol.coef[j])) <= 1e-8
        else:
            assert abs(g[j]) <= 0.05 + 1e-8


def test_iterates_are_monotone():
    rng = np.random.default_rng(3)
    n, p = 50, 30
    X = rng.standard_normal((n, p)) @ np.linalg.cholesky(0.8 * np.ones((p, p)) + 0.2 * np.eye(p)).T
    y = (rng.random(n) < 0.5).astype(float)
    sol = solve_l1(glm_objective(LOGISTIC, X, y, scale=1.0 / n), 0.01, record_history=True)
    hist = np.array(sol.history)
    assert np.all(np.diff(hist) <= 1e-12 * np.abs(hist[:-1]).max())


def test_solution_invariant_to_initialization():
    rng = np.random.default_rng(4)
    n, p, lam = 60, 10, 0.05
    X = rng.standard_normal((n, p))
    y = (rng.random(n) < 0.5).astype(float)
    obj = glm_objective(LOGISTIC, X, y, scale=1.0 / n)
    tol = 1e-7
    vals = [solve_l1(obj, lam, init=rng.standard_normal(p), tol=tol).objective for _ in range(3)]
    assert max(vals) - min(vals) <= 10 * tol


def test_scaling_objective_and_penalty_together():
    rng = np.random.default_rng(5)
    n, p, lam = 60, 8, 0.04
    X = rng.standard_normal((n, p))
    y = X @ rng.standard_normal(p) + rng.standard_normal(n)
    obj = glm_objective(GAUSSIAN, X, y, scale=1.0 / n)
    a = solve_l1(obj, lam, tol=1e-9).coef
    b = solve_l1(obj.scaled(7.0), 7.0 * lam, tol=7e-9).coef
    assert np.max(np.abs(a - b)) < 1e-6


def test_nonconvergence_is_flagged():
    rng = np.random.default_rng(6)
    X = rng.standard_normal((40, 10))
    y = (rng.random(40) < 0.5).astype(float)
    sol = solve_l1(glm_objective(LOGISTIC, X, y, scale=1 / 40), 1e-4, max_iter=3)
    assert not sol.converged
    assert sol.n_iter == 3


def test_divergence_raises():
    bad = SmoothObjective(lambda b: float("nan"), lambda b: np.zeros_like(b), 2, lipschitz=1.0)
    with pytest.raises(SolverDivergence):
        solve_l1(bad, 0.1)


def test_lambda_max_gives_zero_solution():
    rng = np.random.default_rng(7)
    X = rng.standard_normal((50, 6))
    y = rng.standard_normal(50)
    obj = glm_objective(GAUSSIAN, X, y, scale=1 / 50)
    lm = lambda_max(obj)
    assert np.all(solve_l1(obj, lm * 1.0001).coef == 0)
    assert np.any(solve_l1(obj, lm * 0.9).coef != 0)
    grid = lambda_grid(lm)
    assert len(grid) == 20 and grid[0] == lm and np.isclose(grid[-1], 0.01 * lm)


def test_cv_single_value_grid_and_validation():
    fit = lasso_fit_fn(GAUSSIAN, penalize_intercept=True)
    X = np.random.default_rng(0).standard_normal((20, 3))
    y = X[:, 0]
    assert cross_validate_lambda(fit, X, y, GAUSSIAN, [0.3]) == 0.3
    with pytest.raises(ValueError):
        cross_validate_lambda(fit, X, y, GAUSSIAN, [0.1, 0.3])
    with pytest.raises(ValueError):
        cross_validate_lambda(fit, X, y, GAUSSIAN, [0.3, 0.1], folds=1)


def test_cv_single_class_fold_errors():
    X = np.random.default_rng(0).standard_normal((6, 2))
    y = np.array([1.0, 0, 0, 0, 0, 0])
    with pytest.raises(ValueError, match="single outcome class"):
        cross_validate_lambda(lasso_fit_fn(LOGISTIC), X, y, LOGISTIC, [0.2, 0.1], folds=6)


def _grid_for(X, y):
    obj = glm_objective(GAUSSIAN, X, y, scale=1 / len(y))
    return lambda_grid(lambda_max(obj))


def test_cv_prefers_sparse_models_on_noise():
    fit = lasso_fit_fn(GAUSSIAN, penalize_intercept=True, tol=1e-6)
    upper = 0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((100, 10))
        y = rng.standard_normal(100)
        grid = _grid_for(X, y)
        lam = cross_validate_lambda(fit, X, y, GAUSSIAN, grid, folds=5, seed=seed)
        upper += lam >= grid[len(grid) // 2 - 1]
    assert upper >= 40


def test_cv_recovers_strong_signal_support():
    fit = lasso_fit_fn(GAUSSIAN, penalize_intercept=True, tol=1e-6)
    hits = 0
    for seed in range(50):
        rng = np.random.default_rng(100 + seed)
        X = rng.standard_normal((200, 10))
        beta = np.zeros(10)
        beta[[2, 7]] = [1.5, -1.0]
        y = X @ beta + rng.standard_normal(200)
        lam = cross_validate_lambda(fit, X, y, GAUSSIAN, _grid_for(X, y), folds=5, seed=seed)
        coef = fit(X, y, lam)
        hits += bool(coef[2] != 0 and coef[7] != 0)
    assert hits >= 45
