import numpy as np
import pytest

from phmid.costs import (CostEnsemble, LogisticCost, QuadraticCost,
                         ensemble_constants, from_spec,
                         random_logistic_ensemble, random_quadratic_ensemble)
from phmid.numerics import DimensionMismatchError


def test_quadratic_identity_cost():
    c = QuadraticCost(np.eye(3), np.zeros(3))
    theta = np.array([1.0, -2.0, 0.5])
    assert np.array_equal(c.gradient(theta), theta)
    assert c.value(np.zeros(3)) == 0.0
    assert np.array_equal(c.hessian(theta), np.eye(3))


def test_quadratic_rejects_indefinite():
    with pytest.raises(ValueError):
        QuadraticCost(np.diag([1.0, -0.1]), np.zeros(2))


def test_logistic_value_at_zero():
    # exp(0) = 1 in every margin, so each point contributes log 2
    c = LogisticCost(np.array([[0.5], [-1.0], [2.0]]),
                     np.array([1.0, -1.0, 1.0]), reg=0.1, n_agents=10)
    assert c.value(np.zeros(2)) == pytest.approx(3 * np.log(2.0), rel=1e-15)


def test_logistic_validation():
    with pytest.raises(ValueError):
        LogisticCost(np.zeros((2, 1)), np.array([1.0, 0.5]), 0.1, 10)
    with pytest.raises(ValueError):
        LogisticCost(np.zeros((2, 1)), np.array([1.0, -1.0]), 0.0, 10)


def _finite_difference_gradient(cost, theta, step=1e-6):
    g = np.zeros_like(theta)
    for k in range(theta.size):
        delta = np.zeros_like(theta)
        delta[k] = step
        g[k] = (cost.value(theta + delta) - cost.value(theta - delta)) / (2 * step)
    return g


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(1)
    quad = random_quadratic_ensemble(3, 4, seed=2).costs
    logi = random_logistic_ensemble(3, 3, 8, 0.1, seed=2).costs
    for cost in quad + logi:
        for _ in range(5):
            theta = rng.standard_normal(cost.dim)
            g = cost.gradient(theta)
            fd = _finite_difference_gradient(cost, theta)
            assert np.linalg.norm(g - fd) <= 1e-5 * (1 + np.linalg.norm(g))


def test_hessians_match_finite_differences():
    rng = np.random.default_rng(2)
    for cost in random_logistic_ensemble(2, 3, 6, 0.2, seed=7).costs:
        theta = rng.standard_normal(cost.dim)
        h = cost.hessian(theta)
        assert np.abs(h - h.T).max() == 0.0
        step = 1e-6
        for k in range(cost.dim):
            delta = np.zeros(cost.dim)
            delta[k] = step
            col = (cost.gradient(theta + delta) - cost.gradient(theta - delta)) / (2 * step)
            assert np.linalg.norm(h[:, k] - col) <= 1e-5 * (1 + np.linalg.norm(col))


def test_ensemble_constants_quadratic():
    c = QuadraticCost(np.diag([1.0, 3.0]), np.zeros(2))
    mu, lip = ensemble_constants([c])
    assert mu == pytest.approx(1.0, abs=1e-12)
    assert lip == pytest.approx(3.0, abs=1e-12)


def test_ensemble_constants_logistic():
    ens = random_logistic_ensemble(10, 3, 10, 0.1, seed=42)
    assert ens.mu == pytest.approx(0.1 / 10, rel=1e-15)
    # the Lipschitz bound dominates sampled Hessian eigenvalues
    rng = np.random.default_rng(5)
    for cost in ens.costs:
        for _ in range(10):
            theta = rng.standard_normal(3)
            top = np.linalg.eigvalsh(cost.hessian(theta))[-1]
            assert top <= ens.lipschitz + 1e-10


def test_centralized_optimum_identity_hessians():
    # all f_i = |theta|^2/2 + b_i . theta  =>  theta* = -mean(b_i)
    rng = np.random.default_rng(8)
    bs = rng.standard_normal((5, 3))
    ens = CostEnsemble([QuadraticCost(np.eye(3), b) for b in bs])
    theta = ens.centralized_optimum()
    assert np.linalg.norm(theta + bs.mean(axis=0)) <= 1e-10


def test_centralized_optimum_symmetric_logistic_data():
    # four-fold symmetric data: for every (point, label) the ensemble also
    # holds (-point, -label), (point, -label) and (-point, label); the
    # summed logistic gradient then cancels exactly at zero
    rng = np.random.default_rng(9)
    pts = rng.standard_normal((6, 2))
    costs = [
        LogisticCost(pts, np.ones(6), 0.1, 4),
        LogisticCost(-pts, -np.ones(6), 0.1, 4),
        LogisticCost(pts, -np.ones(6), 0.1, 4),
        LogisticCost(-pts, np.ones(6), 0.1, 4),
    ]
    ens = CostEnsemble(costs)
    theta = ens.centralized_optimum(tol=1e-12)
    assert np.linalg.norm(theta) <= 1e-10
    # cross-check with an independent gradient-descent oracle
    x = np.full(3, 0.7)
    for _ in range(4000):
        x = x - 0.05 * ens.gradient_sum(x)
    assert np.linalg.norm(x - theta) <= 1e-6


def test_centralized_optimum_is_local_minimum():
    rng = np.random.default_rng(10)
    for ens in (random_quadratic_ensemble(4, 3, seed=11),
                random_logistic_ensemble(4, 3, 6, 0.1, seed=11)):
        theta = ens.centralized_optimum()
        base = ens.value_sum(theta)
        for _ in range(20):
            d = rng.standard_normal(theta.size)
            d /= np.linalg.norm(d)
            assert base <= ens.value_sum(theta + 0.01 * d) + 1e-12


def test_strong_monotonicity_and_lipschitz():
    rng = np.random.default_rng(12)
    quad = random_quadratic_ensemble(3, 3, seed=13)
    logi = random_logistic_ensemble(3, 3, 8, 0.1, seed=13)
    for ens in (quad, logi):
        for cost in ens.costs:
            for _ in range(20):
                u = rng.standard_normal(cost.dim)
                v = rng.standard_normal(cost.dim)
                du = cost.gradient(v) - cost.gradient(u)
                gap = (v - u) @ du
                assert gap >= ens.mu * np.sum((v - u) ** 2) - 1e-10
                assert np.linalg.norm(du) <= ens.lipschitz * np.linalg.norm(v - u) + 1e-10


def test_bregman_lower_bound():
    rng = np.random.default_rng(14)
    ens = random_logistic_ensemble(5, 3, 8, 0.3, seed=15)
    star = ens.centralized_optimum()
    f_star = ens.value_sum(star)
    g_star = ens.gradient_sum(star)
    total_mu = ens.mu * ens.n_agents  # each local cost contributes its floor
    for _ in range(30):
        x = star + rng.standard_normal(3)
        breg = ens.value_sum(x) - f_star - g_star @ (x - star)
        assert breg >= total_mu / 2 * np.sum((x - star) ** 2) - 1e-10


def test_gradient_stack_matches_per_agent():
    for ens in (random_quadratic_ensemble(4, 3, seed=16),
                random_logistic_ensemble(4, 3, 6, 0.1, seed=16)):
        rng = np.random.default_rng(17)
        q = rng.standard_normal((4, 3))
        stacked = ens.gradient_stack(q)
        rows = np.stack([c.gradient(q[i]) for i, c in enumerate(ens.costs)])
        assert np.abs(stacked - rows).max() <= 1e-14
        hs = ens.hessian_stack(q)
        hrows = np.stack([c.hessian(q[i]) for i, c in enumerate(ens.costs)])
        assert np.abs(hs - hrows).max() <= 1e-14


def test_random_quadratic_eigenvalue_range():
    ens = random_quadratic_ensemble(10, 3, seed=42)
    for cost in ens.costs:
        eigs = np.linalg.eigvalsh(cost.h)
        assert eigs[0] >= 0.5 - 1e-12
        assert eigs[-1] <= 3.0 + 1e-12


def test_cost_from_spec():
    ens = from_spec("quadratic:3:42", n_agents=5)
    assert ens.n_agents == 5 and ens.dim == 3
    ens2 = from_spec("logistic:3:10:0.1:7", n_agents=10)
    assert ens2.dim == 3
    assert ens2.mu == pytest.approx(0.01, rel=1e-15)
    with pytest.raises(ValueError):
        from_spec("huber:3:1", 4)


def test_dimension_mismatch_raises():
    c = QuadraticCost(np.eye(2), np.zeros(2))
    with pytest.raises(DimensionMismatchError):
        c.value(np.zeros(3))
    with pytest.raises(DimensionMismatchError):
        CostEnsemble([c, QuadraticCost(np.eye(3), np.zeros(3))])
