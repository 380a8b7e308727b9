import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from flagopt.errors import InvalidArgumentError
from flagopt.generators import GENERATORS, ProblemDescriptor, generate_problem
from flagopt.problem import (CompositeProblem, FeasibleSet, LeastSquares, NonsmoothPart,
                             Quadratic, eval_F)
from flagopt.prox import (MetricDiag, gradient_mapping, metric_update, mirror_step, prox,
                          soft_threshold)


def one_d_lasso(lam=0.4):
    # f(y) = 1/2 (y - 1)^2, L = 1, so v = x - (x - 1) = 1 from any x
    return CompositeProblem.build(LeastSquares(np.eye(1), np.array([1.0])),
                                  NonsmoothPart.l1(lam), lipschitz=1.0)


def grid_argmin(fun, lo, hi, n=200_001):
    grid = np.linspace(lo, hi, n)
    return grid[np.argmin(fun(grid))]


# ------------------------------------------------------------------ prox


def test_prox_plain_gradient_step():
    rng = np.random.default_rng(0)
    Q = rng.standard_normal((4, 4))
    problem = CompositeProblem.build(Quadratic(Q @ Q.T, rng.standard_normal(4)))
    x = rng.standard_normal(4)
    expected = x - problem.smooth_grad(x) / problem.lipschitz
    assert np.allclose(prox(problem, x), expected, rtol=0, atol=1e-14)


def test_prox_soft_threshold_matches_grid_oracle():
    oracle = grid_argmin(lambda y: 0.4 * np.abs(y) + 0.5 * (y - 1.0) ** 2, -2, 2)
    assert oracle == pytest.approx(0.6, abs=1e-4)
    assert prox(one_d_lasso(), np.array([0.0]))[0] == pytest.approx(0.6, abs=1e-15)


def test_prox_box_clipping():
    # f = 1/2 ||x - v||^2 with L = 1 puts the unconstrained prox at v from any x
    v = np.array([-0.5, 0.3, 2.0])
    problem = CompositeProblem.build(LeastSquares(np.eye(3), v),
                                     feasible=FeasibleSet.box(0.0, 1.0, dim=3), lipschitz=1.0)
    assert np.allclose(prox(problem, np.full(3, 0.5)), [0.0, 0.3, 1.0], atol=1e-15)


@pytest.mark.parametrize("generator", GENERATORS)
def test_prox_is_exact_minimizer_per_coordinate(generator):
    problem = generate_problem(ProblemDescriptor(generator, d=3, n=8, lam=0.5,
                                                 box_lower=-1.0, box_upper=1.0))
    L, lam = problem.lipschitz, problem.nonsmooth.weight
    x = problem.set.sample(np.random.default_rng(3))
    v = x - problem.smooth_grad(x) / L
    px = prox(problem, x)
    for i in range(3):
        yi = grid_argmin(lambda y: lam * np.abs(y) + 0.5 * L * (y - v[i]) ** 2, -1, 1)
        assert px[i] == pytest.approx(yi, abs=2e-5)


@settings(max_examples=100, deadline=None)
@given(arrays(float, 5, elements=st.floats(-1e3, 1e3)), st.floats(0, 50))
def test_soft_threshold_properties(v, t):
    out = soft_threshold(v, t)
    assert np.all(np.abs(out) <= np.abs(v))
    assert np.all(out * v >= 0)
    assert np.allclose(np.abs(v - out), np.minimum(np.abs(v), t))


# ------------------------------------------------------- gradient mapping


def test_gradient_mapping_equals_gradient_unconstrained():
    rng = np.random.default_rng(1)
    A = rng.standard_normal((6, 3))
    problem = CompositeProblem.build(LeastSquares(A, rng.standard_normal(6)))
    x = rng.standard_normal(3)
    assert np.allclose(gradient_mapping(problem, x), problem.smooth_grad(x), atol=1e-12)


def test_gradient_mapping_vanishes_at_minimizer():
    rng = np.random.default_rng(2)
    A = rng.standard_normal((6, 3))
    b = rng.standard_normal(6)
    problem = CompositeProblem.build(LeastSquares(A, b))
    x_star = np.linalg.lstsq(A, b, rcond=None)[0]
    assert np.linalg.norm(gradient_mapping(problem, x_star)) <= 1e-10


def test_gradient_mapping_constrained_stationary_point():
    problem = CompositeProblem.build(LeastSquares(np.eye(1), np.zeros(1)),
                                     feasible=FeasibleSet.box(1.0, 2.0, dim=1), lipschitz=1.0)
    oracle = grid_argmin(lambda y: 0.5 * y**2, 1.0, 2.0)
    assert oracle == 1.0
    assert prox(problem, [1.0])[0] == 1.0
    assert gradient_mapping(problem, [1.0])[0] == 0.0


@pytest.mark.parametrize("generator", GENERATORS)
def test_gradient_mapping_inequalities(generator, suite_problems):
    problem = suite_problems[generator]
    L = problem.lipschitz
    rng = np.random.default_rng(4)
    for _ in range(200):
        x, y = problem.set.sample(rng, 2)
        px = prox(problem, x)
        step = 0.5 * L * float((x - px) @ (x - px))
        F_px = eval_F(problem, px)
        assert F_px <= eval_F(problem, x) - step + 1e-9 * (1 + abs(F_px))
        rhs = eval_F(problem, y) + L * float((px - x) @ (y - x)) - step
        assert F_px <= rhs + 1e-9 * (1 + abs(rhs))


@pytest.mark.parametrize("generator", GENERATORS)
def test_prox_two_lipschitz_and_feasible(generator, suite_problems):
    problem = suite_problems[generator]
    rng = np.random.default_rng(5)
    for _ in range(200):
        x, y = problem.set.sample(rng, 2)
        px, py = prox(problem, x), prox(problem, y)
        assert problem.set.contains(px) and problem.set.contains(py)
        assert np.linalg.norm(px - py) <= 2 * np.linalg.norm(x - y) + 1e-9


# ------------------------------------------------------------ mirror step


def test_mirror_step_zero_gradient():
    z = np.array([0.2, 0.4])
    out = mirror_step(z, np.zeros(2), 1.0, MetricDiag(np.ones(2), 1e-8),
                      FeasibleSet.box(0.0, 1.0, dim=2))
    assert np.array_equal(out, z)


def test_mirror_step_unconstrained_example():
    out = mirror_step(np.zeros(2), np.array([1.0, 2.0]), 1.0, MetricDiag(np.ones(2), 0.0),
                      FeasibleSet.full_space())
    # dense check: gradient of <p, z> + 1/2 ||z||^2 vanishes at the output
    assert np.allclose(np.array([1.0, 2.0]) + out, 0.0)
    assert np.array_equal(out, [-1.0, -2.0])


def test_mirror_step_box_example():
    box = FeasibleSet.box(0.0, 1.0, dim=2)
    z, p = np.array([0.1, 0.9]), np.array([1.0, -1.0])
    out = mirror_step(z, p, 1.0, MetricDiag(np.ones(2), 0.0), box)
    for i in range(2):
        oracle = grid_argmin(lambda u: p[i] * (u - z[i]) + 0.5 * (u - z[i]) ** 2, 0.0, 1.0)
        assert out[i] == pytest.approx(oracle, abs=1e-5)
    assert np.array_equal(out, [0.0, 1.0])


def test_mirror_step_rejects_nonpositive_eta():
    with pytest.raises(InvalidArgumentError):
        mirror_step(np.zeros(2), np.ones(2), 0.0, MetricDiag(np.ones(2), 1e-8),
                    FeasibleSet.full_space())


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_mirror_step_variational_inequality(seed):
    rng = np.random.default_rng(seed)
    d = 4
    box = FeasibleSet.box(-1.0, 2.0, dim=d)
    z = box.sample(rng)
    p = 10 * rng.standard_normal(d)
    eta = float(rng.exponential())
    metric = MetricDiag(rng.exponential(size=d), 1e-8)
    out = mirror_step(z, p, eta, metric, box)
    assert box.contains(out)
    grad = eta * p + metric.diag * (out - z)
    for u in box.sample(rng, 50):
        assert float(grad @ (u - out)) >= -1e-8


# --------------------------------------------------------- metric update


def test_metric_update_examples():
    d = 4
    acc, s = metric_update(np.zeros(d), np.eye(d)[0])
    assert np.array_equal(s, [1.0, 0, 0, 0])
    acc, s = metric_update(acc, np.eye(d)[0])
    assert s[0] == pytest.approx(math.sqrt(2), abs=1e-15)
    g = np.full(d, 1 / math.sqrt(d))
    _, s = metric_update(np.zeros(d), g)
    # explicit d x 1 matrix row norms
    assert np.allclose(s, np.linalg.norm(g[:, None], axis=1), atol=1e-15)
    assert np.allclose(s, 1 / math.sqrt(d))


def test_metric_update_rejects_non_unit():
    with pytest.raises(InvalidArgumentError):
        metric_update(np.zeros(2), np.array([1.0, 1.0]))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.integers(1, 30), st.integers(0, 2**31 - 1))
def test_metric_update_matches_explicit_matrix(d, k, seed):
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((d, k))
    G /= np.linalg.norm(G, axis=0)
    acc = np.zeros(d)
    prev = np.zeros(d)
    for j in range(k):
        acc, s = metric_update(acc, G[:, j])
        assert np.all(s >= prev)
        prev = s
    assert np.allclose(s, np.linalg.norm(G, axis=1), rtol=0, atol=1e-12)


def test_metric_diag_positive_definite():
    m = MetricDiag(np.zeros(3), 1e-8)
    assert np.all(m.diag > 0)
    with pytest.raises(InvalidArgumentError):
        MetricDiag(np.zeros(3), -1e-8)
    with pytest.raises(InvalidArgumentError):
        MetricDiag(np.array([1.0, -0.5]), 1e-8)
