import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flagopt.errors import DivergenceError, InvalidArgumentError
from flagopt.flag import (FlagConfig, binary_search, binary_search_detail, bisection,
                          bisection_steps, ceil_log2, effective_lipschitz, flag_run, next_eta,
                          q_value)
from flagopt.generators import GENERATORS, ProblemDescriptor, generate_problem
from flagopt.problem import CompositeProblem, FeasibleSet, LeastSquares, Quadratic, eval_F
from flagopt.prox import MetricDiag, metric_update, prox

GOLDEN = (1 + math.sqrt(5)) / 2


# -------------------------------------------------------- scalar pieces


def test_effective_lipschitz_examples():
    d, L = 5, 3.0
    e1 = np.eye(d)[0]
    s = e1.copy()
    assert effective_lipschitz(L, e1, MetricDiag(s, 0.0)) == L
    assert effective_lipschitz(L, e1, MetricDiag(s, 1.0)) == pytest.approx(L / 2)
    g = np.full(d, 1 / math.sqrt(d))
    _, s = metric_update(np.zeros(d), g)
    explicit = L * g @ np.linalg.inv(np.diag(s)) @ g
    assert effective_lipschitz(L, g, MetricDiag(s, 0.0)) == pytest.approx(L * math.sqrt(d), rel=1e-12)
    assert explicit == pytest.approx(L * math.sqrt(d), rel=1e-12)


def test_next_eta_first_step_is_inverse_L():
    assert next_eta(0.0, 0.0, 4.0) == 0.25


def test_next_eta_golden_ratio():
    assert next_eta(1.0, 1.0, 1.0) == pytest.approx(GOLDEN, rel=1e-15)
    assert GOLDEN == pytest.approx(1.6180339887, abs=1e-10)


@settings(max_examples=200)
@given(st.floats(0, 1e3), st.floats(0, 1e3), st.floats(1e-3, 1e3))
def test_next_eta_solves_defining_quadratic(eta_prev, Lk_prev, Lk):
    eta = next_eta(eta_prev, Lk_prev, Lk)
    c = eta_prev**2 * Lk_prev
    assert eta > 0
    assert abs(eta * eta * Lk - eta - c) <= 1e-12 * max(eta * eta * Lk, 1.0)


def test_next_eta_rejects_nonpositive_L():
    with pytest.raises(InvalidArgumentError):
        next_eta(1.0, 1.0, 0.0)


def test_q_value_examples():
    assert q_value([1.0, 0.0, 0.0]) == 1.0
    d, k = 6, 9
    acc = np.zeros(d)
    for _ in range(k):
        acc, s = metric_update(acc, np.eye(d)[0])
    assert q_value(s) == pytest.approx(math.sqrt(k), rel=1e-15)
    acc = np.zeros(d)
    for j in range(4):
        acc, s = metric_update(acc, np.eye(d)[j])
    assert q_value(s) == 4.0 <= math.sqrt(d * 4)


# ------------------------------------------------------------- bisection


def test_bisection_linear_root():
    eps = 2.0**-10
    assert abs(bisection(lambda t: t - 0.5, 0.0, 1.0, eps) - 0.5) <= eps


def test_bisection_cosine_root():
    eps = 1e-8
    assert abs(bisection(lambda t: math.cos(math.pi * t), 0.0, 1.0, eps) - 0.5) <= eps


def test_bisection_evaluation_count():
    calls = []

    def r(t):
        calls.append(t)
        return t - 1 / 3

    bisection(r, 0.0, 1.0, 2.0**-20)
    assert len(calls) == 2 + 20  # two endpoints, then exactly log2(1/eps) midpoints
    calls.clear()
    bisection(r, 0.0, 1.0, 2.0**-20, r_lo=-1 / 3, r_hi=2 / 3)
    assert len(calls) == 20


@settings(max_examples=100)
@given(st.floats(1e-12, 0.5), st.floats(0.01, 0.99))
def test_bisection_count_and_accuracy(eps, root):
    n = []

    def r(t):
        n.append(t)
        return t - root

    t = bisection(r, 0.0, 1.0, eps, r_lo=-root, r_hi=1 - root)
    if t == root:  # an exactly hit root ends the search early
        assert len(n) <= bisection_steps(0.0, 1.0, eps)
        return
    exact = next(m for m in range(200) if 2.0**-m <= eps)  # powers of two are exact floats
    assert len(n) == bisection_steps(0.0, 1.0, eps) == exact
    assert abs(t - root) <= eps


def test_bisection_same_sign_rejected():
    with pytest.raises(InvalidArgumentError):
        bisection(lambda t: t + 1, 0.0, 1.0, 1e-3)


def test_ceil_log2_exact():
    assert [ceil_log2(n) for n in (1, 2, 3, 4, 5, 1024, 1025)] == [0, 1, 2, 2, 3, 10, 11]


# ---------------------------------------------------------- coupling search


def test_search_degenerate_segment_returns_y():
    problem = generate_problem(ProblemDescriptor())
    y = np.full(20, 0.5)
    res = binary_search_detail(problem, y.copy(), y, 1e-6)
    assert res.case == "y" and res.residual == 0.0 and np.array_equal(res.x, y)


def _box_quadratic(seed):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((2, 2))
    return CompositeProblem.build(Quadratic(M @ M.T + 0.1 * np.eye(2), 3 * rng.standard_normal(2)),
                                  feasible=FeasibleSet.box(-1.0, 1.0, dim=2))


def test_search_returns_y_exactly_when_r1_nonnegative():
    hits = 0
    for seed in range(40):
        problem = _box_quadratic(seed)
        rng = np.random.default_rng(seed)
        y, z = problem.set.sample(rng, 2)
        if float((prox(problem, y) - y) @ (y - z)) >= 0:
            assert binary_search(problem, z, y, 1e-6) is y or np.array_equal(binary_search(problem, z, y, 1e-6), y)
            hits += 1
    assert hits > 0


def test_search_interior_case_meets_residual_bound():
    eps = 1e-6
    found = 0
    for seed in range(200):
        problem = _box_quadratic(seed)
        rng = np.random.default_rng(seed + 1000)
        y, z = problem.set.sample(rng, 2)
        r = lambda x: float((prox(problem, x) - x) @ (y - z))
        if not (r(z) > 0 > r(y)):
            continue
        found += 1
        x = binary_search(problem, z, y, eps)
        assert abs(r(x)) <= 3 * float((y - z) @ (y - z)) * eps
    assert found > 0


@pytest.mark.parametrize("early_stop", [True, False])
def test_search_prox_call_accounting(early_stop):
    problem = generate_problem(ProblemDescriptor())
    rng = np.random.default_rng(0)
    eps = 1e-9
    for _ in range(50):
        y, z = problem.set.sample(rng, 2)
        res = binary_search_detail(problem, z, y, eps, early_stop=early_stop)
        limit = {"y": 1, "z": 2, "interior": 2 + bisection_steps(0, 1, eps)}[res.case]
        assert res.prox_calls <= limit
        if res.case == "interior" and not early_stop:
            assert res.prox_calls == limit


# -------------------------------------------------------------- flag_run


def test_flag_single_iteration_is_prox_step():
    problem = generate_problem(ProblemDescriptor())
    sol, trace = flag_run(problem, FlagConfig(T=1))
    x1 = problem.initial_point()
    assert np.array_equal(sol, prox(problem, x1))
    rec = trace.records[0]
    assert rec.eta == pytest.approx(1 / rec.L_k, rel=1e-15)


def test_flag_stationary_start_exits_early():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((8, 3))
    b = rng.standard_normal(8)
    problem = CompositeProblem.build(LeastSquares(A, b))
    x_star = np.linalg.lstsq(A, b, rcond=None)[0]
    problem = problem.with_lipschitz(problem.lipschitz)
    sol, trace = flag_run(problem, FlagConfig(T=10, x0=x_star, stationary_tol=1e-9))
    assert trace.status == "stationary"
    assert trace.iterations == 0 and trace.records == []
    assert np.allclose(sol, x_star, atol=1e-10)


def test_flag_explicit_gap_bound_on_reference_lasso(lasso, lasso_ref):
    T = 500
    sol, trace = flag_run(lasso, FlagConfig(T=T))
    gap = max(0.0, eval_F(lasso, sol) - lasso_ref.value)
    bound = 1001 * trace.q**2 * lasso.lipschitz * trace.D / T**3
    assert gap <= bound * (1 + 1e-6)


@pytest.mark.parametrize("generator", GENERATORS)
def test_flag_runtime_checks_clean(generator, suite_problems):
    problem = suite_problems[generator]
    sol, trace = flag_run(problem, FlagConfig(T=200))
    assert trace.violations == []
    assert problem.set.contains(sol)
    assert 1 / problem.dim - 1e-12 <= trace.J_B <= 1 + 1e-12
    assert "coupling_inequality" in trace.margins
    q = trace.column("q")
    assert np.all(np.diff(q) >= 0)
    k = trace.column("k")
    assert np.all(q >= np.sqrt(k) * (1 - 1e-9))
    assert np.all(q <= np.sqrt(problem.dim * k) * (1 + 1e-9))
    assert trace.max_prox_calls <= FlagConfig(T=200).prox_budget(problem.dim)


def test_flag_full_space_skips_coupling_check():
    problem = generate_problem(ProblemDescriptor(box_lower=None, box_upper=None))
    _, trace = flag_run(problem, FlagConfig(T=50))
    assert "coupling_inequality" not in trace.margins
    assert trace.violations == []


def test_flag_eta_identities_along_run(lasso):
    _, trace = flag_run(lasso, FlagConfig(T=100))
    eta, Lk = trace.column("eta"), trace.column("L_k")
    csum = np.cumsum(eta)
    assert np.allclose(eta**2 * Lk, csum, rtol=1e-9, atol=0)
    assert np.all(eta * Lk >= 1 - 1e-9)
    assert trace.eta_sum >= trace.iterations**3 / (1000 * trace.Lk_sum)


def test_flag_metric_sum_bound(lasso):
    _, trace = flag_run(lasso, FlagConfig(T=100))
    assert trace.metric_sum <= 2 * trace.q + 1e-6
    assert trace.Lk_sum <= 2 * lasso.lipschitz * trace.q * (1 + 1e-9) + 1e-6


def test_flag_corrupted_L_trips_checks(lasso):
    _, trace = flag_run(lasso.with_lipschitz(lasso.lipschitz / 10), FlagConfig(T=50))
    assert any(v.startswith("prox_descent") for v in trace.violations)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_flag_divergence_raises_with_trace():
    # a huge curvature makes f overflow at the first prox step
    problem = CompositeProblem.build(Quadratic(np.array([[1e300]]), np.array([1e300])),
                                     lipschitz=1e-300)
    with pytest.raises(DivergenceError) as info:
        flag_run(problem, FlagConfig(T=5))
    assert info.value.trace is not None
    assert info.value.trace.status == "diverged"


def test_flag_is_deterministic(lasso):
    _, a = flag_run(lasso, FlagConfig(T=80))
    _, b = flag_run(lasso, FlagConfig(T=80))
    for ra, rb in zip(a.records, b.records):
        assert (ra.f_val, ra.eta, ra.L_k, ra.q, ra.prox_calls) == (rb.f_val, rb.eta, rb.L_k, rb.q, rb.prox_calls)


def test_flag_config_validation():
    with pytest.raises(InvalidArgumentError):
        FlagConfig(T=0)
    with pytest.raises(InvalidArgumentError):
        FlagConfig(T=5, delta=0.0)
    cfg = FlagConfig(T=10)
    assert cfg.epsilon(3) == 1 / (6 * 3 * 1000)
    assert cfg.prox_budget(3) == 1 + math.ceil(math.log2(6 * 3 * 1000))
