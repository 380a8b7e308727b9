"""Sampling and closed-form checks of the inequalities FLAG relies on.

Each check returns a :class:`CheckReport`. ``worst_margin`` is the most
negative slack ``rhs - lhs`` seen (a violation is a slack below ``-tol``).
Every check accepts a deliberately broken input as a negative control, so a
report with zero violations is not vacuous.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import InvalidArgumentError
from .flag import binary_search_detail, next_eta
from .problem import CompositeProblem, eval_F
from .prox import prox

ATOL = 1e-9
RTOL = 1e-9
AGG_TOL = 1e-6


@dataclass
class CheckReport:
    name: str
    trials: int = 0
    violations: int = 0
    worst_margin: float = math.inf
    status: str = "ok"

    @property
    def passed(self) -> bool:
        return self.status == "skipped" or self.violations == 0

    def add(self, slack: float, tol: float = 0.0):
        self.trials += 1
        self.worst_margin = min(self.worst_margin, slack)
        if slack < -tol:
            self.violations += 1
            self.status = "violated"

    def merge(self, other: "CheckReport") -> "CheckReport":
        out = CheckReport(self.name, self.trials + other.trials,
                          self.violations + other.violations,
                          min(self.worst_margin, other.worst_margin))
        out.status = "violated" if out.violations else "ok"
        return out

    def row(self) -> str:
        return f"{self.name}\t{self.trials}\t{self.violations}\t{self.worst_margin:.6e}\t{self.status}"


def _mixed_tol(b: float, atol=ATOL, rtol=RTOL) -> float:
    return atol + rtol * abs(b)


def _pairs(problem: CompositeProblem, trials: int, seed: int):
    """Feasible pairs: half independent uniform draws, half close neighbours."""
    rng = np.random.default_rng(seed)
    feas = problem.set
    for i in range(trials):
        if feas.is_box:
            x = feas.sample(rng)
            if i % 2 == 0:
                y = feas.sample(rng)
            else:
                width = feas.upper - feas.lower
                y = feas.clip(x + 1e-2 * width * rng.standard_normal(problem.dim))
        else:
            x = 3.0 * rng.standard_normal(problem.dim)
            y = x + (3.0 if i % 2 == 0 else 0.03) * rng.standard_normal(problem.dim)
        yield x, y


def check_gradient_mapping(problem: CompositeProblem, trials: int = 500, seed: int = 0,
                           same_point: bool = False) -> CheckReport:
    """``F(prox x) <= F(y) + <L(prox x - x), y - x> - L/2 ||x - prox x||^2``.

    With `same_point` every pair uses ``y = x`` (the descent special case).
    """
    if trials < 1:
        raise InvalidArgumentError("trials must be positive")
    L = problem.lipschitz
    rep = CheckReport("gradient_mapping" + ("_descent" if same_point else ""))
    for x, y in _pairs(problem, trials, seed):
        if same_point:
            y = x
        px = prox(problem, x)
        lhs = eval_F(problem, px)
        rhs = eval_F(problem, y) + L * float((px - x) @ (y - x)) - 0.5 * L * float((x - px) @ (x - px))
        rep.add(rhs - lhs, _mixed_tol(rhs))
    return rep


def check_prox_lipschitz(problem: CompositeProblem, trials: int = 500, seed: int = 0,
                         factor: float = 2.0) -> CheckReport:
    """``||prox x - prox y|| <= factor ||x - y||`` on sampled feasible pairs."""
    if trials < 1:
        raise InvalidArgumentError("trials must be positive")
    rep = CheckReport("prox_lipschitz")
    for x, y in _pairs(problem, trials, seed):
        lhs = float(np.linalg.norm(prox(problem, x) - prox(problem, y)))
        rhs = factor * float(np.linalg.norm(x - y))
        rep.add(rhs - lhs, ATOL)
    return rep


def min_diag_metric(g_list) -> tuple[np.ndarray, float]:
    """Closed-form trace-1 diagonal minimizer of ``sum_k g_k^T diag(s)^{-1} g_k``.

    ``s*(i) = sqrt(a_i) / sum_j sqrt(a_j)`` with ``a_i = sum_k g_k(i)^2``; the
    minimum equals ``(sum_i sqrt(a_i))^2``. Coordinates with ``a_i = 0`` get
    weight zero and drop out of the objective.
    """
    G = np.asarray(g_list, dtype=float)
    a = np.sum(G * G, axis=0)
    root = np.sqrt(a)
    total = float(np.sum(root))
    return root / total, total**2


def _diag_objective(G: np.ndarray, s: np.ndarray) -> float:
    # built directly from explicit diagonal inverses, not the library metric
    total = 0.0
    for g in G:
        active = g != 0
        total += float(np.sum(g[active] ** 2 / s[active]))
    return total


def check_min_diag_metric(g_list, candidate: Optional[np.ndarray] = None,
                          samples: int = 1000, seed: int = 0) -> CheckReport:
    """Closed-form trace-1 metric attains ``q_T^2`` and beats random trace-1 metrics.

    ``q_T`` is the sum of row norms of the stacked ``d x T`` matrix. Pass a
    `candidate` metric to test it in place of the closed form (negative control).
    """
    G = np.asarray(g_list, dtype=float)
    if G.ndim != 2 or G.shape[0] < 1:
        raise InvalidArgumentError("g_list must be a nonempty list of vectors")
    norms = np.linalg.norm(G, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-9):
        raise InvalidArgumentError("every g must have unit norm")
    d = G.shape[1]
    q = float(np.sum(np.linalg.norm(G.T, axis=1)))
    s_star, _ = min_diag_metric(G) if candidate is None else (np.asarray(candidate, float), None)
    best = _diag_objective(G, s_star)

    rep = CheckReport("min_diag_metric")
    rep.add(_mixed_tol(q * q) - abs(best - q * q))
    rng = np.random.default_rng(seed)
    for _ in range(samples):
        s = rng.dirichlet(np.ones(d))
        s = np.maximum(s, 1e-300)
        value = _diag_objective(G, s)
        rep.add(value - best, _mixed_tol(value))
    return rep


def _eta_sequence(L_list):
    """Stepsizes from the defining quadratic ``L_k eta^2 - eta - c_{k-1} = 0``.

    Solved with the rationalized root ``2c / (sqrt(1 + 4 L c) - 1)`` (and
    ``1/L`` when ``c = 0``), a different expression from the library's.
    """
    etas = []
    c = 0.0  # running sum of etas = eta_{k-1}^2 L_{k-1}
    for Lk in L_list:
        if c == 0.0:
            eta = 1.0 / Lk
        else:
            eta = 2.0 * c / (math.sqrt(1.0 + 4.0 * Lk * c) - 1.0)
        etas.append(eta)
        c += eta
    return etas


def check_eta_chain(L_list: Sequence[float], eta_fn: Callable = next_eta) -> CheckReport:
    """Stepsize identities and the lower bound on their sum for a given ``L_k`` sequence.

    Checks, for every ``k``: agreement of `eta_fn` with an independent solve
    (1e-12 relative), ``eta_k^2 L_k = sum_{i<=k} eta_i``,
    ``eta_{k-1}^2 L_{k-1} - eta_k^2 L_k + eta_k = 0`` and ``eta_k L_k >= 1``;
    then ``sum eta_k >= T^3 / (1000 sum L_k)``.
    """
    L_list = [float(v) for v in L_list]
    if not L_list or min(L_list) <= 0:
        raise InvalidArgumentError("L_list must be nonempty and positive")
    reference = _eta_sequence(L_list)
    rep = CheckReport("eta_chain")
    eta_prev = Lk_prev = 0.0
    total = 0.0
    for k, (Lk, eta_ref) in enumerate(zip(L_list, reference), start=1):
        eta = eta_fn(eta_prev, Lk_prev, Lk)
        total += eta
        rep.add(1e-12 * eta_ref - abs(eta - eta_ref))
        rep.add(RTOL * total - abs(eta * eta * Lk - total))
        rep.add(RTOL * total - abs(eta_prev**2 * Lk_prev - eta * eta * Lk + eta))
        rep.add(eta * Lk - (1.0 - RTOL))
        eta_prev, Lk_prev = eta, Lk
    T = len(L_list)
    bound = T**3 / (1000.0 * sum(L_list))
    rep.add(total - bound * (1.0 - AGG_TOL))
    return rep


def check_binary_search(problem: CompositeProblem, trials: int = 200, seed: int = 0,
                        epsilon: float = 1e-6, search: Callable = binary_search_detail) -> CheckReport:
    """Every coupling-search return satisfies its case, by direct evaluation.

    ``x = y`` needs ``<prox x - x, x - z> >= 0``; ``x = z`` needs
    ``<prox x - x, y - x> <= 0``; an interior ``x = t y + (1 - t) z`` needs
    ``|<prox x - x, y - z>| <= 3 ||y - z||^2 epsilon``. `search` may be swapped
    for a broken implementation as a negative control.
    """
    rep = CheckReport("binary_search")
    for y, z in _pairs(problem, trials, seed):
        res = search(problem, z, y, epsilon)
        x = np.asarray(res.x, dtype=float)
        px = prox(problem, x)
        if np.array_equal(x, y):
            rep.add(float((px - x) @ (x - z)))
        elif np.array_equal(x, z):
            rep.add(-float((px - x) @ (y - x)))
        else:
            dyz = y - z
            # recover t from the segment and confirm x lies on it
            t = float((x - z) @ dyz / (dyz @ dyz))
            on_segment = np.allclose(x, t * y + (1 - t) * z, rtol=0, atol=1e-12 * (1 + np.abs(x).max()))
            if not (0.0 < t < 1.0 and on_segment):
                rep.add(-math.inf)
                continue
            rep.add(3.0 * float(dyz @ dyz) * epsilon - abs(float((px - x) @ dyz)))
    return rep


def check_mirror_descent_inequality(run_trace, u_samples) -> CheckReport:
    """``sum_k <eta_k p_k, z_k - u> <= sum_k eta_k^2/2 ||p_k||_{S_k*}^2 + D/2 ||s_T||_1``.

    `run_trace` is a FLAG trace recorded with ``record_history=True``; the dual
    norm uses ``S_k = diag(s_k) + delta I``. Unbounded sets give ``status='skipped'``.
    """
    rep = CheckReport("mirror_descent_inequality")
    D = run_trace.D
    if not math.isfinite(D):
        rep.status = "skipped"
        return rep
    h = run_trace.history
    if h is None:
        raise InvalidArgumentError("trace has no history; run FLAG with record_history=True")
    P = np.asarray(h["p"])
    Z = np.asarray(h["z"])
    etas = np.asarray(h["eta"])
    S = np.asarray(h["s"]) + run_trace.delta
    dual = np.sum(P * P / S, axis=1)
    rhs = float(np.sum(0.5 * etas**2 * dual)) + 0.5 * D * float(np.sum(h["s"][-1]))
    weighted = etas[:, None] * P
    for u in np.atleast_2d(np.asarray(u_samples, dtype=float)):
        lhs = float(np.sum(weighted * (Z - u)))
        rep.add(rhs - lhs, _mixed_tol(rhs, AGG_TOL, AGG_TOL))
    return rep


def audit(problems: dict, trials: int = 500, seed: int = 0) -> list:
    """Run the sampling checks over named problems plus the problem-free checks."""
    reports = []
    for label, problem in problems.items():
        for rep in (check_gradient_mapping(problem, trials, seed),
                    check_gradient_mapping(problem, trials, seed, same_point=True),
                    check_prox_lipschitz(problem, trials, seed),
                    check_binary_search(problem, min(trials, 200), seed)):
            rep.name = f"{rep.name}[{label}]"
            reports.append(rep)
    rng = np.random.default_rng(seed)
    diag_rep = None
    for _ in range(20):
        d = int(rng.integers(1, 6))
        T = int(rng.integers(1, 11))
        G = rng.standard_normal((T, d))
        G /= np.linalg.norm(G, axis=1, keepdims=True)
        r = check_min_diag_metric(G, seed=int(rng.integers(2**31)))
        diag_rep = r if diag_rep is None else diag_rep.merge(r)
    reports.append(diag_rep)
    eta_rep = None
    for _ in range(100):
        r = check_eta_chain(np.exp(rng.uniform(-3, 3, size=200)))
        eta_rep = r if eta_rep is None else eta_rep.merge(r)
    reports.append(eta_rep)
    return reports
