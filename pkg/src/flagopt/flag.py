"""FLAG: accelerated proximal method with an adaptive diagonal metric.

Each iteration takes a proximal-gradient step from ``x_k`` to ``y_{k+1}``,
grows an AdaGrad-style diagonal metric from the normalized gradient mapping,
takes a mirror step ``z_k -> z_{k+1}`` in that metric with stepsize ``eta_k``,
and picks the next query point on the segment ``[z_{k+1}, y_{k+1}]`` by
bisection on ``r(t) = <prox(x_t) - x_t, y - z>``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DivergenceError, InvalidArgumentError
from .problem import CompositeProblem, _as_vector, diameters, eval_F
from .prox import MetricDiag, metric_update, mirror_step, prox

ATOL = 1e-9
RTOL = 1e-9
AGG_TOL = 1e-6


def within(a: float, b: float, atol: float = ATOL, rtol: float = RTOL) -> bool:
    """Mixed-tolerance ``a <= b``."""
    return a <= b + atol + rtol * abs(b)


def ceil_log2(n: int) -> int:
    """``ceil(log2(n))`` for a positive integer, exactly."""
    return (int(n) - 1).bit_length()


# --------------------------------------------------------------------------
# scalar pieces
# --------------------------------------------------------------------------


def effective_lipschitz(L: float, g, metric: MetricDiag) -> float:
    """``L * g^T S^{-1} g``."""
    return L * metric.dual_norm_sq(g)


def next_eta(eta_prev: float, Lk_prev: float, Lk: float) -> float:
    """Positive root of ``eta^2 Lk - eta - eta_prev^2 Lk_prev = 0``."""
    if not Lk > 0:
        raise InvalidArgumentError("Lk must be positive")
    if eta_prev < 0 or Lk_prev < 0:
        raise InvalidArgumentError("eta_prev and Lk_prev must be nonnegative")
    return 1.0 / (2.0 * Lk) + math.sqrt(1.0 / (4.0 * Lk * Lk) + eta_prev * eta_prev * Lk_prev / Lk)


def q_value(s) -> float:
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise InvalidArgumentError("s must be nonnegative")
    return float(np.sum(s))


# --------------------------------------------------------------------------
# bisection and the coupling search
# --------------------------------------------------------------------------


def bisection_steps(lo: float, hi: float, epsilon: float) -> int:
    """Number of halvings until the bracket width drops to `epsilon`."""
    width, n = hi - lo, 0
    while width > epsilon:
        width *= 0.5
        n += 1
    return n


def _bisect(r, lo, hi, epsilon, r_lo, r_hi, ftol):
    if r_lo is None:
        r_lo = r(lo)
    if r_hi is None:
        r_hi = r(hi)
    if not r_lo * r_hi < 0:
        raise InvalidArgumentError("bisection needs r(lo) and r(hi) of strictly opposite sign")
    a, fa, b = lo, r_lo, hi
    m = fm = None
    for _ in range(bisection_steps(lo, hi, epsilon)):
        m = 0.5 * (a + b)
        fm = r(m)
        if fm == 0.0 or abs(fm) <= ftol:
            break
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
    if m is None:
        # bracket already narrower than epsilon
        m = 0.5 * (lo + hi)
        fm = r(m)
    return m, fm


def bisection(r: Callable[[float], float], lo: float, hi: float, epsilon: float,
              r_lo: Optional[float] = None, r_hi: Optional[float] = None,
              ftol: float = 0.0) -> float:
    """Root of `r` on ``(lo, hi)`` to within `epsilon`.

    Endpoint values are evaluated only when not supplied. After that exactly
    ``ceil(log2((hi - lo) / epsilon))`` midpoints are probed and the last one is
    returned; it lies within `epsilon` of a root because it is an endpoint of
    the final bracket. A probe with ``|r| <= ftol`` ends the search early.
    """
    if not epsilon > 0 or not hi > lo:
        raise InvalidArgumentError("need epsilon > 0 and hi > lo")
    t, _ = _bisect(r, lo, hi, epsilon, r_lo, r_hi, ftol)
    return t


@dataclass
class SearchResult:
    x: np.ndarray
    prox_x: np.ndarray
    case: str  # "y", "z" or "interior"
    t: float
    residual: float  # <prox(x) - x, y - z>
    prox_calls: int


def binary_search_detail(problem: CompositeProblem, z, y, epsilon: float,
                         early_stop: bool = True) -> SearchResult:
    """Coupling search on the segment from `z` to `y`, with bookkeeping.

    Returns ``y`` when ``r(1) >= 0``, ``z`` when ``r(0) <= 0``, and otherwise a
    bisection point with ``|r(t)| <= 3 ||y - z||^2 epsilon``. With `early_stop`
    the bisection also ends at the first probe already meeting that bound.
    The prox at the returned point is handed back so the caller can reuse it.
    """
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    d = y - z
    py = prox(problem, y)
    r1 = float((py - y) @ d)
    if r1 >= 0:
        return SearchResult(y, py, "y", 1.0, r1, 1)
    pz = prox(problem, z)
    r0 = float((pz - z) @ d)
    if r0 <= 0:
        return SearchResult(z, pz, "z", 0.0, r0, 2)

    probes = {}

    def r(t):
        x = t * y + (1.0 - t) * z
        px = prox(problem, x)
        probes[t] = (x, px)
        return float((px - x) @ d)

    ftol = 3.0 * float(d @ d) * epsilon if early_stop else 0.0
    t, rt = _bisect(r, 0.0, 1.0, epsilon, r0, r1, ftol)
    x, px = probes[t]
    return SearchResult(x, px, "interior", t, rt, 2 + len(probes))


def binary_search(problem: CompositeProblem, z, y, epsilon: float) -> np.ndarray:
    return binary_search_detail(problem, z, y, epsilon).x


# --------------------------------------------------------------------------
# the main loop
# --------------------------------------------------------------------------


@dataclass
class FlagConfig:
    """Run parameters. ``epsilon = 1 / (6 d T^3)`` is derived, never set."""

    T: int
    delta: float = 1e-8
    stationary_tol: Optional[float] = None  # default 1e-13 * max(1, L)
    record_trace: bool = True
    record_history: bool = False
    check: bool = True
    x0: Optional[np.ndarray] = None

    def __post_init__(self):
        if int(self.T) != self.T or self.T < 1:
            raise InvalidArgumentError("T must be a positive integer")
        if not self.delta > 0:
            raise InvalidArgumentError("delta must be positive")

    def epsilon(self, dim: int) -> float:
        return 1.0 / (6.0 * dim * float(self.T) ** 3)

    def prox_budget(self, dim: int) -> int:
        """Per-iteration prox-call ceiling ``1 + ceil(log2(6 d T^3))``."""
        return 1 + ceil_log2(6 * dim * int(self.T) ** 3)


@dataclass
class IterateRecord:
    k: int
    f_val: float
    gap: float
    eta: float
    L_k: float
    q: float
    prox_calls: int
    elapsed: float


@dataclass
class StepTrace:
    records: list = field(default_factory=list)
    status: str = "completed"
    iterations: int = 0
    eta_sum: float = 0.0
    Lk_sum: float = 0.0
    metric_sum: float = 0.0  # sum_k g_k^T S_k^{-1} g_k
    q: float = 0.0
    D: float = math.inf
    D2: float = math.inf
    delta: float = 0.0
    lipschitz: float = 0.0
    dim: int = 0
    solution_value: float = math.nan
    max_prox_calls: int = 0
    # per-check worst slack; negative means violated
    margins: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)
    history: Optional[dict] = None

    def note(self, name: str, slack: float, k: Optional[int] = None, detail: str = ""):
        prev = self.margins.get(name, math.inf)
        self.margins[name] = min(prev, slack)
        if slack < 0:
            where = f" at k={k}" if k is not None else ""
            self.violations.append(f"{name}{where}: slack {slack:.3e} {detail}".rstrip())

    @property
    def eta_sum_ratio(self) -> float:
        """``(sum eta_k)(sum L_k) / T^3``; the proved lower bound is 1/1000."""
        T = self.iterations
        return self.eta_sum * self.Lk_sum / T**3 if T else math.nan

    @property
    def J_B(self) -> float:
        """``q_T^2 / (d T)``, the best trace-``d`` diagonal metric's ratio; lies in ``[1/d, 1]``."""
        if not self.iterations or not self.dim:
            return math.nan
        return self.q**2 / (self.dim * self.iterations)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)


def _slack(a, b, atol=ATOL, rtol=RTOL):
    """Slack of ``a <= b`` under the mixed tolerance."""
    return b + atol + rtol * abs(b) - a


def flag_run(problem: CompositeProblem, config: FlagConfig):
    """Run FLAG for ``config.T`` iterations; return ``(y_{T+1}, trace)``.

    With ``config.check`` the loop records the slack of every per-iteration
    guarantee (stepsize recurrence, prox descent, coupling inequality, search
    trichotomy, q bounds, prox-call budget) in ``trace.margins``; violations
    are listed in ``trace.violations`` rather than raised.

    Notes
    -----
    The prox at the point returned by the coupling search is reused as the
    next proximal-gradient step, and the search is skipped on the final
    iteration since ``x_{T+1}`` is never used. Neither changes the iterates.
    """
    L = problem.lipschitz
    d = problem.dim
    T = int(config.T)
    eps = config.epsilon(d)
    stol = config.stationary_tol
    if stol is None:
        stol = 1e-13 * max(1.0, L)
    budget = config.prox_budget(d)
    D, D2 = diameters(problem.set)
    chk = config.check

    x = problem.initial_point() if config.x0 is None else _as_vector(config.x0, d, "x0").copy()
    if not problem.set.contains(x):
        raise InvalidArgumentError("x0 must be feasible")
    y = x.copy()
    z = x.copy()

    trace = StepTrace(D=D, D2=D2, delta=config.delta, lipschitz=L, dim=d)
    if config.record_history:
        trace.history = {"p": [], "z": [], "eta": [], "s": []}

    acc = np.zeros(d)
    s = np.zeros(d)
    eta_prev = 0.0
    Lk_prev = 0.0
    eta_sum = 0.0
    cached = None
    calls_cum = 0
    t0 = time.perf_counter()
    solution = x

    for k in range(1, T + 1):
        calls = 0
        if cached is None:
            y_next = prox(problem, x)
            calls += 1
        else:
            y_next = cached
        p = -L * (y_next - x)
        f_next = eval_F(problem, y_next)
        if not math.isfinite(f_next):
            trace.status = "diverged"
            raise DivergenceError(f"nonfinite objective at iteration {k}", trace)
        solution = y_next

        if chk:
            f_x = eval_F(problem, x)
            trace.note("prox_descent", _slack(f_next, f_x - 0.5 * L * float((x - y_next) @ (x - y_next))), k)

        pnorm = float(np.linalg.norm(p))
        if pnorm <= stol:
            calls_cum += calls
            trace.status = "stationary"
            break

        g = p / pnorm
        acc, s = metric_update(acc, g)
        metric = MetricDiag(s, config.delta)
        gSg = metric.dual_norm_sq(g)
        Lk = L * gSg
        eta = next_eta(eta_prev, Lk_prev, Lk)
        eta_sum += eta
        q = q_value(s)
        trace.metric_sum += gSg
        trace.Lk_sum += Lk

        if chk:
            trace.note("eta_recurrence", RTOL * eta_sum - abs(eta * eta * Lk - eta_sum), k)
            trace.note("eta_part_ii", RTOL * eta_sum - abs(eta_prev**2 * Lk_prev - eta * eta * Lk + eta), k)
            trace.note("eta_Lk_ge_1", eta * Lk - (1.0 - RTOL), k)
            trace.note("q_lower", q - math.sqrt(k) * (1.0 - RTOL), k)
            trace.note("q_upper", math.sqrt(d * k) * (1.0 + RTOL) - q, k)
            if math.isfinite(D):
                lhs = float(p @ (x - z))
                rhs = (eta * Lk - 1.0) * float(p @ (y - x)) + D * L * eta * Lk / T**3
                trace.note("coupling_inequality", _slack(lhs, rhs), k)

        z_next = mirror_step(z, p, eta, metric, problem.set)

        if k < T:
            res = binary_search_detail(problem, z_next, y_next, eps)
            calls += res.prox_calls
            x_next = res.x
            cached = res.prox_x
            if chk:
                trace.note("search_trichotomy", _search_slack(res, y_next, z_next, eps), k)
        else:
            x_next = x

        if chk:
            trace.note("prox_budget", budget - calls, k)
        calls_cum += calls
        trace.max_prox_calls = max(trace.max_prox_calls, calls)

        if config.record_history:
            h = trace.history
            h["p"].append(p)
            h["z"].append(z)
            h["eta"].append(eta)
            h["s"].append(s)
        if config.record_trace:
            trace.records.append(IterateRecord(k, f_next, math.nan, eta, Lk, q, calls_cum,
                                               time.perf_counter() - t0))
        trace.iterations = k

        x, y, z = x_next, y_next, z_next
        eta_prev, Lk_prev = eta, Lk

    trace.eta_sum = eta_sum
    trace.q = q_value(s)
    trace.solution_value = eval_F(problem, solution)
    if chk and trace.iterations:
        n = trace.iterations
        trace.note("metric_sum", _slack(trace.metric_sum, 2.0 * trace.q, AGG_TOL, AGG_TOL))
        trace.note("eta_sum_bound", eta_sum - n**3 / (1000.0 * trace.Lk_sum) * (1.0 - AGG_TOL))
    return solution, trace


def _search_slack(res: SearchResult, y, z, eps) -> float:
    """Slack of whichever search case applies, by direct evaluation at the returned point."""
    x, px = res.x, res.prox_x
    if res.case == "y":
        return float((px - x) @ (x - z)) if np.array_equal(x, y) else -math.inf
    if res.case == "z":
        return -float((px - x) @ (y - x)) if np.array_equal(x, z) else -math.inf
    if not 0.0 < res.t < 1.0:
        return -math.inf
    dy = y - z
    return 3.0 * float(dy @ dy) * eps - abs(float((px - x) @ dy))
