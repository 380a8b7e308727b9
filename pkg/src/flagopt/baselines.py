"""Reference optimizers sharing FLAG's problem interface and trace format.

ISTA and FISTA use the same exact prox as FLAG. AdaGrad and mirror descent
are projected subgradient methods on ``F`` (subgradient ``sign(x)`` for the
l1 term, ``sign(0) = 0``) and report the running average of their iterates.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DivergenceError, InvalidArgumentError
from .flag import IterateRecord, StepTrace
from .problem import CompositeProblem, _as_vector, diameters, eval_F
from .prox import prox

ALGORITHMS = ("fista", "ista", "adagrad", "mirror_descent")


@dataclass
class BaselineConfig:
    algorithm: str
    T: int
    step_scale: Optional[float] = None  # adagrad: sqrt(D); mirror descent: online sqrt(D2 / sum ||g||^2)
    delta: float = 1e-8
    average_output: bool = True
    x0: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise InvalidArgumentError(f"unknown baseline {self.algorithm!r}")
        if int(self.T) != self.T or self.T < 1:
            raise InvalidArgumentError("T must be a positive integer")
        if self.step_scale is not None and not self.step_scale > 0:
            raise InvalidArgumentError("step_scale must be positive")
        if not self.delta > 0:
            raise InvalidArgumentError("delta must be positive")


def _start(problem, config):
    if config.x0 is None:
        return problem.initial_point()
    x0 = _as_vector(config.x0, problem.dim, "x0").copy()
    if not problem.set.contains(x0):
        raise InvalidArgumentError("x0 must be feasible")
    return x0


def _new_trace(problem):
    D, D2 = diameters(problem.set)
    return StepTrace(D=D, D2=D2, lipschitz=problem.lipschitz, dim=problem.dim)


def _record(trace, k, f_val, step, calls, t0):
    if not math.isfinite(f_val):
        trace.status = "diverged"
        raise DivergenceError(f"nonfinite objective at iteration {k}", trace)
    trace.records.append(IterateRecord(k, f_val, math.nan, step, math.nan, math.nan, calls,
                                       time.perf_counter() - t0))
    trace.iterations = k


def ista_run(problem: CompositeProblem, config: BaselineConfig):
    """Proximal gradient ``x_{k+1} = prox(x_k)`` with step ``1/L``."""
    x = _start(problem, config)
    trace = _new_trace(problem)
    t0 = time.perf_counter()
    for k in range(1, config.T + 1):
        x = prox(problem, x)
        _record(trace, k, eval_F(problem, x), 1.0 / problem.lipschitz, k, t0)
    trace.solution_value = eval_F(problem, x)
    return x, trace


def fista_momentum(t: float) -> float:
    """``t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2``."""
    return 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))


def fista_run(problem: CompositeProblem, config: BaselineConfig):
    """FISTA with the standard momentum sequence starting at ``t_1 = 1``."""
    x = _start(problem, config)
    x_prev = x
    w = x
    t = 1.0
    trace = _new_trace(problem)
    t0 = time.perf_counter()
    for k in range(1, config.T + 1):
        x = prox(problem, w)
        t_next = fista_momentum(t)
        w = x + ((t - 1.0) / t_next) * (x - x_prev)
        x_prev = x
        t = t_next
        _record(trace, k, eval_F(problem, x), 1.0 / problem.lipschitz, k, t0)
    trace.solution_value = eval_F(problem, x)
    return x, trace


def subgradient(problem: CompositeProblem, x) -> np.ndarray:
    return problem.smooth.grad(x) + problem.nonsmooth.subgradient(x)


def _require_box(problem, name):
    if not problem.set.is_box:
        raise InvalidArgumentError(f"{name} needs a box-constrained problem")


def adagrad_run(problem: CompositeProblem, config: BaselineConfig):
    """Diagonal AdaGrad with projection onto the box.

    ``x_{k+1} = clip(x_k - step_scale * g_k / (sqrt(sum_j g_j^2) + delta))``.
    For a diagonal metric the weighted projection onto a box is the same
    coordinate-wise clamp as the Euclidean one.
    """
    _require_box(problem, "adagrad")
    D, _ = diameters(problem.set)
    scale = math.sqrt(D) if config.step_scale is None else config.step_scale
    x = _start(problem, config)
    acc = np.zeros(problem.dim)
    avg = np.zeros(problem.dim)
    trace = _new_trace(problem)
    trace.delta = config.delta
    t0 = time.perf_counter()
    for k in range(1, config.T + 1):
        g = subgradient(problem, x)
        acc += g * g
        x = problem.set.clip(x - scale * g / (np.sqrt(acc) + config.delta))
        avg += (x - avg) / k
        out = avg if config.average_output else x
        _record(trace, k, eval_F(problem, out), scale, 0, t0)
    out = avg if config.average_output else x
    trace.solution_value = eval_F(problem, out)
    return out.copy(), trace


def mirror_descent_run(problem: CompositeProblem, config: BaselineConfig):
    """Euclidean mirror descent (projected subgradient) with steps ``c / sqrt(k)``.

    Without an explicit `step_scale`, ``c = sqrt(D2 / mean_j ||g_j||^2)`` is
    updated online, i.e. the step is ``sqrt(D2 / sum_j ||g_j||^2)``.
    """
    _require_box(problem, "mirror_descent")
    _, D2 = diameters(problem.set)
    x = _start(problem, config)
    avg = np.zeros(problem.dim)
    sq_sum = 0.0
    trace = _new_trace(problem)
    t0 = time.perf_counter()
    for k in range(1, config.T + 1):
        g = subgradient(problem, x)
        sq_sum += float(g @ g)
        if config.step_scale is None:
            step = math.sqrt(D2 / sq_sum) if sq_sum > 0 else 0.0
        else:
            step = config.step_scale / math.sqrt(k)
        x = problem.set.clip(x - step * g)
        avg += (x - avg) / k
        out = avg if config.average_output else x
        _record(trace, k, eval_F(problem, out), step, 0, t0)
    out = avg if config.average_output else x
    trace.solution_value = eval_F(problem, out)
    return out.copy(), trace


RUNNERS = {
    "fista": fista_run,
    "ista": ista_run,
    "adagrad": adagrad_run,
    "mirror_descent": mirror_descent_run,
}


def baseline_run(problem: CompositeProblem, config: BaselineConfig):
    return RUNNERS[config.algorithm](problem, config)
