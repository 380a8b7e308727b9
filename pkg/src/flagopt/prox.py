"""Exact proximal, gradient-mapping and diagonal mirror steps.

All three are coordinate-wise closed forms, valid because the nonsmooth
part and the feasible set are separable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .problem import CompositeProblem, FeasibleSet, _as_vector

UNIT_NORM_TOL = 1e-9


def soft_threshold(v, thresh):
    return np.sign(v) * np.maximum(np.abs(v) - thresh, 0.0)


def prox(problem: CompositeProblem, x) -> np.ndarray:
    """Minimizer over the set of ``h(y) + L/2 ||y - (x - grad f(x) / L)||^2``."""
    x = _as_vector(x, problem.dim)
    L = problem.lipschitz
    v = x - problem.smooth.grad(x) / L
    if problem.nonsmooth.kind == "l1":
        v = soft_threshold(v, problem.nonsmooth.weight / L)
    return problem.set.clip(v)


def gradient_mapping(problem: CompositeProblem, x, prox_x=None) -> np.ndarray:
    """``p = -L (prox(x) - x)``; pass `prox_x` to reuse a computed prox."""
    if prox_x is None:
        prox_x = prox(problem, x)
    return -problem.lipschitz * (prox_x - np.asarray(x, dtype=float))


@dataclass(frozen=True, eq=False)
class MetricDiag:
    """Diagonal metric ``S = diag(s) + delta I``."""

    s: np.ndarray
    delta: float

    def __post_init__(self):
        if not self.delta >= 0 or np.any(self.s < 0):
            raise InvalidArgumentError("metric needs s >= 0 and delta >= 0")

    @property
    def diag(self) -> np.ndarray:
        return self.s + self.delta

    def norm_sq(self, v) -> float:
        return float(np.sum(self.diag * v * v))

    def dual_norm_sq(self, v) -> float:
        """``v^T S^{-1} v``; coordinates with ``v_i = 0`` contribute nothing."""
        v2 = np.asarray(v, dtype=float) ** 2
        with np.errstate(divide="ignore"):
            terms = np.divide(v2, self.diag, out=np.zeros_like(v2), where=v2 != 0)
        return float(np.sum(terms))


def mirror_step(z, p, eta: float, metric: MetricDiag, feasible: FeasibleSet) -> np.ndarray:
    """``argmin_{u in set} <eta p, u - z> + 1/2 ||u - z||_S^2``.

    Coordinates with ``S_ii = 0`` (only possible with ``delta = 0``) take no
    step; their gradient weight is zero whenever ``s`` was built from ``p``.
    """
    z = np.asarray(z, dtype=float)
    p = np.asarray(p, dtype=float)
    if not eta > 0:
        raise InvalidArgumentError("eta must be positive")
    diag = metric.diag
    with np.errstate(divide="ignore", invalid="ignore"):
        step = np.where(diag > 0, eta * p / np.where(diag > 0, diag, 1.0), 0.0)
    return feasible.clip(z - step)


def metric_update(accumulator, g):
    """Append unit column `g` to the implicit matrix ``G``; return ``(accumulator', s)``.

    ``accumulator[i]`` holds the squared norm of row ``i`` of ``G`` and ``s`` its
    square root, so ``G`` itself is never stored.
    """
    g = np.asarray(g, dtype=float)
    if abs(np.linalg.norm(g) - 1.0) > UNIT_NORM_TOL:
        raise InvalidArgumentError("g must have unit 2-norm")
    acc = np.asarray(accumulator, dtype=float) + g * g
    return acc, np.sqrt(acc)
