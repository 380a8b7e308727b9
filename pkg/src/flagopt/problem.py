"""Composite objectives ``F = f + h`` over simple convex sets.

Every solver in the package touches a problem only through
:class:`CompositeProblem`: the smooth part supplies values and gradients,
the nonsmooth part is zero or a weighted l1 norm, and the feasible set is
either the full space or an axis-aligned box. Both restrictions keep the
proximal and mirror steps exact and coordinate-wise.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConvergenceError, InvalidArgumentError

LIPSCHITZ_REL_TOL = 1e-6
LIPSCHITZ_SAFETY = 1.01


def _as_vector(x, dim: int, name: str = "x") -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != dim:
        raise InvalidArgumentError(f"{name} must have shape ({dim},), got {x.shape}")
    return x


# --------------------------------------------------------------------------
# smooth parts
# --------------------------------------------------------------------------


class LeastSquares:
    """``f(x) = 1/2 ||A x - b||^2``."""

    kind = "least_squares"
    curvature_scale = 1.0

    def __init__(self, A, b):
        self.A = np.asarray(A, dtype=float)
        self.b = np.asarray(b, dtype=float)
        if self.A.ndim != 2 or self.b.shape != (self.A.shape[0],):
            raise InvalidArgumentError("A must be (n, d) and b must be (n,)")

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    def value(self, x):
        r = self.A @ x - self.b
        return 0.5 * float(r @ r)

    def grad(self, x):
        return self.A.T @ (self.A @ x - self.b)

    def curvature_matvec(self, v):
        return self.A.T @ (self.A @ v)


class Logistic:
    """``f(x) = sum_i log(1 + exp(-y_i a_i^T x))`` with labels ``y_i`` in {-1, 1}.

    The Hessian is ``A^T diag(w) A`` with ``w <= 1/4``, so ``L = sigma_max(A)^2 / 4``.
    """

    kind = "logistic"
    curvature_scale = 0.25

    def __init__(self, A, labels):
        self.A = np.asarray(A, dtype=float)
        self.labels = np.asarray(labels, dtype=float)
        if self.A.ndim != 2 or self.labels.shape != (self.A.shape[0],):
            raise InvalidArgumentError("A must be (n, d) and labels must be (n,)")
        if not np.all(np.abs(self.labels) == 1.0):
            raise InvalidArgumentError("labels must be +1 or -1")

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    def value(self, x):
        margins = self.labels * (self.A @ x)
        return float(np.sum(np.logaddexp(0.0, -margins)))

    def grad(self, x):
        margins = self.labels * (self.A @ x)
        # sigmoid(-m) without overflow
        weights = np.exp(-np.logaddexp(0.0, margins))
        return -self.A.T @ (self.labels * weights)

    def curvature_matvec(self, v):
        return self.A.T @ (self.A @ v)


class Quadratic:
    """``f(x) = 1/2 x^T Q x + c^T x`` with ``Q`` symmetric positive semidefinite."""

    kind = "quadratic"
    curvature_scale = 1.0

    def __init__(self, Q, c):
        self.Q = np.asarray(Q, dtype=float)
        self.c = np.asarray(c, dtype=float)
        d = self.c.shape[0]
        if self.Q.shape != (d, d):
            raise InvalidArgumentError("Q must be (d, d) and c must be (d,)")
        if not np.allclose(self.Q, self.Q.T):
            raise InvalidArgumentError("Q must be symmetric")

    @property
    def dim(self) -> int:
        return self.c.shape[0]

    def value(self, x):
        return 0.5 * float(x @ (self.Q @ x)) + float(self.c @ x)

    def grad(self, x):
        return self.Q @ x + self.c

    def curvature_matvec(self, v):
        return self.Q @ v


SMOOTH_KINDS = (LeastSquares, Logistic, Quadratic)


# --------------------------------------------------------------------------
# nonsmooth parts and feasible sets
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class NonsmoothPart:
    """Separable nonsmooth term: ``kind='zero'`` or ``kind='l1'`` (``weight * ||x||_1``)."""

    kind: str = "zero"
    weight: float = 0.0

    def __post_init__(self):
        if self.kind not in ("zero", "l1"):
            raise InvalidArgumentError(f"unsupported nonsmooth kind {self.kind!r}")
        if not (self.weight >= 0.0 and math.isfinite(self.weight)):
            raise InvalidArgumentError("weight must be finite and nonnegative")
        if self.kind == "zero" and self.weight != 0.0:
            raise InvalidArgumentError("zero part cannot carry a weight")

    @classmethod
    def l1(cls, weight: float) -> "NonsmoothPart":
        return cls("l1", float(weight))

    def value(self, x) -> float:
        if self.kind == "zero":
            return 0.0
        return self.weight * float(np.sum(np.abs(x)))

    def subgradient(self, x):
        # sign(0) = 0 is a valid element of the l1 subdifferential
        if self.kind == "zero":
            return np.zeros_like(x)
        return self.weight * np.sign(x)


@dataclass(frozen=True, eq=False)
class FeasibleSet:
    """Either the full space (``kind='full_space'``) or a box ``[lower, upper]``."""

    kind: str = "full_space"
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind == "full_space":
            if self.lower is not None or self.upper is not None:
                raise InvalidArgumentError("full_space takes no bounds")
            return
        if self.kind != "box":
            raise InvalidArgumentError(f"unsupported set kind {self.kind!r}")
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.ndim != 1 or lo.shape != hi.shape:
            raise InvalidArgumentError("box bounds must be vectors of equal length")
        if not np.all(lo < hi) or not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise InvalidArgumentError("box needs finite bounds with lower < upper")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def full_space(cls) -> "FeasibleSet":
        return cls("full_space")

    @classmethod
    def box(cls, lower, upper, dim: Optional[int] = None) -> "FeasibleSet":
        if dim is not None:
            lower = np.broadcast_to(np.asarray(lower, dtype=float), (dim,)).copy()
            upper = np.broadcast_to(np.asarray(upper, dtype=float), (dim,)).copy()
        return cls("box", np.array(lower, dtype=float), np.array(upper, dtype=float))

    @property
    def is_box(self) -> bool:
        return self.kind == "box"

    def contains(self, x, tol: float = 0.0) -> bool:
        if not self.is_box:
            return bool(np.all(np.isfinite(x)))
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def clip(self, v):
        if not self.is_box:
            return v
        return np.clip(v, self.lower, self.upper)

    def sample(self, rng: np.random.Generator, size=None):
        """Uniform samples from the box."""
        if self.is_box:
            shape = self.lower.shape if size is None else (size,) + self.lower.shape
            return rng.uniform(self.lower, self.upper, size=shape)
        raise InvalidArgumentError("sampling from full_space needs an explicit dimension")


def project(feasible: FeasibleSet, v) -> np.ndarray:
    """Euclidean projection onto `feasible` (coordinate-wise clamp for boxes)."""
    v = np.asarray(v, dtype=float)
    if feasible.is_box:
        _as_vector(v, feasible.lower.shape[0], "v")
    return feasible.clip(v)


def diameters(feasible: FeasibleSet) -> tuple[float, float]:
    """Squared diameters ``(D, D2)`` in the infinity- and 2-norm.

    Both are ``inf`` on the full space.
    """
    if not feasible.is_box:
        return math.inf, math.inf
    widths = feasible.upper - feasible.lower
    return float(np.max(widths) ** 2), float(np.sum(widths**2))


# --------------------------------------------------------------------------
# Lipschitz constant
# --------------------------------------------------------------------------


def power_iteration(matvec, dim: int, rel_tol: float = LIPSCHITZ_REL_TOL,
                    max_iter: int = 100_000, seed: int = 0) -> float:
    """Largest eigenvalue of a symmetric PSD operator given by `matvec`.

    Stops when the Rayleigh quotient changes by less than ``1e-3 * rel_tol``
    relative; raises :class:`ConvergenceError` after `max_iter` steps.
    """
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dim) + 1.0
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = matvec(v)
        lam_new = float(v @ w)
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0
        v = w / nrm
        if abs(lam_new - lam) <= 1e-3 * rel_tol * abs(lam_new):
            return lam_new
        lam = lam_new
    raise ConvergenceError(f"power iteration did not converge in {max_iter} steps",
                           last_iterate=v)


def _lipschitz_of(smooth, rel_tol: float, max_iter: int) -> float:
    if not isinstance(smooth, SMOOTH_KINDS):
        raise InvalidArgumentError(f"cannot estimate L for {type(smooth).__name__}")
    lam = power_iteration(smooth.curvature_matvec, smooth.dim, rel_tol, max_iter)
    return smooth.curvature_scale * lam


# --------------------------------------------------------------------------
# the composite problem
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CompositeProblem:
    """``min_{x in set} f(x) + h(x)`` with an ``L``-Lipschitz gradient of ``f``.

    Use :meth:`build` to construct; it checks the supported class and fills
    in ``lipschitz`` from power iteration (times a 1.01 safety factor) when
    not given.
    """

    smooth: object
    nonsmooth: NonsmoothPart
    set: FeasibleSet
    lipschitz: float
    descriptor: Optional[dict] = field(default=None, compare=False)

    @classmethod
    def build(cls, smooth, nonsmooth: Optional[NonsmoothPart] = None,
              feasible: Optional[FeasibleSet] = None, lipschitz: Optional[float] = None,
              descriptor: Optional[dict] = None) -> "CompositeProblem":
        if not isinstance(smooth, SMOOTH_KINDS):
            raise InvalidArgumentError(f"unsupported smooth part {type(smooth).__name__}")
        nonsmooth = NonsmoothPart() if nonsmooth is None else nonsmooth
        feasible = FeasibleSet.full_space() if feasible is None else feasible
        if not isinstance(nonsmooth, NonsmoothPart) or not isinstance(feasible, FeasibleSet):
            raise InvalidArgumentError("nonsmooth/feasible must be NonsmoothPart/FeasibleSet")
        if feasible.is_box and feasible.lower.shape[0] != smooth.dim:
            raise InvalidArgumentError("box dimension does not match the smooth part")
        if lipschitz is None:
            lipschitz = LIPSCHITZ_SAFETY * _lipschitz_of(smooth, LIPSCHITZ_REL_TOL, 100_000)
        if not (lipschitz > 0 and math.isfinite(lipschitz)):
            raise InvalidArgumentError("lipschitz must be positive and finite")
        return cls(smooth, nonsmooth, feasible, float(lipschitz), descriptor)

    @property
    def dim(self) -> int:
        return self.smooth.dim

    def smooth_value(self, x) -> float:
        return self.smooth.value(x)

    def smooth_grad(self, x) -> np.ndarray:
        return self.smooth.grad(x)

    def with_lipschitz(self, lipschitz: float) -> "CompositeProblem":
        """Copy with a different ``L`` (used for negative controls)."""
        return dataclasses.replace(self, lipschitz=float(lipschitz))

    def initial_point(self) -> np.ndarray:
        return project(self.set, np.zeros(self.dim))


def eval_F(problem: CompositeProblem, x) -> float:
    x = _as_vector(x, problem.dim)
    return problem.smooth.value(x) + problem.nonsmooth.value(x)


def estimate_lipschitz(problem: CompositeProblem, rel_tol: float = LIPSCHITZ_REL_TOL,
                       max_iter: int = 100_000) -> float:
    """Power-iteration estimate of the gradient Lipschitz constant (no safety factor)."""
    if not rel_tol > 0:
        raise InvalidArgumentError("rel_tol must be positive")
    return _lipschitz_of(problem.smooth, rel_tol, max_iter)
