"""Seeded problem instances, reproducible from a small text descriptor.

A descriptor is plain ``key = value`` text::

    generator = lasso
    seed = 7
    n = 50
    d = 20
    lambda = 0.1
    box_lower = -10
    box_upper = 10

``box_lower``/``box_upper`` set to ``none`` (or omitted) mean the full space.
Instances are never serialized; regenerating from the descriptor is
bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import Optional

import numpy as np

from .errors import InvalidArgumentError
from .problem import (CompositeProblem, FeasibleSet, LeastSquares, Logistic,
                      NonsmoothPart, Quadratic)

GENERATORS = ("lasso", "logistic_l1", "box_qp")


@dataclass(frozen=True)
class ProblemDescriptor:
    generator: str = "lasso"
    seed: int = 7
    n: int = 50
    d: int = 20
    lam: float = 0.1
    box_lower: Optional[float] = -10.0
    box_upper: Optional[float] = 10.0

    def __post_init__(self):
        if self.generator not in GENERATORS:
            raise InvalidArgumentError(f"unknown generator {self.generator!r}; "
                                       f"expected one of {', '.join(GENERATORS)}")
        if self.n < 1 or self.d < 1:
            raise InvalidArgumentError("n and d must be positive")
        if self.lam < 0:
            raise InvalidArgumentError("lambda must be nonnegative")
        if (self.box_lower is None) != (self.box_upper is None):
            raise InvalidArgumentError("give both box bounds or neither")
        if self.box_lower is not None and not self.box_lower < self.box_upper:
            raise InvalidArgumentError("box_lower must be below box_upper")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["lambda"] = out.pop("lam")
        return out

    def to_text(self) -> str:
        return "".join(f"{k} = {_fmt(v)}\n" for k, v in self.to_dict().items())

    def one_line(self) -> str:
        return " ".join(f"{k}={_fmt(v)}" for k, v in self.to_dict().items())

    @classmethod
    def from_text(cls, text: str) -> "ProblemDescriptor":
        raw = {}
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidArgumentError(f"bad descriptor line {line!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            raw[key] = value
        return cls.from_mapping(raw)

    @classmethod
    def from_mapping(cls, raw: dict) -> "ProblemDescriptor":
        raw = dict(raw)
        if "lambda" in raw:
            raw["lam"] = raw.pop("lambda")
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise InvalidArgumentError(f"unknown descriptor keys: {sorted(unknown)}")
        kw = {}
        for key, value in raw.items():
            if key == "generator":
                kw[key] = str(value)
            elif key in ("seed", "n", "d"):
                kw[key] = int(value)
            elif key in ("box_lower", "box_upper"):
                kw[key] = None if value is None or str(value).lower() == "none" else float(value)
            else:
                kw[key] = float(value)
        return cls(**kw)


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, float):
        return str(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)
    return str(v)


def _feasible(desc: ProblemDescriptor) -> FeasibleSet:
    if desc.box_lower is None:
        return FeasibleSet.full_space()
    return FeasibleSet.box(desc.box_lower, desc.box_upper, dim=desc.d)


def generate_problem(desc: ProblemDescriptor) -> CompositeProblem:
    """Instantiate a problem from `desc`.

    ``lasso``
        ``1/2 ||A x - b||^2 + lambda ||x||_1`` with standard normal ``A`` (n x d)
        and ``b = A x_true + 0.1 noise`` for a sparse ``x_true``.
    ``logistic_l1``
        logistic loss on standard normal features with labels from a sparse
        planted separator (10% flipped), plus ``lambda ||x||_1``.
    ``box_qp``
        ``1/2 x^T diag(1..d) x + c^T x`` with standard normal ``c`` scaled by
        ``d``, so several coordinates hit the box; ``lambda`` adds an l1 term
        when positive. ``n`` is ignored.

    ``L`` comes from power iteration with a 1.01 safety factor.
    """
    if not isinstance(desc, ProblemDescriptor):
        raise InvalidArgumentError("expected a ProblemDescriptor")
    rng = np.random.default_rng(desc.seed)
    n, d = desc.n, desc.d
    h = NonsmoothPart.l1(desc.lam) if desc.lam > 0 else NonsmoothPart()

    if desc.generator == "lasso":
        A = rng.standard_normal((n, d))
        x_true = _sparse_vector(rng, d)
        b = A @ x_true + 0.1 * rng.standard_normal(n)
        smooth = LeastSquares(A, b)
    elif desc.generator == "logistic_l1":
        A = rng.standard_normal((n, d))
        x_true = _sparse_vector(rng, d)
        labels = np.where(A @ x_true >= 0, 1.0, -1.0)
        flip = rng.random(n) < 0.1
        labels[flip] *= -1.0
        smooth = Logistic(A, labels)
    else:
        Q = np.diag(np.arange(1, d + 1, dtype=float))
        c = d * rng.standard_normal(d)
        smooth = Quadratic(Q, c)

    return CompositeProblem.build(smooth, h, _feasible(desc), descriptor=desc.to_dict())


def _sparse_vector(rng, d: int) -> np.ndarray:
    k = max(1, int(math.ceil(0.2 * d)))
    x = np.zeros(d)
    support = rng.choice(d, size=k, replace=False)
    x[support] = rng.standard_normal(k)
    return x
