"""Accelerated adaptive proximal optimization (FLAG) with baselines and lemma checks."""

from .baselines import BaselineConfig, baseline_run
from .bench import RunConfig, SummaryRow, fit_rate, reference_optimum, run_and_trace
from .errors import (ConvergenceError, DivergenceError, InvalidArgumentError,
                     ReferenceQualityError)
from .flag import FlagConfig, StepTrace, binary_search, flag_run
from .generators import ProblemDescriptor, generate_problem
from .problem import (CompositeProblem, FeasibleSet, LeastSquares, Logistic, NonsmoothPart,
                      Quadratic, estimate_lipschitz, eval_F, project)
from .prox import gradient_mapping, mirror_step, prox

__all__ = [
    "BaselineConfig", "baseline_run", "RunConfig", "SummaryRow", "fit_rate", "reference_optimum",
    "run_and_trace", "ConvergenceError", "DivergenceError", "InvalidArgumentError",
    "ReferenceQualityError", "FlagConfig", "StepTrace", "binary_search", "flag_run",
    "ProblemDescriptor", "generate_problem", "CompositeProblem", "FeasibleSet", "LeastSquares",
    "Logistic", "NonsmoothPart", "Quadratic", "estimate_lipschitz", "eval_F", "project",
    "gradient_mapping", "mirror_step", "prox",
]
