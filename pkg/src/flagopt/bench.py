"""Benchmark driver: reference optima, traced runs, summaries and rate fits."""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .baselines import ALGORITHMS as BASELINES, BaselineConfig, baseline_run, fista_run, ista_run
from .errors import DivergenceError, InvalidArgumentError, ReferenceQualityError
from .flag import FlagConfig, StepTrace, flag_run
from .generators import ProblemDescriptor, generate_problem
from .problem import CompositeProblem, eval_F
from .prox import prox

ALGORITHMS = ("flag",) + BASELINES
CSV_COLUMNS = ("k", "f_val", "gap", "eta_k", "L_k", "q_k", "prox_calls_cum", "elapsed_s")
GAP_FLOOR = 1e-12

# instances used by the lemma suites; logistic saturates on wide boxes, so it gets [-1, 1]
SUITE_DESCRIPTORS = {
    "lasso": ProblemDescriptor("lasso"),
    "logistic_l1": ProblemDescriptor("logistic_l1", box_lower=-1.0, box_upper=1.0),
    "box_qp": ProblemDescriptor("box_qp"),
}


@dataclass(frozen=True)
class ReferenceResult:
    value: float
    x: np.ndarray = field(repr=False)
    residual: float  # ||x - prox(x)||_inf at x
    iterations: int


def reference_optimum(problem: CompositeProblem, ref_iters: int) -> ReferenceResult:
    """Best ``F`` seen over ``ref_iters`` FISTA steps and ``ref_iters // 10`` ISTA polishing steps."""
    if ref_iters < 1:
        raise InvalidArgumentError("ref_iters must be positive")
    x_f, tr_f = fista_run(problem, BaselineConfig("fista", ref_iters))
    polish = max(1, ref_iters // 10)
    x_i, tr_i = ista_run(problem, BaselineConfig("ista", polish, x0=x_f))
    values = np.concatenate([tr_f.column("f_val"), tr_i.column("f_val")])
    best = float(np.min(values))
    if not math.isfinite(best):
        raise DivergenceError("reference run produced nonfinite values")
    residual = float(np.max(np.abs(x_i - prox(problem, x_i))))
    return ReferenceResult(best, x_i, residual, ref_iters + polish)


_REFERENCE_CACHE: dict = {}


def cached_reference(desc: ProblemDescriptor, ref_iters: int,
                     problem: Optional[CompositeProblem] = None) -> ReferenceResult:
    key = (desc, ref_iters)
    if key not in _REFERENCE_CACHE:
        problem = generate_problem(desc) if problem is None else problem
        _REFERENCE_CACHE[key] = reference_optimum(problem, ref_iters)
    return _REFERENCE_CACHE[key]


def floor_gap(gap: float) -> float:
    """Clamp tiny negative gaps to zero; larger ones mean the reference is too weak."""
    if gap < 0:
        if gap >= -GAP_FLOOR:
            return 0.0
        raise ReferenceQualityError(f"iterate beats the reference optimum by {-gap:.3e}")
    return gap


# --------------------------------------------------------------------------
# rate fitting
# --------------------------------------------------------------------------


@dataclass
class RateFit:
    slope: float
    intercept: float = math.nan
    points: int = 0
    status: str = "ok"


def fit_loglog(ks, gaps) -> RateFit:
    """Least-squares slope of ``log(gap)`` against ``log(k)`` over positive gaps."""
    ks = np.asarray(ks, dtype=float)
    gaps = np.asarray(gaps, dtype=float)
    keep = gaps > 0
    if not np.any(keep):
        return RateFit(-math.inf, points=0, status="converged exactly")
    if keep.sum() < 2:
        raise InvalidArgumentError("need at least two positive gaps to fit a rate")
    slope, intercept = np.polyfit(np.log(ks[keep]), np.log(gaps[keep]), 1)
    return RateFit(float(slope), float(intercept), int(keep.sum()))


def fit_rate(trace, burn_in_fraction: float = 0.2, min_points: int = 20) -> RateFit:
    """Log-log slope of the gap column after dropping the first `burn_in_fraction` of rows.

    `trace` is a :class:`StepTrace` with gaps filled in, or a sequence of gaps
    for ``k = 1, 2, ...``. Rows with zero gap are skipped; if every row after
    burn-in is zero the slope is ``-inf`` with status ``"converged exactly"``.
    """
    if not 0 <= burn_in_fraction < 1:
        raise InvalidArgumentError("burn_in_fraction must lie in [0, 1)")
    if isinstance(trace, StepTrace):
        ks = trace.column("k")
        gaps = trace.column("gap")
    else:
        gaps = np.asarray(trace, dtype=float)
        ks = np.arange(1, gaps.size + 1, dtype=float)
    window = ks > burn_in_fraction * ks.size
    ks, gaps = ks[window], gaps[window]
    if np.any(np.isnan(gaps)):
        raise InvalidArgumentError("trace gaps are not filled in")
    positive = int(np.sum(gaps > 0))
    if positive == 0:
        return RateFit(-math.inf, points=0, status="converged exactly")
    if positive < min_points:
        raise InvalidArgumentError(f"only {positive} positive gaps after burn-in; need {min_points}")
    return fit_loglog(ks, gaps)


# --------------------------------------------------------------------------
# traced runs
# --------------------------------------------------------------------------


@dataclass
class RunConfig:
    descriptor: ProblemDescriptor = field(default_factory=ProblemDescriptor)
    algorithm: str = "flag"
    T: int = 500
    delta: float = 1e-8
    ref_iters: int = 50_000
    out_path: Optional[str] = None
    fmt: str = "csv"
    emit_summary: bool = True

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise InvalidArgumentError(f"unknown algorithm {self.algorithm!r}")
        if self.T < 1:
            raise InvalidArgumentError("T must be positive")
        if self.ref_iters < 10 * self.T:
            raise InvalidArgumentError("ref_iters must be at least 10 * T")
        if self.fmt not in ("csv", "json-lines"):
            raise InvalidArgumentError("format must be csv or json-lines")

    def one_line(self) -> str:
        return (f"algo={self.algorithm} T={self.T} delta={self.delta!r} "
                f"ref_iters={self.ref_iters}")


@dataclass
class SummaryRow:
    algorithm: str
    T: int
    iterations: int
    final_gap: float
    q_T: float
    J_B: float
    D: float
    D2: float
    slope: float
    prox_calls: int
    wall_time: float
    status: str

    HEADER = ("algorithm", "T", "iters", "final_gap", "q_T", "J_B", "D", "D2",
              "slope", "prox_calls", "wall_s", "status")

    def cells(self) -> list:
        return [self.algorithm, str(self.T), str(self.iterations), f"{self.final_gap:.3e}",
                _num(self.q_T, ".4f"), _num(self.J_B, ".4f"), _num(self.D, "g"), _num(self.D2, "g"),
                _num(self.slope, ".3f"), str(self.prox_calls), f"{self.wall_time:.3f}", self.status]


def _num(v, spec):
    return "-" if v is None or (isinstance(v, float) and math.isnan(v)) else format(v, spec)


def format_summary(rows: Sequence[SummaryRow]) -> str:
    table = [list(SummaryRow.HEADER)] + [r.cells() for r in rows]
    widths = [max(len(row[i]) for row in table) for i in range(len(table[0]))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in table)


def execute(problem: CompositeProblem, algorithm: str, T: int, delta: float = 1e-8,
            record_history: bool = False):
    """Run one algorithm with default settings; returns ``(solution, trace)``."""
    if algorithm == "flag":
        return flag_run(problem, FlagConfig(T=T, delta=delta, record_history=record_history))
    return baseline_run(problem, BaselineConfig(algorithm, T, delta=delta))


def attach_gaps(trace: StepTrace, f_star: float) -> None:
    for rec in trace.records:
        rec.gap = floor_gap(rec.f_val - f_star)


def _fmt_float(v) -> str:
    if isinstance(v, float) and math.isnan(v):
        return ""
    return repr(float(v)) if isinstance(v, float) else str(v)


def _row_values(rec) -> tuple:
    return (rec.k, rec.f_val, rec.gap, rec.eta, rec.L_k, rec.q, rec.prox_calls, rec.elapsed)


def write_trace(path, trace: StepTrace, comment: str, fmt: str = "csv") -> Path:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    try:
        with open(path, "w", newline="") as fh:
            if fmt == "csv":
                fh.write(",".join(CSV_COLUMNS) + "\n")
                fh.write(f"# {comment}\n")
                for rec in trace.records:
                    fh.write(",".join(_fmt_float(v) for v in _row_values(rec)) + "\n")
            else:
                fh.write(json.dumps({"comment": comment}) + "\n")
                for rec in trace.records:
                    row = dict(zip(CSV_COLUMNS, _row_values(rec)))
                    row = {k: (None if isinstance(v, float) and math.isnan(v) else v)
                           for k, v in row.items()}
                    fh.write(json.dumps(row) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write trace to {path}: {exc}") from exc
    return path


def run_and_trace(config: RunConfig, reference: Optional[ReferenceResult] = None):
    """Run `config`, write its trace (when ``out_path`` is set) and summarize.

    Returns ``(path_or_None, SummaryRow, trace)``. Divergence is reported in
    the summary status rather than raised; a reference beaten by more than
    1e-12 raises :class:`ReferenceQualityError`.
    """
    problem = generate_problem(config.descriptor)
    if reference is None:
        reference = cached_reference(config.descriptor, config.ref_iters, problem)
    f_star = reference.value
    t0 = time.perf_counter()
    try:
        solution, trace = execute(problem, config.algorithm, config.T, config.delta)
        status = trace.status
        final_gap = floor_gap(eval_F(problem, solution) - f_star)
    except DivergenceError as exc:
        trace = exc.trace if exc.trace is not None else StepTrace()
        status = "diverged"
        final_gap = math.inf
    wall = time.perf_counter() - t0
    if status != "diverged":
        attach_gaps(trace, f_star)
    slope = math.nan
    if status != "diverged":
        try:
            slope = fit_rate(trace).slope
        except InvalidArgumentError:
            pass

    comment = (f"{config.descriptor.one_line()} {config.one_line()} "
               f"f_star={f_star!r} ref_residual={reference.residual!r}")
    path = None
    if config.out_path:
        path = write_trace(config.out_path, trace, comment, config.fmt)

    is_flag = config.algorithm == "flag"
    calls = trace.records[-1].prox_calls if trace.records else 0
    row = SummaryRow(config.algorithm, config.T, trace.iterations, final_gap,
                     trace.q if is_flag else math.nan, trace.J_B if is_flag else math.nan,
                     trace.D, trace.D2, slope, calls, wall, status)
    return path, row, trace


def compare(descriptor: ProblemDescriptor, T: int, algorithms: Sequence[str] = ALGORITHMS,
            delta: float = 1e-8, ref_iters: int = 50_000, out_dir=None, fmt: str = "csv",
            jobs: int = 1):
    """Run several algorithms on one instance; returns their summary rows in order."""
    if not descriptor_is_boxed(descriptor):
        algorithms = [a for a in algorithms if a not in ("adagrad", "mirror_descent")]
    reference = cached_reference(descriptor, ref_iters)
    ext = "csv" if fmt == "csv" else "jsonl"
    configs = [RunConfig(descriptor, a, T, delta, ref_iters,
                         None if out_dir is None else str(Path(out_dir) / f"{a}.{ext}"), fmt)
               for a in algorithms]
    return [row for _, row, _ in _map_runs(configs, reference, jobs)]


def descriptor_is_boxed(desc: ProblemDescriptor) -> bool:
    return desc.box_lower is not None


def sweep(descriptor: ProblemDescriptor, algorithm: str, grid: Sequence[int], delta: float = 1e-8,
          ref_iters: Optional[int] = None, out_dir=None, fmt: str = "csv", jobs: int = 1):
    """Final gap for each horizon in `grid` and the log-log slope across horizons."""
    grid = sorted(int(T) for T in grid)
    ref_iters = max(50_000, 10 * grid[-1]) if ref_iters is None else ref_iters
    reference = cached_reference(descriptor, ref_iters)
    ext = "csv" if fmt == "csv" else "jsonl"
    configs = [RunConfig(descriptor, algorithm, T, delta, ref_iters,
                         None if out_dir is None else str(Path(out_dir) / f"{algorithm}_T{T}.{ext}"), fmt)
               for T in grid]
    rows = [row for _, row, _ in _map_runs(configs, reference, jobs)]
    fit = fit_loglog([r.T for r in rows], [r.final_gap for r in rows])
    return rows, fit


def _run_one(args):
    config, reference = args
    path, row, _ = run_and_trace(config, reference)
    return path, row, None


def _map_runs(configs, reference, jobs):
    if jobs <= 1 or len(configs) <= 1:
        return [_run_one((c, reference)) for c in configs]
    from concurrent.futures import ProcessPoolExecutor
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_one, [(c, reference) for c in configs]))
