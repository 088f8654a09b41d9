"""Two-level black-box evaluation and parameter tuning.

One evaluation solves the parameterized high-level model, extracts the
decisions shared with the low level, solves every fixed-decision low-level
sub-model, and reports the weighted true objective (minimize orientation;
maximize models are negated).  Any infeasible or incumbent-less stage maps
to a large positive sentinel so the derivative-free tuner can keep going.

``tune`` drives a DFO over the parameter box recording every unique
evaluation (bit-identical parameter vectors are served from a cache),
``transfer_tune`` restricts the box around a previously tuned vector, and
``emit_trace`` writes the plot-ready CSV.
"""

from __future__ import annotations

import csv
import dataclasses
import itertools
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .dfo import BoxDomain, DfoConfig, DomainError, run_dfo
from .milp import SolveReport, solve_model
from .model import ModelInstance, Sense, Solution, SolveOptions, Status

__all__ = [
    "TwoLevelProblem",
    "EvalResult",
    "TuningTrace",
    "evaluate",
    "tune",
    "transfer_tune",
    "emit_trace",
    "read_trace",
    "SENTINEL",
]

SENTINEL = 1e10

_USABLE = (Status.OPTIMAL, Status.FEASIBLE_GAP)


@dataclass
class TwoLevelProblem:
    """The pair of model builders wrapped as a black box over parameters.

    ``build_high(rho)`` returns the parameterized high-level model;
    ``extract(model, solution)`` pulls the decisions to pin; ``build_lows``
    returns weighted low-level sub-models for those decisions.  Weights must
    be positive and sum to 1.  The sentinel must exceed any attainable true
    objective (the problem author's responsibility).
    """

    bounds: BoxDomain
    build_high: Callable[[np.ndarray], ModelInstance]
    extract: Callable[[ModelInstance, Solution], Any]
    build_lows: Callable[[Any], Sequence[tuple[float, ModelInstance]]]
    sentinel: float = SENTINEL
    high_options: SolveOptions = SolveOptions()
    low_options: SolveOptions = SolveOptions()
    # tighter options for the one extra re-solve of the best point
    final_low_options: SolveOptions | None = None


@dataclass
class EvalResult:
    """One black-box evaluation: parameters in, true objective out."""

    rho: tuple[float, ...]
    requested_rho: tuple[float, ...]
    clipped: bool
    objective: float
    feasible: bool
    decision: Any
    high_report: SolveReport | None
    low_reports: list[SolveReport]
    time_high: float
    time_low: float
    index: int = 0


@dataclass
class TuningTrace:
    """Every evaluation of one tuning run, in request order."""

    results: list[EvalResult]
    seed: int
    dfo_name: str
    budget: int
    final: EvalResult | None = None
    restricted_box: BoxDomain | None = None

    @property
    def best(self) -> EvalResult:
        # earliest evaluation wins ties
        return min(self.results, key=lambda r: (r.objective, r.index))

    def best_so_far(self) -> list[float]:
        out, cur = [], math.inf
        for r in self.results:
            cur = min(cur, r.objective)
            out.append(cur)
        return out


def _oriented(report: SolveReport, model: ModelInstance) -> float:
    obj = report.incumbent.objective
    return -obj if model.sense is Sense.MAXIMIZE else obj


def evaluate(
    problem: TwoLevelProblem, rho: Sequence[float], index: int = 0, requested: Sequence[float] | None = None
) -> EvalResult:
    """One pass through the hierarchy at parameters ``rho``.

    ``rho`` must lie inside the declared box (points outside are a caller
    error, distinct from model infeasibility, which yields the sentinel).
    """
    problem.bounds.require(rho)
    rho = np.asarray(rho, dtype=float)
    requested = tuple(float(x) for x in (rho if requested is None else requested))
    rho_t = tuple(float(x) for x in rho)
    clipped = requested != rho_t

    t0 = time.perf_counter()
    high_model = problem.build_high(rho)
    high_report = solve_model(high_model, problem.high_options)
    t_high = time.perf_counter() - t0
    if high_report.status not in _USABLE:
        return EvalResult(
            rho_t, requested, clipped, problem.sentinel, False, None, high_report, [], t_high, 0.0, index
        )

    decision = problem.extract(high_model, high_report.incumbent)
    t1 = time.perf_counter()
    low_reports: list[SolveReport] = []
    objective = 0.0
    feasible = True
    for weight, low_model in problem.build_lows(decision):
        rep = solve_model(low_model, problem.low_options)
        low_reports.append(rep)
        if rep.status not in _USABLE:
            feasible = False
            objective = problem.sentinel
            break
        objective += weight * _oriented(rep, low_model)
    t_low = time.perf_counter() - t1
    return EvalResult(
        rho_t, requested, clipped, objective, feasible, decision, high_report, low_reports, t_high, t_low, index
    )


class _BudgetExhausted(Exception):
    pass


class _CachedObjective:
    """Clipping, caching, budgeted front-end handed to the DFO."""

    def __init__(self, problem: TwoLevelProblem, budget: int, threads: int):
        self.problem = problem
        self.budget = budget
        self.threads = max(1, threads)
        self.cache: dict[tuple[float, ...], EvalResult] = {}
        self.results: list[EvalResult] = []
        self.lock = threading.Lock()
        self.next_index = 0

    def _admit(self, x) -> tuple[tuple[float, ...], np.ndarray]:
        clipped = self.problem.bounds.clip(x)
        return tuple(float(c) for c in clipped), clipped

    def _reserve(self, n: int) -> tuple[int, bool]:
        """Claim up to n evaluation slots; returns (start_index, all_granted)."""
        with self.lock:
            grant = min(n, self.budget - self.next_index)
            start = self.next_index
            self.next_index += grant
            return start, grant

    def evaluate_batch(self, points: list[np.ndarray]) -> list[float]:
        keys = []
        fresh: dict[tuple[float, ...], np.ndarray] = {}
        for p in points:
            key, clipped = self._admit(p)
            keys.append((key, tuple(float(c) for c in np.asarray(p, dtype=float))))
            if key not in self.cache and key not in fresh:
                fresh[key] = clipped
        todo = list(fresh.items())
        start, grant = self._reserve(len(todo))
        runnable = todo[:grant]

        def run(k: int) -> EvalResult:
            key, clipped = runnable[k]
            return evaluate(self.problem, clipped, index=start + k, requested=key)

        if runnable:
            if self.threads > 1 and len(runnable) > 1:
                with ThreadPoolExecutor(max_workers=self.threads) as pool:
                    evaluated = list(pool.map(run, range(len(runnable))))
            else:
                evaluated = [run(k) for k in range(len(runnable))]
            with self.lock:
                for res in evaluated:
                    self.cache[res.rho] = res
                    self.results.append(res)
        if grant < len(todo):
            raise _BudgetExhausted()
        return [self.cache[key].objective for key, _ in keys]

    def __call__(self, x: np.ndarray) -> float:
        return self.evaluate_batch([x])[0]


def tune(
    problem: TwoLevelProblem,
    config: DfoConfig,
    initial_rho: Sequence[float] | None = None,
    threads: int = 1,
) -> TuningTrace:
    """Drive the configured DFO over the box, recording every evaluation.

    The budget counts unique black-box evaluations: repeated parameter
    vectors are served from the cache without consuming budget.  After the
    search, the best point is re-solved once at the problem's tighter final
    options when those are set.
    """
    if initial_rho is not None:
        problem.bounds.require(initial_rho)
    front = _CachedObjective(problem, config.budget, threads)
    # let the DFO run until the unique-evaluation budget is used up
    dfo_config = dataclasses.replace(config, budget=max(config.budget * 50, config.budget + 8))
    try:
        run_dfo(front, problem.bounds, dfo_config, x0=initial_rho, batch=front.evaluate_batch)
    except _BudgetExhausted:
        pass
    results = sorted(front.results, key=lambda r: r.index)
    trace = TuningTrace(results, config.seed, config.algorithm, config.budget)
    if problem.final_low_options is not None and results:
        best = trace.best
        if best.feasible:
            tight = dataclasses.replace(problem, low_options=problem.final_low_options)
            trace.final = evaluate(tight, np.array(best.rho), index=len(results))
    return trace


def transfer_tune(
    problem: TwoLevelProblem,
    prior_best: Sequence[float],
    range_fraction: float = 0.1,
    budget: int = 20,
    seed: int = 0,
    algorithm: str = "pattern",
    threads: int = 1,
    config: DfoConfig | None = None,
) -> TuningTrace:
    """Re-tune inside a small box centered on parameters tuned elsewhere.

    The search box is the original box intersected with a per-dimension
    hypercube whose side is ``range_fraction`` of that dimension's width,
    centered at ``prior_best``; the center is the start point.
    """
    problem.bounds.require(prior_best)
    sub = problem.bounds.shrink_around(prior_best, range_fraction)
    restricted = dataclasses.replace(problem, bounds=sub)
    if config is None:
        config = DfoConfig(algorithm=algorithm, budget=budget, seed=seed)
    else:
        config = dataclasses.replace(config, algorithm=algorithm, budget=budget, seed=seed)
    trace = tune(restricted, config, initial_rho=sub.clip(prior_best), threads=threads)
    trace.restricted_box = sub
    return trace


def emit_trace(trace: TuningTrace, path) -> None:
    """Plot-ready CSV: one row per evaluation plus a running best column."""
    if not trace.results:
        raise ValueError("cannot emit an empty trace")
    dim = len(trace.results[0].rho)
    header = (
        ["evaluation"]
        + [f"rho_{k + 1}" for k in range(dim)]
        + ["objective", "feasible", "best_so_far", "cumulative_wall_time"]
    )
    best = trace.best_so_far()
    cum = 0.0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for r, b in zip(trace.results, best):
            cum += r.time_high + r.time_low
            writer.writerow(
                [r.index]
                + [repr(c) for c in r.rho]
                + [repr(r.objective), int(r.feasible), repr(b), repr(cum)]
            )


def read_trace(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [dict(row) for row in csv.DictReader(fh)]
