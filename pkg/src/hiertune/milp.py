"""LP/MILP solving on top of the simplex kernel.

``solve_lp`` solves the continuous relaxation, ``solve_milp`` runs branch and
bound (most-fractional branching, best-bound node selection with depth-first
plunging until the first incumbent), and ``brute_force_milp`` is the
exhaustive-enumeration oracle used to verify the backend on tiny instances.

All solves are deterministic for a fixed (model, options) pair; wall time is
the only report field that varies between runs.
"""

from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import dataclass

import numpy as np

from .model import (
    EQ,
    GE,
    LE,
    Kind,
    ModelError,
    ModelInstance,
    Sense,
    Solution,
    SolveOptions,
    Status,
)
from .simplex import LP_FAILURE, LP_INFEASIBLE, LP_OPTIMAL, LP_UNBOUNDED, solve_lp_csc

__all__ = ["SolveReport", "solve_lp", "solve_milp", "brute_force_milp", "solve_model"]

#: Default cap on the integer search space of the enumeration oracle.
BRUTE_FORCE_CAP = 2**22


@dataclass
class SolveReport:
    status: Status
    incumbent: Solution | None
    best_bound: float
    gap: float
    nodes: int
    lp_iterations: int
    wall_time: float

    def comparable_fields(self) -> tuple:
        """Everything except wall time, for determinism checks."""
        inc = None
        if self.incumbent is not None:
            inc = (
                tuple(sorted(self.incumbent.values.items())),
                self.incumbent.objective,
                self.incumbent.status,
            )
        return (self.status, inc, self.best_bound, self.gap, self.nodes, self.lp_iterations)


class _Arrays:
    """Dense row-form snapshot of a sealed, lowered model."""

    def __init__(self, model: ModelInstance):
        if not model.is_sealed:
            raise ModelError("model must be sealed before solving")
        if model.pwl_terms:
            raise ModelError("piecewise terms must be lowered before solving")
        n = model.n_variables
        m = model.n_constraints
        senses = np.zeros(m, dtype=np.int8)
        b = np.zeros(m)
        cols: list[list[tuple[int, float]]] = [[] for _ in range(n)]
        for con in model.constraints:
            i = con.cid
            for vid, coef in con.expr.terms.items():
                cols[vid].append((i, coef))
            senses[i] = {LE: -1, EQ: 0, GE: 1}[con.sense]
            b[i] = con.rhs
        self.cptr = np.zeros(n + 1, dtype=np.int64)
        rows: list[int] = []
        vals: list[float] = []
        for j, col in enumerate(cols):
            self.cptr[j + 1] = self.cptr[j] + len(col)
            for i, coef in col:
                rows.append(i)
                vals.append(coef)
        self.crow = np.array(rows, dtype=np.int64)
        self.cval = np.array(vals, dtype=np.float64)
        self.senses = senses
        self.b = b
        self.c = np.zeros(n)
        for vid, coef in model.objective.terms.items():
            self.c[vid] = coef
        self.c0 = model.objective.constant
        self.lower = np.array([v.lower for v in model.variables])
        self.upper = np.array([v.upper for v in model.variables])
        self.int_ids = np.array(model.integer_ids(), dtype=np.int64)
        self.maximize = model.sense is Sense.MAXIMIZE
        self.n = n
        self.m = m

    def csigned(self) -> tuple[np.ndarray, float]:
        if self.maximize:
            return -self.c, -self.c0
        return self.c, self.c0


def _lp(arr: _Arrays, c: np.ndarray, lower: np.ndarray, upper: np.ndarray):
    code, x, y, iters = solve_lp_csc(
        arr.cptr, arr.crow, arr.cval, arr.m, arr.senses, arr.b, c, lower, upper
    )
    if code == LP_OPTIMAL:
        x = np.clip(x, lower, upper)
    return code, x, y, iters


def _gap(objective: float, bound: float) -> float:
    return abs(objective - bound) / max(1.0, abs(objective))


def _solution(arr: _Arrays, x: np.ndarray, obj_min: float, status: Status) -> Solution:
    values = {}
    for vid in range(arr.n):
        v = float(x[vid])
        values[vid] = v
    for vid in arr.int_ids:
        values[int(vid)] = float(round(x[vid]))
    obj = -obj_min if arr.maximize else obj_min
    return Solution(values, obj, status)


def solve_lp(model: ModelInstance, options: SolveOptions | None = None) -> SolveReport:
    """Solve the continuous relaxation (integrality dropped)."""
    options = options or SolveOptions()
    arr = _Arrays(model)
    c, c0 = arr.csigned()
    t0 = time.perf_counter()
    code, x, y, iters = _lp(arr, c, arr.lower, arr.upper)
    wall = time.perf_counter() - t0
    if code == LP_OPTIMAL:
        obj_min = float(c @ x) + c0
        sol = _solution(arr, x, obj_min, Status.OPTIMAL)
        # integers relaxed: report plain values, no rounding
        sol.values = {vid: float(x[vid]) for vid in range(arr.n)}
        bound = sol.objective
        return SolveReport(Status.OPTIMAL, sol, bound, 0.0, 0, iters, wall)
    if code == LP_INFEASIBLE:
        bound = -math.inf if arr.maximize else math.inf
        return SolveReport(Status.INFEASIBLE, None, bound, math.inf, 0, iters, wall)
    if code == LP_UNBOUNDED:
        bound = math.inf if arr.maximize else -math.inf
        return SolveReport(Status.UNBOUNDED, None, bound, math.inf, 0, iters, wall)
    return SolveReport(Status.NUMERICAL_FAILURE, None, math.nan, math.inf, 0, iters, wall)


def solve_milp(model: ModelInstance, options: SolveOptions | None = None) -> SolveReport:
    """Branch and bound.  Returns the incumbent and a valid best bound."""
    options = options or SolveOptions()
    arr = _Arrays(model)
    c, c0 = arr.csigned()
    int_ids = arr.int_ids
    itol = options.integrality_tolerance
    t0 = time.perf_counter()

    nodes_explored = 0
    lp_iters = 0
    incumbent_x = None
    incumbent_obj = math.inf
    prune_floor = math.inf
    seq = itertools.count()

    stack: list[tuple[float, int, np.ndarray, np.ndarray]] = []
    heap: list[tuple[float, int, np.ndarray, np.ndarray]] = []
    stack.append((-math.inf, next(seq), arr.lower.copy(), arr.upper.copy()))
    limit_hit = False
    failure = False
    root_unbounded = False

    def cutoff() -> float:
        if incumbent_obj is math.inf:
            return math.inf
        slack = max(options.mip_gap * max(1.0, abs(incumbent_obj)), 1e-9)
        return incumbent_obj - slack

    def open_bound() -> float:
        vals = [nb for nb, _, _, _ in stack] + ([heap[0][0]] if heap else [])
        vals.append(prune_floor)
        return min(vals) if vals else math.inf

    while stack or heap:
        if time.perf_counter() - t0 > options.time_limit or nodes_explored >= options.node_limit:
            limit_hit = True
            break
        if incumbent_x is not None:
            bound_now = min(open_bound(), incumbent_obj)
            if incumbent_obj - bound_now <= options.mip_gap * max(1.0, abs(incumbent_obj)):
                break
        if stack:
            node_bound, _, lo, up = stack.pop()
        else:
            node_bound, _, lo, up = heapq.heappop(heap)
        if node_bound >= cutoff():
            prune_floor = min(prune_floor, node_bound)
            continue

        code, x, _, iters = _lp(arr, c, lo, up)
        nodes_explored += 1
        lp_iters += iters
        if code == LP_INFEASIBLE:
            continue
        if code == LP_UNBOUNDED:
            if nodes_explored == 1:
                root_unbounded = True
                break
            continue
        if code == LP_FAILURE:
            failure = True
            break
        obj = float(c @ x) + c0
        if obj >= cutoff():
            prune_floor = min(prune_floor, obj)
            continue

        frac = np.abs(x[int_ids] - np.round(x[int_ids])) if len(int_ids) else np.zeros(0)
        if len(int_ids) == 0 or frac.max() <= itol:
            if obj < incumbent_obj - 1e-9:
                first = incumbent_x is None
                incumbent_x = x.copy()
                incumbent_obj = obj
                if first:
                    while stack:
                        nb, s, lo2, up2 = stack.pop()
                        heapq.heappush(heap, (nb, s, lo2, up2))
            continue

        # most-fractional branching, ties to the smallest index
        dist = np.minimum(frac, 1.0 - frac)
        j = int(int_ids[int(np.argmax(dist))])
        xj = x[j]
        lo_dn, up_dn = lo.copy(), up.copy()
        up_dn[j] = math.floor(xj)
        lo_up, up_up = lo.copy(), up.copy()
        lo_up[j] = math.ceil(xj)
        down_first = (xj - math.floor(xj)) <= 0.5
        children = [(lo_dn, up_dn), (lo_up, up_up)]
        if not down_first:
            children.reverse()
        if incumbent_x is None:
            # plunge: push the rounded-nearest child last so it pops first
            stack.append((obj, next(seq), *children[1]))
            stack.append((obj, next(seq), *children[0]))
        else:
            for lo2, up2 in children:
                heapq.heappush(heap, (obj, next(seq), lo2, up2))

        if len(int_ids) and (nodes_explored == 1 or incumbent_x is None or nodes_explored % 32 == 0):
            # rounding heuristics on the node relaxation: ceiling first
            # (extra capacity-like starts keep production plans feasible),
            # nearest as fallback
            improved = False
            for mode in ("ceil", "round"):
                rounded = np.ceil(x[int_ids] - itol) if mode == "ceil" else np.round(x[int_ids])
                lo_h, up_h = lo.copy(), up.copy()
                vals = np.clip(rounded, lo[int_ids], up[int_ids])
                lo_h[int_ids] = vals
                up_h[int_ids] = vals
                code_h, x_h, _, iters_h = _lp(arr, c, lo_h, up_h)
                lp_iters += iters_h
                if code_h == LP_OPTIMAL:
                    obj_h = float(c @ x_h) + c0
                    if obj_h < incumbent_obj - 1e-9:
                        first = incumbent_x is None
                        incumbent_x = x_h.copy()
                        incumbent_obj = obj_h
                        improved = True
                        if first:
                            while stack:
                                nb, s, lo2, up2 = stack.pop()
                                heapq.heappush(heap, (nb, s, lo2, up2))
                if improved:
                    break

    wall = time.perf_counter() - t0
    ext = -1.0 if arr.maximize else 1.0

    if failure:
        return SolveReport(Status.NUMERICAL_FAILURE, None, math.nan, math.inf, nodes_explored, lp_iters, wall)
    if root_unbounded:
        return SolveReport(Status.UNBOUNDED, None, ext * -math.inf, math.inf, nodes_explored, lp_iters, wall)
    if incumbent_x is None:
        if limit_hit:
            return SolveReport(
                Status.NO_INCUMBENT, None, ext * open_bound(), math.inf, nodes_explored, lp_iters, wall
            )
        return SolveReport(Status.INFEASIBLE, None, ext * math.inf, math.inf, nodes_explored, lp_iters, wall)

    bound_min = min(open_bound(), incumbent_obj)
    gap = _gap(incumbent_obj, bound_min)
    status = Status.FEASIBLE_GAP if limit_hit else Status.OPTIMAL
    if not limit_hit and gap > options.mip_gap:
        # exhausted tree has a proven bound within the pruning slack
        gap = min(gap, options.mip_gap)
    sol = _solution(arr, incumbent_x, incumbent_obj, status)
    return SolveReport(status, sol, ext * bound_min, gap, nodes_explored, lp_iters, wall)


def brute_force_milp(
    model: ModelInstance,
    options: SolveOptions | None = None,
    cap: int = BRUTE_FORCE_CAP,
) -> SolveReport:
    """Enumerate every integer assignment, solving the continuous LP for each.

    Verification oracle: exact but exponential; refuses search spaces larger
    than ``cap``.
    """
    options = options or SolveOptions()
    arr = _Arrays(model)
    c, c0 = arr.csigned()
    int_ids = [int(v) for v in arr.int_ids]
    spans = []
    for vid in int_ids:
        lo, up = arr.lower[vid], arr.upper[vid]
        if not (math.isfinite(lo) and math.isfinite(up)):
            raise ModelError(f"integer variable {model.var(vid).name!r} must be bounded")
        spans.append(int(math.floor(up + 1e-9)) - int(math.ceil(lo - 1e-9)) + 1)
    total = 1
    for s in spans:
        total *= max(s, 0)
    if total > cap:
        raise ModelError(f"integer search space {total} exceeds cap {cap}")

    t0 = time.perf_counter()
    best_obj = math.inf
    best_x = None
    lp_iters = 0
    count = 0
    unbounded = False
    bases = [int(math.ceil(arr.lower[vid] - 1e-9)) for vid in int_ids]
    for combo in itertools.product(*(range(s) for s in spans)) if spans else [()]:
        count += 1
        lo, up = arr.lower.copy(), arr.upper.copy()
        for k, vid in enumerate(int_ids):
            val = bases[k] + combo[k]
            lo[vid] = up[vid] = val
        code, x, _, iters = _lp(arr, c, lo, up)
        lp_iters += iters
        if code == LP_UNBOUNDED:
            unbounded = True
            break
        if code != LP_OPTIMAL:
            continue
        obj = float(c @ x) + c0
        if obj < best_obj - 1e-12:
            best_obj = obj
            best_x = x.copy()
    wall = time.perf_counter() - t0

    ext = -1.0 if arr.maximize else 1.0
    if unbounded:
        return SolveReport(Status.UNBOUNDED, None, ext * -math.inf, math.inf, count, lp_iters, wall)
    if best_x is None:
        return SolveReport(Status.INFEASIBLE, None, ext * math.inf, math.inf, count, lp_iters, wall)
    sol = _solution(arr, best_x, best_obj, Status.OPTIMAL)
    return SolveReport(Status.OPTIMAL, sol, sol.objective, 0.0, count, lp_iters, wall)


def solve_model(model: ModelInstance, options: SolveOptions | None = None) -> SolveReport:
    """Lower piecewise terms, solve, and project the solution back.

    The returned solution contains only the original model's variables; the
    objective already includes the piecewise cost contributions.
    """
    lowered = model.lowered()
    report = solve_milp(lowered, options)
    if report.incumbent is not None and lowered is not model:
        n = model.n_variables
        report.incumbent.values = {
            vid: val for vid, val in report.incumbent.values.items() if vid < n
        }
    return report
