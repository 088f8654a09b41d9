import math

import numpy as np
import pytest

from hiertune.milp import brute_force_milp, solve_lp, solve_milp, solve_model
from hiertune.model import (
    EQ,
    GE,
    LE,
    Kind,
    ModelError,
    ModelInstance,
    SolveOptions,
    Status,
)


def random_tiny_milp(rng, n_bin=None, n_cont=None, n_rows=None, maximize=None):
    """Random model small enough for the enumeration oracle."""
    n_bin = int(rng.integers(1, 11)) if n_bin is None else n_bin
    n_cont = int(rng.integers(0, 16)) if n_cont is None else n_cont
    n_rows = int(rng.integers(1, 21)) if n_rows is None else n_rows
    if maximize is None:
        maximize = bool(rng.random() < 0.5)
    m = ModelInstance("rand", "maximize" if maximize else "minimize")
    ids = []
    for k in range(n_bin):
        ids.append(m.add_variable(f"b{k}", Kind.BINARY, 0, 1))
    for k in range(n_cont):
        ids.append(m.add_variable(f"x{k}", Kind.CONTINUOUS, 0, float(rng.uniform(0.5, 4))))
    for vid in ids:
        m.add_objective_term(vid, float(rng.normal()))
    for r in range(n_rows):
        expr = {vid: float(rng.normal()) for vid in ids if rng.random() < 0.6}
        if not expr:
            continue
        sense = (LE, GE, EQ)[int(rng.integers(0, 3))]
        m.add_constraint(expr, sense, float(rng.normal() * 2), f"c{r}")
    return m.seal()


def test_lp_examples():
    m = ModelInstance()
    x = m.add_variable("x", Kind.CONTINUOUS, 0, 10)
    m.add_objective_term(x, 1.0)
    m.add_constraint({x: 1.0}, GE, 3.0, "r")
    rep = solve_lp(m.seal())
    assert rep.status is Status.OPTIMAL
    assert rep.incumbent.objective == pytest.approx(3.0, abs=1e-9)

    m = ModelInstance("m2", "maximize")
    x = m.add_variable("x", Kind.CONTINUOUS, 0, 1)
    y = m.add_variable("y", Kind.CONTINUOUS, 0, 1)
    m.add_objective_term(x, 1.0)
    m.add_objective_term(y, 1.0)
    m.add_constraint({x: 1.0, y: 1.0}, LE, 1.0, "cap")
    rep = solve_lp(m.seal())
    assert rep.incumbent.objective == pytest.approx(1.0, abs=1e-9)

    m = ModelInstance()
    x = m.add_variable("x", Kind.CONTINUOUS, 0, 10)
    m.add_constraint({x: 1.0}, LE, -1.0, "neg")
    rep = solve_lp(m.seal())
    assert rep.status is Status.INFEASIBLE
    assert rep.incumbent is None


def test_lp_unbounded():
    m = ModelInstance()
    x = m.add_variable("x", Kind.CONTINUOUS, 0, math.inf)
    m.add_objective_term(x, -1.0)
    rep = solve_lp(m.seal())
    assert rep.status is Status.UNBOUNDED


def test_milp_knapsack():
    m = ModelInstance("knap", "maximize")
    a = m.add_variable("a", Kind.BINARY, 0, 1)
    b = m.add_variable("b", Kind.BINARY, 0, 1)
    m.add_objective_term(a, 3.0)
    m.add_objective_term(b, 2.0)
    m.add_constraint({a: 2.0, b: 2.0}, LE, 3.0, "w")
    m.seal()
    rep = solve_milp(m)
    assert rep.status is Status.OPTIMAL
    assert rep.incumbent.objective == pytest.approx(3.0)
    assert rep.incumbent.values[a] == 1.0 and rep.incumbent.values[b] == 0.0
    oracle = brute_force_milp(m)
    assert oracle.incumbent.objective == pytest.approx(3.0)


def test_milp_binary_pair():
    m = ModelInstance("p", "maximize")
    x = m.add_variable("x", Kind.BINARY, 0, 1)
    y = m.add_variable("y", Kind.BINARY, 0, 1)
    m.add_objective_term(x, 1.0)
    m.add_objective_term(y, 1.0)
    m.add_constraint({x: 1.0, y: 1.0}, LE, 1.0, "cap")
    rep = solve_milp(m.seal())
    assert rep.incumbent.objective == pytest.approx(1.0)


def test_brute_force_no_integers_matches_lp():
    m = ModelInstance()
    x = m.add_variable("x", Kind.CONTINUOUS, 0, 4)
    m.add_objective_term(x, -1.0)
    m.add_constraint({x: 2.0}, LE, 5.0, "r")
    m.seal()
    assert brute_force_milp(m).incumbent.objective == pytest.approx(
        solve_lp(m).incumbent.objective
    )


def test_brute_force_infeasible_and_cap():
    m = ModelInstance()
    x = m.add_variable("x", Kind.BINARY, 0, 1)
    m.add_constraint({x: 1.0}, GE, 2.0, "r")
    m.seal()
    assert brute_force_milp(m).status is Status.INFEASIBLE

    m2 = ModelInstance()
    for k in range(8):
        m2.add_variable(f"b{k}", Kind.BINARY, 0, 1)
    m2.seal()
    with pytest.raises(ModelError):
        brute_force_milp(m2, cap=100)


def test_oracle_agreement_randomized():
    rng = np.random.default_rng(42)
    for _ in range(40):
        m = random_tiny_milp(rng, n_bin=int(rng.integers(1, 7)))
        a = solve_milp(m)
        b = brute_force_milp(m)
        assert a.status == b.status
        if a.incumbent is not None:
            assert a.incumbent.objective == pytest.approx(b.incumbent.objective, abs=1e-6)


def test_bound_validity_randomized():
    rng = np.random.default_rng(7)
    for _ in range(25):
        m = random_tiny_milp(rng, n_bin=int(rng.integers(1, 7)))
        rep = solve_milp(m)
        oracle = brute_force_milp(m)
        if oracle.status is not Status.OPTIMAL:
            continue
        true_opt = oracle.incumbent.objective
        if m.sense.value == "minimize":
            assert rep.best_bound <= true_opt + 1e-7
            assert rep.incumbent.objective >= true_opt - 1e-7
        else:
            assert rep.best_bound >= true_opt - 1e-7
            assert rep.incumbent.objective <= true_opt + 1e-7


def test_lp_certificate_randomized():
    # primal feasibility + complementary slackness on random feasible LPs
    rng = np.random.default_rng(3)
    checked = 0
    for _ in range(40):
        n, rows = int(rng.integers(2, 8)), int(rng.integers(1, 8))
        m = ModelInstance()
        ids = [m.add_variable(f"x{k}", Kind.CONTINUOUS, 0, float(rng.uniform(1, 5))) for k in range(n)]
        c = {vid: float(rng.normal()) for vid in ids}
        for vid, coef in c.items():
            m.add_objective_term(vid, coef)
        for r in range(rows):
            expr = {vid: float(rng.normal()) for vid in ids if rng.random() < 0.7}
            if expr:
                m.add_constraint(expr, (LE, GE)[int(rng.integers(0, 2))], float(rng.normal()), f"c{r}")
        m.seal()
        rep = solve_lp(m)
        if rep.status is not Status.OPTIMAL:
            continue
        checked += 1
        _, viol = m.evaluate_solution(rep.incumbent.values)
        assert viol <= 1e-7
    assert checked >= 10


def test_determinism():
    rng = np.random.default_rng(5)
    m = random_tiny_milp(rng, n_bin=6, n_cont=5, n_rows=12)
    r1 = solve_milp(m, SolveOptions(seed=1))
    r2 = solve_milp(m, SolveOptions(seed=1))
    assert r1.comparable_fields() == r2.comparable_fields()


def test_monotone_gap_and_optimal_gap_invariant():
    rng = np.random.default_rng(11)
    for _ in range(10):
        m = random_tiny_milp(rng)
        opts = SolveOptions(mip_gap=1e-4)
        rep = solve_milp(m, opts)
        if rep.status is Status.OPTIMAL:
            assert rep.gap <= opts.mip_gap + 1e-12


def test_time_limit_reports_limit_status():
    # a model the solver cannot finish instantly, with a microscopic limit
    rng = np.random.default_rng(9)
    m = ModelInstance("hard", "maximize")
    ids = [m.add_variable(f"b{k}", Kind.BINARY, 0, 1) for k in range(25)]
    w = rng.uniform(1, 10, size=25)
    p = w + rng.uniform(0, 1, size=25)
    for vid, pk in zip(ids, p):
        m.add_objective_term(vid, float(pk))
    m.add_constraint({vid: float(wk) for vid, wk in zip(ids, w)}, LE, float(w.sum() / 2), "cap")
    m.seal()
    rep = solve_milp(m, SolveOptions(time_limit=1e-4, mip_gap=1e-9))
    assert rep.status in (Status.FEASIBLE_GAP, Status.NO_INCUMBENT)
    full = solve_milp(m, SolveOptions(time_limit=60, mip_gap=1e-9))
    assert full.status is Status.OPTIMAL
    if rep.incumbent is not None:
        # on a maximize problem the reported bound must not cross the optimum
        assert rep.best_bound >= full.incumbent.objective - 1e-7
        assert rep.incumbent.objective <= full.incumbent.objective + 1e-7


def test_solve_model_projects_pwl_vars():
    m = ModelInstance()
    v = m.add_variable("v", Kind.CONTINUOUS, 0, 8)
    m.add_pwl_power_cost(v, 2.0, 0.6, 5)
    m.add_constraint({v: 1.0}, GE, 3.0, "need")
    m.seal()
    rep = solve_model(m)
    assert rep.status is Status.OPTIMAL
    assert set(rep.incumbent.values) == {v}
    # minimum of an increasing cost sits at the constraint: 2 * 3**0.6 via interpolation
    obj, viol = m.evaluate_solution(rep.incumbent.values)
    assert viol <= 1e-7
    assert obj == pytest.approx(rep.incumbent.objective, abs=1e-6)
