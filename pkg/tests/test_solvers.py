import numpy as np
import pytest

from islanduc.errors import SolverFailure
from islanduc.linmodel import LinearModel
from islanduc.solvers import (INFEASIBLE, OPTIMAL, UNBOUNDED,
                              BranchBoundAdapter, HighsAdapter, get_adapter)


def knapsack():
    # max 6x0 + 5x1 + 4x2 s.t. 3x0 + 2x1 + 2x2 <= 4  -> x1 = x2 = 1, value 9
    m = LinearModel("knap", sense="max")
    for j, w in enumerate((3.0, 2.0, 2.0)):
        m.add_variable(f"x{j}", "binary")
    m.add_row("cap", {"x0": 3.0, "x1": 2.0, "x2": 2.0}, "<=", 4.0)
    m.add_objective({"x0": 6.0, "x1": 5.0, "x2": 4.0})
    return m


@pytest.mark.parametrize("adapter", [HighsAdapter(), BranchBoundAdapter()])
def test_knapsack(adapter):
    res = adapter.solve(knapsack())
    assert res.status == OPTIMAL
    assert res.objective == pytest.approx(9.0)
    assert res.values["x0"] == 0.0
    assert res.values["x1"] == 1.0 and res.values["x2"] == 1.0


def test_infeasible_and_unbounded():
    m = LinearModel()
    m.add_variable("a", lb=0.0, ub=1.0)
    m.add_row("r", {"a": 1.0}, ">=", 2.0)
    assert HighsAdapter().solve(m).status == INFEASIBLE

    u = LinearModel()
    u.add_variable("a")
    u.add_objective({"a": -1.0})
    assert HighsAdapter().solve(u).status == UNBOUNDED


def test_bnb_matches_highs_on_random_milps():
    rng = np.random.default_rng(11)
    hi, bb = HighsAdapter(), BranchBoundAdapter()
    agreements = 0
    for k in range(25):
        n = int(rng.integers(3, 9))
        m = LinearModel(f"milp{k}")
        for j in range(n):
            m.add_variable(f"b{j}", "binary")
        m.add_variable("t")
        m.add_objective({f"b{j}": float(rng.normal(0, 3)) for j in range(n)})
        m.add_objective({"t": 1.0})
        for r in range(int(rng.integers(2, 5))):
            coeffs = {f"b{j}": float(rng.normal()) for j in range(n)}
            coeffs["t"] = abs(float(rng.normal())) + 0.1
            m.add_row(f"r{r}", coeffs, ">=", float(rng.normal()), "")
        r1, r2 = hi.solve(m), bb.solve(m)
        assert r1.status == r2.status
        if r1.status == OPTIMAL:
            agreements += 1
            assert r2.objective == pytest.approx(r1.objective, rel=1e-7, abs=1e-7)
    assert agreements >= 15


def test_bnb_infeasible_binary():
    m = LinearModel()
    m.add_variable("b", "binary")
    m.add_row("lo", {"b": 1.0}, ">=", 0.4)
    m.add_row("hi", {"b": 1.0}, "<=", 0.6)
    assert BranchBoundAdapter().solve(m).status == INFEASIBLE


def test_adapter_selection(monkeypatch):
    assert get_adapter("bnb").name == "bnb"
    monkeypatch.setenv("IFUC_SOLVER", "bnb")
    assert get_adapter().name == "bnb"
    monkeypatch.delenv("IFUC_SOLVER")
    assert get_adapter().name == "highs"
    with pytest.raises(SolverFailure):
        get_adapter("gurobi")


def test_empty_model():
    m = LinearModel()
    m.add_objective({}, const=4.5)
    res = HighsAdapter().solve(m)
    assert res.status == OPTIMAL and res.objective == 4.5
