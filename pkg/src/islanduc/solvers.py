"""Solver adapters: every optimization in the toolkit goes through this
interface, so backends are swappable and runs are reproducible.

Two adapters ship: "highs" delegates LPs/MILPs to scipy.optimize (HiGHS),
and "bnb" is a self-contained exact depth-first branch-and-bound over HiGHS
LP relaxations, kept as a fallback that the test suite can always run.
Selection by name, or via the IFUC_SOLVER environment variable.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize as sciopt

from .errors import SolverFailure
from .linmodel import LinearModel

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
FAILED = "failed"

_INT_TOL = 1e-6


@dataclass
class SolveResult:
    status: str
    values: dict[str, float] = field(default_factory=dict)
    objective: float | None = None
    message: str = ""
    dual_bound: float | None = None  # proven bound on the optimum (== objective for exact solves)

    def require_optimal(self, what: str) -> "SolveResult":
        if self.status != OPTIMAL:
            raise SolverFailure(f"{what}: solver returned {self.status} {self.message}".rstrip())
        return self


def _split_rows(a, lo, hi):
    """(A, lo, hi) row intervals -> (A_ub, b_ub, A_eq, b_eq) for linprog."""
    ub_rows, ub_rhs = [], []
    eq_rows, eq_rhs = [], []
    for r in range(a.shape[0]):
        if lo[r] == hi[r]:
            eq_rows.append(a[r])
            eq_rhs.append(lo[r])
            continue
        if hi[r] != np.inf:
            ub_rows.append(a[r])
            ub_rhs.append(hi[r])
        if lo[r] != -np.inf:
            ub_rows.append(-a[r])
            ub_rhs.append(-lo[r])
    A_ub = np.array(ub_rows) if ub_rows else None
    b_ub = np.array(ub_rhs) if ub_rhs else None
    A_eq = np.array(eq_rows) if eq_rows else None
    b_eq = np.array(eq_rhs) if eq_rhs else None
    return A_ub, b_ub, A_eq, b_eq


_LP_STATUS = {0: OPTIMAL, 1: FAILED, 2: INFEASIBLE, 3: UNBOUNDED, 4: FAILED}


def _package(model: LinearModel, order, sign, x, fun, status, message="",
             dual_bound=None):
    if status != OPTIMAL:
        return SolveResult(status, {}, None, message)
    values = {}
    for name, xi in zip(order, x):
        if model.variables[name].kind == "binary":
            values[name] = float(round(xi))
        else:
            values[name] = float(xi)
    obj = sign * fun + model.obj_const
    bound = obj if dual_bound is None else sign * dual_bound + model.obj_const
    return SolveResult(OPTIMAL, values, obj, dual_bound=bound)


class HighsAdapter:
    """scipy.optimize (HiGHS) backend; LP via linprog, MILP via milp.

    The MIP gap is pinned far below HiGHS's 1e-4 default because downstream
    equivalence checks compare objectives at 1e-6 relative.
    """

    name = "highs"
    capabilities = frozenset({"LP", "MILP"})

    def __init__(self, mip_rel_gap: float = 1e-9):
        self.mip_rel_gap = mip_rel_gap

    def solve(self, model: LinearModel) -> SolveResult:
        order, c, a, lo, hi, bounds, integrality = model.to_matrices()
        if not order:
            return SolveResult(OPTIMAL, {}, model.obj_const)
        sign = -1.0 if model.sense == "max" else 1.0
        if integrality.any():
            res = sciopt.milp(
                c=sign * c,
                constraints=sciopt.LinearConstraint(a, lo, hi) if len(model.rows) else (),
                integrality=integrality,
                bounds=sciopt.Bounds(bounds[:, 0], bounds[:, 1]),
                options={"mip_rel_gap": self.mip_rel_gap},
            )
            status = _LP_STATUS.get(res.status, FAILED)
            return _package(model, order, sign, res.x, res.fun, status,
                            getattr(res, "message", ""),
                            getattr(res, "mip_dual_bound", None))
        A_ub, b_ub, A_eq, b_eq = _split_rows(a, lo, hi)
        res = sciopt.linprog(sign * c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                             bounds=bounds, method="highs")
        status = _LP_STATUS.get(res.status, FAILED)
        return _package(model, order, sign, res.x, res.fun, status,
                        getattr(res, "message", ""))


class BranchBoundAdapter:
    """Exact DFS branch-and-bound on binary variables over LP relaxations.

    Intended for small instances (tens of binaries); most-fractional
    branching, dive-first on the LP-suggested value, deterministic
    tie-breaking by variable order.
    """

    name = "bnb"
    capabilities = frozenset({"LP", "MILP"})

    def __init__(self, node_limit: int = 200000, gap_tol: float = 1e-9):
        self.node_limit = node_limit
        self.gap_tol = gap_tol
        self._lp = HighsAdapter()

    def solve(self, model: LinearModel) -> SolveResult:
        order, c, a, lo, hi, bounds, integrality = model.to_matrices()
        if not order:
            return SolveResult(OPTIMAL, {}, model.obj_const)
        if not integrality.any():
            return self._lp.solve(model)
        sign = -1.0 if model.sense == "max" else 1.0
        cc = sign * c
        A_ub, b_ub, A_eq, b_eq = _split_rows(a, lo, hi)
        bin_idx = np.flatnonzero(integrality)

        def relax(bnd):
            return sciopt.linprog(cc, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                                  bounds=bnd, method="highs")

        best_obj = math.inf
        best_x = None
        stack = [bounds]
        nodes = 0
        root = True
        while stack:
            bnd = stack.pop()
            nodes += 1
            if nodes > self.node_limit:
                raise SolverFailure(f"bnb: node limit {self.node_limit} exceeded on {model.name}")
            res = relax(bnd)
            if res.status == 2:
                if root and best_x is None and not stack:
                    root = False
                    return SolveResult(INFEASIBLE, {}, None, "root relaxation infeasible")
                continue
            if res.status == 3:
                return SolveResult(UNBOUNDED, {}, None, "relaxation unbounded")
            if res.status != 0:
                raise SolverFailure(f"bnb: LP relaxation status {res.status} on {model.name}")
            root = False
            if res.fun >= best_obj - self.gap_tol:
                continue
            x = res.x
            frac = np.abs(x[bin_idx] - np.round(x[bin_idx]))
            j_rel = int(np.argmax(frac))
            if frac[j_rel] <= _INT_TOL:
                best_obj = res.fun
                best_x = x.copy()
                best_x[bin_idx] = np.round(best_x[bin_idx])
                continue
            j = int(bin_idx[j_rel])
            near = float(round(x[j]))
            far_bnd = bnd.copy()
            far_bnd[j] = (1.0 - near, 1.0 - near)
            near_bnd = bnd.copy()
            near_bnd[j] = (near, near)
            stack.append(far_bnd)
            stack.append(near_bnd)
        if best_x is None:
            return SolveResult(INFEASIBLE, {}, None, "no integral point")
        return _package(model, order, sign, best_x, best_obj, OPTIMAL)


_ADAPTERS = {
    "highs": HighsAdapter,
    "bnb": BranchBoundAdapter,
}


def adapter_names() -> list[str]:
    return sorted(_ADAPTERS)


def get_adapter(name: str | None = None):
    """Resolve an adapter by name, falling back to $IFUC_SOLVER, then highs."""
    if name is None:
        name = os.environ.get("IFUC_SOLVER", "") or "highs"
    try:
        return _ADAPTERS[name]()
    except KeyError:
        raise SolverFailure(f"unknown solver '{name}' (have: {', '.join(adapter_names())})")
