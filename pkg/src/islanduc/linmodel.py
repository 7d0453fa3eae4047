"""Solver-agnostic linear constraint systems.

LinearModel is a plain intermediate representation: named variables
(continuous or binary, with bounds), tagged coefficient rows with a sense
and a right-hand side, and a linear objective. Rows may carry rhs_terms,
an affine dependence of the rhs on named parameters; `parameterize` turns
chosen variables into such parameters and `bind` substitutes numeric values
back in. `dualize` builds the exact LP dual of a parameterized min-LP as a
template whose objective is affine in the parameters.

Everything downstream (unit commitment master, extensive-form oracle,
economic dispatch, the worst-case dual subproblem) is derived from the same
row builders through these three transforms, so there is a single source of
truth for signs and senses.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace

import numpy as np

SENSES = ("<=", ">=", "==")
_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str = "continuous"  # or "binary"
    lb: float = 0.0
    ub: float = math.inf


@dataclass
class Row:
    tag: str
    coeffs: dict[str, float]
    sense: str
    rhs: float
    rhs_terms: dict[str, float] = field(default_factory=dict)
    symbol: str = ""

    def rhs_at(self, values: dict[str, float]) -> float:
        return self.rhs + sum(c * values[p] for p, c in self.rhs_terms.items())


class LinearModel:
    def __init__(self, name: str = "model", sense: str = "min"):
        self.name = name
        self.sense = sense
        self.variables: dict[str, Variable] = {}
        self.rows: list[Row] = []
        self._tags: set[str] = set()
        self.objective: dict[str, float] = {}
        self.obj_const: float = 0.0
        self.obj_terms: dict[str, float] = {}

    # -- construction -----------------------------------------------------

    def add_variable(self, name: str, kind: str = "continuous",
                     lb: float = 0.0, ub: float = math.inf) -> str:
        if not _NAME_RE.match(name):
            raise ValueError(f"bad variable name {name!r}")
        if kind == "binary":
            lb, ub = 0.0, 1.0
        elif kind != "continuous":
            raise ValueError(f"bad variable kind {kind!r}")
        var = Variable(name, kind, lb, ub)
        old = self.variables.get(name)
        if old is not None:
            if old != var:
                raise ValueError(f"variable {name} redeclared with different spec")
            return name
        self.variables[name] = var
        return name

    def add_row(self, tag: str, coeffs: dict[str, float], sense: str, rhs: float,
                symbol: str = "", rhs_terms: dict[str, float] | None = None):
        if not _NAME_RE.match(tag):
            raise ValueError(f"bad row tag {tag!r}")
        if tag in self._tags:
            raise ValueError(f"duplicate row tag {tag}")
        if sense not in SENSES:
            raise ValueError(f"bad sense {sense!r}")
        for v in coeffs:
            if v not in self.variables:
                raise ValueError(f"row {tag} references undeclared variable {v}")
        self.rows.append(Row(tag, dict(coeffs), sense, float(rhs),
                             dict(rhs_terms or {}), symbol))
        self._tags.add(tag)

    def add_objective(self, coeffs: dict[str, float], const: float = 0.0):
        for v, c in coeffs.items():
            if v not in self.variables:
                raise ValueError(f"objective references undeclared variable {v}")
            self.objective[v] = self.objective.get(v, 0.0) + c
        self.obj_const += const

    def merge(self, other: "LinearModel") -> "LinearModel":
        """Fold another fragment into this model (shared variables must agree)."""
        for var in other.variables.values():
            self.add_variable(var.name, var.kind, var.lb, var.ub)
        for row in other.rows:
            self.add_row(row.tag, row.coeffs, row.sense, row.rhs,
                         row.symbol, row.rhs_terms)
        self.add_objective(other.objective, other.obj_const)
        for p, c in other.obj_terms.items():
            self.obj_terms[p] = self.obj_terms.get(p, 0.0) + c
        return self

    def copy(self) -> "LinearModel":
        out = LinearModel(self.name, self.sense)
        out.variables = dict(self.variables)
        out.rows = [replace(r, coeffs=dict(r.coeffs), rhs_terms=dict(r.rhs_terms))
                    for r in self.rows]
        out._tags = set(self._tags)
        out.objective = dict(self.objective)
        out.obj_const = self.obj_const
        out.obj_terms = dict(self.obj_terms)
        return out

    # -- parameter transforms ---------------------------------------------

    @property
    def params(self) -> set[str]:
        out = set(self.obj_terms)
        for row in self.rows:
            out.update(row.rhs_terms)
        return out

    def parameterize(self, names) -> "LinearModel":
        """Turn the named variables into rhs parameters.

        A row a'v + q*u <sense> b becomes a'v <sense> b - q*u with u recorded
        in rhs_terms; objective coefficients on u move to obj_terms.
        """
        names = set(names)
        missing = names - set(self.variables)
        if missing:
            raise ValueError(f"cannot parameterize undeclared {sorted(missing)}")
        out = LinearModel(self.name, self.sense)
        out.variables = {n: v for n, v in self.variables.items() if n not in names}
        for row in self.rows:
            coeffs = {}
            terms = dict(row.rhs_terms)
            for v, c in row.coeffs.items():
                if v in names:
                    terms[v] = terms.get(v, 0.0) - c
                else:
                    coeffs[v] = c
            out.rows.append(Row(row.tag, coeffs, row.sense, row.rhs, terms, row.symbol))
            out._tags.add(row.tag)
        out.obj_const = self.obj_const
        out.obj_terms = dict(self.obj_terms)
        for v, c in self.objective.items():
            if v in names:
                out.obj_terms[v] = out.obj_terms.get(v, 0.0) + c
            else:
                out.objective[v] = c
        return out

    def bind(self, values: dict[str, float]) -> "LinearModel":
        """Substitute numeric values for (a subset of) the parameters."""
        out = self.copy()
        for row in out.rows:
            kept = {}
            for p, c in row.rhs_terms.items():
                if p in values:
                    row.rhs += c * values[p]
                else:
                    kept[p] = c
            row.rhs_terms = kept
        kept = {}
        for p, c in out.obj_terms.items():
            if p in values:
                out.obj_const += c * values[p]
            else:
                kept[p] = c
        out.obj_terms = kept
        return out

    # -- matrix forms -------------------------------------------------------

    def to_matrices(self):
        """Dense matrix form for the solver adapters; model must be fully bound."""
        if self.params:
            raise ValueError(f"unbound parameters remain: {sorted(self.params)[:4]}")
        order = list(self.variables)
        index = {n: j for j, n in enumerate(order)}
        n = len(order)
        c = np.zeros(n)
        for v, co in self.objective.items():
            c[index[v]] = co
        m = len(self.rows)
        a = np.zeros((m, n))
        lo = np.empty(m)
        hi = np.empty(m)
        for r, row in enumerate(self.rows):
            for v, co in row.coeffs.items():
                a[r, index[v]] = co
            if row.sense == "<=":
                lo[r], hi[r] = -np.inf, row.rhs
            elif row.sense == ">=":
                lo[r], hi[r] = row.rhs, np.inf
            else:
                lo[r], hi[r] = row.rhs, row.rhs
        bounds = np.array([[self.variables[v].lb, self.variables[v].ub] for v in order]) \
            if n else np.zeros((0, 2))
        integrality = np.array([1 if self.variables[v].kind == "binary" else 0
                                for v in order])
        return order, c, a, lo, hi, bounds, integrality

    # -- text export --------------------------------------------------------

    def to_lp_string(self) -> str:
        def num(x: float) -> str:
            return repr(float(x))

        def expr(coeffs: dict[str, float]) -> str:
            parts = []
            for v, co in coeffs.items():
                sign = "-" if co < 0 else "+"
                parts.append(f"{sign} {num(abs(co))} {v}")
            if not parts:
                return "0 __zero"
            text = " ".join(parts)
            return text[2:] if text.startswith("+ ") else text

        lines = [f"\\ {self.name}"]
        lines.append("Maximize" if self.sense == "max" else "Minimize")
        obj = expr(self.objective)
        if self.obj_const:
            obj += f" + {num(self.obj_const)}" if self.obj_const > 0 else f" - {num(-self.obj_const)}"
        lines.append(f" obj: {obj}")
        lines.append("Subject To")
        sense_txt = {"<=": "<=", ">=": ">=", "==": "="}
        for row in self.rows:
            if row.rhs_terms:
                raise ValueError(f"row {row.tag} still parameterized; bind before export")
            lines.append(f" {row.tag}: {expr(row.coeffs)} {sense_txt[row.sense]} {num(row.rhs)}")
        lines.append("Bounds")
        need_zero = any(not r.coeffs for r in self.rows) or not self.objective
        for var in self.variables.values():
            if var.kind == "binary":
                continue
            if var.lb == 0.0 and var.ub == math.inf:
                continue
            if var.lb == -math.inf and var.ub == math.inf:
                lines.append(f" {var.name} free")
                continue
            lo = "-infinity" if var.lb == -math.inf else num(var.lb)
            hi = "+infinity" if var.ub == math.inf else num(var.ub)
            lines.append(f" {lo} <= {var.name} <= {hi}")
        if need_zero:
            lines.append(" __zero = 0")
        binaries = [v.name for v in self.variables.values() if v.kind == "binary"]
        if binaries:
            lines.append("Binaries")
            for j in range(0, len(binaries), 8):
                lines.append(" " + " ".join(binaries[j:j + 8]))
        lines.append("End")
        return "\n".join(lines) + "\n"

    def write_lp(self, path: str):
        with open(path, "w") as fh:
            fh.write(self.to_lp_string())

    def stats(self) -> str:
        nb = sum(1 for v in self.variables.values() if v.kind == "binary")
        return (f"{self.name}: {len(self.variables)} vars ({nb} binary), "
                f"{len(self.rows)} rows, {len(self.params)} params")


class DualTemplate:
    """Exact LP dual of a parameterized min-LP with nonnegative variables.

    The primal may carry finite upper bounds (converted to rows here) and
    parameters in rhs_terms/obj_terms. The dual constraint system is fixed;
    only the dual objective depends on the parameters, affinely. A dual point
    therefore induces an affine lower bound on the primal value function,
    value(params) >= const + sum(coef_p * param_p), which is what Benders
    cuts are made of.
    """

    def __init__(self, primal: LinearModel):
        if primal.sense != "min":
            raise ValueError("dualize expects a min problem")
        for var in primal.variables.values():
            if var.kind != "continuous":
                raise ValueError(f"dualize: {var.name} is not continuous; parameterize it first")
            if var.lb != 0.0:
                raise ValueError(f"dualize: {var.name} must have lb = 0")

        lp = LinearModel(f"{primal.name}_dual", sense="max")
        self.obj_const: dict[str, float] = {}
        self.obj_param: dict[str, dict[str, float]] = {}
        self.primal_obj_const = primal.obj_const
        self.primal_obj_terms = dict(primal.obj_terms)

        cols: dict[str, dict[str, float]] = {v: {} for v in primal.variables}
        rows = list(primal.rows)
        for var in primal.variables.values():
            if var.ub != math.inf:
                rows.append(Row(f"ub_{var.name}", {var.name: 1.0}, "<=", var.ub, symbol="ub"))
        for row in rows:
            lam = f"lam_{row.tag}"
            if row.sense == ">=":
                lp.add_variable(lam, lb=0.0, ub=math.inf)
            elif row.sense == "<=":
                lp.add_variable(lam, lb=-math.inf, ub=0.0)
            else:
                lp.add_variable(lam, lb=-math.inf, ub=math.inf)
            self.obj_const[lam] = row.rhs
            for p, c in row.rhs_terms.items():
                self.obj_param.setdefault(p, {})[lam] = c
            for v, c in row.coeffs.items():
                cols[v][lam] = c
        for v, col in cols.items():
            lp.add_row(f"d_{v}", col, "<=", primal.objective.get(v, 0.0), "dualfeas")
        self.lp = lp
        self.row_tags = [r.tag for r in rows]

    def instantiate(self, values: dict[str, float]) -> LinearModel:
        """Numeric dual LP at the given parameter values."""
        out = self.lp.copy()
        obj = dict(self.obj_const)
        for p, contrib in self.obj_param.items():
            x = values[p]
            for lam, c in contrib.items():
                obj[lam] += c * x
        out.objective = {lam: co for lam, co in obj.items() if co != 0.0}
        out.obj_const = self.primal_obj_const + sum(
            c * values[p] for p, c in self.primal_obj_terms.items())
        return out

    def value_affine(self, duals: dict[str, float]) -> tuple[float, dict[str, float]]:
        """Affine value-function minorant induced by a dual-feasible point:
        returns (const, per-parameter coefficients)."""
        const = self.primal_obj_const
        for lam, b in self.obj_const.items():
            const += duals.get(lam, 0.0) * b
        terms = dict(self.primal_obj_terms)
        for p, contrib in self.obj_param.items():
            acc = terms.get(p, 0.0)
            for lam, c in contrib.items():
                acc += duals.get(lam, 0.0) * c
            terms[p] = acc
        return const, terms

    def feasibility_residual(self, duals: dict[str, float]) -> float:
        """Max violation of the dual constraint rows at the given point."""
        worst = 0.0
        for row in self.lp.rows:
            lhs = sum(c * duals.get(v, 0.0) for v, c in row.coeffs.items())
            worst = max(worst, lhs - row.rhs)
        return worst


def dualize(primal: LinearModel) -> DualTemplate:
    return DualTemplate(primal)
