"""Constraint builders for the unit-commitment problem.

Each builder returns a LinearModel fragment; fragments merge into a full
MILP (deterministic UC, extensive form) or get parameterized into the
dispatch LP whose dual drives the worst-case subproblem. Variable naming:
x_t_i / y_t_i / z_t_i commitment binaries, p_t_i dispatch [MW], r_t_i the
(vestigial, pinned-to-zero) reserve variable, g_t_i linearized cost [EUR/h],
wg_t accepted wind [MW]; an optional copy tag suffixes dispatch-layer names
so several dispatch copies can share one commitment. Row tags carry the
dual-symbol names (alpha..mu, rho) for traceability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import BigMTooSmall
from .grid_model import GeneratorSpec, SystemSpec
from .linmodel import LinearModel

DEFAULT_SEGMENTS = 3
SLACK_PENALTY = 1e6  # EUR/MWh on balance slacks; keeps the dual bounded


def unit_inertia_mws(gen: GeneratorSpec) -> float:
    """H_i * M_i, the unit's stored-energy contribution [MW*s]."""
    return gen.inertia_h * gen.m_base


def unit_gain_share(gen: GeneratorSpec, s_base: float) -> float:
    """k_i * M_i / S, governor gain referred to the system base [p.u.]."""
    return gen.gov_gain * gen.m_base / s_base


@dataclass(frozen=True)
class PWLCost:
    """Piecewise-linear over-estimator of a convex quadratic cost."""

    breakpoints: tuple[float, ...]
    values: tuple[float, ...]
    slopes: tuple[float, ...]

    def at(self, p: float) -> float:
        bp = self.breakpoints
        if len(bp) == 1:
            return self.values[0]
        if not bp[0] <= p <= bp[-1]:
            raise ValueError(f"p={p} outside [{bp[0]}, {bp[-1]}]")
        best = -math.inf
        for k, s in enumerate(self.slopes):
            best = max(best, self.values[k] + s * (p - bp[k]))
        return best


@dataclass(frozen=True)
class LRModel:
    """Linear logit c0 + c1*xi1 + ... + c5*xi5 with decision cut-point psi.

    Feature units: xi1 [MW*s] remaining stored energy, xi2 [p.u.] remaining
    governor gain, xi3 [MW] lost power, xi4 [-] lost share of demand,
    xi5 [MW] remaining headroom.
    """

    c0: float
    c1: float
    c2: float
    c3: float
    c4: float
    c5: float
    psi: float

    FEATURE_UNITS = ("MW*s", "p.u.", "MW", "-", "MW")

    @property
    def coefficients(self) -> tuple[float, ...]:
        return (self.c0, self.c1, self.c2, self.c3, self.c4, self.c5)

    def with_psi(self, psi: float) -> "LRModel":
        return LRModel(self.c0, self.c1, self.c2, self.c3, self.c4, self.c5, psi)


def piecewise_cost(gen: GeneratorSpec, n_segments: int = DEFAULT_SEGMENTS) -> PWLCost:
    """Secant PWL of the quadratic cost at n_segments+1 equal-width
    breakpoints on [p_min, p_max]; exact at breakpoints, >= the quadratic
    in between (chords of a convex function)."""
    if n_segments < 1:
        raise ValueError("n_segments must be >= 1")
    lo, hi = gen.p_min, gen.p_max
    if lo == hi:
        return PWLCost((lo,), (gen.cost_at(lo),), ())
    bp = tuple(lo + (hi - lo) * k / n_segments for k in range(n_segments + 1))
    vals = tuple(gen.cost_at(p) for p in bp)
    slopes = tuple((vals[k + 1] - vals[k]) / (bp[k + 1] - bp[k]) for k in range(n_segments))
    return PWLCost(bp, vals, slopes)


def build_commitment_block(gens: list[GeneratorSpec], horizon: int,
                           x_init: tuple[int, ...] | None = None) -> LinearModel:
    """Commitment logic: state transition x-x_prev = y-z, start/stop
    exclusion, and min-up/min-down windows (truncated at the horizon start,
    no residual obligations from before t=0). Objective: start-up costs."""
    m = LinearModel("commitment")
    if x_init is None:
        x_init = (0,) * len(gens)
    for t in range(horizon):
        for i in range(len(gens)):
            m.add_variable(f"x_{t}_{i}", "binary")
            m.add_variable(f"y_{t}_{i}", "binary")
            m.add_variable(f"z_{t}_{i}", "binary")
    for i, gen in enumerate(gens):
        for t in range(horizon):
            prev = {f"x_{t - 1}_{i}": -1.0} if t else {}
            m.add_row(f"logic_{t}_{i}",
                      {f"x_{t}_{i}": 1.0, **prev, f"y_{t}_{i}": -1.0, f"z_{t}_{i}": 1.0},
                      "==", float(x_init[i]) if t == 0 else 0.0, "logic")
            m.add_row(f"excl_{t}_{i}", {f"y_{t}_{i}": 1.0, f"z_{t}_{i}": 1.0}, "<=", 1.0, "excl")
            up = {f"y_{tt}_{i}": 1.0 for tt in range(max(0, t - gen.min_up + 1), t + 1)}
            up[f"x_{t}_{i}"] = up.get(f"x_{t}_{i}", 0.0) - 1.0
            m.add_row(f"minup_{t}_{i}", up, "<=", 0.0, "minup")
            dn = {f"z_{tt}_{i}": 1.0 for tt in range(max(0, t - gen.min_down + 1), t + 1)}
            dn[f"x_{t}_{i}"] = dn.get(f"x_{t}_{i}", 0.0) + 1.0
            m.add_row(f"mindown_{t}_{i}", dn, "<=", 1.0, "mindown")
        if gen.startup_cost:
            m.add_objective({f"y_{t}_{i}": gen.startup_cost for t in range(horizon)})
    return m


def build_dispatch_block(gens: list[GeneratorSpec], system: SystemSpec,
                         wind: tuple[float, ...] | None,
                         *, elastic: bool = False, penalty: float = SLACK_PENALTY,
                         n_segments: int = DEFAULT_SEGMENTS,
                         p_init: tuple[float, ...] | None = None,
                         copy_tag: str = "") -> LinearModel:
    """Dispatch feasibility + linearized cost for one wind realization.

    wind=None leaves the wind cap parameterized by w_0..w_{T-1} (rhs terms).
    elastic=True adds shed/spill slacks on the balance row at `penalty`
    EUR/MWh, making the LP feasible for any commitment that the box rows
    alone admit. Rows: alpha p>=Pmin*x, beta p+r<=Pmax*x, gamma/delta ramps,
    zeta balance (==), eta wind cap; cost chords per (t,i,segment).
    """
    m = LinearModel(f"dispatch{copy_tag}")
    T = system.horizon
    s = copy_tag
    if p_init is None:
        p_init = (0.0,) * len(gens)
    for t in range(T):
        for i in range(len(gens)):
            m.add_variable(f"x_{t}_{i}", "binary")
            m.add_variable(f"p{s}_{t}_{i}")
            m.add_variable(f"r{s}_{t}_{i}", lb=0.0, ub=0.0)
            m.add_variable(f"g{s}_{t}_{i}")
        m.add_variable(f"wg{s}_{t}")
        if elastic:
            m.add_variable(f"shed{s}_{t}")
            m.add_variable(f"spill{s}_{t}")
    for i, gen in enumerate(gens):
        pwl = piecewise_cost(gen, n_segments)
        for t in range(T):
            p, r, g, x = f"p{s}_{t}_{i}", f"r{s}_{t}_{i}", f"g{s}_{t}_{i}", f"x_{t}_{i}"
            m.add_row(f"alpha{s}_{t}_{i}", {p: 1.0, x: -gen.p_min}, ">=", 0.0, "alpha")
            m.add_row(f"beta{s}_{t}_{i}", {p: 1.0, r: 1.0, x: -gen.p_max}, "<=", 0.0, "beta")
            if t:
                pprev = {f"p{s}_{t - 1}_{i}": -1.0}
                dn_rhs, up_rhs = -gen.ramp_down, gen.ramp_up
            else:
                pprev = {}
                dn_rhs, up_rhs = p_init[i] - gen.ramp_down, p_init[i] + gen.ramp_up
            m.add_row(f"gamma{s}_{t}_{i}", {p: 1.0, **pprev}, ">=", dn_rhs, "gamma")
            m.add_row(f"delta{s}_{t}_{i}", {p: 1.0, **pprev}, "<=", up_rhs, "delta")
            if pwl.slopes:
                for k, slope in enumerate(pwl.slopes):
                    intercept = pwl.values[k] - slope * pwl.breakpoints[k]
                    m.add_row(f"cost{s}_{t}_{i}_{k}",
                              {g: 1.0, p: -slope, x: -intercept}, ">=", 0.0, "cost")
            else:
                m.add_row(f"cost{s}_{t}_{i}_0",
                          {g: 1.0, x: -pwl.values[0]}, ">=", 0.0, "cost")
            m.add_objective({g: 1.0})
    for t in range(T):
        bal = {f"p{s}_{t}_{i}": 1.0 for i in range(len(gens))}
        bal[f"wg{s}_{t}"] = 1.0
        if elastic:
            bal[f"shed{s}_{t}"] = 1.0
            bal[f"spill{s}_{t}"] = -1.0
            m.add_objective({f"shed{s}_{t}": penalty, f"spill{s}_{t}": penalty})
        m.add_row(f"zeta{s}_{t}", bal, "==", system.demand[t], "zeta")
        if wind is None:
            m.add_row(f"eta{s}_{t}", {f"wg{s}_{t}": 1.0}, "<=", 0.0, "eta",
                      rhs_terms={f"w_{t}": 1.0})
        else:
            m.add_row(f"eta{s}_{t}", {f"wg{s}_{t}": 1.0}, "<=", wind[t], "eta")
    return m


def build_reserve_block(gens: list[GeneratorSpec], horizon: int, multiplier: float,
                        copy_tag: str = "") -> LinearModel:
    """Spinning reserve: for every (t,i), the headroom of the other units
    must cover multiplier * p_{t,i} (multiplier 1 = full lost-unit cover)."""
    if multiplier < 0:
        raise ValueError("multiplier must be >= 0")
    m = LinearModel(f"reserve{copy_tag}")
    s = copy_tag
    for t in range(horizon):
        for i in range(len(gens)):
            m.add_variable(f"x_{t}_{i}", "binary")
            m.add_variable(f"p{s}_{t}_{i}")
    for t in range(horizon):
        for i in range(len(gens)):
            coeffs = {f"p{s}_{t}_{i}": -multiplier}
            for ii, other in enumerate(gens):
                if ii == i:
                    continue
                coeffs[f"x_{t}_{ii}"] = other.p_max
                coeffs[f"p{s}_{t}_{ii}"] = coeffs.get(f"p{s}_{t}_{ii}", 0.0) - 1.0
            m.add_row(f"mu{s}_{t}_{i}", coeffs, ">=", 0.0, "mu")
    return m


def lr_big_m_certificate(gens: list[GeneratorSpec], system: SystemSpec,
                         lr: LRModel) -> float:
    """Smallest gating constant provably sufficient to deactivate the
    security row of an offline unit: psi minus a lower bound of the row's
    left side over the dispatch box (each term at its own worst bound)."""
    worst = math.inf
    for t in range(system.horizon):
        c3eff = lr.c3 + lr.c4 / system.demand[t]
        for i, gen in enumerate(gens):
            lo = lr.c0 + min(0.0, c3eff * gen.p_max)
            for ii, other in enumerate(gens):
                if ii == i:
                    continue
                lo += min(0.0, lr.c1 * unit_inertia_mws(other))
                lo += min(0.0, lr.c2 * unit_gain_share(other, system.s_base))
                lo += min(0.0, lr.c5 * other.p_max)
            worst = min(worst, lo)
    return max(0.0, lr.psi - worst)


def build_lr_block(gens: list[GeneratorSpec], system: SystemSpec, lr: LRModel,
                   big_m: float | None = None, copy_tag: str = "") -> LinearModel:
    """Learned frequency-security rows: for every (t,i), the predicted logit
    of losing unit i at hour t must reach the cut-point psi, gated by
    big_m*(1 - x_{t,i}) so rows of offline units are vacuous."""
    need = lr_big_m_certificate(gens, system, lr)
    if big_m is None:
        big_m = max(1.0, need)
    elif big_m < need:
        raise BigMTooSmall(f"big_m={big_m} < certificate bound {need}")
    if big_m <= 0:
        raise BigMTooSmall("big_m must be > 0")
    m = LinearModel(f"lr{copy_tag}")
    s = copy_tag
    for t in range(system.horizon):
        for i in range(len(gens)):
            m.add_variable(f"x_{t}_{i}", "binary")
            m.add_variable(f"p{s}_{t}_{i}")
    for t in range(system.horizon):
        c3eff = lr.c3 + lr.c4 / system.demand[t]
        for i in range(len(gens)):
            coeffs = {f"p{s}_{t}_{i}": c3eff, f"x_{t}_{i}": -big_m}
            for ii, other in enumerate(gens):
                if ii == i:
                    continue
                coeffs[f"x_{t}_{ii}"] = (lr.c1 * unit_inertia_mws(other)
                                         + lr.c2 * unit_gain_share(other, system.s_base)
                                         + lr.c5 * other.p_max)
                coeffs[f"p{s}_{t}_{ii}"] = coeffs.get(f"p{s}_{t}_{ii}", 0.0) - lr.c5
            m.add_row(f"rho{s}_{t}_{i}", coeffs, ">=", lr.psi - lr.c0 - big_m, "rho")
    return m
