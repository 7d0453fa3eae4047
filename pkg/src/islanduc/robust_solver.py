"""Adaptive robust unit commitment by delayed constraint generation.

Master MILP over commitment binaries with a value-function underestimator
phi; worst-case subproblem solved in the explicit LP dual of the elastic
dispatch, where the bilinear (dual @ wind) term is handled by alternating
maximization between the dual LP and budget-respecting box vertices, with
exact vertex enumeration when the vertex count is small. Feasibility cuts
come from a phase-1 (minimum violation) dual, so they never cut off
dispatch-feasible commitments. An extensive-form oracle (one dispatch copy
per vertex, shared commitments) provides the exact reference for tests, and
solve_ed evaluates a fixed commitment against one wind profile.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace

from .errors import EDInfeasible, MasterInfeasible, SolverFailure
from .grid_model import GeneratorSpec, SystemSpec, UncertaintyBox
from .linmodel import DualTemplate, LinearModel, dualize
from .solvers import INFEASIBLE, OPTIMAL, UNBOUNDED, HighsAdapter, get_adapter
from .uc_formulation import (DEFAULT_SEGMENTS, SLACK_PENALTY, LRModel,
                             build_commitment_block, build_dispatch_block,
                             build_lr_block, build_reserve_block)


# -- policies (the reserve-or-security block selector) -----------------------

@dataclass(frozen=True)
class ReservePolicy:
    """Headroom of the other units covers multiplier * own output."""
    multiplier: float = 1.0


@dataclass(frozen=True)
class SecurityPolicy:
    """Learned acceptability rows at the model's cut-point."""
    lr: LRModel
    big_m: float | None = None


def policy_block(policy, gens, system: SystemSpec, copy_tag: str = "") -> LinearModel | None:
    if policy is None:
        return None
    if isinstance(policy, ReservePolicy):
        return build_reserve_block(gens, system.horizon, policy.multiplier, copy_tag)
    if isinstance(policy, SecurityPolicy):
        return build_lr_block(gens, system, policy.lr, policy.big_m, copy_tag)
    raise TypeError(f"unknown policy {policy!r}")


# -- schedules and dispatches -------------------------------------------------

@dataclass(frozen=True)
class CommitmentSchedule:
    x: tuple[tuple[int, ...], ...]
    y: tuple[tuple[int, ...], ...]
    z: tuple[tuple[int, ...], ...]

    @classmethod
    def from_values(cls, values: dict[str, float], horizon: int, n_units: int):
        def grab(base):
            return tuple(tuple(int(round(values[f"{base}_{t}_{i}"]))
                               for i in range(n_units)) for t in range(horizon))
        return cls(grab("x"), grab("y"), grab("z"))

    @property
    def horizon(self) -> int:
        return len(self.x)

    @property
    def n_units(self) -> int:
        return len(self.x[0]) if self.x else 0

    def x_values(self) -> dict[str, float]:
        return {f"x_{t}_{i}": float(v)
                for t, row in enumerate(self.x) for i, v in enumerate(row)}

    def online(self, t: int) -> tuple[int, ...]:
        return tuple(i for i, v in enumerate(self.x[t]) if v)


def startup_cost(gens: list[GeneratorSpec], sched: CommitmentSchedule) -> float:
    return sum(gens[i].startup_cost * sched.y[t][i]
               for t in range(sched.horizon) for i in range(sched.n_units))


@dataclass(frozen=True)
class Dispatch:
    p: tuple[tuple[float, ...], ...]
    r: tuple[tuple[float, ...], ...]
    wg: tuple[float, ...]
    cost: float


@dataclass(frozen=True)
class BendersCut:
    kind: str  # "optimality" | "feasibility"
    terms: dict[str, float]  # coefficients over master x variables
    const: float
    dual_point: dict[str, float]
    w_star: tuple[float, ...]
    flagged: bool = False

    def value_at(self, x_values: dict[str, float]) -> float:
        return self.const + sum(c * x_values[v] for v, c in self.terms.items())


@dataclass(frozen=True)
class RobustSolution:
    commitment: CommitmentSchedule
    phi: float
    total_cost: float
    iterations: int
    gap: float
    worst_case_wind: tuple[float, ...]
    cut_pool: tuple[BendersCut, ...]
    converged: bool
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class RobustOptions:
    eps: float = 1.0
    eps_rel: float = 0.0  # extra slack proportional to |ub|; 0 keeps eps absolute
    max_iters: int = 200
    inner_tol: float = 1e-6
    max_inner_iters: int = 50
    slack_tol: float = 1e-6
    penalty: float = SLACK_PENALTY
    n_segments: int = DEFAULT_SEGMENTS
    vertex_mode: str = "auto"  # auto | alternate | enumerate
    enumerate_limit: int = 64
    solver: str | None = None
    master_gap: float | None = None  # loosen the master MILP; bound stays proven
    dump_dir: str | None = None
    x_init: tuple[int, ...] | None = None
    p_init: tuple[float, ...] | None = None


# -- uncertainty-set vertices -------------------------------------------------

def budget_vertices(box: UncertaintyBox, limit: int = 64) -> list[tuple[float, ...]] | None:
    """All extreme points of the budgeted box: profiles equal to nominal
    except at <= budget_gamma hours sitting at a strict bound. Nominal-first
    lexicographic order by hour; returns None when more than `limit`."""
    T = box.horizon
    devs = []
    for t in range(T):
        d = []
        if box.w_lo[t] < box.w_nom[t]:
            d.append(box.w_lo[t])
        if box.w_hi[t] > box.w_nom[t]:
            d.append(box.w_hi[t])
        devs.append(d)
    out: list[tuple[float, ...]] = []
    current: list[float] = []

    def rec(t: int, remaining: int):
        if len(out) > limit:
            return
        if t == T:
            out.append(tuple(current))
            return
        current.append(box.w_nom[t])
        rec(t + 1, remaining)
        current.pop()
        if remaining > 0:
            for d in devs[t]:
                current.append(d)
                rec(t + 1, remaining - 1)
                current.pop()

    rec(0, box.budget_gamma)
    if len(out) > limit:
        return None
    return out


def _worst_profile(box: UncertaintyBox, wcoef: dict[int, float]):
    """Maximize sum(wcoef_t * w_t) over the budgeted box; greedy on per-hour
    gains (exact: hours are separable, budget caps the count of deviations).
    Ties broken by earliest hour. Returns (profile, gain_over_nominal)."""
    gains = []
    for t in range(box.horizon):
        g = wcoef.get(t, 0.0)
        up = g * (box.w_hi[t] - box.w_nom[t])
        dn = g * (box.w_lo[t] - box.w_nom[t])
        if up >= dn:
            gains.append((up, t, box.w_hi[t]))
        else:
            gains.append((dn, t, box.w_lo[t]))
    gains.sort(key=lambda item: (-item[0], item[1]))
    w = list(box.w_nom)
    total = 0.0
    for gain, t, val in gains[:box.budget_gamma]:
        if gain <= 0.0:
            break
        w[t] = val
        total += gain
    return tuple(w), total


# -- worst-case subproblem ----------------------------------------------------

@dataclass
class SubproblemResult:
    kind: str  # "optimality" | "feasibility"
    value: float
    cut: BendersCut
    w_star: tuple[float, ...]
    flagged: bool = False
    extra_cuts: tuple[BendersCut, ...] = ()  # valid cuts from non-best inner starts


_PHASE1_SYMBOLS = ("alpha", "beta", "gamma", "delta", "mu", "rho")


class SubproblemEngine:
    """Worst-case dispatch evaluation for fixed commitments.

    Holds two dual templates built once: the elastic dispatch-cost LP and
    the phase-1 minimum-violation LP (every commitment-coupled row gets a
    violation slack). Both are parameterized in the commitment binaries and
    the hourly wind, so only the dual objective changes between calls.
    """

    def __init__(self, gens, system: SystemSpec, policy, opts: RobustOptions, adapter):
        self.gens = gens
        self.system = system
        self.opts = opts
        self.adapter = adapter
        primal = build_dispatch_block(gens, system, None, elastic=True,
                                      penalty=opts.penalty, n_segments=opts.n_segments,
                                      p_init=opts.p_init)
        blk = policy_block(policy, gens, system)
        if blk is not None:
            primal.merge(blk)
        xnames = [f"x_{t}_{i}" for t in range(system.horizon) for i in range(len(gens))]
        self.cost_primal = primal.parameterize(xnames)
        self.cost_template = dualize(self.cost_primal)

        ph = self.cost_primal.copy()
        ph.name = "phase1"
        ph.objective = {}
        ph.obj_const = 0.0
        ph.obj_terms = {}
        for t in range(system.horizon):
            ph.add_objective({f"shed_{t}": 1.0, f"spill_{t}": 1.0})
        for row in list(ph.rows):
            if row.symbol not in _PHASE1_SYMBOLS:
                continue
            v = ph.add_variable(f"viol_{row.tag}")
            row.coeffs[v] = 1.0 if row.sense == ">=" else -1.0
            ph.add_objective({v: 1.0})
        self.phase1_primal = ph
        self.phase1_template = dualize(ph)
        self._dump_count = 0

    # .. inner maximization over the budgeted box ..........................

    def _solve_dual_at(self, template: DualTemplate, xvals, w):
        values = dict(xvals)
        for t, v in enumerate(w):
            values[f"w_{t}"] = v
        lp = template.instantiate(values)
        res = self.adapter.solve(lp)
        if res.status == UNBOUNDED:
            return None, math.inf, lp
        res.require_optimal("subproblem dual")
        return res.values, res.objective, lp

    def _maximize(self, template: DualTemplate, xvals, box: UncertaintyBox):
        """max over w in box of the dual LP value; returns
        (value, duals|None, w, flagged, last_lp)."""
        opts = self.opts
        verts = None
        if opts.vertex_mode in ("auto", "enumerate"):
            verts = budget_vertices(box, opts.enumerate_limit)
            if verts is None and opts.vertex_mode == "enumerate":
                raise ValueError(f"vertex count exceeds enumerate_limit={opts.enumerate_limit}")
        if verts is not None:
            best = None
            for w in verts:
                duals, val, lp = self._solve_dual_at(template, xvals, w)
                if duals is None:
                    return math.inf, None, w, False, lp, []
                if best is None or val > best[0]:
                    best = (val, duals, w, False, lp)
            return (*best, [])

        starts = []
        for w0 in (box.w_nom, box.w_lo, box.w_hi):
            if w0 not in starts:
                starts.append(w0)
        best = None
        endpoints = []  # best (val, duals, w) of each start; extra cut sources
        flagged = False
        for w0 in starts:
            w = tuple(w0)
            run_best = None
            for _ in range(opts.max_inner_iters):
                duals, val, lp = self._solve_dual_at(template, xvals, w)
                if duals is None:
                    return math.inf, None, w, flagged, lp, []
                if run_best is None or val > run_best[0]:
                    run_best = (val, duals, w)
                if best is None or val > best[0]:
                    best = (val, duals, w, False, lp)
                const, terms = template.value_affine(duals)
                base = const + sum(terms.get(p, 0.0) * xv for p, xv in xvals.items())
                wcoef = {t: terms.get(f"w_{t}", 0.0) for t in range(box.horizon)}
                w_new, _ = _worst_profile(box, wcoef)
                pred = base + sum(wcoef[t] * w_new[t] for t in range(box.horizon))
                tol = opts.inner_tol * max(1.0, abs(val))
                if pred <= val + tol or w_new == w:
                    break
                w = w_new
            else:
                flagged = True
            if run_best is not None:
                endpoints.append(run_best)
        val, duals, w, _, lp = best
        extras = [(d, wx) for v, d, wx in endpoints if wx != w]
        return val, duals, w, flagged, lp, extras

    def _make_cut(self, template: DualTemplate, duals, w_star, kind, flagged) -> BendersCut:
        const, terms = template.value_affine(duals)
        c = const
        xterms = {}
        for p, coef in terms.items():
            if p.startswith("w_"):
                c += coef * w_star[int(p[2:])]
            elif coef != 0.0:
                xterms[p] = coef
        point = {k: v for k, v in duals.items() if v != 0.0}
        return BendersCut(kind, xterms, c, point, tuple(w_star), flagged)

    def _dump(self, lp: LinearModel, stem: str):
        if self.opts.dump_dir:
            os.makedirs(self.opts.dump_dir, exist_ok=True)
            lp.write_lp(os.path.join(self.opts.dump_dir, f"{stem}.lp"))

    def solve(self, sched: CommitmentSchedule, box: UncertaintyBox,
              iteration: int = 0) -> SubproblemResult:
        xvals = sched.x_values()
        val, duals, w_star, flagged, lp, extras = self._maximize(
            self.cost_template, xvals, box)
        self._dump(lp, f"subproblem_{iteration:04d}_dual")

        slack = math.inf
        if duals is not None:
            wvals = {f"w_{t}": v for t, v in enumerate(w_star)}
            primal_lp = self.cost_primal.bind({**xvals, **wvals})
            pres = self.adapter.solve(primal_lp).require_optimal("subproblem primal")
            scale = max(1.0, abs(val))
            if abs(pres.objective - val) > 1e-5 * scale:
                raise SolverFailure(
                    f"strong-duality mismatch: primal {pres.objective} vs dual {val}")
            slack = max(max(pres.values[f"shed_{t}"] for t in range(self.system.horizon)),
                        max(pres.values[f"spill_{t}"] for t in range(self.system.horizon)))

        if duals is None or slack > self.opts.slack_tol:
            v1, d1, w1, fl1, lp1, _ = self._maximize(self.phase1_template, xvals, box)
            if d1 is None:
                raise SolverFailure("phase-1 dual unbounded; violation LP should be feasible")
            self._dump(lp1, f"subproblem_{iteration:04d}_phase1")
            cut = self._make_cut(self.phase1_template, d1, w1, "feasibility", flagged or fl1)
            return SubproblemResult("feasibility", v1, cut, w1, flagged or fl1)
        cut = self._make_cut(self.cost_template, duals, w_star, "optimality", flagged)
        more = tuple(self._make_cut(self.cost_template, d, wx, "optimality", False)
                     for d, wx in extras)
        return SubproblemResult("optimality", val, cut, w_star, flagged, more)


def solve_subproblem(sched: CommitmentSchedule, box: UncertaintyBox, policy,
                     gens, system: SystemSpec, opts: RobustOptions | None = None,
                     adapter=None) -> tuple[float, BendersCut, tuple[float, ...]]:
    """One-shot worst-case evaluation; returns (value, cut, w_star)."""
    opts = opts or RobustOptions()
    adapter = adapter or get_adapter(opts.solver)
    engine = SubproblemEngine(gens, system, policy, opts, adapter)
    res = engine.solve(sched, box)
    return res.value, res.cut, res.w_star


# -- master -------------------------------------------------------------------

def anchor_profiles(box: UncertaintyBox) -> list[tuple[float, ...]]:
    """Budget-respecting wind profiles embedded in the master: nominal plus
    the budgeted all-low and all-high deviations. Each is a point of the
    uncertainty set, so an exact dispatch copy at it is a valid
    lower-bounding restriction; the low anchor in particular carries most of
    the scarcity signal that otherwise dribbles in one cut per iteration."""
    lo, _ = _worst_profile(box, {t: -1.0 for t in range(box.horizon)})
    hi, _ = _worst_profile(box, {t: 1.0 for t in range(box.horizon)})
    out = [tuple(box.w_nom)]
    for w in (lo, hi):
        if w not in out:
            out.append(w)
    return out


def coverage_rows(gens, system: SystemSpec, box: UncertaintyBox):
    """Per-hour valid inequalities implied by worst-case dispatch feasibility:
    committed capacity plus the lowest wind must cover demand, and committed
    minimum load must not exceed demand (wind is curtailable, so only the low
    side binds). They cut no dispatch-feasible commitment and spare the loop
    from discovering obvious capacity shortfalls one feasibility cut at a
    time."""
    rows = []
    for t in range(system.horizon):
        need = system.demand[t] - box.w_lo[t]
        rows.append((f"cover_{t}",
                     {f"x_{t}_{i}": g.p_max for i, g in enumerate(gens)},
                     ">=", need))
        rows.append((f"minload_{t}",
                     {f"x_{t}_{i}": g.p_min for i, g in enumerate(gens)},
                     "<=", system.demand[t]))
    return rows


def solve_master(cuts, gens, system: SystemSpec, adapter=None,
                 x_init: tuple[int, ...] | None = None,
                 dump_path: str | None = None, coverage=None,
                 anchors=None, policy=None, n_segments: int = DEFAULT_SEGMENTS,
                 p_init=None):
    """Commitment MILP under the current cut pool; returns
    (schedule, phi_lower, master_objective). `anchors` embeds exact dispatch
    copies at fixed in-set wind profiles under phi's epigraph, tightening
    the underestimator without cutting any robust-feasible commitment."""
    adapter = adapter or get_adapter(None)
    m = build_commitment_block(gens, system.horizon, x_init)
    m.name = "master"
    m.add_variable("phi", lb=0.0)
    m.add_objective({"phi": 1.0})
    for name, coeffs, sense, rhs in coverage or ():
        m.add_row(name, coeffs, sense, rhs, "cover")
    for k, w in enumerate(anchors or ()):
        d = build_dispatch_block(gens, system, tuple(w), elastic=False,
                                 n_segments=n_segments, p_init=p_init,
                                 copy_tag=f"_a{k}")
        cost_expr = dict(d.objective)
        d.objective = {}
        m.merge(d)
        blk = policy_block(policy, gens, system, copy_tag=f"_a{k}")
        if blk is not None:
            m.merge(blk)
        m.add_row(f"anchor_epi_{k}",
                  {"phi": 1.0, **{v: -c for v, c in cost_expr.items()}},
                  ">=", 0.0, "epi")
    for k, cut in enumerate(cuts):
        coeffs = {v: -c for v, c in cut.terms.items() if c != 0.0}
        if cut.kind == "optimality":
            coeffs["phi"] = 1.0
        m.add_row(f"cut_{cut.kind[:4]}_{k}", coeffs, ">=", cut.const, "cut")
    if dump_path:
        m.write_lp(dump_path)
    res = adapter.solve(m)
    if res.status == INFEASIBLE:
        raise MasterInfeasible(
            f"no commitment satisfies the {len(cuts)}-cut pool "
            f"({sum(1 for c in cuts if c.kind == 'feasibility')} feasibility cuts)",
            cuts)
    res.require_optimal("master")
    sched = CommitmentSchedule.from_values(res.values, system.horizon, len(gens))
    bound = res.objective if res.dual_bound is None else res.dual_bound
    return sched, res.values["phi"], bound


# -- the full loop ------------------------------------------------------------

def solve_robust_uc(gens, system: SystemSpec, box: UncertaintyBox, policy=None,
                    opts: RobustOptions | None = None, adapter=None) -> RobustSolution:
    """Iterate master and worst-case subproblem until the current-iterate
    upper bound meets the master lower bound within eps. Keeps the whole cut
    pool; returns the best incumbent (flagged unconverged at the iteration
    cap rather than raising)."""
    opts = opts or RobustOptions()
    adapter = adapter or get_adapter(opts.solver)
    engine = SubproblemEngine(gens, system, policy, opts, adapter)
    master_adapter = adapter
    if opts.master_gap is not None and isinstance(adapter, HighsAdapter):
        master_adapter = HighsAdapter(mip_rel_gap=opts.master_gap)
    cover = coverage_rows(gens, system, box)
    anchors = anchor_profiles(box)
    cuts: list[BendersCut] = []
    warnings: list[str] = []
    best = None  # (ub, sched, sub)
    lower = -math.inf
    iteration = 0
    converged = False
    last_sched = None
    for iteration in range(1, opts.max_iters + 1):
        dump = None
        if opts.dump_dir:
            os.makedirs(opts.dump_dir, exist_ok=True)
            dump = os.path.join(opts.dump_dir, f"master_{iteration:04d}.lp")
        sched, phi_lb, master_obj = solve_master(
            cuts, gens, system, master_adapter, opts.x_init, dump, cover,
            anchors=anchors, policy=policy, n_segments=opts.n_segments,
            p_init=opts.p_init)
        last_sched = sched
        lower = max(lower, master_obj)
        sub = engine.solve(sched, box, iteration)
        if sub.flagged:
            warnings.append(f"inner loop hit its iteration cap at iteration {iteration}")
        cuts.append(sub.cut)
        cuts.extend(sub.extra_cuts)
        if sub.kind == "optimality":
            ub = startup_cost(gens, sched) + sub.value
            if best is None or ub < best[0]:
                best = (ub, sched, sub)
            if best[0] - lower <= max(opts.eps, opts.eps_rel * max(1.0, abs(best[0]))):
                converged = True
                break
    if not converged:
        warnings.append(f"iteration limit {opts.max_iters} reached")
    if best is None:
        return RobustSolution(last_sched, math.inf, math.inf, iteration, math.inf,
                              tuple(box.w_nom), tuple(cuts), False,
                              tuple(warnings + ["no dispatch-feasible commitment found"]))
    ub, sched, sub = best
    gap = max(0.0, ub - lower)
    return RobustSolution(sched, sub.value, ub, iteration, gap, sub.w_star,
                          tuple(cuts), converged, tuple(warnings))


# -- oracles and dispatch -----------------------------------------------------

@dataclass(frozen=True)
class ExtensiveResult:
    objective: float
    commitment: CommitmentSchedule


def solve_extensive_oracle(gens, system: SystemSpec, vertices, policy=None,
                           adapter=None, *, n_segments: int = DEFAULT_SEGMENTS,
                           x_init=None, p_init=None) -> ExtensiveResult:
    """Exact robust optimum for vertex-representable sets: one dispatch copy
    per vertex, shared commitments, epigraph of the per-vertex costs."""
    if not vertices:
        raise ValueError("empty vertex list")
    adapter = adapter or get_adapter(None)
    m = build_commitment_block(gens, system.horizon, x_init)
    m.name = "extensive"
    m.add_variable("Phi", lb=0.0)
    m.add_objective({"Phi": 1.0})
    for k, w in enumerate(vertices):
        d = build_dispatch_block(gens, system, tuple(w), elastic=False,
                                 n_segments=n_segments, p_init=p_init,
                                 copy_tag=f"_v{k}")
        cost_expr = dict(d.objective)
        d.objective = {}
        m.merge(d)
        blk = policy_block(policy, gens, system, copy_tag=f"_v{k}")
        if blk is not None:
            m.merge(blk)
        m.add_row(f"epi_v{k}", {"Phi": 1.0, **{v: -c for v, c in cost_expr.items()}},
                  ">=", 0.0, "epi")
    res = adapter.solve(m)
    if res.status == INFEASIBLE:
        raise MasterInfeasible("extensive form infeasible", ())
    res.require_optimal("extensive oracle")
    sched = CommitmentSchedule.from_values(res.values, system.horizon, len(gens))
    return ExtensiveResult(res.objective, sched)


def solve_deterministic_uc(gens, system: SystemSpec, wind, policy=None,
                           adapter=None, **kw) -> ExtensiveResult:
    """Plain UC MILP at one known wind profile."""
    return solve_extensive_oracle(gens, system, [tuple(wind)], policy, adapter, **kw)


def solve_ed(sched: CommitmentSchedule, wind, policy, gens, system: SystemSpec,
             adapter=None, *, n_segments: int = DEFAULT_SEGMENTS,
             p_init=None) -> Dispatch:
    """Fixed-commitment economic dispatch against one wind profile."""
    adapter = adapter or get_adapter(None)
    d = build_dispatch_block(gens, system, tuple(wind), elastic=False,
                             n_segments=n_segments, p_init=p_init)
    blk = policy_block(policy, gens, system)
    if blk is not None:
        d.merge(blk)
    T, I = system.horizon, len(gens)
    lp = d.parameterize([f"x_{t}_{i}" for t in range(T) for i in range(I)])
    lp = lp.bind(sched.x_values())
    res = adapter.solve(lp)
    if res.status in (INFEASIBLE, UNBOUNDED):
        raise EDInfeasible(f"dispatch infeasible for the given commitment ({res.status})")
    res.require_optimal("economic dispatch")
    v = res.values
    p = tuple(tuple(v[f"p_{t}_{i}"] for i in range(I)) for t in range(T))
    r = tuple(tuple(v[f"r_{t}_{i}"] for i in range(I)) for t in range(T))
    wg = tuple(v[f"wg_{t}"] for t in range(T))
    return Dispatch(p, r, wg, res.objective)
