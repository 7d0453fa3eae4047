"""Offline study pipeline: reserve sweep, incident dataset, security fit,
cut-point sweep, and report emission.

The flow mirrors the operational question the toolkit answers: how does a
commitment chosen under a conventional reserve rule compare, incident by
incident, against commitments chosen under a learned frequency-security
constraint at different cut-points. Every stage writes plain files so runs
are resumable and diffable; identical configs produce byte-identical CSVs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (ConfigError, EDInfeasible, EmptyDataset, MasterInfeasible,
                     SchemaError, SolverFailure, ValidationError)
from .grid_model import (GeneratorSpec, SystemSpec, WindScenarioSet,
                         read_document, scenario_envelope, system_from_document)
from .lr_constraint import (AcceptabilityThresholds, Dataset, Incident,
                            build_dataset, incident_features, label_incident,
                            pearson, predict_logit)
from .robust_solver import (CommitmentSchedule, Dispatch, ReservePolicy,
                            RobustOptions, SecurityPolicy, solve_ed,
                            solve_robust_uc)
from .solvers import get_adapter
from .sfr_simulator import (OperatingPoint, SimOptions, UFLSStageTable,
                            simulate_batch, simulate_outage)
from .uc_formulation import LRModel

DEFAULT_MULTIPLIERS = tuple(round(0.1 * k, 1) for k in range(16))  # 0.0 .. 1.5
DEFAULT_CUTPOINTS = (2.12, 0.0, -2.12, -4.95, -5.0, -6.91, -9.21, -10.0, -11.51)
# Sweep datasets from a deterministic simulator separate almost perfectly, so
# the study fit uses a ridge strong enough to keep the logit scale calibrated
# (unpenalized separable fits blow the coefficients up and turn every
# cut-point into the same constraint).
DEFAULT_RIDGE = 100.0

METRICS_HEADER = ("reserve_level", "scenario", "hour", "lost_unit",
                  "nadir", "qss", "rocof", "ufls_mw", "label")
COMPARISON_HEADER = ("label", "acceptable_pct", "unacceptable_pct", "avg_qss_hz",
                     "avg_nadir_hz", "avg_rocof_hzps", "avg_ufls_mw", "cost_eur",
                     "delta_ufls_pct", "delta_cost_pct")
CORRELATIONS_HEADER = ("feature", "nadir", "qss", "rocof")


# -- configuration ---------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    multipliers: tuple[float, ...] = DEFAULT_MULTIPLIERS
    cutpoints: tuple[float, ...] = DEFAULT_CUTPOINTS
    gamma: int | None = None  # uncertainty budget; None = horizon (pure box)
    solver: str | None = None
    seed: int = 0  # recorded for provenance; the core math is deterministic
    eps_rel: float = 1e-6
    master_gap: float | None = 1e-6
    sim: SimOptions = field(default_factory=SimOptions)
    chunk_size: int = 512
    plots: bool = True

    def __post_init__(self):
        if not self.multipliers:
            raise ConfigError("multiplier list is empty")
        if any(m < 0 for m in self.multipliers):
            raise ConfigError("reserve multipliers must be non-negative")
        if any(b < a for a, b in zip(self.multipliers, self.multipliers[1:])):
            raise ConfigError("reserve multipliers must be ascending")
        if any(not math.isfinite(p) for p in self.cutpoints):
            raise ConfigError("cut-points must be finite")

    def robust_options(self) -> RobustOptions:
        return RobustOptions(eps_rel=self.eps_rel, master_gap=self.master_gap,
                             solver=self.solver)


def config_from_document(doc: dict) -> ExperimentConfig:
    """ExperimentConfig from a plain dict (JSON config file); unknown keys
    are rejected so typos fail loudly."""
    known = {"multipliers", "cutpoints", "gamma", "solver", "seed", "eps_rel",
             "master_gap", "sim", "chunk_size", "plots"}
    extra = set(doc) - known
    if extra:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(extra))}")
    kw = dict(doc)
    if "multipliers" in kw:
        kw["multipliers"] = tuple(float(v) for v in kw["multipliers"])
    if "cutpoints" in kw:
        kw["cutpoints"] = tuple(float(v) for v in kw["cutpoints"])
    if "sim" in kw:
        sim = kw["sim"]
        if not isinstance(sim, dict):
            raise ConfigError("config key 'sim' must be an object")
        try:
            kw["sim"] = SimOptions(**sim)
        except TypeError as exc:
            raise ConfigError(f"bad sim options: {exc}")
    try:
        return ExperimentConfig(**kw)
    except TypeError as exc:
        raise ConfigError(f"bad config: {exc}")


# -- island document with protection and labeling sections -------------------------

@dataclass(frozen=True)
class IslandCase:
    system: SystemSpec
    gens: tuple[GeneratorSpec, ...]
    scenarios: WindScenarioSet
    stages: UFLSStageTable | None
    thresholds: AcceptabilityThresholds

    def box(self, gamma: int | None):
        g = self.system.horizon if gamma is None else gamma
        return scenario_envelope(self.scenarios, g)


def island_from_document(doc: dict) -> IslandCase:
    system, gens, ws = system_from_document(doc)
    stages = None
    rows = doc.get("ufls_stages")
    if rows:
        if not isinstance(rows, list):
            raise SchemaError("section 'ufls_stages' must be a list")
        try:
            stages = UFLSStageTable.from_rows(
                [(r["f_threshold"], r["rocof_threshold"], r["shed_fraction"],
                  r["delay"]) for r in rows])
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"ufls_stages: bad row ({exc})")
    th = doc.get("thresholds")
    if th is None:
        thresholds = AcceptabilityThresholds()
    else:
        try:
            thresholds = AcceptabilityThresholds(
                float(th["nadir_min"]), float(th["rocof_min"]), float(th["qss_min"]))
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"thresholds: bad section ({exc})")
    return IslandCase(system, tuple(gens), ws, stages, thresholds)


def load_island(path: str) -> IslandCase:
    return island_from_document(read_document(path))


# -- incident generation -------------------------------------------------------------

@dataclass(frozen=True)
class SimRecord:
    """One simulated outage: provenance, dispatch features, and response."""
    reserve: float
    scenario: str
    hour: int
    unit: str
    xi: tuple[float, float, float, float, float]
    nadir: float
    qss: float
    rocof: float
    ufls_mw: float
    label: int

    def to_incident(self) -> Incident:
        return Incident(*self.xi, self.label, self.reserve, self.scenario,
                        self.hour, self.unit)


def operating_points(gens, system: SystemSpec, sched: CommitmentSchedule,
                     disp: Dispatch):
    """(hour, OperatingPoint) per hour with at least one online unit."""
    out = []
    for t in range(system.horizon):
        online = sched.online(t)
        if not online:
            continue
        units = tuple(gens[i] for i in online)
        p = tuple(disp.p[t][i] for i in online)
        out.append((t, OperatingPoint(units, p, system.demand[t], system, hour=t)))
    return out


def incident_cases(gens, system: SystemSpec, sched: CommitmentSchedule,
                   disp: Dispatch):
    """Every single-unit outage of the dispatch: ((hour, unit_id, op), ...).
    Hours with a single online unit are excluded; losing it is a blackout,
    not a frequency excursion the response model can describe."""
    cases = []
    for t, op in operating_points(gens, system, sched, disp):
        if len(op.units) < 2:
            continue
        for g in op.units:
            cases.append((t, g.id, op))
    return cases


def simulate_incidents(cases, thresholds: AcceptabilityThresholds,
                       opts: SimOptions, chunk_size: int = 512):
    """Batch metrics + labels for ((hour, unit, op), ...) incident cases."""
    metrics = simulate_batch([(op, unit) for _, unit, op in cases], opts,
                             chunk_size=chunk_size)
    return [(case, m, label_incident(m, thresholds))
            for case, m in zip(cases, metrics)]


# -- reserve sweep ---------------------------------------------------------------------

@dataclass(frozen=True)
class LevelOutcome:
    multiplier: float
    status: str  # "ok" | "infeasible" | "failed"
    cost: float | None = None
    n_incidents: int = 0
    skipped_scenarios: tuple[str, ...] = ()
    detail: str = ""


@dataclass(frozen=True)
class SweepResult:
    records: tuple[SimRecord, ...]
    levels: tuple[LevelOutcome, ...]
    first_infeasible: float | None

    def dataset(self) -> Dataset:
        return build_dataset(r.to_incident() for r in self.records)


def _policy_incidents(case: IslandCase, config: ExperimentConfig, sol,
                      policy, reserve_key: float):
    """ED each scenario under `policy`, simulate every outage with UFLS off,
    and return (records, skipped scenario labels)."""
    opts_off = replace(config.sim, ufls=False, stages=None)
    adapter = get_adapter(config.solver)
    records = []
    skipped = []
    for label, w in case.scenarios.scenarios:
        try:
            disp = solve_ed(sol.commitment, w, policy, list(case.gens),
                            case.system, adapter)
        except EDInfeasible:
            skipped.append(label)
            continue
        cases = incident_cases(case.gens, case.system, sol.commitment, disp)
        for (t, unit, op), m, lab in simulate_incidents(
                cases, case.thresholds, opts_off, config.chunk_size):
            records.append(SimRecord(
                reserve_key, label, t, unit,
                incident_features(op.units, op.p, op.demand,
                                  case.system.s_base, unit),
                m.nadir, m.qss, m.rocof, m.ufls_total, lab))
    return records, tuple(skipped)


def run_reserve_sweep(case: IslandCase, config: ExperimentConfig) -> SweepResult:
    """Solve the robust UC at each reserve multiplier, dispatch every wind
    scenario, and simulate every single-unit outage with UFLS off. Infeasible
    levels are recorded and skipped so the feasibility frontier is explicit."""
    box = case.box(config.gamma)
    ropts = config.robust_options()
    records: list[SimRecord] = []
    levels: list[LevelOutcome] = []
    first_infeasible = None
    for mult in config.multipliers:
        policy = ReservePolicy(mult)
        try:
            sol = solve_robust_uc(list(case.gens), case.system, box, policy, ropts)
        except MasterInfeasible as exc:
            levels.append(LevelOutcome(mult, "infeasible", detail=str(exc)))
            if first_infeasible is None:
                first_infeasible = mult
            continue
        except SolverFailure as exc:
            levels.append(LevelOutcome(mult, "failed", detail=str(exc)))
            continue
        recs, skipped = _policy_incidents(case, config, sol, policy, mult)
        records.extend(recs)
        levels.append(LevelOutcome(mult, "ok", sol.total_cost, len(recs), skipped))
    return SweepResult(tuple(records), tuple(levels), first_infeasible)


# -- cut-point sweep -----------------------------------------------------------------

@dataclass(frozen=True)
class ComparisonRow:
    label: str  # "conventional" | "lr@<psi>"
    psi: float | None
    acceptable_pct: float
    avg_qss: float
    avg_nadir: float
    avg_rocof: float
    avg_ufls_mw: float
    cost: float
    delta_ufls_pct: float = 0.0
    delta_cost_pct: float = 0.0

    @property
    def unacceptable_pct(self) -> float:
        return 100.0 - self.acceptable_pct


@dataclass(frozen=True)
class InfeasibleCutpoint:
    psi: float
    reason: str


@dataclass(frozen=True)
class CutpointSweepResult:
    rows: tuple[ComparisonRow, ...]
    infeasible: tuple[InfeasibleCutpoint, ...]
    traces: dict  # (unit, "on"|"off") -> FrequencyTrace at the peak hour
    trace_hour: int
    row_records: tuple[tuple[SimRecord, ...], ...] = ()  # parallel to rows


def _evaluate_policy(case: IslandCase, config: ExperimentConfig, policy,
                     label: str, psi: float | None, reserve_key: float):
    """One ComparisonRow (without deltas) for an already-feasible policy."""
    box = case.box(config.gamma)
    sol = solve_robust_uc(list(case.gens), case.system, box, policy,
                          config.robust_options())
    records, _ = _policy_incidents(case, config, sol, policy, reserve_key)
    if not records:
        raise EmptyDataset(f"{label}: no simulatable incidents")
    lab = np.array([r.label for r in records], dtype=float)
    # shed totals come from a second, UFLS-armed pass over the same incidents
    if case.stages is None:
        raise ConfigError("island document has no ufls_stages section")
    opts_on = replace(config.sim, ufls=True, stages=case.stages)
    adapter = get_adapter(config.solver)
    shed = []
    for _slabel, w in case.scenarios.scenarios:
        try:
            disp = solve_ed(sol.commitment, w, policy, list(case.gens),
                            case.system, adapter)
        except EDInfeasible:
            continue
        cases = incident_cases(case.gens, case.system, sol.commitment, disp)
        shed.extend(m.ufls_total for m in simulate_batch(
            [(op, unit) for _, unit, op in cases], opts_on,
            chunk_size=config.chunk_size))
    row = ComparisonRow(
        label, psi,
        acceptable_pct=100.0 * float(np.mean(lab)),
        avg_qss=float(np.mean([r.qss for r in records])),
        avg_nadir=float(np.mean([r.nadir for r in records])),
        avg_rocof=float(np.mean([r.rocof for r in records])),
        avg_ufls_mw=float(np.mean(shed)) if shed else 0.0,
        cost=sol.total_cost)
    return row, sol, tuple(records)


def _with_deltas(row: ComparisonRow, base: ComparisonRow) -> ComparisonRow:
    du = 0.0 if base.avg_ufls_mw == 0.0 else \
        100.0 * (row.avg_ufls_mw - base.avg_ufls_mw) / base.avg_ufls_mw
    dc = 0.0 if base.cost == 0.0 else 100.0 * (row.cost - base.cost) / base.cost
    return replace(row, delta_ufls_pct=du, delta_cost_pct=dc)


def _peak_hour_traces(case: IslandCase, config: ExperimentConfig, sol) -> tuple[dict, int]:
    """UFLS-on and UFLS-off traces of every outage at the peak-demand hour,
    under the nominal-wind dispatch of the given solution."""
    t_star = max(range(case.system.horizon), key=lambda t: case.system.demand[t])
    box = case.box(config.gamma)
    disp = solve_ed(sol.commitment, box.w_nom, None, list(case.gens),
                    case.system, get_adapter(config.solver))
    online = sol.commitment.online(t_star)
    units = tuple(case.gens[i] for i in online)
    p = tuple(disp.p[t_star][i] for i in online)
    op = OperatingPoint(units, p, case.system.demand[t_star], case.system,
                        hour=t_star)
    traces = {}
    for g in units:
        traces[(g.id, "off")] = simulate_outage(
            op, g.id, replace(config.sim, ufls=False, stages=None))
        if case.stages is not None:
            traces[(g.id, "on")] = simulate_outage(
                op, g.id, replace(config.sim, ufls=True, stages=case.stages))
    return traces, t_star


def run_cutpoint_sweep(case: IslandCase, config: ExperimentConfig,
                       lr: LRModel) -> CutpointSweepResult:
    """Row 0: the conventional reserve rule at multiplier 1. One row per
    cut-point, where the learned constraint replaces the reserve block
    entirely. Infeasible cut-points are recorded, not fatal."""
    base_row, base_sol, base_recs = _evaluate_policy(
        case, config, ReservePolicy(1.0), "conventional", None, -1.0)
    rows = [base_row]
    row_records = [base_recs]
    infeasible = []
    for psi in config.cutpoints:
        policy = SecurityPolicy(lr.with_psi(psi))
        label = f"LR@{psi:g}"
        try:
            row, _, recs = _evaluate_policy(case, config, policy, label, psi,
                                            -1.0)
        except (MasterInfeasible, EmptyDataset) as exc:
            infeasible.append(InfeasibleCutpoint(psi, str(exc)))
            continue
        rows.append(_with_deltas(row, base_row))
        row_records.append(recs)
    traces, t_star = _peak_hour_traces(case, config, base_sol)
    return CutpointSweepResult(tuple(rows), tuple(infeasible), traces, t_star,
                               tuple(row_records))


# -- file formats ------------------------------------------------------------------------

def solution_to_document(sol, gens) -> dict:
    return {
        "unit_ids": [g.id for g in gens],
        "x": [list(row) for row in sol.commitment.x],
        "y": [list(row) for row in sol.commitment.y],
        "z": [list(row) for row in sol.commitment.z],
        "phi": sol.phi,
        "total_cost": sol.total_cost,
        "iterations": sol.iterations,
        "gap": sol.gap,
        "worst_case_wind": list(sol.worst_case_wind),
        "converged": sol.converged,
        "warnings": list(sol.warnings),
    }


def schedule_from_document(doc: dict) -> CommitmentSchedule:
    try:
        grab = lambda key: tuple(tuple(int(v) for v in row) for row in doc[key])
        return CommitmentSchedule(grab("x"), grab("y"), grab("z"))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad solution document: {exc}")


def dump_json(doc, path: str):
    import json
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_json(path: str) -> dict:
    import json
    from .errors import ParseError
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc}")


def levels_document(sweep: SweepResult) -> dict:
    return {
        "first_infeasible": sweep.first_infeasible,
        "levels": [{"multiplier": lv.multiplier, "status": lv.status,
                    "cost": lv.cost, "n_incidents": lv.n_incidents,
                    "skipped_scenarios": list(lv.skipped_scenarios),
                    "detail": lv.detail} for lv in sweep.levels],
    }


def infeasible_document(infeasible) -> dict:
    return {"infeasible_cutpoints": [{"psi": ic.psi, "reason": ic.reason}
                                     for ic in infeasible]}


# -- report files -----------------------------------------------------------------------

def write_metrics_csv(records, path: str):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(METRICS_HEADER) + "\n")
        for r in records:
            fh.write(",".join([repr(r.reserve), r.scenario, str(r.hour), r.unit,
                               repr(r.nadir), repr(r.qss), repr(r.rocof),
                               repr(r.ufls_mw), str(r.label)]) + "\n")


def write_comparison_csv(rows, path: str):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(COMPARISON_HEADER) + "\n")
        for r in rows:
            fh.write(",".join([r.label, repr(r.acceptable_pct),
                               repr(r.unacceptable_pct), repr(r.avg_qss),
                               repr(r.avg_nadir), repr(r.avg_rocof),
                               repr(r.avg_ufls_mw), repr(r.cost),
                               repr(r.delta_ufls_pct),
                               repr(r.delta_cost_pct)]) + "\n")


def read_metrics_csv(path: str):
    """Per-incident metric rows as written by write_metrics_csv, keyed by
    provenance so they can be joined back onto a dataset."""
    from .errors import ParseError
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header.split(",") != list(METRICS_HEADER):
            raise SchemaError(f"{path}: unexpected header {header!r}")
        out = {}
        for ln, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split(",")
            if len(parts) != len(METRICS_HEADER):
                raise ParseError(f"{path}:{ln}: expected "
                                 f"{len(METRICS_HEADER)} fields")
            try:
                key = (float(parts[0]), parts[1], int(parts[2]), parts[3])
                out[key] = (float(parts[4]), float(parts[5]), float(parts[6]),
                            float(parts[7]), int(parts[8]))
            except ValueError as exc:
                raise ParseError(f"{path}:{ln}: {exc}")
    return out


def records_from_files(dataset: Dataset, metrics_path: str) -> tuple[SimRecord, ...]:
    """Rejoin a written dataset with its metric export; incidents missing a
    metric row are an input error."""
    metrics = read_metrics_csv(metrics_path)
    records = []
    for inc in dataset.incidents:
        key = (inc.reserve, inc.scenario, inc.hour, inc.unit)
        if key not in metrics:
            raise SchemaError(f"metrics file has no row for incident {key}")
        nadir, qss, rocof, ufls_mw, label = metrics[key]
        records.append(SimRecord(inc.reserve, inc.scenario, inc.hour, inc.unit,
                                 inc.features, nadir, qss, rocof, ufls_mw,
                                 label))
    return tuple(records)


def read_comparison_csv(path: str) -> tuple[ComparisonRow, ...]:
    from .errors import ParseError
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header.split(",") != list(COMPARISON_HEADER):
            raise SchemaError(f"{path}: unexpected header {header!r}")
        rows = []
        for ln, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split(",")
            if len(parts) != len(COMPARISON_HEADER):
                raise ParseError(f"{path}:{ln}: expected "
                                 f"{len(COMPARISON_HEADER)} fields")
            label = parts[0]
            try:
                psi = float(label[3:]) if label.startswith("LR@") else None
                vals = [float(v) for v in parts[1:]]
            except ValueError as exc:
                raise ParseError(f"{path}:{ln}: {exc}")
            rows.append(ComparisonRow(label, psi, vals[0], vals[2], vals[3],
                                      vals[4], vals[5], vals[6], vals[7],
                                      vals[8]))
    return tuple(rows)


def correlation_table(records):
    """Pearson correlation of each dispatch feature against each response
    metric, over all incidents; rows ordered as the feature vector. A column
    without variation has no defined correlation and reports nan."""
    from .errors import ZeroVariance
    names = ("sum_hm_mws", "sum_k_pu", "p_loss_mw", "p_loss_over_d",
             "headroom_mw")
    xi = np.array([r.xi for r in records], dtype=float)
    cols = {"nadir": np.array([r.nadir for r in records]),
            "qss": np.array([r.qss for r in records]),
            "rocof": np.array([r.rocof for r in records])}
    table = []
    for j, name in enumerate(names):
        row = [name]
        for key in ("nadir", "qss", "rocof"):
            try:
                row.append(pearson(xi[:, j], cols[key]))
            except ZeroVariance:
                row.append(float("nan"))
        table.append(row)
    return table


def write_correlations_csv(records, path: str):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(CORRELATIONS_HEADER) + "\n")
        for name, *vals in correlation_table(records):
            fh.write(",".join([name] + [repr(v) for v in vals]) + "\n")


def _deterministic_matplotlib():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    plt.rcParams["svg.hashsalt"] = "islanduc"
    return plt


def _save_svg(fig, path: str):
    fig.savefig(path, format="svg", metadata={"Date": None})


def plot_cost_vs_ufls(rows, path: str):
    plt = _deterministic_matplotlib()
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for r in rows:
        marker = "s" if r.psi is None else "o"
        ax.scatter([r.avg_ufls_mw], [r.cost / 1e3], marker=marker, s=36,
                   color="#a23b3b" if r.psi is None else "#2a6f97")
        ax.annotate(r.label, (r.avg_ufls_mw, r.cost / 1e3), fontsize=7,
                    xytext=(3, 3), textcoords="offset points")
    ax.set_xlabel("average UFLS [MW]")
    ax.set_ylabel("operation cost [kEUR]")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    _save_svg(fig, path)
    plt.close(fig)


def plot_logit_scatter(records, lr: LRModel, path: str):
    plt = _deterministic_matplotlib()
    z = np.array([predict_logit(lr, r.xi) for r in records])
    nad = np.array([r.nadir for r in records])
    lab = np.array([r.label for r in records])
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for val, color, name in ((1, "#2a6f97", "acceptable"),
                             (0, "#a23b3b", "unacceptable")):
        sel = lab == val
        ax.scatter(z[sel], nad[sel], s=6, alpha=0.4, color=color, label=name,
                   linewidths=0)
    ax.axvline(0.0, color="#444444", lw=0.8, ls="--")
    ax.set_xlabel("fitted logit")
    ax.set_ylabel("frequency nadir [Hz]")
    ax.legend(loc="lower right", fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    _save_svg(fig, path)
    plt.close(fig)


def plot_traces(traces: dict, hour: int, path: str):
    plt = _deterministic_matplotlib()
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    units = sorted({u for u, _ in traces})
    cmap = plt.get_cmap("tab10")
    for j, unit in enumerate(units):
        for mode, style in (("off", "--"), ("on", "-")):
            tr = traces.get((unit, mode))
            if tr is None:
                continue
            ax.plot(tr.times, tr.f, style, lw=1.1, color=cmap(j % 10),
                    label=f"lose {unit} (UFLS {mode})")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("frequency [Hz]")
    ax.set_title(f"outages at hour {hour}")
    ax.legend(fontsize=7)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    _save_svg(fig, path)
    plt.close(fig)


def emit_report(out_dir: str, rows, records, lr: LRModel | None = None,
                traces: dict | None = None, trace_hour: int | None = None,
                plots: bool = True) -> list[str]:
    """Write the comparison and correlation tables (and plots unless
    disabled); returns the paths written."""
    import os
    if not rows:
        raise ValidationError("no comparison rows to report")
    os.makedirs(out_dir, exist_ok=True)
    written = []

    p = os.path.join(out_dir, "comparison.csv")
    write_comparison_csv(rows, p)
    written.append(p)
    if records:
        p = os.path.join(out_dir, "correlations.csv")
        write_correlations_csv(records, p)
        written.append(p)
    if plots:
        p = os.path.join(out_dir, "cost_vs_ufls.svg")
        plot_cost_vs_ufls(rows, p)
        written.append(p)
        if records and lr is not None:
            p = os.path.join(out_dir, "logit_scatter.svg")
            plot_logit_scatter(records, lr, p)
            written.append(p)
        if traces:
            p = os.path.join(out_dir, f"traces_hour{trace_hour}.svg")
            plot_traces(traces, trace_hour, p)
            written.append(p)
    return written
