"""Command-line driver for offline island frequency-security studies.

Each subcommand reads and writes plain files so pipeline stages can be
re-run independently; `run-all` chains them. Exit codes: 0 success,
2 infeasible (reported, not crashed), 3 solver failure, 4 config error.
"""

from __future__ import annotations

import functools
import os
import sys

import click

from . import experiment as ex
from .errors import (ConfigError, DegenerateLabels, EDInfeasible, EmptyDataset,
                     FitNonConvergence, MasterInfeasible, NumericalBlowup,
                     ParseError, SchemaError, SolverFailure, ValidationError)
from .lr_constraint import (build_dataset, fit_logistic, load_model,
                            read_dataset_csv, save_model, write_dataset_csv)
from .robust_solver import (ReservePolicy, RobustOptions, SecurityPolicy,
                            solve_ed, solve_robust_uc)
from .sfr_simulator import (OperatingPoint, SimOptions, extract_metrics,
                            simulate_outage, write_trace_csv)
from .solvers import get_adapter

EXIT_INFEASIBLE = 2
EXIT_SOLVER = 3
EXIT_CONFIG = 4

# click's own usage errors (bad flag, missing file) are config errors under
# this tool's exit-code contract; 2 is reserved for infeasible models.
click.exceptions.UsageError.exit_code = EXIT_CONFIG

_CONFIG_ERRORS = (ConfigError, ValidationError, SchemaError, ParseError,
                  EmptyDataset, DegenerateLabels, FileNotFoundError,
                  NotADirectoryError, KeyError)
_INFEASIBLE_ERRORS = (MasterInfeasible, EDInfeasible)
_SOLVER_ERRORS = (SolverFailure, FitNonConvergence, NumericalBlowup)


def _exit_codes(fn):
    """Map domain exceptions onto the documented process exit codes."""
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except _INFEASIBLE_ERRORS as exc:
            click.echo(f"infeasible: {exc}", err=True)
            sys.exit(EXIT_INFEASIBLE)
        except _SOLVER_ERRORS as exc:
            click.echo(f"solver failure: {exc}", err=True)
            sys.exit(EXIT_SOLVER)
        except _CONFIG_ERRORS as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(EXIT_CONFIG)
    return wrapper


def _parse_floats(text: str, what: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip() != "")
    except ValueError:
        raise ConfigError(f"bad {what} list: {text!r}")


def _config(island, multipliers, cutpoints, gamma, solver, seed, plots,
            config_file) -> tuple[ex.IslandCase, ex.ExperimentConfig]:
    case = ex.load_island(island)
    doc = ex.load_json(config_file) if config_file else {}
    if multipliers is not None:
        doc["multipliers"] = _parse_floats(multipliers, "multiplier")
    if cutpoints is not None:
        doc["cutpoints"] = _parse_floats(cutpoints, "cut-point")
    if gamma is not None:
        doc["gamma"] = gamma
    if solver is not None:
        doc["solver"] = solver
    if seed is not None:
        doc["seed"] = seed
    if plots is not None:
        doc["plots"] = plots
    return case, ex.config_from_document(doc)


def _policy_from_flags(multiplier, model_path, psi):
    """Reserve rule by default; the learned constraint when a model file is
    given (replacing the reserve block entirely)."""
    if model_path is None:
        if psi is not None:
            raise ConfigError("--psi requires --model")
        return ReservePolicy(multiplier)
    lr, _, _ = load_model(model_path)
    if psi is not None:
        lr = lr.with_psi(psi)
    return SecurityPolicy(lr)


@click.group()
def main():
    """Robust unit commitment and frequency-security studies for island
    grids."""


@main.command("solve-ruc")
@click.argument("island", type=click.Path(exists=True, dir_okay=False))
@click.option("--multiplier", type=float, default=1.0, show_default=True,
              help="Reserve rule: spin >= multiplier * largest online unit.")
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Trained model JSON; replaces the reserve rule.")
@click.option("--psi", type=float, default=None,
              help="Override the model file's cut-point.")
@click.option("--gamma", type=int, default=None,
              help="Uncertainty budget (hours off nominal); default: horizon.")
@click.option("--solver", default=None, help="LP/MILP adapter name.")
@click.option("--dump-models", "dump_dir", type=click.Path(file_okay=False),
              default=None, help="Write per-iteration LP/MILP dumps here.")
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Solution JSON path.")
@_exit_codes
def solve_ruc(island, multiplier, model_path, psi, gamma, solver, dump_dir, out):
    """Solve the two-stage robust unit commitment for ISLAND."""
    case = ex.load_island(island)
    policy = _policy_from_flags(multiplier, model_path, psi)
    opts = RobustOptions(eps_rel=1e-6, master_gap=1e-6, solver=solver,
                         dump_dir=dump_dir)
    sol = solve_robust_uc(list(case.gens), case.system, case.box(gamma),
                          policy, opts)
    doc = ex.solution_to_document(sol, case.gens)
    if out:
        ex.dump_json(doc, out)
    click.echo(f"cost {sol.total_cost:.2f} EUR, {sol.iterations} iterations, "
               f"gap {sol.gap:.3g}, converged {sol.converged}")
    for w in sol.warnings:
        click.echo(f"warning: {w}", err=True)
    if not out:
        click.echo("(use --out to save the commitment)")


@main.command()
@click.argument("island", type=click.Path(exists=True, dir_okay=False))
@click.option("--commitment", "commitment_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Solution JSON from solve-ruc.")
@click.option("--scenario", required=True, help="Wind scenario label.")
@click.option("--multiplier", type=float, default=None,
              help="Apply the reserve rule to the dispatch.")
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Apply the learned constraint to the dispatch.")
@click.option("--psi", type=float, default=None,
              help="Override the model file's cut-point.")
@click.option("--solver", default=None)
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Dispatch JSON path.")
@_exit_codes
def ed(island, commitment_path, scenario, multiplier, model_path, psi, solver, out):
    """Economic dispatch of a saved commitment against one wind scenario."""
    case = ex.load_island(island)
    sched = ex.schedule_from_document(ex.load_json(commitment_path))
    if model_path is None and psi is not None:
        raise ConfigError("--psi requires --model")
    if multiplier is None and model_path is None:
        policy = None
    else:
        policy = _policy_from_flags(
            1.0 if multiplier is None else multiplier, model_path, psi)
    w = case.scenarios.by_label(scenario)
    disp = solve_ed(sched, w, policy, list(case.gens), case.system,
                    get_adapter(solver))
    if out:
        ex.dump_json({"p": [list(r) for r in disp.p],
                      "r": [list(r) for r in disp.r],
                      "wg": list(disp.wg), "cost": disp.cost}, out)
    click.echo(f"dispatch cost {disp.cost:.2f} EUR for scenario {scenario}")


@main.command()
@click.argument("island", type=click.Path(exists=True, dir_okay=False))
@click.option("--commitment", "commitment_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--scenario", required=True, help="Wind scenario label.")
@click.option("--hour", type=int, required=True)
@click.option("--lose", "lost_unit", required=True, help="Unit id to trip.")
@click.option("--ufls/--no-ufls", default=False, show_default=True)
@click.option("--dt", type=float, default=1e-3, show_default=True)
@click.option("--horizon", type=float, default=15.0, show_default=True)
@click.option("--solver", default=None)
@click.option("--trace", "trace_path", type=click.Path(dir_okay=False),
              default=None, help="Write the sampled trace CSV here.")
@_exit_codes
def simulate(island, commitment_path, scenario, hour, lost_unit, ufls, dt,
             horizon, solver, trace_path):
    """Dispatch one scenario, trip one unit at one hour, report the metrics."""
    case = ex.load_island(island)
    sched = ex.schedule_from_document(ex.load_json(commitment_path))
    if not 0 <= hour < case.system.horizon:
        raise ConfigError(f"hour {hour} outside 0..{case.system.horizon - 1}")
    w = case.scenarios.by_label(scenario)
    disp = solve_ed(sched, w, None, list(case.gens), case.system,
                    get_adapter(solver))
    online = sched.online(hour)
    if not online:
        raise ConfigError(f"no units online at hour {hour}")
    units = tuple(case.gens[i] for i in online)
    p = tuple(disp.p[hour][i] for i in online)
    op = OperatingPoint(units, p, case.system.demand[hour], case.system,
                        hour=hour)
    if ufls and case.stages is None:
        raise ConfigError("island document has no ufls_stages section")
    opts = SimOptions(dt=dt, horizon=horizon, ufls=ufls,
                      stages=case.stages if ufls else None)
    trace = simulate_outage(op, lost_unit, opts)
    m = extract_metrics(trace, opts)
    if trace_path:
        write_trace_csv(trace, trace_path)
    click.echo(f"nadir {m.nadir:.4f} Hz, qss {m.qss:.4f} Hz, "
               f"rocof {m.rocof:.4f} Hz/s, ufls {m.ufls_total:.3f} MW"
               + (", UNSTABLE" if m.unstable else ""))


@main.command("build-dataset")
@click.argument("island", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--multipliers", default=None,
              help="Comma-separated reserve multipliers (default 0.0..1.5).")
@click.option("--gamma", type=int, default=None)
@click.option("--solver", default=None)
@click.option("--config", "config_file", default=None,
              type=click.Path(exists=True, dir_okay=False))
@_exit_codes
def build_dataset_cmd(island, out_dir, multipliers, gamma, solver, config_file):
    """Reserve sweep -> outage simulations -> labeled dataset.csv,
    metrics.csv, and levels.json in OUT."""
    case, config = _config(island, multipliers, None, gamma, solver, None,
                           None, config_file)
    sweep = ex.run_reserve_sweep(case, config)
    os.makedirs(out_dir, exist_ok=True)
    ex.dump_json(ex.levels_document(sweep), os.path.join(out_dir, "levels.json"))
    if not sweep.records:
        click.echo("all levels infeasible; frontier written to levels.json",
                   err=True)
        sys.exit(EXIT_INFEASIBLE)
    ds = sweep.dataset()
    write_dataset_csv(ds, os.path.join(out_dir, "dataset.csv"))
    ex.write_metrics_csv(sweep.records, os.path.join(out_dir, "metrics.csv"))
    n_ok = sum(1 for lv in sweep.levels if lv.status == "ok")
    click.echo(f"{len(ds.incidents)} incidents from {n_ok} feasible levels"
               + (f", first infeasible at {sweep.first_infeasible}"
                  if sweep.first_infeasible is not None else ""))


@main.command("train-lr")
@click.argument("dataset", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False),
              help="Model JSON path.")
@click.option("--island", "island_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="Island doc providing the labeling thresholds to record.")
@click.option("--ridge", type=float, default=ex.DEFAULT_RIDGE,
              show_default=True, help="L2 penalty on slope coefficients.")
@click.option("--psi", type=float, default=0.0, show_default=True,
              help="Cut-point stored with the model.")
@_exit_codes
def train_lr(dataset, out, island_path, ridge, psi):
    """Fit the acceptability model on a dataset CSV."""
    ds = read_dataset_csv(dataset)
    rep = fit_logistic(ds.features, ds.labels, ridge=ridge)
    thresholds = (ex.load_island(island_path).thresholds if island_path
                  else ex.AcceptabilityThresholds())
    save_model(out, rep.to_model(psi), thresholds, rep)
    click.echo(f"accuracy {rep.accuracy:.3f}, auc {rep.auc:.3f}, "
               f"{rep.iterations} iterations, converged {rep.converged}")
    if not rep.converged:
        click.echo("warning: fit did not converge", err=True)


@main.command("cutpoint-sweep")
@click.argument("island", type=click.Path(exists=True, dir_okay=False))
@click.option("--model", "model_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--cutpoints", default=None,
              help="Comma-separated cut-points (default: the study grid).")
@click.option("--gamma", type=int, default=None)
@click.option("--solver", default=None)
@click.option("--no-plots", "no_plots", is_flag=True, default=False)
@click.option("--config", "config_file", default=None,
              type=click.Path(exists=True, dir_okay=False))
@_exit_codes
def cutpoint_sweep_cmd(island, model_path, out_dir, cutpoints, gamma, solver,
                       no_plots, config_file):
    """Conventional-vs-learned comparison table over cut-points."""
    case, config = _config(island, None, cutpoints, gamma, solver, None,
                           False if no_plots else None, config_file)
    lr, _, _ = load_model(model_path)
    result = ex.run_cutpoint_sweep(case, config, lr)
    os.makedirs(out_dir, exist_ok=True)
    ex.dump_json(ex.infeasible_document(result.infeasible),
                 os.path.join(out_dir, "infeasible_cutpoints.json"))
    ex.emit_report(out_dir, result.rows, (), lr=lr, traces=result.traces,
                   trace_hour=result.trace_hour, plots=config.plots)
    click.echo(f"{len(result.rows)} rows "
               f"({len(result.infeasible)} infeasible cut-points)")


@main.command()
@click.option("--dir", "out_dir", required=True, type=click.Path(file_okay=False),
              help="Study directory holding dataset.csv/metrics.csv/comparison.csv.")
@click.option("--model", "model_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="Model JSON for the logit scatter plot.")
@click.option("--no-plots", "no_plots", is_flag=True, default=False)
@_exit_codes
def report(out_dir, model_path, no_plots):
    """Regenerate report files from a study directory's cached CSVs."""
    ds = read_dataset_csv(os.path.join(out_dir, "dataset.csv"))
    records = ex.records_from_files(ds, os.path.join(out_dir, "metrics.csv"))
    rows = ex.read_comparison_csv(os.path.join(out_dir, "comparison.csv"))
    lr = load_model(model_path)[0] if model_path else None
    written = ex.emit_report(out_dir, rows, records, lr=lr,
                             plots=not no_plots)
    click.echo("\n".join(written))


@main.command("run-all")
@click.argument("island", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--config", "config_file", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="JSON overriding the default study parameters.")
@click.option("--multipliers", default=None)
@click.option("--cutpoints", default=None)
@click.option("--gamma", type=int, default=None)
@click.option("--solver", default=None)
@click.option("--seed", type=int, default=None,
              help="Recorded for provenance; the core math is deterministic.")
@click.option("--ridge", type=float, default=ex.DEFAULT_RIDGE, show_default=True)
@click.option("--no-plots", "no_plots", is_flag=True, default=False)
@_exit_codes
def run_all(island, out_dir, config_file, multipliers, cutpoints, gamma,
            solver, seed, ridge, no_plots):
    """Full study: sweep, dataset, fit, cut-point comparison, report."""
    case, config = _config(island, multipliers, cutpoints, gamma, solver,
                           seed, False if no_plots else None, config_file)
    os.makedirs(out_dir, exist_ok=True)

    sweep = ex.run_reserve_sweep(case, config)
    ex.dump_json(ex.levels_document(sweep), os.path.join(out_dir, "levels.json"))
    if not sweep.records:
        click.echo("all levels infeasible; frontier written to levels.json",
                   err=True)
        sys.exit(EXIT_INFEASIBLE)
    ds = sweep.dataset()
    write_dataset_csv(ds, os.path.join(out_dir, "dataset.csv"))
    ex.write_metrics_csv(sweep.records, os.path.join(out_dir, "metrics.csv"))
    click.echo(f"dataset: {len(ds.incidents)} incidents")

    rep = fit_logistic(ds.features, ds.labels, ridge=ridge)
    lr = rep.to_model(psi=0.0)
    save_model(os.path.join(out_dir, "model.json"), lr, case.thresholds, rep)
    click.echo(f"fit: accuracy {rep.accuracy:.3f}, auc {rep.auc:.3f}")

    result = ex.run_cutpoint_sweep(case, config, lr)
    ex.dump_json(ex.infeasible_document(result.infeasible),
                 os.path.join(out_dir, "infeasible_cutpoints.json"))
    written = ex.emit_report(out_dir, result.rows, sweep.records, lr=lr,
                             traces=result.traces,
                             trace_hour=result.trace_hour, plots=config.plots)
    click.echo(f"comparison: {len(result.rows)} rows "
               f"({len(result.infeasible)} infeasible cut-points)")
    click.echo("\n".join(written))


if __name__ == "__main__":
    main()
