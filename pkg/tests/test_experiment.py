"""Pipeline-layer tests on a small three-unit island: sweeps, file formats,
report emission, determinism."""

import copy
import json
import os

import numpy as np
import pytest

import islanduc.experiment as ex
from islanduc.errors import (ConfigError, MasterInfeasible, ParseError,
                             SchemaError, ValidationError)
from islanduc.lr_constraint import read_dataset_csv
from islanduc.robust_solver import RobustOptions, solve_robust_uc
from islanduc.sfr_simulator import SimOptions
from islanduc.uc_formulation import LRModel

FAST_SIM = {"dt": 5e-3, "horizon": 10.0}


def _unit(uid, p_min, p_max, slope, startup, h, m_base, gain):
    return {"id": uid, "p_min": p_min, "p_max": p_max,
            "ramp_up": 50.0, "ramp_down": 50.0, "min_up": 1, "min_down": 1,
            "startup_cost": startup, "cost_quadratic": [10.0, slope, 0.5],
            "inertia_h": h, "m_base": m_base, "gov_gain": gain,
            "gov_a1": 1.0, "gov_a2": 0.2, "gov_b1": 0.3, "gov_b2": 0.0,
            "dp_min": -0.12, "dp_max": 0.2}


def island_doc():
    return {
        "system": {"s_base": 20.0, "f_nominal": 50.0, "load_damping": 1.0,
                   "demand": [9.5, 10.5, 10.0], "horizon": 3},
        "generators": [_unit("u1", 1.0, 8.0, 60.0, 30.0, 5.5, 16.0, 20.0),
                       _unit("u2", 0.8, 5.0, 85.0, 20.0, 5.0, 10.0, 18.0),
                       _unit("u3", 0.5, 4.0, 110.0, 12.0, 4.5, 8.0, 17.0)],
        "wind_scenarios": [{"label": "s0", "mw": [2.5, 3.0, 2.0]},
                           {"label": "s1", "mw": [1.5, 2.0, 1.8]}],
        "ufls_stages": [{"f_threshold": 48.9, "rocof_threshold": -0.9,
                         "shed_fraction": 0.1, "delay": 0.1}],
        "thresholds": {"nadir_min": 47.5, "rocof_min": -0.5, "qss_min": 49.6},
    }


@pytest.fixture(scope="module")
def tiny():
    return ex.island_from_document(island_doc())


def fast_config(**kw):
    kw.setdefault("sim", SimOptions(**FAST_SIM))
    return ex.ExperimentConfig(**kw)


# -- configuration ------------------------------------------------------------

def test_config_defaults():
    cfg = ex.ExperimentConfig()
    assert cfg.multipliers == ex.DEFAULT_MULTIPLIERS
    assert cfg.multipliers[0] == 0.0 and cfg.multipliers[-1] == 1.5
    assert cfg.cutpoints == ex.DEFAULT_CUTPOINTS
    assert cfg.gamma is None and cfg.plots


@pytest.mark.parametrize("kw", [
    {"multipliers": ()},
    {"multipliers": (0.5, 0.2)},
    {"multipliers": (-0.1, 0.5)},
    {"cutpoints": (0.0, float("inf"))},
    {"cutpoints": (float("nan"),)},
])
def test_config_rejects_bad_grids(kw):
    with pytest.raises(ConfigError):
        ex.ExperimentConfig(**kw)


def test_config_from_document_overrides_and_rejects_unknown():
    cfg = ex.config_from_document(
        {"multipliers": [0, 0.5], "cutpoints": [-1.0], "gamma": 2,
         "sim": {"dt": 2e-3, "horizon": 8.0}})
    assert cfg.multipliers == (0.0, 0.5)
    assert cfg.cutpoints == (-1.0,)
    assert cfg.gamma == 2 and cfg.sim.dt == 2e-3
    with pytest.raises(ConfigError):
        ex.config_from_document({"multliers": [0.5]})
    with pytest.raises(ConfigError):
        ex.config_from_document({"sim": "fast"})
    with pytest.raises(ConfigError):
        ex.config_from_document({"sim": {"dtt": 1e-3}})


# -- island documents ----------------------------------------------------------

def test_island_document_parses_protection_sections(tiny):
    assert [g.id for g in tiny.gens] == ["u1", "u2", "u3"]
    assert tiny.stages is not None and len(tiny.stages.stages) == 1
    assert tiny.stages.stages[0].f_threshold == 48.9
    assert tiny.thresholds.qss_min == 49.6
    assert tiny.box(None).budget_gamma == 3


def test_island_document_defaults_without_protection():
    doc = island_doc()
    del doc["ufls_stages"], doc["thresholds"]
    case = ex.island_from_document(doc)
    assert case.stages is None
    assert case.thresholds == ex.AcceptabilityThresholds()


def test_island_document_rejects_damaged_sections():
    doc = island_doc()
    doc["ufls_stages"] = [{"f_threshold": 48.9}]
    with pytest.raises(SchemaError):
        ex.island_from_document(doc)
    doc = island_doc()
    doc["thresholds"] = {"nadir_min": 47.5}
    with pytest.raises(SchemaError):
        ex.island_from_document(doc)


def test_load_island_file_roundtrip(tiny, tmp_path):
    p = tmp_path / "tiny.json"
    p.write_text(json.dumps(island_doc()))
    case = ex.load_island(str(p))
    assert case.system == tiny.system and case.gens == tiny.gens


# -- incident enumeration -------------------------------------------------------

def test_operating_points_cover_online_hours(tiny):
    cfg = fast_config(multipliers=(0.0,))
    sol = solve_robust_uc(list(tiny.gens), tiny.system, tiny.box(None), None,
                          cfg.robust_options())
    from islanduc.robust_solver import solve_ed
    disp = solve_ed(sol.commitment, tiny.scenarios.by_label("s0"), None,
                    list(tiny.gens), tiny.system)
    cases = ex.incident_cases(tiny.gens, tiny.system, sol.commitment, disp)
    seen = {(t, uid) for t, uid, _ in cases}
    # sole-online-unit hours are excluded: their outage is a blackout, not
    # a simulatable frequency excursion
    expected = {(t, tiny.gens[i].id)
                for t in range(3) for i in sol.commitment.online(t)
                if len(sol.commitment.online(t)) >= 2}
    assert seen == expected
    for t, uid, op in cases:
        assert op.hour == t
        assert op.demand == tiny.system.demand[t]
        assert uid in {g.id for g in op.units}
        assert len(op.units) >= 2


# -- reserve sweep ---------------------------------------------------------------

@pytest.fixture(scope="module")
def tiny_sweep(tiny):
    cfg = fast_config(multipliers=(0.0, 1.0, 6.0))
    return cfg, ex.run_reserve_sweep(tiny, cfg)


def test_sweep_records_frontier(tiny_sweep):
    cfg, sweep = tiny_sweep
    status = {lv.multiplier: lv.status for lv in sweep.levels}
    assert status == {0.0: "ok", 1.0: "ok", 6.0: "infeasible"}
    assert sweep.first_infeasible == 6.0


def test_sweep_costs_nondecreasing_in_multiplier(tiny_sweep):
    _, sweep = tiny_sweep
    costs = [lv.cost for lv in sweep.levels if lv.status == "ok"]
    assert all(b >= a - 1e-6 for a, b in zip(costs, costs[1:]))


def test_sweep_provenance_complete(tiny, tiny_sweep):
    cfg, sweep = tiny_sweep
    ok_levels = {lv.multiplier for lv in sweep.levels if lv.status == "ok"}
    labels = set(tiny.scenarios.labels())
    ids = {g.id for g in tiny.gens}
    for r in sweep.records:
        assert r.reserve in ok_levels
        assert r.scenario in labels
        assert 0 <= r.hour < tiny.system.horizon
        assert r.unit in ids
    by_level = {lv.multiplier: lv.n_incidents for lv in sweep.levels}
    for m in ok_levels:
        assert sum(1 for r in sweep.records if r.reserve == m) == by_level[m]


def test_sweep_dataset_roundtrip(tiny_sweep, tmp_path):
    _, sweep = tiny_sweep
    ds = sweep.dataset()
    assert len(ds.incidents) == len(sweep.records)
    from islanduc.lr_constraint import write_dataset_csv
    p = tmp_path / "ds.csv"
    write_dataset_csv(ds, str(p))
    assert read_dataset_csv(str(p)).incidents == ds.incidents


def test_levels_document_shape(tiny_sweep):
    _, sweep = tiny_sweep
    doc = ex.levels_document(sweep)
    assert doc["first_infeasible"] == 6.0
    assert [lv["status"] for lv in doc["levels"]] == ["ok", "ok", "infeasible"]
    assert doc["levels"][2]["detail"]


# -- metric and comparison files -------------------------------------------------

def test_metrics_csv_roundtrip(tiny_sweep, tmp_path):
    _, sweep = tiny_sweep
    path = str(tmp_path / "metrics.csv")
    ex.write_metrics_csv(sweep.records, path)
    with open(path) as fh:
        assert fh.readline().rstrip() == ",".join(ex.METRICS_HEADER)
    joined = ex.records_from_files(sweep.dataset(), path)
    assert joined == sweep.records


def test_metrics_csv_rejects_damage(tiny_sweep, tmp_path):
    _, sweep = tiny_sweep
    path = str(tmp_path / "metrics.csv")
    ex.write_metrics_csv(sweep.records[:3], path)
    lines = open(path).read().splitlines()
    bad = tmp_path / "bad.csv"
    bad.write_text("\n".join(["nope," + lines[0]] + lines[1:]) + "\n")
    with pytest.raises(SchemaError):
        ex.read_metrics_csv(str(bad))
    bad.write_text("\n".join([lines[0], "0.0,s0,0"]) + "\n")
    with pytest.raises(ParseError):
        ex.read_metrics_csv(str(bad))
    # a dataset incident with no matching metric row is an input error
    ex.write_metrics_csv(sweep.records[:2], path)
    with pytest.raises(SchemaError):
        ex.records_from_files(sweep.dataset(), path)


def _rows():
    base = ex.ComparisonRow("conventional", None, 73.1, 49.62, 48.1, -0.31,
                            2.30, 140610.0)
    lr = ex.ComparisonRow("LR@-6.91", -6.91, 75.0, 49.63, 48.2, -0.30,
                          2.06, 139830.0, -10.4, -0.6)
    return (base, lr)


def test_comparison_row_percentages_sum():
    for r in _rows():
        assert r.acceptable_pct + r.unacceptable_pct == pytest.approx(100.0)


def test_comparison_csv_roundtrip(tmp_path):
    path = str(tmp_path / "comparison.csv")
    ex.write_comparison_csv(_rows(), path)
    back = ex.read_comparison_csv(path)
    assert back == _rows()
    with open(path) as fh:
        assert fh.readline().rstrip() == ",".join(ex.COMPARISON_HEADER)
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n")
    with pytest.raises(SchemaError):
        ex.read_comparison_csv(str(bad))


def test_correlation_table_known_relations():
    rng = np.random.default_rng(3)
    records = []
    for k in range(40):
        x = float(rng.uniform(1, 2))
        # xi1 rises with nadir, xi3 falls with it, other features constant
        records.append(ex.SimRecord(0.0, "s", 0, "u", (x, 1.0, -x, 0.5, 2.0),
                                    nadir=x, qss=x, rocof=x, ufls_mw=0.0,
                                    label=1))
    table = {name: vals for name, *vals in ex.correlation_table(records)}
    assert table["sum_hm_mws"] == pytest.approx([1.0, 1.0, 1.0])
    assert table["p_loss_mw"] == pytest.approx([-1.0, -1.0, -1.0])
    # constant feature columns have no defined correlation
    assert all(np.isnan(v) for v in table["sum_k_pu"])


# -- solution documents ------------------------------------------------------------

def test_solution_document_roundtrip(tiny):
    cfg = fast_config(multipliers=(0.0,))
    sol = solve_robust_uc(list(tiny.gens), tiny.system, tiny.box(None), None,
                          cfg.robust_options())
    doc = ex.solution_to_document(sol, tiny.gens)
    assert doc["unit_ids"] == ["u1", "u2", "u3"]
    sched = ex.schedule_from_document(doc)
    assert sched == sol.commitment
    with pytest.raises(SchemaError):
        ex.schedule_from_document({"x": [[1]], "y": [[0]]})


# -- cut-point sweep -----------------------------------------------------------------

def test_cutpoint_sweep_empty_grid_keeps_conventional_row(tiny):
    cfg = fast_config(cutpoints=())
    lr = LRModel(1.0, 0.001, 0.01, -0.2, -2.0, 0.02, psi=0.0)
    res = ex.run_cutpoint_sweep(tiny, cfg, lr)
    assert len(res.rows) == 1
    row = res.rows[0]
    assert row.label == "conventional" and row.psi is None
    assert row.delta_cost_pct == 0.0 and row.delta_ufls_pct == 0.0
    assert 0.0 <= row.acceptable_pct <= 100.0
    # peak-demand hour of the tiny island is hour 1
    assert res.trace_hour == 1
    assert any(mode == "on" for _, mode in res.traces)
    assert any(mode == "off" for _, mode in res.traces)


def test_cutpoint_sweep_sentinel_psi_matches_reserve_free_cost(tiny):
    cfg = fast_config(cutpoints=(-1e6,))
    lr = LRModel(1.0, 0.001, 0.01, -0.2, -2.0, 0.02, psi=0.0)
    res = ex.run_cutpoint_sweep(tiny, cfg, lr)
    assert [r.label for r in res.rows] == ["conventional", "LR@-1e+06"]
    free = solve_robust_uc(list(tiny.gens), tiny.system, tiny.box(None), None,
                           cfg.robust_options())
    assert res.rows[1].cost == pytest.approx(free.total_cost, rel=1e-6)
    assert res.rows[1].delta_cost_pct <= 0.0  # vacuous constraint, cheaper


def test_cutpoint_sweep_records_infeasible_cutpoints(tiny):
    # demanding z >= 1e6 is unsatisfiable for any commitment
    cfg = fast_config(cutpoints=(1e6,))
    lr = LRModel(1.0, 0.001, 0.01, -0.2, -2.0, 0.02, psi=0.0)
    res = ex.run_cutpoint_sweep(tiny, cfg, lr)
    assert len(res.rows) == 1
    assert len(res.infeasible) == 1
    assert res.infeasible[0].psi == 1e6 and res.infeasible[0].reason
    doc = ex.infeasible_document(res.infeasible)
    assert doc["infeasible_cutpoints"][0]["psi"] == 1e6


# -- report emission ----------------------------------------------------------------

def test_emit_report_csv_only_and_determinism(tiny_sweep, tmp_path):
    _, sweep = tiny_sweep
    rows = _rows()
    a, b = str(tmp_path / "a"), str(tmp_path / "b")
    for d in (a, b):
        written = ex.emit_report(d, rows, sweep.records, plots=False)
        assert [os.path.basename(p) for p in written] == [
            "comparison.csv", "correlations.csv"]
    for name in ("comparison.csv", "correlations.csv"):
        pa = open(os.path.join(a, name), "rb").read()
        pb = open(os.path.join(b, name), "rb").read()
        assert pa == pb and pa


def test_emit_report_requires_rows(tmp_path):
    with pytest.raises(ValidationError):
        ex.emit_report(str(tmp_path), (), (), plots=False)


def test_emit_report_plots(tiny, tiny_sweep, tmp_path):
    _, sweep = tiny_sweep
    cfg = fast_config(cutpoints=())
    lrm = LRModel(1.0, 0.001, 0.01, -0.2, -2.0, 0.02, psi=0.0)
    res = ex.run_cutpoint_sweep(tiny, cfg, lrm)
    out = str(tmp_path / "rep")
    written = ex.emit_report(out, res.rows, sweep.records, lr=lrm,
                             traces=res.traces, trace_hour=res.trace_hour,
                             plots=True)
    names = {os.path.basename(p) for p in written}
    assert names == {"comparison.csv", "correlations.csv", "cost_vs_ufls.svg",
                     "logit_scatter.svg", "traces_hour1.svg"}
    for p in written:
        assert os.path.getsize(p) > 0
