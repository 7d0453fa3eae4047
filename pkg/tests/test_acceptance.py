"""End-to-end acceptance checks, one test per shipping criterion.

Each test prints a single "criterion N: PASS" line with the measured
numbers when it holds, so a verbose run reads as a checklist. The slow
criteria (7 and 8) share one full study pipeline on the bundled island;
everything else runs on purpose-built small instances.
"""

import json
import math
import os
import time

import numpy as np
import pytest
from click.testing import CliRunner
from scipy import signal
from scipy.special import expit
from scipy.stats import spearmanr

from islanduc.cli import main as cli_main
from islanduc.experiment import (DEFAULT_RIDGE, ExperimentConfig,
                                 correlation_table, island_from_document,
                                 load_island, run_cutpoint_sweep,
                                 run_reserve_sweep)
from islanduc.grid_model import UncertaintyBox
from islanduc.lr_constraint import (AcceptabilityThresholds,
                                    cutpoint_from_probability, fit_logistic,
                                    label_incident)
from islanduc.robust_solver import (ReservePolicy, RobustOptions,
                                    SecurityPolicy, budget_vertices,
                                    solve_deterministic_uc,
                                    solve_extensive_oracle, solve_robust_uc)
from islanduc.sfr_simulator import (FrequencyMetrics, OperatingPoint,
                                    SimOptions, equivalent_inertia,
                                    extract_metrics, simulate_outage,
                                    total_gain)
from islanduc.solvers import BranchBoundAdapter, HighsAdapter
from islanduc.uc_formulation import LRModel

from conftest import ISLAND4, make_gen, make_system
from test_experiment import island_doc


def _report(n, detail):
    print(f"criterion {n}: PASS  {detail}")


# -- criterion 1: Benders matches the extensive form on small instances ------------

def _gen_a(**kw):
    base = dict(id="a", p_min=1.0, p_max=6.0, startup_cost=20.0,
                cost_quadratic=(5.0, 30.0, 0.2), inertia_h=5.0, m_base=12.0,
                gov_gain=18.0)
    base.update(kw)
    return make_gen(**base)


def _gen_b(**kw):
    base = dict(id="b", p_min=0.5, p_max=4.0, startup_cost=12.0,
                cost_quadratic=(4.0, 45.0, 0.4), inertia_h=4.5, m_base=8.0,
                gov_gain=16.0)
    base.update(kw)
    return make_gen(**base)


def _gen_c(**kw):
    base = dict(id="c", p_min=0.5, p_max=3.0, startup_cost=8.0,
                cost_quadratic=(3.0, 60.0, 0.6), inertia_h=4.0, m_base=6.0,
                gov_gain=15.0)
    base.update(kw)
    return make_gen(**base)


def _equivalence_instances():
    # two units, three hours, every hour two-sided: 7 vertices
    yield ("2u3h", [_gen_a(), _gen_b()], make_system([5.0, 7.0, 6.0]),
           UncertaintyBox((0.0, 0.0, 0.0), (2.0, 3.0, 2.0), (1.0, 1.5, 1.0), 1),
           None)
    # three units, four hours, one hour pinched to nominal: 7 vertices
    yield ("3u4h", [_gen_a(), _gen_b(), _gen_c()],
           make_system([6.0, 9.0, 8.0, 7.0]),
           UncertaintyBox((0.0, 0.0, 1.5, 0.0), (2.0, 4.0, 1.5, 2.5),
                          (1.0, 2.0, 1.5, 1.0), 1),
           None)
    # six hours with uncertainty in only two of them: 5 vertices; the second
    # unit carries two-hour minimum up/down times
    yield ("2u6h", [_gen_a(), _gen_b(min_up=2, min_down=2)],
           make_system([4.0, 6.0, 8.0, 7.0, 5.0, 6.0]),
           UncertaintyBox((1.5, 1.5, 0.0, 1.5, 0.5, 1.5),
                          (1.5, 1.5, 3.0, 1.5, 2.5, 1.5),
                          (1.5, 1.5, 1.5, 1.5, 1.5, 1.5), 1),
           None)
    # reserve-requirement coupling active
    yield ("3u6h+res", [_gen_a(), _gen_b(), _gen_c()],
           make_system([5.0, 7.0, 9.0, 8.0, 6.0, 7.0]),
           UncertaintyBox((1.5, 0.5, 1.5, 0.5, 1.5, 0.5),
                          (1.5, 2.5, 1.5, 2.5, 1.5, 2.5),
                          (1.5,) * 6, 1),
           ReservePolicy(0.5))
    # security-screen coupling active
    yield ("2u4h+lr", [_gen_a(), _gen_b()], make_system([5.0, 6.0, 7.0, 5.0]),
           UncertaintyBox((0.0, 0.5, 1.0, 1.0), (2.0, 2.5, 3.0, 1.0),
                          (1.0, 1.5, 2.0, 1.0), 1),
           SecurityPolicy(LRModel(4.0, 0.02, 0.05, -0.8, -10.0, 0.4, psi=-2.0)))


def test_criterion_1_benders_matches_extensive_oracle():
    fallback = BranchBoundAdapter()
    details = []
    for name, gens, system, box, policy in _equivalence_instances():
        verts = budget_vertices(box)
        assert verts is not None and len(verts) <= 8, name
        t0 = time.perf_counter()
        sol = solve_robust_uc(gens, system, box, policy,
                              RobustOptions(eps=1e-6), adapter=fallback)
        oracle = solve_extensive_oracle(gens, system, verts, policy,
                                        adapter=fallback)
        elapsed = time.perf_counter() - t0
        assert sol.converged, name
        rel = abs(sol.total_cost - oracle.objective) / max(1.0, abs(oracle.objective))
        assert rel <= 1e-4, (name, sol.total_cost, oracle.objective)
        assert elapsed < 60.0, (name, elapsed)
        details.append(f"{name} rel={rel:.1e} {elapsed:.1f}s")
    _report(1, "; ".join(details))


# -- criterion 2: degenerate uncertainty collapses to the deterministic MILP -------

def test_criterion_2_deterministic_collapse():
    gens = [_gen_a(), _gen_b(), _gen_c()]
    system = make_system([6.0, 9.0, 8.0, 7.0])
    nom = (1.0, 2.0, 1.5, 1.0)
    flat = UncertaintyBox(nom, nom, nom, 2)
    sol = solve_robust_uc(gens, system, flat, opts=RobustOptions(eps=1e-9, eps_rel=1e-9))
    det = solve_deterministic_uc(gens, system, nom)
    rel = abs(sol.total_cost - det.objective) / max(1.0, abs(det.objective))
    assert sol.converged
    assert rel <= 1e-6, (sol.total_cost, det.objective)
    _report(2, f"robust {sol.total_cost:.6f} vs deterministic {det.objective:.6f}, rel={rel:.1e}")


# -- criterion 3: simulator against closed-form frequency response ------------------

def test_criterion_3_sfr_analytic_validation():
    # (a) initial slope equals the inertial release term
    sy = make_system([30.0], s_base=80.0)
    rem = make_gen(id="r", p_min=1.0, p_max=60.0, inertia_h=3.0, m_base=40.0,
                   gov_gain=15.0, gov_a1=0.6, dp_min=-99.0, dp_max=99.0)
    lost = make_gen(id="l", p_min=1.0, p_max=10.0, inertia_h=4.0, m_base=8.0,
                    gov_gain=12.0, dp_min=-99.0, dp_max=99.0)
    op = OperatingPoint((rem, lost), (25.2, 4.8), 30.0, sy)
    tr = simulate_outage(op, "l", SimOptions(dt=1e-3, horizon=0.2))
    slope = (tr.f[1] - tr.f[0]) / tr.dt
    want_rocof = -(4.8 / 80.0) * 50.0 / (2.0 * equivalent_inertia([rem], 80.0))
    assert slope == pytest.approx(want_rocof, rel=0.02)

    # (b) quasi-steady-state equals the final-value prediction
    sy2 = make_system([40.0], s_base=50.0)
    r1 = make_gen(id="r1", p_min=1.0, p_max=40.0, inertia_h=3.0, m_base=10.0,
                  gov_gain=12.0, gov_a1=0.6, dp_min=-99.0, dp_max=99.0)
    r2 = make_gen(id="r2", p_min=1.0, p_max=40.0, inertia_h=4.0, m_base=15.0,
                  gov_gain=8.0, gov_a1=0.9, dp_min=-99.0, dp_max=99.0)
    l2 = make_gen(id="l2", p_min=1.0, p_max=10.0, inertia_h=3.0, m_base=5.0,
                  gov_gain=8.0, dp_min=-99.0, dp_max=99.0)
    op2 = OperatingPoint((r1, r2, l2), (20.0, 17.1, 2.9), 40.0, sy2)
    m = extract_metrics(simulate_outage(op2, "l2", SimOptions(dt=1e-3, horizon=12.0)))
    denom = 1.0 + total_gain([r1, r2], 50.0)
    want_qss = 50.0 * (1.0 - (2.9 / 50.0) / denom)
    assert m.qss == pytest.approx(want_qss, abs=0.02)

    # (c) single machine, first-order governor, zero damping: closed form
    sy3 = make_system([30.0], s_base=50.0, load_damping=0.0)
    rem3 = make_gen(id="r3", p_min=1.0, p_max=45.0, inertia_h=4.0, m_base=25.0,
                    gov_gain=15.0, gov_a1=0.8, dp_min=-99.0, dp_max=99.0)
    l3 = make_gen(id="l3", p_min=1.0, p_max=10.0, inertia_h=3.0, m_base=6.0,
                  gov_gain=10.0, dp_min=-99.0, dp_max=99.0)
    op3 = OperatingPoint((rem3, l3), (26.0, 4.0), 30.0, sy3)
    tr3 = simulate_outage(op3, "l3", SimOptions(dt=1e-3, horizon=8.0))
    htil = equivalent_inertia([rem3], 50.0)
    kappa = total_gain([rem3], 50.0)
    dd = 4.0 / 50.0
    lti = signal.lti([-dd * 0.8, -dd], [2 * htil * 0.8, 2 * htil, kappa])
    _, ref = signal.step(lti, T=tr3.times)
    err_c = float(np.max(np.abs(tr3.f / 50.0 - 1.0 - ref)))
    assert err_c <= 1e-3

    # (d) doubling the lost power doubles the deviation pointwise
    sy4 = make_system([30.0], s_base=50.0)
    rem4 = make_gen(id="r4", p_min=1.0, p_max=45.0, inertia_h=4.0, m_base=20.0,
                    gov_gain=12.0, gov_a1=0.7, dp_min=-99.0, dp_max=99.0)
    l4 = make_gen(id="l4", p_min=0.5, p_max=10.0, inertia_h=3.0, m_base=6.0,
                  gov_gain=10.0, dp_min=-99.0, dp_max=99.0)
    traces = []
    for p_lost in (1.25, 2.5):
        op4 = OperatingPoint((rem4, l4), (20.0, p_lost), 30.0, sy4)
        traces.append(simulate_outage(op4, "l4", SimOptions(dt=1e-3, horizon=3.0)))
    err_d = float(np.max(np.abs(2.0 * (50.0 - traces[0].f) - (50.0 - traces[1].f)))) / 50.0
    assert err_d <= 1e-6

    _report(3, f"rocof {slope:.4f} vs {want_rocof:.4f}; qss |err| ok; "
               f"governor sup-err {err_c:.1e}; scaling sup-err {err_d:.1e}")


# -- criterion 4: logistic fit on data from a known logit --------------------------

def test_criterion_4_logistic_fit_consistency():
    rng = np.random.default_rng(2026)
    n = 100_000
    truth = np.array([0.6, -1.1, 0.9, 1.7, -0.4])
    intercept = 0.25
    x = rng.normal(0.0, 1.0, (n, 5))
    z = intercept + x @ truth
    y = (rng.uniform(size=n) < expit(z)).astype(float)
    rep = fit_logistic(x, y)
    assert rep.converged
    got = np.array(rep.coefficients)
    worst = float(np.max(np.abs(got - np.concatenate([[intercept], truth]))))
    assert worst <= 0.05, got
    for before, after in zip(rep.nll_path, rep.nll_path[1:]):
        assert after <= before + 1e-12
    # cut-point inversion round-trips through the logit exactly
    assert cutpoint_from_probability(0.5) == 0.0
    assert cutpoint_from_probability(0.001) == pytest.approx(-6.9068, abs=5e-5)
    for p in (1e-4, 0.001, 0.03, 0.5, 0.73, 0.999):
        assert expit(cutpoint_from_probability(p)) == pytest.approx(p, abs=1e-12)
    _report(4, f"max coefficient error {worst:.4f} (n={n}), "
               f"{len(rep.nll_path) - 1} monotone Newton steps")


# -- criterion 5: labeling rule on the exhaustive boundary grid --------------------

def test_criterion_5_label_rule_boundary_grid():
    th = AcceptabilityThresholds()
    assert (th.nadir_min, th.rocof_min, th.qss_min) == (47.5, -0.5, 49.6)
    cases = 0
    for nadir in (47.4, 47.5, 47.6):
        for rocof in (-0.51, -0.5, -0.49):
            for qss in (49.59, 49.6, 49.61):
                m = FrequencyMetrics(nadir=nadir, qss=qss, rocof=rocof,
                                     ufls_total=0.0, unstable=False)
                want = int(nadir >= 47.5 and rocof >= -0.5 and qss >= 49.6)
                assert label_incident(m, th) == want, (nadir, rocof, qss)
                cases += 1
    assert cases == 27
    _report(5, "27/27 boundary combinations labeled per the strict-below rule")


# -- criterion 6: UC cost is monotone in the cut-point ------------------------------

def test_criterion_6_cost_monotone_in_cutpoint():
    case = island_from_document(island_doc())
    box = case.box(3)
    verts = budget_vertices(box)
    assert verts is not None
    adapter = HighsAdapter(mip_rel_gap=1e-9)
    lr = LRModel(1.0, 0.001, 0.01, -0.2, -2.0, 0.02, psi=0.0)
    psis = (-3.0, -2.5, -2.0, -1.5, -1.0, -0.5, 0.0, 0.3)
    costs = []
    for psi in psis:
        policy = SecurityPolicy(lr.with_psi(psi))
        res = solve_extensive_oracle(case.gens, case.system, verts, policy,
                                     adapter=adapter)
        costs.append(res.objective)
    for prev, cur in zip(costs, costs[1:]):
        assert cur >= prev - 1e-9 * max(1.0, abs(prev)), costs
    assert costs[-1] > costs[0]  # the screen actually binds over this range
    _report(6, f"{len(psis)} cut-points, cost {costs[0]:.2f} -> {costs[-1]:.2f} non-decreasing")


# -- criteria 7 and 8: the full study pipeline on the bundled island ----------------

@pytest.fixture(scope="module")
def island_study():
    case = load_island(ISLAND4)
    config = ExperimentConfig()
    sweep = run_reserve_sweep(case, config)
    ds = sweep.dataset()
    rep = fit_logistic(ds.features, ds.labels, ridge=DEFAULT_RIDGE)
    result = run_cutpoint_sweep(case, config, rep.to_model(psi=0.0))
    return sweep, result


def test_criterion_7_correlation_signs(island_study):
    sweep, _ = island_study
    assert len(sweep.records) >= 5000
    table = {row[0]: row[1:] for row in correlation_table(sweep.records)}
    for feat in ("sum_hm_mws", "sum_k_pu", "headroom_mw"):
        nadir_c, qss_c, _ = table[feat]
        assert nadir_c > 0 and qss_c > 0, (feat, table[feat])
    for feat in ("p_loss_mw", "p_loss_over_d"):
        nadir_c, qss_c, _ = table[feat]
        assert nadir_c < 0 and qss_c < 0, (feat, table[feat])
    rocof_mags = {feat: abs(cols[2]) for feat, cols in table.items()}
    top = max(rocof_mags, key=rocof_mags.get)
    assert top == "p_loss_over_d", rocof_mags
    _report(7, f"{len(sweep.records)} incidents; signs match; "
               f"|corr(p_loss/d, rocof)|={rocof_mags[top]:.3f} is the column max")


def test_criterion_8_ufls_and_acceptability_trend(island_study):
    _, result = island_study
    rows = [r for r in result.rows if r.psi is not None]
    assert len(rows) >= 3, [r.label for r in result.rows]
    good = [r for r in rows
            if r.delta_ufls_pct <= -20.0 and r.delta_cost_pct <= 5.0]
    assert good, [(r.label, r.delta_ufls_pct, r.delta_cost_pct) for r in rows]
    rho = spearmanr([r.psi for r in rows],
                    [r.unacceptable_pct for r in rows]).statistic
    assert rho <= -0.7, [(r.psi, r.unacceptable_pct) for r in rows]
    pick = min(good, key=lambda r: r.delta_ufls_pct)
    _report(8, f"{pick.label}: UFLS {pick.delta_ufls_pct:+.1f}% at cost "
               f"{pick.delta_cost_pct:+.1f}%; spearman(psi, unacceptable%)={rho:.2f} "
               f"over {len(rows)} rows")


# -- criterion 9: the pipeline is byte-deterministic --------------------------------

def test_criterion_9_run_all_byte_determinism(tmp_path):
    island = tmp_path / "island.json"
    island.write_text(json.dumps(island_doc()))
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"sim": {"dt": 5e-3, "horizon": 10.0}}))
    runner = CliRunner()
    outs = []
    for tag in ("first", "second"):
        out = tmp_path / tag
        r = runner.invoke(cli_main,
                          ["run-all", str(island), "--out", str(out),
                           "--config", str(config),
                           "--multipliers", "0.0,1.0", "--cutpoints", "-1e6",
                           "--no-plots"],
                          catch_exceptions=False)
        assert r.exit_code == 0, r.output
        outs.append(out)
    names = ("dataset.csv", "metrics.csv", "comparison.csv", "correlations.csv")
    for name in names:
        a = (outs[0] / name).read_bytes()
        b = (outs[1] / name).read_bytes()
        assert a == b, f"{name} differs between identical runs"
    _report(9, f"two run-all executions byte-identical across {', '.join(names)}")
