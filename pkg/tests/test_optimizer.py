import numpy as np
import pytest
from scipy.optimize import linprog

from core.errors import NettingInfeasibleError
from core.feasibility import analyze_feasibility
from core.models import AcLine, HrSeries, Network, NettingConfig, ScenarioHr, TpSeries
from core.optimizer import (
    absolute_need,
    build_netting_problem,
    build_window_model,
    smoothing_cost,
    solve_netting,
    window_bounds,
)
from core.solver import balancing_need_fixed_transmission, basic_ac_flows, net_system_need


def _solve(scenario, network, cfg):
    problem = build_netting_problem(scenario, network, scenario.resolution, cfg)
    return solve_netting(problem, cfg)


def reference_objective(scenario: ScenarioHr, network: Network, alpha: float, use_trm: bool) -> float:
    """Dense LP of the same netting problem, written out by hand for linprog."""
    res = scenario.resolution
    nodes = list(scenario.nodes)
    lines = list(network.ac_lines)
    S = scenario.n_steps
    k = res.steps_per_tp
    N, L = len(nodes), len(lines)

    fixed = np.zeros((N, S))
    for (node, category), series in scenario.components.items():
        sign = 1.0 if category == "demand" else -1.0
        fixed[nodes.index(node)] += sign * series.values

    # variable layout: z | bp | bn | dp | dn
    nz, nb, nd = L * S, N * S, L * (S - 1)
    iz, ibp, ibn = 0, nz, nz + nb
    idp, idn = nz + 2 * nb, nz + 2 * nb + nd
    n_var = nz + 2 * nb + 2 * nd

    c = np.zeros(n_var)
    c[ibp:ibn + nb] = 1.0
    c[idp:] = alpha

    rows, rhs = [], []
    for n, node in enumerate(nodes):
        for s in range(S):
            row = np.zeros(n_var)
            for l, line in enumerate(lines):
                if line.from_node == node:
                    row[iz + l * S + s] += 1.0
                if line.to_node == node:
                    row[iz + l * S + s] -= 1.0
            row[ibp + n * S + s] = -1.0
            row[ibn + n * S + s] = 1.0
            rows.append(row)
            rhs.append(-fixed[n, s])
    for l, line in enumerate(lines):
        energy = scenario.ac_energy[line.line_id].values
        for t in range(len(energy)):
            row = np.zeros(n_var)
            row[iz + l * S + t * k: iz + l * S + (t + 1) * k] = 1.0
            rows.append(row)
            rhs.append(energy[t] / res.step_hours)
        for s in range(S - 1):
            row = np.zeros(n_var)
            row[iz + l * S + s + 1] = 1.0
            row[iz + l * S + s] = -1.0
            row[idp + l * (S - 1) + s] = -1.0
            row[idn + l * (S - 1) + s] = 1.0
            rows.append(row)
            rhs.append(0.0)

    bounds = []
    for line in lines:
        margin = line.trm if use_trm else 0.0
        bounds += [(-(line.ntc_reverse + margin), line.ntc_forward + margin)] * S
    bounds += [(0, None)] * (2 * nb + 2 * nd)

    out = linprog(c, A_eq=np.array(rows), b_eq=np.array(rhs), bounds=bounds, method="highs")
    assert out.status == 0
    return float(out.fun)


# -------------------------------------------------------
# Problem construction
# -------------------------------------------------------

def test_window_bounds():
    assert window_bounds(8, None) == [(0, 8)]
    assert window_bounds(8, 4) == [(0, 4), (4, 8)]
    assert window_bounds(5, 2) == [(0, 2), (2, 4), (4, 5)]


def test_variable_count_closed_form(res, chain_instance):
    scenario, network = chain_instance(np.random.default_rng(0), 2, 2, res)
    problem = build_netting_problem(scenario, network, res, NettingConfig())

    steps = 120
    assert problem.variable_count() == steps * 1 + 2 * 2 * steps + 2 * 1 * (steps - 1)
    model, *_ = build_window_model(problem, 0, 2)
    assert len(model.variables()) == problem.variable_count()


def test_trm_only_widens_bounds(coarse_res, chain_instance):
    scenario, network = chain_instance(np.random.default_rng(1), 3, 2, coarse_res, ntc=80.0, trm=25.0)
    plain = build_netting_problem(scenario, network, coarse_res, NettingConfig(use_trm=False))
    wide = build_netting_problem(scenario, network, coarse_res, NettingConfig(use_trm=True))

    np.testing.assert_array_equal(wide.upper - plain.upper, 25.0)
    np.testing.assert_array_equal(plain.lower - wide.lower, 25.0)
    np.testing.assert_array_equal(plain.fixed, wide.fixed)
    np.testing.assert_array_equal(plain.ac_energy, wide.ac_energy)


def test_schedule_beyond_ntc_is_structurally_infeasible(coarse_res):
    k = coarse_res.steps_per_tp
    scenario = ScenarioHr(
        coarse_res,
        ("N1", "N2"),
        {("N1", "demand"): HrSeries(np.zeros(2 * k))},
        ac_energy={"N1->N2": TpSeries([10.0, 120.0])},
    )
    network = Network(("N1", "N2"), (AcLine("N1", "N2", 100.0, 100.0),))

    with pytest.raises(NettingInfeasibleError) as info:
        build_netting_problem(scenario, network, coarse_res, NettingConfig(window_tps=1))
    assert info.value.constraint_class == "tp_energy_vs_bounds"
    assert info.value.window_index == 1


def test_feasibility_report_flags_line_at_limit(coarse_res):
    k = coarse_res.steps_per_tp
    scenario = ScenarioHr(
        coarse_res,
        ("N1", "N2"),
        {("N1", "demand"): HrSeries(np.zeros(2 * k))},
        ac_energy={"N1->N2": TpSeries([100.0, 0.0])},
    )
    network = Network(("N1", "N2"), (AcLine("N1", "N2", 100.0, 100.0),))
    problem = build_netting_problem(scenario, network, coarse_res, NettingConfig())

    report = analyze_feasibility(problem)
    assert report["feasible"]
    assert report["max_utilisation"]["N1->N2"] == pytest.approx(1.0)
    assert report["warnings"]


# -------------------------------------------------------
# Solving
# -------------------------------------------------------

def test_mirrored_imbalances_are_netted_away(res):
    wiggle = np.concatenate([np.full(30, 20.0), np.full(30, -20.0), np.full(30, -5.0), np.full(30, 5.0)])
    scenario = ScenarioHr(
        res,
        ("N1", "N2"),
        {
            ("N1", "demand"): HrSeries(400.0 + wiggle),
            ("N1", "hydro"): HrSeries(np.full(120, 400.0)),
            ("N2", "vres"): HrSeries(400.0 + wiggle),
            ("N2", "demand"): HrSeries(np.full(120, 400.0)),
        },
        ac_energy={"N1->N2": TpSeries([0.0, 0.0])},
    )
    network = Network(("N1", "N2"), (AcLine("N1", "N2", 1000.0, 1000.0),))
    cfg = NettingConfig(alpha=1e-3)
    result = _solve(scenario, network, cfg)

    for node in ("N1", "N2"):
        assert np.max(np.abs(result.balancing_need[node].values)) <= 1e-3
    assert result.objective <= cfg.alpha * smoothing_cost(result.ac_flows) + 1e-3
    assert np.max(np.abs(net_system_need(result).values)) <= 1e-6
    assert result.residuals["tp_energy_mwh"] <= cfg.solver_tolerance


def test_energy_tight_line_is_pinned(coarse_res, chain_instance):
    scenario, network = chain_instance(np.random.default_rng(4), 2, 2, coarse_res, ntc=80.0)
    pinned = ScenarioHr(
        coarse_res,
        scenario.nodes,
        scenario.components,
        ac_energy={"N1->N2": TpSeries([80.0, 80.0])},
    )
    result = _solve(pinned, network, NettingConfig())
    np.testing.assert_allclose(result.ac_flows["N1->N2"].values, 80.0, atol=1e-6)

    fixed = balancing_need_fixed_transmission(pinned, network, basic_ac_flows(pinned, coarse_res), coarse_res)
    for node in pinned.nodes:
        np.testing.assert_allclose(result.balancing_need[node].values, fixed[node].values, atol=1e-6)


def test_netting_never_hurts(coarse_res, chain_instance):
    rng = np.random.default_rng(9)
    for _ in range(5):
        scenario, network = chain_instance(rng, 3, 2, coarse_res)
        cfg = NettingConfig()
        result = _solve(scenario, network, cfg)

        flows = basic_ac_flows(scenario, coarse_res)
        fixed = balancing_need_fixed_transmission(scenario, network, flows, coarse_res)
        baseline = absolute_need(fixed) + cfg.alpha * smoothing_cost(flows)
        assert result.objective <= baseline + 1e-6


def test_objective_matches_reference_lp(coarse_res, chain_instance):
    rng = np.random.default_rng(123)
    for _ in range(20):
        n_nodes = int(rng.integers(2, 4))
        use_trm = bool(rng.integers(0, 2))
        scenario, network = chain_instance(rng, n_nodes, 2, coarse_res, ntc=60.0, trm=15.0)
        cfg = NettingConfig(alpha=1e-3, use_trm=use_trm)

        result = _solve(scenario, network, cfg)
        expected = reference_objective(scenario, network, cfg.alpha, use_trm)
        assert result.objective == pytest.approx(expected, rel=1e-6, abs=1e-6)


def test_objective_non_increasing_in_trm(coarse_res, chain_instance):
    base, _ = chain_instance(np.random.default_rng(77), 3, 2, coarse_res, ntc=30.0)
    objectives = []
    for trm in (0.0, 10.0, 50.0, 200.0):
        network = Network(base.nodes, tuple(AcLine(a, b, 30.0, 30.0, trm) for a, b in (("N1", "N2"), ("N2", "N3"))))
        objectives.append(_solve(base, network, NettingConfig(use_trm=True)).objective)

    for before, after in zip(objectives, objectives[1:]):
        assert after <= before + 1e-6


def test_system_sum_invariant_across_trm_and_windows(coarse_res, chain_instance):
    scenario, network = chain_instance(np.random.default_rng(31), 3, 8, coarse_res, ntc=40.0, trm=20.0)
    sums = []
    for use_trm in (False, True):
        for window in (None, 4):
            result = _solve(scenario, network, NettingConfig(use_trm=use_trm, window_tps=window))
            sums.append(net_system_need(result).values)
            if window == 4:
                assert [(w.first_tp, w.last_tp) for w in result.windows] == [(1, 4), (5, 8)]

    for other in sums[1:]:
        np.testing.assert_allclose(other, sums[0], atol=1e-6)


def test_windowed_solution_respects_tp_energy(coarse_res, chain_instance):
    scenario, network = chain_instance(np.random.default_rng(5), 2, 6, coarse_res)
    cfg = NettingConfig(window_tps=2)
    result = _solve(scenario, network, cfg)

    k = coarse_res.steps_per_tp
    flow = result.ac_flows["N1->N2"].values.reshape(-1, k).mean(axis=1) * coarse_res.tp_hours
    np.testing.assert_allclose(flow, scenario.ac_energy["N1->N2"].values, atol=1e-6)
    assert len(result.windows) == 3
    assert all(w.status == "Optimal" for w in result.windows)


def test_single_node_skips_the_lp(res):
    hr = HrSeries(np.linspace(0, 10, 120))
    scenario = ScenarioHr(res, ("N1",), {("N1", "demand"): hr})
    result = _solve(scenario, Network(("N1",)), NettingConfig())
    np.testing.assert_array_equal(result.balancing_need["N1"].values, hr.values)
    assert result.ac_flows == {}
    assert result.objective == pytest.approx(float(np.abs(hr.values).sum()))
