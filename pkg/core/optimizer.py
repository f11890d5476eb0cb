# core/optimizer.py

from typing import Dict, List, Optional, Tuple

import numpy as np
import pulp
from loguru import logger

from core.errors import NettingInfeasibleError, SeriesValidationError
from core.feasibility import analyze_feasibility
from core.models import (
    HrSeries,
    Network,
    NettingConfig,
    NettingProblem,
    NettingResult,
    Resolution,
    ScenarioHr,
    WindowDiagnostics,
)
from core.solver import fixed_injections

# -------------------------------------------------------
# Helper functions
# -------------------------------------------------------

def window_bounds(n_tps: int, window_tps: Optional[int]) -> List[Tuple[int, int]]:
    """Consecutive 0-based, half-open TP ranges; windows never cut a TP."""
    if window_tps is None or window_tps >= n_tps:
        return [(0, n_tps)]
    return [(start, min(start + window_tps, n_tps)) for start in range(0, n_tps, window_tps)]


def absolute_need(need: Dict[str, HrSeries]) -> float:
    return float(sum(np.abs(s.values).sum() for s in need.values()))


def smoothing_cost(flows: Dict[str, HrSeries]) -> float:
    """Sum of |z[t+1] - z[t]|; the first step has no predecessor."""
    return float(sum(np.abs(np.diff(s.values)).sum() for s in flows.values()))


# -------------------------------------------------------
# Build
# -------------------------------------------------------

def build_netting_problem(
    scenario: ScenarioHr,
    network: Network,
    res: Resolution,
    cfg: NettingConfig,
) -> NettingProblem:
    """
    Collect everything the LP needs into arrays and check that every line's
    scheduled TP energy fits within its own bounds.
    """
    if scenario.resolution != res:
        raise SeriesValidationError(f"scenario resolution {scenario.resolution} differs from {res}")

    nodes = tuple(scenario.nodes)
    node_pos = {n: i for i, n in enumerate(nodes)}
    line_ids = tuple(network.ac_ids)
    n_steps = scenario.n_steps
    if n_steps == 0 or n_steps % res.steps_per_tp:
        raise SeriesValidationError(f"scenario has {n_steps} steps, not a whole number of TPs")
    n_tps = n_steps // res.steps_per_tp

    injections = fixed_injections(scenario, network)
    fixed = np.vstack([injections[n] for n in nodes]) if nodes else np.zeros((0, n_steps))

    incidence = np.zeros((len(nodes), len(line_ids)))
    lower = np.zeros(len(line_ids))
    upper = np.zeros(len(line_ids))
    ac_energy = np.zeros((len(line_ids), n_tps))

    for l, line in enumerate(network.ac_lines):
        incidence[node_pos[line.from_node], l] = 1.0
        incidence[node_pos[line.to_node], l] = -1.0
        lower[l], upper[l] = line.bounds(cfg.use_trm)
        energy = scenario.ac_energy.get(line.line_id)
        if energy is None:
            raise SeriesValidationError(f"no TP energy series for AC line {line.line_id}")
        if len(energy) != n_tps:
            raise SeriesValidationError(f"AC line {line.line_id} has {len(energy)} TPs, expected {n_tps}")
        ac_energy[l] = energy.values

    problem = NettingProblem(
        resolution=res,
        nodes=nodes,
        line_ids=line_ids,
        fixed=fixed,
        incidence=incidence,
        lower=lower,
        upper=upper,
        ac_energy=ac_energy,
        alpha=cfg.alpha,
    )

    check = analyze_feasibility(problem, cfg.window_tps)
    if not check["feasible"]:
        first = check["violations"][0]
        raise NettingInfeasibleError(
            f"line {first['line']} TP {first['tp_index']} needs {first['required_mw']:.6g} MW "
            f"on average, bounds are [{first['lower_mw']:.6g}, {first['upper_mw']:.6g}] MW",
            window_index=first["window"],
            constraint_class="tp_energy_vs_bounds",
        )

    logger.info(
        "netting problem: {} nodes, {} AC lines, {} TPs, {} steps",
        len(nodes),
        len(line_ids),
        n_tps,
        n_steps,
    )
    return problem


def build_window_model(
    problem: NettingProblem,
    start_tp: int,
    stop_tp: int,
    predecessor: Optional[np.ndarray] = None,
):
    """
    LP for TPs [start_tp, stop_tp). Returns (model, z, bal_pos, bal_neg) where
    z[l][j] are the AC flow variables of local step j.
    """
    res = problem.resolution
    k = res.steps_per_tp
    s0, s1 = start_tp * k, stop_tp * k
    steps = range(s1 - s0)
    n_nodes, n_lines = len(problem.nodes), len(problem.line_ids)

    model = pulp.LpProblem(f"Netting_{start_tp}_{stop_tp}", pulp.LpMinimize)

    # DECISION VARIABLES
    z = [
        [
            pulp.LpVariable(f"z_{l}_{s0 + j}", lowBound=float(problem.lower[l]), upBound=float(problem.upper[l]))
            for j in steps
        ]
        for l in range(n_lines)
    ]
    bal_pos = [[pulp.LpVariable(f"bp_{n}_{s0 + j}", lowBound=0) for j in steps] for n in range(n_nodes)]
    bal_neg = [[pulp.LpVariable(f"bn_{n}_{s0 + j}", lowBound=0) for j in steps] for n in range(n_nodes)]

    first_smoothed = 0 if predecessor is not None else 1
    dz_pos = [
        {j: pulp.LpVariable(f"dp_{l}_{s0 + j}", lowBound=0) for j in steps if j >= first_smoothed}
        for l in range(n_lines)
    ]
    dz_neg = [
        {j: pulp.LpVariable(f"dn_{l}_{s0 + j}", lowBound=0) for j in steps if j >= first_smoothed}
        for l in range(n_lines)
    ]

    # ---------------------------------------------------
    # OBJECTIVE: total |need| + alpha * total |dz|
    # ---------------------------------------------------
    terms = [(v, 1.0) for n in range(n_nodes) for v in bal_pos[n] + bal_neg[n]]
    for l in range(n_lines):
        terms += [(v, problem.alpha) for v in list(dz_pos[l].values()) + list(dz_neg[l].values())]
    model += pulp.LpAffineExpression(terms)

    # ---------------------------------------------------
    # 1. NODAL BALANCE: fixed + exports - imports == need
    # ---------------------------------------------------
    lines_at = [
        [(l, float(problem.incidence[n, l])) for l in range(n_lines) if problem.incidence[n, l] != 0]
        for n in range(n_nodes)
    ]
    for n in range(n_nodes):
        for j in steps:
            expr = pulp.LpAffineExpression(
                [(z[l][j], sign) for l, sign in lines_at[n]] + [(bal_pos[n][j], -1.0), (bal_neg[n][j], 1.0)]
            )
            model += (expr == -float(problem.fixed[n, s0 + j]), f"balance_{n}_{s0 + j}")

    # ---------------------------------------------------
    # 2. AC ENERGY PER TP EQUALS THE SCHEDULE
    # ---------------------------------------------------
    for l in range(n_lines):
        for t in range(start_tp, stop_tp):
            local = range((t - start_tp) * k, (t - start_tp + 1) * k)
            expr = pulp.LpAffineExpression([(z[l][j], 1.0) for j in local])
            model += (expr == float(problem.ac_energy[l, t]) / res.step_hours, f"energy_{l}_{t}")

    # ---------------------------------------------------
    # 3. FLOW CHANGES SPLIT INTO |dz|
    # ---------------------------------------------------
    for l in range(n_lines):
        for j in dz_pos[l]:
            if j == 0:
                expr = pulp.LpAffineExpression([(z[l][0], 1.0), (dz_pos[l][0], -1.0), (dz_neg[l][0], 1.0)])
                model += (expr == float(predecessor[l]), f"smooth_{l}_{s0}")
            else:
                expr = pulp.LpAffineExpression(
                    [(z[l][j], 1.0), (z[l][j - 1], -1.0), (dz_pos[l][j], -1.0), (dz_neg[l][j], 1.0)]
                )
                model += (expr == 0, f"smooth_{l}_{s0 + j}")

    return model, z, bal_pos, bal_neg


# -------------------------------------------------------
# Solve
# -------------------------------------------------------

def solve_netting(problem: NettingProblem, cfg: NettingConfig) -> NettingResult:
    """
    Minimise the total absolute need of balancing power, window by window.
    Each window after the first sees the previous window's last flow as the
    predecessor of its first smoothing term.
    """
    res = problem.resolution
    k = res.steps_per_tp
    n_lines = len(problem.line_ids)
    flows = np.zeros((n_lines, problem.n_steps))
    balance_gap = 0.0
    diagnostics: List[WindowDiagnostics] = []
    predecessor = None

    for index, (start, stop) in enumerate(window_bounds(problem.n_tps, cfg.window_tps)):
        s0, s1 = start * k, stop * k

        if n_lines == 0:
            diagnostics.append(WindowDiagnostics(index, start + 1, stop, "Optimal", 0.0, 0, 0))
            continue

        model, z, bal_pos, bal_neg = build_window_model(problem, start, stop, predecessor)
        status = model.solve(pulp.PULP_CBC_CMD(msg=False))
        status_name = pulp.LpStatus[status]
        logger.info("window {} (TP {}-{}): {}", index, start + 1, stop, status_name)

        if status != pulp.LpStatusOptimal:
            raise NettingInfeasibleError(
                f"solver returned {status_name} for TPs {start + 1}-{stop}",
                window_index=index,
                constraint_class="solver_status",
            )

        # ---------------------------------------------------
        # COLLECT WINDOW SOLUTION
        # ---------------------------------------------------
        for l in range(n_lines):
            flows[l, s0:s1] = [v.varValue or 0.0 for v in z[l]]
        window_need = problem.fixed[:, s0:s1] + problem.incidence @ flows[:, s0:s1]
        split_need = np.array(
            [[(p.varValue or 0.0) - (q.varValue or 0.0) for p, q in zip(bp, bn)] for bp, bn in zip(bal_pos, bal_neg)]
        )
        if split_need.size:
            balance_gap = max(balance_gap, float(np.max(np.abs(split_need - window_need))))

        predecessor = flows[:, s1 - 1].copy()
        diagnostics.append(
            WindowDiagnostics(
                index=index,
                first_tp=start + 1,
                last_tp=stop,
                status=status_name,
                objective=float(pulp.value(model.objective) or 0.0),
                n_variables=len(model.variables()),
                n_constraints=len(model.constraints),
            )
        )

    # ---------------------------------------------------
    # BUILD RESULT
    # ---------------------------------------------------
    need = problem.fixed + problem.incidence @ flows
    energy_gap = 0.0
    bound_gap = 0.0
    if n_lines:
        energy = flows.reshape(n_lines, -1, k).mean(axis=2) * res.tp_hours
        energy_gap = float(np.max(np.abs(energy - problem.ac_energy)))
        bound_gap = float(
            max(
                np.max(problem.lower[:, None] - flows),
                np.max(flows - problem.upper[:, None]),
                0.0,
            )
        )

    residuals = {"balance_mw": balance_gap, "tp_energy_mwh": energy_gap, "bounds_mw": bound_gap}
    worst = max(residuals.values())
    if worst > cfg.solver_tolerance:
        raise NettingInfeasibleError(
            f"solution residuals {residuals} exceed tolerance {cfg.solver_tolerance}",
            window_index=len(diagnostics) - 1,
            constraint_class="residual",
        )

    objective = float(np.abs(need).sum() + problem.alpha * np.abs(np.diff(flows, axis=1)).sum())
    logger.info("netting objective {:.6f} over {} window(s)", objective, len(diagnostics))

    return NettingResult(
        balancing_need={n: HrSeries(need[i]) for i, n in enumerate(problem.nodes)},
        ac_flows={line_id: HrSeries(flows[l]) for l, line_id in enumerate(problem.line_ids)},
        objective=objective,
        status="Optimal",
        windows=tuple(diagnostics),
        residuals=residuals,
        alpha=problem.alpha,
    )
