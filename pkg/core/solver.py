# core/solver.py

from typing import Dict

import numpy as np

from core.errors import SeriesValidationError
from core.models import (
    PRODUCTION_CATEGORIES,
    HrSeries,
    Network,
    NettingResult,
    Resolution,
    ScenarioHr,
)
from core.timeseries import basic_power_expand


def fixed_injections(scenario: ScenarioHr, network: Network) -> Dict[str, np.ndarray]:
    """
    Per node, everything in the balance except AC flows:
    - production + demand + HVDC exports - HVDC imports (MW).
    """
    n_steps = scenario.n_steps
    out: Dict[str, np.ndarray] = {}

    for node in scenario.nodes:
        need = np.zeros(n_steps)
        for category in PRODUCTION_CATEGORIES:
            series = scenario.components.get((node, category))
            if series is not None:
                need -= series.values
        demand = scenario.components.get((node, "demand"))
        if demand is not None:
            need += demand.values
        out[node] = need

    for line in network.hvdc_lines:
        series = scenario.hvdc.get(line.line_id)
        if series is None:
            raise SeriesValidationError(f"no high-resolution series for HVDC line {line.line_id}")
        if line.from_node in out:
            out[line.from_node] += series.values
        if line.to_node in out:
            out[line.to_node] -= series.values

    return out


def basic_ac_flows(scenario: ScenarioHr, res: Resolution) -> Dict[str, HrSeries]:
    """AC flows held at their basic power: the schedule without netting."""
    return {line_id: basic_power_expand(tp, res) for line_id, tp in scenario.ac_energy.items()}


def balancing_need_fixed_transmission(
    scenario: ScenarioHr,
    network: Network,
    ac_flows_hr: Dict[str, HrSeries],
    res: Resolution,
) -> Dict[str, HrSeries]:
    """
    Need of balancing power per node with AC transmission given, not optimised.
    Positive: power must be injected. Negative: power must be absorbed.
    """
    if scenario.n_steps % res.steps_per_tp:
        raise SeriesValidationError("scenario length is not a multiple of steps per TP")

    need = fixed_injections(scenario, network)
    for line in network.ac_lines:
        flow = ac_flows_hr.get(line.line_id)
        if flow is None:
            raise SeriesValidationError(f"no AC flow given for line {line.line_id}")
        if len(flow) != scenario.n_steps:
            raise SeriesValidationError(
                f"AC flow {line.line_id} has {len(flow)} steps, scenario has {scenario.n_steps}"
            )
        need[line.from_node] += flow.values
        need[line.to_node] -= flow.values

    return {node: HrSeries(values) for node, values in need.items()}


def net_system_need(result: NettingResult) -> HrSeries:
    """Signed sum of the need over all nodes, step by step."""
    series = list(result.balancing_need.values())
    if not series:
        raise SeriesValidationError("netting result has no nodes")
    total = np.zeros(len(series[0]))
    for s in series:
        total += s.values
    return HrSeries(total)
