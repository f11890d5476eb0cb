# core/pipeline.py

import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from typing import Dict, List, Optional, Tuple

import numpy as np
from loguru import logger

from core.cause import CauseLabelSeries, classify_cause
from core.config import RNG_NAME, SETUPS, VERSION, RunConfig
from core.disaggregate import (
    capacity_violation_scan,
    default_e_min,
    disaggregate_component,
    uncorrected_component,
)
from core.errors import NonConvergenceWarning, SeriesValidationError
from core.metrics import BalancingStats, RampAdequacy, density_histogram, ramp_adequacy_rows, summary_stats
from core.models import (
    CONTROLLABLE_CATEGORIES,
    ConvergenceReport,
    HrSeries,
    Network,
    NettingResult,
    RampSpec,
    RampWindow,
    Resolution,
    Scenario,
    ScenarioHr,
    TpSeries,
    component_key,
    split_component_key,
)
from core.optimizer import absolute_need, build_netting_problem, solve_netting
from core.scenario_io import (
    read_hr_stage,
    read_netting_stage,
    write_comparison,
    write_hr_stage,
    write_netting_stage,
    write_results,
    write_uncorrected,
)
from core.solver import balancing_need_fixed_transmission, basic_ac_flows, net_system_need

# (key, category, TP energy values, ramp spec or None)
Job = Tuple[str, str, np.ndarray, Optional[RampSpec]]


@dataclass
class Analysis:
    stats: Dict[str, BalancingStats]
    labels: Dict[str, CauseLabelSeries]
    histograms: Dict[str, List[Tuple[float, float]]]
    adequacy: List[RampAdequacy]


# -------------------------------------------------------
# Disaggregation
# -------------------------------------------------------

def _jobs(scenario: Scenario, network: Network, cfg: RunConfig) -> List[Job]:
    jobs: List[Job] = []
    for (node, category), tp in scenario.components.items():
        spec = None
        if category in CONTROLLABLE_CATEGORIES:
            spec = cfg.ramp_rates[category]
            if spec.mode == "percent_of_max":
                spec = spec.with_w_max(scenario.g_max.get((node, category), 1.0))
        jobs.append((component_key(node, category), category, tp.values, spec))

    for line in network.hvdc_lines:
        tp = scenario.hvdc.get(line.line_id)
        if tp is None:
            raise SeriesValidationError(f"no TP energy series for HVDC line {line.line_id}")
        jobs.append((component_key(line.line_id, "hvdc"), "hvdc", tp.values, RampSpec("absolute", line.ramp_rate)))
    return jobs


def _run_job(job: Job, res: Resolution, e_min: Optional[float], max_iterations: int):
    key, category, values, spec = job
    hr, report = disaggregate_component(TpSeries(values), category, res, spec, e_min, max_iterations)
    return key, hr, report


def disaggregate_scenario(
    scenario: Scenario,
    network: Network,
    cfg: RunConfig,
) -> Tuple[ScenarioHr, Dict[str, ConvergenceReport]]:
    """
    HR_C / HR_V plus TP energy correction for every component and HVDC line.
    Components are independent, so cfg.workers > 1 spreads them over processes.
    """
    res = scenario.resolution
    jobs = _jobs(scenario, network, cfg)
    worker = partial(_run_job, res=res, e_min=cfg.e_min, max_iterations=cfg.max_iterations)
    logger.info("disaggregating {} components over {} TPs ({} worker(s))", len(jobs), scenario.horizon, cfg.workers)

    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(worker, jobs))
    else:
        results = [worker(job) for job in jobs]

    components: Dict[Tuple[str, str], HrSeries] = {}
    hvdc: Dict[str, HrSeries] = {}
    reports: Dict[str, ConvergenceReport] = {}
    for key, hr, report in results:
        owner, category = split_component_key(key)
        if category == "hvdc":
            hvdc[owner] = hr
        else:
            components[(owner, category)] = hr
        reports[key] = report

        if not report.converged:
            msg = (
                f"{key}: TP energy correction stopped after {report.iterations} iterations "
                f"with error {report.final_error:.3e} > e_min {report.e_min:.3e}"
            )
            logger.warning(msg)
            warnings.warn(msg, NonConvergenceWarning, stacklevel=2)

    clipped = {key: r.clipped_count for key, r in reports.items() if r.clipped_count}
    if clipped:
        logger.warning("ramp windows clipped to half a TP: {}", clipped)

    scenario_hr = ScenarioHr(
        resolution=res,
        nodes=scenario.nodes,
        components=components,
        hvdc=hvdc,
        ac_energy=dict(scenario.ac),
    )
    negative = scenario_hr.negative_steps()
    if negative:
        logger.warning("negative high-resolution values in nonnegative components: {}", negative)
    return scenario_hr, reports


def uncorrected_scenario(scenario: Scenario, network: Network, cfg: RunConfig) -> Dict[str, HrSeries]:
    """First HR_C/HR_V pass of every job, kept for comparison with the corrected series."""
    res = scenario.resolution
    return {
        key: uncorrected_component(TpSeries(values), category, res, spec)
        for key, category, values, spec in _jobs(scenario, network, cfg)
    }


def hvdc_capacity_violations(scenario_hr: ScenarioHr, network: Network) -> Dict[str, int]:
    """Steps outside [-cap_rev, cap_fwd] per HVDC line after correction."""
    counts = {}
    for line in network.hvdc_lines:
        found = capacity_violation_scan(scenario_hr.hvdc[line.line_id], -line.capacity_reverse, line.capacity_forward)
        counts[line.line_id] = len(found)
        if found:
            logger.warning("HVDC line {} outside its capacity at {} steps", line.line_id, len(found))
    return counts


# -------------------------------------------------------
# Analysis
# -------------------------------------------------------

def node_ramp_windows(
    reports: Dict[str, ConvergenceReport],
    network: Network,
    nodes,
) -> Dict[str, List[RampWindow]]:
    """A node's controllable components plus every HVDC line touching it."""
    out: Dict[str, List[RampWindow]] = {node: [] for node in nodes}
    for key, report in reports.items():
        owner, category = split_component_key(key)
        if category in CONTROLLABLE_CATEGORIES:
            out[owner].extend(report.ramp_windows)
        elif category == "hvdc":
            line = network.hvdc_by_id(owner)
            for node in {line.from_node, line.to_node}:
                if node in out:
                    out[node].extend(report.ramp_windows)
    return out


def analyze(
    result: NettingResult,
    reports: Dict[str, ConvergenceReport],
    network: Network,
    res: Resolution,
    cfg: RunConfig,
) -> Analysis:
    windows = node_ramp_windows(reports, network, result.balancing_need)
    stats, labels, histograms = {}, {}, {}
    for node, need in result.balancing_need.items():
        stats[node] = summary_stats(need, cfg.zero_threshold)
        labels[node] = classify_cause(need, windows[node], res, cfg.zero_threshold)
        histograms[node] = density_histogram(need, cfg.bin_width)

    ramped = {
        key: r for key, r in reports.items() if split_component_key(key)[1] in CONTROLLABLE_CATEGORIES + ("hvdc",)
    }
    return Analysis(stats, labels, histograms, ramp_adequacy_rows(ramped))


def run_metadata(
    cfg: RunConfig,
    scenario: Scenario,
    scenario_hr: ScenarioHr,
    network: Network,
    reports: Dict[str, ConvergenceReport],
    result: NettingResult,
) -> dict:
    res = scenario.resolution
    fixed = balancing_need_fixed_transmission(scenario_hr, network, basic_ac_flows(scenario_hr, res), res)
    system = net_system_need(result)
    return {
        "version": VERSION,
        "setup": cfg.setup,
        "alpha": cfg.netting.alpha,
        "e_min": cfg.e_min if cfg.e_min is not None else default_e_min(scenario.horizon),
        "rng": RNG_NAME,
        "resolution": res.to_dict(),
        "horizon_tps": scenario.horizon,
        "config": cfg.to_dict(),
        "convergence": {key: reports[key].to_dict() for key in sorted(reports)},
        "non_converged": sorted(key for key, r in reports.items() if not r.converged),
        "hvdc_capacity_violations": hvdc_capacity_violations(scenario_hr, network),
        "netting": result.to_dict(),
        "absolute_need_mwh": {
            "netted": absolute_need(result.balancing_need) * res.step_hours,
            "fixed_transmission": absolute_need(fixed) * res.step_hours,
        },
        "system_need_max_abs_mw": float(np.max(np.abs(system.values))),
    }


# -------------------------------------------------------
# Stages: each one persists its output under out_dir
# -------------------------------------------------------

def stage_disaggregate(scenario: Scenario, network: Network, cfg: RunConfig, out_dir: str):
    scenario_hr, reports = disaggregate_scenario(scenario, network, cfg)
    write_hr_stage(out_dir, scenario_hr, reports)
    write_uncorrected(out_dir, uncorrected_scenario(scenario, network, cfg))
    return scenario_hr, reports


def stage_net(scenario: Scenario, network: Network, cfg: RunConfig, out_dir: str) -> NettingResult:
    scenario_hr, _ = read_hr_stage(out_dir, scenario, network)
    problem = build_netting_problem(scenario_hr, network, scenario.resolution, cfg.netting)
    result = solve_netting(problem, cfg.netting)
    write_netting_stage(out_dir, result)
    return result


def stage_analyze(scenario: Scenario, network: Network, cfg: RunConfig, out_dir: str) -> Analysis:
    scenario_hr, reports = read_hr_stage(out_dir, scenario, network)
    result = read_netting_stage(out_dir, scenario.nodes, network.ac_ids)
    analysis = analyze(result, reports, network, scenario.resolution, cfg)
    metadata = run_metadata(cfg, scenario, scenario_hr, network, reports, result)
    write_results(
        out_dir,
        result,
        analysis.stats,
        analysis.labels,
        analysis.histograms,
        analysis.adequacy,
        metadata,
    )
    return analysis


def run(scenario: Scenario, network: Network, cfg: RunConfig, out_dir: str) -> Analysis:
    """Disaggregate, net and analyze, each stage reading what the previous one wrote."""
    logger.info("run: setup={} out={}", cfg.setup or "custom", out_dir)
    stage_disaggregate(scenario, network, cfg, out_dir)
    stage_net(scenario, network, cfg, out_dir)
    return stage_analyze(scenario, network, cfg, out_dir)


def compare_setups(scenario: Scenario, network: Network, cfg: RunConfig, out_dir: str) -> Dict[str, Analysis]:
    """
    Full run under every setup (S1..S4) into out_dir/<setup>/, then one
    comparison table and one combined histogram under out_dir. The setup
    decides ramping and use_trm; the other settings of cfg are shared.
    """
    analyses: Dict[str, Analysis] = {}
    absolute: Dict[str, float] = {}
    for setup in sorted(SETUPS):
        setup_dir = os.path.join(out_dir, setup)
        analyses[setup] = run(scenario, network, cfg.with_setup(setup), setup_dir)
        result = read_netting_stage(setup_dir, scenario.nodes, network.ac_ids)
        absolute[setup] = absolute_need(result.balancing_need) * scenario.resolution.step_hours

    write_comparison(
        out_dir,
        {setup: a.stats for setup, a in analyses.items()},
        {setup: a.histograms for setup, a in analyses.items()},
        absolute,
    )
    logger.info("compared setups {} under {}", ", ".join(analyses), out_dir)
    return analyses
