# core/synth.py

from typing import Dict, List, Tuple

import numpy as np
from loguru import logger

from core.config import RNG_NAME, RunConfig
from core.models import AcLine, HrSeries, HvdcLine, Network, Resolution, Scenario, TpSeries
from core.scenario_io import compute_g_max, save_scenario

EXTERNAL_AREA = "EXT"
FIGURE_CASES = ("fig3", "fig4_5", "fig6")


def _balance_with_hydro(
    components: Dict[Tuple[str, str], np.ndarray],
    node: str,
    net_export: np.ndarray,
) -> None:
    """
    Close the node's TP energy balance exactly:
    residual = demand + exports - fixed production
    hydro takes the positive part, flexible (pumping) the negative part.
    """
    residual = components[(node, "demand")] + net_export
    for category in ("vres", "thermal", "nuclear"):
        residual = residual - components.get((node, category), 0.0)
    hydro = np.maximum(residual, 0.0)
    components[(node, "hydro")] = hydro
    components[(node, "flexible")] = residual - hydro


def synth_random(
    seed: int,
    n_nodes: int,
    horizon: int,
    res: Resolution,
    out_dir: str,
    volatility: float = 0.1,
) -> str:
    """
    Seeded random scenario: a chain of AC lines between consecutive nodes and
    one HVDC link from the first node to an external area. Every node's TP
    energy balances exactly. Returns the manifest path.
    """
    if n_nodes < 1:
        raise ValueError(f"need at least one node, got {n_nodes}")
    if horizon < 2:
        raise ValueError(f"need at least two trading periods, got {horizon}")
    if not 0 <= volatility <= 1:
        raise ValueError(f"volatility must lie in [0, 1], got {volatility}")

    rng = np.random.default_rng(seed)
    nodes = [f"N{i + 1}" for i in range(n_nodes)]
    hours = res.tp_hours
    t = np.arange(horizon)
    daily = np.sin(2 * np.pi * t * hours / 24.0)

    # -----------------------------
    # NETWORK
    # -----------------------------
    ac_lines: List[AcLine] = []
    for a, b in zip(nodes[:-1], nodes[1:]):
        ac_lines.append(
            AcLine(
                from_node=a,
                to_node=b,
                ntc_forward=float(rng.uniform(300, 900)),
                ntc_reverse=float(rng.uniform(300, 900)),
                trm=float(rng.uniform(20, 100)),
            )
        )
    hvdc_cap = float(rng.uniform(400, 700))
    hvdc_lines = [HvdcLine(nodes[0], EXTERNAL_AREA, 30.0, hvdc_cap, hvdc_cap)]
    network = Network(tuple(nodes), tuple(ac_lines), tuple(hvdc_lines))

    # -----------------------------
    # LINE SCHEDULES (MWh/TP)
    # -----------------------------
    ac: Dict[str, np.ndarray] = {}
    for line in ac_lines:
        share = np.clip(0.3 * np.sin(2 * np.pi * t / max(horizon, 2) + rng.uniform(0, 2 * np.pi))
                        + volatility * rng.standard_normal(horizon), -0.8, 0.8)
        limit = np.where(share >= 0, line.ntc_forward, line.ntc_reverse)
        ac[line.line_id] = share * limit * hours

    walk = np.cumsum(rng.standard_normal(horizon)) * volatility * 0.2 * hvdc_cap
    hvdc = {hvdc_lines[0].line_id: np.clip(walk, -0.8 * hvdc_cap, 0.8 * hvdc_cap) * hours}

    net_export = {n: np.zeros(horizon) for n in nodes}
    for line in ac_lines:
        net_export[line.from_node] += ac[line.line_id]
        net_export[line.to_node] -= ac[line.line_id]
    net_export[nodes[0]] += hvdc[hvdc_lines[0].line_id]

    # -----------------------------
    # NODE COMPONENTS (MWh/TP)
    # -----------------------------
    components: Dict[Tuple[str, str], np.ndarray] = {}
    for node in nodes:
        base = rng.uniform(400, 1200)
        noise = volatility * rng.standard_normal(horizon)
        components[(node, "demand")] = np.maximum(base * (1 + 0.15 * daily + noise), 0.0) * hours

        vres_cap = rng.uniform(0.1, 0.6) * base
        profile = np.clip(0.5 + 0.4 * np.sin(2 * np.pi * t * hours / 24.0 - np.pi / 2)
                          + volatility * rng.standard_normal(horizon), 0.0, 1.0)
        components[(node, "vres")] = vres_cap * profile * hours

        thermal = rng.uniform(0.0, 0.3) * base
        components[(node, "thermal")] = np.full(horizon, thermal * hours)
        if rng.uniform() < 0.5:
            components[(node, "nuclear")] = np.full(horizon, rng.uniform(0.1, 0.3) * base * hours)

        _balance_with_hydro(components, node, net_export[node])

    tp_components = {key: TpSeries(v) for key, v in components.items()}
    scenario = Scenario(
        resolution=res,
        nodes=tuple(nodes),
        components=tp_components,
        ac={k: TpSeries(v) for k, v in ac.items()},
        hvdc={k: TpSeries(v) for k, v in hvdc.items()},
        g_max=compute_g_max(tp_components, res),
    )

    logger.info("synthetic scenario seed={} nodes={} T={}", seed, n_nodes, horizon)
    return save_scenario(
        scenario,
        network,
        RunConfig(),
        out_dir,
        name=f"random_{seed}",
        extra={"generator": {"rng": RNG_NAME, "seed": seed, "volatility": volatility}},
    )


# -------------------------------------------------------
# Hand-built cases
# -------------------------------------------------------

def _figure_scenario(name: str, res: Resolution):
    h = res.tp_hours

    if name == "fig3":
        # one balanced node; the intra-TP deviation itself is fig3_deviation()
        levels = np.array([100.0, 100.0, 100.0]) * h
        components = {("N1", "demand"): levels, ("N1", "thermal"): levels}
        return ("N1",), components, {}, Network(("N1",)), RunConfig()

    if name == "fig4_5":
        # mirrored surplus/deficit: N2 is the exact negative of N1's intra-TP imbalance
        levels = np.array([400.0, 500.0, 400.0]) * h
        components = {
            ("N1", "demand"): levels,
            ("N1", "hydro"): levels,
            ("N2", "vres"): levels,
            ("N2", "flexible"): -levels,
        }
        ac = {"N1->N2": np.zeros(3)}
        network = Network(("N1", "N2"), (AcLine("N1", "N2", 1000.0, 1000.0, 100.0),))
        # tight correction so the residual need is solver noise only
        cfg = RunConfig(e_min=1e-20, max_iterations=200)
        return ("N1", "N2"), components, ac, network, cfg

    if name == "fig6":
        # hydro ramps at the first shift, vRES keeps bending mid-TP
        components = {
            ("N1", "demand"): np.array([500.0, 600.0, 500.0]) * h,
            ("N1", "vres"): np.array([300.0, 200.0, 100.0]) * h,
            ("N1", "hydro"): np.array([200.0, 400.0, 400.0]) * h,
        }
        return ("N1",), components, {}, Network(("N1",)), RunConfig()

    raise ValueError(f"unknown figure case {name!r}, expected one of {FIGURE_CASES}")


def synth_figure_case(name: str, out_dir: str, res: Resolution = Resolution()) -> str:
    nodes, components, ac, network, cfg = _figure_scenario(name, res)
    tp_components = {key: TpSeries(v) for key, v in components.items()}
    scenario = Scenario(
        resolution=res,
        nodes=nodes,
        components=tp_components,
        ac={k: TpSeries(v) for k, v in ac.items()},
        g_max=compute_g_max(tp_components, res),
    )
    logger.info("figure case {} ({} nodes)", name, len(nodes))
    return save_scenario(scenario, network, cfg, out_dir, name=name)


def fig3_deviation(res: Resolution = Resolution(), amplitude: float = 50.0, basic_mw: float = 100.0):
    """
    One TP of a component running amplitude MW above its basic power in the
    first half and the same amount below it in the second half.
    Returns (actual, basic).
    """
    k = res.steps_per_tp
    if k % 2:
        raise ValueError(f"need an even number of steps per TP, got {k}")
    basic = np.full(k, float(basic_mw))
    deviation = np.concatenate([np.full(k // 2, float(amplitude)), np.full(k // 2, -float(amplitude))])
    return HrSeries(basic + deviation), HrSeries(basic)
