import os

import numpy as np
import pytest

from core.models import AcLine, HrSeries, Network, Resolution, ScenarioHr, TpSeries


def pytest_collection_modifyitems(config, items):
    if os.environ.get("NETBAL_RUN_SLOW") == "1":
        return
    skip_slow = pytest.mark.skip(reason="set NETBAL_RUN_SLOW=1 to run desk-scale tests")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def res():
    return Resolution(60, 1)


@pytest.fixture
def coarse_res():
    # 12 steps per TP keeps the LPs tiny
    return Resolution(60, 5)


def make_chain_instance(
    rng: np.random.Generator,
    n_nodes: int,
    n_tps: int,
    res: Resolution,
    ntc: float = 80.0,
    trm: float = 0.0,
):
    """
    Random ScenarioHr on a chain N1-N2-...: demand and vRES per node, AC TP
    energies drawn inside the NTC. Returns (scenario_hr, network).
    """
    nodes = tuple(f"N{i + 1}" for i in range(n_nodes))
    n_steps = n_tps * res.steps_per_tp
    components = {}
    for node in nodes:
        components[(node, "demand")] = HrSeries(rng.uniform(50.0, 150.0, n_steps))
        components[(node, "vres")] = HrSeries(rng.uniform(0.0, 100.0, n_steps))

    lines = tuple(AcLine(a, b, ntc, ntc, trm) for a, b in zip(nodes[:-1], nodes[1:]))
    ac_energy = {
        line.line_id: TpSeries(rng.uniform(-0.5 * ntc, 0.5 * ntc, n_tps) * res.tp_hours) for line in lines
    }
    scenario = ScenarioHr(resolution=res, nodes=nodes, components=components, ac_energy=ac_energy)
    return scenario, Network(nodes, lines)


@pytest.fixture
def chain_instance():
    return make_chain_instance
