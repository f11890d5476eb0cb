# core/scenario_io.py

import json
import math
import os
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger

from core.cause import CauseLabelSeries
from core.config import G_MAX_FLOOR_MW, RunConfig, ramp_rates_for
from core.errors import ScenarioValidationError
from core.metrics import BalancingStats, RampAdequacy
from core.models import (
    ALL_CATEGORIES,
    CONTROLLABLE_CATEGORIES,
    NODE_CATEGORIES,
    NONNEGATIVE_CATEGORIES,
    AcLine,
    ConvergenceReport,
    HrSeries,
    HvdcLine,
    Network,
    NettingConfig,
    NettingResult,
    RampSpec,
    RampWindow,
    Resolution,
    Scenario,
    ScenarioHr,
    TpSeries,
    WindowDiagnostics,
    component_key,
    split_component_key,
)
from core.timeseries import tp_to_mw

MANIFEST_NAME = "manifest.json"
NETWORK_NAME = "network.json"
FLOAT_FORMAT = "%.17g"

NODE_COLUMNS = ["node", "tp_index", "energy_mwh"]
LINE_COLUMNS = ["from", "to", "tp_index", "energy_mwh"]


# -------------------------------------------------------
#  LOW-LEVEL FILE HELPERS
# -------------------------------------------------------

def _file_line(position: int) -> int:
    """1-based line in the file of the data row at 0-based position (header is line 1)."""
    return position + 2


def _write_csv(df: pd.DataFrame, path: str) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def _write_json(data, path: str) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _read_json(path: str) -> dict:
    if not os.path.isfile(path):
        raise ScenarioValidationError("file not found", path=path)
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except UnicodeDecodeError as exc:
        raise ScenarioValidationError(f"not valid UTF-8 ({exc.reason} at byte {exc.start})", path=path) from exc
    except json.JSONDecodeError as exc:
        raise ScenarioValidationError(f"invalid JSON: {exc.msg}", path=path, row=exc.lineno) from exc
    if not isinstance(data, dict):
        raise ScenarioValidationError("top level must be an object", path=path)
    return data


def _section(data: dict, key: str, path: str) -> dict:
    """Optional JSON object under key; anything else is a validation error."""
    value = data.get(key, {})
    if not isinstance(value, dict):
        raise ScenarioValidationError(f"'{key}' must be an object, got {type(value).__name__}", path=path)
    return value


def _records(data: dict, key: str, path: str) -> List[dict]:
    value = data.get(key, [])
    if not isinstance(value, list) or not all(isinstance(v, dict) for v in value):
        raise ScenarioValidationError(f"'{key}' must be a list of objects", path=path)
    return value


def _read_raw_csv(path: str, columns: Sequence[str]) -> pd.DataFrame:
    """Every cell as text, so diagnostics can quote what was in the file."""
    if not os.path.isfile(path):
        raise ScenarioValidationError("file not found", path=path)
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ScenarioValidationError(f"not valid UTF-8 ({exc.reason} at byte {exc.start})", path=path) from exc
    except pd.errors.EmptyDataError as exc:
        raise ScenarioValidationError("file is empty", path=path) from exc
    except pd.errors.ParserError as exc:
        raise ScenarioValidationError(f"cannot parse CSV: {exc}", path=path) from exc

    missing = [c for c in columns if c not in df.columns]
    if missing:
        raise ScenarioValidationError(
            f"header must be {','.join(columns)}; missing {missing}", path=path, row=1
        )
    return df


def _parse_float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        return math.nan


def _parse_tp_index(text: str, horizon: int, path: str, position: int) -> int:
    try:
        tp = int(text)
    except ValueError:
        raise ScenarioValidationError(
            f"tp_index {text!r} is not an integer", path=path, row=_file_line(position)
        ) from None
    if not 1 <= tp <= horizon:
        raise ScenarioValidationError(
            f"tp_index {tp} outside 1..{horizon} (length mismatch)", path=path, row=_file_line(position)
        )
    return tp


def _read_step_csv(path: str, column: str) -> np.ndarray:
    if not os.path.isfile(path):
        raise ScenarioValidationError("file not found", path=path)
    df = pd.read_csv(path, float_precision="round_trip")
    if list(df.columns[:2]) != ["step_index", column]:
        raise ScenarioValidationError(f"header must start with step_index,{column}", path=path, row=1)
    return df[column].to_numpy(dtype=float)


# -------------------------------------------------------
#  CATEGORY FILES
# -------------------------------------------------------

def _load_category(
    path: str,
    category: str,
    horizon: int,
    owners: Sequence[str],
) -> Dict[str, TpSeries]:
    """
    One CSV per category. Owners are node ids for node categories and
    line ids ('A->B') for ac/hvdc. Returns owner -> TpSeries.
    """
    is_line = category in ("ac", "hvdc")
    df = _read_raw_csv(path, LINE_COLUMNS if is_line else NODE_COLUMNS)
    allowed = set(owners)
    values: Dict[str, np.ndarray] = {}
    seen = set()

    for position, record in enumerate(df.to_dict("records")):
        owner = f"{record['from']}->{record['to']}" if is_line else record["node"]

        if owner not in allowed:
            what = f"{category.upper()} line" if is_line else "node"
            raise ScenarioValidationError(f"unknown {what} {owner!r}", path=path, row=_file_line(position))

        tp = _parse_tp_index(record["tp_index"], horizon, path, position)
        if (owner, tp) in seen:
            raise ScenarioValidationError(
                f"duplicate tp_index {tp} for {owner}", path=path, row=_file_line(position)
            )
        seen.add((owner, tp))

        raw = record["energy_mwh"].strip()
        energy = _parse_float(raw)
        if raw == "" or raw.lower() == "nan":
            raise ScenarioValidationError(f"missing value (NaN) for {owner}", path=path, row=_file_line(position))
        if math.isnan(energy):
            raise ScenarioValidationError(f"energy_mwh {raw!r} is not a number", path=path, row=_file_line(position))
        if not math.isfinite(energy):
            raise ScenarioValidationError(f"non-finite energy_mwh {raw!r}", path=path, row=_file_line(position))
        if category in NONNEGATIVE_CATEGORIES and energy < 0:
            raise ScenarioValidationError(
                f"negative value {energy!r} in nonnegative category {category}",
                path=path,
                row=_file_line(position),
            )

        values.setdefault(owner, np.full(horizon, np.nan))[tp - 1] = energy

    out = {}
    for owner, arr in values.items():
        gaps = np.flatnonzero(np.isnan(arr))
        if len(gaps):
            raise ScenarioValidationError(
                f"series for {owner} has {horizon - len(gaps)} of {horizon} trading periods "
                f"(length mismatch, first missing tp_index {int(gaps[0]) + 1})",
                path=path,
            )
        out[owner] = TpSeries(arr)
    return out


def _category_frame(series: Dict, category: str, nodes: Sequence[str]) -> pd.DataFrame:
    rows = []
    if category in ("ac", "hvdc"):
        for line_id, tp in series.items():
            from_node, to_node = line_id.split("->")
            rows += [
                {"from": from_node, "to": to_node, "tp_index": t + 1, "energy_mwh": float(v)}
                for t, v in enumerate(tp.values)
            ]
        return pd.DataFrame(rows, columns=LINE_COLUMNS)

    for node in nodes:
        tp = series.get((node, category))
        if tp is None:
            continue
        rows += [{"node": node, "tp_index": t + 1, "energy_mwh": float(v)} for t, v in enumerate(tp.values)]
    return pd.DataFrame(rows, columns=NODE_COLUMNS)


# -------------------------------------------------------
#  NETWORK
# -------------------------------------------------------

def _capacity(value) -> float:
    return math.inf if value is None else float(value)


def load_network(path: str) -> Network:
    data = _read_json(path)
    try:
        ac = [
            AcLine(
                from_node=str(a["from"]),
                to_node=str(a["to"]),
                ntc_forward=float(a["ntc_fwd"]),
                ntc_reverse=float(a["ntc_rev"]),
                trm=float(a.get("trm", 0.0)),
            )
            for a in _records(data, "ac_lines", path)
        ]
        hvdc = [
            HvdcLine(
                from_node=str(b["from"]),
                to_node=str(b["to"]),
                ramp_rate=float(b.get("ramp_mw_per_min", 30.0)),
                capacity_forward=_capacity(b.get("cap_fwd")),
                capacity_reverse=_capacity(b.get("cap_rev")),
            )
            for b in _records(data, "hvdc_lines", path)
        ]
        return Network(nodes=tuple(str(n) for n in data["nodes"]), ac_lines=ac, hvdc_lines=hvdc)
    except ScenarioValidationError:
        raise
    except KeyError as exc:
        raise ScenarioValidationError(f"missing field {exc.args[0]!r}", path=path) from exc
    except (TypeError, ValueError) as exc:
        raise ScenarioValidationError(str(exc), path=path) from exc


def network_to_json(network: Network) -> dict:
    data = network.to_dict()
    for line in data["hvdc_lines"]:
        for key in ("cap_fwd", "cap_rev"):
            if math.isinf(line[key]):
                line[key] = None
    return data


# -------------------------------------------------------
#  RUN CONFIG
# -------------------------------------------------------

def _ramp_spec(entry: dict) -> RampSpec:
    mode = entry.get("mode", "percent_of_max")
    rate = float(entry["rate"])
    return RampSpec(mode, rate, G_MAX_FLOOR_MW if mode == "percent_of_max" else None)


def load_run_config(manifest: dict, path: str) -> RunConfig:
    try:
        if "ramp_rates" in manifest:
            entries = _section(manifest, "ramp_rates", path)
            ramp_rates = {cat: _ramp_spec(_section(entries, cat, path)) for cat in entries}
        else:
            ramp_rates = ramp_rates_for(manifest.get("ramping", "normal"))

        net = _section(manifest, "netting", path)
        window = net.get("window_tps", "full")
        netting = NettingConfig(
            alpha=float(net.get("alpha", 1e-3)),
            use_trm=bool(net.get("use_trm", False)),
            window_tps=None if window in (None, "full") else int(window),
            solver_tolerance=float(net.get("solver_tolerance", 1e-4)),
        )
        correction = _section(manifest, "correction", path)
        cfg = RunConfig(
            ramp_rates=ramp_rates,
            netting=netting,
            e_min=correction.get("e_min"),
            max_iterations=int(correction.get("max_iterations", 100)),
            zero_threshold=float(manifest.get("zero_threshold", 1e-3)),
            bin_width=float(manifest.get("bin_width", 10.0)),
        )
        if manifest.get("setup"):
            cfg = cfg.with_setup(manifest["setup"])
        return cfg
    except ScenarioValidationError:
        raise
    except KeyError as exc:
        raise ScenarioValidationError(f"missing field {exc.args[0]!r}", path=path) from exc
    except (TypeError, ValueError) as exc:
        raise ScenarioValidationError(str(exc), path=path) from exc


def run_config_to_manifest(cfg: RunConfig) -> dict:
    return {
        "setup": cfg.setup,
        "ramp_rates": {cat: {"mode": s.mode, "rate": s.rate} for cat, s in sorted(cfg.ramp_rates.items())},
        "netting": cfg.netting.to_dict(),
        "correction": {"e_min": cfg.e_min, "max_iterations": cfg.max_iterations},
        "zero_threshold": cfg.zero_threshold,
        "bin_width": cfg.bin_width,
    }


# -------------------------------------------------------
#  SCENARIO
# -------------------------------------------------------

def compute_g_max(components: Dict[Tuple[str, str], TpSeries], res: Resolution) -> Dict[Tuple[str, str], float]:
    """Horizon max of |basic power| per controllable component, at least 1 MW."""
    return {
        key: max(float(np.max(np.abs(tp_to_mw(tp.values, res)))), G_MAX_FLOOR_MW)
        for key, tp in components.items()
        if key[1] in CONTROLLABLE_CATEGORIES
    }


def load_scenario(manifest_path: str) -> Tuple[Scenario, Network, RunConfig]:
    """
    Read and validate a scenario: manifest, network and one CSV per category.
    Every problem is raised as ScenarioValidationError naming the file and,
    where it applies, the line.
    """
    manifest = _read_json(manifest_path)
    base = os.path.dirname(os.path.abspath(manifest_path))

    try:
        res_cfg = _section(manifest, "resolution", manifest_path)
        res = Resolution(int(res_cfg.get("tp_minutes", 60)), int(res_cfg.get("step_minutes", 1)))
        horizon = int(manifest["horizon"])
        nodes = tuple(str(n) for n in manifest["nodes"])
        if "components" not in manifest:
            raise KeyError("components")
        files = _section(manifest, "components", manifest_path)
        network_file = manifest["network"]
        if not isinstance(network_file, str) or not all(isinstance(f, str) for f in files.values()):
            raise TypeError("'network' and 'components' entries must be file names")
    except ScenarioValidationError:
        raise
    except KeyError as exc:
        raise ScenarioValidationError(f"missing field {exc.args[0]!r}", path=manifest_path) from exc
    except (TypeError, ValueError) as exc:
        raise ScenarioValidationError(str(exc), path=manifest_path) from exc

    if horizon < 2:
        raise ScenarioValidationError(f"horizon must be at least 2 TPs, got {horizon}", path=manifest_path)
    for node in nodes:
        if not node or "/" in node or "->" in node or node != node.strip():
            raise ScenarioValidationError(f"invalid node id {node!r}", path=manifest_path)
    unknown = sorted(set(files) - set(ALL_CATEGORIES))
    if unknown:
        raise ScenarioValidationError(f"unknown categories {unknown}", path=manifest_path)

    network_path = os.path.join(base, network_file)
    network = load_network(network_path)
    if set(network.nodes) != set(nodes):
        raise ScenarioValidationError(
            f"network nodes {sorted(network.nodes)} differ from manifest nodes {sorted(nodes)}",
            path=network_path,
        )

    components: Dict[Tuple[str, str], TpSeries] = {}
    for category in NODE_CATEGORIES:
        if category not in files:
            continue
        loaded = _load_category(os.path.join(base, files[category]), category, horizon, nodes)
        for node in nodes:
            if node in loaded:
                components[(node, category)] = loaded[node]

    lines: Dict[str, Dict[str, TpSeries]] = {}
    for category, ids in (("ac", network.ac_ids), ("hvdc", network.hvdc_ids)):
        if not ids:
            continue
        if category not in files:
            raise ScenarioValidationError(
                f"network has {category.upper()} lines but no '{category}' file is listed", path=manifest_path
            )
        path = os.path.join(base, files[category])
        loaded = _load_category(path, category, horizon, ids)
        for line_id in ids:
            if line_id not in loaded:
                raise ScenarioValidationError(f"missing series for {category.upper()} line {line_id}", path=path)
        lines[category] = {line_id: loaded[line_id] for line_id in ids}

    if not components:
        raise ScenarioValidationError("scenario has no production or demand series", path=manifest_path)

    scenario = Scenario(
        resolution=res,
        nodes=nodes,
        components=components,
        ac=lines.get("ac", {}),
        hvdc=lines.get("hvdc", {}),
        g_max=compute_g_max(components, res),
    )
    cfg = load_run_config(manifest, manifest_path)

    logger.info(
        "loaded scenario {}: {} nodes, {} components, {} AC + {} HVDC lines, {} TPs",
        manifest.get("name", os.path.basename(base)),
        len(nodes),
        len(components),
        len(scenario.ac),
        len(scenario.hvdc),
        horizon,
    )
    return scenario, network, cfg


def save_scenario(
    scenario: Scenario,
    network: Network,
    cfg: RunConfig,
    directory: str,
    name: Optional[str] = None,
    extra: Optional[dict] = None,
) -> str:
    """Write manifest, network and category files; returns the manifest path."""
    os.makedirs(directory, exist_ok=True)
    files = {}

    for category in NODE_CATEGORIES:
        if any(cat == category for _, cat in scenario.components):
            files[category] = f"{category}.csv"
            _write_csv(_category_frame(scenario.components, category, scenario.nodes), os.path.join(directory, files[category]))
    for category, series in (("ac", scenario.ac), ("hvdc", scenario.hvdc)):
        if series:
            files[category] = f"{category}.csv"
            _write_csv(_category_frame(series, category, scenario.nodes), os.path.join(directory, files[category]))

    _write_json(network_to_json(network), os.path.join(directory, NETWORK_NAME))

    manifest = {
        "name": name or os.path.basename(os.path.abspath(directory)),
        "resolution": scenario.resolution.to_dict(),
        "horizon": scenario.horizon,
        "nodes": list(scenario.nodes),
        "network": NETWORK_NAME,
        "components": files,
        **run_config_to_manifest(cfg),
    }
    if extra:
        manifest.update(extra)

    path = _write_json(manifest, os.path.join(directory, MANIFEST_NAME))
    logger.info("scenario written to {}", directory)
    return path


# -------------------------------------------------------
#  HIGH-RESOLUTION STAGE
# -------------------------------------------------------

def hr_path(out_dir: str, key: str) -> str:
    owner, category = split_component_key(key)
    if category == "hvdc":
        from_node, to_node = owner.split("->")
        return os.path.join(out_dir, "hr", f"{from_node}__{to_node}__hvdc.csv")
    return os.path.join(out_dir, "hr", f"{owner}__{category}.csv")


def raw_hr_path(out_dir: str, key: str) -> str:
    """Uncorrected twin of hr_path: hr/<name>__raw.csv."""
    return hr_path(out_dir, key)[: -len(".csv")] + "__raw.csv"


def _hr_keys(scenario_hr: ScenarioHr) -> List[str]:
    keys = [component_key(node, cat) for node, cat in scenario_hr.components]
    return keys + [component_key(line_id, "hvdc") for line_id in scenario_hr.hvdc]


def write_hr_stage(out_dir: str, scenario_hr: ScenarioHr, reports: Dict[str, ConvergenceReport]) -> List[str]:
    written = []
    series = {component_key(node, cat): s for (node, cat), s in scenario_hr.components.items()}
    series.update({component_key(line_id, "hvdc"): s for line_id, s in scenario_hr.hvdc.items()})

    for key, hr in series.items():
        df = pd.DataFrame({"step_index": np.arange(1, len(hr) + 1), "power_mw": hr.values})
        written.append(_write_csv(df, hr_path(out_dir, key)))

    windows = [
        {"component": key, **w.to_dict()} for key, report in reports.items() for w in report.ramp_windows
    ]
    windows_df = pd.DataFrame(windows, columns=["component", "shift_index", "c_minutes", "clipped"])
    windows_df["clipped"] = windows_df["clipped"].astype(int)
    written.append(_write_csv(windows_df, os.path.join(out_dir, "hr", "ramp_windows.csv")))

    conv = pd.DataFrame(
        [
            {
                "component": key,
                "iterations": r.iterations,
                "final_error": r.final_error,
                "converged": int(r.converged),
                "e_min": r.e_min,
                "max_iterations": r.max_iterations,
            }
            for key, r in reports.items()
        ],
        columns=["component", "iterations", "final_error", "converged", "e_min", "max_iterations"],
    )
    written.append(_write_csv(conv, os.path.join(out_dir, "hr", "convergence.csv")))

    residuals = pd.DataFrame(
        [
            {"component": key, "tp_index": t + 1, "residual_mwh": float(v)}
            for key, r in reports.items()
            for t, v in enumerate(r.per_tp_residual.values)
        ],
        columns=["component", "tp_index", "residual_mwh"],
    )
    written.append(_write_csv(residuals, os.path.join(out_dir, "hr", "tp_residuals.csv")))

    logger.info("high-resolution stage: {} files written under {}", len(written), os.path.join(out_dir, "hr"))
    return written


def write_uncorrected(out_dir: str, series: Dict[str, HrSeries]) -> List[str]:
    """HR_C/HR_V output before the TP energy correction, keyed like the reports."""
    written = []
    for key in sorted(series):
        hr = series[key]
        df = pd.DataFrame({"step_index": np.arange(1, len(hr) + 1), "power_mw": hr.values})
        written.append(_write_csv(df, raw_hr_path(out_dir, key)))
    return written


def read_uncorrected(out_dir: str, key: str) -> HrSeries:
    return HrSeries(_read_step_csv(raw_hr_path(out_dir, key), "power_mw"))


def read_hr_stage(
    out_dir: str,
    scenario: Scenario,
    network: Network,
) -> Tuple[ScenarioHr, Dict[str, ConvergenceReport]]:
    components = {
        key: HrSeries(_read_step_csv(hr_path(out_dir, component_key(*key)), "power_mw"))
        for key in scenario.components
    }
    hvdc = {
        line_id: HrSeries(_read_step_csv(hr_path(out_dir, component_key(line_id, "hvdc")), "power_mw"))
        for line_id in network.hvdc_ids
    }
    scenario_hr = ScenarioHr(
        resolution=scenario.resolution,
        nodes=scenario.nodes,
        components=components,
        hvdc=hvdc,
        ac_energy=dict(scenario.ac),
    )

    hr_dir = os.path.join(out_dir, "hr")
    conv_path = os.path.join(hr_dir, "convergence.csv")
    if not os.path.isfile(conv_path):
        raise ScenarioValidationError("file not found", path=conv_path)
    conv = pd.read_csv(conv_path, float_precision="round_trip", dtype={"component": str})
    windows = pd.read_csv(
        os.path.join(hr_dir, "ramp_windows.csv"), float_precision="round_trip", dtype={"component": str}
    )
    residuals = pd.read_csv(
        os.path.join(hr_dir, "tp_residuals.csv"), float_precision="round_trip", dtype={"component": str}
    )

    reports = {}
    for row in conv.itertuples(index=False):
        own_windows = windows[windows["component"] == row.component]
        own_residuals = residuals[residuals["component"] == row.component].sort_values("tp_index")
        reports[row.component] = ConvergenceReport(
            iterations=int(row.iterations),
            final_error=float(row.final_error),
            per_tp_residual=TpSeries(own_residuals["residual_mwh"].to_numpy(dtype=float)),
            converged=bool(row.converged),
            e_min=float(row.e_min),
            max_iterations=int(row.max_iterations),
            ramp_windows=tuple(
                RampWindow(int(w.shift_index), float(w.c_minutes), bool(w.clipped))
                for w in own_windows.itertuples(index=False)
            ),
        )
    missing = sorted(set(_hr_keys(scenario_hr)) - set(reports))
    if missing:
        raise ScenarioValidationError(f"no convergence record for {missing}", path=conv_path)
    return scenario_hr, reports


# -------------------------------------------------------
#  NETTING STAGE
# -------------------------------------------------------

def _wide_frame(series: Dict[str, HrSeries]) -> pd.DataFrame:
    n_steps = len(next(iter(series.values()))) if series else 0
    data = {"step_index": np.arange(1, n_steps + 1)}
    data.update({name: s.values for name, s in series.items()})
    return pd.DataFrame(data)


def write_netting_stage(out_dir: str, result: NettingResult) -> List[str]:
    net_dir = os.path.join(out_dir, "netting")
    written = [
        _write_csv(_wide_frame(result.balancing_need), os.path.join(net_dir, "need_raw.csv")),
        _write_csv(_wide_frame(result.ac_flows), os.path.join(net_dir, "flows_raw.csv")),
        _write_json(result.to_dict(), os.path.join(net_dir, "diagnostics.json")),
    ]
    logger.info("netting stage written under {}", net_dir)
    return written


def _read_wide(path: str, names: Iterable[str]) -> Dict[str, HrSeries]:
    if not os.path.isfile(path):
        raise ScenarioValidationError("file not found", path=path)
    df = pd.read_csv(path, float_precision="round_trip")
    out = {}
    for name in names:
        if name not in df.columns:
            raise ScenarioValidationError(f"missing column {name!r}", path=path, row=1)
        out[name] = HrSeries(df[name].to_numpy(dtype=float))
    return out


def read_netting_stage(out_dir: str, nodes: Sequence[str], line_ids: Sequence[str]) -> NettingResult:
    net_dir = os.path.join(out_dir, "netting")
    diagnostics = _read_json(os.path.join(net_dir, "diagnostics.json"))
    return NettingResult(
        balancing_need=_read_wide(os.path.join(net_dir, "need_raw.csv"), nodes),
        ac_flows=_read_wide(os.path.join(net_dir, "flows_raw.csv"), line_ids) if line_ids else {},
        objective=float(diagnostics["objective"]),
        status=diagnostics["status"],
        windows=tuple(WindowDiagnostics(**w) for w in diagnostics.get("windows", [])),
        residuals=dict(diagnostics.get("residuals", {})),
        alpha=float(diagnostics["alpha"]),
    )


# -------------------------------------------------------
#  FINAL RESULTS
# -------------------------------------------------------

def need_path(out_dir: str, node: str) -> str:
    return os.path.join(out_dir, "need", f"{node}.csv")


def flow_path(out_dir: str, line_id: str) -> str:
    from_node, to_node = line_id.split("->")
    return os.path.join(out_dir, "flows", f"{from_node}__{to_node}.csv")


def write_results(
    out_dir: str,
    result: NettingResult,
    stats: Dict[str, BalancingStats],
    labels: Dict[str, CauseLabelSeries],
    histograms: Dict[str, List[Tuple[float, float]]],
    adequacy: List[RampAdequacy],
    metadata: dict,
) -> List[str]:
    """
    need/<node>.csv, flows/<from>__<to>.csv, stats.csv, histogram.csv,
    ramp_adequacy.csv and metadata.json. Same inputs give the same bytes.
    """
    written = []

    for node, need in result.balancing_need.items():
        node_labels = labels[node].labels
        if len(node_labels) != len(need):
            raise ValueError(f"{node}: {len(node_labels)} labels for {len(need)} steps")
        df = pd.DataFrame(
            {"step_index": np.arange(1, len(need) + 1), "need_mw": need.values, "label": list(node_labels)}
        )
        written.append(_write_csv(df, need_path(out_dir, node)))

    for line_id, flow in result.ac_flows.items():
        df = pd.DataFrame({"step_index": np.arange(1, len(flow) + 1), "flow_mw": flow.values})
        written.append(_write_csv(df, flow_path(out_dir, line_id)))

    stats_df = pd.DataFrame(
        [{"node": node, **s.to_dict()} for node, s in stats.items()],
        columns=["node", "max_need_mw", "min_need_mw", "mean_abs_need_mw", "zero_share"],
    )
    written.append(_write_csv(stats_df, os.path.join(out_dir, "stats.csv")))

    hist_df = pd.DataFrame(
        [{"node": node, "bin_mw": centre, "density": d} for node, bins in histograms.items() for centre, d in bins],
        columns=["node", "bin_mw", "density"],
    )
    written.append(_write_csv(hist_df, os.path.join(out_dir, "histogram.csv")))

    adequacy_df = pd.DataFrame(
        [{**row.to_dict(), "kind": split_component_key(row.component)[1]} for row in adequacy],
        columns=["component", "kind", "shifts", "clipped", "share"],
    )
    written.append(_write_csv(adequacy_df, os.path.join(out_dir, "ramp_adequacy.csv")))

    written.append(_write_json(metadata, os.path.join(out_dir, "metadata.json")))
    logger.info("{} result files written to {}", len(written), out_dir)
    return written


def write_comparison(
    out_dir: str,
    stats: Dict[str, Dict[str, BalancingStats]],
    histograms: Dict[str, Dict[str, List[Tuple[float, float]]]],
    absolute_need_mwh: Dict[str, float],
) -> List[str]:
    """
    One table across setups: comparison.csv (per node statistics plus the
    setup's absolute need) and comparison_histogram.csv (per node densities).
    Outer keys are setup names.
    """
    rows = [
        {"setup": setup, "node": node, **s.to_dict(), "absolute_need_mwh": absolute_need_mwh[setup]}
        for setup in sorted(stats)
        for node, s in stats[setup].items()
    ]
    stats_df = pd.DataFrame(
        rows,
        columns=[
            "setup",
            "node",
            "max_need_mw",
            "min_need_mw",
            "mean_abs_need_mw",
            "zero_share",
            "absolute_need_mwh",
        ],
    )
    hist_df = pd.DataFrame(
        [
            {"setup": setup, "node": node, "bin_mw": centre, "density": d}
            for setup in sorted(histograms)
            for node, bins in histograms[setup].items()
            for centre, d in bins
        ],
        columns=["setup", "node", "bin_mw", "density"],
    )
    return [
        _write_csv(stats_df, os.path.join(out_dir, "comparison.csv")),
        _write_csv(hist_df, os.path.join(out_dir, "comparison_histogram.csv")),
    ]


def read_need(out_dir: str, node: str) -> Tuple[HrSeries, CauseLabelSeries]:
    path = need_path(out_dir, node)
    if not os.path.isfile(path):
        raise ScenarioValidationError("file not found", path=path)
    df = pd.read_csv(path, float_precision="round_trip", dtype={"label": str})
    return HrSeries(df["need_mw"].to_numpy(dtype=float)), CauseLabelSeries(tuple(df["label"]))


def read_flow(out_dir: str, line_id: str) -> HrSeries:
    return HrSeries(_read_step_csv(flow_path(out_dir, line_id), "flow_mw"))
