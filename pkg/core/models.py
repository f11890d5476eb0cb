import math
from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np

from core.errors import SeriesValidationError


# --------------------------------------------------------
# COMPONENT CATEGORIES
# --------------------------------------------------------
PRODUCTION_CATEGORIES = ("hydro", "flexible", "thermal", "nuclear", "vres")
NODE_CATEGORIES = PRODUCTION_CATEGORIES + ("demand",)
LINE_CATEGORIES = ("ac", "hvdc")
ALL_CATEGORIES = NODE_CATEGORIES + LINE_CATEGORIES

CONTROLLABLE_CATEGORIES = ("hydro", "flexible", "thermal", "nuclear")
VARYING_CATEGORIES = ("vres", "demand")
NONNEGATIVE_CATEGORIES = ("hydro", "thermal", "nuclear", "vres", "demand")


def component_key(owner: str, category: str) -> str:
    """'N1/hydro' for node components, 'N1->DK/hvdc' for HVDC lines."""
    return f"{owner}/{category}"


def split_component_key(key: str) -> tuple[str, str]:
    owner, _, category = key.rpartition("/")
    if not owner or category not in ALL_CATEGORIES:
        raise ValueError(f"malformed component key {key!r}")
    return owner, category


def _frozen_array(values, what: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != 1:
        raise SeriesValidationError(f"{what} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.isfinite(arr))[0])
        raise SeriesValidationError(f"{what} has a non-finite value at position {bad}")
    arr.setflags(write=False)
    return arr


# --------------------------------------------------------
# RESOLUTION
# --------------------------------------------------------
@dataclass(frozen=True)
class Resolution:
    tp_minutes: int = 60
    step_minutes: int = 1

    def __post_init__(self):
        if int(self.tp_minutes) != self.tp_minutes or self.tp_minutes <= 0:
            raise SeriesValidationError(f"tp_minutes must be a positive integer, got {self.tp_minutes}")
        if int(self.step_minutes) != self.step_minutes or self.step_minutes <= 0:
            raise SeriesValidationError(f"step_minutes must be a positive integer, got {self.step_minutes}")
        if self.tp_minutes % self.step_minutes:
            raise SeriesValidationError(
                f"step_minutes={self.step_minutes} does not divide tp_minutes={self.tp_minutes}"
            )
        if self.tp_minutes // self.step_minutes < 2:
            raise SeriesValidationError("a trading period needs at least two high-resolution steps")

    @property
    def steps_per_tp(self) -> int:
        return self.tp_minutes // self.step_minutes

    @property
    def step_hours(self) -> float:
        return self.step_minutes / 60.0

    @property
    def tp_hours(self) -> float:
        return self.tp_minutes / 60.0

    @property
    def half_tp_minutes(self) -> float:
        return self.tp_minutes / 2.0

    def shift_minutes(self, t: int) -> float:
        """Minute of the shift t -> t+1 (t is the 1-based index of the TP before it)."""
        return float(t * self.tp_minutes)

    def step_centres(self, n_steps: int) -> np.ndarray:
        return (np.arange(n_steps) + 0.5) * self.step_minutes

    def to_dict(self):
        return {"tp_minutes": self.tp_minutes, "step_minutes": self.step_minutes}


# --------------------------------------------------------
# SERIES OBJECTS
# --------------------------------------------------------
@dataclass(frozen=True, eq=False)
class TpSeries:
    """Energy per trading period, MWh/TP. Index 0 is TP t=1."""

    values: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.values, "TpSeries")
        if len(arr) < 1:
            raise SeriesValidationError("TpSeries needs at least one trading period")
        object.__setattr__(self, "values", arr)

    def __len__(self):
        return len(self.values)

    def __eq__(self, other):
        return isinstance(other, TpSeries) and np.array_equal(self.values, other.values)

    def to_list(self):
        return self.values.tolist()


@dataclass(frozen=True, eq=False)
class HrSeries:
    """Power per high-resolution step, MW."""

    values: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.values, "HrSeries")
        if len(arr) < 1:
            raise SeriesValidationError("HrSeries needs at least one step")
        object.__setattr__(self, "values", arr)

    def __len__(self):
        return len(self.values)

    def __eq__(self, other):
        return isinstance(other, HrSeries) and np.array_equal(self.values, other.values)

    def to_list(self):
        return self.values.tolist()


# --------------------------------------------------------
# RAMPING
# --------------------------------------------------------
RampMode = Literal["percent_of_max", "absolute"]


@dataclass(frozen=True)
class RampSpec:
    """
    mode "percent_of_max": rate is % of w_max per minute.
    mode "absolute":       rate is MW per minute.
    """

    mode: RampMode
    rate: float
    w_max: Optional[float] = None

    def __post_init__(self):
        if self.mode not in ("percent_of_max", "absolute"):
            raise ValueError(f"unknown ramp mode {self.mode!r}")
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise ValueError(f"ramp rate must be positive, got {self.rate}")
        if self.mode == "percent_of_max":
            if self.w_max is None or not self.w_max >= 1.0:
                raise ValueError(f"percent_of_max ramp needs w_max >= 1 MW, got {self.w_max}")

    @property
    def mw_per_minute(self) -> float:
        if self.mode == "absolute":
            return self.rate
        return self.rate / 100.0 * self.w_max

    def with_w_max(self, w_max: float) -> "RampSpec":
        return RampSpec(self.mode, self.rate, max(float(w_max), 1.0))

    def to_dict(self):
        return {"mode": self.mode, "rate": self.rate, "w_max": self.w_max}


@dataclass(frozen=True)
class RampWindow:
    shift_index: int  # shift t -> t+1, t is 1-based
    c_minutes: float
    clipped: bool

    def step_range(self, res: Resolution) -> tuple[int, int]:
        """Half-open range of step indices overlapping the open ramp interval."""
        if self.c_minutes <= 0:
            return (0, 0)
        shift = res.shift_minutes(self.shift_index)
        first = int(math.floor((shift - self.c_minutes) / res.step_minutes))
        stop = int(math.ceil((shift + self.c_minutes) / res.step_minutes))
        return (max(first, 0), stop)

    def to_dict(self):
        return {"shift_index": self.shift_index, "c_minutes": self.c_minutes, "clipped": self.clipped}


@dataclass(frozen=True)
class HrC:
    """High-resolution method for controllable components."""

    spec: RampSpec


@dataclass(frozen=True)
class HrV:
    """High-resolution method for varying components."""


DisaggregationMethod = HrC | HrV


@dataclass(frozen=True)
class ConvergenceReport:
    iterations: int
    final_error: float
    per_tp_residual: TpSeries
    converged: bool
    e_min: float
    max_iterations: int
    ramp_windows: tuple[RampWindow, ...] = ()

    @property
    def clipped_count(self) -> int:
        return sum(1 for w in self.ramp_windows if w.clipped)

    def to_dict(self):
        return {
            "iterations": self.iterations,
            "final_error": self.final_error,
            "converged": self.converged,
            "e_min": self.e_min,
            "max_iterations": self.max_iterations,
            "max_abs_residual_mwh": float(np.max(np.abs(self.per_tp_residual.values))),
            "clipped_shifts": self.clipped_count,
        }


# --------------------------------------------------------
# NETWORK
# --------------------------------------------------------
@dataclass(frozen=True)
class AcLine:
    from_node: str
    to_node: str
    ntc_forward: float
    ntc_reverse: float
    trm: float = 0.0

    @property
    def line_id(self) -> str:
        return f"{self.from_node}->{self.to_node}"

    def bounds(self, use_trm: bool) -> tuple[float, float]:
        margin = self.trm if use_trm else 0.0
        return (-(self.ntc_reverse + margin), self.ntc_forward + margin)

    def to_dict(self):
        return {
            "from": self.from_node,
            "to": self.to_node,
            "ntc_fwd": self.ntc_forward,
            "ntc_rev": self.ntc_reverse,
            "trm": self.trm,
        }


@dataclass(frozen=True)
class HvdcLine:
    from_node: str
    to_node: str
    ramp_rate: float = 30.0
    capacity_forward: float = math.inf
    capacity_reverse: float = math.inf

    @property
    def line_id(self) -> str:
        return f"{self.from_node}->{self.to_node}"

    def to_dict(self):
        return {
            "from": self.from_node,
            "to": self.to_node,
            "ramp_mw_per_min": self.ramp_rate,
            "cap_fwd": self.capacity_forward,
            "cap_rev": self.capacity_reverse,
        }


@dataclass(frozen=True)
class Network:
    nodes: tuple[str, ...]
    ac_lines: tuple[AcLine, ...] = ()
    hvdc_lines: tuple[HvdcLine, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "ac_lines", tuple(self.ac_lines))
        object.__setattr__(self, "hvdc_lines", tuple(self.hvdc_lines))

        if len(set(self.nodes)) != len(self.nodes):
            raise ValueError("duplicate node identifiers in network")
        node_set = set(self.nodes)
        seen = set()
        for line in self.ac_lines:
            if line.from_node == line.to_node:
                raise ValueError(f"AC line {line.line_id} is a self-loop")
            if line.from_node not in node_set or line.to_node not in node_set:
                raise ValueError(f"AC line {line.line_id} has an endpoint outside the node set")
            if min(line.ntc_forward, line.ntc_reverse, line.trm) < 0:
                raise ValueError(f"AC line {line.line_id} has a negative NTC or TRM")
            if line.line_id in seen:
                raise ValueError(f"duplicate line {line.line_id}")
            seen.add(line.line_id)
        for line in self.hvdc_lines:
            if line.from_node == line.to_node:
                raise ValueError(f"HVDC line {line.line_id} is a self-loop")
            if line.from_node not in node_set and line.to_node not in node_set:
                raise ValueError(f"HVDC line {line.line_id} touches no node of the network")
            if line.ramp_rate <= 0:
                raise ValueError(f"HVDC line {line.line_id} needs a positive ramp rate")
            if min(line.capacity_forward, line.capacity_reverse) < 0:
                raise ValueError(f"HVDC line {line.line_id} has a negative capacity")
            if line.line_id in seen:
                raise ValueError(f"duplicate line {line.line_id}")
            seen.add(line.line_id)

    @property
    def ac_ids(self) -> list[str]:
        return [a.line_id for a in self.ac_lines]

    @property
    def hvdc_ids(self) -> list[str]:
        return [b.line_id for b in self.hvdc_lines]

    def hvdc_by_id(self, line_id: str) -> HvdcLine:
        for line in self.hvdc_lines:
            if line.line_id == line_id:
                return line
        raise KeyError(line_id)

    def hvdc_at(self, node: str) -> list[HvdcLine]:
        return [b for b in self.hvdc_lines if node in (b.from_node, b.to_node)]

    def to_dict(self):
        return {
            "nodes": list(self.nodes),
            "ac_lines": [a.to_dict() for a in self.ac_lines],
            "hvdc_lines": [b.to_dict() for b in self.hvdc_lines],
        }


# --------------------------------------------------------
# SCENARIO OBJECTS
# --------------------------------------------------------
@dataclass(frozen=True)
class Scenario:
    """TP energy bundle as produced by the market simulation."""

    resolution: Resolution
    nodes: tuple[str, ...]
    components: dict  # (node, category) -> TpSeries
    ac: dict = field(default_factory=dict)  # line_id -> TpSeries
    hvdc: dict = field(default_factory=dict)  # line_id -> TpSeries
    g_max: dict = field(default_factory=dict)  # (node, category) -> MW

    def __post_init__(self):
        lengths = {len(s) for s in self.components.values()}
        lengths |= {len(s) for s in self.ac.values()}
        lengths |= {len(s) for s in self.hvdc.values()}
        if len(lengths) > 1:
            raise SeriesValidationError(f"scenario series have different horizons: {sorted(lengths)}")

    @property
    def horizon(self) -> int:
        for s in self.components.values():
            return len(s)
        return 0


@dataclass(frozen=True)
class ScenarioHr:
    """High-resolution scenario, the input of the netting LP."""

    resolution: Resolution
    nodes: tuple[str, ...]
    components: dict  # (node, category) -> HrSeries
    hvdc: dict = field(default_factory=dict)  # line_id -> HrSeries
    ac_energy: dict = field(default_factory=dict)  # line_id -> TpSeries

    def __post_init__(self):
        hr_lengths = {len(s) for s in self.components.values()} | {len(s) for s in self.hvdc.values()}
        if len(hr_lengths) > 1:
            raise SeriesValidationError(f"high-resolution series differ in length: {sorted(hr_lengths)}")
        tp_lengths = {len(s) for s in self.ac_energy.values()}
        if len(tp_lengths) > 1:
            raise SeriesValidationError(f"AC energy series differ in length: {sorted(tp_lengths)}")
        if hr_lengths and tp_lengths:
            n_steps, n_tps = hr_lengths.pop(), tp_lengths.pop()
            if n_steps != n_tps * self.resolution.steps_per_tp:
                raise SeriesValidationError(
                    f"{n_steps} steps do not match {n_tps} TPs x {self.resolution.steps_per_tp} steps"
                )

    @property
    def n_steps(self) -> int:
        for s in list(self.components.values()) + list(self.hvdc.values()):
            return len(s)
        for s in self.ac_energy.values():
            return len(s) * self.resolution.steps_per_tp
        return 0

    def negative_steps(self) -> dict:
        """(node, category) -> count of steps below zero, for nonnegative categories."""
        out = {}
        for (node, category), series in self.components.items():
            if category in NONNEGATIVE_CATEGORIES:
                count = int(np.sum(series.values < 0))
                if count:
                    out[(node, category)] = count
        return out


# --------------------------------------------------------
# NETTING OBJECTS
# --------------------------------------------------------
@dataclass(frozen=True)
class NettingConfig:
    alpha: float = 1e-3
    use_trm: bool = False
    window_tps: Optional[int] = None  # None means the full horizon
    solver_tolerance: float = 1e-4

    def __post_init__(self):
        if not (0 < self.alpha < 0.1):
            raise ValueError(f"alpha must lie in (0, 0.1), got {self.alpha}")
        if self.window_tps is not None and int(self.window_tps) < 1:
            raise ValueError(f"window_tps must be >= 1 or full, got {self.window_tps}")
        if not self.solver_tolerance > 0:
            raise ValueError("solver_tolerance must be positive")

    @property
    def window_label(self):
        return "full" if self.window_tps is None else int(self.window_tps)

    def to_dict(self):
        return {
            "alpha": self.alpha,
            "use_trm": self.use_trm,
            "window_tps": self.window_label,
            "solver_tolerance": self.solver_tolerance,
        }


@dataclass(frozen=True)
class WindowDiagnostics:
    index: int
    first_tp: int  # 1-based, inclusive
    last_tp: int
    status: str
    objective: float
    n_variables: int
    n_constraints: int

    def to_dict(self):
        return {
            "index": self.index,
            "first_tp": self.first_tp,
            "last_tp": self.last_tp,
            "status": self.status,
            "objective": self.objective,
            "n_variables": self.n_variables,
            "n_constraints": self.n_constraints,
        }


@dataclass(frozen=True)
class NettingResult:
    balancing_need: dict  # node -> HrSeries
    ac_flows: dict  # line_id -> HrSeries
    objective: float
    status: str
    windows: tuple[WindowDiagnostics, ...] = ()
    residuals: dict = field(default_factory=dict)
    alpha: float = 1e-3

    def to_dict(self):
        return {
            "objective": self.objective,
            "status": self.status,
            "alpha": self.alpha,
            "residuals": dict(self.residuals),
            "windows": [w.to_dict() for w in self.windows],
        }


@dataclass(frozen=True, eq=False)
class NettingProblem:
    """
    Array form of the netting LP over the whole horizon.
    fixed:      (nodes x steps) injections other than AC, MW
    incidence:  (nodes x lines) +1 at the sending node, -1 at the receiving node
    lower/upper: per-line flow bounds, MW
    ac_energy:  (lines x TPs) scheduled AC energy, MWh/TP
    """

    resolution: Resolution
    nodes: tuple[str, ...]
    line_ids: tuple[str, ...]
    fixed: np.ndarray
    incidence: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    ac_energy: np.ndarray
    alpha: float

    @property
    def n_steps(self) -> int:
        return self.fixed.shape[1]

    @property
    def n_tps(self) -> int:
        return self.n_steps // self.resolution.steps_per_tp

    def variable_count(self, n_tps: Optional[int] = None, with_predecessor: bool = False) -> int:
        """z, split |need| and split |dz| variables of a window of n_tps TPs."""
        steps = (self.n_tps if n_tps is None else n_tps) * self.resolution.steps_per_tp
        lines, nodes = len(self.line_ids), len(self.nodes)
        smoothing_terms = steps if with_predecessor else steps - 1
        return steps * lines + 2 * nodes * steps + 2 * lines * smoothing_terms
