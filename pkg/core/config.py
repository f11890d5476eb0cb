# core/config.py

import os
from dataclasses import dataclass, field, replace
from typing import Dict, Optional

from core.disaggregate import DEFAULT_MAX_ITERATIONS
from core.models import CONTROLLABLE_CATEGORIES, NettingConfig, RampSpec

VERSION = "0.3.0"
RNG_NAME = "numpy.PCG64"

# -------------------------------------------------------
# RAMP RATES (% of g_max per minute)
# -------------------------------------------------------
RAMP_CASES: Dict[str, Dict[str, float]] = {
    "normal": {"hydro": 5.0, "flexible": 5.0, "thermal": 3.0, "nuclear": 1.5},
    "fast": {"hydro": 15.0, "flexible": 15.0, "thermal": 10.0, "nuclear": 5.0},
}

HVDC_RAMP_MW_PER_MIN = 30.0
G_MAX_FLOOR_MW = 1.0

# -------------------------------------------------------
# SETUPS: ramping case x AC limits
# -------------------------------------------------------
SETUPS: Dict[str, Dict] = {
    "S1": {"ramping": "normal", "use_trm": False},
    "S2": {"ramping": "normal", "use_trm": True},
    "S3": {"ramping": "fast", "use_trm": False},
    "S4": {"ramping": "fast", "use_trm": True},
}

DEFAULT_ZERO_THRESHOLD_MW = 1e-3
DEFAULT_BIN_WIDTH_MW = 10.0

OUTPUT_DIR = os.environ.get("NETBAL_OUTPUT_DIR", os.path.join("data", "results"))


def output_dir(explicit: Optional[str] = None) -> str:
    """--out wins, then NETBAL_OUTPUT_DIR, then data/results."""
    if explicit:
        return explicit
    return os.environ.get("NETBAL_OUTPUT_DIR", OUTPUT_DIR)


def ramp_rates_for(case: str) -> Dict[str, RampSpec]:
    """
    Percent-of-max specs without w_max; the loader attaches each component's
    own g_max before use.
    """
    if case not in RAMP_CASES:
        raise ValueError(f"unknown ramping case {case!r}, expected one of {sorted(RAMP_CASES)}")
    return {cat: RampSpec("percent_of_max", rate, G_MAX_FLOOR_MW) for cat, rate in RAMP_CASES[case].items()}


# -------------------------------------------------------
# RUN CONFIG
# -------------------------------------------------------
@dataclass(frozen=True)
class RunConfig:
    ramp_rates: Dict[str, RampSpec] = field(default_factory=lambda: ramp_rates_for("normal"))
    netting: NettingConfig = field(default_factory=NettingConfig)
    e_min: Optional[float] = None  # None -> T * (1e-4)^2 / 2
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    zero_threshold: float = DEFAULT_ZERO_THRESHOLD_MW
    bin_width: float = DEFAULT_BIN_WIDTH_MW
    setup: Optional[str] = None
    workers: int = 1

    def __post_init__(self):
        missing = [c for c in CONTROLLABLE_CATEGORIES if c not in self.ramp_rates]
        if missing:
            raise ValueError(f"ramp rates missing for {missing}")
        if self.e_min is not None and not self.e_min > 0:
            raise ValueError(f"e_min must be positive, got {self.e_min}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.zero_threshold < 0:
            raise ValueError("zero_threshold must be >= 0")
        if not self.bin_width > 0:
            raise ValueError("bin_width must be positive")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def with_setup(self, name: str) -> "RunConfig":
        if name not in SETUPS:
            raise ValueError(f"unknown setup {name!r}, expected one of {sorted(SETUPS)}")
        setup = SETUPS[name]
        return replace(
            self,
            ramp_rates=ramp_rates_for(setup["ramping"]),
            netting=replace(self.netting, use_trm=setup["use_trm"]),
            setup=name,
        )

    def with_overrides(
        self,
        alpha: Optional[float] = None,
        e_min: Optional[float] = None,
        max_iterations: Optional[int] = None,
        window_tps=None,
        zero_threshold: Optional[float] = None,
        bin_width: Optional[float] = None,
        use_trm: Optional[bool] = None,
        workers: Optional[int] = None,
    ) -> "RunConfig":
        netting = self.netting
        if alpha is not None:
            netting = replace(netting, alpha=alpha)
        if use_trm is not None:
            netting = replace(netting, use_trm=use_trm)
        if window_tps is not None:
            netting = replace(netting, window_tps=None if window_tps == "full" else int(window_tps))
        return replace(
            self,
            netting=netting,
            e_min=self.e_min if e_min is None else e_min,
            max_iterations=self.max_iterations if max_iterations is None else max_iterations,
            zero_threshold=self.zero_threshold if zero_threshold is None else zero_threshold,
            bin_width=self.bin_width if bin_width is None else bin_width,
            workers=self.workers if workers is None else workers,
        )

    def to_dict(self):
        return {
            "setup": self.setup,
            "ramp_rates": {cat: {"mode": s.mode, "rate": s.rate} for cat, s in sorted(self.ramp_rates.items())},
            "hvdc_ramp_default_mw_per_min": HVDC_RAMP_MW_PER_MIN,
            "netting": self.netting.to_dict(),
            "correction": {
                "e_min": "T*(1e-4)^2/2" if self.e_min is None else self.e_min,
                "max_iterations": self.max_iterations,
            },
            "zero_threshold": self.zero_threshold,
            "bin_width": self.bin_width,
            "workers": self.workers,
        }
