from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from core.errors import SeriesValidationError
from core.models import ConvergenceReport, HrSeries


@dataclass
class BalancingStats:
    max_need: float  # MW
    min_need: float  # MW
    mean_abs_need: float  # MW
    zero_share: float  # fraction of steps with |need| <= threshold

    def to_dict(self):
        return {
            "max_need_mw": self.max_need,
            "min_need_mw": self.min_need,
            "mean_abs_need_mw": self.mean_abs_need,
            "zero_share": self.zero_share,
        }


@dataclass
class RampAdequacy:
    component: str
    shifts: int
    clipped: int

    @property
    def share(self) -> float:
        return self.clipped / self.shifts if self.shifts else 0.0

    def to_dict(self):
        return {
            "component": self.component,
            "shifts": self.shifts,
            "clipped": self.clipped,
            "share": self.share,
        }


# ---------------------------------------------------------------------
# SUMMARY STATISTICS
# ---------------------------------------------------------------------
def summary_stats(need: HrSeries, zero_threshold: float) -> BalancingStats:
    values = need.values
    if len(values) == 0:
        raise SeriesValidationError("cannot summarise an empty series")

    return BalancingStats(
        max_need=float(values.max()),
        min_need=float(values.min()),
        mean_abs_need=float(np.abs(values).mean()),
        zero_share=float(np.mean(np.abs(values) <= zero_threshold)),
    )


# ---------------------------------------------------------------------
# DENSITY
# ---------------------------------------------------------------------
def _bin_index(values: np.ndarray, bin_width: float) -> np.ndarray:
    # bins are centred on multiples of bin_width, rounded away from zero
    # so that +x and -x always land in mirrored bins
    return (np.sign(values) * np.floor(np.abs(values) / bin_width + 0.5)).astype(np.int64)


def density_histogram(need: HrSeries, bin_width: float) -> List[Tuple[float, float]]:
    """
    (bin centre MW, density 1/MW) for every bin between the lowest and the
    highest occupied one. Densities times bin_width sum to 1.
    """
    if not bin_width > 0:
        raise ValueError(f"bin_width must be positive, got {bin_width}")
    values = need.values
    if len(values) == 0:
        raise SeriesValidationError("cannot build a histogram of an empty series")

    idx = _bin_index(values, bin_width)
    lo, hi = int(idx.min()), int(idx.max())
    counts = np.bincount(idx - lo, minlength=hi - lo + 1)
    densities = counts / (len(values) * bin_width)

    return [(float((lo + i) * bin_width), float(d)) for i, d in enumerate(densities)]


# ---------------------------------------------------------------------
# RAMP ADEQUACY
# ---------------------------------------------------------------------
def ramp_adequacy_rows(reports: Dict[str, ConvergenceReport]) -> List[RampAdequacy]:
    """Clipped shifts per component; every report must cover the same horizon."""
    horizons = {len(r.per_tp_residual) for r in reports.values()}
    if len(horizons) > 1:
        raise SeriesValidationError(f"reports cover different horizons: {sorted(horizons)}")

    rows = []
    for component, report in reports.items():
        horizon = len(report.per_tp_residual)
        if len(report.ramp_windows) != horizon - 1:
            raise SeriesValidationError(
                f"{component}: {len(report.ramp_windows)} ramp windows for {horizon} TPs"
            )
        rows.append(RampAdequacy(component, horizon - 1, report.clipped_count))
    return rows


def ramp_adequacy_report(reports: Dict[str, ConvergenceReport]) -> Dict[str, float]:
    """Share of TP shifts where the assumed ramp rate could not reach the new level within half a TP."""
    return {row.component: row.share for row in ramp_adequacy_rows(reports)}
