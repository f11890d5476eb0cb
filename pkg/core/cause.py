# core/cause.py
from collections import Counter
from dataclasses import dataclass
from typing import Dict, List, Sequence

import numpy as np

from core.models import HrSeries, RampWindow, Resolution

LABELS = ("zero", "ramping", "variability")


@dataclass(frozen=True)
class CauseLabelSeries:
    labels: tuple

    def __len__(self):
        return len(self.labels)

    def counts(self) -> Dict[str, int]:
        found = Counter(self.labels)
        return {label: found.get(label, 0) for label in LABELS}

    def share(self, label: str) -> float:
        return self.counts()[label] / len(self.labels) if self.labels else 0.0


def ramp_mask(windows: Sequence[RampWindow], res: Resolution, n_steps: int) -> np.ndarray:
    """True at every step touched by at least one ramp window."""
    mask = np.zeros(n_steps, dtype=bool)
    for w in windows:
        lo, hi = w.step_range(res)
        if hi > lo:
            mask[lo:min(hi, n_steps)] = True
    return mask


def classify_cause(
    need: HrSeries,
    ramp_windows: Sequence[RampWindow],
    res: Resolution,
    zero_threshold: float,
) -> CauseLabelSeries:
    """
    Label each step of one node's need:
      zero        |need| <= threshold
      ramping     inside a ramp window of a controllable or HVDC component of the node
      variability anything else
    """
    values = need.values
    in_ramp = ramp_mask(ramp_windows, res, len(values))
    is_zero = np.abs(values) <= zero_threshold

    labels: List[str] = np.where(is_zero, "zero", np.where(in_ramp, "ramping", "variability")).tolist()
    return CauseLabelSeries(tuple(labels))
