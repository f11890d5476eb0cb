# core/timeseries.py

import numpy as np

from core.errors import SeriesValidationError
from core.models import HrSeries, Resolution, TpSeries


def _check_multiple(hr: HrSeries, res: Resolution) -> None:
    if len(hr) % res.steps_per_tp:
        raise SeriesValidationError(
            f"HrSeries of {len(hr)} steps is not a multiple of {res.steps_per_tp} steps per TP"
        )


def tp_to_mw(energy, res: Resolution) -> np.ndarray:
    """MWh/TP -> constant MW over the TP."""
    return np.asarray(energy, dtype=float) * 60.0 / res.tp_minutes


def basic_power_expand(tp: TpSeries, res: Resolution) -> HrSeries:
    """Step function holding each TP's energy as constant power (MW) over its steps."""
    return HrSeries(np.repeat(tp_to_mw(tp.values, res), res.steps_per_tp))


def power_imbalance(actual: HrSeries, basic: HrSeries) -> HrSeries:
    if len(actual) != len(basic):
        raise SeriesValidationError(
            f"actual ({len(actual)} steps) and basic ({len(basic)} steps) differ in length"
        )
    return HrSeries(actual.values - basic.values)


def tp_energy_of(hr: HrSeries, res: Resolution) -> TpSeries:
    """Energy per TP, MWh: mean step power over the TP times the TP length in hours."""
    _check_multiple(hr, res)
    return TpSeries(hr.values.reshape(-1, res.steps_per_tp).mean(axis=1) * res.tp_hours)


def tp_energy_imbalance(imb: HrSeries, res: Resolution) -> TpSeries:
    return tp_energy_of(imb, res)
