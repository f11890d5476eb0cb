# core/disaggregate.py

from typing import Callable, List, Optional, Tuple

import numpy as np
from loguru import logger
from scipy.interpolate import CubicSpline

from core.errors import SeriesValidationError
from core.models import (
    CONTROLLABLE_CATEGORIES,
    VARYING_CATEGORIES,
    ConvergenceReport,
    DisaggregationMethod,
    HrC,
    HrSeries,
    HrV,
    RampSpec,
    RampWindow,
    Resolution,
    TpSeries,
)
from core.timeseries import tp_to_mw

DEFAULT_MAX_ITERATIONS = 100
DEFAULT_RMS_RESIDUAL_MWH = 1e-4


def default_e_min(horizon: int) -> float:
    """Accepted total error giving a per-TP RMS residual of 1e-4 MWh."""
    return horizon * DEFAULT_RMS_RESIDUAL_MWH**2 / 2.0


# -------------------------------------------------------
# Ramp windows (controllable components)
# -------------------------------------------------------

def ramp_window(
    level_from: float,
    level_to: float,
    spec: RampSpec,
    res: Resolution,
    shift_index: int = 1,
) -> RampWindow:
    """
    Half-width C of the ramp around one TP shift, in minutes.
    Capped at half a TP so neighbouring ramps never overlap.
    """
    unclipped = abs(level_to - level_from) / spec.mw_per_minute * 0.5
    cap = res.half_tp_minutes
    if unclipped > cap:
        return RampWindow(shift_index=shift_index, c_minutes=cap, clipped=True)
    return RampWindow(shift_index=shift_index, c_minutes=unclipped, clipped=False)


def ramp_windows(levels: np.ndarray, spec: RampSpec, res: Resolution) -> List[RampWindow]:
    return [
        ramp_window(levels[t], levels[t + 1], spec, res, shift_index=t + 1)
        for t in range(len(levels) - 1)
    ]


def controllable_trajectory(
    levels,
    windows: List[RampWindow],
    res: Resolution,
    minutes,
) -> np.ndarray:
    """
    Continuous HR_C curve evaluated at arbitrary minutes from the horizon start.
    Levels are MW. Outside ramps the curve holds the level of its TP.
    """
    levels = np.asarray(levels, dtype=float)
    minutes = np.asarray(minutes, dtype=float)
    tp_index = np.clip(np.floor(minutes / res.tp_minutes).astype(int), 0, len(levels) - 1)
    out = levels[tp_index].copy()

    for w in windows:
        shift = res.shift_minutes(w.shift_index)
        before, after = levels[w.shift_index - 1], levels[w.shift_index]
        at_shift = minutes == shift
        out[at_shift] = before + (after - before) * 0.5
        if w.c_minutes <= 0:
            continue
        inside = np.abs(minutes - shift) < w.c_minutes
        out[inside] = before + (after - before) * (minutes[inside] - (shift - w.c_minutes)) / (
            2.0 * w.c_minutes
        )
    return out


def _sample_controllable(levels: np.ndarray, windows: List[RampWindow], res: Resolution) -> np.ndarray:
    k = res.steps_per_tp
    n_steps = len(levels) * k
    centres = res.step_centres(n_steps)
    out = np.repeat(levels, k)

    # only the steps around each shift can change
    for w in windows:
        if w.c_minutes <= 0:
            continue
        lo, hi = w.step_range(res)
        hi = min(hi, n_steps)
        local = centres[lo:hi]
        shift = res.shift_minutes(w.shift_index)
        before, after = levels[w.shift_index - 1], levels[w.shift_index]
        inside = np.abs(local - shift) < w.c_minutes
        ramp = before + (after - before) * (local - (shift - w.c_minutes)) / (2.0 * w.c_minutes)
        out[lo:hi] = np.where(inside, ramp, out[lo:hi])
    return out


def _hr_controllable(energy: np.ndarray, spec: RampSpec, res: Resolution) -> Tuple[np.ndarray, List[RampWindow]]:
    levels = tp_to_mw(energy, res)
    windows = ramp_windows(levels, spec, res)
    return _sample_controllable(levels, windows, res), windows


def hr_controllable(tp: TpSeries, spec: RampSpec, res: Resolution) -> HrSeries:
    """
    Method HR_C: basic power inside each TP, linear ramps of half-width C
    centred on every TP shift. No ramp into the first or out of the last TP.
    """
    values, _ = _hr_controllable(tp.values, spec, res)
    return HrSeries(values)


# -------------------------------------------------------
# Cubic spline (varying components)
# -------------------------------------------------------

def varying_curve(levels, res: Resolution) -> Callable[[np.ndarray], np.ndarray]:
    """
    Natural cubic spline through one knot per TP midpoint. Before the first
    and after the last knot the end value is held.
    """
    levels = np.asarray(levels, dtype=float)
    if len(levels) < 2:
        raise SeriesValidationError("HR_V needs at least two trading periods")
    knots = (np.arange(len(levels)) + 0.5) * res.tp_minutes
    spline = CubicSpline(knots, levels, bc_type="natural")

    def curve(minutes):
        return spline(np.clip(np.asarray(minutes, dtype=float), knots[0], knots[-1]))

    return curve


def _hr_varying(energy: np.ndarray, res: Resolution) -> np.ndarray:
    levels = tp_to_mw(energy, res)
    curve = varying_curve(levels, res)
    return curve(res.step_centres(len(levels) * res.steps_per_tp))


def hr_varying(tp: TpSeries, res: Resolution) -> HrSeries:
    """Method HR_V: the spline sampled at every step centre."""
    return HrSeries(_hr_varying(tp.values, res))


# -------------------------------------------------------
# Iterative correction: remove TP energy errors
# -------------------------------------------------------

def enforce_tp_energy(
    tp: TpSeries,
    method: DisaggregationMethod,
    res: Resolution,
    e_min: Optional[float] = None,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> Tuple[HrSeries, ConvergenceReport]:
    """
    Iterate a <- a + h, w^ <- f(a) until e = 1/2 * sum(h^2) <= e_min.

    Non-convergence is reported, not raised. For HR_C the ramp windows of
    the last iteration (computed from the working series) are returned.
    """
    w = tp.values
    horizon = len(w)
    if horizon < 2:
        raise SeriesValidationError("disaggregation needs at least two trading periods")
    if e_min is None:
        e_min = default_e_min(horizon)
    if not e_min > 0:
        raise ValueError(f"e_min must be positive, got {e_min}")
    if max_iterations < 1:
        raise ValueError(f"max_iterations must be >= 1, got {max_iterations}")

    k = res.steps_per_tp
    a = w.copy()
    windows: List[RampWindow] = []
    converged = False

    for iteration in range(1, max_iterations + 1):
        if isinstance(method, HrC):
            values, windows = _hr_controllable(a, method.spec, res)
        elif isinstance(method, HrV):
            values = _hr_varying(a, res)
        else:
            raise TypeError(f"unknown disaggregation method {method!r}")

        if not np.all(np.isfinite(values)):
            raise SeriesValidationError(f"non-finite high-resolution value at iteration {iteration}")

        h = w - values.reshape(-1, k).mean(axis=1) * res.tp_hours
        error = 0.5 * float(np.dot(h, h))
        logger.debug("iteration {} error {:.3e}", iteration, error)

        if error <= e_min:
            converged = True
            break
        if iteration == max_iterations:
            break
        a = a + h

    report = ConvergenceReport(
        iterations=iteration,
        final_error=error,
        per_tp_residual=TpSeries(h),
        converged=converged,
        e_min=e_min,
        max_iterations=max_iterations,
        ramp_windows=tuple(windows),
    )
    return HrSeries(values), report


def method_for(category: str, spec: Optional[RampSpec]) -> DisaggregationMethod:
    """Controllable categories and HVDC ramp; demand and vRES follow the spline."""
    if category in VARYING_CATEGORIES:
        return HrV()
    if category in CONTROLLABLE_CATEGORIES or category == "hvdc":
        if spec is None:
            raise ValueError(f"category {category!r} needs a ramp spec")
        return HrC(spec)
    raise ValueError(f"category {category!r} is not disaggregated")


def disaggregate_component(
    tp: TpSeries,
    category: str,
    res: Resolution,
    spec: Optional[RampSpec] = None,
    e_min: Optional[float] = None,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> Tuple[HrSeries, ConvergenceReport]:
    """Pick HR_C or HR_V for the category and run the TP energy correction."""
    return enforce_tp_energy(tp, method_for(category, spec), res, e_min=e_min, max_iterations=max_iterations)


def uncorrected_component(
    tp: TpSeries,
    category: str,
    res: Resolution,
    spec: Optional[RampSpec] = None,
) -> HrSeries:
    """HR_C or HR_V applied once to the TP energies, before any correction."""
    method = method_for(category, spec)
    if isinstance(method, HrC):
        return hr_controllable(tp, method.spec, res)
    return hr_varying(tp, res)


# -------------------------------------------------------
# Capacity check after correction
# -------------------------------------------------------

def capacity_violation_scan(hr: HrSeries, lower: float, upper: float) -> List[Tuple[int, float]]:
    """
    Steps outside [lower, upper] with their signed excess (positive above
    upper, negative below lower). The series itself is left untouched.
    """
    if lower > upper:
        raise ValueError(f"lower bound {lower} exceeds upper bound {upper}")
    values = hr.values
    violations = []
    for idx in np.flatnonzero((values > upper) | (values < lower)):
        v = float(values[idx])
        violations.append((int(idx), v - upper if v > upper else v - lower))
    return violations
