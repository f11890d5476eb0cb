import numpy as np
import pytest
from scipy.interpolate import CubicSpline

from core.config import ramp_rates_for
from core.disaggregate import (
    capacity_violation_scan,
    controllable_trajectory,
    default_e_min,
    disaggregate_component,
    enforce_tp_energy,
    hr_controllable,
    hr_varying,
    method_for,
    ramp_window,
    ramp_windows,
    uncorrected_component,
    varying_curve,
)
from core.errors import SeriesValidationError
from core.models import HrC, HrSeries, HrV, RampSpec, TpSeries
from core.timeseries import basic_power_expand, tp_energy_of, tp_to_mw


# -------------------------------------------------------
# Ramp windows
# -------------------------------------------------------

def test_ramp_window_percent_of_max(res):
    w = ramp_window(0.0, 300.0, RampSpec("percent_of_max", 5.0, 1000.0), res)
    assert w.c_minutes == pytest.approx(3.0, abs=1e-12)
    assert not w.clipped


def test_ramp_window_absolute_is_capped_at_half_tp(res):
    w = ramp_window(0.0, 2000.0, RampSpec("absolute", 30.0), res)
    assert w.c_minutes == 30.0
    assert w.clipped


def test_ramp_window_without_change(res):
    w = ramp_window(250.0, 250.0, RampSpec("absolute", 30.0), res)
    assert w.c_minutes == 0.0
    assert not w.clipped
    assert w.step_range(res) == (0, 0)


def test_ramp_window_step_range(res):
    w = ramp_window(100.0, 160.0, RampSpec("absolute", 30.0), res, shift_index=1)
    assert w.step_range(res) == (59, 61)


def test_percent_spec_needs_w_max():
    with pytest.raises(ValueError):
        RampSpec("percent_of_max", 5.0, None)
    assert RampSpec("percent_of_max", 5.0, 1.0).with_w_max(0.0).w_max == 1.0


# -------------------------------------------------------
# HR_C
# -------------------------------------------------------

def test_hr_controllable_constant_equals_basic_power(res):
    tp = TpSeries([80.0, 80.0, 80.0])
    spec = RampSpec("absolute", 10.0)
    assert hr_controllable(tp, spec, res) == basic_power_expand(tp, res)


def test_hr_controllable_linear_ramp_around_shift(res):
    spec = RampSpec("absolute", 30.0)
    hr = hr_controllable(TpSeries([100.0, 160.0]), spec, res).values

    # c = 60 MW / 30 MW/min / 2 = 1 min around minute 60
    assert hr[58] == 100.0
    assert hr[59] == pytest.approx(115.0)
    assert hr[60] == pytest.approx(145.0)
    assert hr[61] == 160.0

    levels = np.array([100.0, 160.0])
    windows = ramp_windows(levels, spec, res)
    at_shift = controllable_trajectory(levels, windows, res, [60.0])
    assert at_shift[0] == 130.0


def test_hr_controllable_clipped_ramp_spans_the_tp(res):
    spec = RampSpec("absolute", 0.5)
    hr = hr_controllable(TpSeries([100.0, 160.0]), spec, res).values

    assert hr[29] == 100.0
    assert hr[30] == pytest.approx(100.5)
    assert hr[89] == pytest.approx(159.5)
    assert hr[90] == 160.0


def test_hr_controllable_midpoint_property(res):
    rng = np.random.default_rng(8)
    levels = rng.uniform(0, 800, 6)
    spec = RampSpec("absolute", 20.0)
    windows = ramp_windows(levels, spec, res)
    shifts = [res.shift_minutes(t) for t in range(1, len(levels))]
    values = controllable_trajectory(levels, windows, res, shifts)
    np.testing.assert_allclose(values, (levels[:-1] + levels[1:]) / 2, rtol=1e-12)


# -------------------------------------------------------
# HR_V
# -------------------------------------------------------

def test_hr_varying_constant(res):
    hr = hr_varying(TpSeries([50.0, 50.0, 50.0]), res)
    np.testing.assert_allclose(hr.values, 50.0, atol=1e-9)


def test_hr_varying_passes_through_knots(res):
    levels = np.array([100.0, 200.0, 100.0])
    curve = varying_curve(levels, res)
    np.testing.assert_allclose(curve([30.0, 90.0, 150.0]), levels, atol=1e-9)


def test_hr_varying_peak_inside_middle_tp(res):
    levels = np.array([100.0, 200.0, 100.0])
    fine = np.linspace(0, 180, 18001)
    values = varying_curve(levels, res)(fine)
    peak_at = fine[np.argmax(values)]
    assert 60.0 <= peak_at < 120.0
    assert values.max() >= 200.0 - 1e-9


def test_hr_varying_matches_reference_spline_and_holds_ends(res):
    levels = np.array([100.0, 200.0, 100.0])
    hr = hr_varying(TpSeries(levels), res).values
    centres = res.step_centres(len(hr))

    reference = CubicSpline([30.0, 90.0, 150.0], levels, bc_type="natural")
    inner = (centres >= 30.0) & (centres <= 150.0)
    np.testing.assert_allclose(hr[inner], reference(centres[inner]), atol=1e-9)
    np.testing.assert_allclose(hr[centres < 30.0], 100.0, atol=1e-9)
    np.testing.assert_allclose(hr[centres > 150.0], 100.0, atol=1e-9)


def test_hr_varying_knots_match_basic_power_on_random_series(res):
    rng = np.random.default_rng(2024)
    for _ in range(20):
        energy = rng.uniform(0, 1000, 12)
        curve = varying_curve(tp_to_mw(energy, res), res)
        knots = (np.arange(12) + 0.5) * res.tp_minutes
        np.testing.assert_allclose(curve(knots), tp_to_mw(energy, res), atol=1e-6)


def test_hr_varying_needs_two_tps(res):
    with pytest.raises(SeriesValidationError):
        hr_varying(TpSeries([10.0]), res)


# -------------------------------------------------------
# TP energy correction
# -------------------------------------------------------

def test_default_e_min():
    assert default_e_min(48) == pytest.approx(48 * 1e-8 / 2)


def test_enforce_constant_hr_c_converges_immediately(res):
    hr, report = enforce_tp_energy(TpSeries([100.0, 100.0, 100.0]), HrC(RampSpec("absolute", 30.0)), res)
    assert report.converged
    assert report.iterations == 1
    assert report.final_error == 0.0
    assert len(hr) == 180


def test_enforce_hr_v_conserves_tp_energy(res):
    w = TpSeries([100.0, 200.0, 100.0])
    hr, report = enforce_tp_energy(w, HrV(), res)

    assert report.converged
    assert report.final_error <= report.e_min
    residual = w.values - tp_energy_of(hr, res).values
    np.testing.assert_allclose(residual, report.per_tp_residual.values, atol=1e-12)
    # e <= e_min caps the RMS residual at sqrt(2 e_min / T); a single TP may still hold up to sqrt(2 e_min)
    assert np.sqrt(np.mean(residual**2)) <= np.sqrt(2 * report.e_min / len(w)) + 1e-10
    assert np.max(np.abs(residual)) <= np.sqrt(2 * report.e_min) + 1e-10


def test_enforce_reports_clipped_hvdc_step(res):
    _, report = disaggregate_component(TpSeries([0.0, 2000.0]), "hvdc", res, RampSpec("absolute", 30.0))
    assert len(report.ramp_windows) == 1
    assert report.ramp_windows[0].clipped
    assert report.clipped_count == 1


def test_enforce_stops_at_max_iterations(res):
    w = TpSeries([0.0, 500.0, 0.0, 500.0])
    _, report = enforce_tp_energy(w, HrC(RampSpec("absolute", 5.0)), res, e_min=1e-30, max_iterations=2)
    assert not report.converged
    assert report.iterations == 2


@pytest.mark.parametrize(
    "category, spec",
    [("demand", None), ("hydro", RampSpec("absolute", 5.0)), ("hvdc", RampSpec("absolute", 30.0))],
)
def test_uncorrected_is_the_first_pass(res, category, spec):
    w = TpSeries([0.0, 500.0, 120.0, 500.0])
    first, _ = disaggregate_component(w, category, res, spec, e_min=1e-30, max_iterations=1)
    corrected, report = disaggregate_component(w, category, res, spec)
    raw = uncorrected_component(w, category, res, spec)

    np.testing.assert_array_equal(raw.values, first.values)
    assert report.iterations > 1
    assert not np.array_equal(raw.values, corrected.values)


def test_enforce_rejects_bad_settings(res):
    with pytest.raises(SeriesValidationError):
        enforce_tp_energy(TpSeries([1.0]), HrV(), res)
    with pytest.raises(ValueError):
        enforce_tp_energy(TpSeries([1.0, 2.0]), HrV(), res, e_min=0.0)
    with pytest.raises(ValueError):
        enforce_tp_energy(TpSeries([1.0, 2.0]), HrV(), res, max_iterations=0)


def test_scale_equivariance(res):
    rng = np.random.default_rng(17)
    w = rng.uniform(0, 600, 8)
    k = 3.0
    base, _ = enforce_tp_energy(TpSeries(w), HrC(RampSpec("absolute", 12.0)), res, e_min=1e-300, max_iterations=15)
    scaled, _ = enforce_tp_energy(
        TpSeries(k * w), HrC(RampSpec("absolute", 12.0 * k)), res, e_min=1e-300, max_iterations=15
    )
    np.testing.assert_allclose(scaled.values, k * base.values, rtol=1e-9, atol=1e-9)


@pytest.mark.parametrize("method_name", ["hr_c_normal", "hr_c_fast", "hr_v"])
def test_energy_conservation_on_random_series(res, method_name):
    rng = np.random.default_rng({"hr_c_normal": 1, "hr_c_fast": 2, "hr_v": 3}[method_name])
    horizon = 48
    e_min = (1e-4) ** 2 / 2

    for _ in range(50):
        w = rng.uniform(0, 1000, horizon)
        if method_name == "hr_v":
            method = HrV()
        else:
            case = "normal" if method_name == "hr_c_normal" else "fast"
            g_max = max(float(np.max(tp_to_mw(w, res))), 1.0)
            method = HrC(ramp_rates_for(case)["hydro"].with_w_max(g_max))

        hr, report = enforce_tp_energy(TpSeries(w), method, res, e_min=e_min, max_iterations=100)

        assert report.converged
        assert report.iterations <= 100
        assert np.max(np.abs(tp_energy_of(hr, res).values - w)) <= 1e-4


# -------------------------------------------------------
# Dispatch and capacity scan
# -------------------------------------------------------

def test_method_for_categories():
    spec = RampSpec("absolute", 30.0)
    assert isinstance(method_for("vres", None), HrV)
    assert isinstance(method_for("demand", spec), HrV)
    assert method_for("hydro", spec) == HrC(spec)
    assert method_for("hvdc", spec) == HrC(spec)
    with pytest.raises(ValueError):
        method_for("thermal", None)
    with pytest.raises(ValueError):
        method_for("ac", spec)


def test_capacity_scan_examples():
    assert capacity_violation_scan(HrSeries([0.0, 10.0, -10.0]), -10.0, 10.0) == []
    found = capacity_violation_scan(HrSeries([0.0, 15.0, 3.0]), -10.0, 10.0)
    assert found == [(1, 5.0)]


def test_capacity_scan_after_correction_at_the_limit(res):
    cap = 500.0
    hr, _ = enforce_tp_energy(TpSeries([0.0, cap]), HrC(RampSpec("absolute", 30.0)), res)
    found = capacity_violation_scan(hr, -cap, cap)
    assert found
    assert all(excess > 0 for _, excess in found)
    # series is reported, not clamped
    assert hr.values.max() > cap


def test_capacity_scan_rejects_inverted_bounds():
    with pytest.raises(ValueError):
        capacity_violation_scan(HrSeries([0.0]), 1.0, -1.0)
