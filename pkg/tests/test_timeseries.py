import numpy as np
import pytest

from core.errors import SeriesValidationError
from core.models import HrSeries, Resolution, TpSeries
from core.synth import fig3_deviation
from core.timeseries import (
    basic_power_expand,
    power_imbalance,
    tp_energy_imbalance,
    tp_energy_of,
)


# -------------------------------------------------------
# Resolution / series construction
# -------------------------------------------------------

def test_resolution_derives_steps_per_tp():
    assert Resolution(60, 1).steps_per_tp == 60
    assert Resolution(15, 1).steps_per_tp == 15
    assert Resolution(60, 5).step_hours == pytest.approx(5 / 60)


@pytest.mark.parametrize("tp, step", [(60, 7), (60, 60), (0, 1), (60, 0)])
def test_resolution_rejects_bad_grids(tp, step):
    with pytest.raises(SeriesValidationError):
        Resolution(tp, step)


def test_series_reject_non_finite_values():
    with pytest.raises(SeriesValidationError):
        TpSeries([1.0, np.nan])
    with pytest.raises(SeriesValidationError):
        HrSeries([np.inf, 1.0])


def test_series_are_read_only():
    tp = TpSeries([1.0, 2.0])
    with pytest.raises(ValueError):
        tp.values[0] = 5.0


# -------------------------------------------------------
# Basic power
# -------------------------------------------------------

def test_basic_power_sixty_minute_tp(res):
    hr = basic_power_expand(TpSeries([120.0, 0.0]), res)
    assert len(hr) == 120
    assert np.all(hr.values[:60] == 120.0)
    assert np.all(hr.values[60:] == 0.0)


def test_basic_power_fifteen_minute_tp():
    hr = basic_power_expand(TpSeries([30.0]), Resolution(15, 1))
    assert len(hr) == 15
    assert np.all(hr.values == 120.0)


def test_basic_power_is_piecewise_constant(res):
    rng = np.random.default_rng(3)
    hr = basic_power_expand(TpSeries(rng.uniform(-500, 500, 24)), res)
    per_tp = hr.values.reshape(-1, res.steps_per_tp)
    assert np.all(per_tp.max(axis=1) - per_tp.min(axis=1) == 0)


def test_tp_energy_round_trip(res):
    rng = np.random.default_rng(11)
    for _ in range(20):
        x = rng.uniform(-1000, 1000, 10)
        back = tp_energy_of(basic_power_expand(TpSeries(x), res), res)
        np.testing.assert_allclose(back.values, x, rtol=1e-9)


def test_tp_energy_of_examples(res):
    assert tp_energy_of(HrSeries(np.full(60, 120.0)), res).to_list() == [120.0]
    assert tp_energy_of(HrSeries(np.zeros(120)), res).to_list() == [0.0, 0.0]


def test_tp_energy_of_rejects_partial_tp(res):
    with pytest.raises(SeriesValidationError):
        tp_energy_of(HrSeries(np.zeros(61)), res)


# -------------------------------------------------------
# Imbalances
# -------------------------------------------------------

def test_power_imbalance_elementwise():
    imb = power_imbalance(HrSeries([130.0, 120.0]), HrSeries([120.0, 120.0]))
    assert imb.to_list() == [10.0, 0.0]


def test_power_imbalance_length_mismatch():
    with pytest.raises(SeriesValidationError):
        power_imbalance(HrSeries([1.0, 2.0]), HrSeries([1.0]))


def test_tp_energy_imbalance_examples(res):
    assert tp_energy_imbalance(HrSeries(np.full(60, 10.0)), res).to_list() == [10.0]

    spike = np.zeros(60)
    spike[17] = 60.0
    assert tp_energy_imbalance(HrSeries(spike), res).values[0] == pytest.approx(1.0)


def test_half_up_half_down_deviation_has_no_tp_energy_imbalance(res):
    actual, basic = fig3_deviation(res, amplitude=10.0, basic_mw=120.0)
    imb = power_imbalance(actual, basic)

    assert tp_energy_imbalance(imb, res).to_list() == [0.0]
    assert np.mean(imb.values != 0.0) > 0.5


def test_identity_chain(res):
    rng = np.random.default_rng(5)
    w = TpSeries(rng.uniform(0, 300, 4))
    actual = HrSeries(rng.uniform(0, 300, 4 * res.steps_per_tp))

    lhs = tp_energy_imbalance(power_imbalance(actual, basic_power_expand(w, res)), res)
    rhs = tp_energy_of(actual, res).values - w.values
    np.testing.assert_allclose(lhs.values, rhs, atol=1e-9)


def test_module_exposes_only_series_operations():
    import core.timeseries as ts

    public = {
        name
        for name, obj in vars(ts).items()
        if callable(obj) and not name.startswith("_") and getattr(obj, "__module__", None) == ts.__name__
    }
    assert public == {"tp_to_mw", "basic_power_expand", "power_imbalance", "tp_energy_of", "tp_energy_imbalance"}
