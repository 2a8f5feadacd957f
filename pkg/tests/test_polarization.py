"""Tests for the polarization and efficiency model."""

from dataclasses import replace

import numpy as np
import pytest

from config import CURVE_HEADER, PCB_CALIBRATION_TARGETS
from errors import CalibrationError, OutOfRangeError, ValidationError
from models import from_si, to_si
from services.polarization import (
    CalibrationTargets,
    PolarizationParams,
    PolarizationService,
    calibrate,
    calibration_residual,
    cell_voltage,
    curve_family,
    efficiency,
    efficiency_arrays,
    efficiency_curve,
    efficiency_vs_leakage,
    max_efficiency_point,
    peak_power_point,
    preset_polarization,
    stack_efficiency,
)


def test_open_circuit_value(pcb_params):
    """At zero current only the leakage-driven activation loss and m remain."""
    expected = 0.8 - 0.009 * np.log(0.55 / 9.0e-4) - 2.0e-4
    assert cell_voltage(pcb_params, 0.0) == pytest.approx(expected, rel=1e-12)
    assert cell_voltage(pcb_params, 0.0) == pytest.approx(0.742063, abs=1e-6)


def test_voltage_decreases_with_current(pcb_params):
    """Test that voltage falls with current and stays non-negative."""
    i = np.linspace(0.0, pcb_params.limiting_current_density, 500, endpoint=False)
    v = cell_voltage(pcb_params, i)
    assert np.all(np.diff(v) <= 0)
    assert np.all(v >= 0)


def test_voltage_domain(pcb_params):
    """Test the current density and resistance domain checks."""
    with pytest.raises(OutOfRangeError):
        cell_voltage(pcb_params, pcb_params.limiting_current_density)
    with pytest.raises(ValidationError):
        cell_voltage(pcb_params, -1.0)
    with pytest.raises(ValidationError):
        cell_voltage(pcb_params, 10.0, r_s=-1e-6)


def test_zero_leakage_has_finite_open_circuit(pcb_params):
    """Test a finite open-circuit voltage without leakage."""
    v = cell_voltage(pcb_params.with_leakage(0.0), 0.0)
    assert v == pytest.approx(0.8 - 2.0e-4)


def test_efficiency_factorization(pcb_params):
    """Test that efficiency is the product of its voltage and Faraday terms."""
    i = to_si(np.array([0.0, 0.55, 5.0, 28.0, 150.0]), 'mA/cm2')
    terms = efficiency_arrays(pcb_params, i)
    np.testing.assert_array_equal(terms['eta'], terms['eta_V'] * terms['eta_F'])
    assert terms['eta_F'][0] == 0.0
    assert terms['eta_F'][1] == pytest.approx(0.5)
    assert np.all(terms['eta'] < 1.0)
    assert np.all(terms['eta_V'] <= pcb_params.open_circuit_voltage / 1.23)


def test_efficiency_decreases_with_leakage(pcb_params):
    """Test that efficiency falls as leakage grows."""
    i = to_si(20.0, 'mA/cm2')
    values = [efficiency(pcb_params.with_leakage(to_si(leak, 'mA/cm2')), i).total
              for leak in (0.0, 0.25, 0.55, 1.0, 3.0)]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_pcb_efficiency_anchors(pcb_params):
    """Committed PCB curve: ~0.56 at ~20 mW/cm^2, peak power 150-200 mW/cm^2."""
    i_best, best = max_efficiency_point(pcb_params)
    assert best.total == pytest.approx(0.56, abs=0.05)
    assert from_si(best.operating_power_density, 'mW/cm2') == pytest.approx(20.0, abs=5.0)
    assert from_si(i_best, 'mA/cm2') == pytest.approx(28.5, abs=1.0)
    _, p_peak = peak_power_point(pcb_params)
    assert 150.0 <= from_si(p_peak, 'mW/cm2') <= 200.0


def test_df_efficiency_anchors(df_params):
    """Test the committed DF curve against its anchors."""
    _, best = max_efficiency_point(df_params)
    assert best.total == pytest.approx(0.65, abs=0.05)
    assert from_si(best.operating_power_density, 'mW/cm2') == pytest.approx(14.4, abs=3.0)


def test_ohmic_budget_loss_is_small(pcb_params):
    """100 mOhm*cm^2 of collector resistance costs well under 2 % at max efficiency."""
    i_best, best = max_efficiency_point(pcb_params)
    r_s = to_si(100.0, 'mohm*cm2')
    lossy = efficiency(pcb_params, i_best, r_s)
    assert 1.0 - lossy.total / best.total <= 0.02
    assert 1.0 - lossy.operating_power_density / best.operating_power_density <= 0.02
    assert lossy.total < best.total


def test_curve_family(pcb_params):
    """Test the curve family over series resistances."""
    i = np.linspace(0.0, pcb_params.limiting_current_density, 50, endpoint=False)
    r_list = to_si([0.0, 100.0, 400.0], 'mohm*cm2')
    table = curve_family(pcb_params, r_list, i)
    assert list(table.columns) == CURVE_HEADER
    assert len(table) == 150
    reference = table[table['r_s_mohmcm2'] == 0.0]
    assert np.all(reference['rel_power_loss'] == 0.0)
    lossy = table[np.isclose(table['r_s_mohmcm2'], 400.0)]
    powered = reference['P_mW_cm2'].to_numpy() > 0
    assert np.all(lossy['rel_power_loss'].to_numpy()[powered] > 0)


def test_curve_family_requires_reference(pcb_params):
    """Test that the curve family needs the zero-resistance curve."""
    with pytest.raises(ValidationError):
        curve_family(pcb_params, to_si([100.0], 'mohm*cm2'), [0.0, 10.0])


def test_efficiency_vs_leakage(pcb_params):
    """Test the efficiency-versus-leakage table."""
    i = np.linspace(0.0, 1000.0, 20, endpoint=False)
    table = efficiency_vs_leakage(pcb_params, to_si([0.0, 1.0], 'mA/cm2'), i)
    assert list(table.columns) == ['i_leak_mA_cm2', 'i_mA_cm2', 'eta']
    no_leak = table[table['i_leak_mA_cm2'] == 0.0]['eta'].to_numpy()
    leak = table[table['i_leak_mA_cm2'] == 1.0]['eta'].to_numpy()
    assert np.all(no_leak[1:] > leak[1:])
    with pytest.raises(ValidationError):
        efficiency_vs_leakage(pcb_params, [-1.0], i)


def test_stack_shunt_leakage(pcb_params):
    """Test that shunt leakage lowers stack Faraday efficiency."""
    i = to_si(20.0, 'mA/cm2')
    single = stack_efficiency(pcb_params, 1, 0.0, i)
    stacked = stack_efficiency(pcb_params, 4, to_si(0.5, 'mA/cm2'), i)
    assert stacked.voltage_efficiency == pytest.approx(single.voltage_efficiency)
    assert stacked.faraday_efficiency < single.faraday_efficiency
    with pytest.raises(ValidationError):
        stack_efficiency(pcb_params, 0, 0.0, i)


def test_efficiency_curve_columns(pcb_params):
    """Test the efficiency curve columns."""
    i = np.linspace(0.0, pcb_params.limiting_current_density, 10, endpoint=False)
    table = efficiency_curve(pcb_params, i)
    assert list(table.columns) == ['i_mA_cm2', 'V', 'P_mW_cm2', 'eta_V', 'eta_F', 'eta']


def test_params_validation(pcb_params):
    """Test rejection of invalid polarization parameters."""
    with pytest.raises(ValidationError):
        replace(pcb_params, open_circuit_voltage=1.5)
    with pytest.raises(ValidationError):
        replace(pcb_params, tafel_slope=0.0)
    with pytest.raises(ValidationError):
        PolarizationParams.from_practical({'open_circuit_voltage_V': 0.8})


def test_params_practical_round_trip(pcb_params):
    """Test parameter conversion to practical units and back."""
    again = PolarizationParams.from_practical(pcb_params.to_practical())
    assert again.exchange_current_density == pytest.approx(pcb_params.exchange_current_density, rel=1e-12)
    assert again.mass_transport_n == pytest.approx(pcb_params.mass_transport_n, rel=1e-12)


def test_committed_preset_meets_targets(pcb_params):
    """Test that the committed PCB curve meets its anchors."""
    targets = CalibrationTargets.from_practical(PCB_CALIBRATION_TARGETS)
    residual = calibration_residual(pcb_params, targets)
    assert np.max(np.abs(residual)) <= targets.tolerance


def test_calibrate_keeps_good_start(pcb_params):
    """Test that a start meeting the anchors is returned unchanged."""
    targets = CalibrationTargets.from_practical(PCB_CALIBRATION_TARGETS)
    fitted = calibrate(targets, pcb_params)
    assert fitted == pcb_params.with_leakage(targets.leakage_current_density)


def test_calibrate_recovers_from_perturbed_start(pcb_params):
    """Test calibration from a perturbed start."""
    targets = CalibrationTargets.from_practical(PCB_CALIBRATION_TARGETS)
    start = replace(pcb_params, tafel_slope=0.02)
    assert np.max(np.abs(calibration_residual(start, targets))) > targets.tolerance
    fitted = calibrate(targets, start)
    assert np.max(np.abs(calibration_residual(fitted, targets))) <= targets.tolerance
    assert fitted.open_circuit_voltage == start.open_circuit_voltage


def test_calibrate_infeasible_targets(pcb_params):
    """Test that unreachable anchors raise a calibration error."""
    values = dict(PCB_CALIBRATION_TARGETS, max_efficiency=0.99)
    with pytest.raises(CalibrationError) as info:
        calibrate(CalibrationTargets.from_practical(values), pcb_params)
    assert info.value.residual is not None


def test_polarization_service_outputs(pcb_params):
    """Test the files queued by the polarization service."""
    service = PolarizationService()
    i = np.linspace(0.0, pcb_params.limiting_current_density, 20, endpoint=False)
    service.curve_study(pcb_params, to_si([0.0, 100.0], 'mohm*cm2'), i)
    service.efficiency_study(pcb_params, to_si([0.0, 0.55], 'mA/cm2'), i)
    assert set(service.outputs) == {'polarization_curves.csv', 'efficiency_vs_leakage.csv',
                                    'efficiency_curve.csv'}


@pytest.mark.parametrize('i_mA_cm2', [5.0, 50.0, 150.0])
def test_series_resistance_slope(pcb_params, i_mA_cm2):
    """Test that dV/dr_s equals -i by finite difference."""
    i = to_si(i_mA_cm2, 'mA/cm2')
    r_s = to_si(50.0, 'mohm*cm2')
    h = to_si(10.0, 'mohm*cm2')
    slope = (cell_voltage(pcb_params, i, r_s + h) - cell_voltage(pcb_params, i, r_s - h)) / (2.0 * h)
    assert slope == pytest.approx(-i, rel=1e-6)


@pytest.mark.parametrize('name', ['DF', 'PCB'])
def test_power_curve_is_unimodal(name):
    """Test that i*V(i) rises to a single peak and then falls."""
    params = preset_polarization(name)
    i = np.linspace(0.0, params.limiting_current_density, 4000, endpoint=False)
    power = i * cell_voltage(params, i)
    k = int(np.argmax(power))
    assert 0 < k < len(i) - 1
    assert np.all(np.diff(power[:k + 1]) > 0)
    assert np.all(np.diff(power[k:]) <= 0)


@pytest.mark.parametrize('name', ['DF', 'PCB'])
@pytest.mark.parametrize('leak_mA_cm2', [0.0, 0.3, 2.0])
def test_efficiency_below_one(name, leak_mA_cm2):
    """Test that total efficiency stays below one across the curve."""
    params = preset_polarization(name).with_leakage(to_si(leak_mA_cm2, 'mA/cm2'))
    terms = efficiency_arrays(params, np.linspace(0.0, params.limiting_current_density, 500, endpoint=False))
    assert np.all(terms['eta'] < 1.0)
    assert np.all(terms['eta_V'] < 1.0)
    assert np.all(terms['eta_F'] <= 1.0)
