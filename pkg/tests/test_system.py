"""Tests for the coupled fuel cell and hydrogen generator simulation."""

import json

import numpy as np
import pandas as pd
import pytest

from config import TIMESERIES_HEADER
from errors import CapacityExhaustedError, InfeasibleError, InfeasibleLoadError, ValidationError
from models import CONSTANTS, to_si
from services.hydrogen import GalvanicCellSpec, GasCellState, gas_cell_response
from services.polarization import FuelCellModel
from services.system import (
    CircuitSpec,
    LoadProfile,
    LoadSegment,
    PlenumState,
    Simulation,
    SystemService,
    compensating_bypass_resistor,
    default_time_step,
    duty_cycle_table,
    max_deliverable_power,
    obtainable_energy,
    simulate,
    solve_operating_point,
)


def _pulsed(repeat_count: int = 10) -> LoadProfile:
    return LoadProfile.pulsed(to_si(70.0, 'mW'), to_si(7.0, 'ms'), to_si(100.0, 'ms'), repeat_count)


def _assert_circuit_laws(point, circuit):
    assert abs(point.i_gc - (point.i_fc + point.i_diode + point.i_bypass)) < 1e-9
    assert abs(point.i_load - (point.i_fc + point.i_diode)) < 1e-9
    assert abs(point.v_system - (point.v_fc + point.v_gc)) < 1e-9
    if point.diode_conducting:
        assert point.i_fc == 0.0
        assert point.v_fc == pytest.approx(-circuit.diode_forward_drop)
    else:
        assert point.i_diode == 0.0
        assert point.v_fc >= -circuit.diode_forward_drop


@pytest.mark.parametrize('bypass', [None, 100.0])
@pytest.mark.parametrize('segment', [
    LoadSegment(1.0, 'open'),
    LoadSegment(1.0, 'current', 0.005),
    LoadSegment(1.0, 'current', 0.9),
    LoadSegment(1.0, 'resistance', 20.0),
    LoadSegment(1.0, 'power', 0.07),
])
def test_operating_point_satisfies_circuit_laws(pcb_cell, gas_spec, segment, bypass):
    """Test Kirchhoff's laws at the solved operating point."""
    circuit = CircuitSpec(bypass_resistor=bypass)
    point = solve_operating_point(pcb_cell, gas_spec, circuit, segment, PlenumState.full(circuit))
    _assert_circuit_laws(point, circuit)
    if segment.mode == 'current':
        assert point.i_load == pytest.approx(segment.value)
    elif segment.mode == 'resistance':
        assert point.v_system == pytest.approx(segment.value * point.i_load, abs=1e-6)
    elif segment.mode == 'power':
        assert point.load_power == pytest.approx(segment.value, rel=1e-6)


def test_current_beyond_limit_uses_diode(pcb_cell, gas_spec, circuit):
    """Test that current beyond the limit goes through the diode."""
    point = solve_operating_point(pcb_cell, gas_spec, circuit, LoadSegment(1.0, 'current', 0.9),
                                  PlenumState.full(circuit))
    assert point.diode_conducting
    assert point.i_diode == pytest.approx(0.9)


def test_starved_plenum_uses_diode(pcb_cell, gas_spec, circuit):
    """Test that a starved plenum switches to the diode."""
    point = solve_operating_point(pcb_cell, gas_spec, circuit, LoadSegment(1.0, 'current', 0.005),
                                  PlenumState.empty(circuit))
    _assert_circuit_laws(point, circuit)
    assert point.diode_conducting
    assert point.v_system == pytest.approx(0.36 - 0.3)


def test_power_above_maximum_is_infeasible(pcb_cell, gas_spec, circuit):
    """Test that power above the maximum is infeasible."""
    p_max = max_deliverable_power(pcb_cell, gas_spec, circuit)
    with pytest.raises(InfeasibleLoadError) as info:
        solve_operating_point(pcb_cell, gas_spec, circuit, LoadSegment(1.0, 'power', 2.0 * p_max),
                              PlenumState.full(circuit))
    assert info.value.max_power == pytest.approx(p_max, rel=1e-6)


def test_solver_matches_grid_scan(pcb_cell, gas_spec, circuit):
    """Bisection agrees with a 10^6-point scan within one grid step on random loads."""
    rng = np.random.default_rng(2024)
    upper = pcb_cell.limiting_current * (1.0 - 1e-12)
    grid = np.linspace(0.0, upper, 1_000_000)
    step = grid[1] - grid[0]
    v_gc, _ = gas_cell_response(gas_spec, grid, circuit.bypass_resistor)
    v_system = pcb_cell.raw_voltage(grid) + v_gc
    p_max = max_deliverable_power(pcb_cell, gas_spec, circuit)
    plenum = PlenumState.full(circuit)

    for _ in range(20):
        if rng.random() < 0.5:
            resistance = float(rng.uniform(2.0, 50.0))
            segment = LoadSegment(1.0, 'resistance', resistance)
            k = int(np.nonzero(v_system - resistance * grid <= 0)[0][0])
        else:
            power = float(rng.uniform(1e-3, 0.8 * p_max))
            segment = LoadSegment(1.0, 'power', power)
            k = int(np.nonzero(grid * v_system >= power)[0][0])
        point = solve_operating_point(pcb_cell, gas_spec, circuit, segment, plenum)
        assert not point.diode_conducting
        assert abs(point.i_load - grid[k]) <= step * (1.0 + 1e-6)


def test_mole_balance_closes(pcb_cell, gas_spec, circuit):
    """Test that the hydrogen balance closes under pulsed load."""
    summary = simulate(pcb_cell, gas_spec, circuit, _pulsed(20), record=False).summary
    scale = max(summary.h2_generated, summary.h2_consumed_by_reaction)
    assert abs(summary.mole_balance_residual) <= 1e-9 * scale
    assert summary.gas_cell_charge_used == pytest.approx(summary.h2_generated * CONSTANTS.charge_per_mole_h2,
                                                         rel=1e-12)
    assert summary.h2_lost_to_leakage > 0
    assert 0.0 < summary.eta_system < 1.0


def test_system_efficiency_counts_gas_cell_output(df_params, df_preset, gas_spec, circuit):
    """Test that the gas cell's electrical output joins the efficiency reference."""
    cell = FuelCellModel(df_params.with_leakage(0.0), df_preset.geometry.active_area)
    profile = LoadProfile.constant('current', 0.001, 100.0)
    summary = simulate(cell, gas_spec, circuit, profile, dt=1.0, record=False).summary
    v_fc = float(cell.raw_voltage(0.001))
    v_gc = 0.4 - 8.0 * 0.001
    assert summary.gas_cell_energy == pytest.approx(v_gc * 0.001 * 100.0, rel=1e-9)
    assert summary.eta_system == pytest.approx((v_fc + v_gc) / (CONSTANTS.reference_voltage + v_gc), rel=1e-9)
    assert summary.eta_fuel_cell == pytest.approx(v_fc / CONSTANTS.reference_voltage, rel=1e-9)
    assert summary.eta_system < 1.0


@pytest.mark.parametrize('bypass', [None, 50.0, 200.0])
@pytest.mark.parametrize('segment', [
    LoadSegment(1.0, 'current', 0.0005),
    LoadSegment(1.0, 'current', 0.005),
    LoadSegment(1.0, 'current', 0.05),
    LoadSegment(1.0, 'resistance', 100.0),
    LoadSegment(1.0, 'power', 0.01),
])
def test_efficiency_below_one(df_cell, pcb_cell, gas_spec, segment, bypass):
    """Test that delivered energy never exceeds the hydrogen plus gas-cell reference."""
    circuit = CircuitSpec(bypass_resistor=bypass)
    profile = LoadProfile(segments=(segment, LoadSegment(1.0, 'open')), repeat_count=5)
    for cell in (df_cell, pcb_cell):
        summary = simulate(cell, gas_spec, circuit, profile, record=False).summary
        hydrogen = CONSTANTS.charge_per_mole_h2 * CONSTANTS.reference_voltage * (
            summary.h2_consumed_by_reaction + summary.h2_lost_to_leakage + max(summary.plenum_delta, 0.0))
        assert summary.delivered_energy <= hydrogen + summary.gas_cell_energy
        assert 0.0 <= summary.eta_system < 1.0
        assert 0.0 <= summary.eta_fuel_cell < 1.0


def test_open_circuit_profile_delivers_nothing(pcb_cell, gas_spec, circuit):
    """Test that an all-open profile delivers no energy and only leaks the plenum."""
    profile = LoadProfile(segments=(LoadSegment(2.0, 'open'), LoadSegment(3.0, 'open')), repeat_count=2)
    summary = simulate(pcb_cell, gas_spec, circuit, profile, record=False).summary
    assert summary.delivered_energy == 0.0
    assert summary.h2_generated == 0.0
    assert summary.h2_consumed_by_reaction == 0.0
    assert summary.h2_lost_to_leakage > 0.0
    assert summary.plenum_delta == pytest.approx(-summary.h2_lost_to_leakage, rel=1e-12)
    assert abs(summary.mole_balance_residual) <= 1e-12 * summary.h2_lost_to_leakage
    assert summary.eta_system == 0.0


@pytest.mark.parametrize('segment', [
    LoadSegment(1.0, 'current', 0.005),
    LoadSegment(1.0, 'resistance', 20.0),
    LoadSegment(1.0, 'power', 0.07),
])
def test_series_current_without_bypass_or_leak(pcb_params, pcb_preset, gas_spec, circuit, segment):
    """Test that with no R_L and no leak the gas cell carries exactly the fuel cell current."""
    cell = FuelCellModel(pcb_params.with_leakage(0.0), pcb_preset.geometry.active_area)
    point = solve_operating_point(cell, gas_spec, circuit, segment, PlenumState.full(circuit))
    assert not point.diode_conducting
    assert point.i_gc == point.i_fc
    assert point.i_bypass == 0.0


def test_open_circuit_point_sits_at_ocv(df_cell, pcb_cell, gas_spec, circuit):
    """Test that an open load leaves the fuel cell at its open-circuit voltage."""
    for cell in (df_cell, pcb_cell):
        point = solve_operating_point(cell, gas_spec, circuit, LoadSegment(1.0, 'open'), PlenumState.full(circuit))
        assert point.v_fc == pytest.approx(cell.open_circuit_voltage, rel=1e-12)
        assert point.i_fc == 0.0
        assert point.i_load == 0.0


def test_timeseries_recorded(pcb_cell, gas_spec, circuit):
    """Test the recorded time series."""
    result = simulate(pcb_cell, gas_spec, circuit, _pulsed(2))
    assert list(result.timeseries.columns) == TIMESERIES_HEADER
    assert np.all(np.diff(result.timeseries['t_s']) > 0)
    assert result.timeseries['t_s'].iloc[-1] == pytest.approx(0.2)
    assert simulate(pcb_cell, gas_spec, circuit, _pulsed(2), record=False).timeseries is None


def test_time_step_validation(pcb_cell, gas_spec, circuit):
    """Test time step validation."""
    profile = _pulsed(1)
    assert default_time_step(profile) == pytest.approx(7e-4)
    with pytest.raises(ValidationError):
        Simulation(pcb_cell, gas_spec, circuit, profile, dt=0.005)
    with pytest.raises(ValidationError):
        Simulation(pcb_cell, gas_spec, circuit, profile, dt=0.0)


def test_result_independent_of_time_step(pcb_cell, gas_spec, circuit):
    """Test that halving the time step leaves the result unchanged."""
    coarse = simulate(pcb_cell, gas_spec, circuit, _pulsed(10), dt=7e-4, record=False).summary
    fine = simulate(pcb_cell, gas_spec, circuit, _pulsed(10), dt=3.5e-4, record=False).summary
    assert fine.eta_system == pytest.approx(coarse.eta_system, rel=1e-6)
    assert fine.delivered_energy == pytest.approx(coarse.delivered_energy, rel=1e-6)


def test_pulsed_penalty_on_bench_supply(pcb_cell, circuit):
    """Pulsed 70 mW at 7 % duty costs about two points against a steady 5 mW."""
    bench = GalvanicCellSpec.bench_supply()
    steady = simulate(pcb_cell, bench, circuit, LoadProfile.constant('power', to_si(5.0, 'mW'), 1.0),
                      record=False).summary
    pulsed = simulate(pcb_cell, bench, circuit, _pulsed(10), record=False).summary
    penalty = steady.eta_system - pulsed.eta_system
    assert 0.0 <= penalty <= 0.04
    assert steady.eta_system == pytest.approx(0.5075, abs=0.01)


def test_start_up_from_empty_plenum(pcb_params, pcb_preset, gas_spec, circuit):
    """Diode carries the load until the generator has refilled half the plenum."""
    cell = FuelCellModel(pcb_params.with_leakage(0.0), pcb_preset.geometry.active_area)
    profile = LoadProfile.constant('current', 0.005, 120.0)
    result = simulate(cell, gas_spec, circuit, profile, dt=0.5, plenum=PlenumState.empty(circuit))
    assert 78.0 <= result.summary.starvation_time <= 80.0
    series = result.timeseries
    assert series['i_diode_A'].iloc[0] == pytest.approx(0.005)
    assert series['i_fc_A'].iloc[-1] == pytest.approx(0.005)
    assert series['i_diode_A'].iloc[-1] == 0.0


def test_compensating_bypass_resistor_stops_drift(pcb_cell, gas_spec):
    """Test that the compensating R_L holds the plenum steady."""
    load = 0.005
    r_l = compensating_bypass_resistor(pcb_cell, gas_spec, load)
    expected = (0.4 - 8.0 * (load + pcb_cell.leak_current)) / pcb_cell.leak_current
    assert r_l == pytest.approx(expected)
    profile = LoadProfile.constant('current', load, 10.0)
    balanced = simulate(pcb_cell, gas_spec, CircuitSpec(bypass_resistor=r_l), profile, record=False).summary
    assert abs(balanced.plenum_delta) <= 1e-9 * balanced.h2_generated
    drifting = simulate(pcb_cell, gas_spec, CircuitSpec(), profile, record=False).summary
    assert drifting.plenum_delta < 0


def test_compensating_bypass_resistor_infeasible(pcb_cell, gas_spec):
    """Test that an overloaded gas cell admits no compensating R_L."""
    with pytest.raises(InfeasibleError):
        compensating_bypass_resistor(pcb_cell, gas_spec, 0.1)


def test_capacity_exhaustion_stops_early(pcb_cell, circuit):
    """Test that the run stops when the gas cell is spent."""
    small = GalvanicCellSpec(capacity=0.01)
    profile = LoadProfile.constant('current', 0.005, 10.0)
    summary = simulate(pcb_cell, small, circuit, profile, record=False).summary
    assert summary.capacity_exhausted
    assert summary.duration < 10.0
    assert summary.gas_cell_charge_used == pytest.approx(0.01)
    with pytest.raises(CapacityExhaustedError):
        Simulation(pcb_cell, small, circuit, profile, gas_state=GasCellState(charge_drawn=0.01))


def test_duty_cycle_table(df_cell, pcb_cell, circuit):
    """Efficiency falls as pulses get rarer; leakage dominates at low duty."""
    table = duty_cycle_table(df_cell, pcb_cell, circuit)
    assert list(table.columns) == ['duty', 'interval_s', 'mean_power_mW', 'eta_DF', 'eta_PCB']
    eta_df = table['eta_DF'].to_numpy()
    assert eta_df[0] == pytest.approx(0.65, abs=0.10)
    assert eta_df[1] == pytest.approx(0.55, abs=0.10)
    assert eta_df[2] == pytest.approx(0.15, abs=0.10)
    assert np.all(np.diff(eta_df) < 0)
    assert np.all(np.diff(table['eta_PCB']) < 0)
    assert table['mean_power_mW'].iloc[0] == pytest.approx(4.77, rel=0.05)
    assert 0.05 <= table['eta_PCB'].iloc[1] <= 0.25
    np.testing.assert_allclose(table['interval_s'], [0.1, 1.0, 10.0])


def test_obtainable_energy_trend(df_cell, pcb_cell, gas_spec, circuit):
    """Test that energy per charge falls with current once leakage is amortized."""
    currents = to_si([5.0, 10.0, 20.0, 50.0], 'mA')
    df_table = obtainable_energy(df_cell, gas_spec, circuit, currents)
    assert np.all(np.diff(df_table['energy_full_system_J']) <= 0)
    assert np.all(df_table['energy_full_system_J'] >= df_table['energy_fc_only_J'])
    assert np.all(df_table['eta_system'] < 1.0)
    pcb_table = obtainable_energy(pcb_cell, gas_spec, circuit, currents)
    assert df_table['eta_system'].iloc[0] > pcb_table['eta_system'].iloc[0]
    assert df_table['eta_system'].iloc[0] == pytest.approx(0.7215, abs=2e-3)
    assert df_table['duration_s'].iloc[0] == pytest.approx(gas_spec.capacity / (0.005 + df_cell.leak_current))
    assert df_table['energy_full_system_J'].iloc[0] / gas_spec.capacity == pytest.approx(1.14626, rel=1e-3)


def test_obtainable_energy_charges_leakage(df_cell, gas_spec, circuit):
    """Test that at currents near the leak current the leak share of the charge dominates."""
    table = obtainable_energy(df_cell, gas_spec, circuit, to_si([1.0, 2.0], 'mA'))
    assert table['energy_full_system_J'].iloc[0] < table['energy_full_system_J'].iloc[1]
    assert table['duration_s'].iloc[0] == pytest.approx(gas_spec.capacity / (0.001 + df_cell.leak_current))


def test_obtainable_energy_ignores_configured_bypass(df_cell, gas_spec, circuit):
    """Test that a configured R_L gives the same table as the plain series circuit."""
    currents = to_si([2.0, 5.0, 10.0, 20.0], 'mA')
    plain = obtainable_energy(df_cell, gas_spec, circuit, currents)
    bypassed = obtainable_energy(df_cell, gas_spec, CircuitSpec(bypass_resistor=100.0), currents)
    pd.testing.assert_frame_equal(plain, bypassed)


def test_obtainable_energy_without_leakage(df_params, df_preset, gas_spec, circuit):
    """Test that without leakage the whole charge goes through the load."""
    cell = FuelCellModel(df_params.with_leakage(0.0), df_preset.geometry.active_area)
    table = obtainable_energy(cell, gas_spec, circuit, [0.001])
    v_fc = float(cell.raw_voltage(0.001))
    v_gc = 0.4 - 8.0 * 0.001
    assert table['duration_s'].iloc[0] == pytest.approx(gas_spec.capacity / 0.001)
    assert table['eta_system'].iloc[0] == pytest.approx((v_fc + v_gc) / (CONSTANTS.reference_voltage + v_gc))
    assert table['eta_system'].iloc[0] < 1.0


def test_obtainable_energy_empty_capacity(df_cell, circuit):
    """Test that a spent gas cell yields no energy."""
    table = obtainable_energy(df_cell, GalvanicCellSpec(capacity=0.0), circuit, [0.005])
    assert table['energy_full_system_J'].iloc[0] == 0.0
    assert table['energy_fc_only_J'].iloc[0] == 0.0
    assert table['eta_system'].iloc[0] == 0.0


def test_obtainable_energy_rejects_bad_current(df_cell, gas_spec, circuit):
    """Test rejection of zero and over-limit currents."""
    with pytest.raises(ValidationError):
        obtainable_energy(df_cell, gas_spec, circuit, [0.0])
    with pytest.raises(InfeasibleError, match="cannot carry 1000 mA"):
        obtainable_energy(df_cell, gas_spec, circuit, [1.0])


def test_profile_validation():
    """Test load profile validation."""
    with pytest.raises(ValidationError):
        LoadProfile.pulsed(0.07, 0.1, 0.05)
    with pytest.raises(ValidationError):
        LoadSegment(1.0, 'resistance', 0.0)
    with pytest.raises(ValidationError):
        LoadSegment(0.0, 'current', 0.001)
    with pytest.raises(ValidationError):
        LoadProfile(segments=(LoadSegment(1.0, 'open'),), repeat_count=0)


def test_simulation_study_outputs(pcb_cell, gas_spec, circuit):
    """Test the files queued by the simulation study."""
    service = SystemService()
    service.simulation_study(pcb_cell, gas_spec, circuit, _pulsed(2))
    outputs = service.outputs
    assert set(outputs) == {'timeseries.csv', 'summary.txt', 'summary.json'}
    summary = json.loads(outputs['summary.json'])
    assert summary['capacity_exhausted'] is False
    assert 'eta_system=' in outputs['summary.txt']
