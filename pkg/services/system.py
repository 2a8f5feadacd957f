"""Fuel cell, gas cell, bypass diode and bypass resistor as one circuit.

The fuel cell sits in series with the hydrogen-evolving gas cell. A Schottky
diode bridges the fuel cell when it cannot carry the load (start-up,
starvation, overload) and an optional resistor R_L across the gas cell draws
surplus current to over-generate hydrogen. Electrochemistry is quasi-static:
each step solves a memoryless operating point, only the anode plenum and the
gas-cell charge carry state between steps.
"""

import cython
import json
import logging
import math
from dataclasses import dataclass, asdict, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import bisect, minimize_scalar

from config import (
    DIODE_FORWARD_DROP,
    PLENUM_VOLUME_CM3,
    STARVATION_PRESSURE_FRACTION,
    STANDARD_TEMPERATURE,
    STANDARD_PRESSURE,
    SOLVER_XTOL,
    SOLVER_RTOL,
    SOLVER_SCAN_POINTS,
    MAX_DEFAULT_TIME_STEP,
    MIN_STEPS_PER_SEGMENT,
    PULSE_POWER_MW,
    PULSE_WIDTH_MS,
    DUTY_BASE_INTERVAL_MS,
    TIMESERIES_HEADER,
    CSV_FLOAT_FORMAT,
)
from errors import CapacityExhaustedError, InfeasibleError, InfeasibleLoadError, ValidationError
from models import CONSTANTS, from_si, to_si
from .base import BaseService
from .hydrogen import GalvanicCellSpec, GasCellState, gas_cell_response, terminal_voltage
from .polarization import FuelCellModel

logger = logging.getLogger('MicroCell.SystemService')

LOAD_MODES = ('current', 'power', 'resistance', 'open')


@dataclass(frozen=True)
class CircuitSpec:
    """Passive parts around the two cells, SI. bypass_resistor None means absent."""

    bypass_resistor: Optional[float] = None
    diode_forward_drop: float = DIODE_FORWARD_DROP
    plenum_volume: float = to_si(PLENUM_VOLUME_CM3, 'cm3')
    plenum_temperature: float = STANDARD_TEMPERATURE
    starvation_pressure_fraction: float = STARVATION_PRESSURE_FRACTION
    ambient_pressure: float = STANDARD_PRESSURE

    def __post_init__(self):
        if self.bypass_resistor is not None:
            if math.isinf(self.bypass_resistor):
                object.__setattr__(self, 'bypass_resistor', None)
            elif not self.bypass_resistor > 0:
                raise ValidationError(f"Bypass resistor must be positive or absent, got {self.bypass_resistor}")
        if not 0 < self.diode_forward_drop < 1:
            raise ValidationError(f"Diode forward drop must lie in (0, 1) V, got {self.diode_forward_drop}")
        if not self.plenum_volume > 0 or not self.plenum_temperature > 0 or not self.ambient_pressure > 0:
            raise ValidationError("Plenum volume, temperature and ambient pressure must be positive")
        if not 0 <= self.starvation_pressure_fraction < 1:
            raise ValidationError("Starvation pressure fraction must lie in [0, 1)")

    @classmethod
    def from_practical(cls, values: Dict[str, object]) -> 'CircuitSpec':
        known = {
            'bypass_resistor_ohm': ('bypass_resistor', 'ohm'),
            'diode_forward_drop_V': ('diode_forward_drop', 'V'),
            'plenum_volume_cm3': ('plenum_volume', 'cm3'),
            'plenum_temperature_K': ('plenum_temperature', None),
            'starvation_pressure_fraction': ('starvation_pressure_fraction', None),
            'ambient_pressure_Pa': ('ambient_pressure', None),
        }
        unknown = set(values) - set(known)
        if unknown:
            raise ValidationError(f"Unknown circuit fields: {sorted(unknown)}")
        kwargs = {}
        for key, value in values.items():
            name, unit = known[key]
            if value is None:
                kwargs[name] = None
            else:
                kwargs[name] = to_si(value, unit) if unit else float(value)
        return cls(**kwargs)


@dataclass(frozen=True)
class LoadSegment:
    """Constant load for a duration: current (A), power (W), resistance (ohm) or open."""

    duration: float
    mode: str
    value: float = 0.0

    def __post_init__(self):
        if self.mode not in LOAD_MODES:
            raise ValidationError(f"Unknown load mode: {self.mode}")
        if not self.duration > 0:
            raise ValidationError(f"Segment duration must be positive, got {self.duration}")
        if self.value < 0:
            raise ValidationError(f"Load value must be non-negative, got {self.value}")
        if self.mode == 'resistance' and not self.value > 0:
            raise ValidationError("Load resistance must be positive")


@dataclass(frozen=True)
class LoadProfile:
    segments: Tuple[LoadSegment, ...]
    repeat_count: int = 1

    def __post_init__(self):
        if not self.segments:
            raise ValidationError("Load profile has no segments")
        if int(self.repeat_count) != self.repeat_count or self.repeat_count < 1:
            raise ValidationError(f"repeat_count must be a positive integer, got {self.repeat_count}")
        object.__setattr__(self, 'segments', tuple(self.segments))

    @property
    def total_duration(self) -> float:
        return self.repeat_count * sum(segment.duration for segment in self.segments)

    @property
    def min_duration(self) -> float:
        return min(segment.duration for segment in self.segments)

    @classmethod
    def constant(cls, mode: str, value: float, duration: float) -> 'LoadProfile':
        return cls(segments=(LoadSegment(duration, mode, value),))

    @classmethod
    def pulsed(cls, pulse_power: float, pulse_width: float, period: float, repeat_count: int = 1) -> 'LoadProfile':
        """Constant-power pulses with open circuit for the rest of each period."""
        if not period > pulse_width:
            raise ValidationError(f"Pulse period {period} s must exceed the pulse width {pulse_width} s")
        return cls(
            segments=(LoadSegment(pulse_width, 'power', pulse_power), LoadSegment(period - pulse_width, 'open')),
            repeat_count=repeat_count,
        )


@dataclass
class PlenumState:
    """Hydrogen in the anode plenum (ideal gas at fixed temperature)."""

    moles: float
    volume: float
    temperature: float

    @property
    def pressure(self) -> float:
        return self.moles * CONSTANTS.gas_constant * self.temperature / self.volume

    def is_starved(self, circuit: CircuitSpec) -> bool:
        return self.pressure < circuit.starvation_pressure_fraction * circuit.ambient_pressure

    @classmethod
    def full(cls, circuit: CircuitSpec) -> 'PlenumState':
        """Plenum filled with hydrogen at ambient pressure."""
        moles = circuit.ambient_pressure * circuit.plenum_volume / (CONSTANTS.gas_constant * circuit.plenum_temperature)
        return cls(moles=moles, volume=circuit.plenum_volume, temperature=circuit.plenum_temperature)

    @classmethod
    def empty(cls, circuit: CircuitSpec) -> 'PlenumState':
        return cls(moles=0.0, volume=circuit.plenum_volume, temperature=circuit.plenum_temperature)


@dataclass(frozen=True)
class OperatingPoint:
    i_fc: float
    v_fc: float
    i_gc: float
    v_gc: float
    i_diode: float
    i_bypass: float
    i_load: float
    v_system: float
    diode_conducting: bool = False

    @property
    def load_power(self) -> float:
        return self.v_system * self.i_load


@dataclass(frozen=True)
class SimulationSummary:
    delivered_energy: float
    fuel_cell_energy: float
    gas_cell_energy: float
    h2_generated: float
    h2_consumed_by_reaction: float
    h2_lost_to_leakage: float
    plenum_delta: float
    eta_system: float
    eta_fuel_cell: float
    eta_voltage_mean: float
    eta_faraday_mean: float
    starvation_time: float
    gas_cell_charge_used: float
    duration: float
    mean_power: float
    capacity_exhausted: bool

    @property
    def mole_balance_residual(self) -> float:
        return self.h2_generated - self.h2_consumed_by_reaction - self.h2_lost_to_leakage - self.plenum_delta

    def render(self) -> str:
        """Flat key=value text block."""
        lines = []
        for key, value in asdict(self).items():
            if isinstance(value, bool):
                lines.append(f"{key}={str(value).lower()}")
            else:
                lines.append(f"{key}={CSV_FLOAT_FORMAT % value}")
        return '\n'.join(lines) + '\n'

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + '\n'


@dataclass(frozen=True)
class SimulationResult:
    summary: SimulationSummary
    timeseries: Optional[pd.DataFrame] = None


def _fuel_cell_point(cell: FuelCellModel, gas_spec: GalvanicCellSpec, circuit: CircuitSpec,
                     current: float) -> OperatingPoint:
    v_fc = float(cell.raw_voltage(current))
    v_gc, i_bypass = gas_cell_response(gas_spec, current, circuit.bypass_resistor)
    v_gc, i_bypass = float(v_gc), float(i_bypass)
    return OperatingPoint(
        i_fc=current,
        v_fc=v_fc,
        i_gc=current + i_bypass,
        v_gc=v_gc,
        i_diode=0.0,
        i_bypass=i_bypass,
        i_load=current,
        v_system=v_fc + v_gc,
    )


def _diode_system_voltage(gas_spec: GalvanicCellSpec, circuit: CircuitSpec, current):
    v_gc, _ = gas_cell_response(gas_spec, current, circuit.bypass_resistor)
    return v_gc - circuit.diode_forward_drop


def _bracketed_root(func, lo: float, hi: float) -> float:
    f_lo, f_hi = func(lo), func(hi)
    if f_lo == 0:
        return lo
    if f_hi == 0:
        return hi
    return bisect(func, lo, hi, xtol=SOLVER_XTOL, rtol=SOLVER_RTOL)


def _first_crossing(func, values: np.ndarray, grid: np.ndarray, target: float) -> Optional[float]:
    """Smallest root of func = 0 where the scanned values first reach target."""
    idx = np.nonzero(values >= target)[0]
    if idx.size == 0:
        return None
    k = int(idx[0])
    if k == 0:
        return float(grid[0])
    return _bracketed_root(func, float(grid[k - 1]), float(grid[k]))


def _refined_peak(func, values: np.ndarray, grid: np.ndarray) -> Tuple[float, float]:
    k = int(np.argmax(values))
    lo = float(grid[max(k - 1, 0)])
    hi = float(grid[min(k + 1, grid.size - 1)])
    best_x, best_f = float(grid[k]), float(values[k])
    if hi > lo:
        result = minimize_scalar(lambda x: -func(x), bounds=(lo, hi), method='bounded',
                                 options={'xatol': SOLVER_XTOL})
        if -result.fun > best_f:
            best_x, best_f = float(result.x), float(-result.fun)
    return best_x, best_f


def _diode_point(gas_spec: GalvanicCellSpec, circuit: CircuitSpec, segment: LoadSegment) -> OperatingPoint:
    """Fuel cell bypassed: the load current flows through the diode."""
    v_d = circuit.diode_forward_drop
    if segment.mode == 'open':
        v_gc, i_bypass = gas_cell_response(gas_spec, 0.0, circuit.bypass_resistor)
        return OperatingPoint(i_fc=0.0, v_fc=0.0, i_gc=float(i_bypass), v_gc=float(v_gc), i_diode=0.0,
                              i_bypass=float(i_bypass), i_load=0.0, v_system=0.0 + float(v_gc))

    def system_voltage(i):
        return float(_diode_system_voltage(gas_spec, circuit, i))

    v_open = system_voltage(0.0)
    if segment.mode == 'current':
        current = segment.value
    elif v_open <= 0:
        current = 0.0
    elif segment.mode == 'resistance':
        upper = v_open / segment.value
        current = _bracketed_root(lambda i: system_voltage(i) - segment.value * i, 0.0, upper)
    elif gas_spec.internal_resistance == 0:
        current = segment.value / v_open
    else:
        # system voltage reaches zero no later than where the gas cell hits its floor
        i_zero = _bracketed_root(system_voltage, 0.0, gas_spec.open_circuit_voltage / gas_spec.internal_resistance)
        grid = np.linspace(0.0, i_zero, SOLVER_SCAN_POINTS)
        powers = grid * _diode_system_voltage(gas_spec, circuit, grid)
        current = _first_crossing(lambda i: i * system_voltage(i) - segment.value, powers, grid, segment.value)
        if current is None:
            current, p_max = _refined_peak(lambda i: i * system_voltage(i), powers, grid)
            logger.debug(f"Diode path browns out at {p_max:.4g} W of {segment.value:.4g} W demanded")

    v_gc, i_bypass = gas_cell_response(gas_spec, current, circuit.bypass_resistor)
    v_gc, i_bypass = float(v_gc), float(i_bypass)
    return OperatingPoint(
        i_fc=0.0,
        v_fc=-v_d,
        i_gc=current + i_bypass,
        v_gc=v_gc,
        i_diode=current,
        i_bypass=i_bypass,
        i_load=current,
        v_system=v_gc - v_d,
        diode_conducting=current > 0,
    )


def max_deliverable_power(cell: FuelCellModel, gas_spec: GalvanicCellSpec, circuit: CircuitSpec) -> float:
    """Largest constant power the fuel-cell branch can supply (W)."""
    grid = np.linspace(0.0, cell.limiting_current * (1.0 - 1e-12), SOLVER_SCAN_POINTS)
    v_gc, _ = gas_cell_response(gas_spec, grid, circuit.bypass_resistor)
    powers = grid * (cell.raw_voltage(grid) + v_gc)

    def power(i):
        v, _ = gas_cell_response(gas_spec, i, circuit.bypass_resistor)
        return i * (float(cell.raw_voltage(i)) + float(v))

    return _refined_peak(power, powers, grid)[1]


def solve_operating_point(cell: FuelCellModel, gas_spec: GalvanicCellSpec, circuit: CircuitSpec,
                          segment: LoadSegment, plenum: PlenumState) -> OperatingPoint:
    """Quasi-static circuit solution for one load segment and plenum state."""
    if plenum.is_starved(circuit):
        return _diode_point(gas_spec, circuit, segment)

    if segment.mode == 'open':
        return _fuel_cell_point(cell, gas_spec, circuit, 0.0)

    upper = cell.limiting_current * (1.0 - 1e-12)

    def system_voltage(i):
        v_gc, _ = gas_cell_response(gas_spec, i, circuit.bypass_resistor)
        return float(cell.raw_voltage(i)) + float(v_gc)

    if segment.mode == 'current':
        current = segment.value
        if current >= upper or float(cell.raw_voltage(current)) < 0:
            return _diode_point(gas_spec, circuit, segment)
        return _fuel_cell_point(cell, gas_spec, circuit, current)

    if segment.mode == 'resistance':
        residual = lambda i: system_voltage(i) - segment.value * i
        if residual(upper) > 0:
            return _diode_point(gas_spec, circuit, segment)
        current = _bracketed_root(residual, 0.0, upper)
    else:
        if segment.value == 0:
            return _fuel_cell_point(cell, gas_spec, circuit, 0.0)
        grid = np.linspace(0.0, upper, SOLVER_SCAN_POINTS)
        v_gc, _ = gas_cell_response(gas_spec, grid, circuit.bypass_resistor)
        powers = grid * (cell.raw_voltage(grid) + v_gc)
        shortfall = lambda i: i * system_voltage(i) - segment.value
        current = _first_crossing(shortfall, powers, grid, segment.value)
        if current is None:
            peak_current, p_max = _refined_peak(lambda i: i * system_voltage(i), powers, grid)
            if p_max < segment.value:
                raise InfeasibleLoadError(
                    f"Load of {from_si(segment.value, 'mW'):.4g} mW exceeds the maximum deliverable "
                    f"{from_si(p_max, 'mW'):.4g} mW", max_power=p_max)
            k = int(np.argmax(powers))
            current = _bracketed_root(shortfall, float(grid[max(k - 1, 0)]), peak_current)

    if float(cell.raw_voltage(current)) < 0:
        return _diode_point(gas_spec, circuit, segment)
    return _fuel_cell_point(cell, gas_spec, circuit, current)


def compensating_bypass_resistor(cell: FuelCellModel, gas_spec: GalvanicCellSpec,
                                 load_current: float) -> Optional[float]:
    """R_L whose surplus generation exactly replaces membrane leakage at a steady load."""
    leak = cell.leak_current
    if leak == 0:
        return None
    v_gc = gas_spec.open_circuit_voltage - gas_spec.internal_resistance * (load_current + leak)
    if not 0 < v_gc <= gas_spec.voltage_ceiling:
        raise InfeasibleError(
            f"Gas cell cannot supply {from_si(load_current + leak, 'mA'):.4g} mA with positive terminal voltage")
    return v_gc / leak


def default_time_step(profile: LoadProfile) -> float:
    return min(MAX_DEFAULT_TIME_STEP, profile.min_duration / MIN_STEPS_PER_SEGMENT)


@cython.cclass
class Simulation:
    """One transient run; owns its plenum and gas-cell state."""

    _cell: FuelCellModel
    _gas_spec: GalvanicCellSpec
    _circuit: CircuitSpec
    _profile: LoadProfile
    _dt: cython.double
    _plenum: PlenumState
    _gas_state: GasCellState
    _record: cython.bint
    _cache: dict

    def __init__(self, cell: FuelCellModel, gas_spec: GalvanicCellSpec, circuit: CircuitSpec,
                 profile: LoadProfile, dt: Optional[float] = None, plenum: Optional[PlenumState] = None,
                 gas_state: Optional[GasCellState] = None, record: bool = True):
        """Validate the run and take ownership of its state."""
        step = default_time_step(profile) if dt is None else float(dt)
        if not step > 0:
            raise ValidationError(f"Time step must be positive, got {step}")
        if step > profile.min_duration / MIN_STEPS_PER_SEGMENT * (1.0 + 1e-12):
            raise ValidationError(
                f"Time step {step:.6g} s exceeds a tenth of the shortest segment ({profile.min_duration:.6g} s)")
        self._cell = cell
        self._gas_spec = gas_spec
        self._circuit = circuit
        self._profile = profile
        self._dt = step
        self._plenum = plenum if plenum is not None else PlenumState.full(circuit)
        self._gas_state = gas_state if gas_state is not None else GasCellState()
        self._record = record
        self._cache = {}
        if self._gas_state.remaining_charge(gas_spec) <= 0:
            raise CapacityExhaustedError("Gas cell capacity already exhausted")

    def _operating_point(self, index: cython.int, segment: LoadSegment, starved: cython.bint) -> OperatingPoint:
        key = (index, starved)
        point = self._cache.get(key)
        if point is None:
            point = solve_operating_point(self._cell, self._gas_spec, self._circuit, segment, self._plenum)
            self._cache[key] = point
        return point

    def run(self) -> SimulationResult:
        """Integrate the profile with fixed steps, stopping early if the gas cell runs out."""
        per_mole: cython.double = CONSTANTS.charge_per_mole_h2
        leak_current: cython.double = self._cell.leak_current
        charge_start: cython.double = self._gas_state.charge_drawn
        t: cython.double = 0.0
        delivered: cython.double = 0.0
        fc_energy: cython.double = 0.0
        gc_energy: cython.double = 0.0
        fc_charge: cython.double = 0.0
        consumed_total: cython.double = 0.0
        leaked_total: cython.double = 0.0
        plenum_delta: cython.double = 0.0
        starvation_time: cython.double = 0.0
        exhausted: cython.bint = False
        rows: List[Tuple[float, ...]] = []

        for _ in range(self._profile.repeat_count):
            for index, segment in enumerate(self._profile.segments):
                n_steps = max(int(math.ceil(segment.duration / self._dt - 1e-9)), 1)
                h = segment.duration / n_steps
                for _ in range(n_steps):
                    starved = self._plenum.is_starved(self._circuit)
                    point = self._operating_point(index, segment, starved)
                    step = h
                    remaining = self._gas_state.remaining_charge(self._gas_spec)
                    if point.i_gc > 0 and point.i_gc * step >= remaining:
                        step = remaining / point.i_gc
                        exhausted = True
                    generated = self._gas_state.draw(point.i_gc, step)
                    consumed = point.i_fc * step / per_mole
                    available = self._plenum.moles + generated - consumed
                    leaked = min(leak_current * step / per_mole, max(available, 0.0))
                    net = generated - consumed - leaked
                    self._plenum.moles += net

                    t += step
                    delivered += point.v_system * point.i_load * step
                    fc_energy += point.v_fc * point.i_fc * step
                    gc_energy += point.v_gc * point.i_gc * step
                    fc_charge += point.i_fc * step
                    consumed_total += consumed
                    leaked_total += leaked
                    plenum_delta += net
                    if starved or point.diode_conducting:
                        starvation_time += step
                    if self._record:
                        rows.append((t, point.i_fc, point.v_fc, point.i_gc, point.v_gc, point.i_diode,
                                     point.i_bypass, self._plenum.pressure, self._plenum.moles))
                    if exhausted:
                        break
                if exhausted:
                    break
            if exhausted:
                logger.warning(f"Gas cell exhausted after {t:.6g} s")
                break

        charge_used = self._gas_state.charge_drawn - charge_start
        generated_total = charge_used / per_mole
        used = consumed_total + leaked_total + max(plenum_delta, 0.0)
        hydrogen_reference = per_mole * CONSTANTS.reference_voltage * used
        # gas-cell electrical output counts as an input alongside the hydrogen
        reference = hydrogen_reference + gc_energy
        summary = SimulationSummary(
            delivered_energy=delivered,
            fuel_cell_energy=fc_energy,
            gas_cell_energy=gc_energy,
            h2_generated=generated_total,
            h2_consumed_by_reaction=consumed_total,
            h2_lost_to_leakage=leaked_total,
            plenum_delta=plenum_delta,
            eta_system=delivered / reference if reference > 0 else 0.0,
            eta_fuel_cell=fc_energy / hydrogen_reference if hydrogen_reference > 0 else 0.0,
            eta_voltage_mean=fc_energy / (CONSTANTS.reference_voltage * fc_charge) if fc_charge > 0 else 0.0,
            eta_faraday_mean=(consumed_total / (consumed_total + leaked_total)
                              if consumed_total + leaked_total > 0 else 0.0),
            starvation_time=starvation_time,
            gas_cell_charge_used=charge_used,
            duration=t,
            mean_power=delivered / t if t > 0 else 0.0,
            capacity_exhausted=bool(exhausted),
        )
        timeseries = pd.DataFrame(rows, columns=TIMESERIES_HEADER) if self._record else None
        return SimulationResult(summary=summary, timeseries=timeseries)


def simulate(cell: FuelCellModel, gas_spec: GalvanicCellSpec, circuit: CircuitSpec, profile: LoadProfile,
             dt: Optional[float] = None, plenum: Optional[PlenumState] = None,
             gas_state: Optional[GasCellState] = None, record: bool = True) -> SimulationResult:
    """Fixed-step transient simulation of a load profile."""
    return Simulation(cell, gas_spec, circuit, profile, dt, plenum, gas_state, record).run()


def duty_row(cell_df: FuelCellModel, cell_pcb: FuelCellModel, gas_spec: GalvanicCellSpec, circuit: CircuitSpec,
             pulse_power: float, pulse_width: float, duty: float, base_interval: float) -> Dict[str, float]:
    """One duty-cycle entry: period = base_interval / duty, one pulse per period."""
    if not 0 < duty <= 1:
        raise ValidationError(f"Duty must lie in (0, 1], got {duty}")
    period = base_interval / duty
    profile = LoadProfile.pulsed(pulse_power, pulse_width, period)
    df = simulate(cell_df, gas_spec, circuit, profile, record=False).summary
    pcb = simulate(cell_pcb, gas_spec, circuit, profile, record=False).summary
    return {
        'duty': duty,
        'interval_s': period,
        'mean_power_mW': from_si(df.mean_power, 'mW'),
        'eta_DF': df.eta_system,
        'eta_PCB': pcb.eta_system,
    }


def duty_cycle_table(cell_df: FuelCellModel, cell_pcb: FuelCellModel, circuit: CircuitSpec,
                     pulse_power: float = to_si(PULSE_POWER_MW, 'mW'),
                     pulse_width: float = to_si(PULSE_WIDTH_MS, 'ms'),
                     duty_list: Sequence[float] = (0.1, 0.01, 0.001),
                     gas_spec: Optional[GalvanicCellSpec] = None,
                     base_interval: float = to_si(DUTY_BASE_INTERVAL_MS, 'ms')) -> pd.DataFrame:
    """Hydrogen-referenced efficiency of both cells under pulsed load at several duties."""
    gas = gas_spec if gas_spec is not None else GalvanicCellSpec()
    rows = [duty_row(cell_df, cell_pcb, gas, circuit, pulse_power, pulse_width, float(duty), base_interval)
            for duty in duty_list]
    if not rows:
        raise ValidationError("Duty list is empty")
    return pd.DataFrame(rows, columns=['duty', 'interval_s', 'mean_power_mW', 'eta_DF', 'eta_PCB'])


def energy_row(cell: FuelCellModel, gas_spec: GalvanicCellSpec, circuit: CircuitSpec,
               current: float) -> Dict[str, float]:
    """Energy from one full gas-cell discharge at a constant load current.

    The gas cell runs at i + I_leak: the surplus a leak-compensating R_L draws
    to replace the hydrogen lost through the membrane. That resistor stands in
    for whatever R_L the circuit carries, so the row does not depend on it.
    """
    if not current > 0:
        raise ValidationError(f"Load current must be positive, got {current}")
    series = replace(circuit, bypass_resistor=None)
    point = solve_operating_point(cell, gas_spec, series, LoadSegment(1.0, 'current', current),
                                  PlenumState.full(series))
    if point.diode_conducting:
        raise InfeasibleError(
            f"Fuel cell cannot carry {from_si(current, 'mA'):.4g} mA: at or beyond its limiting current "
            f"{from_si(cell.limiting_current, 'mA'):.4g} mA, or no positive terminal voltage")
    i_gc = current + cell.leak_current
    v_gc = terminal_voltage(gas_spec, i_gc)
    capacity = gas_spec.capacity
    duration = capacity / i_gc if capacity > 0 else 0.0
    energy_full = (point.v_fc + v_gc) * current * duration
    energy_fc = point.v_fc * current * duration
    reference = capacity * (CONSTANTS.reference_voltage + v_gc)
    return {
        'current_mA': from_si(current, 'mA'),
        'duration_s': duration,
        'energy_full_system_J': energy_full,
        'energy_fc_only_J': energy_fc,
        'eta_system': energy_full / reference if capacity > 0 else 0.0,
    }


def obtainable_energy(cell: FuelCellModel, gas_spec: GalvanicCellSpec, circuit: CircuitSpec,
                      current_list: Sequence[float]) -> pd.DataFrame:
    """Energy per gas-cell charge against load current, with and without the gas-cell voltage."""
    rows = [energy_row(cell, gas_spec, circuit, float(current)) for current in current_list]
    if not rows:
        raise ValidationError("Current list is empty")
    return pd.DataFrame(rows, columns=['current_mA', 'duration_s', 'energy_full_system_J', 'energy_fc_only_J',
                                       'eta_system'])


@cython.cclass
class SystemService(BaseService):
    """Service running transient, duty-cycle and obtainable-energy studies."""

    def __init__(self):
        """Initialize the system service."""
        super().__init__()

    def simulation_study(self, cell: FuelCellModel, gas_spec: GalvanicCellSpec, circuit: CircuitSpec,
                         profile: LoadProfile, dt: Optional[float] = None,
                         plenum: Optional[PlenumState] = None) -> SimulationResult:
        """Simulate and queue timeseries.csv, summary.txt and summary.json."""
        try:
            result = simulate(cell, gas_spec, circuit, profile, dt, plenum)
            self._export('timeseries.csv', result.timeseries)
            self._export('summary.txt', result.summary.render())
            self._export('summary.json', result.summary.to_json())
            logger.info(f"Simulated {result.summary.duration:.6g} s, eta_system {result.summary.eta_system:.4f}")
            return result
        except Exception as e:
            logger.error(f"Failed to simulate load profile: {str(e)}")
            raise

    def duty_study(self, cell_df: FuelCellModel, cell_pcb: FuelCellModel, circuit: CircuitSpec,
                   pulse_power: float, pulse_width: float, duty_list: Sequence[float],
                   gas_spec: Optional[GalvanicCellSpec] = None,
                   base_interval: float = to_si(DUTY_BASE_INTERVAL_MS, 'ms')) -> pd.DataFrame:
        """Duty-cycle table, queued as duty_cycle.csv."""
        try:
            table = duty_cycle_table(cell_df, cell_pcb, circuit, pulse_power, pulse_width, duty_list, gas_spec,
                                     base_interval)
            self._export('duty_cycle.csv', table)
            logger.info(f"Duty-cycle table for {len(table)} duties")
            return table
        except Exception as e:
            logger.error(f"Failed to build duty-cycle table: {str(e)}")
            raise

    def energy_study(self, cell: FuelCellModel, gas_spec: GalvanicCellSpec, circuit: CircuitSpec,
                     current_list: Sequence[float]) -> pd.DataFrame:
        """Obtainable-energy table, queued as obtainable_energy.csv."""
        try:
            table = obtainable_energy(cell, gas_spec, circuit, current_list)
            self._export('obtainable_energy.csv', table)
            logger.info(f"Obtainable energy for {len(table)} load currents")
            return table
        except Exception as e:
            logger.error(f"Failed to compute obtainable energy: {str(e)}")
            raise
