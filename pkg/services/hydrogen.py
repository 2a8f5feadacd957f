"""Galvanic Zn/H2O hydrogen generator: Faraday coupling, terminal voltage, capacity."""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from config import (
    GAS_CELL_OPEN_CIRCUIT_VOLTAGE,
    GAS_CELL_INTERNAL_RESISTANCE,
    GAS_CELL_VOLTAGE_FLOOR,
    GAS_CELL_VOLTAGE_CEILING,
    GAS_CELL_CAPACITY_MAH,
    GAS_CELL_VOLUME_CM3,
)
from errors import ValidationError
from models import CONSTANTS, from_si, to_si

logger = logging.getLogger('MicroCell.Hydrogen')


@dataclass(frozen=True)
class GalvanicCellSpec:
    """Electrical model of the hydrogen-evolving cell, SI (V, ohm, C, m^3)."""

    open_circuit_voltage: float = GAS_CELL_OPEN_CIRCUIT_VOLTAGE
    internal_resistance: float = GAS_CELL_INTERNAL_RESISTANCE
    voltage_floor: float = GAS_CELL_VOLTAGE_FLOOR
    voltage_ceiling: float = GAS_CELL_VOLTAGE_CEILING
    capacity: float = to_si(GAS_CELL_CAPACITY_MAH, 'mAh')
    volume: float = to_si(GAS_CELL_VOLUME_CM3, 'cm3')

    def __post_init__(self):
        if not 0.0 <= self.voltage_floor <= self.voltage_ceiling <= GAS_CELL_VOLTAGE_CEILING:
            raise ValidationError(
                f"Gas cell voltage bounds must satisfy 0 <= floor <= ceiling <= {GAS_CELL_VOLTAGE_CEILING}")
        if not self.voltage_floor <= self.open_circuit_voltage <= self.voltage_ceiling:
            raise ValidationError(f"Gas cell open-circuit voltage {self.open_circuit_voltage} outside its bounds")
        if self.internal_resistance < 0:
            raise ValidationError("Gas cell internal resistance must be non-negative")
        if self.capacity < 0:
            raise ValidationError("Gas cell capacity must be non-negative")
        if self.volume < 0:
            raise ValidationError("Gas cell volume must be non-negative")

    @classmethod
    def bench_supply(cls) -> 'GalvanicCellSpec':
        """Metered hydrogen supply: no terminal voltage, no capacity limit."""
        return cls(open_circuit_voltage=0.0, internal_resistance=0.0, capacity=math.inf)

    @classmethod
    def from_practical(cls, values: Dict[str, float]) -> 'GalvanicCellSpec':
        known = {
            'open_circuit_voltage_V': ('open_circuit_voltage', 'V'),
            'internal_resistance_ohm': ('internal_resistance', 'ohm'),
            'voltage_floor_V': ('voltage_floor', 'V'),
            'voltage_ceiling_V': ('voltage_ceiling', 'V'),
            'capacity_mAh': ('capacity', 'mAh'),
            'volume_cm3': ('volume', 'cm3'),
        }
        unknown = set(values) - set(known)
        if unknown:
            raise ValidationError(f"Unknown gas cell fields: {sorted(unknown)}")
        return cls(**{known[key][0]: to_si(value, known[key][1]) for key, value in values.items()})

    def to_practical(self) -> Dict[str, float]:
        return {
            'open_circuit_voltage_V': self.open_circuit_voltage,
            'internal_resistance_ohm': self.internal_resistance,
            'voltage_floor_V': self.voltage_floor,
            'voltage_ceiling_V': self.voltage_ceiling,
            'capacity_mAh': from_si(self.capacity, 'mAh'),
            'volume_cm3': from_si(self.volume, 'cm3'),
        }


@dataclass
class GasCellState:
    """Charge drawn from one gas cell; owned by a single simulation."""

    charge_drawn: float = 0.0

    @property
    def hydrogen_generated(self) -> float:
        return self.charge_drawn / CONSTANTS.charge_per_mole_h2

    def remaining_charge(self, spec: GalvanicCellSpec) -> float:
        return max(spec.capacity - self.charge_drawn, 0.0)

    def draw(self, current: float, dt: float) -> float:
        """Discharge at current for dt; returns the hydrogen generated (mol)."""
        if current < 0:
            raise ValidationError("Gas cell current must be non-negative")
        if dt < 0:
            raise ValidationError("Time step must be non-negative")
        charge = current * dt
        self.charge_drawn += charge
        return charge / CONSTANTS.charge_per_mole_h2


def h2_rate(current: float) -> float:
    """Hydrogen evolution rate (mol/s) for a gas-cell current (A)."""
    if current < 0:
        raise ValidationError(f"Gas cell current must be non-negative, got {current}")
    return current / CONSTANTS.charge_per_mole_h2


def terminal_voltage(spec: GalvanicCellSpec, current: float) -> float:
    """Linear internal-resistance drop, clamped to the cell's voltage bounds."""
    if current < 0:
        raise ValidationError(f"Gas cell current must be non-negative, got {current}")
    v = spec.open_circuit_voltage - spec.internal_resistance * current
    return float(min(max(v, spec.voltage_floor), spec.voltage_ceiling))


def total_h2_capacity(spec: GalvanicCellSpec) -> float:
    """Hydrogen (mol) the cell can produce from its full capacity."""
    return spec.capacity / CONSTANTS.charge_per_mole_h2


def h2_volume(moles, temperature: float = CONSTANTS.standard_temperature,
              pressure: float = CONSTANTS.standard_pressure):
    """Ideal-gas volume (m^3) of an amount of hydrogen."""
    volume = np.asarray(moles, dtype=float) * CONSTANTS.gas_constant * temperature / pressure
    return float(volume) if volume.ndim == 0 else volume


def gas_cell_response(spec: GalvanicCellSpec, load_current, bypass_resistor) -> Tuple[np.ndarray, np.ndarray]:
    """Terminal voltage and bypass current for the series loop current(s).

    The gas cell carries the load current plus the bypass current v/R_L, so
    v = (V_oc - R_gc i_load) / (1 + R_gc / R_L) before clamping.
    """
    i_load = np.asarray(load_current, dtype=float)
    v = spec.open_circuit_voltage - spec.internal_resistance * i_load
    if bypass_resistor is not None:
        v = v / (1.0 + spec.internal_resistance / bypass_resistor)
    v = np.clip(v, spec.voltage_floor, spec.voltage_ceiling)
    i_bypass = v / bypass_resistor if bypass_resistor is not None else np.zeros_like(v)
    return v, i_bypass
