"""Design checks, pitch optimization, fuel-cell sizing and parameter sweeps."""

import cython
import logging
from dataclasses import dataclass, field
from multiprocessing import Pool
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from config import (
    MAX_SERIES_RESISTANCE_MOHM_CM2,
    MAX_DEPLETION_DISTANCE_NO_GDL_UM,
    MAX_DEPLETION_DISTANCE_GDL_UM,
    COLLECTOR_LENGTH_LIMITS_CM,
    PITCH_GUIDANCE_NO_GDL_UM,
    PITCH_GUIDANCE_GDL_UM,
    IN_PLANE_BUDGET_FRACTION,
    IN_PLANE_DROP_BUDGET_MV,
    DESIGN_CURRENT_DENSITY_NO_GDL_MA_CM2,
    DESIGN_CURRENT_DENSITY_GDL_MA_CM2,
    PITCH_GRID_MIN_UM,
    PITCH_GRID_MAX_UM,
    PITCH_GRID_POINTS,
    SIZING_GRID_POINTS,
    PULSE_POWER_MW,
    PULSE_WIDTH_MS,
    DUTY_BASE_INTERVAL_MS,
    RESISTANCE_HEADER,
)
from errors import InfeasibleError, ValidationError
from models import CellGeometry, CellPreset, CollectorSpec, LayerSpec, from_si, to_si
from .base import BaseService
from .hydrogen import GalvanicCellSpec
from .polarization import FuelCellModel, PolarizationParams, cell_voltage, max_efficiency_point
from .resistance import (
    ResistanceBreakdown,
    check_pitch_range,
    contact_resistance,
    in_plane_resistance,
    metal_resistance,
    pitch_row,
    series_resistance,
    side_resistance,
    through_plane_resistance,
)
from .system import CircuitSpec, duty_row, energy_row

logger = logging.getLogger('MicroCell.DesignService')

SEVERITIES = ('error', 'warning')
SWEEP_VARIABLES = ('pitch', 'opening_ratio', 'r_s', 'i_leak', 'load_current', 'duty')


def _default_length_limits() -> Dict[str, float]:
    return {tag: to_si(length, 'cm') for tag, length in COLLECTOR_LENGTH_LIMITS_CM.items()}


@dataclass(frozen=True)
class DesignConstraints:
    """Design limits, SI. Infinite limits switch a check off."""

    max_series_resistance: float = to_si(MAX_SERIES_RESISTANCE_MOHM_CM2, 'mohm*cm2')
    max_depletion_distance_no_gdl: float = to_si(MAX_DEPLETION_DISTANCE_NO_GDL_UM, 'um')
    max_depletion_distance_gdl: float = to_si(MAX_DEPLETION_DISTANCE_GDL_UM, 'um')
    collector_length_limits: Mapping[str, float] = field(default_factory=_default_length_limits)
    pitch_guidance_no_gdl: float = to_si(PITCH_GUIDANCE_NO_GDL_UM, 'um')
    pitch_guidance_gdl: float = to_si(PITCH_GUIDANCE_GDL_UM, 'um')
    in_plane_budget_fraction: float = IN_PLANE_BUDGET_FRACTION
    in_plane_drop_budget: float = to_si(IN_PLANE_DROP_BUDGET_MV, 'mV')
    design_current_density_no_gdl: float = to_si(DESIGN_CURRENT_DENSITY_NO_GDL_MA_CM2, 'mA/cm2')
    design_current_density_gdl: float = to_si(DESIGN_CURRENT_DENSITY_GDL_MA_CM2, 'mA/cm2')

    def __post_init__(self):
        limits = [self.max_series_resistance, self.max_depletion_distance_no_gdl, self.max_depletion_distance_gdl,
                  self.pitch_guidance_no_gdl, self.pitch_guidance_gdl, self.in_plane_drop_budget,
                  self.design_current_density_no_gdl, self.design_current_density_gdl,
                  *self.collector_length_limits.values()]
        if any(not limit > 0 for limit in limits):
            raise ValidationError("All design limits must be positive")
        if not 0 < self.in_plane_budget_fraction <= 1:
            raise ValidationError("in_plane_budget_fraction must lie in (0, 1]")

    @classmethod
    def from_practical(cls, values: Mapping[str, object]) -> 'DesignConstraints':
        known = {
            'max_series_resistance_mohm_cm2': ('max_series_resistance', 'mohm*cm2'),
            'max_depletion_distance_no_gdl_um': ('max_depletion_distance_no_gdl', 'um'),
            'max_depletion_distance_gdl_um': ('max_depletion_distance_gdl', 'um'),
            'pitch_guidance_no_gdl_um': ('pitch_guidance_no_gdl', 'um'),
            'pitch_guidance_gdl_um': ('pitch_guidance_gdl', 'um'),
            'in_plane_budget_fraction': ('in_plane_budget_fraction', None),
            'in_plane_drop_budget_mV': ('in_plane_drop_budget', 'mV'),
            'design_current_density_no_gdl_mA_cm2': ('design_current_density_no_gdl', 'mA/cm2'),
            'design_current_density_gdl_mA_cm2': ('design_current_density_gdl', 'mA/cm2'),
        }
        kwargs = {}
        for key, value in values.items():
            if key == 'collector_length_limits_cm':
                limits = _default_length_limits()
                limits.update({tag: to_si(length, 'cm') for tag, length in dict(value).items()})
                kwargs['collector_length_limits'] = limits
            elif key in known:
                name, unit = known[key]
                kwargs[name] = to_si(value, unit) if unit else float(value)
            else:
                raise ValidationError(f"Unknown constraint field: {key}")
        return cls(**kwargs)


@dataclass(frozen=True)
class Violation:
    constraint_id: str
    measured_value: float
    limit: float
    severity: str
    unit: str = ''

    def __post_init__(self):
        if self.severity not in SEVERITIES:
            raise ValidationError(f"Unknown severity: {self.severity}")

    def render(self) -> str:
        measured = from_si(self.measured_value, self.unit) if self.unit else self.measured_value
        limit = from_si(self.limit, self.unit) if self.unit else self.limit
        suffix = f" {self.unit}" if self.unit else ''
        return f"{self.severity.upper()} {self.constraint_id} {measured:.6g} {limit:.6g}{suffix}"


@dataclass(frozen=True)
class DesignReport:
    violations: Tuple[Violation, ...] = ()

    @property
    def pass_flag(self) -> bool:
        return not any(v.severity == 'error' for v in self.violations)

    def render(self) -> str:
        lines = [v.render() for v in self.violations]
        lines.append(f"PASS {str(self.pass_flag).lower()}")
        return '\n'.join(lines) + '\n'


def check_design(geometry: CellGeometry, anode_layers: Sequence[LayerSpec], cathode_layers: Sequence[LayerSpec],
                 anode_collector: CollectorSpec, cathode_collector: CollectorSpec,
                 constraints: Optional[DesignConstraints] = None) -> DesignReport:
    """Evaluate the resistance budget, oxygen depletion, finger lengths and pitch guidance."""
    limits = constraints or DesignConstraints()
    violations: List[Violation] = []

    r_s = series_resistance(geometry, anode_layers, cathode_layers, anode_collector, cathode_collector).r_total
    if r_s > limits.max_series_resistance:
        violations.append(Violation('series_resistance', r_s, limits.max_series_resistance, 'error', 'mohm*cm2'))

    half_rib = geometry.rib_width / 2.0
    depletion = limits.max_depletion_distance_gdl if geometry.has_gdl else limits.max_depletion_distance_no_gdl
    if half_rib > depletion:
        violations.append(Violation('oxygen_depletion', half_rib, depletion, 'error', 'um'))

    for side, collector in (('anode', anode_collector), ('cathode', cathode_collector)):
        length_limit = limits.collector_length_limits.get(collector.material_tag, collector.max_length_hint)
        if geometry.finger_length > length_limit:
            violations.append(Violation(f"{side}_collector_length", geometry.finger_length, length_limit,
                                        'error', 'cm'))

    guidance = limits.pitch_guidance_gdl if geometry.has_gdl else limits.pitch_guidance_no_gdl
    if geometry.pitch > guidance:
        violations.append(Violation('pitch_guidance', geometry.pitch, guidance, 'warning', 'um'))

    return DesignReport(violations=tuple(violations))


def check_preset(preset: CellPreset, constraints: Optional[DesignConstraints] = None) -> DesignReport:
    return check_design(preset.geometry, preset.anode_layers, preset.cathode_layers,
                        preset.anode_collector, preset.cathode_collector, constraints)


def in_plane_budget(preset: CellPreset, opening_ratio: float, constraints: DesignConstraints) -> float:
    """Share of the cathode series budget available to the lateral term (ohm*m^2)."""
    geometry = preset.geometry.with_pitch(preset.geometry.pitch, opening_ratio)
    fixed = (through_plane_resistance(geometry, preset.cathode_layers)
             + contact_resistance(geometry, preset.cathode_collector)
             + metal_resistance(geometry, preset.cathode_collector))
    remaining = constraints.max_series_resistance - fixed
    if remaining <= 0:
        raise InfeasibleError(
            f"Pitch-independent terms ({from_si(fixed, 'mohm*cm2'):.4g} mOhm*cm2) already exceed the series budget")
    design_current = (constraints.design_current_density_gdl if geometry.has_gdl
                      else constraints.design_current_density_no_gdl)
    return min(constraints.in_plane_budget_fraction * remaining, constraints.in_plane_drop_budget / design_current)


def pitch_grid() -> np.ndarray:
    return np.geomspace(to_si(PITCH_GRID_MIN_UM, 'um'), to_si(PITCH_GRID_MAX_UM, 'um'), PITCH_GRID_POINTS)


def optimize_pitch(preset: CellPreset, opening_ratio: float,
                   constraints: Optional[DesignConstraints] = None) -> Tuple[float, ResistanceBreakdown]:
    """Largest grid pitch whose cathode in-plane term stays within its budget."""
    if not 0 < opening_ratio < 1:
        raise ValidationError(f"Opening ratio must lie in (0, 1), got {opening_ratio}")
    limits = constraints or DesignConstraints()
    budget = in_plane_budget(preset, opening_ratio, limits)
    grid = pitch_grid()
    r_in_plane = np.array([
        in_plane_resistance(preset.geometry.with_pitch(float(p), opening_ratio), preset.cathode_layers)
        for p in grid
    ])
    feasible = np.nonzero(r_in_plane <= budget)[0]
    if feasible.size == 0:
        raise InfeasibleError(
            f"No pitch in [{PITCH_GRID_MIN_UM:g}, {PITCH_GRID_MAX_UM:g}] um keeps the in-plane term under "
            f"{from_si(budget, 'mohm*cm2'):.4g} mOhm*cm2")
    pitch = float(grid[feasible[-1]])
    geometry = preset.geometry.with_pitch(pitch, opening_ratio)
    logger.info(f"Optimal pitch for {preset.name} at opening ratio {opening_ratio:g}: {from_si(pitch, 'um'):.1f} um")
    return pitch, side_resistance(geometry, preset.cathode_layers, preset.cathode_collector)


def size_fuel_cell_area(mean_power: float, params: PolarizationParams, r_s: float = 0.0) -> float:
    """Active area (m^2) that delivers mean_power (W) at the maximum-efficiency power density."""
    if mean_power < 0:
        raise ValidationError(f"Mean power must be non-negative, got {mean_power}")
    if mean_power == 0:
        return 0.0
    _, best = max_efficiency_point(params, r_s, SIZING_GRID_POINTS)
    return mean_power / best.operating_power_density


@dataclass(frozen=True)
class SweepSpec:
    """One-variable sweep over a grid of SI values, plus the context each evaluator needs."""

    variable: str
    grid: Tuple[float, ...]
    preset: Optional[CellPreset] = None
    opening_ratio: float = 0.6
    cell: Optional[FuelCellModel] = None
    reference_cell: Optional[FuelCellModel] = None
    gas_spec: GalvanicCellSpec = field(default_factory=GalvanicCellSpec)
    circuit: CircuitSpec = field(default_factory=CircuitSpec)
    pulse_power: float = to_si(PULSE_POWER_MW, 'mW')
    pulse_width: float = to_si(PULSE_WIDTH_MS, 'ms')
    base_interval: float = to_si(DUTY_BASE_INTERVAL_MS, 'ms')
    workers: int = 1

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ValidationError(f"Unknown sweep variable: {self.variable}")
        object.__setattr__(self, 'grid', tuple(float(x) for x in self.grid))
        if not self.grid:
            raise ValidationError("Sweep grid is empty")
        if self.workers < 1:
            raise ValidationError("workers must be at least 1")
        if self.variable in ('pitch', 'opening_ratio') and self.preset is None:
            raise ValidationError(f"A {self.variable} sweep needs a cell preset")
        if self.variable in ('r_s', 'i_leak', 'load_current', 'duty') and self.cell is None:
            raise ValidationError(f"A {self.variable} sweep needs a cell model")
        if self.variable == 'duty' and self.reference_cell is None:
            raise ValidationError("A duty sweep needs the reference (PCB) cell model")


def _efficiency_row(name: str, value: float, unit: str, params: PolarizationParams, r_s: float) -> Dict[str, float]:
    i_best, best = max_efficiency_point(params, r_s)
    return {
        name: from_si(value, unit),
        'i_mA_cm2': from_si(i_best, 'mA/cm2'),
        'V': float(cell_voltage(params, i_best, r_s)),
        'P_mW_cm2': from_si(best.operating_power_density, 'mW/cm2'),
        'eta': best.total,
    }


def sweep_point(spec: SweepSpec, x: float) -> Dict[str, float]:
    """Evaluate one grid point with the owning module's evaluator."""
    if spec.variable == 'pitch':
        return pitch_row(spec.preset, x, spec.opening_ratio)
    if spec.variable == 'opening_ratio':
        geometry = spec.preset.geometry.with_pitch(spec.preset.geometry.pitch, x)
        breakdown = side_resistance(geometry, spec.preset.cathode_layers, spec.preset.cathode_collector)
        return {'opening_ratio': x, **breakdown.as_practical()}
    if spec.variable == 'r_s':
        return _efficiency_row('r_s_mohm_cm2', x, 'mohm*cm2', spec.cell.params, x)
    if spec.variable == 'i_leak':
        return _efficiency_row('i_leak_mA_cm2', x, 'mA/cm2', spec.cell.params.with_leakage(x), 0.0)
    if spec.variable == 'load_current':
        return energy_row(spec.cell, spec.gas_spec, spec.circuit, x)
    return duty_row(spec.cell, spec.reference_cell, spec.gas_spec, spec.circuit, spec.pulse_power,
                    spec.pulse_width, x, spec.base_interval)


def _evaluate(task: Tuple[SweepSpec, float]) -> Dict[str, float]:
    spec, x = task
    return sweep_point(spec, x)


def parameter_sweep(spec: SweepSpec) -> pd.DataFrame:
    """Run a sweep; rows come back in grid order whatever the worker count."""
    if spec.variable == 'pitch':
        check_pitch_range(spec.grid)
    tasks = [(spec, x) for x in spec.grid]
    if spec.workers > 1 and len(tasks) > 1:
        with Pool(processes=min(spec.workers, len(tasks))) as pool:
            rows = pool.map(_evaluate, tasks)
    else:
        rows = [_evaluate(task) for task in tasks]
    columns = RESISTANCE_HEADER if spec.variable == 'pitch' else list(rows[0].keys())
    return pd.DataFrame(rows, columns=columns)


@cython.cclass
class DesignService(BaseService):
    """Service for design reports, sizing tables and sweeps."""

    def __init__(self):
        """Initialize the design service."""
        super().__init__()

    def check_study(self, preset: CellPreset, constraints: Optional[DesignConstraints] = None) -> DesignReport:
        """Check a design and queue design_report.txt."""
        try:
            report = check_preset(preset, constraints)
            self._export('design_report.txt', report.render())
            logger.info(f"Design check for {preset.name}: {len(report.violations)} findings, "
                        f"pass={report.pass_flag}")
            return report
        except Exception as e:
            logger.error(f"Failed to check design: {str(e)}")
            raise

    def size_study(self, params: PolarizationParams, mean_powers: Sequence[float], r_s: float = 0.0) -> pd.DataFrame:
        """Area for each mean power, queued as fuel_cell_area.csv."""
        try:
            _, best = max_efficiency_point(params, r_s)
            rows = [{
                'mean_power_mW': from_si(power, 'mW'),
                'power_density_mW_cm2': from_si(best.operating_power_density, 'mW/cm2'),
                'eta': best.total,
                'area_mm2': from_si(size_fuel_cell_area(power, params, r_s), 'mm2'),
            } for power in mean_powers]
            table = pd.DataFrame(rows, columns=['mean_power_mW', 'power_density_mW_cm2', 'eta', 'area_mm2'])
            self._export('fuel_cell_area.csv', table)
            return table
        except Exception as e:
            logger.error(f"Failed to size fuel cell: {str(e)}")
            raise

    def sweep_study(self, spec: SweepSpec) -> pd.DataFrame:
        """Generic sweep, queued as sweep_<variable>.csv."""
        try:
            table = parameter_sweep(spec)
            self._export(f"sweep_{spec.variable}.csv", table)
            logger.info(f"Sweep over {spec.variable}: {len(table)} points")
            return table
        except Exception as e:
            logger.error(f"Failed to run {spec.variable} sweep: {str(e)}")
            raise
