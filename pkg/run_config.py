"""Run configuration: JSON loading, overrides and practical-to-SI mapping."""

import copy
import hashlib
import json
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import (
    DF_CALIBRATION_TARGETS,
    PCB_CALIBRATION_TARGETS,
    PULSE_POWER_MW,
    PULSE_WIDTH_MS,
    DUTY_BASE_INTERVAL_MS,
    DUTY_LIST,
)
from errors import ValidationError
from models import CellGeometry, CellPreset, CollectorSpec, LayerSpec, get_preset, table_layers, to_si
from services.design import DesignConstraints, SweepSpec
from services.hydrogen import GalvanicCellSpec
from services.polarization import (
    CalibrationTargets,
    FuelCellModel,
    PolarizationParams,
    calibrate,
    preset_polarization,
)
from services.system import CircuitSpec, LoadProfile, LoadSegment, PlenumState

logger = logging.getLogger('MicroCell.RunConfig')

# load-segment mode -> practical unit of its value
SEGMENT_UNITS = {'current': 'mA', 'power': 'mW', 'resistance': 'ohm', 'open': None}
# sweep variable -> practical unit of its grid values
SWEEP_UNITS = {
    'pitch': 'um',
    'opening_ratio': None,
    'r_s': 'mohm*cm2',
    'i_leak': 'mA/cm2',
    'load_current': 'mA',
    'duty': None,
}
CUSTOM_CELL_NAME = 'custom'


def parse_override(text: str) -> Tuple[List[str], Any]:
    """Split 'a.b.c=value'; the value is read as JSON, else kept as a string."""
    if '=' not in text:
        raise ValidationError(f"Override must look like key=value, got {text!r}")
    key, raw = text.split('=', 1)
    path = [part for part in key.strip().split('.') if part]
    if not path:
        raise ValidationError(f"Override has an empty key: {text!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return path, value


def apply_override(data: Dict[str, Any], text: str) -> None:
    path, value = parse_override(text)
    node = data
    for part in path[:-1]:
        child = node.get(part)
        if child is None:
            child = {}
            node[part] = child
        elif not isinstance(child, dict):
            raise ValidationError(f"Cannot override inside non-object field {part!r}")
        node = child
    node[path[-1]] = value


def _float_list(values: Sequence[Any], unit: Optional[str], name: str) -> List[float]:
    if not isinstance(values, (list, tuple)) or not values:
        raise ValidationError(f"{name} must be a non-empty list")
    try:
        return [to_si(float(v), unit) if unit else float(v) for v in values]
    except (TypeError, ValueError) as e:
        raise ValidationError(f"{name}: {str(e)}")


@dataclass
class RunConfig:
    """A parsed run configuration; `data` keeps the practical-unit JSON tree."""

    data: Dict[str, Any]
    source: str = '<memory>'
    _calibrated: Dict[str, PolarizationParams] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not isinstance(self.data, dict):
            raise ValidationError("Configuration root must be a JSON object")
        has_preset = self.data.get('preset') is not None
        has_geometry = self.data.get('geometry') is not None
        if has_preset == has_geometry:
            raise ValidationError("Configuration needs exactly one of 'preset' or 'geometry'")

    @classmethod
    def load(cls, path: str, overrides: Sequence[str] = ()) -> 'RunConfig':
        """Read a JSON config file and apply --set overrides."""
        try:
            with open(path, 'r') as f:
                data = json.load(f)
        except FileNotFoundError:
            raise ValidationError(f"Config file not found: {path}")
        except json.JSONDecodeError as e:
            raise ValidationError(f"Config file {path} is not valid JSON: {str(e)}")
        for text in overrides:
            apply_override(data, text)
        config = cls(data=data, source=path)
        logger.info(f"Loaded configuration {path} ({config.sha256[:12]})")
        return config

    @property
    def canonical_json(self) -> str:
        return json.dumps(self.data, sort_keys=True, separators=(',', ':'))

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.canonical_json.encode('utf-8')).hexdigest()

    def section(self, name: str) -> Dict[str, Any]:
        value = self.data.get(name) or {}
        if not isinstance(value, dict):
            raise ValidationError(f"Section {name!r} must be a JSON object")
        return value

    @property
    def workers(self) -> int:
        workers = self.data.get('workers', 1)
        if not isinstance(workers, int) or workers < 1:
            raise ValidationError(f"workers must be a positive integer, got {workers!r}")
        return workers

    @property
    def cell_name(self) -> str:
        if self.data.get('preset') is not None:
            return str(self.data['preset']).upper()
        return CUSTOM_CELL_NAME

    # cell construction

    @staticmethod
    def _layers(values: Optional[Sequence[Dict[str, Any]]], has_gdl: bool) -> Tuple[LayerSpec, ...]:
        if values is None:
            return table_layers(has_gdl)
        try:
            return tuple(LayerSpec.from_practical(**layer) for layer in values)
        except TypeError as e:
            raise ValidationError(f"Invalid layer entry: {str(e)}")

    @staticmethod
    def _collector(values: Optional[Dict[str, Any]], side: str) -> CollectorSpec:
        if not values:
            raise ValidationError(f"An explicit geometry needs a {side}_collector")
        if set(values) == {'material_tag'}:
            return CollectorSpec.for_material(values['material_tag'])
        try:
            return CollectorSpec.from_practical(**values)
        except TypeError as e:
            raise ValidationError(f"Invalid {side} collector: {str(e)}")

    def cell_preset(self) -> CellPreset:
        """The configured cell: a built-in preset or an explicit geometry and stack."""
        if self.data.get('preset') is not None:
            return get_preset(self.data['preset'])
        try:
            geometry = CellGeometry.from_practical(**self.data['geometry'])
        except TypeError as e:
            raise ValidationError(f"Invalid geometry: {str(e)}")
        return CellPreset(
            name=CUSTOM_CELL_NAME,
            geometry=geometry,
            cathode_layers=self._layers(self.data.get('cathode_layers'), geometry.has_gdl),
            anode_layers=self._layers(self.data.get('anode_layers'), geometry.has_gdl),
            cathode_collector=self._collector(self.data.get('cathode_collector'), 'cathode'),
            anode_collector=self._collector(self.data.get('anode_collector'), 'anode'),
        )

    def calibration_targets(self) -> CalibrationTargets:
        """Configured anchors, else the stock anchors of the cell type."""
        values = self.data.get('calibration_targets')
        if values is None:
            values = DF_CALIBRATION_TARGETS if self.cell_name == 'DF' else PCB_CALIBRATION_TARGETS
        return CalibrationTargets.from_practical(values)

    def stock_polarization(self) -> PolarizationParams:
        """Explicit parameters if given, else the committed curve of the configured cell."""
        if self.data.get('polarization') is not None:
            return PolarizationParams.from_practical(self.data['polarization'])
        return preset_polarization(self.cell_name if self.cell_name != CUSTOM_CELL_NAME else 'PCB')

    def polarization_params(self, cell_name: Optional[str] = None) -> PolarizationParams:
        """Polarization parameters for the configured cell, or a stock preset by name.

        Explicit parameters win; with only calibration targets the curve is
        fitted on first use.
        """
        if cell_name is not None and cell_name.upper() != self.cell_name:
            return preset_polarization(cell_name)
        stock = self.stock_polarization()
        if self.data.get('polarization') is not None or self.data.get('calibration_targets') is None:
            return stock
        if 'fitted' not in self._calibrated:
            logger.info("No polarization parameters given, calibrating against the configured targets")
            self._calibrated['fitted'] = calibrate(self.calibration_targets(), stock)
        return self._calibrated['fitted']

    @property
    def series_resistance(self) -> float:
        return to_si(float(self.data.get('series_resistance_mohm_cm2', 0.0)), 'mohm*cm2')

    def cell_model(self, cell_name: Optional[str] = None) -> FuelCellModel:
        """Fuel-cell model of the configured cell or of a built-in preset."""
        if cell_name is not None and cell_name.upper() != self.cell_name:
            preset = get_preset(cell_name)
            return FuelCellModel(preset_polarization(preset.name), preset.geometry.active_area, 0.0, preset.name)
        preset = self.cell_preset()
        return FuelCellModel(self.polarization_params(), preset.geometry.active_area, self.series_resistance,
                             preset.name)

    def gas_cell(self) -> GalvanicCellSpec:
        values = self.section('gas_cell')
        if values.get('bench_supply'):
            return GalvanicCellSpec.bench_supply()
        return GalvanicCellSpec.from_practical(values)

    def circuit(self) -> CircuitSpec:
        return CircuitSpec.from_practical(self.section('circuit'))

    def constraints(self) -> DesignConstraints:
        return DesignConstraints.from_practical(self.section('constraints'))

    # study parameters

    def pitch_grid(self) -> Tuple[np.ndarray, float]:
        values = self.section('resistance')
        pitches = values.get('pitches_um')
        if pitches is not None:
            grid = np.asarray(_float_list(pitches, 'um', 'resistance.pitches_um'))
        else:
            start = to_si(float(values.get('pitch_min_um', 50.0)), 'um')
            stop = to_si(float(values.get('pitch_max_um', 5000.0)), 'um')
            points = int(values.get('points', 100))
            if points < 1 or not 0 < start < stop:
                raise ValidationError("resistance: need 0 < pitch_min_um < pitch_max_um and points >= 1")
            grid = np.geomspace(start, stop, points)
        return grid, float(values.get('opening_ratio', 0.6))

    def current_grid(self, params: PolarizationParams, section: str) -> np.ndarray:
        """Current densities from 0 up to (not including) the limiting current."""
        values = self.section(section)
        points = int(values.get('points', 400))
        if points < 2:
            raise ValidationError(f"{section}.points must be at least 2")
        i_max = params.limiting_current_density
        if values.get('i_max_mA_cm2') is not None:
            i_max = min(to_si(float(values['i_max_mA_cm2']), 'mA/cm2'), i_max)
        return np.linspace(0.0, i_max, points, endpoint=False)

    def series_resistance_list(self) -> List[float]:
        values = self.section('polarization_study')
        return _float_list(values.get('r_s_list_mohm_cm2', [0.0, 100.0, 200.0, 400.0]), 'mohm*cm2',
                           'polarization_study.r_s_list_mohm_cm2')

    def efficiency_options(self) -> Dict[str, Any]:
        values = self.section('efficiency')
        return {
            'leak_list': _float_list(values.get('leak_list_mA_cm2', [0.0, 0.25, 0.55, 1.0, 2.0]), 'mA/cm2',
                                     'efficiency.leak_list_mA_cm2'),
            'r_s': to_si(float(values.get('r_s_mohm_cm2', 0.0)), 'mohm*cm2'),
            'shunt_leak_density': to_si(float(values.get('shunt_leak_density_mA_cm2', 0.0)), 'mA/cm2'),
        }

    def load_profile(self) -> LoadProfile:
        values = self.section('simulate')
        segments_raw = values.get('segments')
        if not segments_raw:
            raise ValidationError("simulate.segments must list at least one load segment")
        segments = []
        for raw in segments_raw:
            try:
                mode = raw['mode']
                unit = SEGMENT_UNITS[mode]
                value = float(raw.get('value', 0.0))
                segments.append(LoadSegment(
                    duration=to_si(float(raw['duration_s']), 's'),
                    mode=mode,
                    value=to_si(value, unit) if unit else 0.0,
                ))
            except KeyError as e:
                raise ValidationError(f"Invalid load segment {raw!r}: missing or unknown {str(e)}")
        return LoadProfile(segments=tuple(segments), repeat_count=int(values.get('repeat_count', 1)))

    def simulation_options(self, circuit: CircuitSpec) -> Dict[str, Any]:
        values = self.section('simulate')
        dt = values.get('dt_s')
        start = values.get('start', 'full')
        if start not in ('full', 'empty'):
            raise ValidationError(f"simulate.start must be 'full' or 'empty', got {start!r}")
        return {
            'dt': None if dt is None else to_si(float(dt), 's'),
            'plenum': PlenumState.full(circuit) if start == 'full' else PlenumState.empty(circuit),
        }

    def duty_options(self) -> Dict[str, Any]:
        values = self.section('duty')
        return {
            'reference_cell': str(values.get('reference_cell', 'DF')),
            'comparison_cell': str(values.get('comparison_cell', 'PCB')),
            'pulse_power': to_si(float(values.get('pulse_power_mW', PULSE_POWER_MW)), 'mW'),
            'pulse_width': to_si(float(values.get('pulse_width_ms', PULSE_WIDTH_MS)), 'ms'),
            'duty_list': _float_list(values.get('duties', DUTY_LIST), None, 'duty.duties'),
            'base_interval': to_si(float(values.get('base_interval_ms', DUTY_BASE_INTERVAL_MS)), 'ms'),
        }

    def energy_currents(self) -> List[float]:
        values = self.section('energy')
        return _float_list(values.get('currents_mA', [1.0, 2.0, 5.0, 10.0, 20.0, 50.0]), 'mA', 'energy.currents_mA')

    def size_options(self) -> Dict[str, Any]:
        values = self.section('size')
        return {
            'mean_powers': _float_list(values.get('mean_powers_mW', [0.07, 0.5]), 'mW', 'size.mean_powers_mW'),
            'r_s': to_si(float(values.get('r_s_mohm_cm2', 0.0)), 'mohm*cm2'),
        }

    def sweep_spec(self) -> SweepSpec:
        values = self.section('sweep')
        variable = values.get('variable')
        if variable not in SWEEP_UNITS:
            raise ValidationError(f"sweep.variable must be one of {sorted(SWEEP_UNITS)}, got {variable!r}")
        grid = _float_list(values.get('values'), SWEEP_UNITS[variable], 'sweep.values')
        needs_cell = variable not in ('pitch', 'opening_ratio')
        duty = self.duty_options() if variable == 'duty' else None
        return SweepSpec(
            variable=variable,
            grid=tuple(grid),
            preset=self.cell_preset(),
            opening_ratio=float(values.get('opening_ratio', 0.6)),
            cell=(self.cell_model(duty['reference_cell']) if duty else self.cell_model()) if needs_cell else None,
            reference_cell=self.cell_model(duty['comparison_cell']) if duty else None,
            gas_spec=self.gas_cell(),
            circuit=self.circuit(),
            pulse_power=duty['pulse_power'] if duty else to_si(PULSE_POWER_MW, 'mW'),
            pulse_width=duty['pulse_width'] if duty else to_si(PULSE_WIDTH_MS, 'ms'),
            base_interval=duty['base_interval'] if duty else to_si(DUTY_BASE_INTERVAL_MS, 'ms'),
            workers=self.workers,
        )

    def with_polarization(self, params: PolarizationParams) -> 'RunConfig':
        """Copy of this config with explicit polarization parameters."""
        data = copy.deepcopy(self.data)
        data['polarization'] = params.to_practical()
        return RunConfig(data=data, source=self.source)

    def dumps(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True) + '\n'
