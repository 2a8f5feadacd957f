"""Shared domain types, physical constants and unit conventions.

Everything inside the toolkit is SI (ohm*m^2 for area resistance, A/m^2 for
current density, mol, s, V, J). Practical units (cm^2, um, mA/cm^2,
mOhm*cm^2, mW/cm^2, mAh) only appear at the boundary: config files, CSV
columns and reports. ``to_si`` and ``from_si`` are the only conversion path.
"""

import logging
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from config import (
    UNIT_FACTORS,
    FARADAY_CONSTANT,
    ELECTRONS_PER_H2,
    REFERENCE_VOLTAGE,
    GAS_CONSTANT,
    STANDARD_TEMPERATURE,
    STANDARD_PRESSURE,
    CATALYST_LAYER,
    GDL_LAYER,
    CONTACT_RESISTIVITY_MOHM_CM2,
    COLLECTOR_MATERIALS,
    CELL_PRESETS,
    DEFAULT_INTERCELL_GAP_UM,
)
from errors import ValidationError

logger = logging.getLogger('MicroCell.Models')

MATERIAL_TAGS = ('gold-film', 'copper-pcb', 'steel-mesh', 'custom')


def to_si(value, unit: str):
    """Convert a practical-unit value (scalar or array) to SI."""
    try:
        factor = UNIT_FACTORS[unit]
    except KeyError:
        raise ValidationError(f"Unknown unit: {unit}")
    if isinstance(value, (list, tuple, np.ndarray)):
        return np.asarray(value, dtype=float) * factor
    return float(value) * factor


def from_si(value, unit: str):
    """Convert an SI value (scalar or array) to a practical unit."""
    try:
        factor = UNIT_FACTORS[unit]
    except KeyError:
        raise ValidationError(f"Unknown unit: {unit}")
    if isinstance(value, (list, tuple, np.ndarray)):
        return np.asarray(value, dtype=float) / factor
    return float(value) / factor


@dataclass(frozen=True)
class PhysicalConstants:
    """Immutable set of physical constants."""

    faraday_constant: float = FARADAY_CONSTANT
    electrons_per_h2: int = ELECTRONS_PER_H2
    reference_voltage: float = REFERENCE_VOLTAGE
    gas_constant: float = GAS_CONSTANT
    standard_temperature: float = STANDARD_TEMPERATURE
    standard_pressure: float = STANDARD_PRESSURE

    @property
    def charge_per_mole_h2(self) -> float:
        """Charge carried per mole of hydrogen (C/mol)."""
        return self.electrons_per_h2 * self.faraday_constant


CONSTANTS = PhysicalConstants()


@dataclass(frozen=True)
class CellGeometry:
    """Planar cell dimensions, SI."""

    active_area: float
    pitch: float
    channel_width: float
    finger_length: float
    has_gdl: bool = False
    n_cells: int = 1
    intercell_gap: float = to_si(DEFAULT_INTERCELL_GAP_UM, 'um')

    def __post_init__(self):
        if not self.active_area > 0:
            raise ValidationError(f"active_area must be positive, got {self.active_area}")
        if not self.pitch > 0:
            raise ValidationError(f"pitch must be positive, got {self.pitch}")
        if not 0 < self.channel_width < self.pitch:
            raise ValidationError(
                f"channel_width must lie in (0, pitch), got {self.channel_width} for pitch {self.pitch}")
        if not self.finger_length > 0:
            raise ValidationError(f"finger_length must be positive, got {self.finger_length}")
        if int(self.n_cells) != self.n_cells or self.n_cells < 1:
            raise ValidationError(f"n_cells must be a positive integer, got {self.n_cells}")
        if self.intercell_gap < 0:
            raise ValidationError(f"intercell_gap must be non-negative, got {self.intercell_gap}")

    @property
    def opening_ratio(self) -> float:
        return self.channel_width / self.pitch

    @property
    def rib_width(self) -> float:
        return self.pitch - self.channel_width

    def with_pitch(self, pitch: float, opening_ratio: Optional[float] = None) -> 'CellGeometry':
        """Same cell at another pitch, keeping (or setting) the opening ratio."""
        ratio = self.opening_ratio if opening_ratio is None else opening_ratio
        if not 0 < ratio < 1:
            raise ValidationError(f"opening_ratio must lie in (0, 1), got {ratio}")
        return replace(self, pitch=pitch, channel_width=ratio * pitch)

    @classmethod
    def from_practical(cls, active_area_cm2: float, pitch_um: float, channel_width_um: float,
                       finger_length_cm: float, has_gdl: bool = False, n_cells: int = 1,
                       intercell_gap_um: float = DEFAULT_INTERCELL_GAP_UM) -> 'CellGeometry':
        return cls(
            active_area=to_si(active_area_cm2, 'cm2'),
            pitch=to_si(pitch_um, 'um'),
            channel_width=to_si(channel_width_um, 'um'),
            finger_length=to_si(finger_length_cm, 'cm'),
            has_gdl=bool(has_gdl),
            n_cells=int(n_cells),
            intercell_gap=to_si(intercell_gap_um, 'um'),
        )

    def to_practical(self) -> Dict[str, object]:
        return {
            'active_area_cm2': from_si(self.active_area, 'cm2'),
            'pitch_um': from_si(self.pitch, 'um'),
            'channel_width_um': from_si(self.channel_width, 'um'),
            'finger_length_cm': from_si(self.finger_length, 'cm'),
            'has_gdl': self.has_gdl,
            'n_cells': self.n_cells,
            'intercell_gap_um': from_si(self.intercell_gap, 'um'),
        }


@dataclass(frozen=True)
class LayerSpec:
    """One conducting electrode layer. Resistivities in ohm*m, thickness in m."""

    in_plane_resistivity: float
    through_plane_resistivity: float
    thickness: float
    name: str = 'layer'

    def __post_init__(self):
        if self.in_plane_resistivity < 0 or self.through_plane_resistivity < 0:
            raise ValidationError(f"Layer {self.name}: resistivities must be non-negative")
        if not self.thickness > 0:
            raise ValidationError(f"Layer {self.name}: thickness must be positive, got {self.thickness}")

    @property
    def sheet_conductance(self) -> float:
        """Lateral conductance t/rho (S); infinite for an ideal conductor."""
        if self.in_plane_resistivity == 0:
            return float('inf')
        return self.thickness / self.in_plane_resistivity

    @classmethod
    def from_practical(cls, in_plane_resistivity_mohm_cm: float, through_plane_resistivity_mohm_cm: float,
                       thickness_um: float, name: str = 'layer') -> 'LayerSpec':
        return cls(
            in_plane_resistivity=to_si(in_plane_resistivity_mohm_cm, 'mohm*cm'),
            through_plane_resistivity=to_si(through_plane_resistivity_mohm_cm, 'mohm*cm'),
            thickness=to_si(thickness_um, 'um'),
            name=name,
        )

    def to_practical(self) -> Dict[str, object]:
        return {
            'name': self.name,
            'in_plane_resistivity_mohm_cm': from_si(self.in_plane_resistivity, 'mohm*cm'),
            'through_plane_resistivity_mohm_cm': from_si(self.through_plane_resistivity, 'mohm*cm'),
            'thickness_um': from_si(self.thickness, 'um'),
        }


@dataclass(frozen=True)
class CollectorSpec:
    """Metal current collector. Rib width is derived from the geometry (p - w)."""

    metal_resistivity: float
    metal_thickness: float
    contact_resistivity: float
    material_tag: str = 'custom'
    max_length_hint: float = 0.05

    def __post_init__(self):
        if self.metal_resistivity < 0 or self.contact_resistivity < 0:
            raise ValidationError("Collector resistivities must be non-negative")
        if not self.metal_thickness > 0:
            raise ValidationError(f"metal_thickness must be positive, got {self.metal_thickness}")
        if self.material_tag not in MATERIAL_TAGS:
            raise ValidationError(f"Unknown collector material: {self.material_tag}")
        if not self.max_length_hint > 0:
            raise ValidationError(f"max_length_hint must be positive, got {self.max_length_hint}")

    @staticmethod
    def rib_width(geometry: CellGeometry) -> float:
        return geometry.rib_width

    @classmethod
    def from_practical(cls, metal_resistivity_uohm_cm: float, metal_thickness_um: float,
                       contact_resistivity_mohm_cm2: float = CONTACT_RESISTIVITY_MOHM_CM2,
                       material_tag: str = 'custom', max_length_hint_cm: float = 5.0) -> 'CollectorSpec':
        return cls(
            metal_resistivity=to_si(metal_resistivity_uohm_cm, 'uohm*cm'),
            metal_thickness=to_si(metal_thickness_um, 'um'),
            contact_resistivity=to_si(contact_resistivity_mohm_cm2, 'mohm*cm2'),
            material_tag=material_tag,
            max_length_hint=to_si(max_length_hint_cm, 'cm'),
        )

    @classmethod
    def for_material(cls, material_tag: str) -> 'CollectorSpec':
        """Collector with the stock values of a known material."""
        try:
            material = COLLECTOR_MATERIALS[material_tag]
        except KeyError:
            raise ValidationError(f"No stock values for collector material: {material_tag}")
        return cls.from_practical(material_tag=material_tag, **material)

    def to_practical(self) -> Dict[str, object]:
        return {
            'metal_resistivity_uohm_cm': from_si(self.metal_resistivity, 'uohm*cm'),
            'metal_thickness_um': from_si(self.metal_thickness, 'um'),
            'contact_resistivity_mohm_cm2': from_si(self.contact_resistivity, 'mohm*cm2'),
            'material_tag': self.material_tag,
            'max_length_hint_cm': from_si(self.max_length_hint, 'cm'),
        }


@dataclass(frozen=True)
class CellPreset:
    """A named cell: geometry plus the electrode stack and collector of each side."""

    name: str
    geometry: CellGeometry
    cathode_layers: Tuple[LayerSpec, ...]
    anode_layers: Tuple[LayerSpec, ...]
    cathode_collector: CollectorSpec
    anode_collector: CollectorSpec

    def __post_init__(self):
        if not self.cathode_layers or not self.anode_layers:
            raise ValidationError(f"Preset {self.name}: each side needs at least one layer")

    def with_geometry(self, geometry: CellGeometry) -> 'CellPreset':
        return replace(self, geometry=geometry)


def table_layers(has_gdl: bool) -> Tuple[LayerSpec, ...]:
    """Electrode stack built from the tabulated catalyst and GDL values."""
    layers = [LayerSpec.from_practical(**CATALYST_LAYER)]
    if has_gdl:
        layers.append(LayerSpec.from_practical(**GDL_LAYER))
    return tuple(layers)


def _build_preset(name: str) -> CellPreset:
    values = dict(CELL_PRESETS[name])
    material = values.pop('collector')
    geometry = CellGeometry.from_practical(**values)
    layers = table_layers(geometry.has_gdl)
    collector = CollectorSpec.for_material(material)
    return CellPreset(
        name=name,
        geometry=geometry,
        cathode_layers=layers,
        anode_layers=layers,
        cathode_collector=collector,
        anode_collector=collector,
    )


def builtin_cell_presets() -> List[CellPreset]:
    """The three investigated cell types: DF, PCB and PG."""
    return [_build_preset(name) for name in ('DF', 'PCB', 'PG')]


def get_preset(name: str) -> CellPreset:
    """Look up a built-in preset by name (case-insensitive)."""
    key = str(name).upper()
    if key not in CELL_PRESETS:
        raise ValidationError(f"Unknown cell preset: {name}")
    return _build_preset(key)
