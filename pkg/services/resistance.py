"""Area-normalized electron-transport resistance of a planar cell electrode."""

import cython
import logging
from dataclasses import dataclass
from typing import Dict, Sequence

import numpy as np
import pandas as pd
from scipy.linalg import solve_banded

from config import RESISTANCE_HEADER, MAX_SWEEP_PITCH_UM, LADDER_SLICES
from errors import ValidationError
from models import CellGeometry, CellPreset, CollectorSpec, LayerSpec, from_si, to_si
from .base import BaseService

logger = logging.getLogger('MicroCell.ResistanceService')

SIDES = ('anode', 'cathode', 'both')


@dataclass(frozen=True)
class ResistanceBreakdown:
    """The four series terms and their total, in ohm*m^2."""

    r_in_plane: float
    r_through_plane: float
    r_contact: float
    r_metal: float
    side: str = 'cathode'

    def __post_init__(self):
        if self.side not in SIDES:
            raise ValidationError(f"Unknown electrode side: {self.side}")
        for value in (self.r_in_plane, self.r_through_plane, self.r_contact, self.r_metal):
            if value < 0:
                raise ValidationError(f"Resistance components must be non-negative, got {value}")

    @property
    def r_total(self) -> float:
        return self.r_in_plane + self.r_through_plane + self.r_contact + self.r_metal

    def __add__(self, other: 'ResistanceBreakdown') -> 'ResistanceBreakdown':
        return ResistanceBreakdown(
            r_in_plane=self.r_in_plane + other.r_in_plane,
            r_through_plane=self.r_through_plane + other.r_through_plane,
            r_contact=self.r_contact + other.r_contact,
            r_metal=self.r_metal + other.r_metal,
            side='both',
        )

    def as_practical(self) -> Dict[str, float]:
        """Components in mOhm*cm^2, keyed like the sweep CSV columns."""
        return {
            'R_i': from_si(self.r_in_plane, 'mohm*cm2'),
            'R_t': from_si(self.r_through_plane, 'mohm*cm2'),
            'R_c': from_si(self.r_contact, 'mohm*cm2'),
            'R_m': from_si(self.r_metal, 'mohm*cm2'),
            'R_s': from_si(self.r_total, 'mohm*cm2'),
        }


def _check_layers(layers: Sequence[LayerSpec]) -> None:
    if not layers:
        raise ValidationError("At least one electrode layer is required")


def sheet_resistance(layers: Sequence[LayerSpec]) -> float:
    """Lateral sheet resistance (ohm) of the layers conducting in parallel."""
    _check_layers(layers)
    conductance = sum(layer.sheet_conductance for layer in layers)
    if np.isinf(conductance):
        return 0.0
    return 1.0 / conductance


def in_plane_resistance(geometry: CellGeometry, layers: Sequence[LayerSpec]) -> float:
    """Lateral term: current generated over the channel flows sideways to the ribs.

    R_i = R_sheet * w^3 / (12 p), with R_sheet the parallel sheet resistance of
    all layers in the stack.
    """
    w = geometry.channel_width
    p = geometry.pitch
    return sheet_resistance(layers) * w ** 3 / (12.0 * p)


def through_plane_resistance(geometry: CellGeometry, layers: Sequence[LayerSpec]) -> float:
    """Vertical term, concentrated over the rib fraction (1 - phi)."""
    _check_layers(layers)
    phi = geometry.opening_ratio
    if phi >= 1:
        raise ValidationError(f"Opening ratio must be below 1, got {phi}")
    return sum(layer.through_plane_resistivity * layer.thickness for layer in layers) / (1.0 - phi)


def contact_resistance(geometry: CellGeometry, collector: CollectorSpec) -> float:
    """Collector/electrode contact term over the rib fraction."""
    phi = geometry.opening_ratio
    if phi >= 1:
        raise ValidationError(f"Opening ratio must be below 1, got {phi}")
    return collector.contact_resistivity / (1.0 - phi)


def metal_resistance(geometry: CellGeometry, collector: CollectorSpec) -> float:
    """Collector finger term: uniform collection along L into a bus at one end.

    R_m = rho_m * p * L^2 / (3 (p - w) t_m)
    """
    rib = collector.rib_width(geometry)
    if rib <= 0:
        raise ValidationError("Collector rib width must be positive")
    return (collector.metal_resistivity * geometry.pitch * geometry.finger_length ** 2
            / (3.0 * rib * collector.metal_thickness))


def side_resistance(geometry: CellGeometry, layers: Sequence[LayerSpec], collector: CollectorSpec,
                    side: str = 'cathode') -> ResistanceBreakdown:
    """All four terms for one electrode side."""
    return ResistanceBreakdown(
        r_in_plane=in_plane_resistance(geometry, layers),
        r_through_plane=through_plane_resistance(geometry, layers),
        r_contact=contact_resistance(geometry, collector),
        r_metal=metal_resistance(geometry, collector),
        side=side,
    )


def series_resistance(geometry: CellGeometry, anode_layers: Sequence[LayerSpec],
                      cathode_layers: Sequence[LayerSpec], anode_collector: CollectorSpec,
                      cathode_collector: CollectorSpec) -> ResistanceBreakdown:
    """Anode plus cathode series resistance."""
    anode = side_resistance(geometry, anode_layers, anode_collector, side='anode')
    cathode = side_resistance(geometry, cathode_layers, cathode_collector, side='cathode')
    return anode + cathode


def preset_series_resistance(preset: CellPreset) -> ResistanceBreakdown:
    return series_resistance(preset.geometry, preset.anode_layers, preset.cathode_layers,
                             preset.anode_collector, preset.cathode_collector)


def check_pitch_range(pitches: Sequence[float]) -> np.ndarray:
    """Validate a sweep range in metres: nonempty, strictly increasing, in (0, 10 mm]."""
    grid = np.asarray(pitches, dtype=float)
    if grid.size == 0:
        raise ValidationError("Pitch range is empty")
    if np.any(grid <= 0) or np.any(grid > to_si(MAX_SWEEP_PITCH_UM, 'um')):
        raise ValidationError("Pitches must lie within (0, 10 mm]")
    if np.any(np.diff(grid) <= 0):
        raise ValidationError("Pitch range must be strictly increasing")
    return grid


def pitch_row(preset: CellPreset, pitch: float, opening_ratio: float) -> Dict[str, float]:
    """One cathode-side sweep row at the given pitch."""
    geometry = preset.geometry.with_pitch(pitch, opening_ratio)
    breakdown = side_resistance(geometry, preset.cathode_layers, preset.cathode_collector)
    return {'pitch_um': from_si(pitch, 'um'), **breakdown.as_practical()}


def resistance_sweep(preset: CellPreset, pitches: Sequence[float], opening_ratio: float) -> pd.DataFrame:
    """Cathode-side breakdown over a pitch range (metres) at fixed opening ratio."""
    grid = check_pitch_range(pitches)
    rows = [pitch_row(preset, float(p), opening_ratio) for p in grid]
    return pd.DataFrame(rows, columns=RESISTANCE_HEADER)


def ladder_in_plane_resistance(geometry: CellGeometry, layers: Sequence[LayerSpec],
                               n_slices: int = LADDER_SLICES) -> float:
    """Brute-force lateral term from a discretized resistor ladder.

    Half a channel (w/2, symmetric about its centre) is cut into n_slices.
    Each slice injects an equal share of a unit current density at its
    midpoint node; neighbouring nodes are joined by sheet resistors and the
    outermost node by a half-length resistor to the rib edge, held at 0 V.
    The node voltages come from the tridiagonal KCL system; the dissipation
    sum(I_inj * V) over both halves, divided by the pitch, is the
    area-normalized resistance per unit finger length.
    """
    if n_slices < 1:
        raise ValidationError("Ladder needs at least one slice")
    r_sheet = sheet_resistance(layers)
    if r_sheet == 0:
        return 0.0
    half = geometry.channel_width / 2.0
    dx = half / n_slices
    g = 1.0 / (r_sheet * dx)
    g_edge = 2.0 * g
    injection = np.full(n_slices, dx)

    # banded KCL matrix: row k is g (V_k - V_k-1) + g (V_k - V_k+1) = I_k
    diagonal = np.full(n_slices, 2.0 * g)
    diagonal[0] = g
    diagonal[-1] = g + g_edge
    if n_slices == 1:
        diagonal[0] = g_edge
    bands = np.zeros((3, n_slices))
    bands[0, 1:] = -g
    bands[1] = diagonal
    bands[2, :-1] = -g
    voltage = solve_banded((1, 1), bands, injection)
    dissipation = 2.0 * float(np.dot(injection, voltage))
    return dissipation / geometry.pitch


@cython.cclass
class ResistanceService(BaseService):
    """Service producing the pitch-sweep dataset."""

    def __init__(self):
        """Initialize the resistance service."""
        super().__init__()

    def pitch_study(self, preset: CellPreset, pitches: Sequence[float], opening_ratio: float) -> pd.DataFrame:
        """Run a pitch sweep and queue it as resistance_sweep.csv."""
        try:
            table = resistance_sweep(preset, pitches, opening_ratio)
            self._export('resistance_sweep.csv', table)
            logger.info(f"Resistance sweep for {preset.name}: {len(table)} pitches")
            return table
        except Exception as e:
            logger.error(f"Failed to run resistance sweep: {str(e)}")
            raise
