"""Tests for the electrode resistance model."""

import numpy as np
import pytest

from config import RESISTANCE_HEADER
from errors import ValidationError
from models import CellGeometry, CollectorSpec, LayerSpec, from_si, table_layers, to_si
from services.resistance import (
    ResistanceService,
    contact_resistance,
    in_plane_resistance,
    ladder_in_plane_resistance,
    metal_resistance,
    preset_series_resistance,
    resistance_sweep,
    series_resistance,
    sheet_resistance,
    side_resistance,
    through_plane_resistance,
)


def _mohm_cm2(value: float) -> float:
    return from_si(value, 'mohm*cm2')


def test_component_examples():
    """Closed forms evaluated with the tabulated catalyst values."""
    geometry = CellGeometry.from_practical(2.0, 600.0, 360.0, 1.4)
    catalyst = table_layers(False)
    assert _mohm_cm2(in_plane_resistance(geometry, catalyst)) == pytest.approx(23.328, rel=1e-9)
    assert _mohm_cm2(through_plane_resistance(geometry, catalyst)) == pytest.approx(0.9, rel=1e-9)
    assert _mohm_cm2(through_plane_resistance(geometry, table_layers(True))) == pytest.approx(33.4, rel=1e-9)
    collector = CollectorSpec.for_material('copper-pcb')
    assert _mohm_cm2(contact_resistance(geometry, collector)) == pytest.approx(10.0, rel=1e-9)


def test_metal_resistance_example():
    """Test the collector finger term on a worked example."""
    geometry = CellGeometry.from_practical(10.0, 2000.0, 1400.0, 2.0)
    copper = CollectorSpec.from_practical(1.7, 30.0)
    assert _mohm_cm2(metal_resistance(geometry, copper)) == pytest.approx(2.5185, rel=1e-4)


def test_series_resistance_is_sum_of_components(pcb_preset):
    """Test that the total is the sum of the four terms."""
    cathode = side_resistance(pcb_preset.geometry, pcb_preset.cathode_layers, pcb_preset.cathode_collector)
    parts = cathode.r_in_plane + cathode.r_through_plane + cathode.r_contact + cathode.r_metal
    assert cathode.r_total == pytest.approx(parts, rel=1e-12)
    both = preset_series_resistance(pcb_preset)
    assert both.side == 'both'
    assert both.r_total == pytest.approx(2 * cathode.r_total, rel=1e-12)


def test_in_plane_scales_with_pitch_squared():
    """At fixed opening ratio R_i grows as p^2."""
    geometry = CellGeometry.from_practical(1.0, 400.0, 240.0, 1.0)
    layers = table_layers(True)
    base = in_plane_resistance(geometry, layers)
    for factor in (0.5, 2.0, 3.7):
        scaled = in_plane_resistance(geometry.with_pitch(geometry.pitch * factor), layers)
        assert scaled == pytest.approx(base * factor ** 2, rel=1e-12)


def test_metal_scales_with_length_squared():
    """Test that the finger term grows with length squared."""
    geometry = CellGeometry.from_practical(1.0, 400.0, 240.0, 1.0)
    gold = CollectorSpec.for_material('gold-film')
    base = metal_resistance(geometry, gold)
    longer = CellGeometry.from_practical(1.0, 400.0, 240.0, 3.0)
    assert metal_resistance(longer, gold) == pytest.approx(9.0 * base, rel=1e-12)


def test_gdl_lowers_sheet_resistance():
    """Test that a diffusion layer lowers the sheet resistance."""
    assert sheet_resistance(table_layers(True)) < sheet_resistance(table_layers(False))


def test_ideal_conductors_give_zero():
    """Test that ideal conductors give zero resistance."""
    geometry = CellGeometry.from_practical(1.0, 400.0, 240.0, 1.0)
    ideal_layers = (LayerSpec(0.0, 0.0, 1e-5),)
    ideal_collector = CollectorSpec(0.0, 1e-6, 0.0)
    breakdown = side_resistance(geometry, ideal_layers, ideal_collector)
    assert breakdown.r_total == 0.0


def test_empty_layer_stack_rejected():
    """Test rejection of an empty layer stack."""
    geometry = CellGeometry.from_practical(1.0, 400.0, 240.0, 1.0)
    with pytest.raises(ValidationError):
        in_plane_resistance(geometry, ())


@pytest.mark.parametrize('name', ['DF', 'PCB', 'PG'])
def test_ladder_oracle_matches_closed_form(name):
    """A 2000-slice discretized ladder agrees with the closed form within 1 %."""
    from models import get_preset
    preset = get_preset(name)
    closed = in_plane_resistance(preset.geometry, preset.cathode_layers)
    ladder = ladder_in_plane_resistance(preset.geometry, preset.cathode_layers)
    assert ladder == pytest.approx(closed, rel=0.01)


def test_single_slice_ladder_by_hand():
    """Test one slice: a single node half a slice from the rib edge gives R_sheet w^3 / (8 p)."""
    geometry = CellGeometry.from_practical(1.0, 400.0, 240.0, 1.0)
    layers = table_layers(False)
    expected = sheet_resistance(layers) * geometry.channel_width ** 3 / (8.0 * geometry.pitch)
    assert ladder_in_plane_resistance(geometry, layers, n_slices=1) == pytest.approx(expected, rel=1e-9)


def test_ladder_converges_with_refinement(pcb_preset):
    """Test that the ladder error against the closed form shrinks as slices are added."""
    closed = in_plane_resistance(pcb_preset.geometry, pcb_preset.cathode_layers)
    errors = [abs(ladder_in_plane_resistance(pcb_preset.geometry, pcb_preset.cathode_layers, n) - closed)
              for n in (4, 16, 64, 256)]
    assert all(later < earlier for earlier, later in zip(errors, errors[1:]))
    with pytest.raises(ValidationError):
        ladder_in_plane_resistance(pcb_preset.geometry, pcb_preset.cathode_layers, n_slices=0)


def test_in_plane_increases_with_channel_width():
    """Test R_i strictly increasing in channel width at fixed pitch."""
    layers = table_layers(False)
    values = [in_plane_resistance(CellGeometry.from_practical(1.0, 600.0, w, 1.0), layers)
              for w in (60.0, 180.0, 300.0, 420.0, 540.0)]
    assert np.all(np.diff(values) > 0)


def test_contact_increases_with_opening_ratio():
    """Test R_c strictly increasing in the opening ratio at fixed pitch."""
    collector = CollectorSpec.for_material('copper-pcb')
    values = [contact_resistance(CellGeometry.from_practical(1.0, 600.0, w, 1.0), collector)
              for w in (60.0, 180.0, 300.0, 420.0, 540.0)]
    assert np.all(np.diff(values) > 0)


def test_resistance_sweep(pcb_preset):
    """Test the pitch sweep table."""
    pitches = to_si(np.array([100.0, 200.0, 400.0, 800.0]), 'um')
    table = resistance_sweep(pcb_preset, pitches, 0.6)
    assert list(table.columns) == RESISTANCE_HEADER
    assert np.all(np.diff(table['R_i']) > 0)
    np.testing.assert_allclose(table['R_s'], table[['R_i', 'R_t', 'R_c', 'R_m']].sum(axis=1), rtol=1e-12)
    np.testing.assert_allclose(table['pitch_um'], [100.0, 200.0, 400.0, 800.0])


@pytest.mark.parametrize('pitches_um', [[], [400.0, 200.0], [0.0, 100.0], [100.0, 20000.0]])
def test_resistance_sweep_rejects_bad_ranges(pcb_preset, pitches_um):
    """Test rejection of malformed pitch ranges."""
    with pytest.raises(ValidationError):
        resistance_sweep(pcb_preset, to_si(np.array(pitches_um, dtype=float), 'um'), 0.6)


def test_series_resistance_adds_both_sides(pg_preset):
    """Test that the series resistance adds anode and cathode."""
    g = pg_preset.geometry
    total = series_resistance(g, pg_preset.anode_layers, pg_preset.cathode_layers,
                              pg_preset.anode_collector, pg_preset.cathode_collector)
    anode = side_resistance(g, pg_preset.anode_layers, pg_preset.anode_collector, side='anode')
    assert total.r_in_plane == pytest.approx(2 * anode.r_in_plane)


def test_pitch_study_queues_csv(pcb_preset):
    """Test the CSV queued by the pitch study."""
    service = ResistanceService()
    service.pitch_study(pcb_preset, to_si(np.array([100.0, 200.0]), 'um'), 0.6)
    text = service.outputs['resistance_sweep.csv']
    assert text.splitlines()[0] == ','.join(RESISTANCE_HEADER)
    assert len(text.splitlines()) == 3
