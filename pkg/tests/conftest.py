"""Test configuration and fixtures for the microcell toolkit."""

import json
import os
import pytest
from typing import Any, Dict, Generator

from models import CellPreset, get_preset
from services.hydrogen import GalvanicCellSpec
from services.polarization import FuelCellModel, PolarizationParams, preset_polarization
from services.system import CircuitSpec

DEFAULT_CONFIG = os.path.join(os.path.dirname(os.path.dirname(__file__)), 'configs', 'default.json')


@pytest.fixture
def pcb_preset() -> CellPreset:
    return get_preset('PCB')


@pytest.fixture
def df_preset() -> CellPreset:
    return get_preset('DF')


@pytest.fixture
def pg_preset() -> CellPreset:
    return get_preset('PG')


@pytest.fixture
def pcb_params() -> PolarizationParams:
    return preset_polarization('PCB')


@pytest.fixture
def df_params() -> PolarizationParams:
    return preset_polarization('DF')


@pytest.fixture
def pcb_cell(pcb_preset: CellPreset, pcb_params: PolarizationParams) -> FuelCellModel:
    return FuelCellModel(pcb_params, pcb_preset.geometry.active_area, name='PCB')


@pytest.fixture
def df_cell(df_preset: CellPreset, df_params: PolarizationParams) -> FuelCellModel:
    return FuelCellModel(df_params, df_preset.geometry.active_area, name='DF')


@pytest.fixture
def gas_spec() -> GalvanicCellSpec:
    return GalvanicCellSpec()


@pytest.fixture
def circuit() -> CircuitSpec:
    return CircuitSpec()


@pytest.fixture
def default_config_data() -> Dict[str, Any]:
    """The committed default configuration as a dict."""
    with open(DEFAULT_CONFIG, 'r') as f:
        return json.load(f)


@pytest.fixture
def config_file(tmp_path: Any, default_config_data: Dict[str, Any]) -> Generator[str, None, None]:
    """A writable copy of the default configuration."""
    path = tmp_path / 'config.json'
    path.write_text(json.dumps(default_config_data, indent=2))
    yield str(path)


@pytest.fixture
def write_config(tmp_path: Any):
    """Factory writing a config dict to a temporary JSON file."""
    def _write(data: Dict[str, Any], name: str = 'custom.json') -> str:
        path = tmp_path / name
        path.write_text(json.dumps(data, indent=2))
        return str(path)
    return _write

