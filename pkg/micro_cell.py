"""Main microcell toolkit class: one study per command."""

import cython
import logging
import os
import platform
import sys
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
import scipy

from config import VERSION, DEFAULT_OUTPUT_DIR, MANIFEST_FILE, EXIT_OK, EXIT_VALIDATION, EXIT_USAGE
from errors import MicroCellError
from run_config import RunConfig
from services.base import BaseService
from services.design import DesignService
from services.polarization import PolarizationService
from services.resistance import ResistanceService
from services.system import SystemService

logger = logging.getLogger('MicroCell')

COMMANDS = ('resistance', 'polarization', 'efficiency', 'simulate', 'duty', 'energy', 'size', 'check',
            'calibrate', 'sweep')
USAGE = ("usage: microcell <command> --config <path> [--out <dir>] [--set key=value ...]\n"
         f"commands: {', '.join(COMMANDS)}\n")


@cython.cclass
class MicroCell:
    """Runs the studies of one configuration and writes their outputs."""

    _config: RunConfig
    _output_dir: str
    _resistance_service: ResistanceService
    _polarization_service: PolarizationService
    _system_service: SystemService
    _design_service: DesignService
    _report_service: BaseService

    def __init__(self, config: RunConfig, output_dir: str = DEFAULT_OUTPUT_DIR):
        """Initialize the toolkit for one configuration."""
        self._config = config
        self._output_dir = output_dir
        self._resistance_service = ResistanceService()
        self._polarization_service = PolarizationService()
        self._system_service = SystemService()
        self._design_service = DesignService()
        self._report_service = BaseService()

    @property
    def config(self) -> RunConfig:
        return self._config

    def resistance(self) -> pd.DataFrame:
        """Cathode resistance breakdown over the configured pitch range."""
        grid, opening_ratio = self._config.pitch_grid()
        return self._resistance_service.pitch_study(self._config.cell_preset(), grid, opening_ratio)

    def polarization(self) -> pd.DataFrame:
        """Polarization curve family for the configured series resistances."""
        params = self._config.polarization_params()
        i_grid = self._config.current_grid(params, 'polarization_study')
        return self._polarization_service.curve_study(params, self._config.series_resistance_list(), i_grid)

    def efficiency(self) -> Dict[str, pd.DataFrame]:
        """Leakage family and efficiency-vs-power curve."""
        params = self._config.polarization_params()
        i_grid = self._config.current_grid(params, 'efficiency')
        options = self._config.efficiency_options()
        return self._polarization_service.efficiency_study(params, options['leak_list'], i_grid, options['r_s'],
                                                           options['shunt_leak_density'])

    def simulate(self):
        """Transient simulation of the configured load profile."""
        circuit = self._config.circuit()
        options = self._config.simulation_options(circuit)
        return self._system_service.simulation_study(self._config.cell_model(), self._config.gas_cell(), circuit,
                                                     self._config.load_profile(), options['dt'], options['plenum'])

    def duty(self) -> pd.DataFrame:
        """Pulsed-load efficiency table of the reference and comparison cells."""
        options = self._config.duty_options()
        return self._system_service.duty_study(
            self._config.cell_model(options['reference_cell']),
            self._config.cell_model(options['comparison_cell']),
            self._config.circuit(),
            options['pulse_power'],
            options['pulse_width'],
            options['duty_list'],
            self._config.gas_cell(),
            options['base_interval'],
        )

    def energy(self) -> pd.DataFrame:
        return self._system_service.energy_study(self._config.cell_model(), self._config.gas_cell(),
                                                 self._config.circuit(), self._config.energy_currents())

    def size(self) -> pd.DataFrame:
        options = self._config.size_options()
        return self._design_service.size_study(self._config.polarization_params(), options['mean_powers'],
                                               options['r_s'])

    def check(self):
        """Design report; findings never fail the run."""
        return self._design_service.check_study(self._config.cell_preset(), self._config.constraints())

    def calibrate(self):
        """Fit the polarization curve and write a config carrying the fitted parameters."""
        targets = self._config.calibration_targets()
        params = self._polarization_service.calibration_study(targets, self._config.stock_polarization())
        calibrated = self._config.with_polarization(params)
        self._report_service.export('calibrated_config.json', calibrated.dumps())
        return params

    def sweep(self) -> pd.DataFrame:
        return self._design_service.sweep_study(self._config.sweep_spec())

    def _services(self) -> List[BaseService]:
        return [self._resistance_service, self._polarization_service, self._system_service,
                self._design_service, self._report_service]

    def _manifest(self, command: str, files: Sequence[str]) -> str:
        entries = [
            ('command', command),
            ('config_sha256', self._config.sha256),
            ('microcell_version', VERSION),
            ('python_version', platform.python_version()),
            ('numpy_version', np.__version__),
            ('scipy_version', scipy.__version__),
            ('pandas_version', pd.__version__),
            ('files', ','.join(sorted(files))),
        ]
        return ''.join(f"{key}={value}\n" for key, value in entries)

    def execute(self, command: str) -> List[str]:
        """Run one command and write its outputs plus the manifest; returns the paths written."""
        if command not in COMMANDS:
            raise ValueError(f"Unknown command: {command}")
        try:
            logger.info(f"Running {command} with {self._config.source}")
            getattr(self, command)()
            written = []
            for service in self._services():
                written.extend(service.flush(self._output_dir))
            names = [os.path.basename(path) for path in written]
            self._report_service.export(MANIFEST_FILE, self._manifest(command, names))
            written.extend(self._report_service.flush(self._output_dir))
            logger.info(f"{command} finished, {len(written)} files in {self._output_dir}")
            return written
        except Exception as e:
            logger.error(f"Failed to run {command}: {str(e)}")
            self.cleanup()
            raise

    def cleanup(self):
        """Drop outputs that were not written."""
        for service in self._services():
            service.cleanup()


def run(command: str, config_path: str, flags: Optional[Dict[str, object]] = None) -> int:
    """Run a command against a config file; returns the process exit code."""
    flags = flags or {}
    if command not in COMMANDS:
        sys.stderr.write(USAGE)
        logger.error(f"Unknown command: {command}")
        return EXIT_USAGE
    try:
        config = RunConfig.load(config_path, flags.get('set') or ())
        MicroCell(config, flags.get('out') or DEFAULT_OUTPUT_DIR).execute(command)
        return EXIT_OK
    except MicroCellError as e:
        return e.exit_code
    except Exception as e:
        logger.error(f"Unexpected failure in {command}: {str(e)}")
        return EXIT_VALIDATION
