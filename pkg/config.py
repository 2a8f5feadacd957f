"""Configuration constants for the microcell toolkit."""

VERSION = "0.1.0"

# Physical constants
FARADAY_CONSTANT = 96485.33  # C/mol
ELECTRONS_PER_H2 = 2
REFERENCE_VOLTAGE = 1.23  # V, reversible H2/O2 cell voltage
GAS_CONSTANT = 8.314  # J/(mol K)
STANDARD_TEMPERATURE = 298.15  # K
STANDARD_PRESSURE = 101325.0  # Pa

# Practical unit -> SI multipliers
UNIT_FACTORS = {
    'm': 1.0,
    'cm': 1e-2,
    'mm': 1e-3,
    'um': 1e-6,
    'm2': 1.0,
    'cm2': 1e-4,
    'mm2': 1e-6,
    'cm3': 1e-6,
    'ml': 1e-6,
    'ohm': 1.0,
    'ohm*cm': 1e-2,
    'mohm*cm': 1e-5,
    'uohm*cm': 1e-8,
    'mohm*cm2': 1e-7,
    'A': 1.0,
    'mA': 1e-3,
    'mA/cm2': 10.0,
    'cm2/mA': 0.1,
    'W': 1.0,
    'mW': 1e-3,
    'mW/cm2': 10.0,
    'C': 1.0,
    'mAh': 3.6,
    's': 1.0,
    'ms': 1e-3,
    'V': 1.0,
    'mV': 1e-3,
}

# Electrode layers, practical units
CATALYST_LAYER = {
    'name': 'catalyst',
    'in_plane_resistivity_mohm_cm': 360.0,
    'through_plane_resistivity_mohm_cm': 360.0,
    'thickness_um': 10.0,
}
GDL_LAYER = {
    'name': 'gdl',
    'in_plane_resistivity_mohm_cm': 50.0,
    'through_plane_resistivity_mohm_cm': 400.0,
    'thickness_um': 325.0,
}
CONTACT_RESISTIVITY_MOHM_CM2 = 4.0

# Current collector materials
COLLECTOR_MATERIALS = {
    'gold-film': {
        'metal_resistivity_uohm_cm': 2.44,
        'metal_thickness_um': 5.0,
        'max_length_hint_cm': 1.0,
    },
    'copper-pcb': {
        'metal_resistivity_uohm_cm': 1.7,
        'metal_thickness_um': 30.0,
        'max_length_hint_cm': 5.0,
    },
    'steel-mesh': {
        'metal_resistivity_uohm_cm': 72.0,
        'metal_thickness_um': 75.0,  # half of the 150 um wire, mesh as solid sheet
        'max_length_hint_cm': 2.0,
    },
}

# Cell presets
CELL_PRESETS = {
    'DF': {
        'active_area_cm2': 0.5,
        'pitch_um': 400.0,
        'channel_width_um': 280.0,
        'finger_length_cm': 0.7,
        'has_gdl': False,
        'collector': 'gold-film',
    },
    'PCB': {
        'active_area_cm2': 2.0,
        'pitch_um': 600.0,
        'channel_width_um': 360.0,
        'finger_length_cm': 1.4,
        'has_gdl': False,
        'collector': 'copper-pcb',
    },
    'PG': {
        'active_area_cm2': 10.0,
        'pitch_um': 2000.0,
        'channel_width_um': 1400.0,
        'finger_length_cm': 1.6,
        'has_gdl': True,
        'collector': 'steel-mesh',
    },
}
DEFAULT_INTERCELL_GAP_UM = 200.0

# Calibrated polarization presets, practical units
PCB_POLARIZATION = {
    'open_circuit_voltage_V': 0.80,
    'tafel_slope_V': 0.009,
    'exchange_current_density_mA_cm2': 9.0e-4,
    'area_resistance_mohm_cm2': 150.0,
    'mass_transport_m_V': 2.0e-4,
    'mass_transport_n_cm2_mA': 0.02,
    'leakage_current_density_mA_cm2': 0.55,
    'limiting_current_density_mA_cm2': 400.0,
}
DF_POLARIZATION = {
    'open_circuit_voltage_V': 0.90,
    'tafel_slope_V': 0.012,
    'exchange_current_density_mA_cm2': 0.0168,
    'area_resistance_mohm_cm2': 100.0,
    'mass_transport_m_V': 1.0e-4,
    'mass_transport_n_cm2_mA': 0.025,
    'leakage_current_density_mA_cm2': 0.3,
    'limiting_current_density_mA_cm2': 350.0,
}
PRESET_POLARIZATION = {
    'DF': DF_POLARIZATION,
    'PCB': PCB_POLARIZATION,
    'PG': PCB_POLARIZATION,  # same MEA as PCB
}

# Calibration anchors the presets were fitted to
PCB_CALIBRATION_TARGETS = {
    'open_circuit_voltage_V': 0.74,
    'max_efficiency': 0.56,
    'power_density_at_max_efficiency_mW_cm2': 20.0,
    'peak_power_window_mW_cm2': [150.0, 200.0],
    'leakage_current_density_mA_cm2': 0.55,
}
DF_CALIBRATION_TARGETS = {
    'open_circuit_voltage_V': 0.865,
    'max_efficiency': 0.65,
    'power_density_at_max_efficiency_mW_cm2': 14.4,
    'peak_power_window_mW_cm2': [150.0, 200.0],
    'leakage_current_density_mA_cm2': 0.3,
}
CALIBRATION_TOLERANCE = 0.05  # relative, per anchor
CALIBRATION_MAX_NFEV = 200
CALIBRATION_FTOL = 1e-10
CALIBRATION_DIFF_STEP = 1e-4
CALIBRATION_SCAN_POINTS = 400

# Galvanic gas cell
GAS_CELL_OPEN_CIRCUIT_VOLTAGE = 0.4  # V
GAS_CELL_INTERNAL_RESISTANCE = 8.0  # ohm
GAS_CELL_VOLTAGE_FLOOR = 0.0  # V
GAS_CELL_VOLTAGE_CEILING = 0.4  # V
GAS_CELL_CAPACITY_MAH = 600.0
GAS_CELL_VOLUME_CM3 = 3.5

# Circuit
DIODE_FORWARD_DROP = 0.3  # V, Schottky
PLENUM_VOLUME_CM3 = 0.1
STARVATION_PRESSURE_FRACTION = 0.5

# Operating point solver
SOLVER_XTOL = 1e-9  # A
SOLVER_RTOL = 1e-9
SOLVER_SCAN_POINTS = 2048
MAX_DEFAULT_TIME_STEP = 1e-3  # s
MIN_STEPS_PER_SEGMENT = 10

# Duty cycle experiment
PULSE_POWER_MW = 70.0
PULSE_WIDTH_MS = 7.0
DUTY_BASE_INTERVAL_MS = 10.0
DUTY_LIST = [0.1, 0.01, 0.001]

# Design limits
MAX_SERIES_RESISTANCE_MOHM_CM2 = 100.0
MAX_DEPLETION_DISTANCE_NO_GDL_UM = 25.0
MAX_DEPLETION_DISTANCE_GDL_UM = 400.0
COLLECTOR_LENGTH_LIMITS_CM = {
    'gold-film': 1.0,
    'steel-mesh': 2.0,
    'copper-pcb': 5.0,
}
PITCH_GUIDANCE_NO_GDL_UM = 400.0
PITCH_GUIDANCE_GDL_UM = 2000.0
IN_PLANE_BUDGET_FRACTION = 0.5
IN_PLANE_DROP_BUDGET_MV = 1.0
DESIGN_CURRENT_DENSITY_NO_GDL_MA_CM2 = 100.0
DESIGN_CURRENT_DENSITY_GDL_MA_CM2 = 800.0
PITCH_GRID_MIN_UM = 20.0
PITCH_GRID_MAX_UM = 5000.0
PITCH_GRID_POINTS = 256
MAX_SWEEP_PITCH_UM = 10000.0
SIZING_GRID_POINTS = 10000

# Ladder oracle
LADDER_SLICES = 2000

# Output
CSV_FLOAT_FORMAT = '%.10g'
RESISTANCE_HEADER = ['pitch_um', 'R_i', 'R_t', 'R_c', 'R_m', 'R_s']
CURVE_HEADER = ['r_s_mohmcm2', 'i_mA_cm2', 'V', 'P_mW_cm2', 'eta', 'rel_power_loss']
TIMESERIES_HEADER = ['t_s', 'i_fc_A', 'v_fc_V', 'i_gc_A', 'v_gc_V', 'i_diode_A', 'i_bypass_A',
                     'p_plenum_Pa', 'h2_mol']
DEFAULT_OUTPUT_DIR = 'out'
MANIFEST_FILE = 'manifest.txt'

# Logging
LOG_FILE = 'microcell.log'
LOG_MAX_BYTES = 1024 * 1024
LOG_BACKUP_COUNT = 5
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

# Exit codes
EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_INFEASIBLE = 2
EXIT_USAGE = 64

# Error handling
MAX_RETRIES = 3
INITIAL_RETRY_DELAY = 0.1
