"""Polarization curve, ohmic-loss superposition and the leakage efficiency model."""

import cython
import logging
from dataclasses import dataclass, replace
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import least_squares, minimize_scalar

from config import (
    REFERENCE_VOLTAGE,
    PCB_POLARIZATION,
    PRESET_POLARIZATION,
    CALIBRATION_TOLERANCE,
    CALIBRATION_MAX_NFEV,
    CALIBRATION_FTOL,
    CALIBRATION_DIFF_STEP,
    CALIBRATION_SCAN_POINTS,
    SIZING_GRID_POINTS,
    CURVE_HEADER,
)
from errors import CalibrationError, OutOfRangeError, ValidationError
from models import from_si, to_si
from .base import BaseService

logger = logging.getLogger('MicroCell.PolarizationService')

# practical field name -> (dataclass field, unit)
_PRACTICAL_FIELDS = {
    'open_circuit_voltage_V': ('open_circuit_voltage', 'V'),
    'tafel_slope_V': ('tafel_slope', 'V'),
    'exchange_current_density_mA_cm2': ('exchange_current_density', 'mA/cm2'),
    'area_resistance_mohm_cm2': ('area_resistance', 'mohm*cm2'),
    'mass_transport_m_V': ('mass_transport_m', 'V'),
    'mass_transport_n_cm2_mA': ('mass_transport_n', 'cm2/mA'),
    'leakage_current_density_mA_cm2': ('leakage_current_density', 'mA/cm2'),
    'limiting_current_density_mA_cm2': ('limiting_current_density', 'mA/cm2'),
}


@dataclass(frozen=True)
class PolarizationParams:
    """Empirical V(i) curve, SI: V, A/m^2, ohm*m^2, m^2/A."""

    open_circuit_voltage: float
    tafel_slope: float
    exchange_current_density: float
    area_resistance: float
    mass_transport_m: float
    mass_transport_n: float
    leakage_current_density: float
    limiting_current_density: float

    def __post_init__(self):
        if not 0 < self.open_circuit_voltage <= REFERENCE_VOLTAGE:
            raise ValidationError(f"open_circuit_voltage must lie in (0, 1.23], got {self.open_circuit_voltage}")
        for name in ('tafel_slope', 'exchange_current_density', 'limiting_current_density'):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ('area_resistance', 'mass_transport_m', 'mass_transport_n', 'leakage_current_density'):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be non-negative, got {getattr(self, name)}")

    def with_leakage(self, leakage_current_density: float) -> 'PolarizationParams':
        return replace(self, leakage_current_density=leakage_current_density)

    @classmethod
    def from_practical(cls, values: Dict[str, float]) -> 'PolarizationParams':
        unknown = set(values) - set(_PRACTICAL_FIELDS)
        if unknown:
            raise ValidationError(f"Unknown polarization fields: {sorted(unknown)}")
        missing = set(_PRACTICAL_FIELDS) - set(values)
        if missing:
            raise ValidationError(f"Missing polarization fields: {sorted(missing)}")
        return cls(**{field: to_si(values[key], unit) for key, (field, unit) in _PRACTICAL_FIELDS.items()})

    def to_practical(self) -> Dict[str, float]:
        return {key: from_si(getattr(self, field), unit) for key, (field, unit) in _PRACTICAL_FIELDS.items()}


def preset_polarization(name: str) -> PolarizationParams:
    """Committed calibrated parameters for a built-in cell type."""
    try:
        return PolarizationParams.from_practical(PRESET_POLARIZATION[str(name).upper()])
    except KeyError:
        raise ValidationError(f"No polarization preset for cell type: {name}")


DEFAULT_PARAMS = PolarizationParams.from_practical(PCB_POLARIZATION)


@dataclass(frozen=True)
class EfficiencyResult:
    voltage_efficiency: float
    faraday_efficiency: float
    total: float
    operating_power_density: float  # W/m^2


@dataclass(frozen=True)
class CalibrationTargets:
    """Scalar anchors a polarization curve is fitted to, SI."""

    open_circuit_voltage: float
    max_efficiency: float
    power_density_at_max_efficiency: float
    peak_power_window: Tuple[float, float]
    leakage_current_density: float
    tolerance: float = CALIBRATION_TOLERANCE

    def __post_init__(self):
        low, high = self.peak_power_window
        if not 0 < low <= high:
            raise ValidationError(f"Invalid peak power window: {self.peak_power_window}")
        if not 0 < self.max_efficiency:
            raise ValidationError("max_efficiency target must be positive")
        if not self.open_circuit_voltage > 0 or not self.power_density_at_max_efficiency > 0:
            raise ValidationError("Voltage and power targets must be positive")
        if self.leakage_current_density < 0:
            raise ValidationError("Leakage target must be non-negative")
        if not self.tolerance > 0:
            raise ValidationError("Calibration tolerance must be positive")

    @classmethod
    def from_practical(cls, values: Dict[str, object]) -> 'CalibrationTargets':
        try:
            window = values['peak_power_window_mW_cm2']
            return cls(
                open_circuit_voltage=float(values['open_circuit_voltage_V']),
                max_efficiency=float(values['max_efficiency']),
                power_density_at_max_efficiency=to_si(values['power_density_at_max_efficiency_mW_cm2'], 'mW/cm2'),
                peak_power_window=(to_si(window[0], 'mW/cm2'), to_si(window[1], 'mW/cm2')),
                leakage_current_density=to_si(values['leakage_current_density_mA_cm2'], 'mA/cm2'),
                tolerance=float(values.get('tolerance', CALIBRATION_TOLERANCE)),
            )
        except (KeyError, IndexError, TypeError) as e:
            raise ValidationError(f"Invalid calibration targets: {str(e)}")


@dataclass(frozen=True)
class FuelCellModel:
    """A polarization curve applied to a concrete active area."""

    params: PolarizationParams
    active_area: float  # m^2
    series_resistance: float = 0.0  # ohm*m^2, collector losses on top of the MEA
    name: str = 'cell'

    def __post_init__(self):
        if not self.active_area > 0:
            raise ValidationError(f"active_area must be positive, got {self.active_area}")
        if self.series_resistance < 0:
            raise ValidationError("series_resistance must be non-negative")

    @property
    def limiting_current(self) -> float:
        return self.params.limiting_current_density * self.active_area

    @property
    def leak_current(self) -> float:
        return self.params.leakage_current_density * self.active_area

    @property
    def open_circuit_voltage(self) -> float:
        return float(unclamped_voltage(self.params, 0.0, self.series_resistance))

    def raw_voltage(self, current):
        """Unclamped terminal voltage at a current (A); negative past the usable range."""
        return unclamped_voltage(self.params, np.asarray(current, dtype=float) / self.active_area,
                                 self.series_resistance)


def unclamped_voltage(params: PolarizationParams, i, r_s: float = 0.0):
    """Model voltage without domain checks or the zero clamp."""
    i = np.asarray(i, dtype=float)
    tafel_argument = np.maximum(i + params.leakage_current_density, params.exchange_current_density)
    v = (params.open_circuit_voltage
         - params.tafel_slope * np.log(tafel_argument / params.exchange_current_density)
         - (params.area_resistance + r_s) * i
         - params.mass_transport_m * np.exp(params.mass_transport_n * i))
    return float(v) if v.ndim == 0 else v


def _checked_density(params: PolarizationParams, i) -> np.ndarray:
    arr = np.asarray(i, dtype=float)
    if np.any(arr < 0):
        raise ValidationError("Current density must be non-negative")
    if np.any(arr >= params.limiting_current_density):
        raise OutOfRangeError(
            f"Current density {from_si(float(np.max(arr)), 'mA/cm2'):.6g} mA/cm2 at or beyond the "
            f"limiting current density {from_si(params.limiting_current_density, 'mA/cm2'):.6g} mA/cm2")
    return arr


def cell_voltage(params: PolarizationParams, i, r_s: float = 0.0):
    """Cell voltage at current density i (A/m^2) with extra series resistance r_s (ohm*m^2)."""
    if r_s < 0:
        raise ValidationError("Series resistance must be non-negative")
    arr = _checked_density(params, i)
    v = np.maximum(unclamped_voltage(params, arr, r_s), 0.0)
    return float(v) if np.ndim(v) == 0 else v


def _faraday_efficiency(i: np.ndarray, leakage: float) -> np.ndarray:
    denominator = i + leakage
    safe = np.where(denominator > 0, denominator, 1.0)
    return np.where(i > 0, i / safe, 0.0)


def efficiency_arrays(params: PolarizationParams, i_grid, r_s: float = 0.0, v_ref: float = REFERENCE_VOLTAGE,
                      leakage: Optional[float] = None) -> Dict[str, np.ndarray]:
    """Vectorized efficiency terms over a grid; leakage overrides the Faraday term only."""
    i = np.atleast_1d(_checked_density(params, i_grid))
    v = np.atleast_1d(cell_voltage(params, i, r_s))
    leak = params.leakage_current_density if leakage is None else leakage
    eta_v = v / v_ref
    eta_f = _faraday_efficiency(i, leak)
    return {
        'i': i,
        'V': v,
        'P': i * v,
        'eta_V': eta_v,
        'eta_F': eta_f,
        'eta': eta_v * eta_f,
    }


def efficiency(params: PolarizationParams, i: float, r_s: float = 0.0,
               v_ref: float = REFERENCE_VOLTAGE) -> EfficiencyResult:
    """Voltage, Faraday and total efficiency at one operating point."""
    terms = efficiency_arrays(params, float(i), r_s, v_ref)
    return EfficiencyResult(
        voltage_efficiency=float(terms['eta_V'][0]),
        faraday_efficiency=float(terms['eta_F'][0]),
        total=float(terms['eta'][0]),
        operating_power_density=float(terms['P'][0]),
    )


def _search_grid(params: PolarizationParams, n_points: int) -> np.ndarray:
    return np.linspace(0.0, params.limiting_current_density, n_points, endpoint=False)


def max_efficiency_point(params: PolarizationParams, r_s: float = 0.0,
                         n_points: int = SIZING_GRID_POINTS) -> Tuple[float, EfficiencyResult]:
    """Grid argmax of total efficiency (first maximum on ties)."""
    terms = efficiency_arrays(params, _search_grid(params, n_points), r_s)
    k = int(np.argmax(terms['eta']))
    i_best = float(terms['i'][k])
    return i_best, efficiency(params, i_best, r_s)


def peak_power_point(params: PolarizationParams, r_s: float = 0.0,
                     n_points: int = SIZING_GRID_POINTS) -> Tuple[float, float]:
    """Grid argmax of power density: (i, P) in SI."""
    terms = efficiency_arrays(params, _search_grid(params, n_points), r_s)
    k = int(np.argmax(terms['P']))
    return float(terms['i'][k]), float(terms['P'][k])


def curve_family(params: PolarizationParams, r_s_list: Sequence[float], i_grid: Sequence[float]) -> pd.DataFrame:
    """V, P and efficiency curves for several series resistances, relative to r_s = 0."""
    r_values = [float(r) for r in r_s_list]
    if not r_values:
        raise ValidationError("r_s list is empty")
    if 0.0 not in r_values:
        raise ValidationError("r_s list must include 0 as the reference curve")
    reference = efficiency_arrays(params, i_grid, 0.0)
    frames = []
    for r_s in r_values:
        terms = efficiency_arrays(params, i_grid, r_s)
        p_ref = reference['P']
        loss = np.where(p_ref > 0, 1.0 - terms['P'] / np.where(p_ref > 0, p_ref, 1.0), 0.0)
        frames.append(pd.DataFrame({
            'r_s_mohmcm2': from_si(np.full(terms['i'].shape, r_s), 'mohm*cm2'),
            'i_mA_cm2': from_si(terms['i'], 'mA/cm2'),
            'V': terms['V'],
            'P_mW_cm2': from_si(terms['P'], 'mW/cm2'),
            'eta': terms['eta'],
            'rel_power_loss': loss,
        }, columns=CURVE_HEADER))
    return pd.concat(frames, ignore_index=True)


def efficiency_vs_leakage(params: PolarizationParams, leak_list: Sequence[float],
                          i_grid: Sequence[float]) -> pd.DataFrame:
    """Efficiency curve at r_s = 0 for each leakage current density."""
    frames = []
    for leak in leak_list:
        if leak < 0:
            raise ValidationError(f"Leakage current density must be non-negative, got {leak}")
        terms = efficiency_arrays(params.with_leakage(float(leak)), i_grid)
        frames.append(pd.DataFrame({
            'i_leak_mA_cm2': from_si(np.full(terms['i'].shape, float(leak)), 'mA/cm2'),
            'i_mA_cm2': from_si(terms['i'], 'mA/cm2'),
            'eta': terms['eta'],
        }))
    if not frames:
        raise ValidationError("Leakage list is empty")
    return pd.concat(frames, ignore_index=True)


def stack_efficiency(params: PolarizationParams, n_cells: int, shunt_leak_density: float, i: float,
                     r_s: float = 0.0, v_ref: float = REFERENCE_VOLTAGE) -> EfficiencyResult:
    """Efficiency of a cell in a planar series stack with inter-cell shunt leakage."""
    if n_cells < 1:
        raise ValidationError(f"n_cells must be at least 1, got {n_cells}")
    if shunt_leak_density < 0:
        raise ValidationError("Shunt leakage must be non-negative")
    leakage = params.leakage_current_density + shunt_leak_density
    terms = efficiency_arrays(params, float(i), r_s, v_ref, leakage=leakage)
    return EfficiencyResult(
        voltage_efficiency=float(terms['eta_V'][0]),
        faraday_efficiency=float(terms['eta_F'][0]),
        total=float(terms['eta'][0]),
        operating_power_density=float(terms['P'][0]),
    )


def efficiency_curve(params: PolarizationParams, i_grid: Sequence[float], r_s: float = 0.0,
                     shunt_leak_density: float = 0.0) -> pd.DataFrame:
    """Efficiency against power density, the way measured cells are reported."""
    leakage = params.leakage_current_density + shunt_leak_density
    terms = efficiency_arrays(params, i_grid, r_s, leakage=leakage)
    return pd.DataFrame({
        'i_mA_cm2': from_si(terms['i'], 'mA/cm2'),
        'V': terms['V'],
        'P_mW_cm2': from_si(terms['P'], 'mW/cm2'),
        'eta_V': terms['eta_V'],
        'eta_F': terms['eta_F'],
        'eta': terms['eta'],
    })


def _refined_maximum(func, upper: float) -> Tuple[float, float]:
    """Maximize func on (0, upper): coarse scan, then bounded Brent refinement."""
    grid = np.linspace(0.0, upper, CALIBRATION_SCAN_POINTS, endpoint=False)[1:]
    values = func(grid)
    k = int(np.argmax(values))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, grid.size - 1)]
    if hi <= lo:
        return float(grid[k]), float(values[k])
    result = minimize_scalar(lambda x: -float(func(np.array([x]))[0]), bounds=(lo, hi), method='bounded',
                             options={'xatol': 1e-9 * upper})
    if -result.fun >= values[k]:
        return float(result.x), float(-result.fun)
    return float(grid[k]), float(values[k])


def calibration_residual(params: PolarizationParams, targets: CalibrationTargets) -> np.ndarray:
    """Relative misfit of each anchor: OCV, max efficiency, its power density, peak window."""
    upper = params.limiting_current_density

    def eta(i):
        v = np.maximum(unclamped_voltage(params, i), 0.0)
        return v / REFERENCE_VOLTAGE * _faraday_efficiency(i, params.leakage_current_density)

    def power(i):
        return i * np.maximum(unclamped_voltage(params, i), 0.0)

    ocv = max(unclamped_voltage(params, 0.0), 0.0)
    i_eta, eta_max = _refined_maximum(eta, upper)
    p_at_eta = float(power(np.array([i_eta]))[0])
    _, p_peak = _refined_maximum(power, upper)
    low, high = targets.peak_power_window
    if p_peak < low:
        window = (p_peak - low) / low
    elif p_peak > high:
        window = (p_peak - high) / high
    else:
        window = 0.0
    return np.array([
        (ocv - targets.open_circuit_voltage) / targets.open_circuit_voltage,
        (eta_max - targets.max_efficiency) / targets.max_efficiency,
        (p_at_eta - targets.power_density_at_max_efficiency) / targets.power_density_at_max_efficiency,
        window,
    ])


def _pack(params: PolarizationParams) -> np.ndarray:
    return np.array([
        params.tafel_slope,
        np.log(params.exchange_current_density),
        params.area_resistance,
        params.mass_transport_m,
        params.mass_transport_n,
    ])


def _unpack(x: np.ndarray, base: PolarizationParams) -> PolarizationParams:
    return replace(
        base,
        tafel_slope=float(x[0]),
        exchange_current_density=float(np.exp(x[1])),
        area_resistance=float(x[2]),
        mass_transport_m=float(x[3]),
        mass_transport_n=float(x[4]),
    )


def _bounds(base: PolarizationParams) -> Tuple[np.ndarray, np.ndarray]:
    lower = np.array([1e-4, np.log(1e-9), 0.0, 0.0, 0.0])
    upper = np.array([0.1, np.log(base.limiting_current_density), 1e-4, 0.1, 0.05])
    return lower, upper


def calibrate(targets: CalibrationTargets, initial: Optional[PolarizationParams] = None) -> PolarizationParams:
    """Fit the curve shape to the anchors by bounded trust-region least squares.

    The open-circuit voltage parameter stays at the initial guess and the
    leakage is taken from the targets; Tafel slope, exchange current,
    resistance and the mass-transport pair are fitted. The fit succeeds when
    every relative residual is within the target tolerance.
    """
    base = (initial or DEFAULT_PARAMS).with_leakage(targets.leakage_current_density)
    residual = calibration_residual(base, targets)
    if np.max(np.abs(residual)) <= targets.tolerance:
        logger.info(f"Initial guess meets calibration targets, residual {np.round(residual, 6).tolist()}")
        return base

    x0 = _pack(base)
    lower, upper = _bounds(base)
    x0 = np.clip(x0, lower, upper)

    def objective(x):
        return calibration_residual(_unpack(x, base), targets)

    try:
        fit = least_squares(objective, x0, bounds=(lower, upper), method='trf', x_scale='jac',
                            max_nfev=CALIBRATION_MAX_NFEV, ftol=CALIBRATION_FTOL,
                            diff_step=CALIBRATION_DIFF_STEP)
    except ValidationError as e:
        raise CalibrationError(f"Calibration left the admissible parameter space: {str(e)}",
                               params=base, residual=residual)
    best = _unpack(fit.x, base)
    final = calibration_residual(best, targets)
    logger.info(f"Calibration finished after {fit.nfev} evaluations, residual {np.round(final, 6).tolist()}")
    if np.max(np.abs(final)) > targets.tolerance:
        raise CalibrationError(
            f"Calibration did not meet targets within {targets.tolerance:.0%}: residual {final.tolist()}",
            params=best, residual=final)
    return best


@cython.cclass
class PolarizationService(BaseService):
    """Service producing curve-family, leakage and calibration outputs."""

    def __init__(self):
        """Initialize the polarization service."""
        super().__init__()

    def curve_study(self, params: PolarizationParams, r_s_list: Sequence[float],
                    i_grid: Sequence[float]) -> pd.DataFrame:
        """Ohmic-loss curve family, queued as polarization_curves.csv."""
        try:
            table = curve_family(params, r_s_list, i_grid)
            self._export('polarization_curves.csv', table)
            logger.info(f"Curve family for {len(r_s_list)} series resistances")
            return table
        except Exception as e:
            logger.error(f"Failed to build curve family: {str(e)}")
            raise

    def efficiency_study(self, params: PolarizationParams, leak_list: Sequence[float], i_grid: Sequence[float],
                         r_s: float = 0.0, shunt_leak_density: float = 0.0) -> Dict[str, pd.DataFrame]:
        """Leakage family plus the efficiency-vs-power curve of the configured cell."""
        try:
            tables = {
                'efficiency_vs_leakage.csv': efficiency_vs_leakage(params, leak_list, i_grid),
                'efficiency_curve.csv': efficiency_curve(params, i_grid, r_s, shunt_leak_density),
            }
            for name, table in tables.items():
                self._export(name, table)
            i_best, best = max_efficiency_point(params, r_s)
            logger.info(f"Maximum efficiency {best.total:.4f} at "
                        f"{from_si(best.operating_power_density, 'mW/cm2'):.3f} mW/cm2")
            return tables
        except Exception as e:
            logger.error(f"Failed to build efficiency curves: {str(e)}")
            raise

    def calibration_study(self, targets: CalibrationTargets,
                          initial: Optional[PolarizationParams] = None) -> PolarizationParams:
        """Fit parameters and queue the residual table."""
        try:
            params = calibrate(targets, initial)
        except Exception as e:
            logger.error(f"Failed to calibrate polarization curve: {str(e)}")
            raise
        residual = calibration_residual(params, targets)
        self._export('calibration_residual.csv', pd.DataFrame({
            'anchor': ['open_circuit_voltage', 'max_efficiency', 'power_at_max_efficiency', 'peak_power_window'],
            'relative_residual': residual,
        }))
        return params
