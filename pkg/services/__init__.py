"""Services package for the microcell toolkit."""

from .base import BaseService
from .resistance import ResistanceService
from .polarization import PolarizationService
from .system import SystemService
from .design import DesignService

__all__ = ['BaseService', 'ResistanceService', 'PolarizationService', 'SystemService', 'DesignService']
