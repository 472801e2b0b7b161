"""Spectral instrument for 2D incompressible Euler flow in a periodic channel with inflow and outflow.

Fields live either in a closed-form mode algebra (``mode_field``) or on a
Fourier-Chebyshev grid (``grid_field``).  On top of these sit the shrinking
radius analytic norms (``norms``), exact combinatorial certificates
(``combinatorics``), the Neumann pressure solver (``pressure``), the estimate
harness (``estimates``) and the time drivers (``solver``).
"""

__version__ = "0.1.0"

from .grid_field import ConditioningError, GridField, VectorGridField
from .mode_field import ModeField, VectorModeField
from .norms import NormParams, RadiusSchedule, ScheduleError, all_norms, derivative_table, norm

__all__ = [
    "ConditioningError",
    "GridField",
    "ModeField",
    "NormParams",
    "RadiusSchedule",
    "ScheduleError",
    "VectorGridField",
    "VectorModeField",
    "all_norms",
    "derivative_table",
    "norm",
]
