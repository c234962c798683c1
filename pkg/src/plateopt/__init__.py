"""Inverse-design toolkit for violin-like orthotropic plates: eigenfrequency
oracle, neural surrogate, bounded optimization, and scripted design studies."""

__version__ = "0.1.0"

from .geometry import (  # noqa: F401
    MaterialParams,
    OutlineParams,
    PlateParams,
    ReferencePlate,
    ThicknessParams,
    make_reference_plate,
    realize,
    reference_params,
)
from .oracle import DEFAULT_RESOLUTION, discretize, solve_modes  # noqa: F401
