"""Spectral laboratory for the prescribed third-order boundary curvature flow on S^3."""

__version__ = "0.1.0"

from .harmonics import (  # noqa: F401
    GridField,
    QuadratureGrid,
    SpectralField,
    SphereBasis,
    VOL_S3,
    build_grid,
    get_basis,
)
