"""Kirchhoff rods in Euler-angle form: equilibria, stability and gradient flow."""

from .rod import (
    THETA_MIN,
    Centerline,
    EulerField,
    Grid,
    RodParams,
    StrainField,
    ValidationError,
    centerline,
    el_residual,
    energy,
    energy_density,
    strains,
    tangent,
)

__version__ = "0.1.0"

__all__ = [
    "THETA_MIN",
    "Centerline",
    "EulerField",
    "Grid",
    "RodParams",
    "StrainField",
    "ValidationError",
    "centerline",
    "el_residual",
    "energy",
    "energy_density",
    "strains",
    "tangent",
]
