"""Geometric and energetic primitives for Euler-angle Kirchhoff rods.

Fields are piecewise-affine nodal functions on a uniform grid. Cell
derivatives are the exact constant slopes of the interpolant and angle
values at the quadrature point are midpoint averages, so the discrete
energy here is the same functional that the finite-element code in
:mod:`rodlab.fem` differentiates.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

THETA_MIN = 1e-6


class ValidationError(ValueError):
    """Raised when an input violates a documented invariant."""


@dataclass(frozen=True)
class Grid:
    """Uniform partition of ``[lower, upper]`` into ``n_cells`` cells."""

    lower: float
    upper: float
    n_cells: int

    def __post_init__(self):
        if not self.upper > self.lower:
            raise ValidationError(f"grid needs upper > lower, got [{self.lower}, {self.upper}]")
        if int(self.n_cells) != self.n_cells or self.n_cells < 2:
            raise ValidationError(f"grid needs n_cells >= 2, got {self.n_cells}")
        object.__setattr__(self, "n_cells", int(self.n_cells))

    @property
    def h(self) -> float:
        return (self.upper - self.lower) / self.n_cells

    @property
    def n_nodes(self) -> int:
        return self.n_cells + 1

    @property
    def nodes(self) -> np.ndarray:
        return self.lower + self.h * np.arange(self.n_nodes)

    @property
    def midpoints(self) -> np.ndarray:
        return self.lower + self.h * (np.arange(self.n_cells) + 0.5)

    @classmethod
    def unit(cls, n_cells: int) -> "Grid":
        return cls(0.0, 1.0, n_cells)


def _frozen(a, n: int, name: str) -> np.ndarray:
    arr = np.array(a, dtype=float)
    if arr.shape != (n,):
        raise ValidationError(f"{name} must have shape ({n},), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class EulerField:
    """Nodal Euler angles ``(theta, phi, psi)`` on a grid.

    ``theta`` is kept inside ``[theta_min, pi - theta_min]``; the
    formulation breaks down at the poles.
    """

    grid: Grid
    theta: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    theta_min: float = THETA_MIN

    def __post_init__(self):
        n = self.grid.n_nodes
        for name in ("theta", "phi", "psi"):
            object.__setattr__(self, name, _frozen(getattr(self, name), n, name))
        lo, hi = self.theta_min, np.pi - self.theta_min
        bad = (self.theta < lo) | (self.theta > hi)
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise ValidationError(
                f"theta={float(self.theta[i]):.6g} at node {i} violates polar guard [{lo}, {hi}]"
            )

    @classmethod
    def from_vector(cls, grid: Grid, x: np.ndarray, theta_min: float = THETA_MIN) -> "EulerField":
        n = grid.n_nodes
        x = np.asarray(x, dtype=float)
        return cls(grid, x[:n], x[n : 2 * n], x[2 * n :], theta_min)

    def as_vector(self) -> np.ndarray:
        """Stack nodal values as ``[theta..., phi..., psi...]``."""
        return np.concatenate([self.theta, self.phi, self.psi])

    def with_values(self, theta=None, phi=None, psi=None) -> "EulerField":
        return EulerField(
            self.grid,
            self.theta if theta is None else theta,
            self.phi if phi is None else phi,
            self.psi if psi is None else psi,
            self.theta_min,
        )


@dataclass(frozen=True)
class RodParams:
    """Material and loading constants.

    ``force`` is the terminal load; it enters the energy as
    ``force * length_L**2 . d3``.
    """

    bend_A: float = 1.0
    twist_C: float = 0.75
    length_L: float = 1.0
    force: tuple = (0.0, 0.0, 0.0)
    twist_M: float = 0.0

    def __post_init__(self):
        for name in ("bend_A", "twist_C", "length_L"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValidationError(f"{name} must be positive, got {v}")
        f = tuple(float(c) for c in np.asarray(self.force, dtype=float).ravel())
        if len(f) != 3 or not all(np.isfinite(f)):
            raise ValidationError(f"force must be a finite 3-vector, got {self.force}")
        object.__setattr__(self, "force", f)
        ratio = self.twist_C / self.bend_A
        if not (2.0 / 3.0 - 1e-12 <= ratio <= 1.0 + 1e-12):
            warnings.warn(f"C/A = {ratio:.4g} lies outside the physical range [2/3, 1]", stacklevel=3)

    @property
    def load(self) -> np.ndarray:
        """Force scaled by ``L**2``, the vector multiplying ``d3`` in the energy."""
        return np.asarray(self.force) * self.length_L**2

    def with_force(self, force) -> "RodParams":
        return RodParams(self.bend_A, self.twist_C, self.length_L, tuple(force), self.twist_M)


@dataclass(frozen=True)
class StrainField:
    """Curvatures and twist at the cell midpoints."""

    kappa1: np.ndarray
    kappa2: np.ndarray
    kappa3: np.ndarray


@dataclass(frozen=True)
class Centerline:
    s: np.ndarray
    points: np.ndarray = field(repr=False)


# -- quadrature ---------------------------------------------------------------


def cell_slopes(grid: Grid, u: np.ndarray) -> np.ndarray:
    return np.diff(u) / grid.h


def cell_means(u: np.ndarray) -> np.ndarray:
    return 0.5 * (u[:-1] + u[1:])


def integrate_cells(grid: Grid, values: np.ndarray) -> float:
    """Midpoint rule: ``values`` are sampled at cell midpoints."""
    return float(grid.h * np.sum(values))


def cumulative(grid: Grid, nodal: np.ndarray, rule: str = "trapezoid", midpoint_values=None) -> np.ndarray:
    """Running integral from ``grid.lower`` evaluated at every node.

    ``nodal`` has shape ``(n_nodes, ...)``. The midpoint rule needs the
    integrand at the cell midpoints, passed via ``midpoint_values``.
    """
    if rule == "trapezoid":
        incr = 0.5 * grid.h * (nodal[:-1] + nodal[1:])
    elif rule == "midpoint":
        if midpoint_values is None:
            raise ValueError("midpoint rule requires midpoint_values")
        incr = grid.h * np.asarray(midpoint_values)
    else:
        raise ValueError(f"unknown quadrature rule {rule!r}")
    out = np.zeros((grid.n_nodes,) + incr.shape[1:])
    out[1:] = np.cumsum(incr, axis=0)
    return out


# -- operations ---------------------------------------------------------------


def _d3(theta, phi) -> np.ndarray:
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


def strains(field: EulerField) -> StrainField:
    g = field.grid
    th_s, ph_s, ps_s = (cell_slopes(g, u) for u in (field.theta, field.phi, field.psi))
    th, ps = cell_means(field.theta), cell_means(field.psi)
    k1 = -ph_s * np.sin(th) * np.cos(ps) + th_s * np.sin(ps)
    k2 = ph_s * np.sin(th) * np.sin(ps) + th_s * np.cos(ps)
    k3 = ps_s + ph_s * np.cos(th)
    return StrainField(k1, k2, k3)


def tangent(field: EulerField) -> np.ndarray:
    """Unit tangent ``d3`` at every node, shape ``(n_nodes, 3)``."""
    return _d3(field.theta, field.phi)


def centerline(field: EulerField, origin=(0.0, 0.0, 0.0), rule: str = "trapezoid") -> Centerline:
    g = field.grid
    mids = _d3(cell_means(field.theta), cell_means(field.phi)) if rule == "midpoint" else None
    pts = np.asarray(origin, dtype=float) + cumulative(g, tangent(field), rule, mids)
    return Centerline(g.nodes, pts)


def energy_density(field: EulerField, params: RodParams) -> np.ndarray:
    """Energy integrand at the cell midpoints."""
    g = field.grid
    th_s, ph_s, ps_s = (cell_slopes(g, u) for u in (field.theta, field.phi, field.psi))
    th, ph = cell_means(field.theta), cell_means(field.phi)
    A, C = params.bend_A, params.twist_C
    bend = 0.5 * A * (th_s**2 + ph_s**2 * np.sin(th) ** 2)
    twist = 0.5 * C * (ps_s + ph_s * np.cos(th)) ** 2
    return bend + twist + _d3(th, ph) @ params.load


def energy(field: EulerField, params: RodParams) -> float:
    return integrate_cells(field.grid, energy_density(field, params))


def el_residual(field: EulerField, params: RodParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Strong-form Euler-Lagrange residuals at the interior nodes.

    Central differences throughout. The twist equation only says the
    twist is constant, so its residual is the twist minus its mean.
    """
    h = field.grid.h
    th, ph, ps = field.theta, field.phi, field.psi
    A, C = params.bend_A, params.twist_C
    Fx, Fy, Fz = params.load

    def d1(u):
        return np.gradient(u, h, edge_order=2)

    th_s, ph_s, ps_s = d1(th), d1(ph), d1(ps)
    st, ct = np.sin(th), np.cos(th)
    sp_, cp = np.sin(ph), np.cos(ph)
    twist = ps_s + ph_s * ct

    th_ss = (th[2:] - 2 * th[1:-1] + th[:-2]) / h**2
    dload_dth = ct * (Fx * cp + Fy * sp_) - Fz * st
    dload_dph = st * (-Fx * sp_ + Fy * cp)
    r_theta = A * th_ss - (A * ph_s**2 * st * ct - C * ph_s * st * twist + dload_dth)[1:-1]

    flux = A * ph_s * st**2 + C * ct * twist
    r_phi = (flux[2:] - flux[:-2]) / (2 * h) - dload_dph[1:-1]

    inner = twist[1:-1]
    r_psi = inner - inner.mean()
    return r_theta, r_phi, r_psi
