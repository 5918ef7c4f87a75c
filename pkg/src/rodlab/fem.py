"""P1 finite-element assembly for the discrete rod energy.

Unknowns are stacked as ``x = [theta_0..theta_N, phi_0..phi_N, psi_0..psi_N]``.
Each cell contributes through five local quantities, the three slopes and
the midpoint values of theta and phi; gradients and Hessians are exact
derivatives of the midpoint-rule energy.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .rod import EulerField, Grid, RodParams, cell_means, cell_slopes

# rows: th_s, th_m, ph_s, ph_m, ps_s; columns: th_i, th_i+1, ph_i, ph_i+1, ps_i, ps_i+1
_SLOPE = np.array([-1.0, 1.0])
_MEAN = np.array([0.5, 0.5])

AXES = {"x": 0, "y": 1, "z": 2}


def _local_map(h: float) -> np.ndarray:
    B = np.zeros((5, 6))
    B[0, 0:2] = _SLOPE / h
    B[1, 0:2] = _MEAN
    B[2, 2:4] = _SLOPE / h
    B[3, 2:4] = _MEAN
    B[4, 4:6] = _SLOPE / h
    return B


def _cell_dofs(grid: Grid) -> np.ndarray:
    n = grid.n_nodes
    i = np.arange(grid.n_cells)
    return np.stack([i, i + 1, n + i, n + i + 1, 2 * n + i, 2 * n + i + 1], axis=1)


def _cell_vars(field: EulerField):
    g = field.grid
    return (
        cell_slopes(g, field.theta),
        cell_means(field.theta),
        cell_slopes(g, field.phi),
        cell_means(field.phi),
        cell_slopes(g, field.psi),
    )


def _load_derivs(th, ph, load):
    Fx, Fy, Fz = load
    st, ct, sp_, cp = np.sin(th), np.cos(th), np.sin(ph), np.cos(ph)
    horiz = Fx * cp + Fy * sp_
    horiz_p = -Fx * sp_ + Fy * cp
    P = st * horiz + Fz * ct
    P_t = ct * horiz - Fz * st
    P_p = st * horiz_p
    P_tt = -st * horiz - Fz * ct
    P_tp = ct * horiz_p
    P_pp = -st * horiz
    return P, P_t, P_p, P_tt, P_tp, P_pp


def _local_grad_hess(field: EulerField, A: float, C: float, load, hessian: bool):
    th_s, th, ph_s, ph, ps_s = _cell_vars(field)
    S, c = np.sin(th), np.cos(th)
    T = ps_s + ph_s * c
    _, P_t, P_p, P_tt, P_tp, P_pp = _load_derivs(th, ph, load)

    g = np.empty((th.size, 5))
    g[:, 0] = A * th_s
    g[:, 1] = A * ph_s**2 * S * c - C * T * ph_s * S + P_t
    g[:, 2] = A * ph_s * S**2 + C * T * c
    g[:, 3] = P_p
    g[:, 4] = C * T
    if not hessian:
        return g, None

    H = np.zeros((th.size, 5, 5))
    H[:, 0, 0] = A
    H[:, 1, 1] = A * ph_s**2 * (c**2 - S**2) + C * ph_s**2 * S**2 - C * T * ph_s * c + P_tt
    H[:, 1, 2] = 2 * A * ph_s * S * c - C * ph_s * S * c - C * T * S
    H[:, 1, 3] = P_tp
    H[:, 1, 4] = -C * ph_s * S
    H[:, 2, 2] = A * S**2 + C * c**2
    H[:, 2, 4] = C * c
    H[:, 3, 3] = P_pp
    H[:, 4, 4] = C
    iu = np.triu_indices(5, 1)
    H[:, iu[1], iu[0]] = H[:, iu[0], iu[1]]
    return g, H


def energy_gradient(field: EulerField, params: RodParams) -> np.ndarray:
    """Gradient of the discrete energy with respect to all nodal values."""
    g = field.grid
    loc, _ = _local_grad_hess(field, params.bend_A, params.twist_C, params.load, hessian=False)
    cell = g.h * loc @ _local_map(g.h)
    out = np.zeros(3 * g.n_nodes)
    np.add.at(out, _cell_dofs(g), cell)
    return out


def energy_hessian(field: EulerField, params: RodParams) -> sp.csr_matrix:
    """Exact Hessian of the discrete energy, sparse and symmetric."""
    g = field.grid
    _, loc = _local_grad_hess(field, params.bend_A, params.twist_C, params.load, hessian=True)
    B = _local_map(g.h)
    cell = g.h * np.einsum("ai,nab,bj->nij", B, loc, B)
    return _assemble(g, cell)


def _assemble(grid: Grid, cell: np.ndarray) -> sp.csr_matrix:
    dofs = _cell_dofs(grid)
    rows = np.repeat(dofs, 6, axis=1).ravel()
    cols = np.tile(dofs, (1, 6)).ravel()
    n = 3 * grid.n_nodes
    return sp.coo_matrix((cell.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def load_hessian(field: EulerField, load) -> sp.csr_matrix:
    """Hessian of ``int load . d3 ds`` alone (used for constraint functionals)."""
    g = field.grid
    th, ph = cell_means(field.theta), cell_means(field.phi)
    _, _, _, P_tt, P_tp, P_pp = _load_derivs(th, ph, load)
    loc = np.zeros((th.size, 5, 5))
    loc[:, 1, 1], loc[:, 1, 3], loc[:, 3, 1], loc[:, 3, 3] = P_tt, P_tp, P_tp, P_pp
    B = _local_map(g.h)
    return _assemble(g, g.h * np.einsum("ai,nab,bj->nij", B, loc, B))


def scalar_mass(grid: Grid, lumped: bool = False) -> sp.csr_matrix:
    """P1 mass matrix for a single scalar field."""
    n, h = grid.n_nodes, grid.h
    if lumped:
        d = np.full(n, h)
        d[[0, -1]] = h / 2
        return sp.diags(d).tocsr()
    main = np.full(n, 2 * h / 3)
    main[[0, -1]] = h / 3
    off = np.full(n - 1, h / 6)
    return sp.diags([off, main, off], [-1, 0, 1]).tocsr()


def mass_matrix(grid: Grid, lumped: bool = False) -> sp.csr_matrix:
    """Block-diagonal mass matrix acting on stacked ``(theta, phi, psi)``."""
    m = scalar_mass(grid, lumped)
    return sp.block_diag([m, m, m]).tocsr()


# -- isoperimetric functionals ---------------------------------------------------


def constraint_value(field: EulerField, axis: str) -> float:
    """``int d3[axis] ds`` with the same midpoint rule as the energy."""
    g = field.grid
    th, ph = cell_means(field.theta), cell_means(field.phi)
    if axis == "x":
        vals = np.sin(th) * np.cos(ph)
    elif axis == "y":
        vals = np.sin(th) * np.sin(ph)
    elif axis == "z":
        vals = np.cos(th)
    else:
        raise KeyError(f"unknown constraint {axis!r}; expected one of x, y, z")
    return float(g.h * vals.sum())


def constraint_gradient(field: EulerField, axis: str) -> np.ndarray:
    """Gradient of :func:`constraint_value`; the load gradient for a unit force."""
    e = np.zeros(3)
    e[AXES[axis]] = 1.0
    g = field.grid
    th, ph = cell_means(field.theta), cell_means(field.phi)
    _, P_t, P_p, *_ = _load_derivs(th, ph, e)
    out = np.zeros(3 * g.n_nodes)
    n = g.n_nodes
    i = np.arange(g.n_cells)
    half = 0.5 * g.h
    np.add.at(out, i, half * P_t)
    np.add.at(out, i + 1, half * P_t)
    np.add.at(out, n + i, half * P_p)
    np.add.at(out, n + i + 1, half * P_p)
    return out


def constraint_hessian(field: EulerField, axis: str) -> sp.csr_matrix:
    e = np.zeros(3)
    e[AXES[axis]] = 1.0
    return load_hessian(field, e)
