"""Branches of buckled solutions bifurcating from the straight twisted rod.

The clamped straight rod under an axial load is invariant under rigid
rotation about the load axis (combined with a constant shift of psi), so
each buckled branch is a circle of solutions. Newton solves therefore
carry a phase condition with its own multiplier, which is zero on the
branch up to discretization error.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .. import fem
from ..equilibria import BoundarySpec, trivial_bcs, trivial_state
from ..rod import EulerField, Grid, RodParams, ValidationError, energy
from .forms import critical_forces, trivial_mode

logger = logging.getLogger(__name__)


class ContinuationError(RuntimeError):
    pass


@dataclass(frozen=True)
class BranchPoint:
    force: float
    field: EulerField
    amplitude: float
    amplitude_phi: float
    energy: float


def amplitude(field: EulerField) -> float:
    return float(np.max(np.abs(field.theta - np.pi / 2)))


def solve_equilibrium(
    field: EulerField,
    params: RodParams,
    bcs: BoundarySpec,
    tol: float = 1e-10,
    max_iter: int = 50,
) -> EulerField:
    """Plain Newton on the discrete Euler-Lagrange system."""
    free = bcs.free_dofs(field.grid.n_nodes)
    x = field.as_vector()
    for _ in range(max_iter):
        f = EulerField.from_vector(field.grid, x, field.theta_min)
        r = fem.energy_gradient(f, params)[free]
        if np.max(np.abs(r)) <= tol:
            return f
        H = fem.energy_hessian(f, params)[free][:, free].toarray()
        x[free] -= la.solve(H, r, assume_a="sym")
    raise ContinuationError(f"Newton did not converge in {max_iter} iterations (residual {np.max(np.abs(r)):.3e})")


class _BranchSolver:
    """Newton on ``grad V + mu g2 = 0`` with phase ``<g2, x - x0> = 0``."""

    def __init__(self, grid: Grid, params: RodParams, m: int, tol: float, max_iter: int):
        self.grid, self.params, self.tol, self.max_iter = grid, params, tol, max_iter
        self.bcs = trivial_bcs(params.twist_M, "dirichlet")
        self.free = self.bcs.free_dofs(grid.n_nodes)
        self.base = trivial_state(grid, params.twist_M)
        self.x0 = self.base.as_vector()
        M = fem.mass_matrix(grid)
        s = grid.nodes
        z = np.zeros_like(s)
        d = []
        for family in (1, 2):
            mode = trivial_mode(m, params, family)
            vec = np.concatenate([mode.alpha(s), mode.beta(s), z])
            d.append(vec / np.sqrt(vec @ (M @ vec)))
        self.d1, self.d2 = d
        self.g1 = (M @ self.d1)[self.free]
        self.g2 = (M @ self.d2)[self.free]
        self.dload = params.length_L**2

    def _field(self, x):
        return EulerField.from_vector(self.grid, x)

    def _pieces(self, x, F):
        f = self._field(x)
        p = self.params.with_force((F, 0.0, 0.0))
        r = fem.energy_gradient(f, p)[self.free]
        H = fem.energy_hessian(f, p)[self.free][:, self.free].toarray()
        dF = self.dload * fem.constraint_gradient(f, "x")[self.free]
        return r, H, dF

    def at_amplitude(self, a: float, x_guess, F_guess):
        """Solve for (state, force) with prescribed projection on the first mode."""
        x, F, mu = x_guess.copy(), F_guess, 0.0
        f = self.free
        n = f.size
        for _ in range(self.max_iter):
            r, H, dF = self._pieces(x, F)
            dx = x[f] - self.x0[f]
            R = np.concatenate([r + mu * self.g2, [self.g1 @ dx - a, self.g2 @ dx]])
            if np.max(np.abs(R)) <= self.tol:
                return x, F
            J = np.zeros((n + 2, n + 2))
            J[:n, :n] = H
            J[:n, n] = dF
            J[:n, n + 1] = self.g2
            J[n, :n] = self.g1
            J[n + 1, :n] = self.g2
            step = la.solve(J, -R)
            x[f] += step[:n]
            F += step[n]
            mu += step[n + 1]
        raise ContinuationError(f"amplitude-constrained Newton failed at a={a:g} (residual {np.max(np.abs(R)):.3e})")

    def at_force(self, F: float, x_guess):
        x, mu = x_guess.copy(), 0.0
        f = self.free
        n = f.size
        for _ in range(self.max_iter):
            r, H, _ = self._pieces(x, F)
            R = np.concatenate([r + mu * self.g2, [self.g2 @ (x[f] - self.x0[f])]])
            if np.max(np.abs(R)) <= self.tol:
                return x
            J = np.zeros((n + 1, n + 1))
            J[:n, :n] = H
            J[:n, n] = self.g2
            J[n, :n] = self.g2
            step = la.solve(J, -R)
            x[f] += step[:n]
            mu += step[n]
            if not np.all(np.isfinite(x)):
                break
        raise ContinuationError(f"Newton failed at F={F:g}")

    def point(self, x, F) -> BranchPoint:
        f = self._field(x)
        return BranchPoint(
            F,
            f,
            amplitude(f),
            float(np.max(np.abs(f.phi))),
            energy(f, self.params.with_force((F, 0.0, 0.0))),
        )


def branch_continuation(
    params: RodParams,
    m: int,
    F_range: tuple[float, float] | None = None,
    step: float | None = None,
    n_cells: int = 100,
    seed_amplitude: float = 1e-2,
    tol: float = 1e-10,
    min_step: float | None = None,
    max_iter: int = 30,
) -> list[BranchPoint]:
    """Trace the m-th buckled branch of the clamped straight rod in the load.

    The branch is seeded near onset by two amplitude-constrained solves
    along the m-th mode, then continued in ``F`` with a secant predictor
    and step halving. If the step drops below ``min_step`` the partial
    branch is returned and a warning is logged.
    """
    Fm = float(critical_forces(params, m)[-1])
    if F_range is None:
        F_range = (Fm, Fm + 0.25 * max(abs(Fm), np.pi**2))
    F_lo, F_hi = F_range
    if F_hi <= Fm:
        raise ValidationError(f"F_range end {F_hi} must exceed the critical force {Fm}")
    if step is None:
        step = (F_hi - Fm) / 40
    min_step = min_step if min_step is not None else step / 1024
    grid = Grid.unit(n_cells)
    solver = _BranchSolver(grid, params, m, tol, max_iter)

    pts = []
    x = solver.x0.copy()
    x_prev = None
    F_prev = None
    for a in (seed_amplitude, 2 * seed_amplitude):
        guess = solver.x0 + a * solver.d1 if x_prev is None else 2 * x - x_prev
        F_guess = Fm if F_prev is None else F_prev
        x_new, F_new = solver.at_amplitude(a, guess, F_guess)
        x_prev, x = x, x_new
        F_prev = F_new
        pts.append(solver.point(x, F_new))
    if pts[1].force < pts[0].force:
        logger.warning("branch %d bends back (subcritical); natural-parameter continuation stops at onset", m)
        return [p for p in pts if p.force >= F_lo]

    F_a = pts[0].force
    F = pts[1].force
    h = step
    while F < F_hi:
        F_next = min(F + h, F_hi)
        slope = (x - x_prev) / (F - F_a)
        guess = x + slope * (F_next - F)
        try:
            x_next = solver.at_force(F_next, guess)
        except (ContinuationError, la.LinAlgError, ValidationError):
            h /= 2
            if h < min_step:
                logger.warning("branch %d: step below %.3g at F=%.6g, returning partial branch", m, min_step, F)
                break
            continue
        x_prev, F_a, x, F = x, F, x_next, F_next
        pts.append(solver.point(x, F))
        h = min(step, 1.5 * h)
    return [p for p in pts if p.force >= F_lo]


def onset_from_branch(points: list[BranchPoint], n_fit: int = 6) -> float:
    """Extrapolate the force at which the branch amplitude vanishes.

    Fits ``amplitude**2`` linearly in ``F`` over the first ``n_fit``
    points, the pitchfork normal form.
    """
    F = np.array([p.force for p in points[:n_fit]])
    a2 = np.array([p.amplitude for p in points[:n_fit]]) ** 2
    slope, intercept = np.polyfit(F, a2, 1)
    return float(-intercept / slope)


def discrete_critical_forces(params: RodParams, m_max: int, n_cells: int = 100) -> np.ndarray:
    """Loads at which the discrete clamped Hessian at the straight rod turns singular.

    The eigenvalues come in near-degenerate pairs; each pair is averaged.
    """
    grid = Grid.unit(n_cells)
    base = trivial_state(grid, params.twist_M)
    free = trivial_bcs(params.twist_M, "dirichlet").free_dofs(grid.n_nodes)
    n = grid.n_nodes
    bending = free[free < 2 * n]
    H0 = fem.energy_hessian(base, params.with_force((0.0, 0.0, 0.0)))[bending][:, bending].toarray()
    Q = -params.length_L**2 * fem.constraint_hessian(base, "x")[bending][:, bending].toarray()
    w = la.eig(H0, Q, right=False)
    w = np.sort(w[np.isfinite(w)].real)
    return w[: 2 * m_max].reshape(m_max, 2).mean(axis=1)
