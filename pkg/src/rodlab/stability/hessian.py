"""Discrete Hessian of the rod energy and its generalized spectrum."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .. import fem
from ..equilibria import BoundarySpec
from ..rod import EulerField, RodParams

logger = logging.getLogger(__name__)

DENSE_LIMIT = 3000


class SpectrumError(RuntimeError):
    def __init__(self, msg: str, residual: float = np.nan):
        super().__init__(f"{msg} (residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class Hessian:
    """Second derivative of the discrete energy over admissible perturbations.

    ``matrix`` and ``mass`` act on reduced coordinates ``y``; the nodal
    perturbation is ``lift(y)``. Without isoperimetric constraints the
    reduced coordinates are simply the free nodal values ``free``; with
    constraints they are coefficients in the null-space ``basis`` of the
    linearized constraints.
    """

    matrix: sp.spmatrix | np.ndarray
    mass: sp.spmatrix | np.ndarray
    free: np.ndarray
    n_nodes: int
    basis: np.ndarray | None = None
    multipliers: dict | None = None
    normalization: str = "generalized: H v = mu M v with the P1 consistent mass"

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def lift(self, y: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        z = self.basis @ y if self.basis is not None else y
        full = np.zeros(3 * self.n_nodes)
        full[self.free] = z
        n = self.n_nodes
        return full[:n], full[n : 2 * n], full[2 * n :]

    def restrict(self, alpha, beta, gamma) -> np.ndarray:
        """Reduced coordinates of a nodal perturbation (least squares if constrained)."""
        z = np.concatenate([alpha, beta, gamma])[self.free]
        if self.basis is None:
            return z
        return self.basis.T @ z

    def quadratic(self, alpha, beta, gamma) -> float:
        """``v^T H v`` for a nodal perturbation over the free dofs (no projection)."""
        if self.basis is not None:
            raise ValueError("quadratic() needs an unconstrained Hessian; use reduced coordinates")
        v = self.restrict(alpha, beta, gamma)
        return float(v @ (self.matrix @ v))

    def mass_norm2(self, alpha, beta, gamma) -> float:
        v = self.restrict(alpha, beta, gamma)
        return float(v @ (self.mass @ v))

    def dense(self) -> np.ndarray:
        return self.matrix.toarray() if sp.issparse(self.matrix) else np.asarray(self.matrix)

    def symmetry_defect(self) -> float:
        H = self.matrix
        D = H - H.T
        return float(abs(D).max()) if sp.issparse(D) else float(np.abs(D).max())


def assemble_hessian(
    equilibrium: EulerField, params: RodParams, bcs: BoundarySpec, lumped_mass: bool = False
) -> Hessian:
    """Hessian of the discrete energy restricted to ``bcs``-admissible perturbations.

    Isoperimetric constraints in ``bcs`` are linearized and eliminated by a
    null-space basis. Their curvature enters through least-squares
    multipliers of the stationarity condition, which vanish at exact
    equilibria of the unconstrained energy.
    """
    n = equilibrium.grid.n_nodes
    free = bcs.free_dofs(n)
    H = fem.energy_hessian(equilibrium, params)[free][:, free].tocsr()
    M = fem.mass_matrix(equilibrium.grid, lumped_mass)[free][:, free].tocsr()
    axes = bcs.iso_constraints
    if not axes:
        return Hessian(H, M, free, n)

    G = np.array([fem.constraint_gradient(equilibrium, a)[free] for a in axes])
    grad = fem.energy_gradient(equilibrium, params)[free]
    mu, *_ = np.linalg.lstsq(G.T, -grad, rcond=None)
    for a, m in zip(axes, mu):
        H = H + m * fem.constraint_hessian(equilibrium, a)[free][:, free]
    Z = la.null_space(G)
    Hd = Z.T @ (H @ Z)
    Md = Z.T @ (M @ Z)
    return Hessian(0.5 * (Hd + Hd.T), 0.5 * (Md + Md.T), free, n, basis=Z, multipliers=dict(zip(axes, mu)))


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray
    index: int
    smallest_eigenvector: tuple[np.ndarray, np.ndarray, np.ndarray]
    normalization: str
    index_exact: bool = True


def _gershgorin_lower(A) -> float:
    A = sp.csr_matrix(A)
    d = A.diagonal()
    off = np.asarray(abs(A).sum(axis=1)).ravel() - np.abs(d)
    return float(np.min(d - off))


def smallest_eigenvalue(H: Hessian) -> float:
    """Smallest generalized eigenvalue only; cheap path for sweeps."""
    return float(la.eigh(H.dense(), _as_dense(H.mass), eigvals_only=True, subset_by_index=[0, 0])[0])


def _as_dense(M):
    return M.toarray() if sp.issparse(M) else np.asarray(M)


def spectrum(H: Hessian, k: int = 6) -> SpectrumReport:
    """The ``k`` smallest generalized eigenvalues and the lowest eigenvector.

    Dense symmetric solve up to ``DENSE_LIMIT`` unknowns; beyond that,
    shift-invert Lanczos below a Gershgorin bound. The index (number of
    negative eigenvalues) is exact on the dense path and a lower bound on
    the sparse one.
    """
    if not 1 <= k <= H.dim:
        raise ValueError(f"k={k} must lie in [1, {H.dim}]")
    if H.dim <= DENSE_LIMIT:
        w, V = la.eigh(H.dense(), _as_dense(H.mass))
        return SpectrumReport(w[:k].copy(), int(np.sum(w < 0)), H.lift(V[:, 0]), H.normalization)

    Hs, Ms = sp.csc_matrix(H.matrix), sp.csc_matrix(H.mass)
    g = _gershgorin_lower(Hs)
    m_lo = max(_gershgorin_lower(Ms), 1e-300)
    m_hi = float(abs(Ms).sum(axis=1).max())
    bound = g / m_lo if g < 0 else g / m_hi
    sigma = bound - 1e-3 * (1.0 + abs(bound))
    try:
        w, V = spla.eigsh(Hs, k=k, M=Ms, sigma=sigma, which="LM", tol=1e-12, maxiter=5000)
    except spla.ArpackNoConvergence as exc:
        res = np.nan
        if exc.eigenvalues.size:
            v = exc.eigenvectors[:, 0]
            res = float(np.linalg.norm(Hs @ v - exc.eigenvalues[0] * (Ms @ v)))
        raise SpectrumError("shift-invert Lanczos did not converge", res) from exc
    order = np.argsort(w)
    w, V = w[order], V[:, order]
    logger.debug("sparse spectrum: sigma=%.4g, lowest=%.6g", sigma, w[0])
    return SpectrumReport(w, int(np.sum(w < 0)), H.lift(V[:, 0]), H.normalization, index_exact=False)
