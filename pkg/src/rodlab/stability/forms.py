"""Analytic second-variation quadratic forms and the trivial-state spectrum.

Directions are given as callables so the forms can be integrated to near
machine precision by composite Gauss-Legendre quadrature, independently
of any finite-element discretization.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..equilibria import BoundarySpec, HelixSpec
from ..rod import Grid, RodParams, ValidationError

Fn = Callable[[np.ndarray], np.ndarray]


def _zero(s):
    return np.zeros_like(np.asarray(s, dtype=float))


@dataclass(frozen=True)
class Direction:
    """Perturbation ``(alpha, beta, gamma)`` with its arc-length derivatives."""

    alpha: Fn = _zero
    beta: Fn = _zero
    gamma: Fn = _zero
    dalpha: Fn = _zero
    dbeta: Fn = _zero
    dgamma: Fn = _zero
    breakpoints: np.ndarray | None = None

    @classmethod
    def from_nodal(cls, grid: Grid, alpha, beta, gamma) -> "Direction":
        """Piecewise-affine direction from nodal values."""
        s = grid.nodes
        vals = [np.asarray(v, dtype=float) for v in (alpha, beta, gamma)]
        slopes = [np.diff(v) / grid.h for v in vals]

        def interp(v):
            return lambda x: np.interp(x, s, v)

        def slope(d):
            return lambda x: d[np.clip(((np.asarray(x) - grid.lower) / grid.h).astype(int), 0, grid.n_cells - 1)]

        return cls(*(interp(v) for v in vals), *(slope(d) for d in slopes), breakpoints=s)

    def scaled(self, c: float) -> "Direction":
        f = [getattr(self, n) for n in ("alpha", "beta", "gamma", "dalpha", "dbeta", "dgamma")]
        return Direction(*(lambda x, g=g: c * g(x) for g in f), breakpoints=self.breakpoints)

    def __add__(self, other: "Direction") -> "Direction":
        names = ("alpha", "beta", "gamma", "dalpha", "dbeta", "dgamma")
        bp = self.breakpoints if other.breakpoints is None else other.breakpoints
        return Direction(
            *(lambda x, a=getattr(self, n), b=getattr(other, n): a(x) + b(x) for n in names), breakpoints=bp
        )

    def __sub__(self, other: "Direction") -> "Direction":
        return self + other.scaled(-1.0)

    def nodal(self, grid: Grid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        s = grid.nodes
        return self.alpha(s), self.beta(s), self.gamma(s)


def gauss_integrate(f: Fn, a: float = 0.0, b: float = 1.0, panels: int = 200, order: int = 8, breakpoints=None) -> float:
    """Composite Gauss-Legendre quadrature of ``f`` over ``[a, b]``."""
    edges = np.asarray(breakpoints, dtype=float) if breakpoints is not None else np.linspace(a, b, panels + 1)
    x, w = np.polynomial.legendre.leggauss(order)
    lo, hi = edges[:-1, None], edges[1:, None]
    pts = 0.5 * (hi - lo) * x[None, :] + 0.5 * (hi + lo)
    wts = 0.5 * (hi - lo) * w[None, :]
    return float(np.sum(wts * f(pts)))


def _check_admissible(d: Direction, bcs: BoundarySpec | None, a: float, b: float, tol: float = 1e-10):
    ends = np.array([a, b])
    g = d.gamma(ends)
    if np.any(np.abs(g) > tol):
        raise ValidationError(f"gamma must vanish at both ends, got {g}")
    if bcs is None:
        checks = {"alpha": (True, True), "beta": (True, True)}
    else:
        checks = {
            "alpha": tuple(c.is_dirichlet for c in bcs.conditions["theta"]),
            "beta": tuple(c.is_dirichlet for c in bcs.conditions["phi"]),
        }
    for name, (left, right) in checks.items():
        v = getattr(d, name)(ends)
        for fixed, val, side in zip((left, right), v, ("left", "right")):
            if fixed and abs(val) > tol:
                raise ValidationError(f"{name} must vanish at the clamped {side} end, got {val}")


def second_variation_trivial(d: Direction, params: RodParams, bcs: BoundarySpec | None = None) -> float:
    """Second variation of the energy about the straight twisted rod on ``[0, 1]``."""
    _check_admissible(d, bcs, 0.0, 1.0)
    A, C, M = params.bend_A, params.twist_C, params.twist_M
    FL2 = params.load[0]

    def integrand(s):
        al, be = d.alpha(s), d.beta(s)
        return (
            A * (d.dalpha(s) ** 2 + d.dbeta(s) ** 2)
            + C * d.dgamma(s) ** 2
            - 4 * np.pi * M * C * al * d.dbeta(s)
            - FL2 * (al**2 + be**2)
        )

    return gauss_integrate(integrand, breakpoints=d.breakpoints)


def second_variation_helix(d: Direction, spec: HelixSpec) -> float:
    """Second variation about a helical equilibrium, all angles clamped."""
    _check_admissible(d, None, 0.0, 1.0)
    A, C = spec.params.bend_A, spec.params.twist_C
    FL2 = spec.params.load[2]
    lam, t0 = spec.lam, spec.theta0
    st, ct = np.sin(t0), np.cos(t0)

    def integrand(s):
        al, da, db, dg = d.alpha(s), d.dalpha(s), d.dbeta(s), d.dgamma(s)
        bend = A * (da**2 + db**2 * st**2 + 4 * np.pi * lam * al * db * st * ct - 4 * np.pi**2 * lam**2 * al**2 * st**2)
        load = FL2 / (np.pi * lam) * al * db * st
        twist = C * (dg + db * ct - 2 * np.pi * lam * al * st) ** 2
        return bend + load + twist

    return gauss_integrate(integrand, breakpoints=d.breakpoints)


# -- standard directions ------------------------------------------------------------


def _phase(params: RodParams) -> float:
    return np.pi * params.twist_M * params.twist_C / params.bend_A


def trivial_mode(m: int, params: RodParams, family: int = 1) -> Direction:
    """Eigenfunction of the clamped trivial-state operator.

    ``family=1`` is ``sin(m pi s) (cos ks, sin ks)``, ``family=2`` the
    same envelope rotated by a quarter turn, with ``k = pi M C / A``.
    """
    k = _phase(params)
    mp = m * np.pi
    if family == 1:
        a = lambda s: np.sin(mp * s) * np.cos(k * s)  # noqa: E731
        b = lambda s: np.sin(mp * s) * np.sin(k * s)  # noqa: E731
        da = lambda s: mp * np.cos(mp * s) * np.cos(k * s) - k * np.sin(mp * s) * np.sin(k * s)  # noqa: E731
        db = lambda s: mp * np.cos(mp * s) * np.sin(k * s) + k * np.sin(mp * s) * np.cos(k * s)  # noqa: E731
    elif family == 2:
        a = lambda s: -np.sin(mp * s) * np.sin(k * s)  # noqa: E731
        b = lambda s: np.sin(mp * s) * np.cos(k * s)  # noqa: E731
        da = lambda s: -mp * np.cos(mp * s) * np.sin(k * s) - k * np.sin(mp * s) * np.cos(k * s)  # noqa: E731
        db = lambda s: mp * np.cos(mp * s) * np.cos(k * s) - k * np.sin(mp * s) * np.sin(k * s)  # noqa: E731
    else:
        raise ValueError("family must be 1 or 2")
    return Direction(alpha=a, beta=b, dalpha=da, dbeta=db)


def threshold_direction(params: RodParams) -> Direction:
    """Instability witness at the clamped threshold (first mode, first family)."""
    return trivial_mode(1, params, family=1)


def helix_witness(spec: HelixSpec) -> Direction:
    """Direction along which the helix second variation is ``2A pi^2 (1 - lam^2) - F L^2 cos(theta0)``."""
    lam, t0 = spec.lam, spec.theta0
    cb = lam * np.cos(t0) / np.sin(t0)
    cg = lam / np.sin(t0)
    tp = 2 * np.pi
    return Direction(
        alpha=lambda s: np.sin(tp * s),
        beta=lambda s: cb * (np.cos(tp * s) - 1),
        gamma=lambda s: cg * (1 - np.cos(tp * s)),
        dalpha=lambda s: tp * np.cos(tp * s),
        dbeta=lambda s: -cb * tp * np.sin(tp * s),
        dgamma=lambda s: cg * tp * np.sin(tp * s),
    )


@dataclass(frozen=True)
class TrivialModes:
    m: int
    first: Direction
    second: Direction
    eigenvalue: float


def trivial_eigenvalue(m: int, params: RodParams) -> float:
    A, C, M = params.bend_A, params.twist_C, params.twist_M
    return A * m**2 * np.pi**2 - np.pi**2 * M**2 * C**2 / A - params.load[0]


def analytic_modes_trivial(m: int, params: RodParams) -> TrivialModes:
    if m < 1 or int(m) != m:
        raise ValidationError(f"mode number must be a positive integer, got {m}")
    return TrivialModes(m, trivial_mode(m, params, 1), trivial_mode(m, params, 2), trivial_eigenvalue(m, params))


def critical_forces(params: RodParams, m_max: int) -> np.ndarray:
    """Forces at which the clamped straight rod gains its m-th unstable pair."""
    A, C, M, L = params.bend_A, params.twist_C, params.twist_M, params.length_L
    m = np.arange(1, m_max + 1)
    return (A * m**2 * np.pi**2 - np.pi**2 * M**2 * C**2 / A) / L**2
