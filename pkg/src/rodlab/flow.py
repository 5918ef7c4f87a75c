"""Implicit L2-gradient flow of the discrete rod energy.

Each step minimizes ``V(y) + |y - x_j|_M^2 / (2 dt)`` over the free nodal
values by damped Newton, which is exactly the backward-Euler update of
the semi-discrete flow and cannot increase the energy. Isoperimetric
constraints are restored after the gradient step by moving along the
L2-gradients of the constraint functionals, with the multipliers found
by Newton's method.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse.linalg as spla

from . import fem
from .equilibria import BoundarySpec
from .rod import EulerField, RodParams, ValidationError, energy

logger = logging.getLogger(__name__)


class FlowError(RuntimeError):
    """A time step could not be completed; carries what was computed so far."""

    def __init__(self, msg: str, state: "FlowState | None" = None, trajectory=None, diagnostics=None):
        super().__init__(msg)
        self.state = state
        self.trajectory = trajectory or []
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class FlowConfig:
    dt: float = 1e-3
    tol: float = 1e-10
    max_steps: int = 1000
    constraint_newton_tol: float = 1e-10
    constraint_newton_max_iters: int = 30
    mass_matrix: str = "consistent"
    newton_tol: float = 1e-10
    newton_max_iters: int = 50
    max_halvings: int = 10
    snapshot_every: int = 0

    def __post_init__(self):
        for name in ("dt", "tol", "constraint_newton_tol", "newton_tol"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"flow.{name} must be positive")
        for name in ("max_steps", "constraint_newton_max_iters", "newton_max_iters"):
            if int(getattr(self, name)) < 1:
                raise ValidationError(f"flow.{name} must be at least 1")
        if self.max_halvings < 0 or self.snapshot_every < 0:
            raise ValidationError("flow.max_halvings and flow.snapshot_every must be non-negative")
        if self.mass_matrix not in ("consistent", "lumped"):
            raise ValidationError(f"flow.mass_matrix must be 'consistent' or 'lumped', got {self.mass_matrix!r}")

    @property
    def lumped(self) -> bool:
        return self.mass_matrix == "lumped"


@dataclass(frozen=True)
class FlowState:
    step_index: int
    time: float
    field: EulerField
    dt: float
    multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))
    energy_history: tuple = ()
    constraint_residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def energy(self) -> float:
        return self.energy_history[-1]

    @classmethod
    def initial(cls, f: EulerField, params: RodParams, dt: float, constraints: dict | None = None) -> "FlowState":
        constraints = constraints or {}
        res = np.array([fem.constraint_value(f, a) - t for a, t in sorted(constraints.items())])
        return cls(0, 0.0, f, dt, np.zeros(len(constraints)), (energy(f, params),), res)


@dataclass
class TrajectoryRecord:
    step: int
    time: float
    energy: float
    dt: float
    constraint_residuals: np.ndarray
    multipliers: np.ndarray
    snapshot: EulerField | None = None


@dataclass
class FlowResult:
    state: FlowState
    trajectory: list
    converged: bool

    @property
    def energies(self) -> np.ndarray:
        return np.asarray(self.state.energy_history)


# -- spatial operators ---------------------------------------------------------------


def _free_mass(f: EulerField, bcs: BoundarySpec, lumped: bool):
    free = bcs.free_dofs(f.grid.n_nodes)
    M = fem.mass_matrix(f.grid, lumped)[free][:, free].tocsc()
    return free, M


def _riesz(M, free, n_nodes, rhs_full) -> np.ndarray:
    out = np.zeros(3 * n_nodes)
    out[free] = spla.spsolve(M, rhs_full[free])
    return out


def _split(x, n):
    return x[:n].copy(), x[n : 2 * n].copy(), x[2 * n :].copy()


def discrete_gradient(f: EulerField, params: RodParams, bcs: BoundarySpec, lumped: bool = False):
    """L2 Riesz representative of the energy derivative, zero on clamped dofs."""
    free, M = _free_mass(f, bcs, lumped)
    return _split(_riesz(M, free, f.grid.n_nodes, fem.energy_gradient(f, params)), f.grid.n_nodes)


def constraint_residual(f: EulerField, constraint: str, target: float = 0.0) -> float:
    """``int d3[constraint] ds - target``."""
    if constraint not in fem.AXES:
        raise KeyError(f"unknown constraint {constraint!r}; expected x, y or z")
    return fem.constraint_value(f, constraint) - target


# -- time stepping -------------------------------------------------------------------


class _NewtonFailure(Exception):
    pass


def _backward_euler(f: EulerField, params: RodParams, bcs: BoundarySpec, cfg: FlowConfig, dt: float) -> EulerField:
    """Minimize ``V(y) + |y - x|_M^2 / (2 dt)`` starting from ``y = x``."""
    grid = f.grid
    free, M = _free_mass(f, bcs, cfg.lumped)
    x0 = f.as_vector()
    y = x0.copy()

    hit_guard = []

    def merit(v):
        try:
            g = EulerField.from_vector(grid, v, f.theta_min)
        except ValidationError:
            hit_guard.append(True)
            return np.inf, None
        d = (v - x0)[free]
        return energy(g, params) + d @ (M @ d) / (2 * dt), g

    phi, cur = merit(y)
    for _ in range(cfg.newton_max_iters):
        d = (y - x0)[free]
        G = M @ d / dt + fem.energy_gradient(cur, params)[free]
        if np.max(np.abs(G)) <= cfg.newton_tol:
            return cur
        J = (fem.energy_hessian(cur, params)[free][:, free] + M / dt).tocsc()
        p = spla.spsolve(J, -G)
        if np.max(np.abs(p)) <= 16 * np.finfo(float).eps * max(1.0, np.max(np.abs(y))):
            # the M/dt term puts the residual floor above newton_tol for tiny dt
            return cur
        slope = G @ p
        shift = 0.0
        while not (np.all(np.isfinite(p)) and slope < 0):
            shift = max(10 * shift, 1.0 / dt)
            p = spla.spsolve((J + shift * M).tocsc(), -G)
            slope = G @ p
            if shift > 1e12 / dt:
                raise _NewtonFailure("no descent direction")
        t = 1.0
        while True:
            trial = y.copy()
            trial[free] += t * p
            phi_t, g = merit(trial)
            # slack absorbs roundoff in phi once the Newton decrement is negligible
            if phi_t <= phi + 1e-4 * t * slope + 64 * np.finfo(float).eps * max(1.0, abs(phi)):
                break
            t *= 0.5
            if t < 1e-10:
                raise _NewtonFailure("line search blocked by the polar guard" if hit_guard else "line search failed")
        y, phi, cur = trial, phi_t, g
    near = " (line search touched the polar guard)" if hit_guard else ""
    raise _NewtonFailure(f"no convergence in {cfg.newton_max_iters} iterations{near}")


def _try_step(state: FlowState, params: RodParams, bcs: BoundarySpec, config: FlowConfig, dt: float) -> FlowState:
    new = _backward_euler(state.field, params, bcs, config, dt)
    return replace(
        state,
        step_index=state.step_index + 1,
        time=state.time + dt,
        field=new,
        dt=dt,
        energy_history=state.energy_history + (energy(new, params),),
    )


def _step_failure(state: FlowState, config: FlowConfig, dt: float, reason: str) -> FlowError:
    theta = state.field.theta
    return FlowError(
        f"step {state.step_index + 1} failed after {config.max_halvings} halvings of dt: {reason}",
        state,
        diagnostics={"dt": dt, "reason": reason, "theta_min": float(theta.min()), "theta_min_node": int(theta.argmin())},
    )


def implicit_step(state: FlowState, params: RodParams, bcs: BoundarySpec, config: FlowConfig) -> FlowState:
    """One backward-Euler step of size ``config.dt``, halved on Newton failure.

    Halving applies to this step only; the returned state records the
    step size actually used.
    """
    dt, reason = config.dt, ""
    for _ in range(config.max_halvings + 1):
        try:
            return _try_step(state, params, bcs, config, dt)
        except _NewtonFailure as exc:
            logger.debug("implicit step %d failed at dt=%g: %s", state.step_index + 1, dt, exc)
            reason = str(exc)
            dt /= 2
    raise _step_failure(state, config, dt, reason)


def _constraint_correction(pred: EulerField, f: EulerField, bcs, cfg, dt, constraints, axes):
    free, M = _free_mass(f, bcs, cfg.lumped)
    n = f.grid.n_nodes
    v_iso = [-_riesz(M, free, n, fem.constraint_gradient(f, a)) for a in axes]
    targets = np.array([constraints[a] for a in axes])
    base = pred.as_vector()
    lam = np.zeros(len(axes))
    V = np.array(v_iso)
    for _ in range(cfg.constraint_newton_max_iters):
        x = base + dt * lam @ V
        try:
            g = EulerField.from_vector(f.grid, x, f.theta_min)
        except ValidationError as exc:
            raise _NewtonFailure(str(exc)) from exc
        rho = np.array([fem.constraint_value(g, a) for a in axes]) - targets
        if np.max(np.abs(rho)) <= cfg.constraint_newton_tol:
            return g, lam, rho
        J = dt * np.array([[fem.constraint_gradient(g, a) @ v for v in V] for a in axes])
        try:
            lam = lam - np.linalg.solve(J, rho)
        except np.linalg.LinAlgError as exc:
            raise _NewtonFailure("singular multiplier Jacobian") from exc
    raise _NewtonFailure(f"multiplier Newton stalled, residual {np.max(np.abs(rho)):.3e}")


def constrained_step(
    state: FlowState, params: RodParams, bcs: BoundarySpec, config: FlowConfig, constraints: dict | None
) -> FlowState:
    """Gradient step followed by multiplier correction onto the constraint set.

    ``constraints`` maps an axis to the target value of its integral. The
    velocity is ``v_V + sum_k lambda_k v_k`` where ``v_V`` is the implicit
    gradient velocity and ``v_k`` the negative L2-gradient of constraint
    ``k`` at the start of the step.
    """
    if not constraints:
        return implicit_step(state, params, bcs, config)
    axes = sorted(constraints)
    dt, reason = config.dt, ""
    for _ in range(config.max_halvings + 1):
        try:
            stepped = _try_step(state, params, bcs, config, dt)
            g, lam, rho = _constraint_correction(stepped.field, state.field, bcs, config, dt, constraints, axes)
        except _NewtonFailure as exc:
            logger.debug("constrained step %d failed at dt=%g: %s", state.step_index + 1, dt, exc)
            reason = str(exc)
            dt /= 2
            continue
        return replace(
            stepped,
            field=g,
            multipliers=lam,
            energy_history=state.energy_history + (energy(g, params),),
            constraint_residuals=rho,
        )
    raise _step_failure(state, config, dt, reason)


def resolve_targets(initial: EulerField, bcs: BoundarySpec, constraints: dict | None = None) -> dict:
    """Constraint targets, with ``None`` replaced by the initial field's value."""
    src = bcs.iso_targets if constraints is None else constraints
    return {a: (fem.constraint_value(initial, a) if t is None else float(t)) for a, t in src.items()}


def run_flow(
    initial: EulerField,
    params: RodParams,
    bcs: BoundarySpec,
    config: FlowConfig,
    constraints: dict | None = None,
) -> FlowResult:
    """Iterate until ``|V_{j+1} - V_j| < config.tol`` or ``max_steps``.

    Targets default to ``bcs.iso_targets``; a ``None`` target keeps the
    initial value of that integral fixed.
    """
    targets = resolve_targets(initial, bcs, constraints)
    state = FlowState.initial(initial, params, config.dt, targets)
    traj = [_record(state, config)]
    converged = False
    for _ in range(config.max_steps):
        try:
            new = constrained_step(state, params, bcs, config, targets)
        except FlowError as exc:
            exc.trajectory = traj
            raise
        traj.append(_record(new, config))
        res = abs(new.energy_history[-1] - new.energy_history[-2])
        state = new
        if res < config.tol:
            converged = True
            break
    if config.snapshot_every and traj[-1].snapshot is None:
        traj[-1].snapshot = state.field
    logger.info("flow stopped after %d steps, energy %.12g, converged=%s", state.step_index, state.energy, converged)
    return FlowResult(state, traj, converged)


def _record(state: FlowState, cfg: FlowConfig) -> TrajectoryRecord:
    snap = None
    if cfg.snapshot_every and state.step_index % cfg.snapshot_every == 0:
        snap = state.field
    return TrajectoryRecord(
        state.step_index,
        state.time,
        state.energy,
        state.dt,
        np.asarray(state.constraint_residuals, dtype=float),
        np.asarray(state.multipliers, dtype=float),
        snap,
    )


def explicit_step(f: EulerField, params: RodParams, bcs: BoundarySpec, dt: float, lumped: bool = False) -> EulerField:
    """Forward-Euler step ``x - dt M^{-1} grad V``; used for consistency checks."""
    g = np.concatenate(discrete_gradient(f, params, bcs, lumped))
    return EulerField.from_vector(f.grid, f.as_vector() - dt * g, f.theta_min)


__all__ = [
    "FlowConfig",
    "FlowError",
    "FlowResult",
    "FlowState",
    "TrajectoryRecord",
    "constrained_step",
    "constraint_residual",
    "discrete_gradient",
    "explicit_step",
    "implicit_step",
    "run_flow",
]
