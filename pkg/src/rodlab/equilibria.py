"""Exact equilibrium families and the boundary data they satisfy."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rod import THETA_MIN, EulerField, Grid, RodParams, ValidationError

ANGLES = ("theta", "phi", "psi")
NEUMANN = "neumann"


@dataclass(frozen=True)
class EndCondition:
    """Boundary condition at one end of one angle.

    ``value is None`` means Neumann (natural); otherwise Dirichlet with
    the given value.
    """

    value: float | None = None

    @property
    def is_dirichlet(self) -> bool:
        return self.value is not None


def dirichlet(value: float) -> EndCondition:
    return EndCondition(float(value))


def neumann() -> EndCondition:
    return EndCondition(None)


@dataclass(frozen=True)
class BoundarySpec:
    """Per-angle, per-end boundary conditions plus isoperimetric constraints.

    ``conditions[angle] = (left, right)``. ``iso_targets`` maps a
    constraint axis (``"x"``, ``"y"``, ``"z"``) to the value the integral
    of that component of ``d3`` must keep; ``None`` means "whatever the
    initial field has".
    """

    conditions: dict
    iso_targets: dict = field(default_factory=dict)

    def __post_init__(self):
        missing = set(ANGLES) - set(self.conditions)
        if missing:
            raise ValidationError(f"boundary spec missing angles {sorted(missing)}")
        for a in ANGLES:
            pair = tuple(self.conditions[a])
            if len(pair) != 2 or not all(isinstance(c, EndCondition) for c in pair):
                raise ValidationError(f"{a}: expected (left, right) EndCondition pair")
        for a in ("left", "right"):
            i = 0 if a == "left" else 1
            v = self.conditions["theta"][i].value
            if v is not None and not (THETA_MIN <= v <= np.pi - THETA_MIN):
                raise ValidationError(f"theta Dirichlet value {v} at {a} end hits the polar singularity")
        bad = set(self.iso_targets) - {"x", "y", "z"}
        if bad:
            raise ValidationError(f"unknown isoperimetric constraints {sorted(bad)}")
        if len(self.iso_targets) == 3 and all(v == 0 for v in self.iso_targets.values()):
            raise ValidationError("closing all three coordinates describes a closed rod, which is unsupported")

    @property
    def iso_constraints(self) -> tuple[str, ...]:
        return tuple(sorted(self.iso_targets))

    def kind(self, angle: str) -> str:
        """``'dirichlet'``, ``'neumann'`` or ``'mixed'`` for one angle's two ends."""
        left, right = self.conditions[angle]
        if left.is_dirichlet and right.is_dirichlet:
            return "dirichlet"
        if not left.is_dirichlet and not right.is_dirichlet:
            return "neumann"
        return "mixed"

    def dirichlet_mask(self, n_nodes: int) -> np.ndarray:
        """Boolean mask over stacked nodal dofs that are fixed."""
        mask = np.zeros(3 * n_nodes, dtype=bool)
        for k, a in enumerate(ANGLES):
            left, right = self.conditions[a]
            mask[k * n_nodes] = left.is_dirichlet
            mask[(k + 1) * n_nodes - 1] = right.is_dirichlet
        return mask

    def free_dofs(self, n_nodes: int) -> np.ndarray:
        return np.flatnonzero(~self.dirichlet_mask(n_nodes))

    def with_iso(self, targets: dict) -> "BoundarySpec":
        return BoundarySpec(dict(self.conditions), dict(targets))

    def with_conditions(self, **angles) -> "BoundarySpec":
        cond = dict(self.conditions)
        cond.update(angles)
        return BoundarySpec(cond, dict(self.iso_targets))

    @classmethod
    def from_field(cls, field: EulerField, kinds: dict | None = None, iso: dict | None = None) -> "BoundarySpec":
        """Dirichlet data read off ``field``'s endpoints, Neumann where ``kinds[angle]`` says so."""
        kinds = kinds or {}
        cond = {}
        for a in ANGLES:
            vals = getattr(field, a)
            k = kinds.get(a, "dirichlet")
            ends = (k, k) if isinstance(k, str) else tuple(k)
            cond[a] = tuple(
                dirichlet(vals[i]) if e == "dirichlet" else neumann() for i, e in zip((0, -1), ends)
            )
        return cls(cond, dict(iso or {}))


def trivial_bcs(M: float, kind: str = "dirichlet", iso: dict | None = None) -> BoundarySpec:
    """The three classical problems for the straight twisted rod.

    ``kind`` is ``"dirichlet"`` (clamped), ``"neumann"`` (theta, phi free)
    or ``"mixed"`` (theta clamped, phi free). psi is always clamped.
    """
    th = {"dirichlet": "dirichlet", "neumann": NEUMANN, "mixed": "dirichlet"}
    ph = {"dirichlet": "dirichlet", "neumann": NEUMANN, "mixed": NEUMANN}
    if kind not in th:
        raise ValidationError(f"unknown boundary problem {kind!r}")
    pair = lambda v0, v1, k: (dirichlet(v0), dirichlet(v1)) if k == "dirichlet" else (neumann(), neumann())  # noqa: E731
    return BoundarySpec(
        {
            "theta": pair(np.pi / 2, np.pi / 2, th[kind]),
            "phi": pair(0.0, 0.0, ph[kind]),
            "psi": (dirichlet(0.0), dirichlet(2 * np.pi * M)),
        },
        dict(iso or {}),
    )


def trivial_state(grid: Grid, M: float) -> EulerField:
    """Straight rod along x with ``M`` full end rotations."""
    s = grid.nodes
    return EulerField(grid, np.full_like(s, np.pi / 2), np.zeros_like(s), 2 * np.pi * M * s)


# -- helices ---------------------------------------------------------------------


@dataclass(frozen=True)
class HelixSpec:
    theta0: float
    lam: float
    params: RodParams
    xi: float = 0.0

    def __post_init__(self):
        if not (THETA_MIN <= self.theta0 <= np.pi - THETA_MIN):
            raise ValidationError(f"helix theta0={self.theta0} must lie strictly inside (0, pi)")
        if self.lam == 0:
            raise ValidationError("helix winding lambda must be nonzero: the psi slope divides by lambda")

    @property
    def _FL2(self) -> float:
        """Signed vertical load ``F_z L^2``."""
        return float(self.params.load[2])

    @property
    def psi_slope(self) -> float:
        A, C = self.params.bend_A, self.params.twist_C
        lam, t0 = self.lam, self.theta0
        return 2 * np.pi * lam * np.cos(t0) * (A / C - 1) - self._FL2 / (2 * np.pi * lam * C)

    @property
    def twist(self) -> float:
        A, C = self.params.bend_A, self.params.twist_C
        return 2 * A / C * np.pi * self.lam * np.cos(self.theta0) - self._FL2 / (2 * np.pi * self.lam * C)

    @property
    def curvature(self) -> float:
        return 2 * np.pi * self.lam * np.sin(self.theta0)

    @property
    def torsion(self) -> float:
        return 2 * np.pi * self.lam * np.cos(self.theta0)


def helix_state(grid: Grid, spec: HelixSpec) -> tuple[EulerField, BoundarySpec]:
    """Helical equilibrium under a vertical load and its clamped boundary data.

    Only the z-component of ``spec.params.force`` is meaningful here.
    """
    s = grid.nodes
    f = EulerField(
        grid,
        np.full_like(s, spec.theta0),
        2 * np.pi * spec.lam * s,
        spec.psi_slope * s + spec.xi,
    )
    return f, BoundarySpec.from_field(f)


# -- localized buckling ------------------------------------------------------------


@dataclass(frozen=True)
class SolitonSpec:
    """Localized buckling profile on ``[-half_length, half_length]``.

    ``stiffness_ratio_b=None`` selects ``C / (2C - A)``, the only value
    for which the profile solves the Euler-Lagrange equations.
    """

    tau: float
    half_length: float = 10.0
    stiffness_ratio_b: float | None = None

    def __post_init__(self):
        if not self.tau > 0:
            raise ValidationError(f"soliton tau must be positive, got {self.tau}")
        if not self.half_length > 0:
            raise ValidationError(f"soliton half_length must be positive, got {self.half_length}")

    @property
    def z1(self) -> float:
        t2 = self.tau**2
        return (t2 - 1) / (t2 + 1)

    def b(self, params: RodParams) -> float:
        if self.stiffness_ratio_b is not None:
            return float(self.stiffness_ratio_b)
        A, C = params.bend_A, params.twist_C
        if 2 * C == A:
            raise ValidationError("default b = C/(2C - A) is undefined for A = 2C")
        return C / (2 * C - A)

    def force(self, params: RodParams) -> np.ndarray:
        """Vertical tension holding the profile in equilibrium.

        The load enters the energy as ``+F . d3``, so the equilibrium
        force points along ``-z`` with magnitude ``2A / (1 - z1)``.
        """
        return np.array([0.0, 0.0, -2.0 * params.bend_A / (1.0 - self.z1)])

    def angles(self, s: np.ndarray, params: RodParams):
        tau = self.tau
        sech2 = 1.0 / np.cosh(s) ** 2
        theta = np.arccos(1.0 - 2.0 / (1.0 + tau**2) * sech2)
        base = np.arctan(np.tanh(s) / tau)
        phi = base + tau * s
        psi = base + (3.0 - 2.0 / self.b(params)) * tau * s
        return theta, phi, psi


def soliton_state(
    grid: Grid, spec: SolitonSpec, params: RodParams | None = None, iso=("x", "y")
) -> tuple[EulerField, BoundarySpec, np.ndarray]:
    """Localized buckling equilibrium, clamped, with fixed endpoint coordinates.

    Returns the field, its boundary spec (all angles clamped at their own
    values; ``iso`` endpoint coordinates held at their initial values) and
    the equilibrium force. ``params.length_L`` should be 1: the profile is
    written in the physical arc length of ``grid``.
    """
    params = params or RodParams(1.0, 0.75, 1.0)
    if not np.isclose(grid.lower, -spec.half_length) or not np.isclose(grid.upper, spec.half_length):
        raise ValidationError(
            f"soliton grid must span [-{spec.half_length}, {spec.half_length}], got [{grid.lower}, {grid.upper}]"
        )
    theta, phi, psi = spec.angles(grid.nodes, params)
    try:
        f = EulerField(grid, theta, phi, psi)
    except ValidationError as exc:
        raise ValidationError(f"soliton profile leaves the admissible theta range: {exc}") from exc
    bcs = BoundarySpec.from_field(f, iso={a: None for a in iso})
    return f, bcs, spec.force(params)


def perturb(base: EulerField, direction, eps: float) -> EulerField:
    """``base + eps * (alpha, beta, gamma)`` with nodal direction arrays."""
    alpha, beta, gamma = (np.asarray(d, dtype=float) for d in direction)
    if eps == 0:
        return base
    return base.with_values(base.theta + eps * alpha, base.phi + eps * beta, base.psi + eps * gamma)
