"""Closed-form stability verdicts for the straight twisted rod and for helices.

Thresholds are expressed in terms of the scaled load ``F L^2``. Where the
sufficient conditions for stability and instability do not meet, the
verdict is ``"gap"``: neither is proved, and any spectral evidence must be
gathered numerically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from ..equilibria import BoundarySpec, HelixSpec
from ..rod import RodParams, ValidationError

STABLE, UNSTABLE, GAP = "stable", "unstable", "gap"
PI2 = np.pi**2


class UnsupportedBoundary(ValidationError):
    pass


@dataclass(frozen=True)
class StabilityVerdict:
    """Outcome of a closed-form classifier.

    ``value`` is the load measure compared against the thresholds;
    stability is proved for ``value < threshold_low`` and instability for
    ``value > threshold_high``. Both bounds refer to ``quantity``.
    """

    classification: str
    threshold_low: float
    threshold_high: float
    value: float
    source: str
    quantity: str = "F L^2"

    def as_dict(self) -> dict:
        return {
            "classification": self.classification,
            "threshold_low": self.threshold_low,
            "threshold_high": self.threshold_high,
            "value": self.value,
            "quantity": self.quantity,
            "source": self.source,
        }


def _verdict(value: float, low: float, high: float, source: str, quantity: str = "F L^2") -> StabilityVerdict:
    if value < low:
        cls = STABLE
    elif value > high:
        cls = UNSTABLE
    else:
        cls = GAP
    return StabilityVerdict(cls, low, high, value, source, quantity)


def clamped_threshold(params: RodParams) -> float:
    A, C, M = params.bend_A, params.twist_C, params.twist_M
    return A * PI2 * (1.0 - (M * C / A) ** 2)


def neumann_threshold(params: RodParams) -> float:
    A, C, M = params.bend_A, params.twist_C, params.twist_M
    if A < 2 * M * C:
        return -4.0 * PI2 * M**2 * C**2 / A
    return -2.0 * PI2 * M * C


def mixed_thresholds(params: RodParams) -> tuple[float, float]:
    A, C, M = params.bend_A, params.twist_C, params.twist_M
    lam = 2 * M * C / A
    low = min(PI2 * (A - 4 * M**2 * C**2 / A), 0.0)
    high = A * PI2 * (1 - lam**2) / (1 + lam**2)
    return low, high


def _is_odd_at_least_three(r: float, tol: float = 1e-12) -> bool:
    n = round(r)
    return abs(r - n) <= tol * max(1.0, abs(r)) and n >= 3 and n % 2 == 1


def _problem(bcs: BoundarySpec) -> str:
    if bcs.kind("psi") != "dirichlet":
        raise UnsupportedBoundary("psi must be clamped at both ends")
    th, ph = bcs.kind("theta"), bcs.kind("phi")
    if th == ph == "dirichlet":
        return "dirichlet"
    if th == ph == "neumann":
        return "neumann"
    if th == "dirichlet" and ph == "neumann":
        return "mixed"
    raise UnsupportedBoundary(f"no closed-form result for theta {th} / phi {ph}")


def classify_trivial(params: RodParams, bcs: BoundarySpec) -> StabilityVerdict:
    """Local stability of the straight twisted rod under terminal load ``F x``."""
    FL2 = float(params.load[0])
    problem = _problem(bcs)
    iso = set(bcs.iso_constraints)
    if iso:
        if problem != "dirichlet" or not iso <= {"y", "z"}:
            raise UnsupportedBoundary(f"constraints {sorted(iso)} only supported for the clamped problem with y/z")
        low = clamped_threshold(params)
        ratio = params.twist_M * params.twist_C / params.bend_A
        high = low if _is_odd_at_least_three(ratio) else np.inf
        return _verdict(FL2, low, high, "Prop 5")
    if problem == "dirichlet":
        t = clamped_threshold(params)
        return _verdict(FL2, t, t, "Prop 4")
    if problem == "neumann":
        return _verdict(FL2, neumann_threshold(params), np.inf, "Prop 6")
    low, high = mixed_thresholds(params)
    return _verdict(FL2, low, high, "Prop 7")


def classify_trivial_global(params: RodParams, alpha_bound: float) -> bool:
    """Whether the straight rod is the energy minimizer over a perturbation class.

    ``alpha_bound`` is the smallest value of ``cos(alpha)**2`` over the
    class, alpha being the polar-angle deviation.
    """
    if not 0.0 < alpha_bound <= 1.0:
        raise ValidationError(f"alpha_bound must lie in (0, 1], got {alpha_bound}")
    A, C, M = params.bend_A, params.twist_C, params.twist_M
    FL2 = float(params.load[0])
    return bool(alpha_bound > 4 * M * C / A and max(FL2, 0.0) < A * PI2 * alpha_bound - 4 * PI2 * M * C)


def _helix_stable_condition(x: float, A: float, lam: float) -> float:
    """Negative iff the sufficient stability condition holds for ``x = |F| L^2``."""
    q = x / (2 * np.pi * abs(lam))
    return q * (1 / A + 4 * PI2 * lam**2 / (A - q)) - PI2 * (1 - 4 * lam**2)


def helix_stable_load(spec: HelixSpec) -> float:
    """Largest ``|F| L^2`` below which the helix is proved stable (0 if none)."""
    A, lam = spec.params.bend_A, spec.lam
    if abs(lam) >= 0.5:
        return 0.0
    x_max = 2 * np.pi * abs(lam) * A
    hi = x_max * (1 - 1e-15)
    if _helix_stable_condition(hi, A, lam) < 0:
        return x_max
    return float(brentq(_helix_stable_condition, 0.0, hi, args=(A, lam), xtol=1e-14, rtol=1e-14))


def classify_helix(spec: HelixSpec) -> StabilityVerdict:
    """Verdict for a clamped helix under vertical load.

    ``threshold_low`` bounds ``|F| L^2`` (stable below); ``threshold_high``
    bounds ``F L^2 cos(theta0)`` (unstable above).
    """
    A, lam, t0 = spec.params.bend_A, spec.lam, spec.theta0
    FL2 = float(spec.params.load[2])
    x = abs(FL2)
    q = x / (2 * np.pi * abs(lam))
    high = 2 * A * PI2 * (1 - lam**2)
    quantity = "|F| L^2 (stable) / F L^2 cos(theta0) (unstable)"
    if FL2 == 0.0:
        stable = abs(lam) < 0.5
    else:
        stable = A > q and _helix_stable_condition(x, A, lam) < 0
    unstable = FL2 * np.cos(t0) > high
    cls = STABLE if stable else UNSTABLE if unstable else GAP
    return StabilityVerdict(cls, helix_stable_load(spec), high, FL2, "Prop 8", quantity)
