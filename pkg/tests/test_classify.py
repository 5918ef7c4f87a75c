import numpy as np
import pytest

from rodlab.equilibria import HelixSpec, dirichlet, helix_state, neumann, trivial_bcs, trivial_state
from rodlab.rod import Grid, RodParams, ValidationError
from rodlab.stability import (
    GAP,
    STABLE,
    UNSTABLE,
    UnsupportedBoundary,
    assemble_hessian,
    classify_helix,
    classify_trivial,
    classify_trivial_global,
    smallest_eigenvalue,
)
from rodlab.stability.classify import helix_stable_load

PI2 = np.pi**2


def p(F, M=1.0, A=1.0, C=0.75, L=1.0):
    return RodParams(A, C, L, (F, 0, 0), M)


class TestDirichlet:
    def test_example(self):
        v = classify_trivial(p(4.0), trivial_bcs(1.0))
        assert v.classification == STABLE
        assert v.threshold_low == pytest.approx(4.3179, abs=1e-4)
        assert v.source == "Prop 4"
        assert classify_trivial(p(5.0), trivial_bcs(1.0)).classification == UNSTABLE

    def test_exact_threshold_is_gap(self):
        t = PI2 * (1 - 0.75**2)
        assert classify_trivial(p(t), trivial_bcs(1.0)).classification == GAP

    def test_length_scaling(self):
        # the verdict depends on F L^2
        v = classify_trivial(p(1.2, L=2.0), trivial_bcs(1.0))
        assert v.value == pytest.approx(4.8)
        assert v.classification == UNSTABLE


class TestNeumann:
    def test_first_branch(self):
        # A < 2MC: threshold -4 pi^2 M^2 C^2 / A = -(9/4) pi^2
        v = classify_trivial(p(-22.3), trivial_bcs(1.0, "neumann"))
        assert v.threshold_low == pytest.approx(-9 / 4 * PI2)
        assert v.classification == STABLE
        assert classify_trivial(p(-22.1), trivial_bcs(1.0, "neumann")).classification == GAP
        assert v.source == "Prop 6"

    def test_second_branch(self):
        # A > 2MC: threshold -2 pi^2 M C
        v = classify_trivial(p(-5.0, M=0.5, A=1.0, C=0.75), trivial_bcs(0.5, "neumann"))
        assert v.threshold_low == pytest.approx(-2 * PI2 * 0.5 * 0.75)
        assert v.classification == GAP
        assert np.isinf(v.threshold_high)


class TestMixed:
    def test_example(self):
        bcs = trivial_bcs(1.0, "mixed")
        v = classify_trivial(p(0.0), bcs)
        assert v.threshold_low == pytest.approx(-5 / 4 * PI2)
        assert v.threshold_high == pytest.approx(-PI2 * 1.25 / 3.25)
        assert v.source == "Prop 7"
        assert v.classification == UNSTABLE
        assert classify_trivial(p(-13.0), bcs).classification == STABLE
        assert classify_trivial(p(-8.0), bcs).classification == GAP

    def test_sharp_when_balanced(self):
        # A = 2MC: both thresholds are zero
        v = classify_trivial(RodParams(1.0, 1.0, 1.0, (0.1, 0, 0), 0.5), trivial_bcs(0.5, "mixed"))
        assert v.threshold_low == pytest.approx(0.0, abs=1e-12)
        assert v.threshold_high == pytest.approx(0.0, abs=1e-12)

    def test_reversed_mixed_unsupported(self):
        bcs = trivial_bcs(1.0).with_conditions(theta=(neumann(), neumann()))
        with pytest.raises(UnsupportedBoundary):
            classify_trivial(p(0.0), bcs)

    def test_psi_must_be_clamped(self):
        bcs = trivial_bcs(1.0).with_conditions(psi=(dirichlet(0.0), neumann()))
        with pytest.raises(UnsupportedBoundary):
            classify_trivial(p(0.0), bcs)


class TestIsoperimetric:
    def test_stable_below(self):
        v = classify_trivial(p(4.0), trivial_bcs(1.0, iso={"y": 0.0, "z": 0.0}))
        assert v.classification == STABLE
        assert v.source == "Prop 5"

    def test_gap_above_generic_ratio(self):
        v = classify_trivial(p(5.0), trivial_bcs(1.0, iso={"y": 0.0, "z": 0.0}))
        assert v.classification == GAP
        assert np.isinf(v.threshold_high)

    def test_unstable_above_odd_ratio(self):
        # MC/A = 3
        params = RodParams(1.0, 1.0, 1.0, (0.0, 0, 0), 3.0)
        t = PI2 * (1 - 9)
        v = classify_trivial(params.with_force((t + 1.0, 0, 0)), trivial_bcs(3.0, iso={"y": 0.0, "z": 0.0}))
        assert v.threshold_high == pytest.approx(t)
        assert v.classification == UNSTABLE

    def test_even_ratio_is_gap(self):
        params = RodParams(1.0, 1.0, 1.0, (0.0, 0, 0), 2.0)
        t = PI2 * (1 - 4)
        v = classify_trivial(params.with_force((t + 1.0, 0, 0)), trivial_bcs(2.0, iso={"y": 0.0, "z": 0.0}))
        assert v.classification == GAP

    def test_unsupported_combinations(self):
        with pytest.raises(UnsupportedBoundary):
            classify_trivial(p(0.0), trivial_bcs(1.0, iso={"x": 1.0}))
        with pytest.raises(UnsupportedBoundary):
            classify_trivial(p(0.0), trivial_bcs(1.0, "neumann", iso={"y": 0.0}))


class TestGlobal:
    def test_example(self):
        with pytest.warns(UserWarning, match="physical range"):
            params = RodParams(1.0, 0.05, 1.0, (-1.0, 0, 0), 1.0)
        assert classify_trivial_global(params, 1.0) is True

    def test_first_condition_unsatisfiable(self):
        params = RodParams(1.0, 0.75, 1.0, (-10.0, 0, 0), 1.0)
        for ab in (0.1, 0.5, 1.0):
            assert classify_trivial_global(params, ab) is False

    def test_strict_boundary(self):
        with pytest.warns(UserWarning, match="physical range"):
            params = RodParams(1.0, 0.05, 1.0, (-1.0, 0, 0), 1.0)
        assert classify_trivial_global(params, 0.2) is False

    def test_invalid_bound(self):
        with pytest.raises(ValidationError):
            classify_trivial_global(p(0.0), 0.0)
        with pytest.raises(ValidationError):
            classify_trivial_global(p(0.0), 1.5)


class TestHelix:
    @pytest.mark.parametrize("lam,expected", [(0.4, STABLE), (-0.4, STABLE), (1.2, UNSTABLE), (-1.2, UNSTABLE), (0.7, GAP)])
    def test_unloaded(self, lam, expected):
        v = classify_helix(HelixSpec(np.pi / 3, lam, RodParams()))
        assert v.classification == expected
        assert v.source == "Prop 8"

    def test_loaded_conditions(self):
        A, lam, t0 = 1.0, 0.3, 1.0
        for F in (0.05, 0.3, 1.0, 3.0, -0.2, 40.0, -40.0):
            spec = HelixSpec(t0, lam, RodParams(A, 0.75, 1.0, (0, 0, F)))
            q = abs(F) / (2 * np.pi * abs(lam))
            stable = A > q and q * (1 / A + 4 * PI2 * lam**2 / (A - q)) < PI2 * (1 - 4 * lam**2)
            unstable = F * np.cos(t0) > 2 * A * PI2 * (1 - lam**2)
            expected = STABLE if stable else UNSTABLE if unstable else GAP
            assert classify_helix(spec).classification == expected

    def test_stable_load_is_boundary(self):
        spec = HelixSpec(1.0, 0.3, RodParams())
        x = helix_stable_load(spec)
        assert 0 < x < 2 * np.pi * 0.3
        below = HelixSpec(1.0, 0.3, RodParams(1.0, 0.75, 1.0, (0, 0, 0.99 * x)))
        above = HelixSpec(1.0, 0.3, RodParams(1.0, 0.75, 1.0, (0, 0, 1.01 * x)))
        assert classify_helix(below).classification == STABLE
        assert classify_helix(above).classification != STABLE

    def test_no_stable_load_for_large_winding(self):
        assert helix_stable_load(HelixSpec(1.0, 0.6, RodParams())) == 0.0


class TestSpectralAgreement:
    """Stable verdicts come with a PSD Hessian, unstable ones with a negative eigenvalue."""

    @pytest.mark.parametrize(
        "kind,F",
        [("dirichlet", 2.0), ("dirichlet", 6.0), ("neumann", -25.0), ("mixed", -14.0), ("mixed", 0.0), ("mixed", 3.0)],
    )
    def test_trivial(self, kind, F):
        g = Grid.unit(100)
        params = p(F)
        bcs = trivial_bcs(1.0, kind)
        v = classify_trivial(params, bcs)
        H = assemble_hessian(trivial_state(g, 1.0), params, bcs)
        mu = smallest_eigenvalue(H)
        norm = abs(H.dense()).max()
        if v.classification == STABLE:
            assert mu > -1e-6 * norm
        elif v.classification == UNSTABLE:
            assert mu < 0

    @pytest.mark.parametrize("lam", [0.2, 1.5])
    def test_helix(self, lam):
        spec = HelixSpec(1.0, lam, RodParams())
        f, bcs = helix_state(Grid.unit(100), spec)
        H = assemble_hessian(f, spec.params, bcs)
        mu = smallest_eigenvalue(H)
        if classify_helix(spec).classification == STABLE:
            assert mu > -1e-6 * abs(H.dense()).max()
        else:
            assert mu < 0
