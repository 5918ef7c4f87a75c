"""Acceptance criteria, each run at its stated tolerance and runtime budget.

Every criterion returns ``(passed, detail)``; the test records one line
per criterion, printed in the terminal summary. Run this file directly
to print the lines without pytest.
"""

import json
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest
import yaml
from scipy.optimize import brentq

from rodlab import fem, io
from rodlab.cli import EXIT_OK, main
from rodlab.equilibria import HelixSpec, SolitonSpec, helix_state, perturb, soliton_state, trivial_bcs, trivial_state
from rodlab.flow import FlowConfig, FlowState, implicit_step, run_flow
from rodlab.rod import EulerField, Grid, RodParams, energy
from rodlab.stability import (
    GAP,
    STABLE,
    UNSTABLE,
    analytic_modes_trivial,
    assemble_hessian,
    classify_helix,
    classify_trivial,
    classify_trivial_global,
    helix_witness,
    second_variation_helix,
    smallest_eigenvalue,
    trivial_eigenvalue,
)

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # pragma: no cover
    ACCEPTANCE_LINES = []

PI2 = np.pi**2
BASE = RodParams(1.0, 0.75, 1.0, twist_M=1.0)


def _verdict(stable: bool, unstable: bool) -> str:
    return STABLE if stable else UNSTABLE if unstable else GAP


# -- 1 ---------------------------------------------------------------------------------


def criterion_1():
    g = Grid.unit(400)
    f0, bcs = trivial_state(g, 1.0), trivial_bcs(1.0)

    def mu(F):
        return smallest_eigenvalue(assemble_hessian(f0, BASE.with_force((F, 0, 0)), bcs))

    target = 7 / 16 * PI2
    Fc = brentq(mu, 0.9 * target, 1.1 * target, xtol=1e-8)
    err = abs(Fc - target) / target
    return err < 0.01, f"zero crossing F={Fc:.6f} vs {target:.6f} (rel err {err:.2e}, tol 1e-2)"


# -- 2 ---------------------------------------------------------------------------------


def _rayleigh(d, g):
    H = assemble_hessian(trivial_state(g, 1.0), BASE, trivial_bcs(1.0))
    a, b, c = d.nodal(g)
    v = np.concatenate([a, b, c])
    return H.quadratic(a, b, c) / (v @ (fem.mass_matrix(g) @ v))


def criterion_2():
    ok, worst_err, worst_order = True, 0.0, np.inf
    for m in range(1, 5):
        lam = trivial_eigenvalue(m, BASE)
        modes = analytic_modes_trivial(m, BASE)
        for d in (modes.first, modes.second):
            e200, e400 = (abs(_rayleigh(d, Grid.unit(n)) - lam) / abs(lam) for n in (200, 400))
            order = np.log2(e200 / e400)
            worst_err, worst_order = max(worst_err, e400), min(worst_order, order)
            ok &= e400 < 5e-3 and order >= 1.9
    return bool(ok), f"m=1..4 both families: max rel err {worst_err:.2e} (tol 5e-3), min order {worst_order:.3f} (>= 1.9)"


# -- 3 ---------------------------------------------------------------------------------


def criterion_3():
    m_max = 4
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        cfg = tmp / "bif.yaml"
        cfg.write_text(
            yaml.safe_dump(
                {
                    "scenario": "trivial",
                    "params": {"A": 1, "C": 0.75, "M": 1, "L": 1},
                    "bifurcate": {"m_max": m_max, "n_cells": 100, "n_steps": 40, "span": 0.25},
                }
            )
        )
        rc = main(["bifurcate", "--config", str(cfg), "--output-dir", str(tmp / "out")])
        if rc != EXIT_OK:
            return False, f"bifurcate exited with {rc}"
        header, data = io.read_table(tmp / "out" / "critical_forces.csv")
    m = data[:, 0]
    closed = (1.0 * m**2 * PI2 - PI2 * 0.75**2 / 1.0) / 1.0**2
    ladder = np.max(np.abs(data[:, header.index("analytic")] - closed))
    onset = np.max(np.abs(data[:, header.index("branch_onset")] - closed) / closed)
    ok = ladder <= 1e-10 and onset < 0.02
    return ok, f"F_m ladder max err {ladder:.1e} (tol 1e-10); branch onsets max rel err {onset:.2e} (tol 2e-2)"


# -- 4 ---------------------------------------------------------------------------------


def _prop3_table():
    rows = []
    for A, C, M in [(1.0, 0.75, 0.1), (1.0, 0.8, 0.2), (2.0, 1.5, 0.2), (1.0, 0.9, 0.3), (1.0, 0.7, 0.5)]:
        for ab in (0.2, 0.6, 1.0):
            for F in (-2.0, 1.0, 5.0):
                p = RodParams(A, C, 1.0, (F, 0, 0), M)
                r = 4 * M * C / A
                expected = ab > r and max(F, 0.0) < A * PI2 * ab - 4 * PI2 * M * C
                rows.append((p, ab, expected))
    return rows


def _prop5_table():
    rows = []
    for A, C, M in [(1.0, 0.75, 1.0), (1.0, 0.9, 0.5), (1.0, 1.0, 3.0), (1.0, 0.75, 4.0), (2.0, 2.0, 5.0)]:
        t = A * PI2 - PI2 * M**2 * C**2 / A
        r = M * C / A
        odd = abs(r - round(r)) < 1e-12 and round(r) >= 3 and round(r) % 2 == 1
        for F in (t - 3.0, t - 0.1, t + 0.1, t + 3.0):
            p = RodParams(A, C, 1.0, (F, 0, 0), M)
            rows.append((p, _verdict(F < t, odd and F > t)))
    return rows


def _prop6_table():
    rows = []
    for A, C, M in [(1.0, 0.75, 1.0), (1.0, 0.8, 0.5), (1.0, 0.7, 0.2), (2.0, 1.6, 1.0)]:
        t = -4 * PI2 * M**2 * C**2 / A if A < 2 * M * C else -2 * PI2 * M * C
        for F in (t - 5.0, t - 0.01, t + 0.01, t + 5.0):
            rows.append((RodParams(A, C, 1.0, (F, 0, 0), M), _verdict(F < t, False)))
    return rows


def _prop7_table():
    rows = []
    for A, C, M in [(1.0, 0.75, 1.0), (1.0, 0.8, 0.4), (1.0, 1.0, 0.5), (2.0, 1.5, 2.0)]:
        lam = 2 * M * C / A
        low = min(PI2 * (A - 4 * M**2 * C**2 / A), 0.0)
        high = A * PI2 * (1 - lam**2) / (1 + lam**2)
        for F in sorted({low - 2.0, low - 1e-3, 0.5 * (low + high), high + 1e-3, high + 2.0}):
            rows.append((RodParams(A, C, 1.0, (F, 0, 0), M), _verdict(F < low, F > high)))
    return rows


def criterion_4():
    counts, bad = {}, []
    rows3 = _prop3_table()
    for p, ab, exp in rows3:
        if classify_trivial_global(p, ab) != exp:
            bad.append(("Prop 3", p, ab))
    counts["Prop 3"] = len(rows3)
    for name, rows, kind, iso in [
        ("Prop 5", _prop5_table(), "dirichlet", {"y": 0.0, "z": 0.0}),
        ("Prop 6", _prop6_table(), "neumann", None),
        ("Prop 7", _prop7_table(), "mixed", None),
    ]:
        for p, exp in rows:
            if classify_trivial(p, trivial_bcs(p.twist_M, kind, iso)).classification != exp:
                bad.append((name, p))
        counts[name] = len(rows)
    ok = not bad and min(counts.values()) >= 12
    detail = ", ".join(f"{k}: {v} points" for k, v in counts.items()) + f"; mismatches {len(bad)}"
    return ok, detail


# -- 5 ---------------------------------------------------------------------------------


def criterion_5():
    ok, worst_psd, worst_witness = True, np.inf, 0.0
    g = Grid.unit(100)
    for lam in np.arange(0.1, 0.451, 0.05):
        spec = HelixSpec(np.pi / 3, float(lam), RodParams())
        f, bcs = helix_state(g, spec)
        H = assemble_hessian(f, spec.params, bcs)
        scaled = smallest_eigenvalue(H) / abs(H.dense()).max()
        worst_psd = min(worst_psd, scaled)
        ok &= classify_helix(spec).classification == STABLE and scaled > -1e-6
    for lam in (1.05, 1.25, 1.5, 1.75, 2.0):
        spec = HelixSpec(np.pi / 3, lam, RodParams())
        q = second_variation_helix(helix_witness(spec), spec)
        err = abs(q - 2 * PI2 * (1 - lam**2))
        worst_witness = max(worst_witness, err)
        ok &= classify_helix(spec).classification == UNSTABLE and err < 1e-6
    return bool(ok), f"stable sweep min eig/|H| {worst_psd:.2e} (> -1e-6); witness max err {worst_witness:.1e} (tol 1e-6)"


# -- 6 ---------------------------------------------------------------------------------

SOLITON_REFERENCE = {0.5: -106.69, 1.0: -189.50, 2.0: -489.80}


def soliton_eigenvalue(tau, n=400):
    g = Grid(-10.0, 10.0, n)
    p0 = RodParams(1.0, 0.75, 1.0)
    f, bcs, F = soliton_state(g, SolitonSpec(tau), p0)
    return smallest_eigenvalue(assemble_hessian(f, p0.with_force(tuple(F)), bcs))


def criterion_6():
    mus = {tau: soliton_eigenvalue(tau) for tau in SOLITON_REFERENCE}
    vals = [mus[t] for t in sorted(mus)]
    negative = all(v < 0 for v in vals)
    ordered = vals[0] > vals[1] > vals[2]
    band = {t: abs(mus[t] - r) / abs(r) for t, r in SOLITON_REFERENCE.items()}
    soft = "within" if max(band.values()) <= 0.2 else "outside"
    listing = ", ".join(f"tau={t:g}: {mus[t]:.4f}" for t in sorted(mus))
    return negative and ordered, (
        f"{listing}; negative={negative}, ordered={ordered}; soft 20% band {soft} "
        f"(max rel dev {max(band.values()):.2f}, reported only)"
    )


# -- 7 ---------------------------------------------------------------------------------


def _fd_check(rng):
    n = int(rng.integers(10, 60))
    g = Grid(float(rng.uniform(-2, 0)), float(rng.uniform(0.5, 2)), n)
    f = EulerField(g, rng.uniform(0.3, np.pi - 0.3, n + 1), rng.uniform(-3, 3, n + 1), rng.uniform(-3, 3, n + 1))
    p = RodParams(1.0, rng.uniform(2 / 3, 1.0), 1.0, tuple(rng.uniform(-5, 5, 3)))
    x, d, eps = f.as_vector(), rng.standard_normal(3 * (n + 1)), 1e-5
    at = lambda v: EulerField.from_vector(g, v)  # noqa: E731
    fd = (energy(at(x + eps * d), p) - energy(at(x - eps * d), p)) / (2 * eps)
    an = fem.energy_gradient(f, p) @ d
    return abs(an - fd) / abs(fd)


def _mode_one(g, k=np.pi):
    s = g.nodes
    return np.sin(np.pi * s) * np.cos(k * s), np.sin(np.pi * s) * np.sin(k * s), 0 * s


def criterion_7():
    rng = np.random.default_rng(20240607)
    worst_fd = max(_fd_check(rng) for _ in range(100))
    ok_a = worst_fd < 1e-6

    g = Grid.unit(100)
    p = RodParams(1.0, 1.0, 1.0, (50.0, 0, 0), 1.0)
    f0 = perturb(trivial_state(g, 1.0), _mode_one(g), 1e-3)
    res = run_flow(f0, p, trivial_bcs(1.0), FlowConfig(dt=1e-3, max_steps=300, tol=1e-14))
    E = res.energies
    amp = float(np.max(np.abs(res.state.field.theta - np.pi / 2)))
    ok_b = bool(np.all(np.diff(E) < 0)) and amp > 0.1

    gs = Grid(-10.0, 10.0, 200)
    p0 = RodParams(1.0, 0.75, 1.0)
    fs, bcs, F = soliton_state(gs, SolitonSpec(1.0), p0)
    sres = run_flow(fs, p0.with_force(tuple(F)), bcs, FlowConfig(dt=4e-3, max_steps=500, tol=1e-14))
    steps = sres.state.step_index
    resid = max(float(np.max(np.abs(r.constraint_residuals))) for r in sres.trajectory)
    Es = sres.energies
    ok_c = steps >= 500 and resid <= 1e-8 and bool(np.all(np.diff(Es) < 0))

    detail = (
        f"(a) 100 fields max rel FD err {worst_fd:.1e} (tol 1e-6) {'ok' if ok_a else 'FAIL'}; "
        f"(b) {len(E) - 1} steps, E {E[0]:.4f}->{E[-1]:.4f} strictly decreasing, amplitude {amp:.3f} "
        f"{'ok' if ok_b else 'FAIL'}; "
        f"(c) soliton tau=1 {steps} steps, max residual {resid:.1e} (tol 1e-8), "
        f"max dE {np.max(np.diff(Es)):.1e} {'ok' if ok_c else 'FAIL'}"
    )
    return ok_a and ok_b and ok_c, detail


# -- 8 ---------------------------------------------------------------------------------


def _max_step_change(f, params, bcs, steps=10, dt=1e-3):
    cfg = FlowConfig(dt=dt)
    st = FlowState.initial(f, params, dt)
    worst = 0.0
    for _ in range(steps):
        new = implicit_step(st, params, bcs, cfg)
        worst = max(worst, float(np.max(np.abs(new.field.as_vector() - st.field.as_vector()))))
        st = new
    return worst


def criterion_8():
    g = Grid.unit(100)
    d0 = _max_step_change(trivial_state(g, 1.0), BASE.with_force((4.0, 0, 0)), trivial_bcs(1.0))
    spec = HelixSpec(1.0, 0.25, RodParams())
    fh, bcs = helix_state(g, spec)
    dh = _max_step_change(fh, spec.params, bcs)
    ok = d0 <= 1e-8 and dh <= 1e-8 and classify_helix(spec).classification == STABLE
    return ok, f"max per-step change: straight rod F=4 {d0:.1e}, helix lam=0.25 {dh:.1e} (tol 1e-8)"


CRITERIA = [
    (1, "Dirichlet critical force", criterion_1, 10),
    (2, "analytic spectrum match", criterion_2, 10),
    (3, "critical-force ladder", criterion_3, 60),
    (4, "proposition classifiers", criterion_4, 1),
    (5, "helix stability", criterion_5, 30),
    (6, "soliton instability", criterion_6, 60),
    (7, "flow correctness", criterion_7, 300),
    (8, "exact-equilibrium fixed points", criterion_8, 10),
]


def evaluate(number, name, func, budget):
    t0 = time.perf_counter()
    ok, detail = func()
    elapsed = time.perf_counter() - t0
    ok = bool(ok) and elapsed < budget
    line = f"[{'PASS' if ok else 'FAIL'}] {number}. {name}: {detail} [{elapsed:.2f}s / {budget}s]"
    return ok, line


@pytest.mark.parametrize("number,name,func,budget", CRITERIA, ids=[f"criterion_{c[0]}" for c in CRITERIA])
def test_acceptance(number, name, func, budget):
    ok, line = evaluate(number, name, func, budget)
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


if __name__ == "__main__":
    results = [evaluate(*c) for c in CRITERIA]
    for _, line in results:
        print(line)
    print(json.dumps({"passed": sum(ok for ok, _ in results), "total": len(results)}))
