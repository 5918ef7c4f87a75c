"""Command-line entry point: ``rodlab <action> --config job.yaml``.

Exit status is 0 on success, 2 for invalid input and 3 when a numerical
solver fails. Log verbosity comes from ``RODLAB_LOG_LEVEL``.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np
import scipy.sparse.linalg as spla

from . import fem, io
from .config import ACTIONS, JobConfig, Scenario, build_scenario, dump_yaml, parse_config
from .equilibria import perturb
from .flow import FlowError, run_flow
from .rod import ValidationError, centerline, el_residual, energy, strains
from .stability import (
    ContinuationError,
    SpectrumError,
    assemble_hessian,
    branch_continuation,
    classify_helix,
    classify_trivial,
    classify_trivial_global,
    critical_forces,
    discrete_critical_forces,
    onset_from_branch,
    smallest_eigenvalue,
    spectrum,
    trivial_mode,
)

logger = logging.getLogger("rodlab")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3
NUMERICAL_ERRORS = (FlowError, ContinuationError, SpectrumError, np.linalg.LinAlgError, spla.ArpackNoConvergence)


def _gradient_norm(scn: Scenario) -> float:
    free = scn.bcs.free_dofs(scn.field.grid.n_nodes)
    return float(np.max(np.abs(fem.energy_gradient(scn.field, scn.params)[free]), initial=0.0))


def initial_field(job: JobConfig, scn: Scenario):
    """Scenario field plus the configured perturbation, which vanishes at both ends."""
    pert = job.perturbation
    if pert.kind == "none":
        return scn.field
    g = scn.field.grid
    u = (g.nodes - g.lower) / (g.upper - g.lower)
    if pert.kind == "mode":
        mode = trivial_mode(pert.mode, scn.params, pert.family)
        direction = (mode.alpha(u), mode.beta(u), np.zeros_like(u))
    else:
        rng = np.random.default_rng(job.seed)
        basis = np.array([np.sin(j * np.pi * u) / j for j in range(1, 6)])
        direction = tuple(rng.standard_normal(5) @ basis for _ in range(3))
    return perturb(scn.field, direction, pert.amplitude)


# -- actions -------------------------------------------------------------------------


def do_analyze(job: JobConfig, scn: Scenario, out: Path) -> dict:
    f = scn.field
    io.export_field(f, out / "field.csv")
    io.export_centerline(centerline(f), out / "centerline.txt")
    k = strains(f)
    io.write_table(out / "strains.csv", ("s", "kappa1", "kappa2", "kappa3"), zip(f.grid.midpoints, k.kappa1, k.kappa2, k.kappa3))
    r = el_residual(f, scn.params)
    summary = {
        "energy": energy(f, scn.params),
        "gradient_max": _gradient_norm(scn),
        "el_residual_max": max(float(np.max(np.abs(c), initial=0.0)) for c in r),
        "constraints": {a: fem.constraint_value(f, a) for a in ("x", "y", "z")},
        "C_over_A": scn.params.twist_C / scn.params.bend_A,
    }
    io.write_json(out / "summary.json", summary)
    return summary


def do_spectrum(job: JobConfig, scn: Scenario, out: Path) -> dict:
    gnorm = _gradient_norm(scn)
    if gnorm > 1e-6:
        logger.warning("field is not an equilibrium (gradient %.3g); the spectrum is of the Hessian at this field", gnorm)
    H = assemble_hessian(scn.field, scn.params, scn.bcs, job.spectrum.lumped_mass)
    rep = spectrum(H, min(job.spectrum.k, H.dim))
    io.write_table(out / "eigenvalues.csv", ("index", "eigenvalue"), enumerate(rep.eigenvalues))
    a, b, c = rep.smallest_eigenvector
    io.write_table(out / "eigenvector.csv", ("s", "alpha", "beta", "gamma"), zip(scn.field.grid.nodes, a, b, c))
    summary = {
        "smallest": float(rep.eigenvalues[0]),
        "eigenvalues": rep.eigenvalues,
        "index": rep.index,
        "index_exact": rep.index_exact,
        "normalization": rep.normalization,
        "gradient_max": gnorm,
        "constraints": list(scn.bcs.iso_constraints),
    }
    io.write_json(out / "spectrum.json", summary)
    return summary


def do_classify(job: JobConfig, scn: Scenario, out: Path) -> dict:
    if job.scenario == "helix":
        verdict = classify_helix(scn.helix)
    else:
        verdict = classify_trivial(scn.params, scn.bcs)
    rec = verdict.as_dict()
    if job.alpha_bound is not None and job.scenario == "trivial":
        rec["global_minimizer"] = classify_trivial_global(scn.params, job.alpha_bound)
        rec["alpha_bound"] = job.alpha_bound
    # numerical evidence, most useful inside a gap
    rec["smallest_eigenvalue"] = smallest_eigenvalue(assemble_hessian(scn.field, scn.params, scn.bcs))
    io.write_json(out / "verdict.json", rec)
    return rec


def do_bifurcate(job: JobConfig, scn: Scenario, out: Path) -> dict:
    cfg = job.bifurcate
    if cfg.m_max < 1 or cfg.n_steps < 1 or not cfg.span > 0:
        raise ValidationError("bifurcate: m_max and n_steps must be positive and span > 0")
    params = scn.params.with_force((0.0, 0.0, 0.0))
    Fa = critical_forces(params, cfg.m_max)
    Fd = discrete_critical_forces(params, cfg.m_max, cfg.n_cells)
    onsets = []
    for m, Fm in enumerate(Fa, start=1):
        F_hi = Fm + cfg.span * max(abs(Fm), np.pi**2)
        pts = branch_continuation(params, m, (Fm, F_hi), step=(F_hi - Fm) / cfg.n_steps, n_cells=cfg.n_cells)
        io.write_table(
            out / f"branch_m{m}.csv",
            ("force", "amplitude_theta", "amplitude_phi", "energy"),
            ((p.force, p.amplitude, p.amplitude_phi, p.energy) for p in pts),
        )
        onsets.append(onset_from_branch(pts) if len(pts) >= 3 else float("nan"))
    io.write_table(
        out / "critical_forces.csv", ("m", "analytic", "discrete", "branch_onset"), zip(range(1, cfg.m_max + 1), Fa, Fd, onsets)
    )
    summary = {"critical_forces": Fa, "discrete_critical_forces": Fd, "branch_onsets": onsets}
    io.write_json(out / "bifurcate.json", summary)
    return summary


def do_flow(job: JobConfig, scn: Scenario, out: Path) -> dict:
    f0 = initial_field(job, scn)
    axes = list(scn.bcs.iso_constraints)
    snap_dir = out / "snapshots"
    snap_dir.mkdir(exist_ok=True)
    try:
        res = run_flow(f0, scn.params, scn.bcs, job.flow)
    except FlowError as exc:
        io.export_series(exc.trajectory, out / "trajectory.csv", axes)
        if exc.state is not None:
            io.export_field(exc.state.field, out / "last_field.csv")
        io.write_json(out / "failure.json", {"error": str(exc), **exc.diagnostics})
        raise
    io.export_series(res.trajectory, out / "trajectory.csv", axes)
    snaps = [r for r in res.trajectory if r.snapshot is not None]
    if not snaps:
        io.export_centerline(centerline(f0), snap_dir / "centerline_000000.txt")
    for r in snaps:
        io.export_centerline(centerline(r.snapshot), snap_dir / f"centerline_{r.step:06d}.txt")
    io.export_centerline(centerline(res.state.field), out / "centerline_final.txt")
    io.export_field(res.state.field, out / "final_field.csv")
    E = res.energies
    summary = {
        "steps": res.state.step_index,
        "converged": res.converged,
        "initial_energy": float(E[0]),
        "final_energy": float(E[-1]),
        "max_energy_increase": float(np.max(np.diff(E), initial=-np.inf)),
        "max_constraint_residual": max((float(np.max(np.abs(r.constraint_residuals), initial=0.0)) for r in res.trajectory), default=0.0),
        "constraints": axes,
    }
    io.write_json(out / "flow.json", summary)
    return summary


ACTION_FUNCS = {
    "analyze": do_analyze,
    "spectrum": do_spectrum,
    "classify": do_classify,
    "bifurcate": do_bifurcate,
    "flow": do_flow,
}


def run(job: JobConfig) -> dict:
    """Execute one job, writing its artifacts under ``job.output_dir``."""
    out = Path(job.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ValidationError(f"output_dir: cannot create {out}: {exc}") from exc
    (out / "config.normalized.yaml").write_text(dump_yaml(job))
    scn = build_scenario(job)
    logger.info("running %s on %s (%d cells)", job.action, job.scenario, scn.field.grid.n_cells)
    return ACTION_FUNCS[job.action](job, scn, out)


def _configure_logging():
    level = os.environ.get("RODLAB_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rodlab", description="Equilibria, stability and gradient flow of Euler-angle rods.")
    ap.add_argument("action", choices=ACTIONS)
    ap.add_argument("--config", required=True, type=Path, help="YAML job file")
    ap.add_argument("--output-dir", type=Path, help="overrides output_dir in the config")
    ap.add_argument("--grid-n", type=int, help="number of grid cells; overrides grid.n_cells")
    ap.add_argument("--seed", type=int, help="seed for random perturbations; overrides seed")
    return ap


def main(argv=None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        job = parse_config(args.config, action=args.action)
        job = job.with_overrides(output_dir=args.output_dir, n_cells=args.grid_n, seed=args.seed)
        run(job)
    except ValidationError as exc:
        print(f"rodlab: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NUMERICAL_ERRORS as exc:
        print(f"rodlab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
