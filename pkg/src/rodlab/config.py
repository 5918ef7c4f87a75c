"""Job configuration: YAML in, validated :class:`JobConfig` out.

A job names a scenario (which equilibrium to build), an action (what to
do with it) and the parameters both need. Every default is filled in and
echoed back by :func:`normalized_dump`, whose output parses to the same
job.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import yaml

from .equilibria import (
    ANGLES,
    BoundarySpec,
    HelixSpec,
    SolitonSpec,
    dirichlet,
    helix_state,
    neumann,
    soliton_state,
    trivial_bcs,
    trivial_state,
)
from .flow import FlowConfig
from .io import read_field
from .rod import THETA_MIN, EulerField, Grid, RodParams, ValidationError

SCENARIOS = ("trivial", "helix", "soliton", "custom-field-file")
ACTIONS = ("analyze", "spectrum", "classify", "bifurcate", "flow")
COMPATIBLE = {
    "analyze": set(SCENARIOS),
    "spectrum": set(SCENARIOS),
    "classify": {"trivial", "helix"},
    "bifurcate": {"trivial"},
    "flow": set(SCENARIOS),
}


class ConfigError(ValidationError):
    """Invalid configuration; ``path`` locates the offending entry."""

    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}" if path else msg)
        self.path = path


@dataclass(frozen=True)
class PerturbationConfig:
    """Optional initial perturbation: a clamped trivial mode or seeded noise."""

    kind: str = "none"
    amplitude: float = 1e-3
    mode: int = 1
    family: int = 1


@dataclass(frozen=True)
class SpectrumConfig:
    k: int = 6
    lumped_mass: bool = False


@dataclass(frozen=True)
class BifurcateConfig:
    m_max: int = 4
    n_cells: int = 100
    span: float = 0.25
    n_steps: int = 40


@dataclass(frozen=True)
class JobConfig:
    scenario: str
    action: str
    params: RodParams
    n_cells: int
    boundary: dict
    helix: dict | None = None
    soliton: dict | None = None
    field_file: str | None = None
    alpha_bound: float | None = None
    perturbation: PerturbationConfig = field(default_factory=PerturbationConfig)
    spectrum: SpectrumConfig = field(default_factory=SpectrumConfig)
    bifurcate: BifurcateConfig = field(default_factory=BifurcateConfig)
    flow: FlowConfig = field(default_factory=FlowConfig)
    output_dir: str = "rodlab-out"
    seed: int = 0
    theta_min: float = THETA_MIN
    force_given: bool = True

    def with_overrides(self, action=None, output_dir=None, n_cells=None, seed=None) -> "JobConfig":
        job = self
        if action is not None:
            job = replace(job, action=_check_action(action, job.scenario))
        if output_dir is not None:
            job = replace(job, output_dir=str(output_dir))
        if n_cells is not None:
            job = replace(job, n_cells=_positive_int(n_cells, "grid.n_cells", minimum=2))
        if seed is not None:
            job = replace(job, seed=int(seed))
        return job


# -- field-level validators ------------------------------------------------------------


def _number(v, path: str) -> float:
    if isinstance(v, bool) or v is None:
        raise ConfigError(path, f"expected a number, got {v!r}")
    try:
        x = float(v)
    except (TypeError, ValueError):
        raise ConfigError(path, f"expected a number, got {v!r}") from None
    if not math.isfinite(x):
        raise ConfigError(path, f"expected a finite number, got {v!r}")
    return x


def _positive_int(v, path: str, minimum: int = 1) -> int:
    if isinstance(v, bool) or not isinstance(v, (int, np.integer)) and not (isinstance(v, float) and v.is_integer()):
        raise ConfigError(path, f"expected an integer, got {v!r}")
    if int(v) < minimum:
        raise ConfigError(path, f"must be at least {minimum}, got {v}")
    return int(v)


def _mapping(v, path: str) -> dict:
    if v is None:
        return {}
    if not isinstance(v, dict):
        raise ConfigError(path, f"expected a mapping, got {type(v).__name__}")
    return v


def _reject_unknown(d: dict, allowed, path: str):
    extra = set(d) - set(allowed)
    if extra:
        prefix = f"{path}." if path else ""
        raise ConfigError(f"{prefix}{sorted(extra)[0]}", f"unknown key (allowed: {', '.join(sorted(allowed))})")


def _check_action(action: str, scenario: str) -> str:
    if action not in ACTIONS:
        raise ConfigError("action", f"unknown action {action!r}; expected one of {', '.join(ACTIONS)}")
    if scenario not in COMPATIBLE[action]:
        raise ConfigError("action", f"{action} is not available for scenario {scenario!r}")
    return action


def _params(d: dict) -> tuple[RodParams, bool]:
    d = _mapping(d, "params")
    _reject_unknown(d, {"A", "C", "L", "M", "force"}, "params")
    force = d.get("force")
    given = force is not None
    if given:
        if not isinstance(force, (list, tuple)) or len(force) != 3:
            raise ConfigError("params.force", f"expected a list of 3 numbers, got {force!r}")
        force = tuple(_number(c, f"params.force[{i}]") for i, c in enumerate(force))
    vals = {k: _number(d[k], f"params.{k}") for k in ("A", "C", "L", "M") if k in d}
    for k in ("A", "C", "L"):
        if k in vals and not vals[k] > 0:
            raise ConfigError(f"params.{k}", f"must be positive, got {vals[k]}")
    p = RodParams(
        vals.get("A", 1.0), vals.get("C", 0.75), vals.get("L", 1.0), force or (0.0, 0.0, 0.0), vals.get("M", 0.0)
    )
    return p, given


def _dataclass_section(cls, d, path: str):
    d = _mapping(d, path)
    names = {f.name for f in fields(cls)}
    _reject_unknown(d, names, path)
    defaults = cls()
    out = {}
    for name in names:
        if name not in d:
            continue
        ref = getattr(defaults, name)
        v = d[name]
        if isinstance(ref, bool):
            if not isinstance(v, bool):
                raise ConfigError(f"{path}.{name}", f"expected true/false, got {v!r}")
            out[name] = v
        elif isinstance(ref, int):
            out[name] = _positive_int(v, f"{path}.{name}", minimum=0)
        elif isinstance(ref, float):
            out[name] = _number(v, f"{path}.{name}")
        else:
            out[name] = str(v)
    try:
        return cls(**out)
    except ValidationError as exc:
        raise ConfigError(path, str(exc)) from exc


_BOUNDARY_WORDS = {"clamp": "clamp", "clamped": "clamp", "dirichlet": "clamp", "free": "free", "neumann": "free"}


def _boundary(d: dict, scenario: str) -> dict:
    """Normalized boundary block: ``kind``, per-angle end entries and ``iso``."""
    d = _mapping(d, "boundary")
    _reject_unknown(d, {"kind", "iso", *ANGLES}, "boundary")
    kind = d.get("kind", "dirichlet")
    if scenario == "trivial":
        if kind not in ("dirichlet", "neumann", "mixed"):
            raise ConfigError("boundary.kind", f"expected dirichlet, neumann or mixed, got {kind!r}")
    elif kind != "dirichlet":
        raise ConfigError("boundary.kind", f"scenario {scenario} supports only per-angle overrides, got {kind!r}")
    out = {"kind": kind}
    for a in ANGLES:
        if a not in d:
            continue
        ends = d[a]
        if not isinstance(ends, (list, tuple)) or len(ends) != 2:
            raise ConfigError(f"boundary.{a}", "expected [left, right]")
        norm = []
        for i, e in enumerate(ends):
            p = f"boundary.{a}[{i}]"
            if isinstance(e, str):
                if e not in _BOUNDARY_WORDS:
                    raise ConfigError(p, f"expected a number, 'clamp' or 'free', got {e!r}")
                norm.append(_BOUNDARY_WORDS[e])
            else:
                v = _number(e, p)
                if a == "theta" and not THETA_MIN <= v <= math.pi - THETA_MIN:
                    raise ConfigError(p, f"theta Dirichlet value {v} lies on the polar singularity")
                norm.append(v)
        out[a] = norm
    # fixed endpoints are the default for the localized profile
    default_iso = {"x": None, "y": None} if scenario == "soliton" else {}
    iso = _mapping(d.get("iso", default_iso), "boundary.iso")
    _reject_unknown(iso, {"x", "y", "z"}, "boundary.iso")
    out["iso"] = {k: (None if v is None else _number(v, f"boundary.iso.{k}")) for k, v in sorted(iso.items())}
    return out


def _helix(d) -> dict:
    d = _mapping(d, "helix")
    _reject_unknown(d, {"theta0", "lam", "xi"}, "helix")
    for k in ("theta0", "lam"):
        if k not in d:
            raise ConfigError(f"helix.{k}", "required")
    out = {k: _number(d[k], f"helix.{k}") for k in ("theta0", "lam")}
    out["xi"] = _number(d.get("xi", 0.0), "helix.xi")
    if out["lam"] == 0:
        raise ConfigError("helix.lam", "must be nonzero: the psi slope of the helix divides by lambda")
    if not THETA_MIN <= out["theta0"] <= math.pi - THETA_MIN:
        raise ConfigError("helix.theta0", f"{out['theta0']} lies on the polar singularity")
    return out


def _soliton(d) -> dict:
    d = _mapping(d, "soliton")
    _reject_unknown(d, {"tau", "half_length", "b"}, "soliton")
    if "tau" not in d:
        raise ConfigError("soliton.tau", "required")
    out = {"tau": _number(d["tau"], "soliton.tau"), "half_length": _number(d.get("half_length", 10.0), "soliton.half_length")}
    out["b"] = None if d.get("b") is None else _number(d["b"], "soliton.b")
    if out["tau"] <= 0:
        raise ConfigError("soliton.tau", "must be positive")
    if out["half_length"] <= 0:
        raise ConfigError("soliton.half_length", "must be positive")
    return out


TOP_KEYS = {
    "scenario", "action", "params", "grid", "boundary", "helix", "soliton", "field_file", "alpha_bound",
    "perturbation", "spectrum", "bifurcate", "flow", "output_dir", "seed", "theta_min", "derived",
}  # fmt: skip


def load_config(raw: dict, base_dir: Path | None = None, action: str | None = None) -> JobConfig:
    """Validate a parsed config mapping; ``action`` overrides ``raw['action']``."""
    raw = _mapping(raw, "")
    _reject_unknown(raw, TOP_KEYS, "")
    scenario = raw.get("scenario")
    if scenario not in SCENARIOS:
        raise ConfigError("scenario", f"expected one of {', '.join(SCENARIOS)}, got {scenario!r}")
    act = action or raw.get("action")
    if act is None:
        raise ConfigError("action", "required (in the file or on the command line)")
    act = _check_action(act, scenario)
    params, force_given = _params(raw.get("params"))

    grid = _mapping(raw.get("grid"), "grid")
    _reject_unknown(grid, {"n_cells"}, "grid")
    n_cells = _positive_int(grid.get("n_cells", 400 if scenario == "soliton" else 100), "grid.n_cells", minimum=2)

    job = dict(scenario=scenario, action=act, params=params, n_cells=n_cells, force_given=force_given)
    job["boundary"] = _boundary(raw.get("boundary"), scenario)
    if scenario == "helix":
        job["helix"] = _helix(raw.get("helix"))
    if scenario == "soliton":
        job["soliton"] = _soliton(raw.get("soliton"))
        if params.length_L != 1.0:
            raise ConfigError("params.L", "the soliton profile is written in physical arc length; L must be 1")
    if scenario == "custom-field-file":
        ff = raw.get("field_file")
        if not isinstance(ff, str):
            raise ConfigError("field_file", "required for scenario custom-field-file")
        p = Path(ff)
        if not p.is_absolute() and base_dir is not None:
            p = base_dir / p
        if not p.is_file():
            raise ConfigError("field_file", f"no such file: {p}")
        job["field_file"] = str(p)
    if raw.get("alpha_bound") is not None:
        ab = _number(raw["alpha_bound"], "alpha_bound")
        if not 0 < ab <= 1:
            raise ConfigError("alpha_bound", f"must lie in (0, 1], got {ab}")
        job["alpha_bound"] = ab

    pert = _dataclass_section(PerturbationConfig, raw.get("perturbation"), "perturbation")
    if pert.kind not in ("none", "mode", "random"):
        raise ConfigError("perturbation.kind", f"expected none, mode or random, got {pert.kind!r}")
    if pert.family not in (1, 2):
        raise ConfigError("perturbation.family", "must be 1 or 2")
    job["perturbation"] = pert
    job["spectrum"] = _dataclass_section(SpectrumConfig, raw.get("spectrum"), "spectrum")
    job["bifurcate"] = _dataclass_section(BifurcateConfig, raw.get("bifurcate"), "bifurcate")
    job["flow"] = _dataclass_section(FlowConfig, raw.get("flow"), "flow")
    job["output_dir"] = str(raw.get("output_dir", "rodlab-out"))
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError("seed", f"expected an integer, got {seed!r}")
    job["seed"] = seed
    tm = _number(raw.get("theta_min", THETA_MIN), "theta_min")
    if not 0 < tm < math.pi / 2:
        raise ConfigError("theta_min", f"must lie in (0, pi/2), got {tm}")
    job["theta_min"] = tm
    return JobConfig(**job)


def parse_config(path, action: str | None = None) -> JobConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError("", f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError("", f"{path}: YAML parse error: {exc}") from exc
    return load_config(raw, base_dir=path.parent, action=action)


def normalized_dump(job: JobConfig) -> dict:
    """Every setting with defaults applied, plus derived quantities under ``derived``."""
    p = job.params
    out = {
        "scenario": job.scenario,
        "action": job.action,
        "params": {"A": p.bend_A, "C": p.twist_C, "L": p.length_L, "M": p.twist_M, "force": list(p.force)},
        "grid": {"n_cells": job.n_cells},
        "boundary": {k: (dict(v) if isinstance(v, dict) else v) for k, v in job.boundary.items()},
        "perturbation": asdict(job.perturbation),
        "spectrum": asdict(job.spectrum),
        "bifurcate": asdict(job.bifurcate),
        "flow": asdict(job.flow),
        "output_dir": job.output_dir,
        "seed": job.seed,
        "theta_min": job.theta_min,
    }
    if job.helix is not None:
        out["helix"] = dict(job.helix)
    if job.soliton is not None:
        out["soliton"] = dict(job.soliton)
    if job.field_file is not None:
        out["field_file"] = job.field_file
    if job.alpha_bound is not None:
        out["alpha_bound"] = job.alpha_bound
    out["derived"] = {"C_over_A": p.twist_C / p.bend_A, "load": [float(v) for v in p.load]}
    if not job.force_given and job.scenario == "soliton":
        out["params"]["force"] = [float(v) for v in soliton_force(job)]
    return out


def dump_yaml(job: JobConfig) -> str:
    return yaml.safe_dump(normalized_dump(job), sort_keys=True, default_flow_style=False)


# -- scenario construction -------------------------------------------------------------


def soliton_force(job: JobConfig) -> np.ndarray:
    s = job.soliton
    return SolitonSpec(s["tau"], s["half_length"], s["b"]).force(job.params)


@dataclass(frozen=True)
class Scenario:
    """A built scenario: the field, its boundary data and effective parameters."""

    field: EulerField
    bcs: BoundarySpec
    params: RodParams
    helix: HelixSpec | None = None


def _apply_overrides(bcs: BoundarySpec, f: EulerField, boundary: dict) -> BoundarySpec:
    cond = dict(bcs.conditions)
    for a in ANGLES:
        if a not in boundary:
            continue
        vals = getattr(f, a)
        pair = []
        for i, e in zip((0, -1), boundary[a]):
            if e == "free":
                pair.append(neumann())
            elif e == "clamp":
                pair.append(dirichlet(vals[i]))
            else:
                pair.append(dirichlet(e))
        cond[a] = tuple(pair)
    try:
        return BoundarySpec(cond, dict(boundary.get("iso", {})))
    except ValidationError as exc:
        raise ConfigError("boundary", str(exc)) from exc


def build_scenario(job: JobConfig) -> Scenario:
    p = job.params
    if job.scenario == "trivial":
        grid = Grid.unit(job.n_cells)
        f = trivial_state(grid, p.twist_M)
        bcs = trivial_bcs(p.twist_M, job.boundary["kind"])
        return Scenario(f, _apply_overrides(bcs, f, job.boundary), p)
    if job.scenario == "helix":
        h = job.helix
        try:
            spec = HelixSpec(h["theta0"], h["lam"], p, h["xi"])
        except ValidationError as exc:
            raise ConfigError("helix", str(exc)) from exc
        f, bcs = helix_state(Grid.unit(job.n_cells), spec)
        return Scenario(f, _apply_overrides(bcs, f, job.boundary), p, spec)
    if job.scenario == "soliton":
        s = job.soliton
        spec = SolitonSpec(s["tau"], s["half_length"], s["b"])
        grid = Grid(-spec.half_length, spec.half_length, job.n_cells)
        params = p if job.force_given else p.with_force(spec.force(p))
        f, bcs, _ = soliton_state(grid, spec, params, iso=())
        return Scenario(f, _apply_overrides(bcs, f, job.boundary), params)
    f = read_field(job.field_file, job.theta_min)
    bcs = BoundarySpec.from_field(f)
    return Scenario(f, _apply_overrides(bcs, f, job.boundary), p)
