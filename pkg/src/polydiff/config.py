"""Run configuration: YAML blocks ``grid``, ``model``, ``solver``, ``diagnostics``, ``output``.

Missing keys take the defaults in :data:`DEFAULTS`; unknown keys are errors.
Errors carry the line of the offending key when it is known.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import yaml

from .grid import GridSpec, build_operators
from .model import ModelParams, make_preset
from .solver import SolverConfig, aligned_dt, default_dt

DEFAULTS = {
    "grid": {"dimension": 1, "lengths": [1.0], "counts": [128]},
    "model": {
        "D": 1.0,
        "E": 1.0,
        "mu": 0.5,
        "nu": 1.0,
        "beta_R": 2.0,
        "beta_G": 0.5,
        "delta_beta": 0.2,
        "u_RG": 0.5,
        "beta_inf": 1.0,
        "R_cut": None,
        "boundary": {"preset": "gaussian", "base": 0.3, "amplitude": 0.5, "center": [0.5], "width": 0.1},
    },
    "solver": {
        "dt": None,
        "t_end": 50.0,
        "scheme": "imex-euler",
        "sample_stride": 16,
        "max_value_guard": 1.0e12,
    },
    "diagnostics": {
        "delta": 0.5,
        "horizon": 5.0,
        "shifts": [0.0, 5.0, 10.0, 20.0, 40.0],
        "ensemble_size": 8,
        "seed": 20240601,
        "initial": "random",
        "ic_amplitude": 1.0,
        "ic_decay": 1.0,
        "ic_modes": 32,
        "calibration_size": 4,
        "validation_size": 10,
        "t_late": 40.0,
        "gamma_safety": 1.5,
        "chi_max_factor": 1.0e6,
        "tolerance": 0.05,
        "mms_counts": [15, 31, 63, 127],
        "mms_dts": [0.02, 0.01, 0.005, 0.0025],
        "mms_t_end": 0.5,
    },
    "output": {"directory": "polydiff-out", "formats": ["csv", "text", "pdif"]},
}

INITIAL_KINDS = ("zero", "random", "uptake")


class ConfigError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None, source: str = "<config>"):
        self.line = line
        where = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(where + message)


def _key_lines(text: str) -> dict:
    """Map key paths like ``('model', 'D')`` to 1-based line numbers."""
    lines = {}
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return lines

    def walk(node, path):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                key = path + (k.value,)
                lines[key] = k.start_mark.line + 1
                walk(v, key)

    if root is not None:
        walk(root, ())
    return lines


def _merge(defaults: dict, user: dict, path: tuple, lines: dict, source: str) -> dict:
    out = copy.deepcopy(defaults)
    for key, val in user.items():
        here = path + (key,)
        if key not in defaults:
            line = lines.get(here)
            raise ConfigError(f"unknown key {'.'.join(here)!r}", line, source)
        if isinstance(defaults[key], dict) and key != "boundary":
            if not isinstance(val, dict):
                raise ConfigError(f"{'.'.join(here)} must be a mapping", lines.get(here), source)
            out[key] = _merge(defaults[key], val, here, lines, source)
        elif key == "boundary":
            if not isinstance(val, dict) or "preset" not in val:
                raise ConfigError("model.boundary needs a 'preset' entry", lines.get(here), source)
            out[key] = dict(val)
        else:
            out[key] = val
    return out


@dataclass
class RunConfig:
    grid: dict
    model: dict
    solver: dict
    diagnostics: dict
    output: dict
    source: str = "<config>"
    lines: dict = field(default_factory=dict, repr=False)

    # -- builders -----------------------------------------------------------

    def grid_spec(self) -> GridSpec:
        g = self.grid
        return GridSpec(int(g["dimension"]), tuple(g["lengths"]), tuple(g["counts"]))

    def model_params(self) -> ModelParams:
        kw = {k: v for k, v in self.model.items() if k != "boundary"}
        kw = {k: (float(v) if v is not None else None) for k, v in kw.items()}
        return ModelParams(**kw)

    def boundary_preset(self):
        b = dict(self.model["boundary"])
        name = b.pop("preset")
        return make_preset(name, **b)

    def solver_config(self, ops=None, params=None) -> SolverConfig:
        s = dict(self.solver)
        if s["dt"] is None:
            if ops is None:
                ops = build_operators(self.grid_spec())
            s["dt"] = aligned_dt(default_dt(ops, params or self.model_params()), int(s["sample_stride"]))
        return SolverConfig(
            dt=float(s["dt"]),
            t_end=float(s["t_end"]),
            scheme=str(s["scheme"]),
            sample_stride=int(s["sample_stride"]),
            max_value_guard=float(s["max_value_guard"]),
        )

    def resolved(self) -> dict:
        """Fully expanded configuration (derived defaults filled in)."""
        out = {
            "grid": copy.deepcopy(self.grid),
            "model": copy.deepcopy(self.model),
            "solver": copy.deepcopy(self.solver),
            "diagnostics": copy.deepcopy(self.diagnostics),
            "output": copy.deepcopy(self.output),
        }
        ops = build_operators(self.grid_spec())
        params = self.model_params()
        if out["solver"]["dt"] is None:
            out["solver"]["dt"] = float(aligned_dt(default_dt(ops, params), int(out["solver"]["sample_stride"])))
        if out["model"]["R_cut"] is None:
            from .model import build_lift

            out["model"]["R_cut"] = float(build_lift(self.grid_spec(), self.boundary_preset(), params).params.R_cut)
        return out

    def dump(self) -> str:
        return yaml.safe_dump(self.resolved(), sort_keys=False, default_flow_style=None)

    def with_seed(self, seed: int) -> "RunConfig":
        diag = dict(self.diagnostics)
        diag["seed"] = int(seed)
        return replace(self, diagnostics=diag)

    # -- validation ---------------------------------------------------------

    def _fail(self, message: str, *path: str):
        line = None
        for k in range(len(path), 0, -1):
            line = self.lines.get(tuple(path[:k]))
            if line is not None:
                break
        raise ConfigError(message, line, self.source)

    def validate(self) -> "RunConfig":
        try:
            self.grid_spec()
        except (ValueError, TypeError) as exc:
            self._fail(f"grid: {exc}", "grid", _guess_key(exc, self.grid, self.lines, "grid"))
        try:
            params = self.model_params()
        except (ValueError, TypeError) as exc:
            self._fail(f"model: {exc}", "model", _guess_key(exc, self.model, self.lines, "model"))
        try:
            preset = self.boundary_preset()
        except (ValueError, TypeError) as exc:
            self._fail(f"model.boundary: {exc}", "model", "boundary")
        if hasattr(preset, "center") and len(preset.center) != int(self.grid["dimension"]):
            self._fail("model.boundary.center needs one entry per axis", "model", "boundary", "center")
        try:
            self.solver_config(params=params)
        except (ValueError, TypeError) as exc:
            self._fail(f"solver: {exc}", "solver", _guess_key(exc, self.solver, self.lines, "solver"))
        d = self.diagnostics
        if not 0 < float(d["delta"]) <= 1:
            self._fail("diagnostics.delta must lie in (0, 1]", "diagnostics", "delta")
        if float(d["horizon"]) <= 0:
            self._fail("diagnostics.horizon must be positive", "diagnostics", "horizon")
        if any(float(h) < 0 for h in d["shifts"]) or not d["shifts"]:
            self._fail("diagnostics.shifts must be a nonempty list of nonnegative times", "diagnostics", "shifts")
        for key in ("ensemble_size", "calibration_size", "validation_size", "ic_modes"):
            if int(d[key]) < 1:
                self._fail(f"diagnostics.{key} must be a positive integer", "diagnostics", key)
        if d["seed"] is None or int(d["seed"]) < 0:
            self._fail("diagnostics.seed must be a nonnegative integer", "diagnostics", "seed")
        if d["initial"] not in INITIAL_KINDS:
            self._fail(f"diagnostics.initial must be one of {INITIAL_KINDS}", "diagnostics", "initial")
        if not isinstance(self.output.get("directory"), str):
            self._fail("output.directory must be a string", "output", "directory")
        return self


def _guess_key(exc: Exception, block: dict, lines: dict = None, prefix: str = "") -> str:
    """Key of ``block`` named in the error message, preferring keys written in the file."""
    msg = str(exc)
    hits = [k for k in block if k in msg]
    if lines:
        present = [k for k in hits if (prefix, k) in lines]
        hits = present or hits
    return max(hits, key=len) if hits else ""


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"malformed YAML: {getattr(exc, 'problem', exc)}", mark.line + 1 if mark else None, source) from None
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping of blocks", 1, source)
    lines = _key_lines(text)
    merged = _merge(DEFAULTS, data, (), lines, source)
    cfg = RunConfig(**merged, source=source, lines=lines)
    return cfg.validate()


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, str(path)) from None
    return parse_config(text, str(path))


def default_config() -> RunConfig:
    return parse_config("")
