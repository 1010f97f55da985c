"""Experiment configuration: one JSON document per experiment.

Layout::

    {
      "problem":      {"m": 400, "n": 200, "cells" | "cell_fractions" | "memberships": ...},
      "distribution": {"kind": "uniform", ...},
      "bias":         {"kind": "multiplicative", "beta": [0.5, 0.5]},
      "constraints":  {"kind": "design", "epsilon": 0.05}
                      | {"kind": "proportional"} | {"kind": "none"}
                      | {"kind": "intersectional", "bounds": {...}}
                      | {"kind": "nonintersectional", "bounds": [...]},
      "run":          {"trials": 1000, "seed": 0, "L1_grid": ..., "L2_grid": ...,
                       "grid_resolution": 200, "beta_grid": [[b1, b2], ...],
                       "bounds": "proportional" | [L1, L2]},
      "output":       {"dir": "out"}
    }

Grids are either explicit lists or ``{"start", "stop", "step"}`` with an
inclusive stop.  Every field is checked by :func:`parse_config` before any
computation runs.
"""

from dataclasses import dataclass, field
import json

import numpy as np

from . import bias as bias_mod
from . import distributions as dist_mod
from .core import (
    NonIntersectional,
    SelectionProblem,
    check_feasibility,
    constraints_from_dict,
    design_intersectional,
    proportional_nonintersectional,
    structure_from_dict,
)
from .exceptions import BiasedSelectError, InfeasibleConstraintsError, ValidationError
from .validation import check_count, check_open_unit

DEFAULT_TRIALS = {"simulate": 1000, "sweep": 200}
MAX_SEED = 2**64 - 1


class ConfigError(ValidationError):
    """The configuration document is malformed or violates a precondition."""


@dataclass
class ExperimentConfig:
    command: str
    problem: SelectionProblem
    distribution: object
    bias: object
    constraints: object = None
    epsilon: float = None
    trials: int = 1000
    seed: int = 0
    L1_grid: np.ndarray = None
    L2_grid: np.ndarray = None
    L3_grid: np.ndarray = None
    grid_resolution: int = 200
    beta_grid: list = field(default_factory=list)
    fixed_bounds: object = None
    out_dir: str = "."


def load(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None


def _section(doc, key, required=True):
    val = doc.get(key)
    if val is None:
        if required:
            raise ConfigError(f"config is missing the {key!r} section")
        return {}
    if not isinstance(val, dict):
        raise ConfigError(f"config section {key!r} must be an object")
    return val


def _grid(spec, name, high):
    if spec is None:
        return None
    if isinstance(spec, dict):
        try:
            start, stop, step = int(spec["start"]), int(spec["stop"]), int(spec.get("step", 1))
        except (KeyError, TypeError, ValueError):
            raise ConfigError(f"{name} needs integer start, stop and step") from None
        if step <= 0:
            raise ConfigError(f"{name} step must be positive")
        values = np.arange(start, stop + 1, step)
    else:
        values = np.asarray(spec)
    if values.ndim != 1 or values.size == 0:
        raise ConfigError(f"{name} must be a non-empty list")
    try:
        ints = np.array([check_count(v, name=name, low=0, high=high) for v in values.tolist()], dtype=np.int64)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from None
    return ints


def _beta_grid(raw, p):
    if raw is None:
        return []
    out = []
    for row in raw:
        b = tuple(float(x) for x in (row if isinstance(row, (list, tuple)) else [row] * p))
        if len(b) != p or not all(0 < x <= 1 for x in b):
            raise ConfigError(f"beta_grid entry {row!r} must hold {p} values in (0, 1]")
        out.append(b)
    return out


def parse_config(doc, command, *, seed=None, trials=None, out_dir=None):
    """Build and fully validate an :class:`ExperimentConfig`.

    Raises :class:`ConfigError` for malformed input and
    :class:`InfeasibleConstraintsError` for constraints no selection meets.
    """
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    try:
        return _parse(doc, command, seed, trials, out_dir)
    except (ConfigError, InfeasibleConstraintsError):
        raise
    except BiasedSelectError as exc:
        raise ConfigError(str(exc)) from None
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad config value: {exc}") from None


def _parse(doc, command, seed, trials, out_dir):
    pdoc = _section(doc, "problem")
    structure = structure_from_dict(pdoc)
    n = check_count(pdoc.get("n"), name="n", low=1, high=structure.m)
    problem = SelectionProblem(structure, n)
    dist = dist_mod.from_dict(_section(doc, "distribution"))
    bias = bias_mod.from_dict(_section(doc, "bias")).validate()
    beta = getattr(bias, "beta", None)
    if beta is not None and len(beta) != structure.p:
        raise ConfigError(f"bias has {len(beta)} parameters for p={structure.p} groups")

    run = _section(doc, "run", required=False)
    cfg = ExperimentConfig(command, problem, dist, bias)
    cfg.seed = int(run.get("seed", 0)) if seed is None else int(seed)
    if not 0 <= cfg.seed <= MAX_SEED:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    raw_trials = run.get("trials", DEFAULT_TRIALS.get(command, 1000)) if trials is None else trials
    cfg.trials = check_count(raw_trials, name="trials", low=1)
    cfg.grid_resolution = check_count(run.get("grid_resolution", 200), name="grid_resolution", low=2)
    cfg.beta_grid = _beta_grid(run.get("beta_grid"), structure.p)
    cfg.out_dir = out_dir or _section(doc, "output", required=False).get("dir", ".")

    cdoc = doc.get("constraints") or {"kind": "none"}
    kind = cdoc.get("kind")
    if kind == "design":
        cfg.epsilon = check_open_unit(cdoc.get("epsilon"), name="epsilon")
        cfg.constraints = design_intersectional(problem, cfg.epsilon)
    elif kind == "proportional":
        cfg.constraints = proportional_nonintersectional(problem)
    elif kind == "none":
        cfg.constraints = None
    else:
        cfg.constraints = constraints_from_dict(cdoc)
    if command == "design" and cfg.epsilon is None:
        raise ConfigError("design needs constraints {'kind': 'design', 'epsilon': ...}")

    if command == "sweep":
        if structure.p not in (2, 3):
            raise ConfigError("sweep needs p = 2 or p = 3 groups")
        names = ["L1_grid", "L2_grid", "L3_grid"][: structure.p]
        grids = []
        for ell, name in enumerate(names):
            if name not in run:
                raise ConfigError(f"sweep needs run.{name}")
            grids.append(_grid(run[name], name, structure.group_size(ell)))
        cfg.L1_grid, cfg.L2_grid = grids[0], grids[1]
        cfg.L3_grid = grids[2] if len(grids) > 2 else None

    if command == "asymptotic":
        if structure.p != 2:
            raise ConfigError("asymptotic needs p = 2 groups")
        fixed = run.get("bounds")
        if fixed == "proportional":
            cfg.fixed_bounds = tuple(structure.group_size(ell) * n / structure.m for ell in range(2))
        elif fixed is not None:
            vals = tuple(float(v) for v in fixed)
            if len(vals) != 2 or any(v < 0 for v in vals):
                raise ConfigError("run.bounds must be 'proportional' or [L1, L2] with L >= 0")
            cfg.fixed_bounds = vals
        if cfg.beta_grid and not isinstance(bias, bias_mod.MultiplicativeBias):
            raise ConfigError("run.beta_grid applies to multiplicative bias only")

    if cfg.constraints is not None and command in ("simulate", "design"):
        verdict = check_feasibility(problem, cfg.constraints)
        if not verdict:
            raise InfeasibleConstraintsError(verdict.reason)
    if command == "simulate" and isinstance(cfg.constraints, NonIntersectional) and structure.p > 3:
        raise ConfigError("group lower bounds are solved exactly only for p <= 3")
    return cfg


def biases_for(cfg):
    """The bias models to run: one per ``beta_grid`` row, else the configured one."""
    if cfg.beta_grid:
        return [bias_mod.MultiplicativeBias(b) for b in cfg.beta_grid]
    return [cfg.bias]

