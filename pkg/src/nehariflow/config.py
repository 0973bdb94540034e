"""Run configuration files: TOML loading, schema validation, builders.

A config is one TOML document with [problem], [discretization] and
optionally [flow], [seed], [output] plus one section per driver command
([sweep], [compare], [converge], [crosscheck], [omega0], [oracle_check]).
Unknown keys anywhere are rejected before any computation starts.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

try:
    import tomllib
except ModuleNotFoundError:                       # Python < 3.11
    import tomli as tomllib

import jsonschema
import numpy as np

from .discretize import assemble, read_field_csv
from .errors import ConfigurationError
from .flows import FlowConfig
from .nehari import gaussian_seed, project_to_nehari
from .potentials import (DeltaSum, DoubleWellGaussian, FiniteWell,
                         GaussianWell, InversePower, Tabulated,
                         TrappedCosineGaussian, ZeroPotential)
from .problem import Ball, Box, Field, ProblemSpec

__all__ = ["CONFIG_SCHEMA", "RunConfig", "load_config", "parse_config"]


_POTENTIAL_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["zero", "delta", "well", "inverse_power",
                          "gaussian_well", "double_well", "cosine_gaussian",
                          "tabulated"]},
        "strengths": {"type": "array", "items": {"type": "number"}},
        "centers": {"type": "array", "items": {"type": "number"}},
        "depth": {"type": "number"},
        "radius": {"type": "number"},
        "region": {"type": "array", "items": {"type": "number"},
                   "minItems": 2, "maxItems": 2},
        "gamma": {"type": "number"},
        "sigma": {"type": "number"},
        "separation": {"type": "number"},
        "nodes": {"type": "array", "items": {"type": "number"}},
        "values": {"type": "array", "items": {"type": "number"}},
        "radial": {"type": "boolean"},
    },
}

CONFIG_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "additionalProperties": False,
    "required": ["problem", "discretization"],
    "properties": {
        "problem": {
            "type": "object",
            "additionalProperties": False,
            "required": ["alpha", "omega", "dim", "potential"],
            "properties": {
                "alpha": {"type": "number", "exclusiveMinimum": 0},
                "omega": {"type": "number"},
                "dim": {"enum": [1, 2, 3]},
                "geometry": {"enum": ["box", "radial"]},
                "domain": {"type": "array",
                           "items": {"type": "array",
                                     "items": {"type": "number"},
                                     "minItems": 2, "maxItems": 2}},
                "radius": {"type": "number", "exclusiveMinimum": 0},
                "potential": _POTENTIAL_SCHEMA,
            },
        },
        "discretization": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind", "h"],
            "properties": {
                "kind": {"enum": ["fd2", "sp", "fe"]},
                "h": {"anyOf": [{"type": "number", "exclusiveMinimum": 0},
                                {"type": "array",
                                 "items": {"type": "number",
                                           "exclusiveMinimum": 0}}]},
                "fe_order": {"enum": [1, 2]},
                "lumped": {"type": "boolean"},
            },
        },
        "flow": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "scheme": {"enum": ["bf", "be", "pgf_bf", "ts"]},
                "tau": {"type": "number", "exclusiveMinimum": 0},
                "epsilon": {"type": "number", "exclusiveMinimum": 0},
                "max_iters": {"type": "integer", "minimum": 1},
                "stop_norm": {"enum": ["max", "l2"]},
                "theta": {"type": "number", "minimum": 0},
                "be_tol": {"type": "number", "exclusiveMinimum": 0},
                "record_history": {"type": "boolean"},
            },
        },
        "seed": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["gaussian", "sech_gaussian", "file"]},
                "shift": {"type": "array", "items": {"type": "number"}},
                "path": {"type": "string"},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "directory": {"type": "string"},
                "write_field": {"type": "boolean"},
                "write_history": {"type": "boolean"},
                "write_report": {"type": "boolean"},
                "rescaled": {"type": "array",
                             "items": {"enum": ["hat", "check"]}},
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "omegas": {"type": "array",
                           "items": {"type": "number"}, "minItems": 1},
                "omega_min": {"type": "number"},
                "omega_max": {"type": "number"},
                "count": {"type": "integer", "minimum": 2},
                "warm_start": {"type": "boolean"},
                "workers": {"type": "integer", "minimum": 1},
                "stability": {"type": "boolean"},
            },
        },
        "compare": {
            "type": "object",
            "additionalProperties": False,
            "required": ["case"],
            "properties": {
                "case": {"enum": ["I", "II", "III"]},
                "taus": {"type": "array",
                         "items": {"type": "number", "exclusiveMinimum": 0}},
                "schemes": {"type": "array",
                            "items": {"enum": ["bf", "be", "pgf_bf",
                                               "ts"]}},
            },
        },
        "converge": {
            "type": "object",
            "additionalProperties": False,
            "required": ["h_list"],
            "properties": {
                "h_list": {"type": "array", "minItems": 2,
                           "items": {"type": "number",
                                     "exclusiveMinimum": 0}},
                "reference": {"enum": ["oracle", "self"]},
            },
        },
        "crosscheck": {
            "type": "object",
            "additionalProperties": False,
            "required": ["masses"],
            "properties": {
                "masses": {"type": "array", "minItems": 1,
                           "items": {"type": "number",
                                     "exclusiveMinimum": 0}},
            },
        },
        "omega0": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "max_iters": {"type": "integer", "minimum": 1},
            },
        },
        "oracle_check": {
            "type": "object",
            "additionalProperties": False,
            "required": ["name"],
            "properties": {
                "name": {"enum": ["free_soliton", "delta"]},
            },
        },
    },
}


def _need(section: dict, key: str, where: str):
    if key not in section:
        raise ConfigurationError(f"config key {where}.{key} is required")
    return section[key]


def _build_potential(cfg: dict):
    kind = cfg["kind"]
    where = "problem.potential"
    if kind == "zero":
        return ZeroPotential()
    if kind == "delta":
        strengths = tuple(float(z) for z in _need(cfg, "strengths", where))
        centers = tuple(float(c) for c in cfg.get(
            "centers", [0.0] * len(strengths)))
        return DeltaSum(centers=centers, strengths=strengths)
    if kind == "well":
        depth = float(_need(cfg, "depth", where))
        if "region" in cfg:
            region = tuple(float(x) for x in cfg["region"])
        else:
            region = float(_need(cfg, "radius", where))
        return FiniteWell(depth=depth, region=region)
    if kind == "inverse_power":
        return InversePower(gamma=float(cfg.get("gamma", 1.0)),
                            sigma=float(_need(cfg, "sigma", where)))
    if kind == "gaussian_well":
        return GaussianWell(depth=float(cfg.get("depth", 1.0)))
    if kind == "double_well":
        return DoubleWellGaussian(
            separation=float(_need(cfg, "separation", where)))
    if kind == "cosine_gaussian":
        return TrappedCosineGaussian()
    if kind == "tabulated":
        return Tabulated(
            table_nodes=tuple(float(x) for x in _need(cfg, "nodes", where)),
            table_values=tuple(float(x)
                               for x in _need(cfg, "values", where)),
            radial=bool(cfg.get("radial", False)))
    raise ConfigurationError(f"config key {where}.kind: unknown potential "
                             f"kind {kind!r}")


def _build_problem(p: dict, theta: float) -> ProblemSpec:
    geometry = p.get("geometry", "box")
    if geometry == "radial":
        if "radius" not in p:
            raise ConfigurationError(
                "config key problem.radius is required for radial geometry")
        domain = Ball(float(p["radius"]))
    else:
        if "domain" not in p:
            raise ConfigurationError(
                "config key problem.domain is required for box geometry")
        domain = Box(tuple(tuple(float(x) for x in pair)
                           for pair in p["domain"]))
    return ProblemSpec(alpha=float(p["alpha"]), omega=float(p["omega"]),
                       dim=int(p["dim"]),
                       potential=_build_potential(p["potential"]),
                       domain=domain, theta=theta)


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration with builders for the heavy objects."""

    problem: ProblemSpec
    flow: FlowConfig
    disc: dict
    seed: dict = dc_field(default_factory=dict)
    output: dict = dc_field(default_factory=dict)
    extras: dict = dc_field(default_factory=dict)

    def build_ops(self):
        return assemble(self.problem, self.disc["h"], self.disc["kind"],
                        fe_order=int(self.disc.get("fe_order", 1)),
                        lumped=bool(self.disc.get("lumped", False)))

    def build_seed(self, ops) -> Field:
        kind = self.seed.get("kind", "gaussian")
        if kind == "file":
            if "path" not in self.seed:
                raise ConfigurationError(
                    "config key seed.path is required for seed kind 'file'")
            vals = read_field_csv(self.seed["path"])
            if vals.size != ops.grid.ndof:
                vals = ops.restrict_from_boundary(vals)
            raw = Field(np.asarray(vals, dtype=float), ops.grid)
            return project_to_nehari(raw, self.problem, ops).field
        shift = self.seed.get("shift")
        return gaussian_seed(self.problem, ops,
                             shift=tuple(shift) if shift else None,
                             kind=kind)

    def section(self, name: str) -> dict:
        return self.extras.get(name, {})


def parse_config(doc: dict) -> RunConfig:
    """Validate a parsed TOML document and build the core objects."""
    try:
        jsonschema.validate(doc, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = ".".join(str(p) for p in exc.absolute_path) or "(top level)"
        raise ConfigurationError(
            f"config key {where}: {exc.message}") from exc
    flow_raw = dict(doc.get("flow", {}))
    theta = float(flow_raw.pop("theta", 0.0))
    flow = FlowConfig(**flow_raw)
    problem = _build_problem(doc["problem"], theta)
    extras = {k: doc[k] for k in ("sweep", "compare", "converge",
                                  "crosscheck", "omega0", "oracle_check")
              if k in doc}
    return RunConfig(problem=problem, flow=flow, disc=doc["discretization"],
                     seed=doc.get("seed", {}), output=doc.get("output", {}),
                     extras=extras)


def load_config(path: str) -> RunConfig:
    """Load, validate and build a TOML run configuration."""
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"config file {path} is not valid TOML: "
                                 f"{exc}") from exc
    return parse_config(doc)
