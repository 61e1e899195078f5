"""Experiment configuration: JSON schema, validation and the typed config object."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .errors import ConfigError

NUM = {"type": "number"}
POS = {"type": "number", "exclusiveMinimum": 0}
POS_INT = {"type": "integer", "minimum": 1}
UNIT = {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}


def _list(item, min_items=1):
    return {"type": "array", "items": item, "minItems": min_items}


EXPERIMENT_PARAMS = {
    "spectra": {"lambda_max": POS},
    "observability": {"lambdas": _list(POS)},
    "doubling": {"center": NUM, "radius": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 0.25},
                 "lambdas": _list(POS), "random_packets": {"type": "integer", "minimum": 0}},
    "interpolation": {"T": POS, "alpha": POS, "lambda": POS, "packets": POS_INT, "kappa_grid": _list(UNIT),
                      "panels": {"type": "integer", "minimum": 4}},
    "psi-check": {"T": POS, "eps_grid": _list(UNIT)},
    "powers": {"modes": {"type": "integer", "minimum": 2}, "z": _list(NUM), "nodes": {"type": "integer", "minimum": 10}},
    "product-bounds": {"T": POS, "K": POS_INT, "eps_grid": _list(UNIT), "lambda_max": POS},
    "control": {"alpha": POS, "T": POS, "modes": POS_INT},
    "cost-curve": {"alpha": POS, "T_grid": _list(POS), "modes": POS_INT},
}

EXPERIMENT_NAMES = tuple(EXPERIMENT_PARAMS)

TOLERANCE_KEYS = {
    "residual": 1e-8,
    "orthonormality": 1e-10,
    "power": 1e-6,
    "psi": 1e-6,
    "r2": 0.9,
    "doubling_r2": 0.8,
    "symmetry": 1e-8,
}


def _experiment_schema():
    branches = []
    for name, params in EXPERIMENT_PARAMS.items():
        branches.append({
            "if": {"properties": {"name": {"const": name}}, "required": ["name"]},
            "then": {"properties": {"name": {"const": name}, **params}, "additionalProperties": False},
        })
    return {
        "type": "object",
        "required": ["name"],
        "properties": {"name": {"enum": list(EXPERIMENT_NAMES)}},
        "allOf": branches,
    }


SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["manifold", "operator", "experiments"],
    "properties": {
        "manifold": {
            "type": "object", "additionalProperties": False, "required": ["n", "N"],
            "properties": {"n": {"type": "integer", "minimum": 1, "maximum": 3}, "N": POS_INT},
        },
        "operator": {
            "type": "object", "additionalProperties": False, "required": ["symbol"],
            "properties": {
                "symbol": {"enum": ["shifted-laplacian", "variable-coefficient"]},
                "nu": POS, "shift": {"type": "number", "minimum": 0}, "amplitude": POS,
            },
        },
        "sensor": {
            "type": "object", "additionalProperties": False, "required": ["boxes"],
            "properties": {"boxes": _list(_list(_list(NUM, 2)))},
        },
        "experiments": {"type": "array", "items": _experiment_schema()},
        "output_dir": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "tolerances": {
            "type": "object", "additionalProperties": False,
            "properties": {k: {"type": "number", "exclusiveMinimum": 0} for k in TOLERANCE_KEYS},
        },
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    raw: dict = field(repr=False)
    n: int
    N: int
    symbol: str
    nu: float
    shift: float
    amplitude: float
    boxes: tuple
    experiments: tuple
    output_dir: str | None
    seed: int
    tolerances: dict

    @property
    def digest(self) -> str:
        return config_digest(self.raw)


def config_digest(raw: dict) -> str:
    """sha256 of the canonical JSON form (sorted keys), stable under key reordering."""
    text = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def _where(err: jsonschema.ValidationError) -> str:
    path = "/".join(str(p) for p in err.absolute_path)
    return path or "<root>"


def validate_config(raw) -> ExperimentConfig:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: (len(list(e.absolute_path)), str(e.absolute_path)))
    if errors:
        err = errors[0]
        # "additionalProperties" messages name the offending key in the message itself
        raise ConfigError(f"{_where(err)}: {err.message}", where=_where(err))
    op = raw["operator"]
    nu = float(op.get("nu", 2.0))
    n = raw["manifold"]["n"]
    boxes = raw.get("sensor", {}).get("boxes", [[[0.0, 1.0]] * n])
    for i, box in enumerate(boxes):
        if len(box) != n:
            raise ConfigError(f"sensor/boxes/{i}: box has {len(box)} intervals, manifold has dimension {n}",
                              where=f"sensor/boxes/{i}")
        for j, (lo, hi) in enumerate(box):
            if not 0 <= lo < hi <= 1:
                raise ConfigError(f"sensor/boxes/{i}/{j}: interval ({lo}, {hi}) must satisfy 0 <= lo < hi <= 1",
                                  where=f"sensor/boxes/{i}/{j}")
    tol = dict(TOLERANCE_KEYS)
    tol.update(raw.get("tolerances", {}))
    return ExperimentConfig(
        raw=raw, n=n, N=raw["manifold"]["N"], symbol=op["symbol"], nu=nu, shift=float(op.get("shift", 1.0)),
        amplitude=float(op.get("amplitude", 2.0)), boxes=tuple(tuple(tuple(iv) for iv in b) for b in boxes),
        experiments=tuple(raw["experiments"]), output_dir=raw.get("output_dir"), seed=int(raw.get("seed", 0)),
        tolerances=tol,
    )


def load_config(path) -> ExperimentConfig:
    """Read and validate a JSON config; syntax errors report the line and column."""
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}", where=f"line {exc.lineno}") from exc
    return validate_config(raw)
