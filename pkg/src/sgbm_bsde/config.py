"""JSON problem configuration for ad-hoc ``solve`` runs.

Example::

    {
      "model": {"problem": "geometric_basket", "q": 5},
      "grid": {"T": 1.0, "N": 20},
      "scheme": {"theta1": 0.0, "theta2": 1.0, "picard": 1},
      "regression": {"basis_family": "geometric_mean_powers", "Q": 3},
      "bundling": {"B": 16, "sort_key": "basis"},
      "guard": {"L": null},
      "mc": {"M": 4096, "seed": 0}
    }

``guard.L`` may be a number, ``null`` or ``"inf"`` (no bound).  Unknown
fields are rejected at every level.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import jsonschema
import numpy as np

from .basis import FAMILIES, WEIGHTED_SUM, BasisSpec
from .errors import ConfigurationError
from .forward import EULER, EXACT_GBM
from .oracles import example1_exact, geometric_basket_put
from .problems import (DAX_RATE, DAX_RHO, DAX_SPOT, DAX_VOLS, DAX_WEIGHTS,
                       arithmetic_basket_problem, example1_problem, geometric_basket_problem)
from .solver import BsdeProblem, SchemeConfig

_num = {"type": "number"}
_pos_int = {"type": "integer", "minimum": 1}
_vec = {"type": "array", "items": _num, "minItems": 1}
_dyn = {"enum": [EULER, EXACT_GBM]}


def _section(props, required=None):
    return {"type": "object", "properties": props, "additionalProperties": False,
            "required": list(props) if required is None else required}


MODEL_SCHEMAS = {
    "example1": _section({"problem": {"const": "example1"}, "x0": _num}, ["problem"]),
    "arithmetic_basket": _section({
        "problem": {"const": "arithmetic_basket"}, "dynamics": _dyn, "spot": {"oneOf": [_num, _vec]},
        "r": _num, "vols": _vec, "rho": {"type": "array", "items": _vec}, "weights": _vec, "strike": _num,
    }, ["problem"]),
    "geometric_basket": _section({
        "problem": {"const": "geometric_basket"}, "q": _pos_int, "dynamics": _dyn, "spot": _num,
        "strike": _num, "r": _num, "vol": _num, "corr": _num,
    }, ["problem", "q"]),
}

SCHEMA = _section({
    "model": {"type": "object", "properties": {"problem": {"enum": list(MODEL_SCHEMAS)}},
              "required": ["problem"]},
    "grid": _section({"T": {"type": "number", "exclusiveMinimum": 0}, "N": _pos_int}),
    "scheme": _section({"theta1": {"type": "number", "minimum": 0, "maximum": 1},
                        "theta2": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                        "picard": _pos_int}),
    "regression": _section({"basis_family": {"enum": list(FAMILIES)}, "Q": _pos_int, "weights": _vec},
                           ["basis_family", "Q"]),
    "bundling": _section({"B": _pos_int, "sort_key": {"enum": ["basis", "first_component"]}}),
    "guard": _section({"L": {"oneOf": [{"type": "number", "minimum": 0}, {"type": "null"},
                                       {"const": "inf"}]}}),
    "mc": _section({"M": _pos_int, "seed": {"type": "integer", "minimum": 0}}),
})


@dataclass
class SolveJob:
    problem: BsdeProblem
    config: SchemeConfig
    M: int
    seed: int
    reference: Optional[float] = None
    z_reference: Optional[list] = None


def _validate(instance, schema, where):
    try:
        jsonschema.validate(instance, schema)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path)
        raise ConfigurationError(f"invalid config at {where}{'/' + path if path else ''}: {exc.message}") from None


def parse_config(data: dict) -> SolveJob:
    _validate(data, SCHEMA, "<root>")
    model = data["model"]
    _validate(model, MODEL_SCHEMAS[model["problem"]], "model")
    grid = data["grid"]
    T, N = float(grid["T"]), int(grid["N"])
    reference = z_ref = None
    kind = model["problem"]
    if kind == "example1":
        x0 = float(model.get("x0", 0.0))
        problem = example1_problem(N, T=T, x0=x0)
        y, z = example1_exact(0.0, x0)
        reference, z_ref = float(y), [float(z)]
    elif kind == "arithmetic_basket":
        problem = arithmetic_basket_problem(
            N=N, T=T, dynamics=model.get("dynamics", EULER), spot=model.get("spot", DAX_SPOT),
            r=model.get("r", DAX_RATE), vols=model.get("vols", DAX_VOLS), rho=model.get("rho", DAX_RHO),
            weights=model.get("weights", DAX_WEIGHTS), strike=model.get("strike", 1.0))
    else:
        q = int(model["q"])
        kw = {k: float(model[k]) for k in ("spot", "strike", "r", "vol", "corr") if k in model}
        problem = geometric_basket_problem(q, N=N, T=T, dynamics=model.get("dynamics", EXACT_GBM), **kw)
        if problem.model.scheme == EXACT_GBM:
            r = kw.get("r", 0.06)
            reference = geometric_basket_put(kw.get("spot", 40.0), kw.get("strike", 40.0), r,
                                             np.full(q, kw.get("vol", 0.2)), kw.get("corr", 0.25), T)

    reg = data["regression"]
    weights = reg.get("weights")
    if reg["basis_family"] == WEIGHTED_SUM and weights is None:
        if kind != "arithmetic_basket":
            raise ConfigurationError("weighted_sum_powers basis needs regression.weights")
        weights = model.get("weights", DAX_WEIGHTS)
    basis = BasisSpec(reg["basis_family"], int(reg["Q"]), q=problem.model.q,
                      weights=tuple(weights) if weights is not None else None)
    L = data["guard"]["L"]
    bound = math.inf if L is None or L == "inf" else float(L)
    scheme = data["scheme"]
    cfg = SchemeConfig(theta1=float(scheme["theta1"]), theta2=float(scheme["theta2"]), basis=basis,
                       bundles=int(data["bundling"]["B"]), picard=int(scheme["picard"]), bound=bound,
                       sort_key=data["bundling"]["sort_key"])
    mc = data["mc"]
    return SolveJob(problem=problem, config=cfg, M=int(mc["M"]), seed=int(mc["seed"]),
                    reference=reference, z_reference=z_ref)


def load_config(path) -> SolveJob:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    return parse_config(data)
