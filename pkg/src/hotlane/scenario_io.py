"""YAML scenario files.

Schema (all rates per minute, times in minutes, money in dollars)::

    name: logit-constant
    capacities: {c1: 30, c2: 30}
    gains: {k1: 0.1, k2: 0.1, k3: 0.2, k4: 0.2}
    initial_lanes: {lambda1: 1, lambda2: 2}
    initial_controller: {a: 0.25, b: 0.1}
    dt: 0.0016666666666666668
    horizon: 20
    demand: {type: constant, q1: 10, q2: 60}
    #  or   {type: poisson, mean1: 10, mean2: 60, resample_every: 1}
    choice_model: {type: logit, pi_star: 0.5, alpha_star: 1}
    #  or   {type: ue, distribution: {type: exponential, rate: 2}}
    #  or   {type: ue, distribution: {type: burr, pi_star: 0.25, gamma: 3}}
    #  or   {type: affine, zeta: [...], A: [...], B: [...]}
    rng_seed: 0
    price_floor: true
    estimation: true

``dt`` may also be given as a ratio string such as ``"0.1/60"``.
"""
from __future__ import annotations

from importlib import resources
from pathlib import Path

import yaml

from .domain import (
    Capacities,
    ConstantDemand,
    ControllerState,
    Gains,
    LaneState,
    PoissonDemand,
    ScenarioConfig,
)
from .lane_choice import BurrVot, ExponentialVot, GeneralAffineModel, LogitModel, UeModel

BUNDLED = {
    "logit-constant": "logit_constant.yaml",
    "logit-poisson": "logit_poisson.yaml",
    "ue-constant": "ue_constant.yaml",
    "ue-poisson": "ue_poisson.yaml",
    "logit-coarse-dt": "logit_coarse_dt.yaml",
}


class SchemaError(ValueError):
    pass


def _number(value, where):
    if isinstance(value, bool):
        raise SchemaError(f"{where}: expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            if "/" in value:
                num, den = value.split("/")
                return float(num) / float(den)
            return float(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise SchemaError(f"{where}: cannot parse {value!r}") from exc
    raise SchemaError(f"{where}: expected a number, got {value!r}")


def _section(doc, key):
    value = doc.get(key)
    if not isinstance(value, dict):
        raise SchemaError(f"missing or malformed section '{key}'")
    return value


def _field(section, key, where):
    if key not in section:
        raise SchemaError(f"{where}.{key} is required")
    return _number(section[key], f"{where}.{key}")


def _choice_model(doc):
    spec = _section(doc, "choice_model")
    kind = spec.get("type")
    if kind == "logit":
        return LogitModel(_field(spec, "pi_star", "choice_model"), _field(spec, "alpha_star", "choice_model"))
    if kind == "ue":
        dist = spec.get("distribution")
        if not isinstance(dist, dict):
            raise SchemaError("choice_model.distribution is required for type 'ue'")
        dkind = dist.get("type")
        if dkind == "exponential":
            return UeModel(ExponentialVot(_field(dist, "rate", "choice_model.distribution")))
        if dkind == "burr":
            return UeModel(BurrVot(_field(dist, "pi_star", "choice_model.distribution"),
                                   _field(dist, "gamma", "choice_model.distribution")))
        raise SchemaError(f"unknown VOT distribution type {dkind!r}")
    if kind == "affine":
        tables = []
        for key in ("zeta", "A", "B"):
            values = spec.get(key)
            if not isinstance(values, list):
                raise SchemaError(f"choice_model.{key} must be a list")
            tables.append(tuple(_number(v, f"choice_model.{key}") for v in values))
        return GeneralAffineModel(*tables)
    raise SchemaError(f"unknown choice model type {kind!r}")


def _demand(doc):
    spec = _section(doc, "demand")
    kind = spec.get("type")
    if kind == "constant":
        return ConstantDemand(_field(spec, "q1", "demand"), _field(spec, "q2", "demand"))
    if kind == "poisson":
        every = _number(spec.get("resample_every", 1.0), "demand.resample_every")
        return PoissonDemand(_field(spec, "mean1", "demand"), _field(spec, "mean2", "demand"), every)
    raise SchemaError(f"unknown demand type {kind!r}")


def scenario_from_dict(doc: dict) -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise SchemaError("scenario must be a mapping")
    caps = _section(doc, "capacities")
    gains = _section(doc, "gains")
    lanes = _section(doc, "initial_lanes")
    ctrl = _section(doc, "initial_controller")
    seed = doc.get("rng_seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise SchemaError(f"rng_seed must be an integer, got {seed!r}")
    return ScenarioConfig(
        capacities=Capacities(_field(caps, "c1", "capacities"), _field(caps, "c2", "capacities")),
        gains=Gains(*(_field(gains, k, "gains") for k in ("k1", "k2", "k3", "k4"))),
        initial_lanes=LaneState(_field(lanes, "lambda1", "initial_lanes"), _field(lanes, "lambda2", "initial_lanes")),
        initial_controller=ControllerState(_field(ctrl, "a", "initial_controller"),
                                           _field(ctrl, "b", "initial_controller")),
        dt=_field(doc, "dt", "scenario"),
        horizon=_field(doc, "horizon", "scenario"),
        demand_spec=_demand(doc),
        choice_model=_choice_model(doc),
        rng_seed=seed,
        price_floor_enabled=bool(doc.get("price_floor", True)),
        estimation_enabled=bool(doc.get("estimation", True)),
        name=str(doc.get("name", "")),
    )


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    model = cfg.choice_model
    if isinstance(model, LogitModel):
        choice = {"type": "logit", "pi_star": model.pi_star, "alpha_star": model.alpha_star}
    elif isinstance(model, UeModel) and isinstance(model.dist, ExponentialVot):
        choice = {"type": "ue", "distribution": {"type": "exponential", "rate": model.dist.rate}}
    elif isinstance(model, UeModel) and isinstance(model.dist, BurrVot):
        choice = {"type": "ue", "distribution": {"type": "burr", "pi_star": model.dist.pi_star,
                                                 "gamma": model.dist.gamma}}
    elif isinstance(model, GeneralAffineModel):
        choice = {"type": "affine", "zeta": list(model.zeta), "A": list(model.A), "B": list(model.B)}
    else:
        raise SchemaError(f"{type(model).__name__} has no file representation")
    spec = cfg.demand_spec
    if isinstance(spec, ConstantDemand):
        demand = {"type": "constant", "q1": spec.q1, "q2": spec.q2}
    else:
        demand = {"type": "poisson", "mean1": spec.mean1, "mean2": spec.mean2,
                  "resample_every": spec.resample_every}
    return {
        "name": cfg.name,
        "capacities": {"c1": cfg.capacities.c1, "c2": cfg.capacities.c2},
        "gains": {"k1": cfg.gains.k1, "k2": cfg.gains.k2, "k3": cfg.gains.k3, "k4": cfg.gains.k4},
        "initial_lanes": {"lambda1": cfg.initial_lanes.lambda1, "lambda2": cfg.initial_lanes.lambda2},
        "initial_controller": {"a": cfg.initial_controller.a, "b": cfg.initial_controller.b},
        "dt": cfg.dt,
        "horizon": cfg.horizon,
        "demand": demand,
        "choice_model": choice,
        "rng_seed": cfg.rng_seed,
        "price_floor": cfg.price_floor_enabled,
        "estimation": cfg.estimation_enabled,
    }


def loads(text: str) -> ScenarioConfig:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise SchemaError(f"invalid YAML: {exc}") from exc
    return scenario_from_dict(doc)


def dumps(cfg: ScenarioConfig) -> str:
    # PyYAML writes floats with repr(), which round-trips exactly.
    return yaml.safe_dump(scenario_to_dict(cfg), sort_keys=False)


def load_scenario(path) -> ScenarioConfig:
    return loads(Path(path).read_text())


def bundled_path(name: str):
    if name not in BUNDLED:
        raise KeyError(name)
    return resources.files("hotlane") / "scenarios" / BUNDLED[name]


def load_bundled(name: str) -> ScenarioConfig:
    return loads(bundled_path(name).read_text())
