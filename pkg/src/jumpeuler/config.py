"""Experiment configuration: JSON parsing, schedules and inline models."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Tuple, Union

import numpy as np

from .errors import ConfigError, InvalidParameter
from .expr import Expression, compile_scalar, integer_rule
from .model import (
    ClassParams,
    CompiledCoefficients,
    FactorizedDiffusion,
    JumpLaw,
    ModelSpec,
    power_tail_delta,
    validate_model,
)
from .models import PRESETS, merton_marks

ESTIMATORS = ("coupled", "exact-reference")


def _normal_marks(rng, size):
    return rng.standard_normal((size, 1))


def _exponential_marks(rng, size):
    return rng.standard_exponential((size, 1))


MARK_LAWS = {"ones": None, "normal": _normal_marks, "exponential": _exponential_marks,
             "merton": merton_marks}


@dataclass
class ExperimentConfig:
    model: Union[str, Dict[str, Any]]
    schedule: List[int]
    n_rule: str
    K: int = 1000
    p: float = 2.0
    seed: int = 0
    estimator: str = "coupled"
    multipliers: Tuple[int, int] = (10, 100)
    ref_mult: int = 10
    workers: Union[int, str, None] = None
    model_overrides: Dict[str, Any] = field(default_factory=dict)

    def n_for(self, M: int) -> int:
        return integer_rule(self.n_rule, "M", "n_rule")(M)

    def build_model(self) -> ModelSpec:
        return build_model(self.model, self.model_overrides)


def _require(cond, msg):
    if not cond:
        raise ConfigError(msg)


def parse_schedule(raw) -> List[int]:
    """Explicit list of M values, or ``{base, growth, step, count}`` meaning
    ``M_i = floor(base * growth^(i*step))`` for ``i < count``, or
    ``{rule, count}`` with ``rule`` an expression in ``i``."""
    if isinstance(raw, list):
        out = raw
    elif isinstance(raw, dict):
        _require("count" in raw, "schedule: missing 'count'")
        count = raw["count"]
        _require(isinstance(count, int) and count >= 1, "schedule.count: need an integer >= 1")
        if "rule" in raw:
            rule = integer_rule(raw["rule"], "i", "schedule.rule")
            out = [rule(i) for i in range(count)]
        else:
            for key in ("base", "growth"):
                _require(key in raw, f"schedule: missing {key!r}")
            base, growth, step = raw["base"], raw["growth"], raw.get("step", 1.0)
            out = [math.floor(base * growth ** (i * step)) for i in range(count)]
    else:
        raise ConfigError("schedule: expected a list or an object")
    _require(len(out) >= 1, "schedule: must not be empty")
    for m in out:
        _require(isinstance(m, int) and not isinstance(m, bool) and m >= 1,
                 f"schedule: entries must be integers >= 1, got {m!r}")
    return list(out)


def parse_config(data: Dict[str, Any]) -> ExperimentConfig:
    _require(isinstance(data, dict), "config: top level must be an object")
    known = {"model", "schedule", "n_rule", "K", "p", "seed", "estimator", "multipliers",
             "ref_mult", "workers", "model_overrides"}
    extra = set(data) - known
    _require(not extra, f"config: unknown field(s) {sorted(extra)}")
    for key in ("model", "schedule", "n_rule"):
        _require(key in data, f"config: missing field {key!r}")
    model = data["model"]
    _require(isinstance(model, (str, dict)), "model: expected a preset name or an object")
    if isinstance(model, str):
        _require(model in PRESETS, f"model: unknown preset {model!r}; choose from {sorted(PRESETS)}")
    n_rule = data["n_rule"]
    if isinstance(n_rule, int):
        n_rule = str(n_rule)
    _require(isinstance(n_rule, str), "n_rule: expected an expression in M")
    Expression(n_rule, ("M",), "n_rule")
    K = data.get("K", 1000)
    _require(isinstance(K, int) and K >= 2, "K: need an integer >= 2")
    p = data.get("p", 2.0)
    _require(isinstance(p, (int, float)) and p >= 2, "p: need a number >= 2")
    seed = data.get("seed", 0)
    _require(isinstance(seed, int), "seed: need an integer")
    est = data.get("estimator", "coupled")
    _require(est in ESTIMATORS, f"estimator: expected one of {ESTIMATORS}")
    mult = data.get("multipliers", [10, 100])
    _require(isinstance(mult, (list, tuple)) and len(mult) == 2
             and all(isinstance(v, int) and v >= 1 for v in mult),
             "multipliers: need two integers >= 1")
    ref_mult = data.get("ref_mult", 10)
    _require(isinstance(ref_mult, int) and ref_mult >= 1, "ref_mult: need an integer >= 1")
    overrides = data.get("model_overrides", {})
    _require(isinstance(overrides, dict), "model_overrides: expected an object")
    cfg = ExperimentConfig(model, parse_schedule(data["schedule"]), n_rule, K, float(p), seed,
                           est, tuple(mult), ref_mult, data.get("workers"), overrides)
    for M in cfg.schedule:
        cfg.n_for(M)
    return cfg


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_config(data)


def build_model(model, overrides=None) -> ModelSpec:
    overrides = dict(overrides or {})
    if isinstance(model, str):
        spec_cls, factory = PRESETS[model]
        try:
            return factory(spec_cls(**overrides))
        except TypeError as exc:
            raise ConfigError(f"model_overrides: {exc}") from None
    return inline_model(dict(model, **overrides))


def inline_model(cfg: Dict[str, Any]) -> ModelSpec:
    """Scalar model from expression strings.

    Keys: ``drift`` (in t, x), ``diffusion`` = {``base`` (in t, x),
    ``weight`` (in j), optional ``tail_delta`` (in k)}, ``jump`` (in t, x, y),
    ``intensity``, ``marks`` (one of ``MARK_LAWS``), ``eta``, ``horizon`` and
    ``params`` (named constants usable in every expression).
    """
    known = {"drift", "diffusion", "jump", "intensity", "marks", "eta", "horizon", "params", "name"}
    extra = set(cfg) - known
    _require(not extra, f"model: unknown field(s) {sorted(extra)}")
    params = cfg.get("params", {})
    _require(isinstance(params, dict) and all(isinstance(v, (int, float)) for v in params.values()),
             "model.params: expected an object of numbers")
    clash = set(params) & {"t", "x", "y", "j", "k"}
    _require(not clash, f"model.params: reserved name(s) {sorted(clash)}")
    prm = np.array([float(v) for v in params.values()]) if params else np.zeros(1)
    names = list(params)

    drift_py, drift_nb, drift_expr = compile_scalar(cfg.get("drift", "0"), ("t", "x"), params, "model.drift")
    diff = cfg.get("diffusion", {"base": "0", "weight": "1"})
    _require(isinstance(diff, dict), "model.diffusion: expected an object")
    base_py, base_nb, _ = compile_scalar(diff.get("base", "0"), ("t", "x"), params, "model.diffusion.base")
    weight = Expression(diff.get("weight", "1"), ("j",) + tuple(names), "model.diffusion.weight")
    tail = None
    if "tail_delta" in diff:
        tail_expr = Expression(diff["tail_delta"], ("k",) + tuple(names), "model.diffusion.tail_delta",
                               functions={"power_tail_delta": power_tail_delta})

        def tail(k):
            return float(tail_expr(k=k, **params))
    jump_py, jump_nb, _ = compile_scalar(cfg.get("jump", "0"), ("t", "x", "y"), params, "model.jump")

    marks = cfg.get("marks", "ones")
    _require(marks in MARK_LAWS, f"model.marks: expected one of {sorted(MARK_LAWS)}")
    lam = cfg.get("intensity", 0.0)
    eta = cfg.get("eta", 0.0)
    T = cfg.get("horizon", 1.0)
    for key, v in (("intensity", lam), ("eta", eta), ("horizon", T)):
        _require(isinstance(v, (int, float)) and not isinstance(v, bool), f"model.{key}: expected a number")

    def drift(t, x):
        return np.array([drift_py(t, float(x[0]), prm)])

    def base(t, x):
        return np.array([base_py(t, float(x[0]), prm)])

    def jump(t, x, y):
        return np.array([jump_py(t, float(x[0]), float(y[0]), prm)])

    def w(j):
        return float(weight(j=j, **params))

    model = ModelSpec(
        dim=1,
        drift=drift,
        diffusion=FactorizedDiffusion(base, w, tail),
        jump_coeff=jump,
        jump_law=JumpLaw(float(lam), 1, MARK_LAWS[marks]),
        initial=np.array([float(eta)]),
        horizon=float(T),
        class_params=ClassParams(),
        compiled=CompiledCoefficients(drift_nb, base_nb, jump_nb, prm),
        drift_time_homogeneous=not drift_expr.uses("t"),
        name=str(cfg.get("name", "inline")),
    )
    try:
        validate_model(model)
    except (InvalidParameter, ValueError) as exc:
        raise ConfigError(f"model: {exc}") from None
    return model
