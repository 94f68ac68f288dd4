"""Run configuration: strict JSON loading with embedded law validation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .envmodel import (EnvironmentLaw, LawValidationError, OffspringLaw,
                       ValidationReport, validate)

DEFAULTS = {
    "dimension": 1,
    "seed": 0,
    "horizon": 200,
    "cap": 1_000_000,
    "replicas": 1000,
}

_TOP_KEYS = {"components", "dimension", "seed", "horizon", "cap", "replicas",
             "params", "out"}
_COMPONENT_KEYS = {"weight", "pmf"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    law: EnvironmentLaw
    dimension: int
    seed: int
    horizon: int
    cap: int | None
    replicas: int
    params: dict = field(default_factory=dict)
    out: str | None = None
    validation: ValidationReport = None

    def echo(self) -> dict:
        return {
            "dimension": self.dimension,
            "seed": self.seed,
            "horizon": self.horizon,
            "cap": self.cap,
            "replicas": self.replicas,
            "components": [{"weight": w, "pmf": list(q.pmf)}
                           for w, q in self.law.components],
        }


def _require_int(raw: dict, key: str, minimum: int | None = None,
                 allow_none: bool = False):
    value = raw.get(key, DEFAULTS.get(key))
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"key {key!r} must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"key {key!r} must be >= {minimum}, got {value}")
    return value


def parse_config(path: str) -> RunConfig:
    """Load and validate a run configuration.

    Unknown keys are rejected by name; the environment law is validated
    and the report is embedded (callers decide how hard to gate on it).
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path!r} is not valid JSON: {exc.msg} "
                          f"(line {exc.lineno}, column {exc.colno})") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be an object")
    unknown = sorted(set(raw) - _TOP_KEYS)
    if unknown:
        raise ConfigError(f"unknown config key {unknown[0]!r}")
    if "components" not in raw:
        raise ConfigError("config must declare 'components' (the environment law)")
    comps_raw = raw["components"]
    if not isinstance(comps_raw, list) or not comps_raw:
        raise ConfigError("'components' must be a nonempty list")
    components = []
    for i, entry in enumerate(comps_raw):
        if not isinstance(entry, dict):
            raise ConfigError(f"component {i} must be an object")
        extra = sorted(set(entry) - _COMPONENT_KEYS)
        if extra:
            raise ConfigError(f"component {i}: unknown key {extra[0]!r}")
        if "pmf" not in entry:
            raise ConfigError(f"component {i}: missing 'pmf'")
        weight = entry.get("weight", 1.0)
        try:
            law = OffspringLaw(tuple(entry["pmf"]))
        except (LawValidationError, TypeError) as exc:
            raise ConfigError(f"component {i}: {exc}") from exc
        components.append((float(weight), law))
    try:
        law = EnvironmentLaw(components=tuple(components))
    except LawValidationError as exc:
        raise ConfigError(str(exc)) from exc

    dimension = _require_int(raw, "dimension", minimum=1)
    seed = _require_int(raw, "seed")
    horizon = _require_int(raw, "horizon", minimum=0)
    cap = _require_int(raw, "cap", minimum=1, allow_none=True)
    replicas = _require_int(raw, "replicas", minimum=1)
    params = raw.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("'params' must be an object")
    out = raw.get("out")
    if out is not None and not isinstance(out, str):
        raise ConfigError("'out' must be a string path")
    return RunConfig(law=law, dimension=dimension, seed=seed, horizon=horizon,
                     cap=cap, replicas=replicas, params=params, out=out,
                     validation=validate(law))
