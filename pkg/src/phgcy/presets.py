"""Named run configurations and the JSON config document used by the command line.

A config is one JSON object.  ``"preset"`` selects defaults from
:data:`PRESETS`; any other key overrides them.  ``"ansatz"`` names the model
geometry (see :data:`phgcy.metrics.REGISTRY`).  Smoothing families carry a
weight ``mu`` for the parameter ``t`` of the affine deformation; a
``"t_grid"`` is converted to the gluing parameter by ``eps = t^(1/mu)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace
from typing import Optional, Tuple

from .metrics import MetricError, get_model


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration (exit code 2)."""


def _default_eps():
    return tuple(10 ** (-k / 4) for k in range(4, 11))


@dataclass(frozen=True)
class RunConfig:
    ansatz: str
    preset: Optional[str] = None
    order: int = 4
    eps_grid: Tuple[float, ...] = field(default_factory=_default_eps)
    kappa: float = 1.0
    X: float = 1.0
    gluing: str = "neck"
    neck: Tuple[float, float] = (0.5, 2.0)
    per_decade: int = 400
    nu: float = -2.0
    start: str = "formal"
    mu: Optional[float] = None
    workers: int = 1
    description: str = ""

    def __post_init__(self):
        try:
            get_model(self.ansatz)
        except MetricError as exc:
            raise ConfigError(str(exc)) from None
        if not self.eps_grid:
            raise ConfigError("eps grid is empty")
        if any(not 0 < e < 1 for e in self.eps_grid):
            raise ConfigError("eps values must lie in (0, 1)")
        if self.order < 2 or self.order % 2:
            raise ConfigError(f"order must be a positive even integer, got {self.order}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @property
    def family(self) -> str:
        return get_model(self.ansatz).red.family

    def to_json(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["eps_grid"] = list(self.eps_grid)
        out["neck"] = list(self.neck)
        return out


PRESETS = {
    "flat": dict(
        ansatz="flat", gluing="sum",
        description="flat C^3 degenerate family: the AC model is the cone itself",
    ),
    "eguchi-hanson": dict(
        ansatz="eguchi-hanson", gluing="neck",
        description="Eguchi-Hanson resolution of C^2/Z_2, scaled by eps",
    ),
    "resolved-conifold": dict(
        ansatz="resolved-conifold", gluing="neck",
        description="small resolution of the conifold, exceptional P^1 of size eps",
    ),
    "deformed-conifold": dict(
        ansatz="deformed-conifold", gluing="neck", mu=3.0,
        description="smoothing sum z_i^2 = t of the conifold, eps = t^(1/3)",
    ),
    "calabi-3": dict(
        ansatz="calabi-3", gluing="sum", order=6,
        description="U(3)-invariant resolution of C^3/Z_3 glued to the e^x volume model",
    ),
}
PRESETS["conifold"] = PRESETS["deformed-conifold"]

_FIELDS = {f.name for f in fields(RunConfig)}


def _tuple(value, name, length=None):
    if isinstance(value, (int, float)):
        value = [value]
    if not isinstance(value, (list, tuple)) or not all(isinstance(v, (int, float)) for v in value):
        raise ConfigError(f"{name} must be a list of numbers")
    if length is not None and len(value) != length:
        raise ConfigError(f"{name} must have {length} entries")
    return tuple(float(v) for v in value)


def config_from_dict(data: dict, **overrides) -> RunConfig:
    """Resolve a config object: preset defaults, then file keys, then ``overrides``.

    ``None`` overrides are ignored, so unset command-line flags fall through.
    """
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    data = dict(data)
    data.update({k: v for k, v in overrides.items() if v is not None})
    merged = {}
    name = data.get("preset")
    if name is not None:
        if name not in PRESETS:
            raise ConfigError(f"unknown preset {name!r}; known: {sorted(PRESETS)}")
        merged.update(PRESETS[name])
        merged["preset"] = name
    merged.update({k: v for k, v in data.items() if k != "t_grid"})
    unknown = set(merged) - _FIELDS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "ansatz" not in merged:
        raise ConfigError('config names no ansatz (give "ansatz" or "preset")')
    if "t_grid" in data and overrides.get("eps_grid") is None:
        mu = merged.get("mu")
        if not mu:
            raise ConfigError("t_grid needs a smoothing weight mu")
        merged["eps_grid"] = tuple(t ** (1 / float(mu)) for t in _tuple(data["t_grid"], "t_grid"))
    if "eps_grid" in merged:
        merged["eps_grid"] = _tuple(merged["eps_grid"], "eps_grid")
    if "neck" in merged:
        merged["neck"] = _tuple(merged["neck"], "neck", 2)
    for key in ("order", "per_decade", "workers"):
        if key in merged and not isinstance(merged[key], int):
            raise ConfigError(f"{key} must be an integer")
    return RunConfig(**merged)


def load_config(path, **overrides) -> RunConfig:
    """Read a JSON config file.

    Raises :class:`ConfigError` with line and column on a parse failure.
    """
    try:
        with open(path) as fh:
            data = json.loads(fh.read())
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return config_from_dict(data, **overrides)


def with_overrides(cfg: RunConfig, **kw) -> RunConfig:
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})
