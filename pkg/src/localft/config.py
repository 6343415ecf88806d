"""Experiment configuration and the named figure presets."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields, replace
from typing import Any

import numpy as np

from .errors import ConfigError
from .flow import DEFAULT_MAX_TAU, Ray
from .local import GeometryParams, initial_direction

MODELS = ("nonlocal", "local")
SWEEP_VARIABLES = ("r", "tau", "epsilon")
COMPONENT_NAMES = {
    "nonlocal": ("gamma_1", "gamma_2", "gamma_w", "gamma_1m", "gamma_p"),
    "local": ("gamma_1", "gamma_2", "gamma_w1", "gamma_w2", "gamma_md", "gamma_wd", "gamma_1m", "gamma_p"),
}
# gamma_1 = gamma_2 = gamma_p = gamma_m = 10 gamma_w, so gamma_1m = 2 gamma_else
ELSE_RAY = (1.0, 1.0, 0.1, 2.0, 1.0)
NONLOCAL_FIXED_POINT_GUESS = (0.69e-4, 1.50e-4, 0.69e-4, 0.69e-4, 0.69e-4)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a subcommand needs; serializes to and from plain JSON."""

    model: str = "nonlocal"
    direction: tuple[float, ...] | None = None  # None: the model's standard ray
    base: tuple[float, ...] | None = None
    scales: tuple[float, ...] = (3.0e-4,)
    r: int = 1
    tau: int | str = 1  # integer or "optimize"
    epsilon: float = 1.0
    tau_min: int = 1
    tau_max: int | None = None  # None: min(r, DEFAULT_MAX_TAU)
    sweep: str | None = None
    grid: tuple[float, ...] = ()
    gamma_w_grid: tuple[float, ...] = ()
    component: int = 0
    guess: tuple[float, ...] | None = None
    rel_tol: float = 1e-3
    max_iter: int = 200
    s: int = 3
    s_prime: int = 2
    gamma_ws: float = 0.0
    a_lc: int | None = None  # None: taken from the circuit catalog
    k: int = 1
    gamma_0: float = 1e-7
    levels: int = 5
    workers: int = 1
    out: str | None = None
    format: str = "csv"
    plot: str | None = None

    def __post_init__(self):
        for name in ("direction", "base", "scales", "grid", "gamma_w_grid", "guess"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, tuple(float(x) for x in v))
        self.validate()

    def validate(self) -> None:
        if self.model not in MODELS:
            raise ConfigError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"format must be csv or json, got {self.format!r}")
        if self.sweep is not None and self.sweep not in SWEEP_VARIABLES:
            raise ConfigError(f"sweep variable must be one of {SWEEP_VARIABLES}")
        if not (self.tau == "optimize" or (isinstance(self.tau, int) and self.tau >= 1)):
            raise ConfigError(f"tau must be a positive integer or 'optimize', got {self.tau!r}")
        if self.r < 1 or self.epsilon < 0:
            raise ConfigError("r must be positive and epsilon nonnegative")
        if self.workers < 1 or self.levels < 1 or self.max_iter < 1:
            raise ConfigError("workers, levels and max_iter must be positive")
        if not 0 < self.rel_tol < 1:
            raise ConfigError("rel_tol must lie in (0, 1)")
        for name in ("grid", "gamma_w_grid"):
            _check_grid(name, getattr(self, name))
        if any(not math.isfinite(x) or x < 0 for x in self.scales):
            raise ConfigError("scales must be finite and nonnegative")
        dim = self.dim
        for name in ("direction", "base", "guess"):
            v = getattr(self, name)
            if v is not None and len(v) != dim:
                raise ConfigError(f"{name} needs {dim} components for the {self.model} model")
        if not 0 <= self.component < dim:
            raise ConfigError(f"component index must lie in [0, {dim})")

    @property
    def dim(self) -> int:
        return len(COMPONENT_NAMES[self.model])

    @property
    def labels(self) -> tuple[str, ...]:
        return COMPONENT_NAMES[self.model]

    def geometry(self, tau: int | None = None) -> GeometryParams:
        t = tau if tau is not None else (self.tau if self.tau != "optimize" else 1)
        return GeometryParams(self.r, min(t, self.r), self.epsilon)

    def tau_range(self, r: int | None = None) -> range:
        r = self.r if r is None else r
        hi = self.tau_max if self.tau_max is not None else min(r, DEFAULT_MAX_TAU)
        return range(self.tau_min, min(hi, r) + 1)

    def ray(self, tau: int | None = None) -> Ray:
        if self.direction is not None:
            direction = np.array(self.direction)
        elif self.model == "nonlocal":
            direction = np.array(ELSE_RAY)
        else:
            direction = initial_direction(self.geometry(tau))
        base = np.zeros(self.dim) if self.base is None else np.array(self.base)
        return Ray(base, direction)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def _check_grid(name: str, grid) -> None:
    arr = np.asarray(grid, dtype=float)
    if arr.size == 0:
        return
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} must be finite")
    steps = np.diff(arr)
    if not (np.all(steps > 0) or np.all(steps < 0)):
        raise ConfigError(f"{name} must be strictly monotone")


PRESETS: dict[str, ExperimentConfig] = {
    "fig3": ExperimentConfig(model="nonlocal", direction=ELSE_RAY, scales=(2.5e-4, 3.0e-4, 3.6e-4, 4.0e-4)),
    # gamma_1 = 0.25 gamma_2 = gamma_p = gamma_m = 10 gamma_w, scale is gamma_2
    "fig4": ExperimentConfig(model="nonlocal", direction=(0.25, 1.0, 0.025, 0.5, 0.25),
                             scales=(4.5e-4, 5.5e-4, 6.2e-4, 7.0e-4)),
    # gamma_1 = 2 gamma_2 = gamma_p = gamma_m = 10 gamma_w, scale is gamma_2
    "fig5": ExperimentConfig(model="nonlocal", direction=(2.0, 1.0, 0.2, 4.0, 2.0),
                             scales=(1.6e-4, 2.0e-4, 2.4e-4, 2.8e-4)),
    # threshold line in the (gamma_w, gamma_else) plane
    "fig6": ExperimentConfig(model="nonlocal", direction=(1.0, 1.0, 0.0, 2.0, 1.0),
                             gamma_w_grid=(0.0, 1e-5, 2e-5, 3e-5, 3.4e-5, 4e-5, 5e-5, 6e-5, 7e-5, 8e-5)),
    "fig7": ExperimentConfig(model="local", r=20, tau="optimize", epsilon=1.0, sweep="r",
                             grid=(10, 20, 40, 80)),
    "fig8": ExperimentConfig(model="local", r=50, tau="optimize", epsilon=1.0, sweep="tau",
                             grid=tuple(float(t) for t in range(1, 17))),
    "fig9": ExperimentConfig(model="local", r=50, tau="optimize", sweep="epsilon",
                             grid=(0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0)),
}


def preset(name: str) -> ExperimentConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
