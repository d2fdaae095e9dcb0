"""Forcing terms, parameters and the Euler shift map of the coupled model.

The fast field acts on the temperature profile and the slow field on the
iceline. Outside ``[0, 1]`` the solar forcing is frozen at the nearest
endpoint, while re-emission and transport use the local temperature.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Mapping

import numpy as np

from .grid import GridSpec, Profile, simpson_unit_weights

__all__ = [
    "ALBEDO_MID",
    "ALBEDO_AMP",
    "INSOLATION_P2",
    "PARAM_KEYS",
    "PARAM_SOURCES",
    "Params",
    "ParamsError",
    "State",
    "albedo",
    "fast_field",
    "forcing",
    "insolation",
    "load_params",
    "params_from_mapping",
    "slow_field",
    "step",
]

ALBEDO_MID = 0.47
ALBEDO_AMP = 0.15
INSOLATION_P2 = 0.482

PARAM_KEYS = ("Q", "A", "B", "C", "T_c", "M", "eps", "dt", "y_min", "y_max", "n_points")

# shown in --help next to each default
PARAM_SOURCES = {
    "Q": "solar constant, W m^-2 (current climate value)",
    "A": "OLR intercept, W m^-2 (linear OLR fit)",
    "B": "OLR slope, W m^-2 degC^-1 (linear OLR fit)",
    "C": "transport coefficient, W m^-2 degC^-1 (1.6 B)",
    "T_c": "critical ice temperature, degC",
    "M": "albedo front steepness (must exceed 10; artifact default)",
    "eps": "iceline rate (simulation default 0.025)",
    "dt": "Euler time step (must be < 1/(B+C); artifact default)",
    "y_min": "lower end of the extended latitude grid",
    "y_max": "upper end of the extended latitude grid",
    "n_points": "grid nodes, odd, aligned with y=0 and y=1",
}


class ParamsError(ValueError):
    """A parameter value violates a model constraint."""

    def __init__(self, key: str, value, constraint: str):
        self.key = key
        self.value = value
        self.constraint = constraint
        super().__init__(f"{key} = {value!r}: {constraint}")


@dataclass(frozen=True)
class Params:
    Q: float = 343.0
    A: float = 202.0
    B: float = 1.9
    C: float = 1.6 * 1.9
    T_c: float = -10.0
    M: float = 25.0
    eps: float = 0.025
    dt: float = 0.1
    grid: GridSpec = field(default_factory=GridSpec)

    def __post_init__(self):
        for key in ("B", "C", "Q"):
            if not getattr(self, key) > 0:
                raise ParamsError(key, getattr(self, key), f"{key} must be > 0")
        if not self.M > 10:
            raise ParamsError("M", self.M, "M must be > 10")
        if not self.eps >= 0:
            # eps = 0 is the frozen-iceline limit used by the relaxation runs
            raise ParamsError("eps", self.eps, "eps must be >= 0")
        limit = 1.0 / (self.B + self.C)
        if not 0 < self.dt < limit:
            raise ParamsError("dt", self.dt, f"dt must be < 1/(B+C) ≈ {limit:.4f} and > 0")

    def replace(self, **changes) -> "Params":
        grid_changes = {k: changes.pop(k) for k in ("y_min", "y_max", "n_points") if k in changes}
        if grid_changes:
            changes["grid"] = dataclasses.replace(self.grid, **grid_changes)
        return dataclasses.replace(self, **changes)

    def as_flat_dict(self) -> dict:
        out = {k: getattr(self, k) for k in PARAM_KEYS[:8]}
        out.update(y_min=self.grid.y_min, y_max=self.grid.y_max, n_points=self.grid.n_points)
        return out


@dataclass(frozen=True, eq=False)
class State:
    profile: Profile
    eta: float

    def __post_init__(self):
        if not np.isfinite(self.eta):
            raise ValueError(f"iceline must be finite, got {self.eta!r}")


def _coerce(key: str, raw) -> float | int:
    try:
        if key == "n_points":
            if isinstance(raw, str):
                val = float(raw.strip())
            else:
                val = float(raw)
            if val != int(val):
                raise ValueError
            return int(val)
        return float(raw.strip()) if isinstance(raw, str) else float(raw)
    except (TypeError, ValueError):
        raise ParamsError(key, raw, "not a number") from None


def params_from_mapping(values: Mapping[str, object], base: Params | None = None) -> Params:
    """Build Params from flat ``key -> value`` pairs, rejecting unknown keys."""
    base = base or Params()
    unknown = sorted(set(values) - set(PARAM_KEYS))
    if unknown:
        raise ParamsError(unknown[0], values[unknown[0]],
                          f"unknown key; allowed keys are {', '.join(PARAM_KEYS)}")
    flat = base.as_flat_dict()
    flat.update({k: _coerce(k, v) for k, v in values.items()})
    try:
        grid = GridSpec(flat.pop("y_min"), flat.pop("y_max"), flat.pop("n_points"))
    except ValueError as exc:
        raise ParamsError("grid", (values.get("y_min"), values.get("y_max"),
                                   values.get("n_points")), str(exc)) from None
    return Params(grid=grid, **flat)


def read_flat_config(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParamsError(f"line {lineno}", line, "expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in out:
            raise ParamsError(key, value, f"duplicate key on line {lineno}")
        out[key] = value
    return out


def load_params(path, base: Params | None = None) -> Params:
    return params_from_mapping(read_flat_config(path), base)


def insolation(y):
    """Annual-mean insolation weight s(y), frozen at the endpoints outside [0, 1]."""
    yc = np.clip(y, 0.0, 1.0)
    return 1.0 - INSOLATION_P2 * (3.0 * yc * yc - 1.0) / 2.0


def albedo(eta, y, params: Params):
    """Smooth iceline albedo; ``y`` is clamped to [0, 1], ``eta`` is not."""
    yc = np.clip(y, 0.0, 1.0)
    return ALBEDO_MID + ALBEDO_AMP * np.tanh(params.M * (yc - eta))


@lru_cache(maxsize=32)
def _insolation_on(spec: GridSpec) -> np.ndarray:
    s = insolation(spec.nodes)
    s.flags.writeable = False
    return s


def forcing(eta, params: Params) -> np.ndarray:
    """Absorbed solar radiation Q s(ŷ)(1 - a(η)(ŷ)) on the grid.

    ``eta`` may be an array; the result has shape ``eta.shape + (n_points,)``.
    """
    eta = np.asarray(eta, dtype=float)
    y = params.grid.nodes
    a = albedo(eta[..., None], y, params)
    return params.Q * _insolation_on(params.grid) * (1.0 - a)


def fast_field_values(values: np.ndarray, eta, params: Params) -> np.ndarray:
    """Batched fast field: rows of ``values`` paired with entries of ``eta``."""
    w = simpson_unit_weights(params.grid)
    mean = values @ w
    return (forcing(eta, params) - (params.A + params.B * values)
            + params.C * (np.asarray(mean)[..., None] - values))


def fast_field(state: State, params: Params) -> Profile:
    """Temperature tendency F([T, η]) as a profile."""
    return Profile(params.grid, fast_field_values(state.profile.values, state.eta, params))


def slow_field_value(values: np.ndarray, eta: float, params: Params) -> float:
    spec = params.grid
    y = min(max(eta, spec.y_min), spec.y_max)
    u = (y - spec.y_min) / spec.h
    j = min(int(np.floor(u)), spec.n_points - 2)
    w = u - j
    temp = (1.0 - w) * values[j] + w * values[j + 1]
    return params.eps * (temp - params.T_c)


def slow_field(state: State, params: Params) -> float:
    """Iceline rate ε (T(η) - T_c); positive moves the iceline poleward."""
    return float(slow_field_value(state.profile.values, state.eta, params))


def step(state: State, params: Params) -> State:
    """One Euler step of both components from the same input state."""
    values = state.profile.values
    dT = fast_field_values(values, state.eta, params)
    deta = slow_field_value(values, state.eta, params)
    return State(Profile(params.grid, values + params.dt * dT), state.eta + params.dt * deta)
