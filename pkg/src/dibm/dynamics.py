"""Trajectory simulation of the coupled temperature/iceline system."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import physics
from ._parallel import parallel_map
from .equilibria import equilibrium_profile, find_interior_roots
from .grid import GridSpec, Profile, simpson_unit_weights
from .physics import Params, State

__all__ = [
    "BasinRow",
    "Frame",
    "SimulationError",
    "Trajectory",
    "classify_basins",
    "fixed_iceline_simulate",
    "initial_profile",
    "simulate",
]

CONVERGED = "converged_interior"
FROZEN = "frozen"
ICE_FREE_LOCKED = "ice_free_locked"
MAX_STEPS = "max_steps"

STEADY_DT = 1e-8
STEADY_DETA = 1e-10
STEADY_WINDOW = 100
FRAME_STRIDE = 50
PROFILE_STRIDE = 10


class SimulationError(FloatingPointError):
    def __init__(self, step: int):
        self.step = step
        super().__init__(f"non-finite state at step {step}; is dt < 1/(B+C)?")


@dataclass(frozen=True, eq=False)
class Frame:
    time: float
    eta: float
    iceline_temp: float
    mean_temp: float
    profile: Optional[np.ndarray] = field(default=None, repr=False)


@dataclass(eq=False)
class Trajectory:
    params: Params
    frames: list
    outcome: str
    steps: int
    final: State
    eta_range: tuple = (np.nan, np.nan)
    ratio: Optional[float] = None

    @property
    def final_eta(self) -> float:
        return self.final.eta

    @property
    def final_time(self) -> float:
        return self.steps * self.params.dt


def initial_profile(spec: GridSpec) -> Profile:
    """The default starting profile 14 - 54 y^2."""
    return Profile.from_function(spec, lambda y: 14.0 - 54.0 * y * y)


def _iceline_temp(spec: GridSpec, values: np.ndarray, eta: float) -> float:
    y = min(max(eta, spec.y_min), spec.y_max)
    u = (y - spec.y_min) / spec.h
    j = min(int(np.floor(u)), spec.n_points - 2)
    w = u - j
    return float((1.0 - w) * values[j] + w * values[j + 1])


def _frame(spec, weights, n, dt, values, eta, with_profile) -> Frame:
    return Frame(n * dt, eta, _iceline_temp(spec, values, eta), float(weights @ values),
                 values.copy() if with_profile else None)


Observer = Callable[[int, np.ndarray, float], None]


def simulate(initial: State, params: Params, max_steps: int = 100_000,
             stride: int = FRAME_STRIDE, profile_stride: int = PROFILE_STRIDE,
             observer: Optional[Observer] = None) -> Trajectory:
    """Run the Euler map until steady state, an iceline exit, or ``max_steps``.

    Steady state means ``||ΔT||_∞ < 1e-8`` and ``|Δη| < 1e-10`` for 100
    consecutive steps. The iceline exits when it leaves
    ``[y_min + h, y_max - h]``: low exits are ``frozen`` and high exits are
    ``ice_free_locked``. ``observer(step, values, eta)`` is called on every
    state, including the initial one.
    """
    spec = params.grid
    if initial.profile.spec != spec:
        raise ValueError("initial profile is not on params.grid")
    weights = simpson_unit_weights(spec)
    lo, hi = spec.y_min + spec.h, spec.y_max - spec.h
    values = np.array(initial.profile.values)
    eta = float(initial.eta)
    frames = []
    quiet = 0
    n = 0
    eta_min = eta_max = eta
    outcome = MAX_STEPS
    while True:
        if observer is not None:
            observer(n, values, eta)
        if n % stride == 0:
            with_profile = (n // stride) % profile_stride == 0
            frames.append(_frame(spec, weights, n, params.dt, values, eta, with_profile))
        if n >= max_steps:
            break
        dT = params.dt * physics.fast_field_values(values, eta, params)
        deta = params.dt * physics.slow_field_value(values, eta, params)
        values = values + dT
        eta = eta + deta
        n += 1
        if not (np.isfinite(eta) and np.all(np.isfinite(values))):
            raise SimulationError(n)
        eta_min, eta_max = min(eta_min, eta), max(eta_max, eta)
        if np.max(np.abs(dT)) < STEADY_DT and abs(deta) < STEADY_DETA:
            quiet += 1
        else:
            quiet = 0
        if quiet >= STEADY_WINDOW:
            outcome = CONVERGED
            break
        if eta < lo:
            outcome = FROZEN
            break
        if eta > hi:
            outcome = ICE_FREE_LOCKED
            break
    if observer is not None and outcome != MAX_STEPS:
        observer(n, values, eta)
    return Trajectory(params, frames, outcome, n, State(Profile(spec, values), eta),
                      (eta_min, eta_max))


def fixed_iceline_simulate(initial: State, params: Params, max_steps: int = 100_000,
                           tol: float = 1e-10, stride: int = FRAME_STRIDE,
                           profile_stride: int = PROFILE_STRIDE) -> Trajectory:
    """Relax the profile with the iceline frozen (ε = 0).

    Stops once a step changes the profile by less than ``tol`` in sup-norm;
    a state already at equilibrium takes zero steps. ``Trajectory.ratio``
    is the largest observed ratio of successive step sizes.
    """
    p = params.replace(eps=0.0)
    spec = p.grid
    weights = simpson_unit_weights(spec)
    values = np.array(initial.profile.values)
    eta = float(initial.eta)
    frames = []
    ratio = 0.0
    prev = None
    n = 0
    outcome = MAX_STEPS
    while True:
        if n % stride == 0:
            frames.append(_frame(spec, weights, n, p.dt, values, eta,
                                 (n // stride) % profile_stride == 0))
        dT = p.dt * physics.fast_field_values(values, eta, p)
        size = float(np.max(np.abs(dT)))
        if size < tol:
            outcome = CONVERGED
            break
        if n >= max_steps:
            break
        if prev is not None:
            ratio = max(ratio, size / prev)
        prev = size
        values = values + dT
        n += 1
        if not np.all(np.isfinite(values)):
            raise SimulationError(n)
    return Trajectory(p, frames, outcome, n, State(Profile(spec, values), eta),
                      (eta, eta), ratio)


@dataclass(frozen=True)
class BasinRow:
    eta0: float
    outcome: str
    final_eta: float
    separatrix: bool = False


def classify_basins(eta_samples, params: Params, max_steps: int = 100_000) -> list[BasinRow]:
    """Simulate from (T*(η0), η0) for each sample and tabulate the outcomes.

    A run is flagged ``separatrix`` when the iceline never strays more than
    1e-3 from the unstable interior root.
    """
    roots = [r for r in find_interior_roots(params) if not r.stable]
    eta_unstable = roots[0].eta if roots else None

    def run(eta0):
        eta0 = float(eta0)
        traj = simulate(State(equilibrium_profile(eta0, params), eta0), params,
                        max_steps=max_steps, profile_stride=10**9)
        sep = False
        if eta_unstable is not None:
            lo, hi = traj.eta_range
            sep = bool(max(abs(lo - eta_unstable), abs(hi - eta_unstable)) < 1e-3)
        return BasinRow(eta0, traj.outcome, float(traj.final_eta), sep)

    return parallel_map(run, list(eta_samples))
