"""Local equilibrium profiles, the iceline excess h(η) and its roots."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import physics
from .grid import Profile, simpson_unit_weights
from .physics import Params

__all__ = [
    "EquilibriumRoot",
    "absorbed_integral",
    "boundary_equilibria",
    "equilibrium_profile",
    "equilibrium_values",
    "find_interior_roots",
    "iceline_excess",
]

INTERIOR = "interior"
ICE_COVERED = "ice_covered_boundary"
ICE_FREE = "ice_free_boundary"

SCAN_STEP = 1e-3
ROOT_XTOL = 1e-9
STABILITY_STEP = 1e-5


@dataclass(frozen=True)
class EquilibriumRoot:
    eta: float
    iceline_temp: float
    stable: bool
    kind: str
    h_value: float = 0.0


def absorbed_integral(eta, params: Params):
    """g(η): absorbed radiation integrated over [0, 1] with Simpson weights."""
    g = physics.forcing(eta, params) @ simpson_unit_weights(params.grid)
    return g if np.ndim(g) else float(g)


def equilibrium_values(eta, params: Params) -> np.ndarray:
    """Closed-form T*(η) on the grid; one row per entry of ``eta``."""
    f = physics.forcing(eta, params)
    g = f @ simpson_unit_weights(params.grid)
    A, B, C = params.A, params.B, params.C
    return (f - A + (C / B) * (np.asarray(g)[..., None] - A)) / (B + C)


def equilibrium_profile(eta: float, params: Params) -> Profile:
    """Temperature profile at which the fast field vanishes for a fixed iceline."""
    return Profile(params.grid, equilibrium_values(float(eta), params))


def iceline_excess(eta, params: Params):
    """h(η) = T*(η)(η) - T_c, evaluated pointwise from the closed form.

    For η outside [0, 1] the forcing coordinate is clamped, so the albedo is
    a(η)(clamp(η)) rather than the mid value.
    """
    eta_arr = np.asarray(eta, dtype=float)
    A, B, C = params.A, params.B, params.C
    g = physics.forcing(eta_arr, params) @ simpson_unit_weights(params.grid)
    local = params.Q * physics.insolation(eta_arr) * (1.0 - physics.albedo(eta_arr, eta_arr, params))
    h = (local - A + (C / B) * (g - A)) / (B + C) - params.T_c
    return h if np.ndim(h) else float(h)


def _slope(eta: float, params: Params) -> float:
    d = STABILITY_STEP
    return (iceline_excess(eta + d, params) - iceline_excess(eta - d, params)) / (2 * d)


def _bisect(f, lo: float, hi: float, flo: float, xtol: float) -> float:
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def find_interior_roots(params: Params, scan_step: float = SCAN_STEP,
                        xtol: float = ROOT_XTOL) -> list[EquilibriumRoot]:
    """Sign-change scan of h on [0, 1] followed by bisection.

    Stability follows the sign of h' (stable when h decreases through zero).
    The number of roots is whatever the scan finds, including zero.
    """
    n = int(round(1.0 / scan_step))
    etas = np.linspace(0.0, 1.0, n + 1)
    hs = iceline_excess(etas, params)
    roots = []
    for i in np.flatnonzero(np.sign(hs[:-1]) != np.sign(hs[1:])):
        if hs[i] == 0.0:
            eta = float(etas[i])
        else:
            eta = _bisect(lambda x: iceline_excess(x, params),
                          float(etas[i]), float(etas[i + 1]), float(hs[i]), xtol)
        h = iceline_excess(eta, params)
        roots.append(EquilibriumRoot(eta=eta, iceline_temp=h + params.T_c,
                                     stable=_slope(eta, params) < 0, kind=INTERIOR, h_value=h))
    # an exact zero on a scan node is seen by two adjacent cells
    unique = []
    for r in roots:
        if not unique or abs(r.eta - unique[-1].eta) > xtol:
            unique.append(r)
    return unique


def boundary_equilibria(params: Params) -> list[EquilibriumRoot]:
    """Ice-covered (η = 0) and ice-free (η = 1) end states with their stability."""
    h0 = iceline_excess(0.0, params)
    h1 = iceline_excess(1.0, params)
    return [
        EquilibriumRoot(0.0, h0 + params.T_c, h0 < 0, ICE_COVERED, h0),
        EquilibriumRoot(1.0, h1 + params.T_c, h1 > 0, ICE_FREE, h1),
    ]
