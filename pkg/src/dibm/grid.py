"""Uniform-grid functions of sine-latitude.

Temperature profiles live on an extended interval ``[y_min, y_max]`` that
strictly contains the physical hemisphere ``[0, 1]``. Values are sampled on
uniformly spaced nodes; evaluation between nodes is linear, and the global
mean over ``[0, 1]`` is taken with composite Simpson weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Callable

import numpy as np

__all__ = [
    "GridDomainError",
    "GridSpec",
    "Profile",
    "interp_rows",
    "simpson_unit_weights",
]

_ALIGN_TOL = 1e-9


class GridDomainError(ValueError):
    """Raised when a profile is evaluated outside its grid."""

    def __init__(self, y, y_min, y_max):
        self.y = y
        super().__init__(f"coordinate y={y!r} lies outside the grid [{y_min}, {y_max}]")


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid on ``[y_min, y_max]`` with nodes at ``y = 0`` and ``y = 1``."""

    y_min: float = -0.5
    y_max: float = 1.5
    n_points: int = 601

    def __post_init__(self):
        if not (self.y_min < 0.0 and self.y_max > 1.0):
            raise ValueError(
                f"grid [{self.y_min}, {self.y_max}] must contain [0, 1] in its interior"
            )
        if self.n_points < 3 or self.n_points % 2 == 0:
            raise ValueError(f"n_points must be odd and >= 3, got {self.n_points}")
        h = (self.y_max - self.y_min) / (self.n_points - 1)
        for anchor in (0.0, 1.0):
            k = (anchor - self.y_min) / h
            if abs(k - round(k)) > _ALIGN_TOL:
                raise ValueError(
                    f"y={anchor} is not a grid node (offset {k:.6g} cells); "
                    "adjust n_points or the bounds"
                )
        if (self.i_one - self.i_zero) % 2:
            raise ValueError(
                "the [0, 1] sub-grid needs an even number of cells for Simpson quadrature"
            )

    @property
    def h(self) -> float:
        return (self.y_max - self.y_min) / (self.n_points - 1)

    @property
    def i_zero(self) -> int:
        return int(round((0.0 - self.y_min) / self.h))

    @property
    def i_one(self) -> int:
        return int(round((1.0 - self.y_min) / self.h))

    @cached_property
    def nodes(self) -> np.ndarray:
        y = np.linspace(self.y_min, self.y_max, self.n_points)
        # pin the anchors so clamped forcing is evaluated exactly at 0 and 1
        y[self.i_zero] = 0.0
        y[self.i_one] = 1.0
        y.flags.writeable = False
        return y


@lru_cache(maxsize=32)
def simpson_unit_weights(spec: GridSpec) -> np.ndarray:
    """Weights ``w`` with ``w @ values`` = composite Simpson integral over [0, 1].

    Nodes outside ``[0, 1]`` get weight zero.
    """
    w = np.zeros(spec.n_points)
    m = spec.i_one - spec.i_zero
    inner = np.ones(m + 1)
    inner[1:-1:2] = 4.0
    inner[2:-1:2] = 2.0
    w[spec.i_zero:spec.i_one + 1] = inner * spec.h / 3.0
    w.flags.writeable = False
    return w


def interp_rows(spec: GridSpec, values: np.ndarray, y) -> np.ndarray:
    """Linearly interpolate row ``i`` of ``values`` at ``y[i]``.

    ``y`` is clamped to the grid; callers that need a domain error check first.
    """
    y = np.clip(np.asarray(y, dtype=float), spec.y_min, spec.y_max)
    u = (y - spec.y_min) / spec.h
    j = np.minimum(np.floor(u).astype(np.intp), spec.n_points - 2)
    w = u - j
    rows = np.arange(values.shape[0])
    return (1.0 - w) * values[rows, j] + w * values[rows, j + 1]


@dataclass(frozen=True, eq=False)
class Profile:
    """A temperature profile (deg C) sampled on the nodes of ``spec``."""

    spec: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.spec.n_points,):
            raise ValueError(
                f"expected {self.spec.n_points} samples, got shape {v.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("profile values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, spec: GridSpec, f: Callable[[np.ndarray], np.ndarray]) -> "Profile":
        return cls(spec, np.broadcast_to(f(spec.nodes), (spec.n_points,)))

    @classmethod
    def constant(cls, spec: GridSpec, c: float) -> "Profile":
        return cls(spec, np.full(spec.n_points, float(c)))

    def eval(self, y: float) -> float:
        """Temperature at ``y`` by linear interpolation; exact at nodes."""
        spec = self.spec
        if not (spec.y_min <= y <= spec.y_max):
            raise GridDomainError(y, spec.y_min, spec.y_max)
        u = (y - spec.y_min) / spec.h
        j = min(int(np.floor(u)), spec.n_points - 2)
        w = u - j
        if w == 0.0:
            return float(self.values[j])
        if w == 1.0:
            return float(self.values[j + 1])
        return float((1.0 - w) * self.values[j] + w * self.values[j + 1])

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def mean_unit_interval(self) -> float:
        """Simpson approximation of the integral of T over [0, 1]."""
        return float(simpson_unit_weights(self.spec) @ self.values)

    def lipschitz_estimate(self) -> float:
        """Largest difference quotient between adjacent nodes."""
        return float(np.max(np.abs(np.diff(self.values))) / self.spec.h)

    def _check_spec(self, other: "Profile"):
        if other.spec != self.spec:
            raise ValueError("profiles live on different grids")

    def __add__(self, other: "Profile") -> "Profile":
        self._check_spec(other)
        return Profile(self.spec, self.values + other.values)

    def __sub__(self, other: "Profile") -> "Profile":
        self._check_spec(other)
        return Profile(self.spec, self.values - other.values)

    def __mul__(self, alpha: float) -> "Profile":
        return Profile(self.spec, float(alpha) * self.values)

    __rmul__ = __mul__

    def __neg__(self) -> "Profile":
        return Profile(self.spec, -self.values)
