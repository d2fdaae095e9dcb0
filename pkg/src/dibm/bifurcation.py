"""Equilibrium branches of the iceline as the solar constant varies."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._parallel import parallel_map
from .equilibria import boundary_equilibria, find_interior_roots
from .physics import Params

__all__ = ["BifurcationTable", "EquilibriumBranch", "fold_locate", "root_count", "sweep"]

Q_CURRENT = 343.0


@dataclass(frozen=True)
class EquilibriumBranch:
    Q: float
    eta: float
    stable: bool
    kind: str


@dataclass(eq=False)
class BifurcationTable:
    rows: list = field(default_factory=list)
    q_current: float = Q_CURRENT

    def at(self, Q: float, kind: str | None = None) -> list:
        return [r for r in self.rows
                if abs(r.Q - Q) < 1e-9 and (kind is None or r.kind == kind)]

    def q_values(self) -> np.ndarray:
        return np.unique([r.Q for r in self.rows])


def _rows_for(Q: float, params: Params) -> list:
    p = params.replace(Q=float(Q))
    found = find_interior_roots(p) + boundary_equilibria(p)
    return [EquilibriumBranch(float(Q), r.eta, r.stable, r.kind) for r in found]


def sweep(q_min: float = 280.0, q_max: float = 420.0, q_step: float = 1.0,
          params: Params | None = None) -> BifurcationTable:
    """Interior roots and boundary states for each Q in ``[q_min, q_max]``."""
    if not q_min < q_max:
        raise ValueError(f"q_min ({q_min}) must be below q_max ({q_max})")
    if not q_step > 0:
        raise ValueError(f"q_step must be positive, got {q_step}")
    params = params or Params()
    n = int(np.floor((q_max - q_min) / q_step + 1e-9))
    qs = [q_min + i * q_step for i in range(n + 1)]
    rows = [row for chunk in parallel_map(lambda q: _rows_for(q, params), qs) for row in chunk]
    rows.sort(key=lambda r: (r.Q, r.eta))
    return BifurcationTable(rows)


def root_count(Q: float, params: Params) -> int:
    return len(find_interior_roots(params.replace(Q=float(Q))))


def fold_locate(params: Params | None = None, q_lo: float = 280.0, q_hi: float = 343.0,
                tol: float = 1e-3) -> float:
    """Bisect on Q for the change in the number of interior roots."""
    params = params or Params()
    n_lo, n_hi = root_count(q_lo, params), root_count(q_hi, params)
    if n_lo == n_hi:
        raise ValueError(f"root count is {n_lo} at both Q={q_lo} and Q={q_hi}; "
                         "no transition to bracket")
    while q_hi - q_lo > tol:
        mid = 0.5 * (q_lo + q_hi)
        if root_count(mid, params) == n_lo:
            q_lo = mid
        else:
            q_hi = mid
    return 0.5 * (q_lo + q_hi)
