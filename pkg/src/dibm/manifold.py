"""Graph transform for the slow manifold of the coupled model.

A graph maps each iceline η to a temperature profile. The transform pulls η
back through the slow map (the preimage ξ solving
``η = ξ + ε dt (Φ(ξ)(ξ) - T_c)``) and pushes the profile Φ(ξ) forward one
Euler step. Iterating it from the local-equilibrium graph converges to the
invariant graph Φ*.

Graphs are stored as a dense ``(n_eta, n_y)`` array. Evaluation between
η-nodes is linear, and η outside the node range is clamped (the albedo is
saturated there).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import physics
from .equilibria import equilibrium_values, iceline_excess
from .grid import GridSpec, Profile, interp_rows
from .physics import Params

__all__ = [
    "ContractionCertificate",
    "ConvergenceError",
    "FixedPointResult",
    "GraphFn",
    "PreimageError",
    "ReducedDynamics",
    "certificate",
    "distance_to_equilibrium_set",
    "fixed_point",
    "graph_transform",
    "local_equilibrium_graph",
    "preimage",
    "random_graph",
    "reduced_dynamics",
]

ETA_MIN = -0.5
ETA_MAX = 1.5
N_ETA = 401

PREIMAGE_TOL = 1e-12
PREIMAGE_MAX_ITER = 200


class PreimageError(RuntimeError):
    def __init__(self, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"preimage iteration did not converge in {iterations} steps "
            f"(residual {residual:.3e}); eps*dt*(L+r) < 1 is probably violated"
        )


class ConvergenceError(RuntimeError):
    def __init__(self, residual: float, ratio: float, iterations: int):
        self.residual = residual
        self.ratio = ratio
        self.iterations = iterations
        super().__init__(
            f"graph transform not converged after {iterations} iterations "
            f"(residual {residual:.3e}, ratio {ratio:.4f})"
        )


@dataclass(frozen=True, eq=False)
class GraphFn:
    """Discretized map η -> Profile on a uniform η-grid."""

    spec: GridSpec
    eta_nodes: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        eta = np.array(self.eta_nodes, dtype=float)
        vals = np.array(self.values, dtype=float)
        if eta.ndim != 1 or eta.size < 2:
            raise ValueError("need at least two eta nodes")
        if vals.shape != (eta.size, self.spec.n_points):
            raise ValueError(f"values shape {vals.shape} does not match "
                             f"({eta.size}, {self.spec.n_points})")
        if not np.all(np.isfinite(vals)):
            raise ValueError("graph values must be finite")
        eta.flags.writeable = False
        vals.flags.writeable = False
        object.__setattr__(self, "eta_nodes", eta)
        object.__setattr__(self, "values", vals)

    @property
    def d_eta(self) -> float:
        return float(self.eta_nodes[1] - self.eta_nodes[0])

    def profile(self, i: int) -> Profile:
        return Profile(self.spec, self.values[i])

    def rows_at(self, xi) -> np.ndarray:
        """Profiles Φ(ξ) for each entry of ``xi``, interpolated in η."""
        xi = np.clip(np.atleast_1d(np.asarray(xi, dtype=float)),
                     self.eta_nodes[0], self.eta_nodes[-1])
        u = (xi - self.eta_nodes[0]) / self.d_eta
        j = np.minimum(np.floor(u).astype(np.intp), self.eta_nodes.size - 2)
        w = (u - j)[:, None]
        return (1.0 - w) * self.values[j] + w * self.values[j + 1]

    def at(self, xi: float) -> Profile:
        return Profile(self.spec, self.rows_at(xi)[0])

    def diagonal(self, xi) -> np.ndarray:
        """Φ(ξ)(ξ), with ξ clamped to the η-range and to the profile grid."""
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        return interp_rows(self.spec, self.rows_at(xi), xi)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def distance(self, other: "GraphFn") -> float:
        return float(np.max(np.abs(self.values - other.values)))

    def lipschitz_eta(self) -> float:
        """Max over adjacent η-nodes of the profile sup-distance per unit η."""
        return float(np.max(np.abs(np.diff(self.values, axis=0))) / self.d_eta)


def default_eta_nodes(n: int = N_ETA, lo: float = ETA_MIN, hi: float = ETA_MAX) -> np.ndarray:
    return np.linspace(lo, hi, n)


def local_equilibrium_graph(params: Params, eta_nodes=None) -> GraphFn:
    """The graph η -> T*(η)."""
    eta = default_eta_nodes() if eta_nodes is None else np.asarray(eta_nodes, dtype=float)
    return GraphFn(params.grid, eta, equilibrium_values(eta, params))


@dataclass(frozen=True)
class ContractionCertificate:
    L_bound: float
    r_bound: float
    eps: float
    eps_max: float
    delta1: float
    delta2: float
    rho: float
    rho_literal: float
    dt_used: float
    preimage_factor: float
    certified: bool

    def as_dict(self) -> dict:
        # JSON has no infinities
        return {k: (None if isinstance(v, float) and not math.isfinite(v) else v)
                for k, v in self.__dict__.items()}


def certificate(params: Params) -> ContractionCertificate:
    """Contraction constants of the graph transform for ``params``.

    ``rho`` uses δ1 + δ2 and ``rho_literal`` uses 2 δ2. Certification needs
    ε <= eps_max, both factors below one and ε dt (L + r) < 1.
    """
    L = max(0.62, 0.15 * params.M)
    r = params.Q * float(physics.insolation(0.0))
    B, dt, eps = params.B, params.dt, params.eps
    eps_max = B / (2.0 * (L * r + L + r))
    denom = 1.0 - (L + r) * eps
    if denom > 0:
        delta1 = L * eps / denom
        delta2 = L * r * eps / denom
    else:
        delta1 = delta2 = math.inf
    rho = (1.0 - dt * B) + dt * (delta1 + delta2)
    rho_literal = (1.0 - dt * B) + dt * (2.0 * delta2)
    preimage_factor = eps * dt * (L + r)
    certified = (eps <= eps_max and rho < 1.0 and rho_literal < 1.0
                 and preimage_factor < 1.0)
    return ContractionCertificate(L, r, eps, eps_max, delta1, delta2, rho, rho_literal,
                                  dt, preimage_factor, certified)


def _solve_shift(graph: GraphFn, eta: np.ndarray, params: Params, k0=None,
                 tol: float = PREIMAGE_TOL, max_iter: int = PREIMAGE_MAX_ITER) -> np.ndarray:
    scale = params.eps * params.dt
    k = np.zeros_like(eta) if k0 is None else np.array(k0, dtype=float)
    if scale == 0.0:
        return np.zeros_like(eta)
    for _ in range(max_iter):
        k_new = scale * (params.T_c - graph.diagonal(eta + k))
        change = float(np.max(np.abs(k_new - k)))
        k = k_new
        if change < tol:
            return k
    raise PreimageError(change, max_iter)


def preimage(graph: GraphFn, eta, params: Params, k0=None):
    """Solve ``η = ξ + ε dt (Φ(ξ)(ξ) - T_c)`` for ξ by fixed-point iteration.

    Accepts a scalar or an array of icelines.
    """
    eta_arr = np.atleast_1d(np.asarray(eta, dtype=float))
    xi = eta_arr + _solve_shift(graph, eta_arr, params, k0)
    return float(xi[0]) if np.ndim(eta) == 0 else xi


def _transform(graph: GraphFn, params: Params, k0=None):
    eta = graph.eta_nodes
    k = _solve_shift(graph, eta, params, k0)
    xi = eta + k
    rows = graph.rows_at(xi)
    new = rows + params.dt * physics.fast_field_values(rows, xi, params)
    return GraphFn(graph.spec, eta, new), k


def graph_transform(graph: GraphFn, params: Params) -> GraphFn:
    """m(Φ)(η) = Φ(ξ) + dt F(Φ(ξ), ξ), resampled on the same η-nodes."""
    return _transform(graph, params)[0]


@dataclass(frozen=True, eq=False)
class FixedPointResult:
    graph: GraphFn
    iterations: int
    residual: float
    ratio: float
    residuals: tuple = field(repr=False)


def _tail_ratio(residuals, tail: int = 10) -> float:
    r = np.asarray(residuals, dtype=float)
    r = r[r > 0]
    if r.size < 2:
        return 0.0
    ratios = r[1:] / r[:-1]
    return float(np.exp(np.mean(np.log(ratios[-tail:]))))


def fixed_point(params: Params, tol: float = 1e-9, max_iter: int = 10_000,
                initial: GraphFn | None = None) -> FixedPointResult:
    """Iterate the graph transform to its fixed point Φ*.

    Starts from T* unless ``initial`` is given. The preimage solve is
    warm-started from the previous iteration's shift.
    """
    graph = local_equilibrium_graph(params) if initial is None else initial
    residuals = []
    k = None
    for it in range(1, max_iter + 1):
        new, k = _transform(graph, params, k)
        res = new.distance(graph)
        residuals.append(res)
        graph = new
        if res < tol:
            return FixedPointResult(graph, it, res, _tail_ratio(residuals), tuple(residuals))
    raise ConvergenceError(residuals[-1], _tail_ratio(residuals), max_iter)


def distance_to_equilibrium_set(phi: GraphFn, params: Params,
                                eta_range: tuple[float, float] | None = (0.0, 1.0)) -> float:
    """Max over η-nodes of ``||Φ(η) - T*(η)||_∞``.

    By default only icelines in [0, 1] are compared; pass ``eta_range=None``
    to include the whole extended η-grid.
    """
    mask = np.ones(phi.eta_nodes.size, dtype=bool)
    if eta_range is not None:
        lo, hi = eta_range
        mask = (phi.eta_nodes >= lo - 1e-12) & (phi.eta_nodes <= hi + 1e-12)
    eta = phi.eta_nodes[mask]
    diff = phi.values[mask] - equilibrium_values(eta, params)
    return float(np.max(np.abs(diff)))


@dataclass(frozen=True, eq=False)
class ReducedDynamics:
    """Iceline excess on the manifold, Φ*(η)(η) - T_c, tabulated over [0, 1]."""

    eta: np.ndarray
    excess: np.ndarray
    h: np.ndarray

    def crossings(self) -> list[float]:
        """Zeros of the tabulated excess, linearly interpolated."""
        out = []
        e, v = self.eta, self.excess
        for i in np.flatnonzero(np.sign(v[:-1]) != np.sign(v[1:])):
            if v[i] == 0.0:
                out.append(float(e[i]))
            else:
                out.append(float(e[i] - v[i] * (e[i + 1] - e[i]) / (v[i + 1] - v[i])))
        return out


def reduced_dynamics(phi: GraphFn, params: Params) -> ReducedDynamics:
    mask = (phi.eta_nodes >= -1e-12) & (phi.eta_nodes <= 1.0 + 1e-12)
    eta = phi.eta_nodes[mask]
    excess = phi.diagonal(eta) - params.T_c
    return ReducedDynamics(eta, excess, np.asarray(iceline_excess(eta, params)))


def random_graph(params: Params, rng: np.random.Generator, eta_nodes=None,
                 lipschitz: float | None = None, modes: int = 4) -> GraphFn:
    """A smooth random graph with η-Lipschitz constant below ``lipschitz``.

    The η-independent part is a local-equilibrium profile at a random
    iceline, so the sup-norm stays far below ``r`` for default parameters.
    """
    cert = certificate(params)
    L = cert.L_bound if lipschitz is None else lipschitz
    eta = default_eta_nodes() if eta_nodes is None else np.asarray(eta_nodes, dtype=float)
    y = params.grid.nodes
    base = equilibrium_values(rng.uniform(0.0, 1.0), params)
    omega = rng.uniform(1.0, 20.0, modes)
    amp = rng.uniform(0.2, 1.0, modes)
    amp *= rng.uniform(0.5, 0.99) * L / np.sum(amp * omega)
    values = np.broadcast_to(base, (eta.size, y.size)).copy()
    for a, w in zip(amp, omega):
        in_eta = np.sin(w * eta + rng.uniform(0, 2 * np.pi))
        in_y = np.cos(rng.uniform(0.5, 6.0) * y + rng.uniform(0, 2 * np.pi))
        values += a * in_eta[:, None] * in_y[None, :]
    return GraphFn(params.grid, eta, values)
