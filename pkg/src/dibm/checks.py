"""Acceptance checks run by ``dibm verify`` and the acceptance test module.

Each check returns a :class:`CheckResult` holding what was measured and
what was expected, and it never raises on a failed comparison. Reference
values come from the published model description; tolerances are fixed
here.
"""

from __future__ import annotations

import io as _io
import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import bifurcation, dynamics, equilibria, manifold, physics
from .grid import Profile
from .io import format_value
from .physics import Params, State

__all__ = ["CHECKS", "Check", "CheckResult", "Context", "render_artifacts", "run_checks"]

ETA1_REF = 0.225
ETA2_REF = 0.962
ROOT_TOL_REF = 0.02
ENDPOINT_TOL = 0.01
CERTIFIED_EPS = 4e-4
SIM_EPS = 0.025
RANDOM_PAIRS = 20
PAIR_SEED = 20100


@dataclass
class CheckResult:
    key: str
    title: str
    group: str
    passed: bool | None
    measured: dict = field(default_factory=dict)
    expected: dict = field(default_factory=dict)
    note: str = ""

    @property
    def status(self) -> str:
        return "SKIP" if self.passed is None else ("PASS" if self.passed else "FAIL")

    def line(self) -> str:
        def fmt(d):
            return ", ".join(f"{k}={_short(v)}" for k, v in d.items())
        text = f"[{self.status}] {self.key:>2} {self.title}"
        if self.passed is not None:
            text += f" | measured: {fmt(self.measured)} | expected: {fmt(self.expected)}"
        if self.note:
            text += f" | {self.note}"
        return text

    def as_dict(self) -> dict:
        return {"key": self.key, "title": self.title, "group": self.group,
                "passed": self.passed, "status": self.status, "measured": self.measured,
                "expected": self.expected, "note": self.note}


def _short(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.6g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_short(x) for x in v) + "]"
    return str(v)


class Context:
    """Shared, lazily computed objects for one verification run."""

    def __init__(self, params: Params):
        self.params = params
        self._fixed = {}

    def fixed_point(self, eps: float) -> manifold.FixedPointResult:
        if eps not in self._fixed:
            self._fixed[eps] = manifold.fixed_point(self.params.replace(eps=eps))
        return self._fixed[eps]

    def t0_state(self, eta0: float) -> State:
        return State(dynamics.initial_profile(self.params.grid), eta0)


@dataclass(frozen=True)
class Check:
    key: str
    title: str
    group: str
    run: Callable[[Context], CheckResult]


def _sharp_iceline_temp(eta: float, p: Params) -> float:
    """T*(η)(η) for a step albedo (0.32 water, 0.62 ice), integrated analytically."""
    covered = eta - physics.INSOLATION_P2 / 2.0 * (eta ** 3 - eta)
    g = p.Q * (0.68 * covered + 0.38 * (1.0 - covered))
    local = p.Q * float(physics.insolation(eta)) * (1.0 - physics.ALBEDO_MID)
    return (local - p.A + p.C / p.B * (g - p.A)) / (p.B + p.C)


def _stable_root(p: Params) -> float | None:
    stable = [r.eta for r in equilibria.find_interior_roots(p) if r.stable]
    return stable[-1] if stable else None


def check_roots(ctx: Context) -> CheckResult:
    measured, ok = {}, True
    for M in (15.0, 25.0, 50.0):
        roots = equilibria.find_interior_roots(ctx.params.replace(M=M))
        etas = [r.eta for r in roots]
        measured[f"M={M:g}"] = etas
        ok &= (len(roots) == 2
               and abs(etas[0] - ETA1_REF) <= ROOT_TOL_REF
               and abs(etas[1] - ETA2_REF) <= ROOT_TOL_REF)
    return CheckResult("1", "equilibrium roots", "equilibria", ok, measured,
                       {"count": 2, "eta1": f"{ETA1_REF} ± {ROOT_TOL_REF}",
                        "eta2": f"{ETA2_REF} ± {ROOT_TOL_REF}"})


def check_ice_free_instability(ctx: Context) -> CheckResult:
    p = ctx.params
    h1 = equilibria.iceline_excess(1.0, p)
    eta2 = _stable_root(p)
    traj = dynamics.simulate(ctx.t0_state(1.0), p, profile_stride=10**9)
    sharp = _sharp_iceline_temp(1.0, p)
    ok = (h1 < 0 and eta2 is not None and traj.outcome == dynamics.CONVERGED
          and abs(traj.final_eta - eta2) <= ENDPOINT_TOL
          and abs(sharp - (-11.7)) < 0.05 and sharp < p.T_c)
    return CheckResult("2", "ice-free instability", "dynamics", ok,
                       {"h(1)": h1, "final_eta": traj.final_eta, "eta2": eta2,
                        "outcome": traj.outcome, "sharp_T*(1)(1)": sharp},
                       {"h(1)": "< 0", "final_eta": f"eta2 ± {ENDPOINT_TOL}",
                        "sharp_T*(1)(1)": "≈ -11.7 < T_c"},
                       note=f"distance of final eta to the reference {ETA2_REF}: "
                            f"{abs(traj.final_eta - ETA2_REF):.4f}")


def check_t0_endpoints(ctx: Context) -> CheckResult:
    p = ctx.params
    eta2 = _stable_root(p)
    measured, ok = {}, eta2 is not None
    for eta0 in (0.1, 0.5, 1.0):
        traj = dynamics.simulate(ctx.t0_state(eta0), p, profile_stride=10**9)
        measured[f"eta0={eta0}"] = f"{traj.outcome} @ {traj.final_eta:.6f}"
        if eta0 == 0.1:
            ok &= traj.outcome == dynamics.FROZEN and traj.eta_range[0] <= 0.0
        else:
            ok &= (traj.outcome == dynamics.CONVERGED
                   and abs(traj.final_eta - eta2) <= ENDPOINT_TOL)
    return CheckResult("3", "endpoints from T0", "dynamics", ok, measured,
                       {"eta0=0.1": "frozen", "eta0=0.5": f"eta2={eta2:.6f} ± {ENDPOINT_TOL}",
                        "eta0=1.0": f"eta2 ± {ENDPOINT_TOL}"})


def check_fixed_iceline(ctx: Context) -> CheckResult:
    p = ctx.params
    bound = 1.0 - p.dt * p.B + 1e-3
    measured, ok = {}, True
    for eta0 in (0.1, 0.3, 0.5, 1.0):
        traj = dynamics.fixed_iceline_simulate(ctx.t0_state(eta0), p, profile_stride=10**9)
        target = equilibria.equilibrium_profile(eta0, p)
        dist = (traj.final.profile - target).sup_norm()
        measured[f"eta0={eta0}"] = f"dist={dist:.2e} ratio={traj.ratio:.6f}"
        ok &= traj.outcome == dynamics.CONVERGED and dist < 1e-6 and traj.ratio <= bound
    return CheckResult("4", "fixed-iceline relaxation", "dynamics", ok, measured,
                       {"dist": "< 1e-6", "ratio": f"<= {bound:.6f}"})


def check_contraction(ctx: Context) -> CheckResult:
    p = ctx.params.replace(eps=CERTIFIED_EPS)
    cert = manifold.certificate(p)
    rng = np.random.default_rng(PAIR_SEED)
    ratios = []
    for _ in range(RANDOM_PAIRS):
        phi = manifold.random_graph(p, rng)
        gamma = manifold.random_graph(p, rng)
        ratios.append(manifold.graph_transform(phi, p).distance(manifold.graph_transform(gamma, p))
                      / phi.distance(gamma))
    worst = max(ratios)
    ok = cert.eps <= cert.eps_max and cert.rho < 1 and worst <= cert.rho + 1e-3
    return CheckResult("5", "contraction certificate", "manifold", ok,
                       {"eps_max": cert.eps_max, "rho": cert.rho, "rho_literal": cert.rho_literal,
                        "max_ratio": worst},
                       {"eps_max": "≈ 4.69e-4", "rho": "< 1", "max_ratio": "<= rho + 1e-3"})


def check_fixed_point_bound(ctx: Context) -> CheckResult:
    p = ctx.params
    r = manifold.certificate(p).r_bound
    measured, ok = {}, True
    for eps in (CERTIFIED_EPS, SIM_EPS):
        pe = p.replace(eps=eps)
        try:
            fp = ctx.fixed_point(eps)
        except (manifold.ConvergenceError, manifold.PreimageError) as exc:
            measured[f"eps={eps:g}"] = f"no convergence: {exc}"
            ok = False
            continue
        dist = manifold.distance_to_equilibrium_set(fp.graph, pe)
        dist_all = manifold.distance_to_equilibrium_set(fp.graph, pe, eta_range=None)
        bound = eps * r / p.B
        measured[f"eps={eps:g}"] = (f"iters={fp.iterations} residual={fp.residual:.2e} "
                                    f"dist[0,1]={dist:.4f} dist_all={dist_all:.4f} bound={bound:.4f}")
        ok &= fp.residual < 1e-9 and dist <= bound
    return CheckResult("6", "fixed point and O(eps) bound", "manifold", ok, measured,
                       {"residual": "< 1e-9", "dist[0,1]": "<= eps*r/B"})


def check_reduced_dynamics(ctx: Context) -> CheckResult:
    p = ctx.params.replace(eps=CERTIFIED_EPS)
    fp = ctx.fixed_point(CERTIFIED_EPS)
    red = manifold.reduced_dynamics(fp.graph, p)
    roots = [x.eta for x in equilibria.find_interior_roots(p)]
    cross = red.crossings()
    slack = CERTIFIED_EPS * manifold.certificate(p).r_bound / p.B + equilibria.ROOT_XTOL
    ok = (len(roots) == 2 and len(cross) == 2 and red.excess[0] < 0 < red.excess[len(red.eta) // 2]
          and red.excess[-1] < 0
          and all(abs(c - e) <= slack for c, e in zip(cross, roots)))
    return CheckResult("7", "reduced dynamics sign pattern", "manifold", ok,
                       {"crossings": cross, "roots": roots, "excess(0)": float(red.excess[0]),
                        "excess(1)": float(red.excess[-1])},
                       {"pattern": "-, +, -", "crossing offset": f"<= {slack:.4f}"})


def check_bifurcation(ctx: Context) -> CheckResult:
    p = ctx.params
    table = bifurcation.sweep(280.0, 420.0, 1.0, p)
    low = table.at(280.0, equilibria.INTERIOR)
    cur = table.at(343.0, equilibria.INTERIOR)
    free_cur = table.at(343.0, equilibria.ICE_FREE)[0]
    free_hi = [r for r in equilibria.boundary_equilibria(p.replace(Q=500.0))
               if r.kind == equilibria.ICE_FREE][0]
    fold = bifurcation.fold_locate(p, 280.0, 343.0)
    ok = (not low and len(cur) == 2 and not cur[0].stable and cur[1].stable
          and not free_cur.stable and free_hi.stable and 280.0 < fold < 343.0)
    return CheckResult("8", "bifurcation diagram", "bifurcation", ok,
                       {"interior@280": len(low), "interior@343": [(round(r.eta, 4), r.stable) for r in cur],
                        "ice_free_stable@343": free_cur.stable, "ice_free_stable@500": free_hi.stable,
                        "fold_Q": fold},
                       {"interior@280": 0, "interior@343": "unstable lower, stable upper",
                        "ice_free_stable@343": False, "ice_free_stable@500": True,
                        "fold_Q": "in (280, 343)"})


def check_quadrature(ctx: Context) -> CheckResult:
    p = ctx.params
    spec = p.grid
    s_mean = Profile(spec, physics.insolation(spec.nodes)).mean_unit_interval()
    etas = np.linspace(-0.5, 1.5, 41)
    gaps = [abs(equilibria.equilibrium_profile(e, p).mean_unit_interval()
                - (equilibria.absorbed_integral(e, p) - p.A) / p.B) for e in etas]
    g_lo, g_hi = equilibria.absorbed_integral(-1.0, p), equilibria.absorbed_integral(2.0, p)
    mean_free = equilibria.equilibrium_profile(2.0, p).mean_unit_interval()
    ok = (abs(s_mean - 1.0) < 1e-12 and max(gaps) < 1e-8 and abs(g_lo - 130.34) < 0.1
          and abs(g_hi - 233.24) < 0.1 and abs(mean_free - 16.44) < 0.1)
    return CheckResult("9", "quadrature and identities", "equilibria", ok,
                       {"int_s": s_mean, "max_mean_gap": max(gaps), "g(-1)": g_lo, "g(2)": g_hi,
                        "ice_free_mean": mean_free},
                       {"int_s": 1.0, "max_mean_gap": "< 1e-8", "g(-1)": "130.34 ± 0.1",
                        "g(2)": "233.24 ± 0.1", "ice_free_mean": "16.44 ± 0.1"})


def check_two_roots_sweep(ctx: Context) -> CheckResult:
    counts = {f"M={M:g}": len(equilibria.find_interior_roots(ctx.params.replace(M=M)))
              for M in (10.5, 25.0, 50.0, 100.0)}
    return CheckResult("10", "two roots across M", "equilibria",
                       all(c == 2 for c in counts.values()), counts, {"count": 2})


def check_determinism(ctx: Context) -> CheckResult:
    first = render_artifacts(ctx.params)
    second = render_artifacts(ctx.params)
    same = [name for name in first if first[name] == second.get(name)]
    ok = len(same) == len(first) and first.keys() == second.keys()
    return CheckResult("11", "determinism", "determinism", ok,
                       {"identical_files": len(same)}, {"identical_files": len(first)})


CHECKS = [
    Check("1", "equilibrium roots", "equilibria", check_roots),
    Check("2", "ice-free instability", "dynamics", check_ice_free_instability),
    Check("3", "endpoints from T0", "dynamics", check_t0_endpoints),
    Check("4", "fixed-iceline relaxation", "dynamics", check_fixed_iceline),
    Check("5", "contraction certificate", "manifold", check_contraction),
    Check("6", "fixed point and O(eps) bound", "manifold", check_fixed_point_bound),
    Check("7", "reduced dynamics sign pattern", "manifold", check_reduced_dynamics),
    Check("8", "bifurcation diagram", "bifurcation", check_bifurcation),
    Check("9", "quadrature and identities", "equilibria", check_quadrature),
    Check("10", "two roots across M", "equilibria", check_two_roots_sweep),
    Check("11", "determinism", "determinism", check_determinism),
]

GROUPS = sorted({c.group for c in CHECKS})


def run_checks(params: Params, skip=(), only=None, ctx: Context | None = None) -> list[CheckResult]:
    ctx = ctx or Context(params)
    results = []
    for check in CHECKS:
        if check.group in skip or check.key in skip or (only and check.key not in only):
            results.append(CheckResult(check.key, check.title, check.group, None, note="skipped"))
            continue
        results.append(check.run(ctx))
    return results


def _csv_text(header, rows) -> str:
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    return buf.getvalue()


def render_artifacts(params: Params, skip=()) -> dict[str, str]:
    """CSV outputs of a verification run, keyed by file name."""
    out = {}
    roots = equilibria.find_interior_roots(params) + equilibria.boundary_equilibria(params)
    out["roots.csv"] = _csv_text(["eta", "iceline_temp_C", "kind", "stable", "h_value"],
                                 [(r.eta, r.iceline_temp, r.kind, r.stable, r.h_value) for r in roots])
    etas = np.linspace(0.0, 1.0, 1001)
    out["h.csv"] = _csv_text(["eta", "h"], zip(etas, equilibria.iceline_excess(etas, params)))
    if "dynamics" not in skip:
        for eta0 in (0.1, 0.5, 1.0):
            traj = dynamics.simulate(State(dynamics.initial_profile(params.grid), eta0), params,
                                     profile_stride=10**9)
            out[f"frames_eta0_{eta0:g}.csv"] = _csv_text(
                ["time", "eta", "iceline_temp_C", "mean_temp_C"],
                [(f.time, f.eta, f.iceline_temp, f.mean_temp) for f in traj.frames])
    if "bifurcation" not in skip:
        table = bifurcation.sweep(280.0, 420.0, 1.0, params)
        out["bifurcation.csv"] = _csv_text(["Q", "eta", "kind", "stable"],
                                           [(r.Q, r.eta, r.kind, r.stable) for r in table.rows])
    if "manifold" not in skip:
        p = params.replace(eps=CERTIFIED_EPS)
        fp = manifold.fixed_point(p)
        red = manifold.reduced_dynamics(fp.graph, p)
        out["manifold.csv"] = _csv_text(
            ["eta", "phi_iceline_temp", "h_plus_Tc", "gap"],
            [(e, x + p.T_c, h + p.T_c, x - h) for e, x, h in zip(red.eta, red.excess, red.h)])
    return out
