"""Command-line front end: ``dibm {simulate,equilibrium,manifold,bifurcate,verify}``.

Exit codes: 0 success, 1 failed checks, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bifurcation, checks, dynamics, equilibria, manifold
from .io import OutputExistsError, svg_line_plot, write_csv, write_json, write_text
from .physics import PARAM_KEYS, PARAM_SOURCES, Params, ParamsError, State, params_from_mapping, read_flat_config

COMMANDS = ("simulate", "equilibrium", "manifold", "bifurcate", "verify")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    params: Params
    command: str
    out_dir: Path
    overwrite: bool = False
    options: dict = field(default_factory=dict)


def _add_param_flags(parser: argparse.ArgumentParser):
    defaults = Params().as_flat_dict()
    group = parser.add_argument_group("model parameters (override --config)")
    for key in PARAM_KEYS:
        group.add_argument(f"--{key}", dest=f"param_{key}", metavar="VALUE", default=None,
                           help=f"{PARAM_SOURCES[key]} [default: {defaults[key]:g}]")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat 'key = value' parameter file")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory [default: out]")
    common.add_argument("--overwrite", action="store_true", help="replace existing output files")
    _add_param_flags(common)

    parser = argparse.ArgumentParser(prog="dibm", description=(
        "Budyko energy balance model with a dynamic iceline: simulation, equilibria, "
        "invariant manifold and solar-constant bifurcation."))
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", parents=[common], help="run trajectories")
    sim.add_argument("--eta0", type=float, nargs="+", default=[0.1, 0.5, 1.0],
                     help="initial icelines [default: 0.1 0.5 1.0]")
    sim.add_argument("--start", choices=("t0", "equilibrium"), default="t0",
                     help="initial profile: 14 - 54 y^2 or T*(eta0) [default: t0]")
    sim.add_argument("--fixed-iceline", action="store_true", help="freeze the iceline (eps = 0)")
    sim.add_argument("--max-steps", type=int, default=100_000)
    sim.add_argument("--stride", type=int, default=dynamics.FRAME_STRIDE)
    sim.add_argument("--profile-stride", type=int, default=dynamics.PROFILE_STRIDE,
                     help="write a full profile every N frames")
    sim.add_argument("--no-profiles", action="store_true", help="skip the long-format profile CSV")

    eq = sub.add_parser("equilibrium", parents=[common], help="roots of h and the h table")
    eq.add_argument("--scan-step", type=float, default=equilibria.SCAN_STEP)

    man = sub.add_parser("manifold", parents=[common], help="graph-transform fixed point")
    man.add_argument("--tol", type=float, default=1e-9)
    man.add_argument("--max-iter", type=int, default=10_000)
    man.add_argument("--no-graph-dump", action="store_true", help="skip the long-format graph CSV")

    bif = sub.add_parser("bifurcate", parents=[common], help="sweep the solar constant Q")
    bif.add_argument("--q-min", type=float, default=280.0)
    bif.add_argument("--q-max", type=float, default=420.0)
    bif.add_argument("--q-step", type=float, default=1.0)

    ver = sub.add_parser("verify", parents=[common], help="run the acceptance checks")
    ver.add_argument("--skip", action="append", default=[],
                     choices=checks.GROUPS + [c.key for c in checks.CHECKS],
                     help="skip a check group or a check number (repeatable)")
    return parser


def parse_config(argv=None) -> RunConfig:
    """Resolve parameters: defaults, then ``--config`` file, then flags."""
    args = build_parser().parse_args(argv)
    values = {}
    if args.config is not None:
        if not args.config.is_file():
            raise ConfigError(f"config file {args.config} does not exist")
        values.update(read_flat_config(args.config))
    for key in PARAM_KEYS:
        flag = getattr(args, f"param_{key}")
        if flag is not None:
            values[key] = flag
    params = params_from_mapping(values)
    options = {k: v for k, v in vars(args).items()
               if not k.startswith("param_") and k not in ("config", "out", "overwrite", "command")}
    return RunConfig(params, args.command, args.out, args.overwrite, options)


def _preflight(out_dir: Path, names, overwrite: bool):
    if overwrite:
        return
    for name in names:
        if (out_dir / name).exists():
            raise OutputExistsError(out_dir / name)


def cmd_simulate(cfg: RunConfig) -> int:
    p, o = cfg.params, cfg.options
    for eta0 in o["eta0"]:
        stem = f"simulate_eta0_{eta0:g}"
        names = [f"{stem}_frames.csv", f"{stem}_summary.json"]
        if not o["no_profiles"]:
            names.append(f"{stem}_profiles.csv")
        _preflight(cfg.out_dir, names, cfg.overwrite)
        profile = (equilibria.equilibrium_profile(eta0, p) if o["start"] == "equilibrium"
                   else dynamics.initial_profile(p.grid))
        start = time.perf_counter()
        if o["fixed_iceline"]:
            traj = dynamics.fixed_iceline_simulate(State(profile, eta0), p, o["max_steps"],
                                                   stride=o["stride"], profile_stride=o["profile_stride"])
        else:
            traj = dynamics.simulate(State(profile, eta0), p, o["max_steps"], o["stride"],
                                     o["profile_stride"])
        wall = time.perf_counter() - start
        write_csv(cfg.out_dir / names[0], ["time", "eta", "iceline_temp_C", "mean_temp_C"],
                  [(f.time, f.eta, f.iceline_temp, f.mean_temp) for f in traj.frames], cfg.overwrite)
        if not o["no_profiles"]:
            y = p.grid.nodes
            rows = ((f.time, yy, tt) for f in traj.frames if f.profile is not None
                    for yy, tt in zip(y, f.profile))
            write_csv(cfg.out_dir / names[2], ["time", "y", "temperature_C"], rows, cfg.overwrite)
        summary = {"eta0": eta0, "outcome": traj.outcome, "final_eta": traj.final_eta,
                   "steps": traj.steps, "final_time": traj.final_time, "wall_time_s": wall,
                   "fixed_iceline": bool(o["fixed_iceline"]), "params": p.as_flat_dict()}
        write_json(cfg.out_dir / names[1], summary, cfg.overwrite)
        print(f"eta0={eta0:g}: {traj.outcome}, final eta {traj.final_eta:.6f} after {traj.steps} steps")
    return 0


def cmd_equilibrium(cfg: RunConfig) -> int:
    p = cfg.params
    names = ["equilibrium_roots.csv", "equilibrium_h.csv", "equilibrium_h.svg"]
    _preflight(cfg.out_dir, names, cfg.overwrite)
    roots = equilibria.find_interior_roots(p, cfg.options["scan_step"]) + equilibria.boundary_equilibria(p)
    write_csv(cfg.out_dir / names[0], ["eta", "iceline_temp_C", "kind", "stable", "h_value"],
              [(r.eta, r.iceline_temp, r.kind, r.stable, r.h_value) for r in roots], cfg.overwrite)
    etas = np.linspace(0.0, 1.0, 1001)
    h = equilibria.iceline_excess(etas, p)
    write_csv(cfg.out_dir / names[1], ["eta", "h"], zip(etas, h), cfg.overwrite)
    svg = svg_line_plot([{"x": etas, "y": h, "color": "steelblue", "label": "T*(η)(η) - T_c"},
                         {"x": [0, 1], "y": [0, 0], "color": "gray", "dashed": True}],
                        xlabel="iceline η", ylabel="h(η), °C", title="Iceline excess temperature")
    write_text(cfg.out_dir / names[2], svg, cfg.overwrite)
    for r in roots:
        print(f"{r.kind:>22}  eta={r.eta:.6f}  T(eta)={r.iceline_temp:.4f} C  "
              f"{'stable' if r.stable else 'unstable'}")
    return 0


def cmd_manifold(cfg: RunConfig) -> int:
    p, o = cfg.params, cfg.options
    names = ["manifold_iceline.csv", "manifold_certificate.json", "manifold.svg"]
    if not o["no_graph_dump"]:
        names.append("manifold_graph.csv")
    _preflight(cfg.out_dir, names, cfg.overwrite)
    cert = manifold.certificate(p)
    start = time.perf_counter()
    fp = manifold.fixed_point(p, o["tol"], o["max_iter"])
    wall = time.perf_counter() - start
    red = manifold.reduced_dynamics(fp.graph, p)
    write_csv(cfg.out_dir / names[0], ["eta", "phi_iceline_temp", "h_plus_Tc", "gap"],
              [(e, x + p.T_c, h + p.T_c, x - h) for e, x, h in zip(red.eta, red.excess, red.h)],
              cfg.overwrite)
    report = dict(cert.as_dict())
    report.update(empirical_ratio=fp.ratio, iterations=fp.iterations, residual=fp.residual,
                  distance_unit_interval=manifold.distance_to_equilibrium_set(fp.graph, p),
                  distance_all=manifold.distance_to_equilibrium_set(fp.graph, p, eta_range=None),
                  distance_bound=p.eps * cert.r_bound / p.B, crossings=red.crossings(),
                  wall_time_s=wall, params=p.as_flat_dict())
    write_json(cfg.out_dir / names[1], report, cfg.overwrite)
    svg = svg_line_plot([{"x": red.eta, "y": red.h + p.T_c, "color": "gray", "dashed": True,
                          "label": "T*(η)(η)"},
                         {"x": red.eta, "y": red.excess + p.T_c, "color": "firebrick",
                          "label": "Φ*(η)(η)"},
                         {"x": [0, 1], "y": [p.T_c, p.T_c], "color": "black", "dashed": True,
                          "label": "T_c"}],
                        xlabel="iceline η", ylabel="iceline temperature, °C",
                        title=f"Invariant manifold, ε = {p.eps:g}")
    write_text(cfg.out_dir / names[2], svg, cfg.overwrite)
    if not o["no_graph_dump"]:
        g = fp.graph
        rows = ((e, yy, tt) for e, prof in zip(g.eta_nodes, g.values)
                for yy, tt in zip(p.grid.nodes, prof))
        write_csv(cfg.out_dir / names[3], ["eta", "y", "temperature"], rows, cfg.overwrite)
    print(f"converged in {fp.iterations} iterations, residual {fp.residual:.2e}, "
          f"ratio {fp.ratio:.4f}; certified={cert.certified} (rho={cert.rho:.4f})")
    return 0


def bifurcation_svg(table: bifurcation.BifurcationTable) -> str:
    series = []
    colors = {equilibria.INTERIOR: "steelblue", equilibria.ICE_COVERED: "navy",
              equilibria.ICE_FREE: "darkorange"}
    q_all = table.q_values()
    step = float(np.min(np.diff(q_all))) if q_all.size > 1 else 1.0
    interior = [r for r in table.rows if r.kind == equilibria.INTERIOR]
    groups = {}
    for r in table.rows:
        if r.kind != equilibria.INTERIOR:
            groups.setdefault((r.kind, r.stable), []).append(r)
    for r in interior:
        groups.setdefault((equilibria.INTERIOR, r.stable), []).append(r)
    seen = set()
    for (kind, stable), rows in sorted(groups.items()):
        rows.sort(key=lambda r: (r.Q, r.eta))
        segment = [rows[0]]
        for r in rows[1:]:
            if r.Q - segment[-1].Q > 1.5 * step or abs(r.eta - segment[-1].eta) > 0.2:
                series.append((kind, stable, segment))
                segment = [r]
            else:
                segment.append(r)
        series.append((kind, stable, segment))
    plot = []
    for kind, stable, seg in series:
        label = f"{kind.replace('_', ' ')} ({'stable' if stable else 'unstable'})"
        x = [r.Q for r in seg]
        y = [r.eta for r in seg]
        if len(seg) == 1:
            x, y = [x[0] - step / 4, x[0] + step / 4], [y[0], y[0]]
        plot.append({"x": x, "y": y, "color": colors[kind], "dashed": not stable,
                     "label": None if (kind, stable) in seen else label})
        seen.add((kind, stable))
    return svg_line_plot(plot, xlabel="solar constant Q, W m⁻²", ylabel="iceline η",
                         title="Equilibrium iceline vs. solar input",
                         vlines=[(table.q_current, "green", f"Q = {table.q_current:g}")],
                         ylim=(-0.05, 1.05))


def cmd_bifurcate(cfg: RunConfig) -> int:
    p, o = cfg.params, cfg.options
    names = ["bifurcation.csv", "bifurcation.svg"]
    _preflight(cfg.out_dir, names, cfg.overwrite)
    table = bifurcation.sweep(o["q_min"], o["q_max"], o["q_step"], p)
    write_csv(cfg.out_dir / names[0], ["Q", "eta", "kind", "stable"],
              [(r.Q, r.eta, r.kind, r.stable) for r in table.rows], cfg.overwrite)
    write_text(cfg.out_dir / names[1], bifurcation_svg(table), cfg.overwrite)
    qs = table.q_values()
    counts = [len(table.at(q, equilibria.INTERIOR)) for q in qs]
    change = next((i for i in range(1, len(qs)) if counts[i] != counts[0]), None)
    if change is not None:
        fold = bifurcation.fold_locate(p, float(qs[change - 1]), float(qs[change]))
        print(f"first change in the interior root count at Q ≈ {fold:.3f} W m^-2 "
              f"({counts[0]} -> {counts[change]} roots)")
    print(f"{len(table.rows)} rows over {len(table.q_values())} values of Q")
    return 0


def cmd_verify(cfg: RunConfig) -> int:
    skip = set(cfg.options["skip"])
    artifacts = checks.render_artifacts(cfg.params, skip)
    names = list(artifacts) + ["verify_report.json"]
    _preflight(cfg.out_dir, names, cfg.overwrite)
    results = checks.run_checks(cfg.params, skip=skip)
    for name, text in artifacts.items():
        write_text(cfg.out_dir / name, text, cfg.overwrite)
    write_json(cfg.out_dir / "verify_report.json",
               {"passed": all(r.passed is not False for r in results),
                "checks": [r.as_dict() for r in results],
                "params": cfg.params.as_flat_dict()}, cfg.overwrite)
    for r in results:
        print(r.line())
    failed = [r.key for r in results if r.passed is False]
    print(f"{sum(r.passed is True for r in results)} passed, {len(failed)} failed, "
          f"{sum(r.passed is None for r in results)} skipped")
    return 1 if failed else 0


HANDLERS = {"simulate": cmd_simulate, "equilibrium": cmd_equilibrium, "manifold": cmd_manifold,
            "bifurcate": cmd_bifurcate, "verify": cmd_verify}


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (ConfigError, ParamsError) as exc:
        print(f"dibm: configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        return HANDLERS[cfg.command](cfg)
    except OutputExistsError as exc:
        print(f"dibm: {exc}", file=sys.stderr)
        return 2
    except (manifold.ConvergenceError, manifold.PreimageError, dynamics.SimulationError) as exc:
        print(f"dibm: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
