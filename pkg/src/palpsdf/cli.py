"""Command-line interface.

Every subcommand writes its primary output plus a JSON manifest next to it
(``<out>.manifest.json`` unless ``--manifest`` is given). The manifest records
the argument vector, the resolved configuration, the seed and the SHA-256 of
every input file, which is enough to regenerate the output.

Exit status: 0 on success, 1 on invalid input, 2 on numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .contact import MaterialParams, estimate_E_kappa_compliance, settling_time_check
from .files import (read_probe_file, group_sites, sha256_file, sites_to_lines, write_manifest,
                    write_probe_file)
from .grid import GridGeometry, load_grid, save_grid
from .mesh import export_mesh
from .metrics import convergence_study, write_convergence_csv
from .pipeline import PipelineConfig, estimate_modulus, reconstruct_undeformed
from .recon import PoissonConfig, SolverError
from .reinit import ReinitConfig, reinitialize
from .sim import RNG_ALGORITHM, CampaignConfig, ShapeSpec, simulate_campaign

log = logging.getLogger("palpsdf")

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NUMERICAL = 2


class UsageError(Exception):
    pass


class NumericalFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _shape_args(p):
    g = p.add_argument_group("shape")
    g.add_argument("--shape", choices=("sphere", "plane", "ellipsoid"), default="sphere")
    g.add_argument("--center", type=float, nargs=3, default=[0.0, 0.0, 0.0], metavar=("X", "Y", "Z"))
    g.add_argument("--radius", type=float, default=0.1, help="sphere radius (m)")
    g.add_argument("--point", type=float, nargs=3, default=[0.0, 0.0, 0.0], help="plane point (m)")
    g.add_argument("--normal", type=float, nargs=3, default=[0.0, 0.0, 1.0], help="plane outward normal")
    g.add_argument("--patch-half-width", type=float, default=0.1, help="plane sampling patch (m)")
    g.add_argument("--semi-axes", type=float, nargs=3, default=None, help="ellipsoid semi-axes (m)")


def _material_args(p):
    g = p.add_argument_group("material")
    g.add_argument("--E", type=float, default=8000.0, help="Young's modulus (Pa)")
    g.add_argument("--nu", type=float, default=0.45, help="Poisson's ratio")
    g.add_argument("--rho", type=float, default=None, help="density (kg/m^3)")


def _campaign_args(p, with_samples=True):
    g = p.add_argument_group("campaign")
    if with_samples:
        g.add_argument("--n-samples", type=int, default=500)
        g.add_argument("--noise-sigma", type=float, default=1e-3,
                       help="std of position noise (m) and normal noise (dimensionless)")
    g.add_argument("--forces", type=float, nargs="+", default=[3.0, 4.5], help="force levels (N)")
    g.add_argument("--punch-radius", type=float, default=0.01, help="punch radius (m)")
    g.add_argument("--seed", type=int, default=0, help="64-bit RNG seed")


def _grid_args(p):
    g = p.add_argument_group("grid")
    g.add_argument("--nodes", type=int, default=96, help="nodes per axis")
    g.add_argument("--side", type=float, default=0.3, help="cube side (m)")
    g.add_argument("--grid-center", type=float, nargs=3, default=None,
                   help="cube center (m); default: center of the probe bounding box")


def _reinit_args(p):
    g = p.add_argument_group("reinitialization")
    g.add_argument("--epsilon", type=float, default=1e-2)
    g.add_argument("--dt", type=float, default=None, help="pseudo-time step (m); default 0.5 h")
    g.add_argument("--max-iterations", type=int, default=500)
    g.add_argument("--band-width", type=float, default=None, help="update only |phi| < band (m)")


def _out_args(p, required=True, default=None):
    p.add_argument("--out", required=required, default=default, help="primary output file")
    p.add_argument("--manifest", default=None, help="manifest path (default: <out>.manifest.json)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="palpsdf", description="Shape and stiffness reconstruction from palpation data.")
    parser.add_argument("--version", action="version", version=f"palpsdf {__version__}")
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="generate a probe campaign on an analytic shape")
    _shape_args(p)
    _material_args(p)
    _campaign_args(p)
    _out_args(p)

    p = sub.add_parser("reconstruct", help="probe file -> unloaded signed distance grid")
    p.add_argument("probes")
    p.add_argument("--nu", type=float, default=0.45)
    p.add_argument("--kappa", type=float, default=0.0, help="curvature for the geometric correction (1/m)")
    p.add_argument("--estimate-kappa", action="store_true")
    p.add_argument("--low-window", type=int, nargs="+", default=[0])
    p.add_argument("--high-window", type=int, nargs="+", default=[-1])
    p.add_argument("--projected", action="store_true", help="measure displacement along the normal")
    p.add_argument("--tolerance", type=float, default=1e-8, help="Poisson relative residual")
    p.add_argument("--poisson-max-iterations", type=int, default=10_000)
    p.add_argument("--report", default=None, help="report path (default: <out>.report.json)")
    p.add_argument("--binary", action="store_true", help="store the payload in a sibling .bin file")
    _grid_args(p)
    _reinit_args(p)
    _out_args(p)

    p = sub.add_parser("estimate-modulus", help="two-point Young's modulus per site")
    p.add_argument("probes")
    p.add_argument("--nu", type=float, default=0.45)
    p.add_argument("--projected", action="store_true")
    _out_args(p)

    p = sub.add_parser("estimate-kappa", help="modulus and curvature from compliance variation")
    p.add_argument("probes")
    p.add_argument("--nu", type=float, default=0.45)
    p.add_argument("--low-window", type=int, nargs="+", default=[0])
    p.add_argument("--high-window", type=int, nargs="+", default=[-1])
    _out_args(p)

    p = sub.add_parser("reinit", help="redistance a grid file")
    p.add_argument("grid")
    p.add_argument("--binary", action="store_true")
    _reinit_args(p)
    _out_args(p)

    p = sub.add_parser("convergence", help="Hausdorff error versus sample count (CSV)")
    _shape_args(p)
    _material_args(p)
    _campaign_args(p, with_samples=False)
    p.add_argument("--N", type=int, nargs="+", default=[25, 50, 100, 200, 400])
    _grid_args(p)
    _out_args(p)

    p = sub.add_parser("export-mesh", help="grid file -> OBJ triangle mesh of the zero level set")
    p.add_argument("grid")
    _out_args(p)

    p = sub.add_parser("check-steady-state", help="elastic settling time versus contact time")
    p.add_argument("--E", type=float, required=True, help="Young's modulus (Pa)")
    p.add_argument("--rho", type=float, required=True, help="density (kg/m^3)")
    p.add_argument("--ell", type=float, required=True, help="characteristic length (m)")
    p.add_argument("--Tc", type=float, required=True, help="contact duration (s)")
    p.add_argument("--nu", type=float, default=0.45, help="Poisson's ratio (not used by the check)")
    _out_args(p, required=False, default="steady_state.json")
    return parser


def _shape(args) -> ShapeSpec:
    if args.shape == "sphere":
        return ShapeSpec.sphere(args.center, args.radius)
    if args.shape == "plane":
        return ShapeSpec.plane(args.point, args.normal, args.patch_half_width)
    if args.semi_axes is None:
        raise UsageError("--semi-axes is required for an ellipsoid")
    return ShapeSpec.ellipsoid(args.center, args.semi_axes)


def _write_json(path, data):
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _manifest(args, argv, config: dict, inputs=(), outputs=(), seed=None):
    out = args.manifest or f"{args.out}.manifest.json"
    write_manifest(out, {
        "tool": "palpsdf",
        "version": __version__,
        "command": args.command,
        "argv": list(argv),
        "config": config,
        "seed": seed,
        "inputs": {str(p): sha256_file(p) for p in inputs},
        "outputs": [str(p) for p in outputs],
    })


def _reinit_config(args) -> ReinitConfig:
    return ReinitConfig(epsilon=args.epsilon, dt=args.dt, max_iterations=args.max_iterations,
                        band_width=args.band_width)


def _cmd_simulate(args, argv):
    shape = _shape(args)
    material = MaterialParams(args.E, args.nu, args.rho)
    config = CampaignConfig(args.n_samples, tuple(args.forces), args.punch_radius,
                            args.noise_sigma, args.seed)
    sites = simulate_campaign(shape, material, config)
    write_probe_file(args.out, sites_to_lines(sites))
    _manifest(args, argv, {"shape": shape.to_dict(),
                           "material": {"E": material.E, "nu": material.nu, "rho": material.rho},
                           "campaign": config.to_dict(), "rng": RNG_ALGORITHM},
              outputs=[args.out], seed=args.seed)
    print(f"wrote {sum(len(s.probes) for s in sites)} probes at {len(sites)} sites to {args.out}")


def _cmd_reconstruct(args, argv):
    geometry = None
    if args.grid_center is not None:
        geometry = GridGeometry.cube(args.grid_center, args.side, args.nodes)
    config = PipelineConfig(nu=args.nu, geometry=geometry, grid_nodes=args.nodes, grid_side=args.side,
                            poisson=PoissonConfig(tolerance=args.tolerance,
                                                  max_iterations=args.poisson_max_iterations),
                            reinit=_reinit_config(args), kappa=args.kappa,
                            estimate_kappa=args.estimate_kappa,
                            low_window=tuple(args.low_window), high_window=tuple(args.high_window),
                            projected=args.projected)
    field, report = reconstruct_undeformed(args.probes, config)
    save_grid(args.out, field, inline=not args.binary)
    report_path = args.report or f"{args.out}.report.json"
    rep = report.to_dict()
    geo = field.geometry
    rep["grid"] = {"dims": list(geo.dims), "origin": list(geo.origin), "spacing": geo.spacing}
    _write_json(report_path, rep)
    _manifest(args, argv, config.to_dict(), inputs=[args.probes], outputs=[args.out, report_path])
    print(f"E = {report.mean:.6g} Pa (std {report.std:.4g} Pa over {report.sample_count} sites)")
    print(f"reinit: {report.reinit_iterations} iterations, residual {report.reinit_residual:.3e}")
    if not report.reinit_converged:
        raise NumericalFailure("reinitialization did not reach the residual target")


def _cmd_estimate_modulus(args, argv):
    sites = group_sites(read_probe_file(args.probes))
    report = estimate_modulus(sites, args.nu, projected=args.projected)
    _write_json(args.out, report.to_dict())
    _manifest(args, argv, {"nu": args.nu, "projected": args.projected}, inputs=[args.probes],
              outputs=[args.out])
    print(f"E = {report.mean:.6g} Pa (std {report.std:.4g} Pa over {report.sample_count} sites)")


def _cmd_estimate_kappa(args, argv):
    sites = group_sites(read_probe_file(args.probes))
    per_E, per_k, notes = [], [], []
    for site in sites:
        rep = estimate_E_kappa_compliance(site, args.nu, tuple(args.low_window), tuple(args.high_window))
        per_E.append(rep.E_hat)
        per_k.append(rep.kappa_hat)
        if rep.note:
            notes.append(rep.note)
    kappas = [k for k in per_k if k is not None]
    out = {
        "E_hat_Pa": sum(per_E) / len(per_E),
        "per_site_E_Pa": per_E,
        "kappa_hat_per_m": sum(kappas) / len(kappas) if kappas else None,
        "per_site_kappa_per_m": per_k,
        "sites_without_kappa": len(per_k) - len(kappas),
        "note": sorted(set(notes)),
    }
    _write_json(args.out, out)
    _manifest(args, argv, {"nu": args.nu, "low_window": args.low_window, "high_window": args.high_window},
              inputs=[args.probes], outputs=[args.out])
    kappa = out["kappa_hat_per_m"]
    print(f"E = {out['E_hat_Pa']:.6g} Pa, kappa = {'n/a' if kappa is None else f'{kappa:.6g} 1/m'}")


def _cmd_reinit(args, argv):
    grid = load_grid(args.grid)
    config = _reinit_config(args)
    result = reinitialize(grid, config)
    save_grid(args.out, result.field, inline=not args.binary)
    _manifest(args, argv, vars(config).copy(), inputs=[args.grid], outputs=[args.out])
    print(f"reinit: {result.iterations} iterations, residual {result.final_residual:.3e}")
    if not result.converged:
        raise NumericalFailure("reinitialization did not reach the residual target")


def _cmd_convergence(args, argv):
    shape = _shape(args)
    material = MaterialParams(args.E, args.nu, args.rho)
    center = args.grid_center
    if center is None:
        center = args.point if args.shape == "plane" else args.center
    geometry = GridGeometry.cube(center, args.side, args.nodes)
    template = CampaignConfig(1, tuple(args.forces), args.punch_radius, 0.0, args.seed)
    rows = convergence_study(shape, material, template, args.N, geometry, args.seed,
                             PipelineConfig(nu=args.nu))
    write_convergence_csv(rows, args.out)
    _manifest(args, argv, {"shape": shape.to_dict(), "material": {"E": args.E, "nu": args.nu},
                           "campaign": template.to_dict(), "N": args.N,
                           "grid": {"center": list(center), "side": args.side, "nodes": args.nodes}},
              outputs=[args.out], seed=args.seed)
    for r in rows:
        print(f"N={r.N:5d}  d_N={r.d_N:.4g} m  eikonal max={r.eikonal_max:.3g}")


def _cmd_export_mesh(args, argv):
    grid = load_grid(args.grid)
    export_mesh(grid, args.out)
    _manifest(args, argv, {}, inputs=[args.grid], outputs=[args.out])
    print(f"wrote {args.out}")


def _cmd_check_steady_state(args, argv):
    material = MaterialParams(args.E, args.nu, rho=args.rho)
    T_e, ok = settling_time_check(material, args.ell, args.Tc)
    verdict = "ok" if ok else "too fast"
    _write_json(args.out, {"T_e_s": T_e, "T_c_s": args.Tc, "verdict": verdict})
    _manifest(args, argv, {"E": args.E, "rho": args.rho, "ell": args.ell, "Tc": args.Tc},
              outputs=[args.out])
    print(f"T_e = {T_e * 1e3:.4g} ms, T_c = {args.Tc * 1e3:.4g} ms, verdict: {verdict}")


_COMMANDS = {
    "simulate": _cmd_simulate,
    "reconstruct": _cmd_reconstruct,
    "estimate-modulus": _cmd_estimate_modulus,
    "estimate-kappa": _cmd_estimate_kappa,
    "reinit": _cmd_reinit,
    "convergence": _cmd_convergence,
    "export-mesh": _cmd_export_mesh,
    "check-steady-state": _cmd_check_steady_state,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"palpsdf: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SystemExit as exc:  # --help, --version
        return int(exc.code or 0)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)
    try:
        _COMMANDS[args.command](args, argv)
    except (SolverError, NumericalFailure, FloatingPointError, ArithmeticError) as exc:
        print(f"palpsdf: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (UsageError, ValueError, OSError, KeyError) as exc:
        print(f"palpsdf: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


cli_main = main


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
