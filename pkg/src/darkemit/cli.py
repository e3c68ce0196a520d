"""Command-line front end: spectrum | protocol | correlate | darkstate.

Every subcommand loads a TOML/JSON config (defaults reproduce the
protocol's operating point), writes plot-ready CSV/JSON files into the
output directory and records a manifest with the config hash and file
checksums.  Exit codes: 0 ok, 2 usage/config error, 3 convergence
failure, 4 tolerance violation.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._kernels import backend_name
from .config import ConfigError, ProtocolConfig, config_hash, load_config
from .hilbert import make_space
from .models import ModelParams, protocol_schedule, stark_protocol_schedule
from .darkstates import dark_state, quasi_exact_solve
from .spectrum import (ConvergenceError, check_cutoff_convergence, min_gap_to_dark,
                       schedule_sweep_spectrum, sweep_spectrum)
from .dynamics import run_protocol, stark_fast_transfer
from .correlations import (channel_separated_g2, compute_correlation_data,
                           hbt_g2, hom_correlation, indistinguishability)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONVERGENCE = 3
EXIT_TOLERANCE = 4

RESIDUAL_TOL = 1e-10


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def write_manifest(out: Path, cfg: ProtocolConfig, files: list[Path]) -> None:
    inventory = {}
    for f in files:
        inventory[f.name] = hashlib.sha256(f.read_bytes()).hexdigest()
    doc = {
        "tool": "darkemit",
        "version": __version__,
        "backend": backend_name(),
        "config_hash": config_hash(cfg),
        "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "files": inventory,
    }
    write_json(out / "manifest.json", doc)


# ---------------------------------------------------------------------------
# subcommands


def cmd_spectrum(cfg: ProtocolConfig, args, out: Path) -> int:
    space = make_space(args.fock or cfg.spectrum_fock_cutoff)
    if args.sweep == "schedule":
        schedule = (stark_protocol_schedule(cfg) if args.stark
                    else protocol_schedule(cfg))
        times = np.linspace(0.0, cfg.stark_t_ramp1 if args.stark else cfg.t_ramp1,
                            args.points)
        sweep = schedule_sweep_spectrum(space, schedule, times)
        params_probe = [
            _model_params(cfg, args.model, g, u=cfg.stark_u if args.stark else cfg.u1)
            for g in (0.0, args.gmax / 2, args.gmax)
        ]
    else:
        grid = np.linspace(0.0, args.gmax, args.points)
        template = _model_params(cfg, args.model, 0.0,
                                 u=cfg.stark_u if args.model == "rabi_stark" else 0.0)
        sweep = sweep_spectrum(space, template, "g", grid)
        params_probe = [_model_params(cfg, args.model, g,
                                      u=cfg.stark_u if args.model == "rabi_stark" else 0.0)
                        for g in (0.0, args.gmax / 2, args.gmax)]

    if args.check_convergence:
        try:
            shift = check_cutoff_convergence(space, params_probe)
        except ConvergenceError as exc:
            print(f"convergence failure: {exc}", file=sys.stderr)
            return EXIT_CONVERGENCE
    else:
        shift = None

    rows = []
    for parity in ("even", "odd"):
        for j, v in enumerate(sweep.grid):
            rows.append([v, parity, *sweep.energies[parity][:, j]])
    n_lev = max(sweep.energies["even"].shape[0], sweep.energies["odd"].shape[0])
    header = [f"{sweep.sweep_name} [omega units]", "parity"] + \
        [f"E{k} [omega]" for k in range(n_lev)]
    write_csv(out / "spectrum.csv", header, rows)

    gap_doc = {"dark_levels": sweep.dark_levels,
               "cutoff_shift": shift,
               "fock_cutoff": space.fock_cutoff}
    if sweep.dark_levels:
        gap = min_gap_to_dark(sweep)
        gap_doc.update({"min_gap": gap.min_gap, "location": gap.location,
                        "level_pair": list(gap.level_pair)})
    write_json(out / "gap.json", gap_doc)
    write_manifest(out, cfg, [out / "spectrum.csv", out / "gap.json"])
    print(f"spectrum: {len(sweep.grid)} points, dark levels {sweep.dark_levels}")
    return EXIT_OK


def _model_params(cfg, kind, g, u=0.0) -> ModelParams:
    return ModelParams(delta1=cfg.delta1_start, delta2=cfg.delta2_start,
                       g1=g, g2=g,
                       u1=u if kind == "rabi_stark" else 0.0,
                       u2=u if kind == "rabi_stark" else 0.0,
                       kind=kind, omega=cfg.omega)


def cmd_protocol(cfg: ProtocolConfig, args, out: Path) -> int:
    space = make_space(args.fock or cfg.fock_cutoff)
    files = []
    if args.stark:
        times, fids, final = stark_fast_transfer(space, cfg, backend=args.backend)
        write_csv(out / "stark_transfer.csv",
                  ["t [1/omega]", "fidelity_dark"],
                  zip(times, fids))
        write_json(out / "stark_summary.json",
                   {"final_fidelity": final, "t_transfer": cfg.stark_t_ramp1,
                    "u": cfg.stark_u})
        files += [out / "stark_transfer.csv", out / "stark_summary.json"]
        print(f"stark transfer fidelity at t={cfg.stark_t_ramp1}: {final:.5f}")
    else:
        res = run_protocol(space, cfg, periods=args.periods,
                           backend=args.backend)
        tr = res.trajectory
        cols = ["t [1/omega]", "n_photon", "flux [omega]", "trace",
                "p_ground", "p_excited", "p_singlet1", "p_singlet0"]
        rows = zip(tr.times, tr["n"], tr["flux"], tr["trace"], tr["p_ground"],
                   tr["p_excited"], tr["p_singlet1"], tr["p_singlet0"])
        write_csv(out / "trajectory.csv", cols, rows)
        write_csv(out / "flux.csv", ["t [1/omega]", "flux [omega]"],
                  zip(tr.times, tr["flux"]))
        write_json(out / "efficiency.json", {
            "windows": {k: list(v) for k, v in res.windows.items()},
            "per_period": res.efficiencies,
            "reset_fidelities": res.reset_fidelities,
        })
        fits_doc = {}
        if res.fits:
            for name, fit in res.fits.items():
                fits_doc[name] = {"model": fit.model, "params": fit.params,
                                  "rms_residual": fit.rms_residual,
                                  "relative_rms": fit.relative_rms}
        write_json(out / "fits.json", fits_doc)
        files += [out / "trajectory.csv", out / "flux.csv",
                  out / "efficiency.json", out / "fits.json"]
        eff = res.efficiencies[0]
        print(f"protocol: eta_first={eff['first']:.4f} "
              f"eta_second={eff['second']:.4f} "
              f"reset={res.reset_fidelities[0]:.4f}")
    write_manifest(out, cfg, files)
    return EXIT_OK


def cmd_correlate(cfg: ProtocolConfig, args, out: Path) -> int:
    space = make_space(args.fock or cfg.fock_cutoff)
    data = compute_correlation_data(space, cfg, backend=args.backend)
    files = []
    channels = {"both": ("both",), "first": ("first",), "second": ("second",)}
    if args.experiment == "hbt":
        for ch in channels[args.channel]:
            grid, rep = (hbt_g2(data, "both") if ch == "both"
                         else channel_separated_g2(data, ch))
            stem = f"hbt_{ch}"
            write_csv(out / f"{stem}_marginal.csv",
                      ["tau [1/omega]", "G2", "G2_normalized"],
                      zip(grid.tau_grid, grid.marginal,
                          grid.normalized_marginal()))
            _write_grid(out / f"{stem}_grid.csv", grid)
            write_json(out / f"{stem}_merit.json", {
                "g2_zero": rep.g2_zero, "peak_positions": rep.peak_positions,
            })
            files += [out / f"{stem}_marginal.csv", out / f"{stem}_grid.csv",
                      out / f"{stem}_merit.json"]
            print(f"hbt[{ch}]: G2(0) = {rep.g2_zero:.4f}, "
                  f"peaks at {[round(p, 1) for p in rep.peak_positions]}")
    elif args.experiment == "hom":
        ch = args.channel if args.channel != "both" else "first"
        grid = hom_correlation(data, ch)
        write_csv(out / f"hom_{ch}_marginal.csv",
                  ["tau [1/omega]", "G2_HOM", "G2_HOM_normalized"],
                  zip(grid.tau_grid, grid.marginal, grid.normalized_marginal()))
        m = grid.normalized_marginal()
        near_zero = float(m[grid.tau_grid <= 10.0].max())
        write_json(out / f"hom_{ch}_merit.json",
                   {"channel": ch, "dip_at_zero": float(m[0]),
                    "max_near_zero": near_zero})
        files += [out / f"hom_{ch}_marginal.csv", out / f"hom_{ch}_merit.json"]
        print(f"hom[{ch}]: dip at tau=0: {m[0]:.4f}")
    elif args.experiment == "indist":
        ch = args.channel if args.channel != "both" else "first"
        value = indistinguishability(data, ch)
        write_json(out / f"indist_{ch}.json", {"channel": ch,
                                               "indistinguishability": value})
        files.append(out / f"indist_{ch}.json")
        print(f"indistinguishability[{ch}] = {value:.5f}")
    write_manifest(out, cfg, files)
    return EXIT_OK


def _write_grid(path: Path, grid) -> None:
    rows = []
    for i, t in enumerate(grid.t_grid):
        for j, tau in enumerate(grid.tau_grid):
            v = grid.values[i, j]
            if v != 0.0:
                rows.append([t, tau, v])
    write_csv(path, ["t [1/omega]", "tau [1/omega]", "value"], rows)


def cmd_darkstate(cfg: ProtocolConfig, args, out: Path) -> int:
    space = make_space(args.fock or cfg.fock_cutoff)
    rng = np.random.default_rng(cfg.seed)
    report = {}
    worst = 0.0
    if args.ansatz_scan:
        hits, misses = [], []
        for _ in range(args.points):
            d1 = rng.uniform(0.0, 1.0)
            g = rng.uniform(0.0, 0.8)
            on_manifold = rng.random() < 0.5
            d2 = (1.0 - d1) if on_manifold else rng.uniform(0.0, 1.0 - 1e-3)
            u = rng.uniform(0.0, 0.5)
            params = ModelParams(delta1=d1, delta2=d2, g1=g, g2=g,
                                 u1=u, u2=u, kind="rabi_stark")
            sol = quasi_exact_solve(params, 1.0)
            (hits if sol is not None else misses).append(params.on_dark_manifold)
        report["ansatz_scan"] = {
            "solutions_found": len(hits),
            "solutions_on_manifold": int(sum(hits)),
            "no_solution_off_manifold": int(sum(not m for m in misses)),
            "points": args.points,
        }
        ok = all(hits) and all(not m for m in misses)
    else:
        tol_used = args.tol or RESIDUAL_TOL
        from .models import hamiltonian

        for _ in range(args.points):
            d1 = rng.uniform(0.0, 1.0)
            g = rng.uniform(0.0, 1.0)
            u = rng.uniform(0.0, 0.5)
            kind = rng.choice(["rabi", "rabi_stark", "jc"])
            params = ModelParams(delta1=d1, delta2=1.0 - d1, g1=g, g2=g,
                                 u1=u if kind == "rabi_stark" else 0.0,
                                 u2=u if kind == "rabi_stark" else 0.0,
                                 kind=str(kind))
            ds = dark_state(space, params)
            h = hamiltonian(space, params).matrix
            resid = np.linalg.norm(h @ ds.state.data - ds.energy * ds.state.data)
            worst = max(worst, resid)
        report["manifold_check"] = {"points": args.points,
                                    "max_residual": worst,
                                    "tolerance": tol_used}
        ok = worst < tol_used
    report["ok"] = bool(ok)
    write_json(out / "darkstate_report.json", report)
    write_manifest(out, cfg, [out / "darkstate_report.json"])
    print(json.dumps(report["ansatz_scan" if args.ansatz_scan else "manifold_check"]))
    return EXIT_OK if ok else EXIT_TOLERANCE


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="darkemit",
        description="Dark-state single-photon source simulations "
                    "(units: omega = 1, times in 1/omega)")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=str, default=None,
                       help="TOML or JSON config file")
        p.add_argument("--out", type=str, default=None,
                       help="output directory (default: config out_dir)")
        p.add_argument("--fock", type=int, default=None,
                       help="override the Fock cutoff")
        p.add_argument("--tol", type=float, default=None,
                       help="override the check tolerance")
        p.add_argument("--backend", choices=("compiled", "python"),
                       default=None, help="integration backend")

    p = sub.add_parser("spectrum", help="parity-resolved eigenvalue sweeps")
    common(p)
    p.add_argument("--model", choices=("rabi", "jc", "rabi_stark"),
                   default="rabi")
    p.add_argument("--sweep", choices=("g", "schedule"), default="g")
    p.add_argument("--points", type=int, default=200)
    p.add_argument("--gmax", type=float, default=1.0)
    p.add_argument("--stark", action="store_true",
                   help="use the Stark protocol schedule for --sweep schedule")
    p.add_argument("--check-convergence", action="store_true", default=True)
    p.add_argument("--no-check-convergence", dest="check_convergence",
                   action="store_false")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("protocol", help="run the emission protocol")
    common(p)
    p.add_argument("--periods", type=int, default=1)
    p.add_argument("--stark", action="store_true",
                   help="Stark-assisted fast transfer instead of the full run")
    p.set_defaults(func=cmd_protocol)

    p = sub.add_parser("correlate", help="HBT / HOM / indistinguishability")
    common(p)
    p.add_argument("--experiment", choices=("hbt", "hom", "indist"),
                   required=True)
    p.add_argument("--channel", choices=("both", "first", "second"),
                   default="both")
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("darkstate", help="dark-state residuals and ansatz scans")
    common(p)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--check-manifold", action="store_true", default=True)
    group.add_argument("--ansatz-scan", dest="ansatz_scan", action="store_true")
    p.add_argument("--points", type=int, default=100)
    p.set_defaults(func=cmd_darkstate, ansatz_scan=False)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        overrides = {}
        if args.fock is not None and args.command in ("protocol", "correlate",
                                                      "darkstate"):
            overrides["fock_cutoff"] = args.fock
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(args.out or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        return args.func(cfg, args, out)
    except ConvergenceError as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
