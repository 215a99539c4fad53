"""Command-line interface: ``tfelab <subcommand> --config run.toml``.

Exit codes: 0 success, 2 configuration error, 3 solver abort, 4 verify
failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import diagnostics as diag
from .entropy import clamp_undershoot
from .experiments import (
    compare_pde_qs,
    default_window,
    epsilon_sweep,
    initial_droplets,
    power_law_fit,
)
from .grid import Field
from .io import (
    ConfigError,
    RunConfig,
    fmt,
    parse_config,
    read_csv_columns,
    read_snapshot,
    write_config,
    write_json,
    write_qs_trajectory,
    write_snapshot,
    write_timeseries,
)
from .quasistatic import DropletSet, qs_solve
from .solver import initial_condition, solve

EXIT_OK, EXIT_CONFIG, EXIT_ABORT, EXIT_VERIFY = 0, 2, 3, 4

# verify tolerances
MASS_RTOL = 1e-9
RECORD_RTOL = 1e-9
ENERGY_SLACK = 1e-8

logger = logging.getLogger("tfelab")


def _prepare(cfg: RunConfig) -> Path:
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    write_config(cfg, out / "config.toml")
    return out


def cmd_simulate(cfg: RunConfig, args) -> int:
    out = _prepare(cfg)
    u0 = initial_condition(cfg.initial, cfg.grid)
    traj = solve(u0, cfg.solver)
    write_timeseries(traj.records, out / "timeseries.csv")
    if cfg.outputs.emit_snapshots:
        snap_dir = out / "snapshots"
        snap_dir.mkdir(exist_ok=True)
        for old in snap_dir.glob("snapshot_*.csv"):
            old.unlink()
        for k, s in enumerate(traj.snapshots):
            write_snapshot(s.u, s.t, cfg.params, snap_dir / f"snapshot_{k:05d}.csv",
                           _snapshot_tol(s.u.values, cfg))
    print(f"steps={traj.step_count} newton_iters={traj.newton_iter_total} "
          f"records={len(traj)} t_final={fmt(traj.times[-1])}")
    if traj.aborted:
        print(f"solver aborted: {traj.message}", file=sys.stderr)
        return EXIT_ABORT
    return EXIT_OK


def _snapshot_tol(u, cfg: RunConfig) -> float:
    """Undershoot tolerance relative to the current maximum."""
    top = float(np.max(u))
    scale = float(np.max(initial_condition(cfg.initial, cfg.grid).values))
    return cfg.solver.undershoot_tol * scale / top if top > 0 else np.inf


def _droplets(cfg: RunConfig) -> DropletSet:
    q = cfg.quasistatic
    if q.a is None:
        return initial_droplets(cfg.initial, cfg.grid)
    if q.b is None or len(q.a) != len(q.b):
        raise ConfigError("[quasistatic] a and b must have the same length")
    gammas = q.gammas if q.gammas is not None else tuple(np.full(len(q.a), 1.0 / len(q.a)))
    mass = q.total_mass if q.total_mass is not None else 1.0
    return DropletSet(q.a, q.b, gammas, mass, (cfg.grid.x_left, cfg.grid.x_right))


def cmd_quasistatic(cfg: RunConfig, args) -> int:
    out = _prepare(cfg)
    traj = qs_solve(_droplets(cfg), cfg.quasistatic.qs_config())
    write_qs_trajectory(traj, out / "qs_trajectory.csv")
    print(f"states={len(traj)} events={len(traj.events)} "
          f"total_support={fmt(traj.states[-1].total_support)}")
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, args) -> int:
    out = _prepare(cfg)
    sw = cfg.sweep
    report = epsilon_sweep(cfg.solver, cfg.grid, cfg.initial, sw.epsilons, sw.window, sw.fraction,
                           sw.max_workers)
    write_json(report.as_dict(), out / "sweep.json")
    for e in report.entries:
        print(f"epsilon={fmt(e.epsilon)} exponent={fmt(e.exponent)} "
              f"min_margin={fmt(e.min_margin)} aborted={e.aborted}")
    return EXIT_ABORT if any(e.aborted for e in report.entries) else EXIT_OK


def cmd_compare(cfg: RunConfig, args) -> int:
    out = _prepare(cfg)
    rep = compare_pde_qs(cfg.solver, cfg.grid, cfg.initial, cfg.quasistatic.qs_config())
    with (out / "compare.csv").open("w", newline="") as fh:
        fh.write("t,profile_distance,peak,support_pde,support_qs,support_diff\n")
        for row in zip(rep.times, rep.profile_distance, rep.peak, rep.support_pde,
                       rep.support_qs, rep.support_diff):
            fh.write(",".join(fmt(v) for v in row) + "\n")
    k = rep.after_transient()
    print(f"max_profile_distance={fmt(np.nanmax(rep.profile_distance[k]))} "
          f"final_support_diff={fmt(rep.support_diff[-1])}")
    return EXIT_ABORT if rep.aborted else EXIT_OK


def cmd_fit(cfg: RunConfig | None, args) -> int:
    cols = read_csv_columns(args.input)
    if "t" not in cols:
        raise ConfigError(f"{args.input}: no 't' column")
    for name in (args.column, "support_measure", "total_support", "size"):
        if name and name in cols:
            sizes = cols[name]
            break
    else:
        others = [c for c in cols if c != "t"]
        if not others:
            raise ConfigError(f"{args.input}: no size column")
        sizes = cols[others[0]]
    t = cols["t"]
    lo, hi = default_window(t)
    window = (args.t_lo if args.t_lo is not None else lo, args.t_hi if args.t_hi is not None else hi)
    fit = power_law_fit(t, sizes, window)
    print(f"exponent={fmt(fit.exponent)} prefactor={fmt(fit.prefactor)} rms={fmt(fit.rms)} "
          f"samples={fit.n_samples} window=[{fmt(fit.window[0])}, {fmt(fit.window[1])}]")
    return EXIT_OK


def verify_run(cfg: RunConfig) -> list:
    """Recompute diagnostics from the stored snapshots and check them against
    the stored time series and the conservation / dissipation invariants.

    Returns a list of violation messages (empty when everything holds).
    """
    out = cfg.output_dir
    problems = []
    series = out / "timeseries.csv"
    snaps = sorted((out / "snapshots").glob("snapshot_*.csv"))
    if not series.exists() or not snaps:
        return [f"{out}: missing timeseries.csv or snapshots"]
    stored = read_csv_columns(series)
    if len(snaps) != stored["t"].size:
        problems.append(f"{len(snaps)} snapshots but {stored['t'].size} time-series rows")
    p = cfg.params
    scale = None
    prev_energy = None
    mass0 = energy0 = None
    for k, path in enumerate(snaps):
        t, eps, n, x, u, _ = read_snapshot(path)
        if (eps, n) != (p.epsilon, p.n) or x.size != cfg.grid.n_cells:
            problems.append(f"{path.name}: header does not match the configuration")
            continue
        scale = scale or float(np.max(u))
        field = Field(cfg.grid, u)
        tol = cfg.solver.undershoot_tol * scale / max(float(np.max(u)), 1e-300)
        try:
            clamp_undershoot(u, tol)
        except ValueError as err:
            problems.append(f"{path.name}: {err}")
            continue
        m, e = diag.mass(field), diag.energy(field)
        mass0 = m if mass0 is None else mass0
        energy0 = e if energy0 is None else energy0
        if abs(m - mass0) > MASS_RTOL * abs(mass0):
            problems.append(f"{path.name}: mass {m!r} drifted from {mass0!r}")
        if prev_energy is not None and e > prev_energy + ENERGY_SLACK * energy0:
            problems.append(f"{path.name}: energy increased from {prev_energy!r} to {e!r}")
        prev_energy = e
        if k < stored["t"].size:
            for name, val in (("t", t), ("mass", m), ("energy", e)):
                ref = stored[name][k]
                if abs(val - ref) > RECORD_RTOL * max(abs(ref), 1e-300):
                    problems.append(f"{path.name}: {name}={val!r} but time series has {float(ref)!r}")
        _, _, ok = diag.weak_R_l1(field, p, tol)
        if not ok:
            problems.append(f"{path.name}: entropy-flux bound violated")
        rec = diag.compute_record(field, p, t, tol=tol)
        if not all(np.isfinite(v) for v in rec.row()):
            problems.append(f"{path.name}: non-finite diagnostics")
    return problems


def cmd_verify(cfg: RunConfig, args) -> int:
    problems = verify_run(cfg)
    for msg in problems:
        print(f"FAIL {msg}")
    if problems:
        return EXIT_VERIFY
    print("verify: all invariants hold")
    return EXIT_OK


COMMANDS = {
    "simulate": (cmd_simulate, "PDE solve; writes time series and snapshots"),
    "quasistatic": (cmd_quasistatic, "quasi-static droplet trajectory"),
    "sweep": (cmd_sweep, "epsilon sweep with power-law fits"),
    "fit": (cmd_fit, "power-law fit of a size column in a CSV file"),
    "compare": (cmd_compare, "PDE versus quasi-static comparison"),
    "verify": (cmd_verify, "recheck stored snapshots against the invariants"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tfelab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", type=Path, required=name != "fit", help="TOML run configuration")
        sp.add_argument("--output", type=Path, help="override [outputs] directory")
        if name == "fit":
            sp.add_argument("--input", type=Path, required=True)
            sp.add_argument("--t-lo", type=float, default=None)
            sp.add_argument("--t-hi", type=float, default=None)
            sp.add_argument("--column", default=None, help="size column (default: auto)")
    return parser


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    func = COMMANDS[args.command][0]
    try:
        cfg = parse_config(args.config) if args.config is not None else None
        if cfg is not None and args.output is not None:
            cfg = replace(cfg, outputs=replace(cfg.outputs, directory=str(args.output)))
        return func(cfg, args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG


def main() -> None:
    sys.exit(run_cli())
