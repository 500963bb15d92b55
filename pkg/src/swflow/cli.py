"""Command line entry point: run, check-grad, scan, gauge-verify.

Exit codes: 0 success, 1 IO or configuration error, 2 blow-up detected,
3 step rejected, 4 verification failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, parse_config
from .diagnostics import (
    concentration_scan,
    default_centers,
    spinor_bound_monitor,
    write_diagnostics_csv,
)
from .diffgeo import curvature
from .flow import (
    FlowConfig,
    deturck_to_flow,
    initial_state,
    run_flow,
    stability_limit,
    trajectory_residuals,
)
from .functional import fd_gradient_check, gradients
from .grid import l2_norm
from .io import read_manifest, read_state, write_manifest, write_state

log = logging.getLogger("swflow")

EXIT_OK = 0
EXIT_IO = 1
EXIT_BLOWUP = 2
EXIT_REJECTED = 3
EXIT_FAILED = 4

GRAD_TOL = 1e-6
GAUGE_TOL = 1e-4
CSV_VERSION = 1

_TERMINATION_CODES = {"completed": EXIT_OK, "blowup_detected": EXIT_BLOWUP,
                      "step_rejected": EXIT_REJECTED}


def _parse_radii(text: str) -> list[float]:
    try:
        radii = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"--radii: {exc}") from exc
    if not radii or any(r <= 0 for r in radii):
        raise ConfigError("--radii: need positive values")
    if any(b >= a for a, b in zip(radii, radii[1:])):
        raise ConfigError("--radii: values must be strictly descending")
    return radii


# -- run ------------------------------------------------------------------------------


def cmd_run(config_path, out_dir, plots: bool = True) -> int:
    cfg = parse_config(config_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    snap_dir = out / "snapshots"

    traj = run_flow(cfg)
    index = []
    for i, state in enumerate(traj.states):
        entry = write_state(state, snap_dir, f"step{traj.steps[i]:08d}", cfg.k, cfg.S0)
        entry["step"] = traj.steps[i]
        entry["files"] = {k: f"snapshots/{v}" for k, v in entry["files"].items()}
        index.append(entry)
    csv_path = out / "diagnostics.csv"
    cols = write_diagnostics_csv(traj, csv_path)
    monitor = spinor_bound_monitor(traj, cfg.S0)
    monitor.write_csv(out / "spinor_monitor.csv")
    figures = []
    if plots:
        from .plotting import plot_diagnostics

        figures = [p.name for p in plot_diagnostics(traj, out)]

    manifest = {
        "version": __version__,
        "config": cfg.to_dict(),
        "termination": traj.termination,
        "message": traj.message,
        "snapshots": index,
        "diagnostics_csv": csv_path.name,
        "csv_columns": cols,
        "csv_version": CSV_VERSION,
        "spinor_monitor_csv": "spinor_monitor.csv",
        "figures": figures,
        "wall_seconds": traj.wall_seconds,
    }
    write_manifest(out / "manifest.json", manifest)
    last = traj.records[-1]
    print(f"{traj.termination}: t = {last.t:.6g}, E_k = {last.energy.total:.6g}, "
          f"sup|F| = {last.sup_F:.4g}, {len(index)} snapshots in {out}")
    if traj.message:
        print(traj.message)
    if not monitor.ok:
        print(f"spinor bound exceeded at {len(monitor.flagged_times)} recorded times")
    return _TERMINATION_CODES[traj.termination]


# -- check-grad ---------------------------------------------------------------------------


def _sabotaged(A, phi, k, S0):
    g = gradients(A, phi, k, S0)
    return replace(g, g_phi=-g.g_phi, g_A=-g.g_A)


def cmd_check_grad(config_path, sabotage_sign: bool = False) -> int:
    cfg = parse_config(config_path)
    state = initial_state(cfg)
    worst = 0.0
    for k in (0, 1, 2):
        e_phi, e_a = fd_gradient_check(state.a, state.phi, k, cfg.S0, cfg.fd_h,
                                       cfg.fd_num_directions, cfg.init.seed,
                                       grad_fn=_sabotaged if sabotage_sign else None)
        worst = max(worst, e_phi, e_a)
        print(f"k={k}: rel_err_phi={e_phi:.3e} rel_err_A={e_a:.3e}")
    ok = worst < GRAD_TOL
    print(f"worst relative error {worst:.3e} ({'pass' if ok else 'FAIL'}, tolerance {GRAD_TOL:g})")
    return EXIT_OK if ok else EXIT_FAILED


# -- scan ------------------------------------------------------------------------------------


def cmd_scan(manifest_path, p: float | None = None, epsilon: float = 0.1,
             radii: list[float] | None = None, out: str | None = None,
             plots: bool = True) -> int:
    manifest_path = Path(manifest_path)
    manifest = read_manifest(manifest_path)
    base = manifest_path if manifest_path.is_dir() else manifest_path.parent
    entries = manifest.get("snapshots") or []
    if not entries:
        raise ConfigError("manifest lists no snapshots")
    k = manifest["config"]["k"]
    p = float(k + 2) if p is None else p
    states = []
    for entry in entries:
        try:
            states.append(read_state(base, entry))
        except OSError as exc:
            raise ConfigError(f"missing snapshot: {exc}") from exc
    F = [curvature(s.a) for s in states]
    grid = F[0].grid
    if radii is None:
        L = min(grid.lengths)
        radii = [L / 4, L / 8, L / 16]
    report = concentration_scan(F, p, radii, default_centers(grid, F), epsilon,
                                [s.t for s in states])
    out_path = Path(out) if out else base / "concentration.csv"
    out_path.parent.mkdir(parents=True, exist_ok=True)
    report.write_csv(out_path)
    if plots:
        from .plotting import plot_concentration

        plot_concentration(report, out_path.with_suffix(".png"))
    if report.flagged:
        for c in report.flagged_centers:
            print("flagged center: (" + ", ".join(f"{x:.6g}" for x in c) + ")")
    else:
        print("no centers flagged")
    print(f"p = {p:g}, epsilon = {epsilon:g}, report: {out_path}")
    return EXIT_OK


# -- gauge-verify ------------------------------------------------------------------------------


def _direct_config(cfg: FlowConfig) -> FlowConfig:
    limit = stability_limit(cfg.grid, cfg.k, cfg.dealias)
    dt = min(cfg.dt, 0.5 * limit)
    steps = max(1, math.ceil(cfg.t_end / dt - 1e-9)) if cfg.t_end > 0 else 1
    dt = cfg.t_end / steps if cfg.t_end > 0 else dt
    return replace(cfg, integrator="rk4_direct", dt=dt, record_every=steps + 1,
                   snapshot_every=max(1, steps // 500))


def _deturck_config(cfg: FlowConfig) -> FlowConfig:
    steps = max(1, math.ceil(cfg.t_end / cfg.dt - 1e-9)) if cfg.t_end > 0 else 1
    return replace(cfg, integrator="imex_deturck", record_every=steps + 1,
                   snapshot_every=max(1, steps // 500))


def _max_residual(traj) -> float:
    r = trajectory_residuals(traj)
    return float(r.max()) if r.size else 0.0


def cmd_gauge_verify(config_path) -> int:
    cfg = parse_config(config_path)
    gauge = run_flow(_deturck_config(cfg))
    direct = run_flow(_direct_config(cfg))
    for name, tr in (("gauge-fixed", gauge), ("direct", direct)):
        if tr.termination != "completed":
            print(f"{name} run ended with {tr.termination}: {tr.message}")
            return _TERMINATION_CODES[tr.termination]
    mapped = deturck_to_flow(gauge)
    a, b = mapped.final, direct.final
    num = l2_norm(a.phi - b.phi) + l2_norm(a.a - b.a)
    den = l2_norm(b.phi) + l2_norm(b.a)
    disc = num / den if den > 0 else num
    theta_max = float(np.abs(gauge.final.theta.values).max())
    print(f"terminal discrepancy (relative): {disc:.3e}")
    print(f"residual, reconstructed gauge-fixed run: {_max_residual(mapped):.3e}")
    print(f"residual, direct run: {_max_residual(direct):.3e}")
    print(f"max |theta| at t_end: {theta_max:.3e}")
    ok = disc < GAUGE_TOL
    print("pass" if ok else f"FAIL (tolerance {GAUGE_TOL:g})")
    return EXIT_OK if ok else EXIT_FAILED


# -- entry point ------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="swflow", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="integrate a configured flow and write reports")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--no-plots", action="store_true")

    p_grad = sub.add_parser("check-grad", help="finite-difference check of the gradients")
    p_grad.add_argument("--config", required=True)
    p_grad.add_argument("--sabotage-sign", action="store_true", help=argparse.SUPPRESS)

    p_scan = sub.add_parser("scan", help="curvature concentration scan of a finished run")
    p_scan.add_argument("manifest")
    p_scan.add_argument("--p", type=float, default=None)
    p_scan.add_argument("--epsilon", type=float, default=0.1)
    p_scan.add_argument("--radii", type=str, default=None)
    p_scan.add_argument("--out", default=None)
    p_scan.add_argument("--no-plots", action="store_true")

    p_gv = sub.add_parser("gauge-verify", help="compare gauge-fixed and direct integration")
    p_gv.add_argument("--config", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    started = time.perf_counter()
    try:
        if args.command == "run":
            code = cmd_run(args.config, args.out, plots=not args.no_plots)
        elif args.command == "check-grad":
            code = cmd_check_grad(args.config, args.sabotage_sign)
        elif args.command == "scan":
            radii = _parse_radii(args.radii) if args.radii else None
            if args.p is not None and args.p < 1:
                raise ConfigError("--p must be >= 1")
            code = cmd_scan(args.manifest, args.p, args.epsilon, radii, args.out,
                            plots=not args.no_plots)
        else:
            code = cmd_gauge_verify(args.config)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    log.info("%s finished in %.2f s", args.command, time.perf_counter() - started)
    return code


if __name__ == "__main__":
    sys.exit(main())
