"""Batch runner: load a scenario config, simulate, estimate, score, write
artifacts.

Exit codes: 0 ok, 2 config error, 3 simulation error, 4 I/O error. Log
verbosity via the PMUOBS_LOG environment variable (debug/info/warning).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from pmuobs import __version__
from pmuobs.config import ConfigError, load_config, validate_config
from pmuobs.metrics import ReportRow, render_report, smape
from pmuobs.network import NetworkSolveError
from pmuobs.observers.pipeline import ESTIMATE_COLUMNS, estimate_trajectory
from pmuobs.simulator import NoiseConfig, SimulationError, Trajectory, run_scenario

log = logging.getLogger("pmuobs")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SIMULATION = 3
EXIT_IO = 4

_CASES = {1: "none", 2: "gaussian", 3: "laplacian"}

TRAJECTORY_COLUMNS = ("t", "machine_id", "x1", "x2", "x3", "Vf", "q", "Ef",
                      "p1", "p2", "p3", "Vt", "theta_t", "omega_t")
PMU_COLUMNS = ("t", "machine_id", "y1", "y2", "y3", "y4", "y5")


def _fmt(value: float) -> str:
    # repr of a Python float is the shortest string that round-trips
    return repr(float(value))


def write_trajectory_csv(path: Path, traj: Trajectory) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRAJECTORY_COLUMNS)
        for k in range(traj.t.shape[0]):
            t = _fmt(traj.t[k])
            for i, name in enumerate(traj.machine_names):
                row = [t, name]
                row.extend(_fmt(v) for v in traj.states[k, i])
                row.extend(_fmt(v) for v in traj.terminals[k, i])
                writer.writerow(row)


def write_pmu_csv(path: Path, traj: Trajectory) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PMU_COLUMNS)
        for k in range(traj.pmu_t.shape[0]):
            t = _fmt(traj.pmu_t[k])
            for i, name in enumerate(traj.machine_names):
                writer.writerow([t, name] + [_fmt(v) for v in traj.pmu[k, i]])


def write_estimates_csv(path: Path, table) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ESTIMATE_COLUMNS)
        for k in range(table.t.shape[0]):
            t = _fmt(table.t[k])
            for j, name in enumerate(table.machine_names):
                data = table.data[k, j]
                row = [t, name,
                       _fmt(data[0]), _fmt(data[1]), str(int(data[2])),
                       _fmt(data[3]), _fmt(data[4]), _fmt(data[5]),
                       _fmt(data[6]), _fmt(data[7]), _fmt(data[8])]
                writer.writerow(row)


def build_report(traj: Trajectory, table) -> tuple[str, list[ReportRow]]:
    cfg = traj.config
    full = (float(traj.pmu_t[0]), float(traj.pmu_t[-1]))
    x2_window = cfg.report.x2_window or full
    rows = []
    for j, name in enumerate(table.machine_names):
        i = traj.machine_names.index(name)
        truth = traj.states[traj.pmu_steps, i]
        pairs = (("x1", table.data[:, j, 0], truth[:, 0], full),
                 ("x2", table.data[:, j, 3], truth[:, 1], x2_window),
                 ("x3", table.data[:, j, 1], truth[:, 2], full))
        for state, est, tru, window in pairs:
            result = smape(est, tru, t=table.t, window=window)
            rows.append(ReportRow(machine=name, state=state, window=window,
                                  smape_percent=result.percent, count=result.count))
    title = (f"scenario: {cfg.label}   noise: {cfg.noise.kind}"
             f" (snr {cfg.noise.snr_db} dB)   seed: {cfg.rng_seed}")
    return render_report(rows, title), rows


def write_report_csv(path: Path, rows: list[ReportRow]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("machine_id", "state", "window_start", "window_end",
                         "smape_percent", "samples"))
        for r in rows:
            writer.writerow((r.machine, r.state, _fmt(r.window[0]),
                             _fmt(r.window[1]), _fmt(r.smape_percent),
                             str(r.count)))


def _config_echo(cfg) -> dict:
    def clean(obj):
        if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
            return {f.name: clean(getattr(obj, f.name))
                    for f in dataclasses.fields(obj)}
        if isinstance(obj, (list, tuple)):
            return [clean(v) for v in obj]
        if isinstance(obj, dict):
            return {k: clean(v) for k, v in obj.items()}
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        return obj
    return clean(cfg)


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        for d in exc.diagnostics:
            print(f"config error: {d}", file=sys.stderr)
        return EXIT_CONFIG

    if args.case is not None:
        kind = _CASES[args.case]
        cfg = dataclasses.replace(cfg, noise=dataclasses.replace(
            cfg.noise, kind=kind))
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, rng_seed=args.seed)

    log.info("running scenario %s (noise=%s seed=%d)", cfg.label,
             cfg.noise.kind, cfg.rng_seed)
    t0 = time.time()
    try:
        traj = run_scenario(cfg)
        table = estimate_trajectory(traj)
    except (SimulationError, NetworkSolveError) as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_SIMULATION
    log.info("simulated %.1f s in %.2f s wall", cfg.t_end, time.time() - t0)

    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        write_trajectory_csv(out / "trajectory.csv", traj)
        write_pmu_csv(out / "pmu.csv", traj)
        write_estimates_csv(out / "estimates.csv", table)
        report, rows = build_report(traj, table)
        (out / "report.txt").write_text(report)
        write_report_csv(out / "report.csv", rows)
        manifest = {
            "pmuobs_version": __version__,
            "config_path": str(args.config),
            "case": args.case,
            "seed_override": args.seed,
            "generated_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
            "resolved_config": _config_echo(cfg),
        }
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2,
                                                      default=str))
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(report)
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        diags = validate_config(args.config)
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    if diags:
        for d in diags:
            print(d)
        return EXIT_CONFIG
    print(f"{args.config}: ok")
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pmuobs",
        description="Multi-machine transient simulation with PMU synthesis "
                    "and decentralized generator-state observers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="simulate a scenario and write artifacts")
    run_p.add_argument("--config", required=True, help="scenario TOML file")
    run_p.add_argument("--out", required=True, help="output directory")
    run_p.add_argument("--seed", type=int, default=None,
                       help="override the config's rng_seed")
    run_p.add_argument("--case", type=int, choices=(1, 2, 3), default=None,
                       help="override noise: 1=noisefree 2=gaussian 3=laplacian")
    run_p.set_defaults(func=cmd_run)

    val_p = sub.add_parser("validate", help="schema-check a config without running")
    val_p.add_argument("--config", required=True, help="scenario TOML file")
    val_p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    level = os.environ.get("PMUOBS_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = make_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
