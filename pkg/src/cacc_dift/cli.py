"""Command-line front end.

Exit codes: 0 success, 1 usage/config/parse error, 2 collision detected.
Errors are reported on stderr as a single ``error: <kind>: <message>`` line.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .comm import TopologyError
from .config import RunFile, load_config, parse_config
from .control import ConfigError, Mode
from .dynamics import SimulationError
from .outputs import (
    STABILITY_COLUMNS,
    OutputExistsError,
    check_writable,
    write_comparison,
    write_metrics,
    write_rows,
    write_trace,
)
from .sim import TrajectoryError, compare, run, validate_config
from .stability import build_ss, hinf_norm, magnitude, region_check, sweep_boundary

OUTPUT_ENV = "CACC_DIFT_OUTPUT_DIR"
EXIT_OK, EXIT_ERROR, EXIT_COLLISION = 0, 1, 2

log = logging.getLogger("cacc_dift")


class CliError(Exception):
    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


def _load(args) -> RunFile:
    rf = load_config(args.config) if args.config else parse_config("")
    cfg = rf.platoon
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "allow_unstable", False):
        cfg = replace(cfg, allow_unstable=True)
    if getattr(args, "scheme", None):
        cfg = replace(cfg, scheme=args.scheme)
    rf.platoon = cfg
    if getattr(args, "trajectory", None):
        rf.trajectory = str(Path(args.trajectory).resolve())
    return rf


def _output_dir(args) -> Path:
    out = Path(args.output_dir or os.environ.get(OUTPUT_ENV) or "out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_validate(args) -> int:
    rf = _load(args)
    for w in validate_config(rf.platoon):
        print(f"warning: {w}", file=sys.stderr)
    rf.leader()
    print("ok")
    return EXIT_OK


def cmd_simulate(args) -> int:
    rf = _load(args)
    validate_config(rf.platoon)
    leader = rf.leader()
    out = _output_dir(args)
    paths = (out / "trace.csv", out / "metrics.csv")
    check_writable(paths, args.force)
    trace, metrics = run(rf.platoon, leader, validate=False)
    write_trace(paths[0], trace)
    write_metrics(paths[1], metrics)
    if metrics.collision:
        print(f"error: collision: gap closed at step {metrics.collision_step}", file=sys.stderr)
        return EXIT_COLLISION
    log.info("wrote %s", ", ".join(map(str, paths)))
    return EXIT_OK


def cmd_compare(args) -> int:
    rf = _load(args)
    n_seeds = args.n_seeds if args.n_seeds is not None else rf.n_seeds
    if n_seeds < 1:
        raise ConfigError(f"n_seeds must be >= 1, got {n_seeds}")
    leader = rf.leader()
    out = _output_dir(args)
    paths = (out / "compare.csv", out / "compare_ratio.csv")
    check_writable(paths, args.force)
    comp = compare(rf.platoon, leader, n_seeds, workers=args.workers)
    write_comparison(paths[0], paths[1], comp)
    for metric in ("std_e", "std_speed_err", "std_speed"):
        r = comp.ratio(metric)
        print(f"{metric} DIFT/FIFT per vehicle: " + " ".join(f"{x:.3f}" for x in r))
    if any(comp.collisions.values()):
        print(f"error: collision: runs with collisions {comp.collisions}", file=sys.stderr)
        return EXIT_COLLISION
    return EXIT_OK


def cmd_stability(args) -> int:
    rf = _load(args)
    spec = rf.stability
    out = _output_dir(args)
    paths = [out / "stability.csv"] + [out / f"bode_{m.name}.csv" for m in spec.modes]
    check_writable(paths, args.force)
    rows = []
    for mode in spec.modes:
        row = rf.platoon.gains_table[mode]
        omegas = spec.omega_k or [row.omega_k]
        headways = spec.h_d or [row.h_d]
        for w in omegas:
            for h in headways:
                res = hinf_norm(build_ss(mode, w, h), spec.grid)
                rows.append((mode.name, w, h, res.norm, res.argmax_omega, region_check(mode, w, h), res.string_stable))
    write_rows(paths[0], STABILITY_COLUMNS, rows)
    freqs = spec.grid.points()
    for mode, path in zip(spec.modes, paths[1:]):
        g = rf.platoon.gains_table[mode]
        mag = magnitude(build_ss(mode, g.omega_k, g.h_d), freqs)
        write_rows(path, ("omega", "magnitude"), zip(freqs, mag))
    for r in rows:
        print(f"{r[0]} omega_k={r[1]:g} h_d={r[2]:g} hinf={r[3]:.9g} closed_form={r[5]} sweep={r[6]}")
    return EXIT_OK


def cmd_region_sweep(args) -> int:
    rf = _load(args)
    grid = rf.stability.grid
    modes = [Mode[m.strip().upper()] for m in args.modes.split(",")] if args.modes else rf.stability.modes
    if args.n_points < 2 or not (0 < args.p_min < args.p_max):
        raise ConfigError("region-sweep needs 0 < p-min < p-max and n-points >= 2")
    out = _output_dir(args)
    path = out / "region_sweep.csv"
    check_writable([path], args.force)
    products = np.linspace(args.p_min, args.p_max, args.n_points)
    rows = []
    for mode in modes:
        for h in args.h_d:
            for p in products:
                w = p / h
                res = hinf_norm(build_ss(mode, w, h), grid)
                closed = region_check(mode, w, h)
                rows.append((mode.name, p, w, h, res.norm, closed, res.string_stable, closed == res.string_stable))
    write_rows(path, ("mode", "omega_h", "omega_k", "h_d", "hinf_norm", "closed_form_stable",
                      "sweep_stable", "agree"), rows)
    for mode in modes:
        if mode in (Mode.CACC1, Mode.ACC):
            b = sweep_boundary(mode, h_d=args.h_d[0], grid=grid)
            print(f"{mode.name}: sweep boundary omega_k*h_d ~= {b:.6f}")
    n_bad = sum(1 for r in rows if not r[-1])
    print(f"{len(rows) - n_bad}/{len(rows)} grid points agree with the closed-form regions")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cacc-dift", description="CACC platoon simulator under dynamic V2V topology")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        if config_required:
            p.add_argument("config", help="INI run configuration")
        else:
            p.add_argument("config", nargs="?", help="INI run configuration (defaults if omitted)")
        p.add_argument("-o", "--output-dir", help=f"output directory (env {OUTPUT_ENV}, default ./out)")
        p.add_argument("--force", action="store_true", help="overwrite existing outputs")
        p.add_argument("--seed", type=int)
        p.add_argument("--allow-unstable", action="store_true",
                       help="accept gains outside the closed-form string-stability regions")

    p = sub.add_parser("simulate", help="run one platoon simulation")
    common(p)
    p.add_argument("--trajectory", help="leader trajectory CSV (overrides config)")
    p.add_argument("--scheme", choices=["DIFT", "FIFT"])
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="DIFT vs FIFT over several seeds")
    common(p)
    p.add_argument("--trajectory")
    p.add_argument("--n-seeds", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("stability", help="H-infinity norms and Bode magnitudes of the per-hop SS functions")
    common(p, config_required=False)
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("region-sweep", help="sweep omega_k*h_d and compare sweep vs closed-form regions")
    common(p, config_required=False)
    p.add_argument("--modes", help="comma-separated modes (default: config [stability] modes)")
    p.add_argument("--h-d", type=float, nargs="+", default=[1.0])
    p.add_argument("--p-min", type=float, default=0.1)
    p.add_argument("--p-max", type=float, default=3.0)
    p.add_argument("--n-points", type=int, default=30)
    p.set_defaults(func=cmd_region_sweep)

    p = sub.add_parser("validate", help="check the configuration without writing outputs")
    p.add_argument("config")
    p.add_argument("--trajectory")
    p.add_argument("--allow-unstable", action="store_true")
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        kind = "config"
        msg = str(exc)
    except TrajectoryError as exc:
        kind, msg = "parse", str(exc)
    except OutputExistsError as exc:
        kind, msg = "output", str(exc)
    except (SimulationError, TopologyError) as exc:
        kind, msg = "simulation", str(exc)
    except (KeyError, ValueError) as exc:
        kind, msg = "usage", str(exc)
    print(f"error: {kind}: {msg}".replace("\n", " "), file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
