"""Command-line entry point: ``gridcast bench | cast | info | mcl-demo``.

Maps are PGM files, or one of the generated maps via ``builtin:NAME``
(``grid4``, ``structured``, ``loop``, ``blocks``; an optional ``:SIZE`` suffix
sets the side length, e.g. ``builtin:structured:256``).
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from . import METHODS, make_method
from . import maps
from .bench import report_emit, run_grid_benchmark, run_random_benchmark
from .grid import OccupancyGrid, PGMError, load_pgm
from .methods import LUTTooLargeError

BUILTIN = {
    "grid4": lambda size: maps.grid4(),
    "structured": lambda size: maps.structured_map(size or 256),
    "loop": lambda size: maps.loop_map(size or 128),
    "blocks": lambda size: maps.random_blocks(size or 64, size or 64, seed=0),
}


class UsageError(Exception):
    """Bad argument values that argparse itself cannot catch."""


def load_map(spec: str) -> tuple[OccupancyGrid, str]:
    if spec.startswith("builtin:"):
        parts = spec.split(":")
        name = parts[1] if len(parts) > 1 else ""
        if name not in BUILTIN:
            raise UsageError(f"unknown builtin map {name!r}; choose from {sorted(BUILTIN)}")
        size = None
        if len(parts) > 2:
            try:
                size = int(parts[2])
            except ValueError:
                raise UsageError(f"bad builtin map size {parts[2]!r}") from None
        return BUILTIN[name](size), spec
    path = Path(spec)
    if not path.is_file():
        raise UsageError(f"map file not found: {spec}")
    try:
        return load_pgm(path), path.name
    except PGMError as exc:
        raise UsageError(f"cannot read {spec}: {exc}") from None


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _even_theta(text):
    v = int(text)
    if v < 4 or v % 2:
        raise argparse.ArgumentTypeError(f"theta-disc must be an even integer >= 4, got {text}")
    return v


def _strides(text):
    try:
        s = tuple(int(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"strides must look like 4,4,1, got {text}") from None
    if len(s) != 3 or min(s) < 1:
        raise argparse.ArgumentTypeError(f"need three positive strides, got {text}")
    return s


def _methods(text):
    names = [n.strip() for n in text.split(",") if n.strip()]
    bad = [n for n in names if n not in METHODS]
    if not names or bad:
        raise argparse.ArgumentTypeError(f"unknown method(s) {bad or text!r}; choose from "
                                         f"{', '.join(METHODS)}")
    return names


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gridcast", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, multi=False):
        sp.add_argument("--map", required=True, help="PGM path or builtin:NAME[:SIZE]")
        sp.add_argument("--method", required=True, type=_methods if multi else str,
                        help="comma-separated list" if multi else None)
        sp.add_argument("--theta-disc", type=_even_theta, default=216)
        sp.add_argument("--max-range", type=_positive_float, default=None)

    b = sub.add_parser("bench", help="time ray casts and print a report")
    common(b, multi=True)
    b.add_argument("--mode", choices=("grid", "random"), default="random")
    b.add_argument("--queries", type=_positive_int, default=1_000_000,
                   help="random mode only")
    b.add_argument("--strides", type=_strides, default=(4, 4, 1),
                   help="grid mode x,y,theta strides")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--min-batch-us", type=_positive_float, default=50.0,
                   help="minimum duration of one timed batch")
    b.add_argument("--format", choices=("table", "csv", "jsonl"), default="table")

    c = sub.add_parser("cast", help="print one range")
    common(c)
    c.add_argument("-x", type=float, required=True)
    c.add_argument("-y", type=float, required=True)
    c.add_argument("--theta", type=float, required=True, help="radians")

    i = sub.add_parser("info", help="print build time and memory")
    common(i)

    m = sub.add_parser("mcl-demo", help="track the loop trajectory with a particle filter")
    m.add_argument("--map", default="builtin:loop")
    m.add_argument("--method", default="cddt")
    m.add_argument("--theta-disc", type=_even_theta, default=216)
    m.add_argument("--max-range", type=_positive_float, default=None)
    m.add_argument("--particles", type=_positive_int, default=1000)
    m.add_argument("--beams", type=_positive_int, default=61)
    m.add_argument("--fov-deg", type=float, default=270.0)
    m.add_argument("--steps", type=_positive_int, default=None,
                   help="default: one lap")
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--scan-noise", type=float, default=1.0, help="px")
    m.add_argument("--out", default=None, help="CSV path (default stdout)")
    return p


def _fit(args, grid):
    if args.method not in METHODS:
        raise UsageError(f"unknown method {args.method!r}; choose from {', '.join(METHODS)}")
    return make_method(args.method, theta_disc=args.theta_disc,
                       max_range=args.max_range).fit(grid)


def cmd_bench(args, out):
    grid, map_id = load_map(args.map)
    reports = []
    for name in args.method:
        m = make_method(name, theta_disc=args.theta_disc, max_range=args.max_range).fit(grid)
        if args.mode == "grid":
            r = run_grid_benchmark(m, map_id, args.theta_disc, args.strides,
                                   min_batch_seconds=args.min_batch_us * 1e-6)
        else:
            r = run_random_benchmark(m, map_id, args.queries, args.seed,
                                     min_batch_seconds=args.min_batch_us * 1e-6)
        reports.append(r)
    out.write(report_emit(reports, args.format))


def cmd_cast(args, out):
    grid, _ = load_map(args.map)
    m = _fit(args, grid)
    out.write(f"{m.cast(args.x, args.y, args.theta):.6g}\n")


def cmd_info(args, out):
    grid, map_id = load_map(args.map)
    m = _fit(args, grid)
    out.write(f"map {map_id} {grid.width}x{grid.height}  method {m.name}  "
              f"init_time {m.init_time_:.6f} s  memory {m.memory_bytes()} bytes\n")


def cmd_mcl(args, out):
    from .mcl import MCLConfig, ScanSpec, loop_trajectory, run_scenario

    if not 0 < args.fov_deg <= 360:
        raise UsageError(f"--fov-deg must be in (0, 360], got {args.fov_deg}")
    grid, _ = load_map(args.map)
    if grid.width != grid.height:
        raise UsageError("the demo trajectory needs a square loop map")
    try:
        traj = loop_trajectory(grid.width)
    except ValueError as exc:
        raise UsageError(f"map too small for the demo loop: {exc}") from None
    if args.steps is not None:
        reps = math.ceil((args.steps + 1) / traj.shape[0])
        traj = loop_trajectory(grid.width, laps=reps)[: args.steps + 1]
    cells = grid.cells[traj[:, 1].astype(int), traj[:, 0].astype(int)]
    if cells.any():
        raise UsageError("the loop trajectory crosses obstacles on this map; use builtin:loop")
    m = _fit(args, grid)
    cfg = MCLConfig(m, n_particles=args.particles,
                    scan=ScanSpec(args.beams, math.radians(args.fov_deg)))
    res = run_scenario(cfg, traj, seed=args.seed, scan_noise=args.scan_noise)
    text = res.to_csv()
    if args.out:
        Path(args.out).write_text(text)
    else:
        out.write(text)
    sys.stderr.write(f"median error {res.median_error:.3f} px, divergences {res.divergences}, "
                     f"mean step {res.mean_step_time * 1e3:.2f} ms, "
                     f"particles at 40 Hz ~{res.particles_at_40hz}\n")


COMMANDS = {"bench": cmd_bench, "cast": cmd_cast, "info": cmd_info, "mcl-demo": cmd_mcl}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        COMMANDS[args.command](args, out)
    except UsageError as exc:
        sys.stderr.write(f"gridcast: error: {exc}\n")
        return 2
    except (LUTTooLargeError, ValueError) as exc:
        sys.stderr.write(f"gridcast: {exc}\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
