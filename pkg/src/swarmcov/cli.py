"""Command-line interface.

    swarmcov rasterize MAP [--rows R --cols C | --cell-size M] [-o OUT]
    swarmcov train MAP --uavs N --controller {global,per-uav} [...]
    swarmcov matrix [--sizes 5,6,7,8,9 --uavs 1,2,3 ...]
    swarmcov report RUN_DIR
    swarmcov heatmap RUN_DIR --episode K

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__, kernels, reports
from .agent import ControllerConfig, EpsilonSchedule
from .errors import SwarmCovError
from .experiment import ExperimentSpec, run_experiment, run_matrix
from .formats import RunConfig, parse_config, parse_map, serialize_grid
from .geometry import rasterize
from .gridworld import GridMap, RewardConfig

log = logging.getLogger("swarmcov")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_help(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError("values must be positive integers")
    return values


def _budget(text: str) -> float | None:
    if text.lower() in ("none", "off"):
        return None
    return float(text)


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="key = value config file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key (repeatable)")
    p.add_argument("--episodes", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--step-budget", type=int, help="timesteps per episode (default 40 x visitable cells)")
    p.add_argument("--time-budget", type=_budget, default=argparse.SUPPRESS,
                   help="seconds per episode, or 'none' (default 1800)")
    p.add_argument("--head", choices=["linear", "softmax"])
    p.add_argument("--reward-denominator", choices=["remaining", "visited"],
                   help="discovery-reward denominator: unvisited before the move, or visited after it")
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--minibatch", type=int)
    p.add_argument("--backend", choices=["auto", "cython", "python"], default="auto")
    p.add_argument("-o", "--out", type=Path, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="swarmcov", description="Multi-UAV coverage path planning with Q-networks.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("rasterize", help="convert a map file to grid text")
    p.add_argument("map", type=Path)
    p.add_argument("--rows", type=int)
    p.add_argument("--cols", type=int)
    p.add_argument("--cell-size", type=float, help="cell edge length in meters")
    p.add_argument("-o", "--out", type=Path, help="output path (default: stdout)")

    p = sub.add_parser("train", help="run one experiment on a map")
    p.add_argument("map", type=Path)
    p.add_argument("--uavs", type=int, default=1)
    p.add_argument("--controller", choices=["global", "per-uav"], default="global")
    _add_run_options(p)

    p = sub.add_parser("matrix", help="run the map-size x swarm-size experiment matrix")
    p.add_argument("--sizes", type=_int_list, default=[5, 6, 7, 8, 9])
    p.add_argument("--uavs", type=_int_list, default=[1, 2, 3])
    p.add_argument("--modes", default="per-uav,global",
                   help="controller modes to include (comma-separated)")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    _add_run_options(p)

    p = sub.add_parser("report", help="write coverage, time and action-fraction CSVs for a run")
    p.add_argument("run_dir", type=Path)

    p = sub.add_parser("heatmap", help="write a PGM visit heatmap for one episode")
    p.add_argument("run_dir", type=Path)
    p.add_argument("--episode", type=int, required=True)
    p.add_argument("-o", "--out", type=Path)
    return parser


def resolve_config(args) -> RunConfig:
    overrides = {}
    for item in args.overrides:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        overrides[k.strip()] = v.strip()
    for key in ("episodes", "seed", "step_budget", "head", "reward_denominator", "learning_rate", "minibatch"):
        value = getattr(args, key)
        if value is not None:
            overrides[key] = value
    if "time_budget" in vars(args):
        overrides["time_budget"] = args.time_budget
    return parse_config(args.config, overrides)


def spec_from_config(cfg: RunConfig, grid: GridMap, uavs: int, mode: str, backend=None) -> ExperimentSpec:
    return ExperimentSpec(
        grid=grid,
        uav_count=uavs,
        controller=ControllerConfig(mode=mode, gamma=cfg.gamma, minibatch_size=cfg.minibatch,
                                    head=cfg.head, learning_rate=cfg.learning_rate, rho=cfg.rho,
                                    eps=cfg.rms_eps, memory_capacity=cfg.memory, hidden=cfg.hidden),
        rewards=RewardConfig(cfg.reward_new, cfg.reward_visited, cfg.reward_blocked, cfg.reward_denominator),
        epsilon=EpsilonSchedule(cfg.epsilon, cfg.epsilon_factor, cfg.epsilon_floor),
        episodes=cfg.episodes,
        seed=cfg.seed,
        max_steps=cfg.step_budget,
        wall_clock=cfg.time_budget,
        backend=backend,
    )


def _backend(args) -> str:
    if args.backend == "auto":
        return kernels.BACKEND
    kernels.get(args.backend)  # ImportError if the extension is not built
    return args.backend


def cmd_rasterize(args) -> int:
    if args.cell_size is not None and (args.rows or args.cols):
        raise UsageError("give either --rows/--cols or --cell-size")
    grid, polygon = parse_map(args.map)
    if polygon is not None and (args.rows or args.cols or args.cell_size):
        if args.cell_size is not None:
            grid = rasterize(polygon, cell_size=args.cell_size)
        elif args.rows and args.cols:
            grid = rasterize(polygon, args.rows, args.cols)
        else:
            raise UsageError("--rows and --cols must be given together")
    text = serialize_grid(grid)
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text)
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = resolve_config(args)
    if args.uavs < 1:
        raise UsageError("--uavs must be >= 1")
    grid, _ = parse_map(args.map)
    backend = _backend(args)
    spec = spec_from_config(cfg, grid, args.uavs, args.controller, backend)
    out = args.out or Path("runs") / "train"
    summary = run_experiment(spec)
    manifest = {
        "tool": "swarmcov", "version": __version__, "command": "train",
        "config": cfg.to_dict(), "seed": cfg.seed, "uavs": args.uavs,
        "controller": args.controller, "backend": backend, "map": serialize_grid(grid),
    }
    reports.write_run(summary, out, manifest)
    print(f"{reports.solutions_text(summary.solutions_found, summary.episodes)} episodes solved; "
          f"outputs in {out}")
    return EXIT_OK


def cmd_matrix(args) -> int:
    cfg = resolve_config(args)
    modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    if not modes or any(m not in ("per-uav", "global") for m in modes):
        raise UsageError("--modes takes a comma-separated subset of per-uav,global")
    backend = _backend(args)
    out = args.out or Path("runs") / "matrix"
    out.mkdir(parents=True, exist_ok=True)
    template = spec_from_config(cfg, GridMap.open(1, 1), 1, "global", backend)
    results = run_matrix(args.sizes, args.uavs, template, modes=modes, jobs=args.jobs, out_dir=out)
    reports.write_matrix_report(results, out / "report.csv")
    reports.write_manifest({
        "tool": "swarmcov", "version": __version__, "command": "matrix",
        "config": cfg.to_dict(), "seed": cfg.seed, "sizes": args.sizes, "uavs": args.uavs,
        "modes": modes, "backend": backend,
        "cells": [r.cell.name for r in results],
        "errors": {r.cell.name: r.error for r in results if r.error},
    }, out)
    failed = [r for r in results if r.error]
    print(f"{len(results)} experiments, {len(failed)} failed; report in {out / 'report.csv'}")
    return EXIT_RUNTIME if failed else EXIT_OK


def cmd_report(args) -> int:
    records = reports.load_records(args.run_dir)
    for path in reports.write_derived(records, args.run_dir):
        print(path)
    return EXIT_OK


def cmd_heatmap(args) -> int:
    records = reports.load_records(args.run_dir)
    try:
        path = reports.write_heatmap(records, args.run_dir, args.episode, args.out)
    except KeyError as exc:
        raise UsageError(str(exc.args[0])) from None
    print(path)
    return EXIT_OK


COMMANDS = {"rasterize": cmd_rasterize, "train": cmd_train, "matrix": cmd_matrix,
            "report": cmd_report, "heatmap": cmd_heatmap}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    except (SwarmCovError, OSError, ValueError, ImportError) as exc:
        print(f"swarmcov: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
