"""Command-line entry point: ``clutter-mpc`` / ``python -m clutter_mpc``.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .controllers import ExecutionLog, initial_straight_controls, state_to_dict
from .harness import ExperimentConfig, render_trace, run_episode, run_experiment, scene_for
from .pbsto import optimize
from .uncertainty import UncertaintyLevel
from .world import SceneError, load_scene, save_scene

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}\n\n{self.format_help()}")


def _csv_list(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file mirroring ExperimentConfig; flags override it")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--objects", type=int, help="objects per generated scene, target included")
    p.add_argument("--timeout", type=float, help="per-episode timeout in seconds")
    p.add_argument("--paper-scale", action="store_true", help="100 scenes and a 900 s timeout")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="clutter-mpc", description="Physics-based planning for grasping in clutter.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    g = sub.add_parser("gen-scenes", help="write random scenes as JSON files")
    _add_config_flags(g)
    g.add_argument("--count", type=int, default=1)
    g.add_argument("--out", required=True, help="output directory")

    pl = sub.add_parser("plan", help="single optimizer call on a scene; prints the plan as JSON")
    _add_config_flags(pl)
    pl.add_argument("--scene", required=True, help="scene JSON file")
    pl.add_argument("--iters", type=int, help="iteration cap (default: the ManyIter value)")
    pl.add_argument("--out", help="also write the plan here")

    r = sub.add_parser("run", help="one OR or NR episode; prints the execution log as JSON")
    _add_config_flags(r)
    r.add_argument("--planner", choices=["or", "nr"], default="or")
    r.add_argument("--level", default="none", help="none, low, medium or high")
    r.add_argument("--scene", help="scene JSON file (default: generate scene --index from the seed)")
    r.add_argument("--index", type=int, default=0, help="scene index when generating")
    r.add_argument("--out", help="directory for log.json and trace.svg")
    r.add_argument("--stride", type=int, default=1)
    r.add_argument("--no-timing", action="store_true", help="omit wall-clock fields from the log")

    b = sub.add_parser("bench", help="full benchmark: CSV table and JSON summary")
    _add_config_flags(b)
    b.add_argument("--scenes", type=int)
    b.add_argument("--levels", type=_csv_list, help="comma list, e.g. none,high")
    b.add_argument("--planners", type=_csv_list, help="comma list of or,nr")
    b.add_argument("--workers", type=int)
    b.add_argument("--out", help="output directory (default: bench-out)")

    rd = sub.add_parser("render", help="SVG strip of a saved execution log")
    rd.add_argument("--log", required=True)
    rd.add_argument("--scene", required=True)
    rd.add_argument("--out", required=True)
    rd.add_argument("--stride", type=int, default=1)
    return parser


def load_config(args) -> ExperimentConfig:
    data: dict = {}
    if getattr(args, "config", None):
        data = json.loads(Path(args.config).read_text())
    flags = {
        "seed": getattr(args, "seed", None),
        "objects": getattr(args, "objects", None),
        "timeout": getattr(args, "timeout", None),
        "scenes": getattr(args, "scenes", None),
        "levels": getattr(args, "levels", None),
        "planners": getattr(args, "planners", None),
        "workers": getattr(args, "workers", None),
    }
    data.update({k: v for k, v in flags.items() if v is not None})
    if getattr(args, "paper_scale", False):
        data.setdefault("scenes", 100)
        data.setdefault("timeout", 900.0)
    return ExperimentConfig.from_dict(data)


def _emit(obj, out: str | None = None) -> None:
    text = json.dumps(obj, indent=2)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n")
    print(text)


def cmd_gen_scenes(args) -> int:
    cfg = load_config(args)
    if args.count < 1:
        raise UsageError("--count must be at least 1")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for i in range(args.count):
        scene = scene_for(cfg, i)
        if scene is None:
            logging.warning("scene %d skipped", i)
            continue
        path = out / f"scene_{i:03d}.json"
        save_scene(scene, path)
        written.append(str(path))
    print(json.dumps({"written": written}))
    return EXIT_OK


def cmd_plan(args) -> int:
    cfg = load_config(args)
    scene = load_scene(args.scene)
    params = cfg.many if args.iters is None else dataclasses.replace(cfg.many, i_max=args.iters)
    x0 = scene.initial_state()
    init = initial_straight_controls(x0, scene, cfg.horizon, cfg.speed, limits=params.limits)
    plan = optimize(x0, init, scene, cfg.weights, params, seed=cfg.seed)
    _emit(
        {
            "controls": [[*u.velocities(), u.duration] for u in plan.controls],
            "predicted_states": [state_to_dict(x) for x in plan.predicted_states],
            "total_cost": plan.total_cost,
            "history": list(plan.history),
            "rollouts": plan.rollouts,
            "truncated": plan.truncated,
        },
        args.out,
    )
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = load_config(args)
    level = UncertaintyLevel.parse(args.level).value
    if args.scene:
        scene = load_scene(args.scene)
    else:
        scene = scene_for(cfg, args.index)
        if scene is None:
            raise SceneError(f"could not generate scene {args.index}")
    episode = run_episode(cfg, scene, args.index, level, args.planner)
    data = episode.to_dict(timing=not args.no_timing)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "log.json").write_text(json.dumps(data, indent=2) + "\n")
        save_scene(scene, out / "scene.json")
        render_trace(episode, scene, out / "trace.svg", stride=args.stride)
    print(json.dumps(data, indent=2))
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = load_config(args)
    cfg = dataclasses.replace(cfg, out_dir=args.out or cfg.out_dir or "bench-out")

    def progress(row):
        logging.info("scene %d %s %s success=%s", row.scene, row.level, row.planner, row.success)

    result = run_experiment(cfg, progress=progress)
    print(json.dumps({"out_dir": cfg.out_dir, "rows": len(result.rows), "skipped": result.skipped, "summary": result.summary}, indent=2))
    return EXIT_OK


def cmd_render(args) -> int:
    scene = load_scene(args.scene)
    log = ExecutionLog.from_dict(json.loads(Path(args.log).read_text()))
    frames = render_trace(log, scene, args.out, stride=args.stride)
    print(json.dumps({"out": args.out, "frames": frames}))
    return EXIT_OK


COMMANDS = {
    "gen-scenes": cmd_gen_scenes,
    "plan": cmd_plan,
    "run": cmd_run,
    "bench": cmd_bench,
    "render": cmd_render,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
        return COMMANDS[args.command](args)
    except UsageError as exc:
        sys.stderr.write(str(exc))
        return EXIT_USAGE
    except (OSError, SceneError, ValueError, KeyError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"clutter-mpc: error: {exc}\n")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
