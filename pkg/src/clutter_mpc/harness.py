"""Benchmark orchestration: scenes x uncertainty levels x planners, metrics, CSV/JSON output and SVG traces."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import os
import typing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .controllers import ControllerParams, ExecutionLog, ExecutionWorld, Outcome, run_nr, run_or
from .cost import CostWeights
from .pbsto import PbstoParams
from .physics import gripper_links
from .uncertainty import (
    PerturbVariances,
    SceneGenParams,
    UncertaintyLevel,
    generate_scene,
    noise_spec,
    perturb_scene,
)
from .world import Box, Circle, ControlLimits, RobotGeometry, SceneError, SceneSpec, Table, WorldState

log = logging.getLogger(__name__)

PLANNERS = ("or", "nr")
CSV_HEADER = (
    "scene", "level", "planner", "success", "replans", "exec_cost", "elapsed_s", "init_plan_s", "mean_replan_s",
)
THREADS_ENV = "CLUTTER_MPC_THREADS"
GENERATION_RETRIES = 5


@dataclass(frozen=True)
class ExperimentConfig:
    scenes: int = 20
    objects: int = 6
    levels: tuple[str, ...] = ("none", "low", "medium", "high")
    planners: tuple[str, ...] = PLANNERS
    many: PbstoParams = field(default_factory=lambda: PbstoParams(i_max=50))
    few: PbstoParams = field(default_factory=lambda: PbstoParams(i_max=1))
    weights: CostWeights = field(default_factory=CostWeights)
    timeout: float = 120.0
    seed: int = 0
    out_dir: str | None = None
    sd_thresh: float = 0.02
    horizon: int = 6
    speed: float = 0.04
    halt_on_drop: bool = True
    noise_robot: bool = True
    noise_ref_dt: float | None = 1.0
    scene_gen: SceneGenParams = field(default_factory=SceneGenParams)
    perturb: PerturbVariances = field(default_factory=PerturbVariances)
    workers: int | None = None

    def __post_init__(self):
        if self.scenes < 1:
            raise ValueError("scenes must be at least 1")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        object.__setattr__(self, "levels", tuple(UncertaintyLevel.parse(v).value for v in self.levels))
        planners = tuple(str(p).lower() for p in self.planners)
        bad = [p for p in planners if p not in PLANNERS]
        if bad or not planners:
            raise ValueError(f"planners must be drawn from {PLANNERS}, got {self.planners}")
        object.__setattr__(self, "planners", planners)
        if self.scene_gen.object_count != self.objects:
            object.__setattr__(self, "scene_gen", dataclasses.replace(self.scene_gen, object_count=self.objects))

    @classmethod
    def paper_scale(cls, **overrides) -> ExperimentConfig:
        """100 scenes, all four levels, 15 minute timeout."""
        return cls(**{"scenes": 100, "timeout": 900.0, **overrides})

    def controller_params(self) -> ControllerParams:
        return ControllerParams(
            many=self.many,
            few=self.few,
            sd_thresh=self.sd_thresh,
            horizon=self.horizon,
            speed=self.speed,
            timeout=self.timeout,
            w_ang=self.weights.w_ang,
            halt_on_drop=self.halt_on_drop,
        )

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentConfig:
        return _build(cls, data, "config")


def _build(cls, data, where: str):
    """Instantiate a (possibly nested) frozen dataclass from plain JSON data."""
    if not isinstance(data, dict):
        raise ValueError(f"{where}: expected an object")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ValueError(f"{where}: unknown field(s) {', '.join(unknown)}")
    kwargs = {}
    for key, value in data.items():
        kwargs[key] = _coerce(hints[key], value, f"{where}.{key}")
    return cls(**kwargs)


_NESTED = (PbstoParams, CostWeights, SceneGenParams, PerturbVariances, Table, RobotGeometry, ControlLimits)


def _coerce(tp, value, where: str):
    if tp in _NESTED:
        return _build(tp, value, where)
    origin = typing.get_origin(tp)
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ValueError(f"{where}: expected a list")
        return tuple(value)
    return value


# ---------------------------------------------------------------------------
# Seeds


def _seed(*keys: int) -> int:
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


def _level_index(level: str) -> int:
    return list(UncertaintyLevel).index(UncertaintyLevel.parse(level))


def scene_for(config: ExperimentConfig, index: int) -> SceneSpec | None:
    """Execution world ``index`` of the experiment; None when generation keeps failing."""
    for attempt in range(GENERATION_RETRIES):
        try:
            return generate_scene(config.scene_gen, np.random.default_rng([config.seed, index, 0, attempt]))
        except SceneError as exc:
            log.warning("scene %d attempt %d: %s", index, attempt, exc)
    return None


# ---------------------------------------------------------------------------
# Episodes and metrics


@dataclass(frozen=True)
class MetricsRow:
    scene: int
    level: str
    planner: str
    success: bool
    replans: int
    exec_cost: float
    elapsed_s: float
    init_plan_s: float
    mean_replan_s: float

    def as_csv(self) -> list[str]:
        return [
            str(self.scene), self.level, self.planner, "true" if self.success else "false", str(self.replans),
            repr(float(self.exec_cost)), repr(float(self.elapsed_s)), repr(float(self.init_plan_s)),
            repr(float(self.mean_replan_s)),
        ]

    @classmethod
    def from_csv(cls, rec: dict) -> MetricsRow:
        return cls(
            scene=int(rec["scene"]),
            level=rec["level"],
            planner=rec["planner"],
            success=rec["success"] == "true",
            replans=int(rec["replans"]),
            exec_cost=float(rec["exec_cost"]),
            elapsed_s=float(rec["elapsed_s"]),
            init_plan_s=float(rec["init_plan_s"]),
            mean_replan_s=float(rec["mean_replan_s"]),
        )


def metrics_row(scene: int, level: str, planner: str, episode: ExecutionLog) -> MetricsRow:
    times = episode.replan_times
    return MetricsRow(
        scene=scene,
        level=level,
        planner=planner,
        success=episode.success,
        replans=episode.replans,
        exec_cost=episode.executed_cost.total,
        elapsed_s=episode.elapsed_from_first_move,
        init_plan_s=episode.init_plan_time,
        mean_replan_s=float(np.mean(times)) if times else math.nan,
    )


def run_episode(
    config: ExperimentConfig, scene: SceneSpec, index: int, level: str, planner: str
) -> ExecutionLog:
    """One planner on one execution world at one uncertainty level."""
    lv = _level_index(level)
    planning = perturb_scene(scene, level, np.random.default_rng([config.seed, index, 1, lv]), config.perturb)
    # Both planners face the same noise stream for a given scene and level.
    noise = noise_spec(
        level, np.random.default_rng([config.seed, index, 2, lv]), config.noise_robot, ref_dt=config.noise_ref_dt
    )
    world = ExecutionWorld(scene, noise)
    run = run_or if planner == "or" else run_nr
    seed = _seed(config.seed, index, 3, lv, PLANNERS.index(planner))
    return run(world, planning, config.controller_params(), seed=seed, weights=config.weights)


def _episode_job(args) -> tuple[MetricsRow, dict] | None:
    config, index, level, planner = args
    scene = scene_for(config, index)
    if scene is None:
        return None
    episode = run_episode(config, scene, index, level, planner)
    return metrics_row(index, level, planner, episode), episode_record(index, level, planner, episode)


def episode_record(scene: int, level: str, planner: str, episode: ExecutionLog) -> dict:
    """JSON-friendly summary of one episode, including the fields the CSV leaves out."""
    return {
        "scene": scene,
        "level": level,
        "planner": planner,
        "outcome": episode.outcome.value,
        "steps": len(episode.executed_controls),
        "replans": episode.replans,
        "replan_reasons": [e.reason.value for e in episode.replan_events],
        "elapsed_total_s": episode.elapsed,
        "elapsed_from_first_move_s": episode.elapsed_from_first_move,
    }


def worker_count(requested: int | None = None) -> int:
    n = requested or os.cpu_count() or 1
    cap = os.environ.get(THREADS_ENV)
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            log.warning("ignoring non-integer %s=%r", THREADS_ENV, cap)
    return max(1, n)


@dataclass
class ExperimentResult:
    rows: list[MetricsRow]
    summary: dict
    episodes: list[dict]
    skipped: list[int]


def run_experiment(
    config: ExperimentConfig, progress: Callable[[MetricsRow], None] | None = None
) -> ExperimentResult:
    """Run every (scene, level, planner) episode and aggregate the results.

    Rows come back in (scene, level, planner) order whatever the worker count.
    Writes ``metrics.csv``, ``summary.json``, ``episodes.jsonl`` and
    ``config.json`` when ``config.out_dir`` is set.
    """
    jobs = [(config, i, lv, p) for i in range(config.scenes) for lv in config.levels for p in config.planners]
    workers = min(worker_count(config.workers), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_episode_job, jobs))
    else:
        results = []
        for job in jobs:
            results.append(_episode_job(job))
            if progress is not None and results[-1] is not None:
                progress(results[-1][0])
    rows, episodes, skipped = [], [], []
    for job, res in zip(jobs, results):
        if res is None:
            if job[1] not in skipped:
                skipped.append(job[1])
                log.warning("scene %d skipped: generation failed %d times", job[1], GENERATION_RETRIES)
            continue
        rows.append(res[0])
        episodes.append(res[1])
    result = ExperimentResult(rows, summarize(rows), episodes, skipped)
    if config.out_dir:
        write_outputs(result, config)
    return result


# ---------------------------------------------------------------------------
# Aggregation and files


def mean_ci95(values: Sequence[float]) -> tuple[float | None, float | None]:
    """Mean and 1.96 standard errors (normal approximation); None when empty."""
    v = [x for x in values if not math.isnan(x)]
    if not v:
        return None, None
    m = math.fsum(v) / len(v)
    if len(v) < 2:
        return m, 0.0
    var = math.fsum((x - m) ** 2 for x in v) / (len(v) - 1)
    return m, 1.96 * math.sqrt(var / len(v))


def summarize(rows: Iterable[MetricsRow]) -> dict:
    """Per level and planner: success rate, replans, and cost/time over successful runs."""
    groups: dict[str, dict[str, list[MetricsRow]]] = {}
    for r in rows:
        groups.setdefault(r.level, {}).setdefault(r.planner, []).append(r)
    out: dict = {}
    for level, by_planner in groups.items():
        out[level] = {}
        for planner, rs in by_planner.items():
            ok = [r for r in rs if r.success]
            rep_m, rep_ci = mean_ci95([float(r.replans) for r in rs])
            cost_m, cost_ci = mean_ci95([r.exec_cost for r in ok])
            time_m, time_ci = mean_ci95([r.elapsed_s for r in ok])
            init_m, _ = mean_ci95([r.init_plan_s for r in rs])
            quick_m, _ = mean_ci95([r.mean_replan_s for r in rs])
            out[level][planner] = {
                "n": len(rs),
                "successes": len(ok),
                "success_rate": len(ok) / len(rs),
                "replans_mean": rep_m,
                "replans_ci95": rep_ci,
                "cost_mean": cost_m,
                "cost_ci95": cost_ci,
                "time_mean": time_m,
                "time_ci95": time_ci,
                "init_plan_mean_s": init_m,
                "replan_mean_s": quick_m,
            }
    return out


def write_csv(rows: Iterable[MetricsRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for r in rows:
            w.writerow(r.as_csv())


def read_csv(path: str | Path) -> list[MetricsRow]:
    with open(path, newline="") as fh:
        return [MetricsRow.from_csv(rec) for rec in csv.DictReader(fh)]


def write_outputs(result: ExperimentResult, config: ExperimentConfig) -> Path:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(result.rows, out / "metrics.csv")
    (out / "summary.json").write_text(json.dumps(result.summary, indent=2))
    (out / "config.json").write_text(json.dumps(config.to_dict(), indent=2))
    with open(out / "episodes.jsonl", "w") as fh:
        for rec in result.episodes:
            fh.write(json.dumps(rec) + "\n")
    return out


# ---------------------------------------------------------------------------
# SVG traces


def frame_times(steps: int, stride: int) -> list[int]:
    if stride < 1:
        raise ValueError("stride must be at least 1")
    return list(range(0, steps + 1, stride))


def _poly(points: Iterable[tuple[float, float]]) -> str:
    return " ".join(f"{x:.2f},{y:.2f}" for x, y in points)


def _box_corners(x, y, theta, hx, hy):
    c, s = math.cos(theta), math.sin(theta)
    return [(x + c * a - s * b, y + s * a + c * b) for a, b in ((hx, hy), (-hx, hy), (-hx, -hy), (hx, -hy))]


def _frame_svg(state: WorldState, scene: SceneSpec, t: int, size: float) -> list[str]:
    tb = scene.table
    # World extent shown: table plus the robot's usual starting area.
    span = 2.0 * max(tb.half_x, tb.half_y) + 0.4
    k = size / span

    def px(x, y):
        return (size / 2 + x * k, size / 2 - y * k)

    out = []
    (x0, y0), (x1, y1) = px(-tb.half_x, tb.half_y), px(tb.half_x, -tb.half_y)
    out.append(f'<rect x="{x0:.2f}" y="{y0:.2f}" width="{x1 - x0:.2f}" height="{y1 - y0:.2f}" fill="#f1e7d0" stroke="#8a7a55"/>')
    m = tb.safe_margin
    (x0, y0), (x1, y1) = px(-tb.half_x + m, tb.half_y - m), px(tb.half_x - m, -tb.half_y + m)
    out.append(
        f'<rect x="{x0:.2f}" y="{y0:.2f}" width="{x1 - x0:.2f}" height="{y1 - y0:.2f}" '
        'fill="none" stroke="#b5a67f" stroke-dasharray="4 3"/>'
    )
    for i, (spec, pose, gone) in enumerate(zip(scene.objects, state.objects, state.dropped)):
        fill = "#d9412b" if spec.is_target else "#6f7f95"
        opacity = "0.25" if gone else "0.9"
        if isinstance(spec.shape, Circle):
            cx, cy = px(pose.x, pose.y)
            out.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="{spec.shape.radius * k:.2f}" fill="{fill}" fill-opacity="{opacity}"/>')
        else:
            assert isinstance(spec.shape, Box)
            pts = [px(*p) for p in _box_corners(pose.x, pose.y, pose.theta, spec.shape.half_x, spec.shape.half_y)]
            out.append(f'<polygon points="{_poly(pts)}" fill="{fill}" fill-opacity="{opacity}"/>')
    for x, y, th, hx, hy in gripper_links(state.robot, scene.robot):
        pts = [px(*p) for p in _box_corners(x, y, th, hx, hy)]
        out.append(f'<polygon points="{_poly(pts)}" fill="#2d2d2d" fill-opacity="0.8"/>')
    out.append(f'<text x="6" y="16" font-family="monospace" font-size="12">t={t}</text>')
    return out


def render_trace(
    states: ExecutionLog | Sequence[WorldState], scene: SceneSpec, path: str | Path, stride: int = 1, size: float = 200.0
) -> int:
    """Write a top-down SVG strip of every ``stride``-th observed state; returns the frame count."""
    seq = states.observed_states if isinstance(states, ExecutionLog) else list(states)
    if not seq:
        raise ValueError("nothing to render")
    times = frame_times(len(seq) - 1, stride)
    width = size * len(times)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" height="{size:.0f}" '
        f'viewBox="0 0 {width:.0f} {size:.0f}">'
    ]
    for j, t in enumerate(times):
        parts.append(f'<g class="frame" transform="translate({j * size:.0f},0)">')
        parts.extend(_frame_svg(seq[t], scene, t, size))
        parts.append("</g>")
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
    return len(times)


__all__ = [
    "CSV_HEADER",
    "ExperimentConfig",
    "ExperimentResult",
    "MetricsRow",
    "Outcome",
    "episode_record",
    "frame_times",
    "mean_ci95",
    "metrics_row",
    "read_csv",
    "render_trace",
    "run_episode",
    "run_experiment",
    "scene_for",
    "summarize",
    "write_csv",
]
