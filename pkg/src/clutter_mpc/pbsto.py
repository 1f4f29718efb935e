"""Physics-based stochastic trajectory optimisation.

Each iteration perturbs the current candidate control sequence K times with
independent Gaussian noise, rolls every perturbation out in the planning world
and keeps the cheapest one if it beats the candidate outright. A rollout whose
running cost falls under the success threshold after at least ``n_min`` steps
is returned straight away, cut at that step.
"""

from __future__ import annotations

import math
from concurrent.futures import Executor, as_completed
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .cost import DEFAULT_WEIGHTS, CostAccumulator, CostWeights
from .physics import DEFAULT_PHYSICS, NO_NOISE, NoiseSpec, PhysicsParams, rollout
from .world import Control, ControlLimits, CostBreakdown, Plan, SceneSpec, WorldState


@dataclass(frozen=True)
class PbstoParams:
    K: int = 8
    nu: float = 0.008
    c_thresh: float = 2.0
    n_min: int = 2
    i_max: int = 50
    limits: ControlLimits = field(default_factory=ControlLimits)

    def __post_init__(self):
        if self.K < 1 or self.nu < 0 or self.n_min < 1 or self.i_max < 0:
            raise ValueError(f"invalid optimizer parameters: {self}")


def rng_stream(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for a (seed, keys...) tuple; order of use doesn't matter."""
    return np.random.default_rng(np.random.SeedSequence([seed, *keys]))


def sample_noisy_controls(
    candidate: Sequence[Control],
    nu: float,
    rng: np.random.Generator,
    limits: ControlLimits = ControlLimits(),
) -> tuple[Control, ...]:
    """Add N(0, nu) to every velocity component, then clamp to the limits."""
    if nu == 0:
        return tuple(candidate)
    eps = rng.standard_normal((len(candidate), 4)) * math.sqrt(nu)
    out = []
    for u, e in zip(candidate, eps):
        v = limits.clamp(u.v_x + e[0], u.v_y + e[1], u.v_rot + e[2], u.v_grip + e[3])
        out.append(Control(*(float(c) for c in v), duration=u.duration))
    return tuple(out)


def select_best(costs: Sequence[float]) -> int:
    """Index of the smallest cost; the lowest index wins ties."""
    if len(costs) == 0:
        raise ValueError("no costs to choose from")
    best = 0
    for i, c in enumerate(costs):
        if c < costs[best]:
            best = i
    return best


class _Rollout(NamedTuple):
    controls: tuple[Control, ...]
    states: tuple[WorldState, ...]
    costs: tuple[CostBreakdown, ...]
    truncated: bool

    @property
    def total(self) -> float:
        return self.costs[-1].total


def _evaluate(
    x0: WorldState,
    controls: tuple[Control, ...],
    scene: SceneSpec,
    weights: CostWeights,
    noise: NoiseSpec,
    physics: PhysicsParams,
    c_thresh: float,
    n_min: int | None,
) -> _Rollout:
    """Roll out and score; with ``n_min`` set, stop at the first successful prefix."""
    acc = CostAccumulator(scene, weights)
    costs: list[CostBreakdown] = []
    hit = False

    def check(t: int, states: list[WorldState]) -> bool:
        nonlocal hit
        costs.append(acc.add(controls[t], states[t], states[t + 1]))
        if n_min is not None and t >= n_min and costs[-1].total <= c_thresh:
            hit = True
        return hit

    states = rollout(x0, controls, scene, noise, stop=check, params=physics)
    return _Rollout(controls[: len(states) - 1], tuple(states), tuple(costs), hit)


def _noisy_rollout(args) -> _Rollout:
    x0, candidate, scene, weights, params, noise_beta, physics, seed, it, k = args
    u = sample_noisy_controls(candidate, params.nu, rng_stream(seed, it, k, 0), params.limits)
    noise = NoiseSpec(noise_beta, rng_stream(seed, it, k, 1)) if any(noise_beta) else NO_NOISE
    return _evaluate(x0, u, scene, weights, noise, physics, params.c_thresh, params.n_min)


def _plan(r: _Rollout, history: list[float], rollouts: int) -> Plan:
    return Plan(
        controls=r.controls,
        predicted_states=r.states,
        total_cost=r.total,
        per_step_costs=r.costs,
        history=tuple(history),
        rollouts=rollouts,
        truncated=r.truncated,
    )


def optimize(
    x0: WorldState,
    init_controls: Sequence[Control],
    scene: SceneSpec,
    weights: CostWeights = DEFAULT_WEIGHTS,
    params: PbstoParams = PbstoParams(),
    seed: int = 0,
    noise: NoiseSpec = NO_NOISE,
    physics: PhysicsParams = DEFAULT_PHYSICS,
    executor: Executor | None = None,
    fast_cancel: bool = False,
) -> Plan:
    """Improve ``init_controls`` from ``x0`` for at most ``params.i_max`` iterations.

    Rollout k of iteration i draws its perturbation from ``rng_stream(seed, i, k, 0)``,
    so the result does not depend on whether rollouts run serially or on an
    executor. ``fast_cancel`` returns whichever truncating rollout finishes first
    and gives up that guarantee.
    """
    candidate = tuple(init_controls)
    if not candidate:
        raise ValueError("optimize needs at least one initial control")
    beta = noise.beta if noise.active else (0.0, 0.0, 0.0)
    first_noise = NoiseSpec(beta, rng_stream(seed, 0, 0, 1)) if noise.active else NO_NOISE
    best = _evaluate(x0, candidate, scene, weights, first_noise, physics, params.c_thresh, None)
    history = [best.total]
    rollouts = 1
    it = 0
    while it < params.i_max and best.total > params.c_thresh:
        it += 1
        jobs = [(x0, best.controls, scene, weights, params, beta, physics, seed, it, k) for k in range(params.K)]
        results: list[_Rollout] = []
        if executor is None:
            for job in jobs:
                r = _noisy_rollout(job)
                rollouts += 1
                if r.truncated:
                    return _plan(r, history + [r.total], rollouts)
                results.append(r)
        elif fast_cancel:
            futures = [executor.submit(_noisy_rollout, job) for job in jobs]
            done = []
            for f in as_completed(futures):
                r = f.result()
                rollouts += 1
                if r.truncated:
                    for other in futures:
                        other.cancel()
                    return _plan(r, history + [r.total], rollouts)
                done.append((futures.index(f), r))
            results = [r for _, r in sorted(done, key=lambda p: p[0])]
        else:
            results = list(executor.map(_noisy_rollout, jobs))
            rollouts += len(results)
            for r in results:
                if r.truncated:
                    return _plan(r, history + [r.total], rollouts)
        k_star = select_best([r.total for r in results])
        if results[k_star].total < best.total:
            best = results[k_star]
        history.append(best.total)
    return _plan(best, history, rollouts)
