"""Episode loop, 30-episode experiments and the map-size x swarm-size matrix."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import gridworld as gw
from .agent import Controller, ControllerConfig, EpsilonSchedule, Transition, decay_epsilon
from .errors import ExperimentDiverged, NonFiniteGradient
from .gridworld import Budget, CellClass, GridMap, RewardConfig

log = logging.getLogger(__name__)

# cell-class codes used in the compact action log
CLASS_CODES = {CellClass.NEW_CELL: 0, CellClass.VISITED_CELL: 1, CellClass.NON_VISITABLE: 2}


@dataclass
class ExperimentSpec:
    grid: GridMap
    uav_count: int = 1
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    rewards: RewardConfig = field(default_factory=RewardConfig)
    epsilon: EpsilonSchedule = field(default_factory=EpsilonSchedule)
    episodes: int = 30
    seed: int = 0
    max_steps: int | None = None
    wall_clock: float | None = 30 * 60.0
    backend: str | None = None

    def __post_init__(self):
        if self.uav_count < 1:
            raise ValueError("uav_count must be >= 1")
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")

    @property
    def budget(self) -> Budget:
        steps = gw.default_step_budget(self.grid) if self.max_steps is None else self.max_steps
        return Budget(steps, self.wall_clock)


@dataclass
class EpisodeRecord:
    episode: int
    epsilon: float
    uav_count: int
    initial_coverage: float
    coverage_trajectory: list[float]
    te0: float
    te1: float
    sim_steps: int
    solved: bool
    visit_counts: np.ndarray
    # one entry per action: (uav, action, cell class code)
    log_uav: list[int]
    log_action: list[int]
    log_class: list[int]

    @property
    def total_actions(self) -> int:
        return len(self.log_class)

    @property
    def valid_actions(self) -> int:
        return sum(1 for c in self.log_class if c == 0)

    @property
    def et(self) -> float:
        return self.te1 - self.te0

    @property
    def final_coverage(self) -> float:
        return self.coverage_trajectory[-1] if self.coverage_trajectory else self.initial_coverage

    @property
    def uav_actions(self) -> list[int]:
        counts = [0] * self.uav_count
        for u in self.log_uav:
            counts[u] += 1
        return counts

    @property
    def uav_valid_actions(self) -> list[int]:
        counts = [0] * self.uav_count
        for u, c in zip(self.log_uav, self.log_class):
            if c == 0:
                counts[u] += 1
        return counts

    @property
    def position_changes(self) -> int:
        return sum(1 for c in self.log_class if c != 2)


@dataclass
class ExperimentSummary:
    records: list[EpisodeRecord]
    episodes: int
    controller: Controller | None = None
    spec: ExperimentSpec | None = None

    @property
    def solutions_found(self) -> int:
        return sum(r.solved for r in self.records)

    @property
    def solved_records(self) -> list[EpisodeRecord]:
        return [r for r in self.records if r.solved]

    @property
    def min_solution_et(self) -> float | None:
        solved = self.solved_records
        return min(r.et for r in solved) if solved else None

    @property
    def min_solution_sim_steps(self) -> int | None:
        solved = self.solved_records
        return min(r.sim_steps for r in solved) if solved else None


def seed_sequence(seed: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=seed, spawn_key=key)


def episode_rng(seed: int, episode: int) -> np.random.Generator:
    """Random stream of one episode; depends only on (seed, episode)."""
    return np.random.default_rng(seed_sequence(seed, 1, episode))


def build_controller(spec: ExperimentSpec) -> Controller:
    input_dim = 4 * spec.grid.rows * spec.grid.cols
    return Controller(spec.controller, input_dim, spec.uav_count, seed_sequence(spec.seed, 0),
                      backend=spec.backend, epsilon=replace(spec.epsilon))


def scripted_policy(actions: Sequence[int]) -> Callable:
    """Test policy that replays ``actions`` in order and ends the episode when exhausted."""
    it = iter(actions)

    def policy(uav, obs, state):
        return next(it, None)
    return policy


def run_episode(spec: ExperimentSpec, controller: Controller | None, episode: int,
                rng: np.random.Generator | None = None, policy: Callable | None = None,
                clock: Callable[[], float] = time.time) -> EpisodeRecord:
    """Run one episode. With ``policy`` the networks are bypassed and nothing is learned."""
    if rng is None:
        rng = episode_rng(spec.seed, episode)
    if policy is None and controller is None:
        raise ValueError("need a controller or a scripted policy")
    grid, n = spec.grid, spec.uav_count
    budget = spec.budget
    eps = controller.epsilon.value if controller is not None else 0.0

    state = gw.reset(grid, n)
    visits = np.zeros((grid.rows, grid.cols), dtype=np.int64)
    for r, c in state.positions:
        visits[r, c] += 1
    trajectory: list[float] = []
    log_uav: list[int] = []
    log_action: list[int] = []
    log_class: list[int] = []
    initial = gw.coverage(state, grid)

    te0 = clock()
    finished = False
    while not finished and not gw.is_terminal(state, grid, budget, clock() - te0):
        for uav in range(n):
            obs = gw.observation(state, grid, uav)
            if policy is not None:
                action = policy(uav, obs, state)
                if action is None:
                    finished = True
                    break
            else:
                action = controller.act(uav, obs, eps, rng)
            out = gw.step(state, grid, uav, action, spec.rewards)
            if out.cell_class is not CellClass.NON_VISITABLE:
                visits[out.new_position] += 1
            log_uav.append(uav)
            log_action.append(int(action))
            log_class.append(CLASS_CODES[out.cell_class])
            trajectory.append(out.coverage)
            if policy is None:
                nxt = gw.observation(state, grid, uav)
                controller.memories[uav].record(Transition(obs, int(action), out.reward, nxt, out.done))
                try:
                    controller.learn(uav, rng)
                except NonFiniteGradient as exc:
                    raise ExperimentDiverged(f"episode {episode}: {exc}", episode=episode) from exc
            if out.done:
                break
        state.sim_steps += 1
    te1 = clock()

    if controller is not None:
        decay_epsilon(controller.epsilon)
    return EpisodeRecord(
        episode=episode, epsilon=eps, uav_count=n, initial_coverage=initial,
        coverage_trajectory=trajectory, te0=te0, te1=te1, sim_steps=state.sim_steps,
        solved=gw.is_done(state, grid), visit_counts=visits,
        log_uav=log_uav, log_action=log_action, log_class=log_class,
    )


def run_experiment(spec: ExperimentSpec, clock: Callable[[], float] = time.time) -> ExperimentSummary:
    controller = build_controller(spec)
    records = []
    for k in range(spec.episodes):
        rec = run_episode(spec, controller, k, clock=clock)
        log.debug("episode %d: solved=%s TA=%d VA=%d steps=%d", k, rec.solved,
                  rec.total_actions, rec.valid_actions, rec.sim_steps)
        records.append(rec)
    return ExperimentSummary(records, spec.episodes, controller, spec)


# ---- experiment matrix -------------------------------------------------------

@dataclass(frozen=True)
class MatrixCell:
    size: int
    approach: str  # "baseline", "per-uav" or "global"
    uavs: int

    @property
    def mode(self) -> str:
        return "per-uav" if self.approach == "per-uav" else "global"

    @property
    def name(self) -> str:
        return f"{self.size}x{self.size}_{self.approach}_{self.uavs}uav"


def matrix_cells(sizes: Sequence[int], uav_counts: Sequence[int],
                 modes: Sequence[str] = ("per-uav", "global")) -> list[MatrixCell]:
    """Cross product in baseline / per-UAV / global blocks.

    A single UAV is only run once (as the baseline): one network per UAV and a
    shared network coincide when there is one UAV.
    """
    if not sizes or not uav_counts:
        raise ValueError("sizes and uav_counts must be non-empty")
    cells = []
    if 1 in uav_counts:
        cells += [MatrixCell(s, "baseline", 1) for s in sizes]
    for approach in ("per-uav", "global"):
        if approach in modes:
            cells += [MatrixCell(s, approach, n) for s in sizes for n in uav_counts if n > 1]
    return cells


@dataclass
class CellResult:
    cell: MatrixCell
    summary: ExperimentSummary | None
    error: str | None = None


def _run_cell(cell: MatrixCell, template: ExperimentSpec, out_dir: str | None) -> CellResult:
    spec = replace(template, grid=GridMap.open(cell.size, cell.size), uav_count=cell.uavs,
                   controller=replace(template.controller, mode=cell.mode))
    try:
        summary = run_experiment(spec)
        if out_dir is not None:
            from .reports import write_run
            write_run(summary, Path(out_dir) / cell.name)
    except Exception as exc:  # one failing cell must not abort the matrix
        log.exception("matrix cell %s failed", cell.name)
        return CellResult(cell, None, f"{type(exc).__name__}: {exc}")
    summary.controller = None
    return CellResult(cell, summary)


def run_matrix(sizes: Sequence[int], uav_counts: Sequence[int], template: ExperimentSpec,
               modes: Sequence[str] = ("per-uav", "global"), jobs: int = 1,
               out_dir=None) -> list[CellResult]:
    """Run every matrix cell from ``template`` (its grid/uav_count/mode are replaced per cell)."""
    cells = matrix_cells(sizes, uav_counts, modes)
    out = str(out_dir) if out_dir is not None else None
    if jobs <= 1:
        return [_run_cell(c, template, out) for c in cells]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(_run_cell, c, template, out) for c in cells]
        return [f.result() for f in futures]
