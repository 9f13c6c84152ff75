"""Multi-UAV coverage grid: state, moves, rewards and termination."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConstraintError, EpisodeFinished

# Reward constants per cell class
NEW_CELL_BASE_REWARD = 358.74
VISITED_CELL_REWARD = -31.14
NON_VISITABLE_REWARD = -225.17

DENOMINATOR_MODES = ("remaining", "visited")


class Action(enum.IntEnum):
    NORTH = 0
    SOUTH = 1
    EAST = 2
    WEST = 3


ACTION_DELTAS = {
    Action.NORTH: (-1, 0),
    Action.SOUTH: (1, 0),
    Action.EAST: (0, 1),
    Action.WEST: (0, -1),
}
N_ACTIONS = len(Action)


class CellClass(enum.Enum):
    NEW_CELL = "new"
    VISITED_CELL = "visited"
    NON_VISITABLE = "blocked"


class GridMap:
    """Rasterized field: a rows x cols visitability mask plus UAV start cells."""

    def __init__(self, visitable, starts: Sequence[Sequence[int]]):
        mask = np.array(visitable, dtype=bool)
        if mask.ndim != 2 or mask.size == 0:
            raise ConstraintError("visitable mask must be a non-empty 2-D array")
        mask.setflags(write=False)
        self.visitable = mask
        self.starts = [(int(r), int(c)) for r, c in starts]
        if not self.starts:
            raise ConstraintError("a map needs at least one start cell")
        if not mask.any():
            raise ConstraintError("a map needs at least one visitable cell")
        for r, c in self.starts:
            if not (0 <= r < self.rows and 0 <= c < self.cols):
                raise ConstraintError(f"start {(r, c)} lies outside the {self.rows}x{self.cols} grid")
            if not mask[r, c]:
                raise ConstraintError(f"start {(r, c)} is on a non-visitable cell")

    @property
    def rows(self) -> int:
        return self.visitable.shape[0]

    @property
    def cols(self) -> int:
        return self.visitable.shape[1]

    @property
    def visitable_count(self) -> int:
        return int(self.visitable.sum())

    def in_bounds(self, r: int, c: int) -> bool:
        return 0 <= r < self.rows and 0 <= c < self.cols

    def start_for(self, uav: int) -> tuple[int, int]:
        """Start cell of ``uav``; UAVs beyond the listed starts share the first one."""
        return self.starts[uav] if uav < len(self.starts) else self.starts[0]

    @classmethod
    def open(cls, rows: int, cols: int, starts=((0, 0),)) -> "GridMap":
        return cls(np.ones((rows, cols), dtype=bool), starts)

    def __eq__(self, other):
        if not isinstance(other, GridMap):
            return NotImplemented
        return self.starts == other.starts and np.array_equal(self.visitable, other.visitable)

    def __repr__(self):
        return f"GridMap({self.rows}x{self.cols}, visitable={self.visitable_count}, starts={self.starts})"


@dataclass
class SwarmState:
    positions: list[tuple[int, int]]
    visited: np.ndarray
    actions_taken: int = 0
    sim_steps: int = 0
    visited_count: int = 0

    @property
    def n_uavs(self) -> int:
        return len(self.positions)


@dataclass(frozen=True)
class RewardConfig:
    new_cell_base: float = NEW_CELL_BASE_REWARD
    visited_cell: float = VISITED_CELL_REWARD
    non_visitable: float = NON_VISITABLE_REWARD
    denominator: str = "remaining"

    def __post_init__(self):
        if self.denominator not in DENOMINATOR_MODES:
            raise ValueError(f"denominator must be one of {DENOMINATOR_MODES}, got {self.denominator!r}")

    def new_cell_reward(self, grid: GridMap, visited_before: int) -> float:
        """Discovery reward, scaled up by max(rows, cols) / D.

        ``remaining``: D is the unvisited count just before the move, so the
        reward grows as fewer cells are left. ``visited``: D is the visited count
        including the new cell (the formula read literally).
        """
        if self.denominator == "remaining":
            d = grid.visitable_count - visited_before
        else:
            d = visited_before + 1
        return self.new_cell_base * (1.0 + max(grid.rows, grid.cols) / d)


DEFAULT_REWARDS = RewardConfig()


@dataclass(frozen=True)
class StepOutcome:
    reward: float
    cell_class: CellClass
    new_position: tuple[int, int]
    coverage: float
    done: bool


@dataclass
class Budget:
    """Per-episode limits. ``max_steps`` counts timesteps (one move per UAV each)."""

    max_steps: int
    wall_clock: float | None = 30 * 60.0

    def __post_init__(self):
        if self.max_steps < 0:
            raise ValueError("max_steps must be >= 0")
        if self.wall_clock is not None and self.wall_clock < 0:
            raise ValueError("wall_clock must be >= 0")


def default_step_budget(grid: GridMap) -> int:
    return 40 * grid.visitable_count


def reset(grid: GridMap, n_uavs: int = 1) -> SwarmState:
    if n_uavs < 1:
        raise ValueError("n_uavs must be >= 1")
    positions = [grid.start_for(i) for i in range(n_uavs)]
    visited = np.zeros(grid.visitable.shape, dtype=bool)
    for r, c in positions:
        visited[r, c] = True
    return SwarmState(positions=positions, visited=visited, visited_count=int(visited.sum()))


def coverage(state: SwarmState, grid: GridMap) -> float:
    return state.visited_count / grid.visitable_count


def is_done(state: SwarmState, grid: GridMap) -> bool:
    return state.visited_count == grid.visitable_count


def step(state: SwarmState, grid: GridMap, uav: int, action: int,
         rewards: RewardConfig = DEFAULT_REWARDS) -> StepOutcome:
    """Move one UAV one cell. Mutates ``state`` in place."""
    if not 0 <= uav < state.n_uavs:
        raise IndexError(f"uav index {uav} out of range for {state.n_uavs} UAVs")
    if is_done(state, grid):
        raise EpisodeFinished("every visitable cell is already covered")
    dr, dc = ACTION_DELTAS[Action(action)]
    r, c = state.positions[uav]
    tr, tc = r + dr, c + dc
    state.actions_taken += 1

    if not grid.in_bounds(tr, tc) or not grid.visitable[tr, tc]:
        reward = rewards.non_visitable
        cls = CellClass.NON_VISITABLE
        tr, tc = r, c
    elif state.visited[tr, tc]:
        reward = rewards.visited_cell
        cls = CellClass.VISITED_CELL
    else:
        reward = rewards.new_cell_reward(grid, state.visited_count)
        cls = CellClass.NEW_CELL
        state.visited[tr, tc] = True
        state.visited_count += 1
    state.positions[uav] = (tr, tc)
    return StepOutcome(reward, cls, (tr, tc), coverage(state, grid), is_done(state, grid))


def observation(state: SwarmState, grid: GridMap, uav: int) -> np.ndarray:
    """Flattened 4-channel view: visitable, visited, own position, other UAVs."""
    n = grid.rows * grid.cols
    obs = np.zeros(4 * n, dtype=np.float64)
    obs[:n] = grid.visitable.ravel()
    obs[n:2 * n] = state.visited.ravel()
    for i, (r, c) in enumerate(state.positions):
        idx = r * grid.cols + c
        if i == uav:
            obs[2 * n + idx] = 1.0
        else:
            obs[3 * n + idx] = 1.0
    return obs


def is_terminal(state: SwarmState, grid: GridMap, budget: Budget, elapsed: float = 0.0) -> bool:
    """Full coverage, step budget spent, or wall-clock budget (seconds) spent."""
    if is_done(state, grid):
        return True
    if state.sim_steps >= budget.max_steps:
        return True
    return budget.wall_clock is not None and elapsed >= budget.wall_clock
