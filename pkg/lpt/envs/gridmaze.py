"""
8x8 gridworld maze with a terminal goal reward, and the waypoint dataset
generator whose trajectories must be stitched to reach the goal from far
starts.
"""
from collections import deque

import numpy as np

from lpt.envs.base import ActionSpace, Environment, StepResult
from lpt.envs.dataset import OfflineDataset
from lpt.errors import EnvStepError, ValidationError
from lpt.model import Trajectory
from lpt.numerics import RngStream

DEFAULT_LAYOUT = (
    "....#...",
    ".##.#.#.",
    ".#....#.",
    ".#.##.#.",
    "...#....",
    "##.#.##.",
    "....#...",
    ".##...#G",
)

# up, down, left, right, stay
MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1), (0, 0))
FAR_DISTANCE = 10
NOISE_PROB = 0.2
MAX_SEGMENT = 6


class GridMaze(Environment):
    """
    State is a one-hot vector over the grid cells. Moving into a wall or off
    the grid leaves the agent in place. The episode ends with return 1 when
    the agent enters the goal, or with return 0 after H steps.
    """

    env_id = "gridmaze-v0"

    def __init__(self, layout: tuple[str, ...] = DEFAULT_LAYOUT, horizon: int = 64):
        self.layout = tuple(layout)
        self.rows = len(layout)
        self.cols = len(layout[0])
        if any(len(r) != self.cols for r in layout):
            raise ValidationError("maze rows must have equal length")
        self.walls = np.array([[ch == "#" for ch in row] for row in layout])
        goals = [(r, c) for r in range(self.rows) for c in range(self.cols) if layout[r][c] == "G"]
        if len(goals) != 1:
            raise ValidationError("maze needs exactly one goal cell 'G'")
        self.goal = goals[0]
        self.horizon = horizon
        self.open_cells = [(r, c) for r in range(self.rows) for c in range(self.cols) if not self.walls[r, c]]
        self._goal_dist = self.distances_from(self.goal)
        if len(self._goal_dist) != len(self.open_cells):
            raise ValidationError("maze is disconnected: the goal is unreachable from some open cells")
        self.position = self.goal
        self.t = 0
        self.done = True
        self._return = 0.0

    @property
    def state_dim(self) -> int:
        return self.rows * self.cols

    @property
    def action_space(self) -> ActionSpace:
        return ActionSpace(discrete=True, size=len(MOVES))

    def encode(self, cell: tuple[int, int]) -> np.ndarray:
        state = np.zeros(self.state_dim)
        state[cell[0] * self.cols + cell[1]] = 1.0
        return state

    def decode(self, state: np.ndarray) -> tuple[int, int]:
        idx = int(np.argmax(state))
        return divmod(idx, self.cols)

    def move(self, cell: tuple[int, int], action: int) -> tuple[int, int]:
        dr, dc = MOVES[action]
        r, c = cell[0] + dr, cell[1] + dc
        if 0 <= r < self.rows and 0 <= c < self.cols and not self.walls[r, c]:
            return (r, c)
        return cell

    def distances_from(self, source: tuple[int, int]) -> dict[tuple[int, int], int]:
        """BFS step distances to every reachable open cell."""
        dist = {source: 0}
        queue = deque([source])
        while queue:
            cell = queue.popleft()
            for a in range(4):
                nxt = self.move(cell, a)
                if nxt not in dist:
                    dist[nxt] = dist[cell] + 1
                    queue.append(nxt)
        return dist

    def manhattan_to_goal(self, cell: tuple[int, int]) -> int:
        return abs(cell[0] - self.goal[0]) + abs(cell[1] - self.goal[1])

    def start_cells(self) -> list[tuple[int, int]]:
        return [c for c in self.open_cells if c != self.goal]

    def reset(self, rng: np.random.Generator, start: tuple[int, int] | None = None) -> np.ndarray:
        cells = self.start_cells()
        self.position = start if start is not None else cells[int(rng.integers(len(cells)))]
        if self.position not in cells:
            raise ValidationError(f"start {self.position} is not an open non-goal cell")
        self.t = 0
        self.done = False
        self._return = 0.0
        return self.encode(self.position)

    def is_legal(self, action) -> bool:
        return 0 <= int(action) < len(MOVES)

    def step(self, action) -> StepResult:
        if self.done:
            raise EnvStepError("step() called on a finished episode; call reset() first")
        if not self.is_legal(action):
            raise EnvStepError(f"action {action} outside [0, {len(MOVES)})")
        self.position = self.move(self.position, int(action))
        self.t += 1
        if self.position == self.goal:
            self._return = 1.0
            self.done = True
        elif self.t >= self.horizon:
            self.done = True
        return StepResult(self.encode(self.position), self.done)

    def episode_return(self) -> float:
        return self._return


def _shortest_action(maze: GridMaze, cell, dist_to_target: dict) -> int:
    best = min(range(4), key=lambda a: (dist_to_target.get(maze.move(cell, a), 10**9), a))
    return best


def gen_maze_dataset(
    maze: GridMaze,
    n_trajectories: int,
    seed: int,
    noise_prob: float = NOISE_PROB,
    max_segment: int = MAX_SEGMENT,
) -> OfflineDataset:
    """
    Noisy shortest-path walks between random waypoint pairs.

    The destination of each walk lies within ``max_segment`` BFS steps of its
    start, so far starts only reach the goal by composing several walks. A walk
    entering the goal ends there with return 1.
    """
    if n_trajectories < 1:
        raise ValidationError("n_trajectories must be >= 1")
    cells = maze.start_cells()
    dist_tables = {cell: maze.distances_from(cell) for cell in maze.open_cells}
    trajectories, returns = [], []
    for i in range(n_trajectories):
        rng = RngStream.derive(seed, "maze-walk", i).numpy
        start = cells[int(rng.integers(len(cells)))]
        near = [c for c, d in dist_tables[start].items() if 0 < d <= max_segment]
        target = near[int(rng.integers(len(near)))]
        to_target = dist_tables[target]
        cell = start
        states, actions = [], []
        y = 0.0
        while len(actions) < maze.horizon:
            if rng.random() < noise_prob:
                action = int(rng.integers(len(MOVES)))
            else:
                action = _shortest_action(maze, cell, to_target)
            states.append(maze.encode(cell))
            actions.append(action)
            cell = maze.move(cell, action)
            if cell == maze.goal:
                y = 1.0
                break
            if cell == target:
                break
        trajectories.append(Trajectory(np.array(states), np.array(actions, dtype=np.int64)))
        returns.append(y)
    return OfflineDataset(
        env_id=maze.env_id,
        state_dim=maze.state_dim,
        discrete=True,
        action_size=len(MOVES),
        trajectories=trajectories,
        returns=np.array(returns),
        metadata={
            "generator": "waypoint-walk",
            "seed": seed,
            "noise_prob": noise_prob,
            "max_segment": max_segment,
            "horizon": maze.horizon,
        },
    )


def audit_maze(maze: GridMaze, dataset: OfflineDataset) -> dict:
    """
    Far-start success fraction and stitching coverage.

    Coverage is the share of far open cells (Manhattan distance >= 10 from the
    goal) from which the goal is reachable in the graph of transitions that
    appear somewhere in the dataset.
    """
    far_successes = 0
    far_starts = 0
    edges: dict[tuple, set] = {}
    for traj, y in zip(dataset.trajectories, dataset.returns):
        cells = [maze.decode(s) for s in traj.states]
        if maze.manhattan_to_goal(cells[0]) >= FAR_DISTANCE:
            far_starts += 1
            far_successes += int(y > 0)
        nxt_cells = cells[1:] + [maze.move(cells[-1], int(traj.actions[-1]))]
        for a, b in zip(cells, nxt_cells):
            edges.setdefault(a, set()).add(b)
    reach_goal = set()
    reverse: dict[tuple, set] = {}
    for a, bs in edges.items():
        for b in bs:
            reverse.setdefault(b, set()).add(a)
    queue = deque([maze.goal])
    reach_goal.add(maze.goal)
    while queue:
        cell = queue.popleft()
        for prev in reverse.get(cell, ()):
            if prev not in reach_goal:
                reach_goal.add(prev)
                queue.append(prev)
    far_cells = [c for c in maze.start_cells() if maze.manhattan_to_goal(c) >= FAR_DISTANCE]
    covered = [c for c in far_cells if c in reach_goal]
    return {
        "far_start_trajectories": far_starts,
        "far_start_successes": far_successes,
        "far_start_success_fraction": far_successes / len(dataset),
        "far_start_success_rate": far_successes / far_starts if far_starts else 0.0,
        "far_cells": len(far_cells),
        "stitching_coverage": len(covered) / len(far_cells) if far_cells else 0.0,
    }


def replay_maze(maze: GridMaze, traj: Trajectory, y: float) -> list[str]:
    """Re-simulate a deterministic maze trajectory; empty list when consistent."""
    problems = []
    cell = maze.decode(traj.states[0])
    if not np.array_equal(traj.states[0], maze.encode(cell)):
        return ["first state is not a one-hot cell encoding"]
    for t, action in enumerate(traj.actions):
        if not maze.is_legal(action):
            problems.append(f"step {t}: illegal action {action}")
            break
        if not np.array_equal(traj.states[t], maze.encode(cell)):
            problems.append(f"step {t}: state does not follow from the previous transition")
            break
        cell = maze.move(cell, int(action))
        if cell == maze.goal and t != traj.length - 1:
            problems.append(f"step {t}: goal reached but the trajectory continues")
            break
    reached = 1.0 if cell == maze.goal else 0.0
    if not problems and reached != float(y):
        problems.append(f"return {y} does not match replayed return {reached}")
    return problems
