"""
Built-in environments and dataset generators, addressed by env id.
"""
from collections import Counter

import numpy as np

from lpt.envs.base import ActionSpace, Environment, StepResult
from lpt.envs.connect4 import BEHAVIOR_MIX, ConnectFour, gen_connect4_dataset, replay_connect4
from lpt.envs.dataset import NormalizationStats, OfflineDataset, load_dataset, save_dataset
from lpt.envs.gridmaze import GridMaze, audit_maze, gen_maze_dataset, replay_maze
from lpt.envs.lingauss import LinearGaussianSpec, gen_linear_gaussian_dataset, random_spec
from lpt.errors import ValidationError
from lpt.numerics import RngStream

ENV_IDS = ("gridmaze-v0", "connect4-v0", "lingauss-v0")


def make_env(env_id: str, **options) -> Environment:
    if env_id == "gridmaze-v0":
        return GridMaze(**options)
    if env_id == "connect4-v0":
        return ConnectFour(**options)
    if env_id == "lingauss-v0":
        raise ValidationError("lingauss-v0 is a dataset-only fixture and cannot be rolled out")
    raise ValidationError(f"unknown env id {env_id!r}; choose from {', '.join(ENV_IDS)}")


def generate_dataset(env_id: str, n: int, seed: int, **options) -> OfflineDataset:
    """
    Dispatch to the generator for ``env_id``.

    Options: gridmaze ``noise_prob``/``max_segment``; connect4 ``behavior_mix``/
    ``opponent_epsilon``; lingauss ``latent_dim``/``action_dim``/``horizon``.
    """
    if env_id == "gridmaze-v0":
        maze_opts = {k: options.pop(k) for k in ("noise_prob", "max_segment") if k in options}
        return gen_maze_dataset(GridMaze(**options), n, seed, **maze_opts)
    if env_id == "connect4-v0":
        return gen_connect4_dataset(
            n,
            options.get("behavior_mix", BEHAVIOR_MIX),
            seed,
            **({"opponent_epsilon": options["opponent_epsilon"]} if "opponent_epsilon" in options else {}),
        )
    if env_id == "lingauss-v0":
        spec = options.get("spec")
        if spec is None:
            spec = random_spec(
                options.get("latent_dim", 4),
                options.get("action_dim", 2),
                options.get("horizon", 3),
                RngStream.derive(seed, "lingauss-spec").numpy,
            )
        return gen_linear_gaussian_dataset(spec, n, seed)
    raise ValidationError(f"unknown env id {env_id!r}; choose from {', '.join(ENV_IDS)}")


def audit_dataset(dataset: OfflineDataset) -> dict:
    """Return histogram and length statistics, plus the maze stitching audit."""
    lengths = np.array([t.length for t in dataset.trajectories])
    report = {
        "env_id": dataset.env_id,
        "count": len(dataset),
        "length_min": int(lengths.min()),
        "length_max": int(lengths.max()),
        "length_mean": float(lengths.mean()),
        "return_mean": float(dataset.returns.mean()),
        "return_std": float(dataset.returns.std()),
    }
    if dataset.env_id == "lingauss-v0":
        counts, edges = np.histogram(dataset.returns, bins=10)
        report["return_histogram"] = {f"{lo:.3g}..{hi:.3g}": int(n) for lo, hi, n in zip(edges, edges[1:], counts)}
    else:
        hist = Counter(float(y) for y in dataset.returns)
        report["return_histogram"] = {f"{k:g}": v for k, v in sorted(hist.items())}
    if dataset.env_id == "gridmaze-v0":
        report.update(audit_maze(GridMaze(horizon=dataset.metadata.get("horizon", 64)), dataset))
    if dataset.env_id == "connect4-v0":
        report["win_rate"] = float(np.mean(dataset.returns == 1.0))
    return report


def replay_check(dataset: OfflineDataset) -> list[str]:
    """Re-simulate every trajectory; returns the problems found (empty when all replay)."""
    problems = []
    if dataset.env_id == "gridmaze-v0":
        maze = GridMaze(horizon=dataset.metadata.get("horizon", 64))
        for i, (traj, y) in enumerate(zip(dataset.trajectories, dataset.returns)):
            if traj.length > maze.horizon:
                problems.append(f"trajectory {i}: longer than H={maze.horizon}")
            problems += [f"trajectory {i}: {p}" for p in replay_maze(maze, traj, y)]
    elif dataset.env_id == "connect4-v0":
        for i, (traj, y) in enumerate(zip(dataset.trajectories, dataset.returns)):
            problems += [f"trajectory {i}: {p}" for p in replay_connect4(traj, y)]
    return problems


__all__ = [
    "ENV_IDS",
    "ActionSpace",
    "ConnectFour",
    "Environment",
    "GridMaze",
    "LinearGaussianSpec",
    "NormalizationStats",
    "OfflineDataset",
    "StepResult",
    "audit_dataset",
    "gen_connect4_dataset",
    "gen_linear_gaussian_dataset",
    "gen_maze_dataset",
    "generate_dataset",
    "load_dataset",
    "make_env",
    "random_spec",
    "replay_check",
    "save_dataset",
]
