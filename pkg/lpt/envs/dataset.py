"""
Offline trajectory-return datasets and their JSONL file format.

Line 1 is a header with provenance and normalization statistics; every
following line is one record {"states": [[...], ...], "actions": [...], "return": y}.
"""
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from pydantic import ValidationError as PydanticValidationError

from lpt.errors import DatasetFormatError, ValidationError
from lpt.model import Trajectory

FORMAT_NAME = "lpt-dataset"
FORMAT_VERSION = 1
STATS_TOLERANCE = 1e-9


@dataclass(frozen=True)
class NormalizationStats:
    state_mean: np.ndarray
    state_std: np.ndarray
    return_mean: float
    return_std: float

    @classmethod
    def compute(cls, trajectories: list[Trajectory], returns: np.ndarray) -> "NormalizationStats":
        """Per-dimension state statistics over every step; constant dimensions get std 1."""
        states = np.concatenate([t.states for t in trajectories])
        state_std = states.std(axis=0)
        state_std[state_std == 0] = 1.0
        returns = np.asarray(returns, dtype=np.float64)
        return_std = float(returns.std())
        return cls(
            state_mean=states.mean(axis=0),
            state_std=state_std,
            return_mean=float(returns.mean()),
            return_std=return_std if return_std > 0 else 1.0,
        )

    def normalize_return(self, y):
        return (y - self.return_mean) / self.return_std

    def denormalize_return(self, y):
        return y * self.return_std + self.return_mean

    def normalize_states(self, states: np.ndarray) -> np.ndarray:
        return (np.asarray(states, dtype=np.float64) - self.state_mean) / self.state_std

    def to_dict(self) -> dict:
        return {
            "state_mean": self.state_mean.tolist(),
            "state_std": self.state_std.tolist(),
            "return_mean": self.return_mean,
            "return_std": self.return_std,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NormalizationStats":
        return cls(
            state_mean=np.asarray(data["state_mean"], dtype=np.float64),
            state_std=np.asarray(data["state_std"], dtype=np.float64),
            return_mean=float(data["return_mean"]),
            return_std=float(data["return_std"]),
        )

    def max_abs_diff(self, other: "NormalizationStats") -> float:
        return float(
            max(
                np.max(np.abs(self.state_mean - other.state_mean)),
                np.max(np.abs(self.state_std - other.state_std)),
                abs(self.return_mean - other.return_mean),
                abs(self.return_std - other.return_std),
            )
        )


@dataclass
class OfflineDataset:
    """D = {(tau_i, y_i)} with normalization statistics and provenance."""

    env_id: str
    state_dim: int
    discrete: bool
    action_size: int
    trajectories: list[Trajectory]
    returns: np.ndarray
    metadata: dict[str, Any] = field(default_factory=dict)
    stats: NormalizationStats | None = None

    def __post_init__(self):
        if not self.trajectories:
            raise ValidationError("a dataset needs at least one trajectory")
        self.returns = np.asarray(self.returns, dtype=np.float64).reshape(-1)
        if len(self.returns) != len(self.trajectories):
            raise ValidationError(f"{len(self.trajectories)} trajectories but {len(self.returns)} returns")
        for i, traj in enumerate(self.trajectories):
            self._validate(i, traj)
        if self.stats is None:
            self.stats = NormalizationStats.compute(self.trajectories, self.returns)

    def _validate(self, i: int, traj: Trajectory) -> None:
        if traj.states.shape[1] != self.state_dim:
            raise ValidationError(f"trajectory {i}: state dim {traj.states.shape[1]} != {self.state_dim}")
        if traj.discrete != self.discrete:
            raise ValidationError(f"trajectory {i}: action mode does not match the dataset")
        if self.discrete:
            if traj.actions.min() < 0 or traj.actions.max() >= self.action_size:
                raise ValidationError(f"trajectory {i}: action index outside [0, {self.action_size})")
        elif traj.actions.shape[1] != self.action_size:
            raise ValidationError(f"trajectory {i}: action dim {traj.actions.shape[1]} != {self.action_size}")
        if not (np.all(np.isfinite(traj.states)) and np.all(np.isfinite(traj.actions))):
            raise ValidationError(f"trajectory {i}: non-finite values")

    def __len__(self) -> int:
        return len(self.trajectories)

    @property
    def normalized_returns(self) -> np.ndarray:
        return self.stats.normalize_return(self.returns)

    def header(self) -> dict:
        return {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "env_id": self.env_id,
            "state_dim": self.state_dim,
            "action_space": {"discrete": self.discrete, "size": self.action_size},
            "metadata": self.metadata,
            "stats": self.stats.to_dict(),
            "count": len(self),
        }

    def __eq__(self, other) -> bool:
        if not isinstance(other, OfflineDataset):
            return NotImplemented
        return (
            self.header() == other.header()
            and np.array_equal(self.returns, other.returns)
            and all(a == b for a, b in zip(self.trajectories, other.trajectories))
        )


class _Header(BaseModel):
    model_config = ConfigDict(extra="forbid")

    format: str
    version: int
    env_id: str
    state_dim: int = Field(..., ge=1)
    action_space: dict[str, Any]
    metadata: dict[str, Any]
    stats: dict[str, Any]
    count: int = Field(..., ge=1)


class _Record(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    states: list[list[float]] = Field(..., min_length=1)
    actions: list[Any] = Field(..., min_length=1)
    return_: float = Field(..., alias="return")


def _record_line(traj: Trajectory, y: float) -> str:
    record = {"states": traj.states.tolist(), "actions": traj.actions.tolist(), "return": float(y)}
    return json.dumps(record, sort_keys=True)


def save_dataset(dataset: OfflineDataset, path: str | Path) -> Path:
    """Write the dataset as JSONL; identical datasets give byte-identical files."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w") as f:
        f.write(json.dumps(dataset.header(), sort_keys=True) + "\n")
        for traj, y in zip(dataset.trajectories, dataset.returns):
            f.write(_record_line(traj, y) + "\n")
    tmp.replace(path)
    return path


def _parse_line(raw: str, line_number: int) -> dict:
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as e:
        raise DatasetFormatError(f"invalid JSON ({e.msg})", line_number) from e
    if not isinstance(data, dict):
        raise DatasetFormatError("expected a JSON object", line_number)
    return data


def load_dataset(path: str | Path) -> OfflineDataset:
    """Read and validate a JSONL dataset; every problem names its 1-based line."""
    path = Path(path)
    if not path.exists():
        raise DatasetFormatError(f"dataset file not found: {path}")
    with open(path, "r") as f:
        lines = f.read().split("\n")
    if lines and lines[-1] == "":
        lines = lines[:-1]
    if not lines:
        raise DatasetFormatError("empty dataset file", 1)
    try:
        header = _Header(**_parse_line(lines[0], 1))
    except PydanticValidationError as e:
        raise DatasetFormatError(f"bad header: {e.errors()[0]['msg']}", 1) from e
    if header.format != FORMAT_NAME or header.version != FORMAT_VERSION:
        raise DatasetFormatError(f"unsupported format {header.format!r} v{header.version}", 1)
    discrete = bool(header.action_space.get("discrete"))
    size = int(header.action_space.get("size", 0))

    trajectories, returns = [], []
    for i, raw in enumerate(lines[1:], start=2):
        try:
            record = _Record(**_parse_line(raw, i))
            traj = Trajectory(np.asarray(record.states), np.asarray(record.actions))
        except PydanticValidationError as e:
            err = e.errors()[0]
            where = ".".join(str(p) for p in err["loc"])
            raise DatasetFormatError(f"bad record field {where}: {err['msg']}", i) from e
        except (ValidationError, ValueError) as e:
            raise DatasetFormatError(str(e), i) from e
        trajectories.append(traj)
        returns.append(record.return_)
    if len(trajectories) != header.count:
        raise DatasetFormatError(
            f"header declares {header.count} records but the file holds {len(trajectories)}", len(lines) + 1
        )
    try:
        stats = NormalizationStats.from_dict(header.stats)
    except (KeyError, TypeError, ValueError) as e:
        raise DatasetFormatError(f"bad header stats: {e}", 1) from e
    if stats.state_mean.shape != (header.state_dim,) or stats.state_std.shape != (header.state_dim,):
        raise ValidationError(f"header stats do not match state_dim={header.state_dim}")
    try:
        dataset = OfflineDataset(
            env_id=header.env_id,
            state_dim=header.state_dim,
            discrete=discrete,
            action_size=size,
            trajectories=trajectories,
            returns=np.asarray(returns),
            metadata=header.metadata,
            stats=stats,
        )
    except ValidationError as e:
        raise DatasetFormatError(str(e)) from e
    recomputed = NormalizationStats.compute(trajectories, dataset.returns)
    if recomputed.max_abs_diff(stats) > STATS_TOLERANCE:
        raise ValidationError("header normalization stats do not match the records")
    return dataset
