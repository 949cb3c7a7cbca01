"""
Environment interface: <S, A, H, Tr, r, rho> with the return known only at
episode end.
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ActionSpace:
    """Continuous ``size``-dimensional actions, or ``size`` discrete choices."""

    discrete: bool
    size: int

    def to_dict(self) -> dict:
        return {"discrete": self.discrete, "size": self.size}


@dataclass(frozen=True)
class StepResult:
    state: np.ndarray
    done: bool


class Environment(ABC):
    env_id: str = ""
    horizon: int = 1

    @property
    @abstractmethod
    def state_dim(self) -> int: ...

    @property
    @abstractmethod
    def action_space(self) -> ActionSpace: ...

    @abstractmethod
    def reset(self, rng: np.random.Generator) -> np.ndarray:
        """Start an episode from rho; ``rng`` also drives any stochastic dynamics."""

    @abstractmethod
    def step(self, action) -> StepResult: ...

    @abstractmethod
    def episode_return(self) -> float:
        """Total return of the current episode (final once ``done``)."""

    def is_legal(self, action) -> bool:
        return True
