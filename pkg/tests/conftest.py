"""
Shared fixtures for the test suite
"""
import numpy as np
import pytest
import torch

from lpt import console
from lpt.config import ModelConfig, TrainerConfig
from lpt.envs import GridMaze, gen_maze_dataset
from lpt.envs.lingauss import LinearGaussianSpec, random_spec
from lpt.model import LatentPlanTransformer, Trajectory
from lpt.numerics import RngStream


@pytest.fixture(autouse=True)
def quiet_console():
    console.set_level("WARNING")
    yield
    console.set_level("INFO")


@pytest.fixture
def small_cfg() -> ModelConfig:
    """Continuous-action model small enough for finite differences."""
    return ModelConfig(
        state_dim=3,
        action_dim=2,
        latent_dim=8,
        context_length=3,
        num_layers=1,
        num_heads=2,
        hidden_width=8,
        return_hidden=8,
        unet_base_width=4,
        unet_multipliers=(1, 2),
        activation="gelu",
    )


@pytest.fixture
def discrete_cfg(small_cfg) -> ModelConfig:
    return small_cfg.updated(discrete_actions=True, action_dim=7)


@pytest.fixture
def small_model(small_cfg) -> LatentPlanTransformer:
    torch.manual_seed(0)
    return LatentPlanTransformer(small_cfg)


@pytest.fixture
def random_trajectories(small_cfg):
    rng = np.random.default_rng(0)
    return [
        Trajectory(rng.normal(size=(n, small_cfg.state_dim)), rng.normal(size=(n, small_cfg.action_dim)))
        for n in (1, 4, 6)
    ]


@pytest.fixture
def lingauss_spec() -> LinearGaussianSpec:
    return random_spec(4, 2, 3, RngStream.derive(7, "test-spec").numpy)


@pytest.fixture(scope="session")
def maze_dataset():
    return gen_maze_dataset(GridMaze(), 40, seed=3)


@pytest.fixture
def fast_trainer_cfg() -> TrainerConfig:
    return TrainerConfig(iterations=3, batch_size=8, seed=0, checkpoint_every=2)


@pytest.fixture
def maze_model_cfg() -> ModelConfig:
    return ModelConfig(
        state_dim=64,
        action_dim=5,
        discrete_actions=True,
        latent_dim=8,
        context_length=4,
        num_layers=1,
        hidden_width=16,
        return_hidden=16,
        unet_base_width=4,
        unet_multipliers=(1, 2),
    )
