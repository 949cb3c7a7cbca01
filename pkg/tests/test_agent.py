"""
Tests for planning as inference, evaluation and the behavior-cloning baseline
"""
import numpy as np
import pytest
import torch

from lpt import config
from lpt.agent import (
    BaselinePolicy,
    PlanningAgent,
    create_agent,
    evaluate,
    evaluate_baseline,
    plan_and_rollout,
    rollout_baseline,
    train_baseline,
)
from lpt.checkpoint import save_checkpoint
from lpt.config import EvalConfig, LangevinConfig
from lpt.envs import ConnectFour, GridMaze
from lpt.errors import ValidationError
from lpt.model import LatentPlanTransformer
from lpt.numerics import RngStream
from lpt.trainer import Trainer

PLAN_CFG = LangevinConfig(step_size=0.3, num_steps=8)


@pytest.fixture
def maze_agent(maze_dataset, maze_model_cfg) -> PlanningAgent:
    torch.manual_seed(0)
    model = LatentPlanTransformer(maze_model_cfg)
    model.eval()
    return PlanningAgent(model, maze_dataset.stats, "gridmaze-v0", float(maze_dataset.returns.max()))


def test_rollout_is_repeatable(maze_agent):
    """Deterministic env and actions with a fixed seed give identical rollouts"""
    first = plan_and_rollout(GridMaze(), 1.0, maze_agent, PLAN_CFG, RngStream(3, 1))
    second = plan_and_rollout(GridMaze(), 1.0, maze_agent, PLAN_CFG, RngStream(3, 1))
    assert first.trajectory == second.trajectory
    assert first.achieved_return == second.achieved_return
    assert torch.equal(first.z0, second.z0)
    assert first.log_probs == second.log_probs
    assert 1 <= first.length <= 64


def test_plan_is_fixed_during_rollout(maze_agent):
    """The plan has the same value before and after the episode"""
    z0 = maze_agent.plan(1.0, PLAN_CFG, RngStream(0))
    before = z0.clone()
    result = maze_agent.rollout(GridMaze(), z0, 1.0, np.random.default_rng(0), RngStream(1))
    assert torch.equal(z0, before)
    assert torch.equal(result.z0, before)


def test_stochastic_actions(maze_agent):
    result = plan_and_rollout(GridMaze(), 1.0, maze_agent, PLAN_CFG, RngStream(4), deterministic_actions=False)
    assert all(0 <= a < 5 for a in result.trajectory.actions)
    assert all(lp <= 0.0 for lp in result.log_probs)


def test_act_matches_argmax(maze_agent, maze_dataset):
    traj = maze_dataset.trajectories[0]
    z = torch.zeros(maze_agent.model.latent_dim, dtype=torch.float64)
    action = maze_agent.act(traj.states[:1], np.zeros(0, dtype=np.int64), z)
    normalized = maze_dataset.stats.normalize_states(traj.states[:1])
    with torch.no_grad():
        logits = maze_agent.model.action_distribution(normalized, np.zeros(0, dtype=np.int64), z).logits
    assert action == int(torch.argmax(logits))
    with pytest.raises(ValidationError):
        maze_agent.act(traj.states[:1], np.zeros(0, dtype=np.int64), z, deterministic=False)


def test_evaluate_single_episode(maze_agent):
    """episodes=1 summarizes exactly one rollout per weight"""
    cfg = EvalConfig(episodes=1, sampler=PLAN_CFG)
    summaries, frame = evaluate(GridMaze(), maze_agent, None, 1, (1.0, 4.0), cfg)
    assert set(summaries) == {"1", "4"}
    assert all(s["episodes"] == 1 for s in summaries.values())
    assert len(frame) == 2
    assert summaries["1"]["std_return"] == 0.0


def test_environment_mismatch(maze_agent):
    with pytest.raises(ValidationError):
        plan_and_rollout(ConnectFour(), 1.0, maze_agent, PLAN_CFG, RngStream(0))


def test_target_must_be_finite(maze_agent):
    with pytest.raises(ValidationError):
        maze_agent.resolve_target(float("inf"))
    assert PlanningAgent(maze_agent.model, maze_agent.stats).resolve_target(0.5) == 0.5
    with pytest.raises(ValidationError):
        PlanningAgent(maze_agent.model, maze_agent.stats).resolve_target(None)


def test_create_agent_from_checkpoint(tmp_path, maze_dataset, maze_model_cfg, fast_trainer_cfg):
    torch.manual_seed(0)
    trainer = Trainer(LatentPlanTransformer(maze_model_cfg), maze_dataset, fast_trainer_cfg)
    path = save_checkpoint(tmp_path / "model.pt", trainer.checkpoint())
    agent = create_agent(path)
    assert agent.env_id == "gridmaze-v0"
    assert agent.default_target == float(maze_dataset.returns.max())
    assert not agent.model.training


def test_baseline_conditioning_is_live(maze_dataset, maze_model_cfg):
    """Changing the target return changes the baseline's action distribution"""
    torch.manual_seed(0)
    policy = BaselinePolicy(maze_model_cfg, maze_dataset.stats)
    states = maze_dataset.stats.normalize_states(maze_dataset.trajectories[0].states[:1])
    with torch.no_grad():
        low = policy.action_distribution(states, np.zeros(0, dtype=np.int64), -1.0).probs
        high = policy.action_distribution(states, np.zeros(0, dtype=np.int64), 2.0).probs
    assert not torch.allclose(low, high)


def test_baseline_uses_configured_dtype(maze_dataset, maze_model_cfg, monkeypatch):
    """The baseline follows config.DTYPE like the LPT does"""
    monkeypatch.setattr(config, "DTYPE", torch.float32)
    policy = BaselinePolicy(maze_model_cfg, maze_dataset.stats)
    model = LatentPlanTransformer(maze_model_cfg)
    assert {p.dtype for p in policy.parameters()} == {torch.float32}
    assert policy._dtype() == model._dtype() == torch.float32


def test_baseline_training_and_rollout(maze_dataset, maze_model_cfg, fast_trainer_cfg):
    policy = train_baseline(maze_dataset, maze_model_cfg, fast_trainer_cfg)
    first = rollout_baseline(GridMaze(), policy, 1.0, RngStream(2))
    second = rollout_baseline(GridMaze(), policy, 1.0, RngStream(2))
    assert first.trajectory == second.trajectory
    assert first.z0 is None

    summary, frame = evaluate_baseline(GridMaze(), policy, 1.0, 2, EvalConfig(episodes=2))
    assert summary["episodes"] == 2
    assert len(frame) == 2
