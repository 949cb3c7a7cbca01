"""
Planning as inference: infer a plan z0 for a target return, then roll the
trajectory generator out with z held fixed. Also the evaluation harness and
the return-conditioned behavior-cloning baseline.
"""
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import pandas as pd
import torch
import torch.nn as nn

from lpt import config, console
from lpt.checkpoint import load_checkpoint
from lpt.config import EvalConfig, LangevinConfig, ModelConfig, TrainerConfig
from lpt.envs.base import Environment
from lpt.envs.dataset import NormalizationStats, OfflineDataset
from lpt.errors import ValidationError
from lpt.model import (
    ContextWindows,
    LatentPlanTransformer,
    TransformerGenerator,
    Trajectory,
    action_distribution_from_head,
    build_windows,
    context_window,
)
from lpt.numerics import RngStream, gaussian_sample
from lpt.sampler import sample_plan

DistributionFn = Callable[[np.ndarray, np.ndarray], torch.distributions.Distribution]


@dataclass
class RolloutResult:
    trajectory: Trajectory
    achieved_return: float
    target_return: float
    z0: torch.Tensor | None
    log_probs: list[float] = field(default_factory=list)

    @property
    def success(self) -> bool:
        return self.achieved_return > 0

    @property
    def length(self) -> int:
        return self.trajectory.length


def _select_action(
    dist: torch.distributions.Distribution, discrete: bool, deterministic: bool, rng: RngStream
) -> tuple[int | np.ndarray, float]:
    if discrete:
        if deterministic:
            action = torch.argmax(dist.logits)
        else:
            action = torch.multinomial(dist.probs, 1, generator=rng.torch)[0]
        return int(action), float(dist.log_prob(action))
    mean = dist.mean
    action = mean if deterministic else mean + gaussian_sample(list(mean.shape), rng, mean.dtype)
    return action.numpy().copy(), float(dist.log_prob(action))


def _rollout(
    env: Environment,
    dist_fn: DistributionFn,
    context_length: int,
    stats: NormalizationStats,
    deterministic: bool,
    env_rng: np.random.Generator,
    act_rng: RngStream,
) -> tuple[Trajectory, float, list[float]]:
    """Run one episode; only the last K states and K-1 actions are kept for the policy."""
    discrete = env.action_space.discrete
    state = env.reset(env_rng)
    recent_states: deque = deque(maxlen=context_length)
    recent_actions: deque = deque(maxlen=context_length - 1)
    states, actions, log_probs = [], [], []
    done = False
    with torch.no_grad():
        while not done and len(actions) < env.horizon:
            recent_states.append(stats.normalize_states(state))
            empty = np.zeros((0,) if discrete else (0, env.action_space.size))
            prev = np.array(recent_actions) if recent_actions else empty
            dist = dist_fn(np.array(recent_states), prev)
            action, log_prob = _select_action(dist, discrete, deterministic, act_rng)
            states.append(state)
            actions.append(action)
            log_probs.append(log_prob)
            recent_actions.append(action)
            result = env.step(action)
            state, done = result.state, result.done
    acts = np.array(actions, dtype=np.int64) if discrete else np.array(actions)
    return Trajectory(np.array(states), acts), env.episode_return(), log_probs


class PlanningAgent:
    """
    A trained model plus the dataset statistics it was trained with.

    Args:
        model: Trained LatentPlanTransformer
        stats: Normalization statistics of the training dataset
        env_id: Environment the model was trained on
        default_target: Raw target return used when none is given
    """

    def __init__(
        self,
        model: LatentPlanTransformer,
        stats: NormalizationStats,
        env_id: str | None = None,
        default_target: float | None = None,
    ):
        self.model = model
        self.stats = stats
        self.env_id = env_id
        self.default_target = default_target

    def check_env(self, env: Environment) -> None:
        cfg = self.model.cfg
        space = env.action_space
        if env.state_dim != cfg.state_dim or space.discrete != cfg.discrete_actions or space.size != cfg.action_dim:
            raise ValidationError(
                f"environment {env.env_id} (d_s={env.state_dim}, actions={space.size}) does not match "
                f"the checkpoint (d_s={cfg.state_dim}, actions={cfg.action_dim})"
            )

    def resolve_target(self, y_target: float | None) -> float:
        if y_target is None:
            if self.default_target is None:
                raise ValidationError("no target return given and the checkpoint stores no dataset maximum")
            y_target = self.default_target
        if not np.isfinite(y_target):
            raise ValidationError(f"target return must be finite, got {y_target}")
        return float(y_target)

    def plan(self, y_target: float, cfg: LangevinConfig, rng: RngStream) -> torch.Tensor:
        """z0 ~ p(z0 | y) on the normalized scale, tempered by cfg.guidance_weight."""
        return sample_plan(self.model, self.stats.normalize_return(y_target), cfg, rng)

    def distribution_fn(self, z: torch.Tensor) -> DistributionFn:
        def dist(states, actions):
            return self.model.action_distribution(states, actions, z)

        return dist

    def act(
        self,
        states: np.ndarray,
        actions: np.ndarray,
        z: torch.Tensor,
        deterministic: bool = True,
        rng: RngStream | None = None,
    ) -> int | np.ndarray:
        """Next action for raw ``states`` (k, d_s) and the k - 1 previous ``actions`` under plan z."""
        if not deterministic and rng is None:
            raise ValidationError("stochastic actions need a random stream")
        normalized = self.stats.normalize_states(np.asarray(states, dtype=np.float64))
        with torch.no_grad():
            dist = self.model.action_distribution(normalized, actions, z)
        action, _ = _select_action(dist, self.model.cfg.discrete_actions, deterministic, rng)
        return action

    def rollout(
        self,
        env: Environment,
        z0: torch.Tensor,
        y_target: float,
        env_rng: np.random.Generator,
        act_rng: RngStream,
        deterministic: bool = True,
    ) -> RolloutResult:
        with torch.no_grad():
            z = self.model.prior_transform(z0)
        traj, achieved, log_probs = _rollout(
            env, self.distribution_fn(z), self.model.cfg.context_length, self.stats, deterministic, env_rng, act_rng
        )
        return RolloutResult(traj, achieved, y_target, z0, log_probs)


def plan_and_rollout(
    env: Environment,
    y_target: float | None,
    agent: PlanningAgent,
    cfg: LangevinConfig,
    rng: RngStream,
    deterministic_actions: bool = True,
    env_rng: np.random.Generator | None = None,
) -> RolloutResult:
    """
    Infer z0 once for ``y_target`` (raw scale), then act with z = U(z0) fixed for
    the whole episode.
    """
    agent.check_env(env)
    y = agent.resolve_target(y_target)
    z0 = agent.plan(y, cfg, rng)
    env_rng = env_rng if env_rng is not None else RngStream.derive(rng.master_seed, "env", rng.stream_id).numpy
    act_rng = RngStream.derive(rng.master_seed, "act", rng.stream_id)
    return agent.rollout(env, z0, y, env_rng, act_rng, deterministic_actions)


def summarize(results: list[RolloutResult]) -> dict:
    returns = np.array([r.achieved_return for r in results])
    return {
        "episodes": len(results),
        "mean_return": float(returns.mean()),
        "std_return": float(returns.std()),
        "success_rate": float(np.mean([r.success for r in results])),
        "mean_length": float(np.mean([r.length for r in results])),
    }


def evaluate(
    env: Environment,
    agent: PlanningAgent,
    y_target: float | None,
    episodes: int,
    w_list: tuple[float, ...],
    cfg: EvalConfig | None = None,
) -> tuple[dict[str, dict], pd.DataFrame]:
    """
    Run ``episodes`` fresh plan-and-rollout episodes for each guidance weight.

    Episode i uses the same environment stream for every w, so weights are
    compared on identical starts and opponent randomness.

    Returns:
        ({w: summary}, per-episode DataFrame)
    """
    if episodes < 1:
        raise ValidationError("episodes must be >= 1")
    cfg = cfg or EvalConfig()
    y = agent.resolve_target(y_target)
    summaries, rows = {}, []
    for w in w_list:
        sampler_cfg = cfg.sampler.updated(guidance_weight=w)
        results = []
        for i in console.progress(range(episodes), desc=f"eval w={w:g}", total=episodes):
            env_rng = RngStream.derive(cfg.seed, "eval-env", i).numpy
            rng = RngStream.derive(cfg.seed, f"eval-plan-w{w:g}", i)
            result = plan_and_rollout(env, y, agent, sampler_cfg, rng, cfg.deterministic_actions, env_rng)
            results.append(result)
            rows.append(
                {
                    "w": w,
                    "episode": i,
                    "target_return": y,
                    "return": result.achieved_return,
                    "success": result.success,
                    "length": result.length,
                }
            )
        summaries[f"{w:g}"] = summarize(results)
    return summaries, pd.DataFrame(rows)


def create_agent(checkpoint_path: str | Path) -> PlanningAgent:
    """Factory function to create an agent from a training checkpoint"""
    ckpt = load_checkpoint(checkpoint_path)
    if ckpt.stats is None:
        raise ValidationError(f"{checkpoint_path} holds no normalization statistics")
    ckpt.model.eval()
    return PlanningAgent(ckpt.model, ckpt.stats, ckpt.env_id, (ckpt.extra or {}).get("max_return"))


# ---------------------------------------------------------------------------
# Return-conditioned behavior cloning
# ---------------------------------------------------------------------------


class BaselinePolicy(nn.Module):
    """
    The trajectory generator architecture conditioned on the normalized return
    (one cross-attention token) instead of a latent plan.
    """

    def __init__(self, cfg: ModelConfig, stats: NormalizationStats):
        super().__init__()
        self.cfg = cfg
        self.stats = stats
        self.generator = TransformerGenerator(cfg, conditioning_dim=1)
        self.to(config.DTYPE)

    def _dtype(self) -> torch.dtype:
        return next(self.parameters()).dtype

    def traj_loglik(self, windows: ContextWindows, y: torch.Tensor) -> torch.Tensor:
        out = self.generator(windows, y[windows.owner].reshape(-1, 1))
        dist = action_distribution_from_head(out, self.cfg.discrete_actions)
        per_window = dist.log_prob(windows.targets)
        return torch.zeros(windows.n_owners, dtype=per_window.dtype).index_add(0, windows.owner, per_window)

    def action_distribution(self, states, actions, y_norm: float) -> torch.distributions.Distribution:
        single = context_window(states, actions, self.cfg, self._dtype())
        out = self.generator(single, torch.full((1, 1), float(y_norm), dtype=self._dtype()))[0]
        return action_distribution_from_head(out, self.cfg.discrete_actions)


def train_baseline(dataset: OfflineDataset, model_cfg: ModelConfig, cfg: TrainerConfig) -> BaselinePolicy:
    """Action maximum likelihood on (tau, y) pairs with the LPT's iterations, batch size and generator rate."""
    torch.manual_seed(cfg.seed)
    policy = BaselinePolicy(model_cfg, dataset.stats)
    optimizer = torch.optim.Adam(policy.parameters(), lr=cfg.lr_generator)
    targets = torch.as_tensor(dataset.normalized_returns, dtype=policy._dtype())
    n = len(dataset)
    size = min(cfg.batch_size, n)
    per_epoch = -(-n // size)
    for it in console.progress(range(cfg.iterations), desc="train BC", total=cfg.iterations):
        epoch, slot = divmod(it, per_epoch)
        perm = RngStream.derive(cfg.seed, "baseline-shuffle", epoch).numpy.permutation(n)
        idx = sorted(int(i) for i in perm[slot * size:(slot + 1) * size])
        windows = build_windows(
            [dataset.trajectories[i] for i in idx],
            model_cfg.context_length,
            model_cfg.discrete_actions,
            dataset.stats.state_mean,
            dataset.stats.state_std,
        )
        optimizer.zero_grad(set_to_none=True)
        loss = -policy.traj_loglik(windows, targets[idx]).mean()
        loss.backward()
        if cfg.grad_clip is not None:
            torch.nn.utils.clip_grad_norm_(policy.parameters(), cfg.grad_clip)
        optimizer.step()
    policy.eval()
    return policy


def rollout_baseline(
    env: Environment,
    policy: BaselinePolicy,
    y_target: float,
    rng: RngStream,
    deterministic_actions: bool = True,
    env_rng: np.random.Generator | None = None,
) -> RolloutResult:
    y_norm = policy.stats.normalize_return(y_target)

    def dist(states, actions):
        return policy.action_distribution(states, actions, y_norm)

    env_rng = env_rng if env_rng is not None else RngStream.derive(rng.master_seed, "env", rng.stream_id).numpy
    traj, achieved, log_probs = _rollout(
        env, dist, policy.cfg.context_length, policy.stats, deterministic_actions, env_rng, rng
    )
    return RolloutResult(traj, achieved, y_target, None, log_probs)


def evaluate_baseline(
    env: Environment,
    policy: BaselinePolicy,
    y_target: float,
    episodes: int,
    cfg: EvalConfig | None = None,
) -> tuple[dict, pd.DataFrame]:
    """Same episode streams as ``evaluate``, so both arms face identical starts."""
    cfg = cfg or EvalConfig()
    results, rows = [], []
    for i in console.progress(range(episodes), desc="eval BC", total=episodes):
        env_rng = RngStream.derive(cfg.seed, "eval-env", i).numpy
        result = rollout_baseline(
            env, policy, y_target, RngStream.derive(cfg.seed, "eval-bc", i), cfg.deterministic_actions, env_rng
        )
        results.append(result)
        rows.append({"episode": i, "return": result.achieved_return, "success": result.success})
    return summarize(results), pd.DataFrame(rows)
