"""
Offline learning: posterior sampling per mini-batch followed by the
gradient update of the prior transform, trajectory generator and return
predictor.
"""
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import pandas as pd
import torch

from lpt import console
from lpt.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from lpt.config import TrainerConfig
from lpt.envs.dataset import OfflineDataset
from lpt.errors import CheckpointError, NonFiniteError, ValidationError
from lpt.model import ContextWindows, LatentPlanTransformer
from lpt.numerics import RngStream, gaussian_sample
from lpt.sampler import ChainStore, sample_posterior


@dataclass
class TrainingRecord:
    iteration: int
    action_nll: float
    return_nll: float
    grad_norm_prior: float
    grad_norm_generator: float
    grad_norm_return: float
    wall_clock: float


def build_optimizer(model: LatentPlanTransformer, cfg: TrainerConfig) -> torch.optim.Optimizer:
    """One optimizer, one parameter group per component with its own learning rate."""
    rates = {"prior": cfg.lr_prior, "generator": cfg.lr_generator, "return": cfg.lr_return}
    groups = [
        {"params": params, "lr": rates[name], "name": name}
        for name, params in model.parameter_groups().items()
        if params
    ]
    if cfg.optimizer == "sgd":
        return torch.optim.SGD(groups, lr=cfg.lr_generator)
    return torch.optim.Adam(groups, lr=cfg.lr_generator)


class Trainer:
    """
    Holds the model, optimizer and persistent chains for one training run.

    Args:
        model: Parameters theta, updated in place
        dataset: Offline (tau, y) pairs; returns are normalized with its stats
        cfg: Trainer configuration
        chain_store: Existing chains to continue from (resume)
    """

    def __init__(
        self,
        model: LatentPlanTransformer,
        dataset: OfflineDataset,
        cfg: TrainerConfig,
        chain_store: ChainStore | None = None,
    ):
        space_ok = (
            model.cfg.state_dim == dataset.state_dim
            and model.cfg.discrete_actions == dataset.discrete
            and model.cfg.action_dim == dataset.action_size
        )
        if not space_ok:
            raise ValidationError("model dimensions do not match the dataset's state/action spaces")
        self.model = model
        self.dataset = dataset
        self.cfg = cfg
        self.stats = dataset.stats
        self.store = chain_store or ChainStore(len(dataset), model.latent_dim, cfg.seed)
        self.optimizer = build_optimizer(model, cfg)
        self.iteration = 0
        self.records: list[TrainingRecord] = []
        self._targets = torch.as_tensor(dataset.normalized_returns, dtype=next(model.parameters()).dtype)

    def batch(self, indices) -> tuple[ContextWindows, torch.Tensor]:
        trajs = [self.dataset.trajectories[i] for i in indices]
        return self.model.windows_for(trajs, self.stats), self._targets[list(indices)]

    def batch_indices(self, iteration: int) -> list[int]:
        """Mini-batch for a 0-based iteration: consecutive slices of a per-epoch seeded permutation."""
        n = len(self.dataset)
        size = min(self.cfg.batch_size, n)
        per_epoch = -(-n // size)
        epoch, slot = divmod(iteration, per_epoch)
        perm = RngStream.derive(self.cfg.seed, "shuffle", epoch).numpy.permutation(n)
        return sorted(int(i) for i in perm[slot * size:(slot + 1) * size])

    def _initial_chains(self, indices) -> torch.Tensor:
        if self.cfg.pmc_enabled:
            return self.store.get_batch(indices)
        rng = RngStream.derive(self.cfg.seed, "fresh-init", self.iteration)
        return gaussian_sample([len(indices), self.model.latent_dim], rng)

    def _grad_norms(self) -> dict[str, float]:
        norms = {}
        for name, params in self.model.parameter_groups().items():
            grads = [p.grad for p in params if p.grad is not None]
            norms[name] = float(torch.sqrt(sum((g**2).sum() for g in grads))) if grads else 0.0
        return norms

    def train_step(self, indices) -> TrainingRecord:
        """
        One iteration: sample z0_i ~ p(z0 | tau_i, y_i) by Langevin, then ascend
        log p_beta(tau|z) + log p_gamma(y|z) at z = U_alpha(z0_i) with z0_i held fixed.
        """
        indices = list(indices)
        if not indices:
            raise ValidationError("batch must be non-empty")
        start = time.perf_counter()
        windows, y = self.batch(indices)
        rng = RngStream.derive(self.cfg.seed, "posterior", self.iteration)
        z0 = sample_posterior(self.model, windows, y, self.cfg.sampler, self._initial_chains(indices), rng)
        z0 = z0.detach()

        self.optimizer.zero_grad(set_to_none=True)
        z = self.model.prior_transform(z0)
        traj_ll = self.model.traj_loglik(windows, z)
        ret_ll = self.model.return_loglik(y, z)
        loss = -(traj_ll + ret_ll).mean()
        loss.backward()

        norms = self._grad_norms()
        if not all(np.isfinite(v) for v in norms.values()) or not torch.isfinite(loss):
            raise NonFiniteError(
                f"non-finite gradient at iteration {self.iteration + 1}",
                {"loss": float(loss), **{f"grad_norm_{k}": v for k, v in norms.items()}},
            )
        if self.cfg.grad_clip is not None:
            if self.cfg.clip_per_group:
                for params in self.model.parameter_groups().values():
                    if params:
                        torch.nn.utils.clip_grad_norm_(params, self.cfg.grad_clip)
            else:
                torch.nn.utils.clip_grad_norm_(self.model.parameters(), self.cfg.grad_clip)
        self.optimizer.step()
        self.store.update_batch(indices, z0)

        self.iteration += 1
        record = TrainingRecord(
            iteration=self.iteration,
            action_nll=float(-traj_ll.sum() / len(windows)),
            return_nll=float(-ret_ll.mean()),
            grad_norm_prior=norms["prior"],
            grad_norm_generator=norms["generator"],
            grad_norm_return=norms["return"],
            wall_clock=time.perf_counter() - start,
        )
        self.records.append(record)
        return record

    def checkpoint(self, env_id: str | None = None) -> Checkpoint:
        return Checkpoint(
            model=self.model,
            stats=self.stats,
            env_id=env_id or self.dataset.env_id,
            iteration=self.iteration,
            chain_store=self.store,
            optimizer_state=self.optimizer.state_dict(),
            trainer_config=self.cfg,
            extra={"max_return": float(self.dataset.returns.max())},
        )

    @classmethod
    def resume(cls, path: str | Path, dataset: OfflineDataset, cfg: TrainerConfig | None = None) -> "Trainer":
        ckpt = load_checkpoint(path)
        cfg = cfg or ckpt.trainer_config
        if cfg is None:
            raise CheckpointError(f"{path} holds no trainer state to resume from")
        if ckpt.chain_store is not None and ckpt.chain_store.n_examples != len(dataset):
            raise CheckpointError("the checkpoint's chain store was built for a different dataset")
        trainer = cls(ckpt.model, dataset, cfg, chain_store=ckpt.chain_store)
        if ckpt.optimizer_state is not None:
            trainer.optimizer.load_state_dict(ckpt.optimizer_state)
            # configured learning rates win over the stored ones
            for group in trainer.optimizer.param_groups:
                group["lr"] = {"prior": cfg.lr_prior, "generator": cfg.lr_generator, "return": cfg.lr_return}[
                    group["name"]
                ]
        trainer.iteration = ckpt.iteration
        return trainer

    def log_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(r) for r in self.records], columns=list(TrainingRecord.__dataclass_fields__))


def fit(
    dataset: OfflineDataset,
    model: LatentPlanTransformer,
    cfg: TrainerConfig,
    checkpoint_path: str | Path | None = None,
    log_path: str | Path | None = None,
    trainer: Trainer | None = None,
) -> tuple[LatentPlanTransformer, pd.DataFrame]:
    """
    Train until ``cfg.iterations`` total iterations (a resumed trainer keeps its counter).

    Returns:
        The trained model and the training log of this run
    """
    torch.set_num_threads(cfg.threads)
    trainer = trainer or Trainer(model, dataset, cfg)
    remaining = max(0, cfg.iterations - trainer.iteration)
    console.info(
        f"Training for {remaining} iterations (batch {cfg.batch_size}, "
        f"{'PMC' if cfg.pmc_enabled else 'fresh'} chains, N={cfg.sampler.num_steps}, s={cfg.sampler.step_size})"
    )
    for _ in console.progress(range(remaining), desc="train", total=remaining):
        record = trainer.train_step(trainer.batch_indices(trainer.iteration))
        if record.iteration % 100 == 0:
            console.debug(
                f"iter {record.iteration}: action NLL {record.action_nll:.4f}, return NLL {record.return_nll:.4f}"
            )
        if checkpoint_path is not None and record.iteration % cfg.checkpoint_every == 0:
            save_checkpoint(checkpoint_path, trainer.checkpoint())
    if checkpoint_path is not None:
        save_checkpoint(checkpoint_path, trainer.checkpoint())
    log = trainer.log_frame()
    if log_path is not None:
        Path(log_path).parent.mkdir(parents=True, exist_ok=True)
        log.to_csv(log_path, index=False)
    return trainer.model, log


def estimate_learning_gradient(
    model: LatentPlanTransformer,
    windows: ContextWindows,
    y: torch.Tensor | float,
    z0_samples: torch.Tensor,
    chunk_size: int = 4096,
) -> dict[str, torch.Tensor]:
    """
    Monte-Carlo estimate of grad_theta log p_theta(tau, y) for one example:
    the mean over posterior samples z0 of grad_theta [log p_beta(tau|U(z0)) + log p_gamma(y|U(z0))],
    with the samples treated as constants.

    Args:
        windows: Windows of a single trajectory
        z0_samples: (S, d) posterior draws

    Returns:
        Parameter name -> gradient estimate
    """
    if windows.n_owners != 1:
        raise ValidationError("estimate_learning_gradient works on a single trajectory")
    params = dict(model.named_parameters())
    totals = {name: torch.zeros_like(p) for name, p in params.items()}
    z0_samples = z0_samples.detach()
    n = z0_samples.shape[0]
    for start in range(0, n, chunk_size):
        chunk = z0_samples[start:start + chunk_size]
        b = chunk.shape[0]
        reps = windows.repeat(b)
        y_b = torch.as_tensor(y, dtype=chunk.dtype).reshape(-1).expand(b)
        with torch.enable_grad():
            z = model.prior_transform(chunk)
            total = (model.traj_loglik(reps, z) + model.return_loglik(y_b, z)).sum()
            grads = torch.autograd.grad(total, list(params.values()), allow_unused=True)
        for (name, _), g in zip(params.items(), grads):
            if g is not None:
                totals[name] += g
    return {name: g / n for name, g in totals.items()}
