"""
Self-describing checkpoints: model config, parameters, normalization stats,
persistent chains and optimizer state in one torch file.
"""
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import torch

from lpt.config import ModelConfig, TrainerConfig
from lpt.envs.dataset import NormalizationStats
from lpt.errors import CheckpointError
from lpt.model import LatentPlanTransformer
from lpt.sampler import ChainStore

FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    model: LatentPlanTransformer
    stats: NormalizationStats | None
    env_id: str | None = None
    iteration: int = 0
    chain_store: ChainStore | None = None
    optimizer_state: dict | None = None
    trainer_config: TrainerConfig | None = None
    extra: dict[str, Any] | None = None


def save_checkpoint(path: str | Path, ckpt: Checkpoint) -> Path:
    """Write-then-rename, so a crash never leaves a partial checkpoint behind."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format_version": FORMAT_VERSION,
        "model_config": ckpt.model.cfg.model_dump_json(),
        "state_dict": ckpt.model.state_dict(),
        "stats": json.dumps(ckpt.stats.to_dict()) if ckpt.stats is not None else None,
        "env_id": ckpt.env_id,
        "iteration": ckpt.iteration,
        "chain_store": ckpt.chain_store.state_dict() if ckpt.chain_store is not None else None,
        "optimizer": ckpt.optimizer_state,
        "trainer_config": ckpt.trainer_config.model_dump_json() if ckpt.trainer_config is not None else None,
        "extra": json.dumps(ckpt.extra or {}),
    }
    tmp = path.with_name(path.name + ".tmp")
    torch.save(payload, tmp)
    os.replace(tmp, path)
    return path


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e
    if not isinstance(payload, dict) or payload.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"{path} is not a version-{FORMAT_VERSION} checkpoint")
    cfg = ModelConfig.model_validate_json(payload["model_config"])
    model = LatentPlanTransformer(cfg)
    try:
        model.load_state_dict(payload["state_dict"])
    except RuntimeError as e:
        raise CheckpointError(f"parameters do not match the stored config: {e}") from e
    stats = NormalizationStats.from_dict(json.loads(payload["stats"])) if payload.get("stats") else None
    store = ChainStore.from_state_dict(payload["chain_store"]) if payload.get("chain_store") else None
    trainer_cfg = (
        TrainerConfig.model_validate_json(payload["trainer_config"]) if payload.get("trainer_config") else None
    )
    return Checkpoint(
        model=model,
        stats=stats,
        env_id=payload.get("env_id"),
        iteration=int(payload.get("iteration", 0)),
        chain_store=store,
        optimizer_state=payload.get("optimizer"),
        trainer_config=trainer_cfg,
        extra=json.loads(payload.get("extra") or "{}"),
    )
