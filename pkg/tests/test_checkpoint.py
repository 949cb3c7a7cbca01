"""
Tests for saving and loading checkpoints
"""
import pytest
import torch

from lpt.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from lpt.errors import CheckpointError
from lpt.model import LatentPlanTransformer
from lpt.trainer import Trainer


def test_round_trip_preserves_outputs(tmp_path, maze_dataset, maze_model_cfg, fast_trainer_cfg):
    """save then load gives identical forward outputs on a fixed batch"""
    torch.manual_seed(0)
    trainer = Trainer(LatentPlanTransformer(maze_model_cfg), maze_dataset, fast_trainer_cfg)
    trainer.train_step(trainer.batch_indices(0))
    path = save_checkpoint(tmp_path / "model.pt", trainer.checkpoint())
    loaded = load_checkpoint(path)

    windows = trainer.model.windows_for(maze_dataset.trajectories[:3], maze_dataset.stats)
    z0 = torch.randn(3, maze_model_cfg.latent_dim, dtype=torch.float64, generator=torch.Generator().manual_seed(0))
    with torch.no_grad():
        expected = trainer.model.traj_loglik(windows, trainer.model.prior_transform(z0))
        actual = loaded.model.traj_loglik(windows, loaded.model.prior_transform(z0))
    assert torch.equal(expected, actual)

    assert loaded.iteration == 1
    assert loaded.env_id == "gridmaze-v0"
    assert loaded.trainer_config == fast_trainer_cfg
    assert loaded.stats.max_abs_diff(maze_dataset.stats) == 0.0
    assert loaded.extra["max_return"] == float(maze_dataset.returns.max())
    indices = trainer.batch_indices(0)
    assert torch.equal(loaded.chain_store.get_batch(indices), trainer.store.get_batch(indices))
    print("✓ Checkpoint round trip passed")


def test_minimal_checkpoint(tmp_path, small_model):
    path = save_checkpoint(tmp_path / "bare.pt", Checkpoint(model=small_model, stats=None))
    loaded = load_checkpoint(path)
    assert loaded.stats is None
    assert loaded.chain_store is None
    assert loaded.model.cfg == small_model.cfg
    assert not (tmp_path / "bare.pt.tmp").exists()


def test_missing_checkpoint(tmp_path):
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "absent.pt")


def test_unreadable_checkpoint(tmp_path):
    path = tmp_path / "junk.pt"
    path.write_bytes(b"not a checkpoint")
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_wrong_format_version(tmp_path):
    path = tmp_path / "old.pt"
    torch.save({"format_version": 0}, path)
    with pytest.raises(CheckpointError):
        load_checkpoint(path)
