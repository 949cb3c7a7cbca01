"""
Tests for the lpt command line
"""
import json

import pandas as pd
import pytest

from lpt.checkpoint import load_checkpoint
from lpt.cli import build_parser, main


def _run(command: str) -> int:
    return main(["--log-level", "ERROR", *command.split()])


def _gen(tmp_path, name="maze.jsonl", n=20, seed=0):
    out = tmp_path / name
    assert _run(f"gen-data --env gridmaze-v0 --n {n} --seed {seed} --out {out}") == 0
    return out


@pytest.fixture
def trained(tmp_path):
    """A dataset, a two-iteration checkpoint and its training log."""
    dataset = _gen(tmp_path)
    checkpoint = tmp_path / "model.pt"
    log = tmp_path / "training_log.csv"
    code = _run(
        f"train --dataset {dataset} --seed 0 --iterations 2 --batch-size 8 --latent-dim 8 --context-length 4 "
        f"--out {checkpoint} --log {log}"
    )
    assert code == 0
    return dataset, checkpoint, log


def test_gen_data_is_byte_identical(tmp_path):
    first = _gen(tmp_path, "a.jsonl")
    second = _gen(tmp_path, "b.jsonl")
    assert first.read_bytes() == second.read_bytes()


def test_gen_data_unknown_env(tmp_path):
    assert _run(f"gen-data --env mujoco-v0 --n 5 --seed 0 --out {tmp_path / 'x.jsonl'}") == 2


def test_gen_data_needs_a_seed(tmp_path, monkeypatch):
    monkeypatch.delenv("LPT_SEED", raising=False)
    assert _run(f"gen-data --env gridmaze-v0 --n 5 --out {tmp_path / 'x.jsonl'}") == 2


def test_usage_errors_exit_2():
    assert main(["train"]) == 2
    assert main(["no-such-command"]) == 2


def test_train_writes_checkpoint_and_log(trained):
    _, checkpoint, log = trained
    assert checkpoint.exists()
    assert pd.read_csv(log)["iteration"].tolist() == [1, 2]


def test_train_resume(tmp_path, trained):
    """A resumed run continues the iteration counter"""
    dataset, checkpoint, _ = trained
    log = tmp_path / "resumed.csv"
    code = _run(
        f"train --dataset {dataset} --seed 0 --iterations 3 --batch-size 8 --resume {checkpoint} "
        f"--out {checkpoint} --log {log}"
    )
    assert code == 0
    assert pd.read_csv(log)["iteration"].tolist() == [3]


def test_train_bad_config_value(tmp_path):
    dataset = _gen(tmp_path)
    config_file = tmp_path / "config.json"
    config_file.write_text(json.dumps({"trainer": {"batch_size": 0}}))
    assert _run(f"train --dataset {dataset} --seed 0 --config {config_file} --out {tmp_path / 'm.pt'}") == 2


def test_train_sampler_and_optimizer_flags(tmp_path):
    """Langevin and optimizer flags override the config file field by field"""
    dataset = _gen(tmp_path)
    config_file = tmp_path / "config.json"
    config_file.write_text(json.dumps({"trainer": {"optimizer": "adam", "sampler": {"step_size": 0.2}}}))
    checkpoint = tmp_path / "m.pt"
    code = _run(
        f"train --dataset {dataset} --seed 0 --iterations 1 --batch-size 8 --latent-dim 8 --context-length 4 "
        f"--config {config_file} --langevin-steps 3 --optimizer sgd --out {checkpoint} --log {tmp_path / 'log.csv'}"
    )
    assert code == 0
    cfg = load_checkpoint(checkpoint).trainer_config
    assert cfg.optimizer == "sgd"
    assert (cfg.sampler.step_size, cfg.sampler.num_steps) == (0.2, 3)


def test_eval_and_export_metrics(tmp_path, trained):
    """eval writes its report and episode CSV; export-metrics renders them"""
    _, checkpoint, log = trained
    out_dir = tmp_path / "eval"
    code = _run(f"eval --checkpoint {checkpoint} --episodes 1 --weights 1 4 --steps 4 --seed 0 --out-dir {out_dir}")
    assert code == 0
    report = json.loads((out_dir / "eval_report.json").read_text())
    assert report["env_id"] == "gridmaze-v0"
    assert set(report["weights"]) == {"1", "4"}
    assert len(pd.read_csv(out_dir / "eval_episodes.csv")) == 2

    metrics_dir = tmp_path / "metrics"
    code = _run(f"export-metrics --log {log} --reports {out_dir / 'eval_report.json'} --out-dir {metrics_dir}")
    assert code == 0
    metrics = json.loads((metrics_dir / "metrics.json").read_text())
    assert metrics["training"]["iterations"] == 2
    assert (metrics_dir / "training_curves.png").exists()
    assert (metrics_dir / "eval_report.png").exists()
    print("✓ Evaluation and metrics export passed")


def test_eval_environment_mismatch(tmp_path, trained):
    _, checkpoint, _ = trained
    assert _run(f"eval --checkpoint {checkpoint} --env connect4-v0 --episodes 1 --out-dir {tmp_path}") == 2


def test_eval_missing_checkpoint(tmp_path):
    assert _run(f"eval --checkpoint {tmp_path / 'absent.pt'}") == 2


def test_export_metrics_needs_inputs():
    assert _run("export-metrics") == 2


def test_verify_gradcheck(tmp_path):
    out = tmp_path / "verify.json"
    assert _run(f"verify --suite gradcheck --out {out}") == 0
    payload = json.loads(out.read_text())
    assert all(r["passed"] for r in payload["results"])


def test_verify_catches_corrupted_operation():
    assert _run("verify --suite gradcheck --corrupt-op logpdf_normal") == 1


def test_corrupt_op_is_hidden_from_help():
    parser = build_parser()
    verify = parser._subparsers._group_actions[0].choices["verify"]
    assert "--corrupt-op" not in verify.format_help()
