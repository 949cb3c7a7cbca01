"""
Tests for the multi-seed experiment runner and the metric exports
"""
import pandas as pd
import pytest

from lpt.config import EvalConfig, LangevinConfig, TrainerConfig
from lpt.errors import ValidationError
from lpt.experiments import run_experiment
from lpt.visualize import plot_training_curves, summarize_training

TINY_MODEL = {"latent_dim": 8, "context_length": 4, "num_layers": 1, "hidden_width": 16, "return_hidden": 16}
TINY_TRAINER = TrainerConfig(iterations=2, batch_size=8)
TINY_EVAL = EvalConfig(sampler=LangevinConfig(step_size=0.3, num_steps=4))


@pytest.mark.parametrize("name", ["stitching", "ablation"])
def test_experiment_report(tmp_path, name):
    """One tiny seed produces the per-seed CSV, the criteria and a pass flag"""
    report = run_experiment(
        name,
        seeds=1,
        trainer_cfg=TINY_TRAINER,
        eval_cfg=TINY_EVAL,
        model_overrides=TINY_MODEL,
        n=20,
        episodes=1,
        out_dir=tmp_path,
    )
    assert report["experiment"] == name
    assert isinstance(report["passed"], bool)
    assert all({"value", "required", "passed"} <= set(c) for c in report["criteria"].values())
    frame = pd.read_csv(tmp_path / f"{name}_seeds.csv")
    assert frame["seed"].tolist() == [0]
    if name == "ablation":
        assert "identity_success" in frame
    else:
        assert {"lpt_w1_success", "lpt_w4_success", "bc_success"} <= set(frame.columns)
    assert (tmp_path / f"{name}_report.json").exists()


def test_experiment_rejects_bad_arguments():
    with pytest.raises(ValidationError):
        run_experiment("maze2d")
    with pytest.raises(ValidationError):
        run_experiment("stitching", seeds=0)
    with pytest.raises(ValidationError):
        run_experiment("ablation", seeds=1, model_overrides={"prior_type": "identity"})


def test_training_plot_needs_columns(tmp_path):
    with pytest.raises(ValidationError):
        plot_training_curves(pd.DataFrame({"iteration": [1]}), tmp_path / "x.png")


def test_summarize_training():
    log = pd.DataFrame(
        {
            "iteration": [1, 2, 3],
            "action_nll": [3.0, 2.0, 1.0],
            "return_nll": [1.0, 1.5, 0.5],
            "grad_norm_prior": [0.1, 0.1, 0.1],
            "grad_norm_generator": [1.0, 1.0, 1.0],
            "grad_norm_return": [0.5, 0.5, 0.5],
            "wall_clock": [0.1, 0.1, 0.1],
        }
    )
    summary = summarize_training(log, tail=2)
    assert summary["iterations"] == 3
    assert summary["action_nll_final"] == pytest.approx(1.5)
    assert summary["return_nll_best"] == pytest.approx(0.5)
    assert summarize_training(log.iloc[:0]) == {"iterations": 0}
